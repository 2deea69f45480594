// `props::ALL` is read by the acceptance target
#[allow(dead_code)]
mod props;

#[test]
fn gauss_rule_integrates_degree_19_exactly() {
    props::gauss_rule_integrates_degree_19_exactly(256).unwrap();
}

#[test]
fn element_integrals_match_refined_quadrature() {
    props::element_integrals_match_refined_quadrature(100).unwrap();
}

#[test]
fn element_integrals_telescope_over_closed_partitions() {
    props::element_integrals_telescope_over_closed_partitions(256).unwrap();
}

#[test]
fn normalized_wavelets_have_unit_norm() {
    props::normalized_wavelets_have_unit_norm(24).unwrap();
}

#[test]
fn gram_of_distinct_sources_is_positive_definite() {
    props::gram_of_distinct_sources_is_positive_definite(16).unwrap();
}

#[test]
fn min_norm_solve_matches_dense_oracle() {
    props::min_norm_solve_matches_dense_oracle(256).unwrap();
}

#[test]
fn fine_layer_sets_cover_their_band() {
    props::fine_layer_sets_cover_their_band(8).unwrap();
}

#[test]
fn evaluated_field_satisfies_cauchy_riemann() {
    props::evaluated_field_satisfies_cauchy_riemann(32).unwrap();
}
