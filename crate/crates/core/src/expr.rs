//! Complex arithmetic expressions for user-supplied data.
//!
//! Grammar: `+ - * / ^`, parentheses, numbers, the constants `i`, `pi`, `e`,
//! the variables `z`, `x`, `y`, `nu`, `tau` and the functions `exp`, `log`,
//! `sqrt`, `sin`, `cos`, `tan`, `sinh`, `cosh`, `re`, `im`, `conj`, `abs`.
//! Branches are principal.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Z,
    X,
    Y,
    Nu,
    Tau,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Re,
    Im,
    Conj,
    Abs,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(Complex64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Point data an expression may refer to.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env {
    pub z: Complex64,
    pub nu: Complex64,
    pub tau: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    uses_frame: bool,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected {:?} in {text:?}",
                p.tokens[p.pos]
            )));
        }
        let uses_frame = uses_frame(&root);
        Ok(Expr {
            source: text.to_string(),
            root,
            uses_frame,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether `nu` or `tau` appear (only meaningful on the boundary).
    pub fn uses_frame(&self) -> bool {
        self.uses_frame
    }

    pub fn eval(&self, env: &Env) -> Complex64 {
        eval(&self.root, env)
    }

    pub fn eval_at(&self, z: Complex64) -> Complex64 {
        self.eval(&Env {
            z,
            ..Env::default()
        })
    }
}

fn uses_frame(n: &Node) -> bool {
    match n {
        Node::Var(v) => matches!(v, Var::Nu | Var::Tau),
        Node::Const(_) => false,
        Node::Neg(a) | Node::Call(_, a) => uses_frame(a),
        Node::Bin(_, a, b) => uses_frame(a) || uses_frame(b),
    }
}

fn eval(n: &Node, env: &Env) -> Complex64 {
    match n {
        Node::Const(c) => *c,
        Node::Var(v) => match v {
            Var::Z => env.z,
            Var::X => Complex64::new(env.z.re, 0.0),
            Var::Y => Complex64::new(env.z.im, 0.0),
            Var::Nu => env.nu,
            Var::Tau => env.tau,
        },
        Node::Neg(a) => -eval(a, env),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, env), eval(b, env));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => {
                    if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= 64.0 {
                        a.powi(b.re as i32)
                    } else {
                        a.powc(b)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, env);
            match f {
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Sinh => a.sinh(),
                Func::Cosh => a.cosh(),
                Func::Re => Complex64::new(a.re, 0.0),
                Func::Im => Complex64::new(a.im, 0.0),
                Func::Conj => a.conj(),
                Func::Abs => Complex64::new(a.norm(), 0.0),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number {s:?}")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::Open);
            i += 1;
        } else if c == ')' {
            out.push(Token::Close);
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Node::Const(Complex64::new(v, 0.0))),
            Some(Token::Open) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Token::Close) => Ok(e),
                    _ => Err(Error::Expression("missing ')'".into())),
                }
            }
            Some(Token::Ident(name)) => {
                if let Some(f) = function(&name) {
                    if self.next() != Some(Token::Open) {
                        return Err(Error::Expression(format!(
                            "{name} needs an argument in parentheses"
                        )));
                    }
                    let arg = self.expr()?;
                    if self.next() != Some(Token::Close) {
                        return Err(Error::Expression("missing ')'".into()));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "i" => Ok(Node::Const(Complex64::i())),
                    "pi" => Ok(Node::Const(Complex64::new(std::f64::consts::PI, 0.0))),
                    "e" => Ok(Node::Const(Complex64::new(std::f64::consts::E, 0.0))),
                    "z" => Ok(Node::Var(Var::Z)),
                    "x" => Ok(Node::Var(Var::X)),
                    "y" => Ok(Node::Var(Var::Y)),
                    "nu" => Ok(Node::Var(Var::Nu)),
                    "tau" => Ok(Node::Var(Var::Tau)),
                    _ => Err(Error::Expression(format!("unknown name {name:?}"))),
                }
            }
            Some(t) => Err(Error::Expression(format!("unexpected {t:?}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}

fn function(name: &str) -> Option<Func> {
    Some(match name {
        "exp" => Func::Exp,
        "log" | "ln" => Func::Log,
        "sqrt" => Func::Sqrt,
        "sin" => Func::Sin,
        "cos" => Func::Cos,
        "tan" => Func::Tan,
        "sinh" => Func::Sinh,
        "cosh" => Func::Cosh,
        "re" => Func::Re,
        "im" => Func::Im,
        "conj" => Func::Conj,
        "abs" => Func::Abs,
        _ => return None,
    })
}
