//! Scalar expression trees and the text grammar for user-defined vector fields.
//!
//! Format: one line per component, `f<i> = <expr>`, `#` starts a comment.
//! Identifiers `x0..x{n-1}` and `u0..u{m-1}` reference state and input
//! coordinates. Precedence: `^` > unary minus > `*`,`/` > `+`,`-`;
//! `^` is right-associative.

use super::FuncError;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    State(usize),
    Input(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Sign,
    Acos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarRef),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

const ACOS_CLAMP: f64 = 1e-12;

impl Expr {
    pub fn eval(&self, state: &[f64], input: &[f64]) -> Result<f64, FuncError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(VarRef::State(i)) => Ok(state[*i]),
            Expr::Var(VarRef::Input(i)) => Ok(input[*i]),
            Expr::Unary(op, a) => {
                let v = a.eval(state, input)?;
                match op {
                    UnaryOp::Neg => Ok(-v),
                    UnaryOp::Sin => Ok(v.sin()),
                    UnaryOp::Cos => Ok(v.cos()),
                    UnaryOp::Exp => Ok(v.exp()),
                    UnaryOp::Sqrt => {
                        if v < -ACOS_CLAMP {
                            Err(FuncError::DomainError(format!("sqrt of negative value {v}")))
                        } else {
                            Ok(v.max(0.0).sqrt())
                        }
                    }
                    UnaryOp::Abs => Ok(v.abs()),
                    UnaryOp::Sign => Ok(if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }),
                    UnaryOp::Acos => {
                        if v.abs() > 1.0 + ACOS_CLAMP {
                            Err(FuncError::DomainError(format!("acos argument {v} outside [-1, 1]")))
                        } else {
                            Ok(v.clamp(-1.0, 1.0).acos())
                        }
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let va = a.eval(state, input)?;
                let vb = b.eval(state, input)?;
                match op {
                    BinOp::Add => Ok(va + vb),
                    BinOp::Sub => Ok(va - vb),
                    BinOp::Mul => Ok(va * vb),
                    BinOp::Div => {
                        if vb == 0.0 {
                            Err(FuncError::DomainError("division by zero".into()))
                        } else {
                            Ok(va / vb)
                        }
                    }
                    BinOp::Pow => Ok(va.powf(vb)),
                }
            }
        }
    }

    /// Largest referenced state / input indices, if any.
    pub fn max_var_indices(&self, max_state: &mut Option<usize>, max_input: &mut Option<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(VarRef::State(i)) => {
                *max_state = Some(max_state.map_or(*i, |m| m.max(*i)));
            }
            Expr::Var(VarRef::Input(i)) => {
                *max_input = Some(max_input.map_or(*i, |m| m.max(*i)));
            }
            Expr::Unary(_, a) => a.max_var_indices(max_state, max_input),
            Expr::Binary(_, a, b) => {
                a.max_var_indices(max_state, max_input);
                b.max_var_indices(max_state, max_input);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(_) | Expr::Var(_) => 5,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Unary(_, _) => 5,
            Expr::Binary(BinOp::Pow, _, _) => 4,
            Expr::Binary(BinOp::Mul | BinOp::Div, _, _) => 2,
            Expr::Binary(BinOp::Add | BinOp::Sub, _, _) => 1,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(VarRef::State(i)) => write!(f, "x{i}"),
            Expr::Var(VarRef::Input(i)) => write!(f, "u{i}"),
            Expr::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                paren(f, a, 4)
            }
            Expr::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Abs => "abs",
                    UnaryOp::Sign => "sign",
                    UnaryOp::Acos => "acos",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                match op {
                    // Right-associative.
                    BinOp::Pow => {
                        paren(f, a, prec + 1)?;
                        write!(f, "{sym}")?;
                        paren(f, b, prec)
                    }
                    _ => {
                        paren(f, a, prec)?;
                        write!(f, " {sym} ")?;
                        paren(f, b, prec + 1)
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    line: usize,
    col: usize,
    tokens: Vec<(Token, usize, usize)>,
}

fn lex_line(src: &str, line: usize) -> Result<Vec<(Token, usize, usize)>, FuncError> {
    let mut lx = Lexer { src, line, col: 1, tokens: Vec::new() };
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        match c {
            ' ' | '\t' => {
                i += 1;
            }
            '#' => break,
            '+' => {
                lx.tokens.push((Token::Plus, line, col));
                i += 1;
            }
            '-' => {
                lx.tokens.push((Token::Minus, line, col));
                i += 1;
            }
            '*' => {
                lx.tokens.push((Token::Star, line, col));
                i += 1;
            }
            '/' => {
                lx.tokens.push((Token::Slash, line, col));
                i += 1;
            }
            '^' => {
                lx.tokens.push((Token::Caret, line, col));
                i += 1;
            }
            '(' => {
                lx.tokens.push((Token::LParen, line, col));
                i += 1;
            }
            ')' => {
                lx.tokens.push((Token::RParen, line, col));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent part.
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| FuncError::ParseError {
                    line,
                    col,
                    message: format!("invalid number literal `{text}`"),
                })?;
                lx.tokens.push((Token::Num(v), line, col));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                lx.tokens.push((Token::Ident(src[start..i].to_string()), line, col));
            }
            other => {
                return Err(FuncError::ParseError {
                    line,
                    col,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    let _ = (lx.src, lx.line, lx.col);
    Ok(lx.tokens)
}

struct Parser {
    tokens: Vec<(Token, usize, usize)>,
    pos: usize,
    line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _, _)| t)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t.map(|(t, _, _)| t)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|&(_, l, c)| (l, c))
            .unwrap_or((self.line, 1))
    }

    fn err(&self, message: impl Into<String>) -> FuncError {
        let (line, col) = self.here();
        FuncError::ParseError { line, col, message: message.into() }
    }

    fn expr(&mut self) -> Result<Expr, FuncError> {
        let mut lhs = self.term()?;
        while let Some(tok) = self.peek() {
            let op = match tok {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, FuncError> {
        let mut lhs = self.unary()?;
        while let Some(tok) = self.peek() {
            let op = match tok {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FuncError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.next();
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, FuncError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.next();
            // Right-associative; the exponent may carry a unary minus.
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, FuncError> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(Token::Ident(name)) => self.ident(name),
            _ => Err(self.err("expected a value")),
        }
    }

    fn ident(&mut self, name: String) -> Result<Expr, FuncError> {
        if let Some(var) = parse_var(&name) {
            return Ok(Expr::Var(var));
        }
        let func = match name.as_str() {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "sign" => UnaryOp::Sign,
            "acos" => UnaryOp::Acos,
            _ => return Err(FuncError::UnknownIdentifier(name)),
        };
        match self.next() {
            Some(Token::LParen) => {}
            _ => return Err(self.err(format!("expected `(` after `{name}`"))),
        }
        let arg = self.expr()?;
        match self.next() {
            Some(Token::RParen) => Ok(Expr::Unary(func, Box::new(arg))),
            _ => Err(self.err("expected `)`")),
        }
    }
}

fn parse_var(name: &str) -> Option<VarRef> {
    let (kind, rest) = name.split_at(1);
    let idx: usize = rest.parse().ok()?;
    if rest.len() > 1 && rest.starts_with('0') {
        return None; // no leading zeros in indices
    }
    match kind {
        "x" => Some(VarRef::State(idx)),
        "u" => Some(VarRef::Input(idx)),
        _ => None,
    }
}

/// Parse a single expression (no `f<i> =` prefix).
pub fn parse_expr(src: &str, line: usize) -> Result<Expr, FuncError> {
    let tokens = lex_line(src, line)?;
    if tokens.is_empty() {
        return Err(FuncError::ParseError { line, col: 1, message: "empty expression".into() });
    }
    let mut parser = Parser { tokens, pos: 0, line };
    let e = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.err("unexpected trailing input"));
    }
    Ok(e)
}

/// Parse the full multi-line component format, returning the component
/// expressions in order f0, f1, ...
pub fn parse_components(text: &str) -> Result<Vec<Expr>, FuncError> {
    let mut defs: Vec<(usize, Expr, usize)> = Vec::new();
    for (lineno0, raw) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let (lhs, rhs) = line.split_once('=').ok_or(FuncError::ParseError {
            line: lineno,
            col: 1,
            message: "expected `f<i> = <expr>`".into(),
        })?;
        let lhs = lhs.trim();
        let comp: usize = lhs
            .strip_prefix('f')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FuncError::ParseError {
                line: lineno,
                col: 1,
                message: format!("expected component name `f<i>`, got `{lhs}`"),
            })?;
        let expr = parse_expr(rhs, lineno)?;
        defs.push((comp, expr, lineno));
    }
    if defs.is_empty() {
        return Err(FuncError::ParseError { line: 1, col: 1, message: "no components defined".into() });
    }
    defs.sort_by_key(|&(comp, _, _)| comp);
    let n = defs.len();
    for (expected, (comp, _, lineno)) in defs.iter().enumerate() {
        if *comp != expected {
            return Err(FuncError::ArityMismatch(format!(
                "components must be exactly f0..f{} (line {}: f{})",
                n - 1,
                lineno,
                comp
            )));
        }
    }
    Ok(defs.into_iter().map(|(_, e, _)| e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(src: &str) -> Expr {
        parse_expr(src, 1).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            e("1 + 2 * 3"),
            Expr::Binary(
                BinOp::Add,
                Box::new(Expr::Const(1.0)),
                Box::new(Expr::Binary(
                    BinOp::Mul,
                    Box::new(Expr::Const(2.0)),
                    Box::new(Expr::Const(3.0))
                ))
            )
        );
        // ^ binds tighter than unary minus: -x0^2 == -(x0^2)
        let neg_sq = e("-x0^2");
        assert!((neg_sq.eval(&[3.0], &[]).unwrap() + 9.0).abs() < 1e-12);
        // ^ right-associative: 2^3^2 == 2^9
        assert!((e("2^3^2").eval(&[], &[]).unwrap() - 512.0).abs() < 1e-12);
        // exponent with unary minus
        assert!((e("2^-2").eval(&[], &[]).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn evaluates_functions() {
        assert!((e("sin(0)").eval(&[], &[]).unwrap()).abs() < 1e-12);
        assert!((e("sqrt(4)").eval(&[], &[]).unwrap() - 2.0).abs() < 1e-12);
        assert!((e("sign(-3)").eval(&[], &[]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(e("sign(0)").eval(&[], &[]).unwrap(), 0.0);
        assert!((e("abs(-2.5)").eval(&[], &[]).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(e("1/0").eval(&[], &[]), Err(FuncError::DomainError(_))));
        assert!(matches!(e("sqrt(0-1)").eval(&[], &[]), Err(FuncError::DomainError(_))));
        assert!(matches!(e("acos(2)").eval(&[], &[]), Err(FuncError::DomainError(_))));
        // Values within the clamp are accepted.
        assert!(e("acos(1)").eval(&[], &[]).is_ok());
    }

    #[test]
    fn parse_error_positions() {
        let err = parse_expr("x0 +", 3).unwrap_err();
        match err {
            FuncError::ParseError { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(matches!(parse_expr("foo(1)", 1), Err(FuncError::UnknownIdentifier(_))));
    }

    #[test]
    fn components_format() {
        let exprs = parse_components("# a comment\nf0 = x0 + u0\nf1 = x1 * 2 # inline\n").unwrap();
        assert_eq!(exprs.len(), 2);
        let err = parse_components("f0 = x0\nf2 = x0").unwrap_err();
        assert!(matches!(err, FuncError::ArityMismatch(_)));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-10.0..10.0f64).prop_map(|v| Expr::Const((v * 64.0).round() / 64.0)),
            (0usize..3).prop_map(|i| Expr::Var(VarRef::State(i))),
            (0usize..2).prop_map(|i| Expr::Var(VarRef::Input(i))),
        ];
        leaf.prop_recursive(4, 32, 4, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow),
                ])
                    .prop_map(|(a, b, op)| Expr::Binary(op, Box::new(a), Box::new(b))),
                (inner, prop_oneof![
                    Just(UnaryOp::Neg),
                    Just(UnaryOp::Sin),
                    Just(UnaryOp::Cos),
                    Just(UnaryOp::Exp),
                    Just(UnaryOp::Sqrt),
                    Just(UnaryOp::Abs),
                    Just(UnaryOp::Sign),
                    Just(UnaryOp::Acos),
                ])
                    .prop_map(|(a, op)| Expr::Unary(op, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(expr in arb_expr()) {
            // pretty-print(parse(s)) parses to an identical tree
            let source = expr.to_string();
            let parsed = parse_expr(&source, 1).unwrap();
            let reparsed = parse_expr(&parsed.to_string(), 1).unwrap();
            prop_assert_eq!(reparsed, parsed);
        }
    }
}
