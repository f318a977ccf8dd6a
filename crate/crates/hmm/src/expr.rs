//! Tiny arithmetic expression language for inline scenario coefficients.
//!
//! Vocabulary: numeric literals, the variables `x`, `y`, `t`, `c`, `u` and
//! the constant `pi`; `+ - * /` with unary minus and parentheses; the
//! functions `sin`, `cos`, `exp`, `sqrt`, `abs` and the four-argument
//! Gaussian bump `gauss(cx, cy, sigma, amp)`.

use std::fmt;

/// Variable bindings for one evaluation. Unused fields are simply ignored by
/// expressions that do not mention them.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bindings {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    /// Concentration, for mobility expressions.
    pub c: f64,
    /// Velocity magnitude, for dispersion expressions.
    pub u: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprError {
    UnexpectedChar { position: usize, found: char },
    UnexpectedEnd,
    UnknownIdentifier { position: usize, name: String },
    WrongArity { position: usize, name: String, expected: usize, found: usize },
    TrailingInput { position: usize },
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprError::UnexpectedChar { position, found } => {
                write!(f, "unexpected character '{found}' at byte {position}")
            }
            ExprError::UnexpectedEnd => write!(f, "unexpected end of expression"),
            ExprError::UnknownIdentifier { position, name } => {
                write!(f, "unknown identifier '{name}' at byte {position}")
            }
            ExprError::WrongArity { position, name, expected, found } => write!(
                f,
                "function '{name}' at byte {position} takes {expected} argument(s), got {found}"
            ),
            ExprError::TrailingInput { position } => {
                write!(f, "unparsed input starting at byte {position}")
            }
        }
    }
}

impl std::error::Error for ExprError {}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Var {
    X,
    Y,
    T,
    C,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

#[derive(Clone, Debug)]
enum Node {
    Constant(f64),
    Variable(Var),
    Unary(Func, Box<Node>),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// amp * exp(-((x-cx)^2 + (y-cy)^2) / (2 sigma^2))
    Gauss { cx: f64, cy: f64, sigma: f64, amp: f64 },
}

/// A parsed, immutable expression.
#[derive(Clone, Debug)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { bytes: source.as_bytes(), pos: 0 };
        p.skip_ws();
        let root = p.sum()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return Err(ExprError::TrailingInput { position: p.pos });
        }
        Ok(Expr { root, source: source.to_owned() })
    }

    pub fn eval(&self, b: &Bindings) -> f64 {
        eval_node(&self.root, b)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the expression never reads the given variable name.
    pub fn is_constant_in(&self, var: char) -> bool {
        let target = match var {
            'x' => Var::X,
            'y' => Var::Y,
            't' => Var::T,
            'c' => Var::C,
            'u' => Var::U,
            _ => return true,
        };
        !mentions(&self.root, target)
    }
}

fn mentions(node: &Node, target: Var) -> bool {
    match node {
        Node::Constant(_) | Node::Gauss { .. } => false,
        Node::Variable(v) => *v == target,
        Node::Unary(_, a) | Node::Neg(a) => mentions(a, target),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            mentions(a, target) || mentions(b, target)
        }
    }
}

fn eval_node(node: &Node, b: &Bindings) -> f64 {
    match node {
        Node::Constant(v) => *v,
        Node::Variable(Var::X) => b.x,
        Node::Variable(Var::Y) => b.y,
        Node::Variable(Var::T) => b.t,
        Node::Variable(Var::C) => b.c,
        Node::Variable(Var::U) => b.u,
        Node::Neg(a) => -eval_node(a, b),
        Node::Unary(f, a) => {
            let v = eval_node(a, b);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => v.abs(),
            }
        }
        Node::Add(a, c) => eval_node(a, b) + eval_node(c, b),
        Node::Sub(a, c) => eval_node(a, b) - eval_node(c, b),
        Node::Mul(a, c) => eval_node(a, b) * eval_node(c, b),
        Node::Div(a, c) => eval_node(a, b) / eval_node(c, b),
        Node::Gauss { cx, cy, sigma, amp } => {
            let dx = b.x - cx;
            let dy = b.y - cy;
            amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut node = self.product()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    node = Node::Add(Box::new(node), Box::new(self.product()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    node = Node::Sub(Box::new(node), Box::new(self.product()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut node = self.atom()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    node = Node::Mul(Box::new(node), Box::new(self.atom()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    node = Node::Div(Box::new(node), Box::new(self.atom()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        match self.peek() {
            None => Err(ExprError::UnexpectedEnd),
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.atom()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(ExprError::UnexpectedChar { position: self.pos, found: c as char }),
        }
    }

    fn expect(&mut self, want: u8) -> Result<(), ExprError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(ExprError::UnexpectedChar { position: self.pos, found: c as char }),
            None => Err(ExprError::UnexpectedEnd),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii slice");
        text.parse::<f64>()
            .map(Node::Constant)
            .map_err(|_| ExprError::UnexpectedChar { position: start, found: text.chars().next().unwrap_or('?') })
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii slice");
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut args = vec![self.sum()?];
            loop {
                self.skip_ws();
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                        args.push(self.sum()?);
                    }
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        return Err(ExprError::UnexpectedChar { position: self.pos, found: c as char })
                    }
                    None => return Err(ExprError::UnexpectedEnd),
                }
            }
            let unary = |f: Func, args: Vec<Node>| -> Result<Node, ExprError> {
                if args.len() != 1 {
                    return Err(ExprError::WrongArity {
                        position: start,
                        name: name.to_owned(),
                        expected: 1,
                        found: args.len(),
                    });
                }
                Ok(Node::Unary(f, Box::new(args.into_iter().next().expect("one arg"))))
            };
            return match name {
                "sin" => unary(Func::Sin, args),
                "cos" => unary(Func::Cos, args),
                "exp" => unary(Func::Exp, args),
                "sqrt" => unary(Func::Sqrt, args),
                "abs" => unary(Func::Abs, args),
                "gauss" => {
                    if args.len() != 4 {
                        return Err(ExprError::WrongArity {
                            position: start,
                            name: name.to_owned(),
                            expected: 4,
                            found: args.len(),
                        });
                    }
                    // the bump parameters must be literals
                    let mut vals = [0.0; 4];
                    for (slot, arg) in vals.iter_mut().zip(&args) {
                        *slot = eval_node(arg, &Bindings::default());
                    }
                    for arg in &args {
                        for v in ['x', 'y', 't', 'c', 'u'] {
                            let target = match v {
                                'x' => Var::X,
                                'y' => Var::Y,
                                't' => Var::T,
                                'c' => Var::C,
                                _ => Var::U,
                            };
                            if mentions(arg, target) {
                                return Err(ExprError::UnknownIdentifier {
                                    position: start,
                                    name: format!("non-constant gauss argument '{v}'"),
                                });
                            }
                        }
                    }
                    Ok(Node::Gauss { cx: vals[0], cy: vals[1], sigma: vals[2], amp: vals[3] })
                }
                _ => Err(ExprError::UnknownIdentifier { position: start, name: name.to_owned() }),
            };
        }
        match name {
            "x" => Ok(Node::Variable(Var::X)),
            "y" => Ok(Node::Variable(Var::Y)),
            "t" => Ok(Node::Variable(Var::T)),
            "c" => Ok(Node::Variable(Var::C)),
            "u" => Ok(Node::Variable(Var::U)),
            "pi" => Ok(Node::Constant(std::f64::consts::PI)),
            _ => Err(ExprError::UnknownIdentifier { position: start, name: name.to_owned() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, b: Bindings) -> f64 {
        Expr::parse(src).unwrap().eval(&b)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", Bindings::default()), 7.0);
        assert_eq!(eval("(1 + 2) * 3", Bindings::default()), 9.0);
        assert_eq!(eval("-2 * -3", Bindings::default()), 6.0);
        assert_eq!(eval("8 / 2 / 2", Bindings::default()), 2.0);
    }

    #[test]
    fn variables_and_functions() {
        let b = Bindings { x: 0.5, y: 0.25, t: 1.0, c: 0.1, u: 2.0 };
        assert!((eval("sin(pi * x)", b) - 1.0).abs() < 1e-15);
        assert!((eval("exp(-t)", b) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(eval("1 + c + u", b), 3.1);
    }

    #[test]
    fn gauss_bump() {
        let e = Expr::parse("gauss(0.1, 0.1, 0.05, 50)").unwrap();
        let centre = Bindings { x: 0.1, y: 0.1, ..Bindings::default() };
        assert!((e.eval(&centre) - 50.0).abs() < 1e-12);
        let far = Bindings { x: 0.9, y: 0.9, ..Bindings::default() };
        assert!(e.eval(&far) < 1e-10);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(Expr::parse("1 + $"), Err(ExprError::UnexpectedChar { position: 4, .. })));
        assert!(matches!(Expr::parse("foo(1)"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(Expr::parse("sin(1, 2)"), Err(ExprError::WrongArity { .. })));
        assert!(matches!(Expr::parse("1 2"), Err(ExprError::TrailingInput { .. })));
    }

    #[test]
    fn constant_detection() {
        let e = Expr::parse("1 + sin(x)").unwrap();
        assert!(!e.is_constant_in('x'));
        assert!(e.is_constant_in('t'));
    }
}
