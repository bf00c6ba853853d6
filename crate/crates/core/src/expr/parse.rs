//! Recursive-descent parser for the metric expression language.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ('-')? power
//! power  := atom ('^' factor)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    /// `position` is a 0-based character offset into the source text.
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("arity mismatch at position {position}: `{name}` {message}")]
    Arity {
        name: String,
        position: usize,
        message: String,
    },
    #[error("invalid coordinate list: {0}")]
    Coordinates(String),
}

impl ParseError {
    pub fn position(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownIdentifier { position, .. }
            | ParseError::Arity { position, .. } => Some(*position),
            ParseError::Coordinates(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn describe(t: &Token) -> String {
    match t {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier `{s}`"),
        Token::Plus => "'+'".into(),
        Token::Minus => "'-'".into(),
        Token::Star => "'*'".into(),
        Token::Slash => "'/'".into(),
        Token::Caret => "'^'".into(),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::Comma => "','".into(),
        Token::End => "end of input".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let simple = match c {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '^' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            ',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((tok, start));
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            let value = lexeme.parse::<f64>().map_err(|_| ParseError::Syntax {
                position: start,
                message: format!("malformed number `{lexeme}`"),
            })?;
            out.push((Token::Number(value), start));
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), start));
        } else {
            return Err(ParseError::Syntax {
                position: start,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    out.push((Token::End, chars.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    coords: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            position: self.offset(),
            message: format!("expected {expected}, found {}", describe(self.peek())),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::raw_binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::raw_binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Minus {
            self.bump();
            let inner = self.power()?;
            return Ok(Expr::raw_unary(UnaryOp::Neg, inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Expr::raw_binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Token::Number(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Token::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let (_, position) = self.bump();
                let called = *self.peek() == Token::LParen;
                if let Some(index) = self.coords.iter().position(|c| *c == name) {
                    if called {
                        return Err(ParseError::Arity {
                            name,
                            position,
                            message: "is a coordinate and cannot be called".into(),
                        });
                    }
                    return Ok(Expr::Var(index));
                }
                let Some(op) = UnaryOp::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier { name, position });
                };
                if !called {
                    return Err(ParseError::Arity {
                        name,
                        position,
                        message: "expects exactly one argument".into(),
                    });
                }
                self.bump();
                if *self.peek() == Token::RParen {
                    return Err(ParseError::Arity {
                        name,
                        position,
                        message: "expects exactly one argument, got none".into(),
                    });
                }
                let arg = self.expr()?;
                if *self.peek() == Token::Comma {
                    return Err(ParseError::Arity {
                        name,
                        position,
                        message: "expects exactly one argument, got several".into(),
                    });
                }
                self.expect_rparen()?;
                Ok(Expr::raw_unary(op, arg))
            }
            _ => Err(self.unexpected("a number, identifier or '('")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() != Token::RParen {
            return Err(self.unexpected("')'"));
        }
        self.bump();
        Ok(())
    }
}

fn check_coords(coords: &[String]) -> Result<(), ParseError> {
    if coords.is_empty() {
        return Err(ParseError::Coordinates("no coordinates given".into()));
    }
    for (i, c) in coords.iter().enumerate() {
        let mut chars = c.chars();
        let valid = chars.next().is_some_and(|f| f.is_alphabetic() || f == '_')
            && chars.all(|ch| ch.is_alphanumeric() || ch == '_');
        if !valid {
            return Err(ParseError::Coordinates(format!("`{c}` is not an identifier")));
        }
        if UnaryOp::from_name(c).is_some() {
            return Err(ParseError::Coordinates(format!("`{c}` clashes with a function name")));
        }
        if coords[..i].contains(c) {
            return Err(ParseError::Coordinates(format!("`{c}` appears twice")));
        }
    }
    Ok(())
}

/// Parse `text` over the ordered coordinate names `coords`. Variables are
/// numbered by their position in `coords`.
pub fn parse(text: &str, coords: &[String]) -> Result<Expr, ParseError> {
    check_coords(coords)?;
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
        coords,
    };
    let e = p.expr()?;
    if *p.peek() != Token::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c2() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn v(i: usize) -> Expr {
        Expr::Var(i)
    }

    fn k(x: f64) -> Expr {
        Expr::Const(x)
    }

    #[test]
    fn sum_of_power_and_sine() {
        let e = parse("x1^2 + sin(x2)", &c2()).unwrap();
        let want = Expr::raw_binary(
            BinaryOp::Add,
            Expr::raw_binary(BinaryOp::Pow, v(0), k(2.0)),
            Expr::raw_unary(UnaryOp::Sin, v(1)),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn reciprocal_of_sum() {
        let e = parse("1/(1+x1^2+x2^2)", &c2()).unwrap();
        let Expr::Binary(BinaryOp::Div, num, den) = &e else {
            panic!("expected a division, got {e:?}");
        };
        assert_eq!(**num, k(1.0));
        let (a, b) = (0.3, -0.7);
        assert_eq!(den.eval(&[a, b]).unwrap(), 1.0 + a * a + b * b);
        assert_eq!(e.eval(&[a, b]).unwrap(), 1.0 / (1.0 + a * a + b * b));
    }

    #[test]
    fn doubled_plus_is_rejected_at_second_plus() {
        let err = parse("x1 + + x2", &c2()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { position: 5, .. }), "{err:?}");
    }

    #[test]
    fn precedence_and_associativity() {
        let c = c2();
        let at = [2.0, 3.0];
        let cases = [
            ("2^3^2", 512.0),
            ("-x1^2", -4.0),
            ("x1 - x2 - 1", -2.0),
            ("x1 / x2 * 3", 2.0),
            ("2 * -x2", -6.0),
            ("x1^-1", 0.5),
            ("1.5e1 + .5", 15.5),
            ("2.5E-1 * 4", 1.0),
        ];
        for (src, want) in cases {
            let got = parse(src, &c).unwrap().eval(&at).unwrap();
            assert!((got - want).abs() < 1e-15, "{src}: {got} != {want}");
        }
    }

    #[test]
    fn identifier_errors() {
        let c = c2();
        assert!(matches!(
            parse("x3 + 1", &c),
            Err(ParseError::UnknownIdentifier { position: 0, .. })
        ));
        assert!(matches!(parse("sin x1", &c), Err(ParseError::Arity { .. })));
        assert!(matches!(parse("sin(x1, x2)", &c), Err(ParseError::Arity { .. })));
        assert!(matches!(parse("x1(2)", &c), Err(ParseError::Arity { .. })));
        assert!(matches!(parse("cos()", &c), Err(ParseError::Arity { .. })));
    }

    #[test]
    fn structural_errors() {
        let c = c2();
        for src in ["", "(x1", "x1)", "x1 ^", "3 $ 4", "* x1", "--x1"] {
            assert!(matches!(parse(src, &c), Err(ParseError::Syntax { .. })), "{src}");
        }
    }

    #[test]
    fn coordinate_list_is_validated() {
        assert!(parse("1", &[]).is_err());
        assert!(parse("1", &["a".into(), "a".into()]).is_err());
        assert!(parse("1", &["exp".into()]).is_err());
        assert!(parse("r * theta", &["r".into(), "theta".into()]).is_ok());
    }
}
