use thiserror::Error;

use super::{BinaryOp, Expression, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownSymbol { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let end = scan_number(bytes, i);
                let lexeme = &text[i..end];
                let value: f64 = lexeme.parse().map_err(|_| ParseError::Syntax {
                    offset: i,
                    message: format!("malformed number `{lexeme}`"),
                })?;
                i = end;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = i + 1;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                out.push((Tok::Ident(text[i..end].to_string()), start));
                i = end;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[idx].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if *self.peek() != Tok::Minus {
            return self.power();
        }
        // `-3` is a negative literal unless it is the base of a power,
        // where `^` binds tighter than negation.
        if let Tok::Num(v) = *self.peek_at(1) {
            if *self.peek_at(2) != Tok::Caret {
                self.bump();
                self.bump();
                return Ok(Expression::Constant(-v));
            }
        }
        self.bump();
        let inner = self.unary()?;
        Ok(Expression::unary(UnaryOp::Neg, inner))
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expression::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expression::Constant(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let op = UnaryOp::from_name(&name)
                        .ok_or(ParseError::UnknownSymbol { offset, name })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expression::unary(op, arg));
                }
                self.variable(&name)
                    .map(Expression::Variable)
                    .ok_or(ParseError::UnknownSymbol { offset, name })
            }
            _ => Err(self.unexpected("a number, variable, function call or `(`")),
        }
    }

    fn variable(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Some(i);
        }
        let digits = name.strip_prefix('x')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return None;
        }
        let k: usize = digits.parse().ok()?;
        if !self.names.is_empty() && k > self.names.len() {
            return None;
        }
        Some(k - 1)
    }
}

/// Parses an infix formula using `x1..xd` variable names.
pub fn parse(text: &str) -> Result<Expression, ParseError> {
    parse_with_names(text, &[])
}

/// Parses with dataset column names accepted as aliases for `x1..xd`.
///
/// When `names` is non-empty, `xk` with `k` beyond the column count is
/// reported as an unknown symbol.
pub fn parse_with_names(text: &str, names: &[String]) -> Result<Expression, ParseError> {
    let toks = tokenize(text)?;
    let mut parser = Parser { toks, pos: 0, names };
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{BinaryOp::*, UnaryOp::*};

    fn var(i: usize) -> Expression {
        Expression::Variable(i)
    }
    fn c(v: f64) -> Expression {
        Expression::Constant(v)
    }

    #[test]
    fn grammar_case() {
        let e = parse("sin(x1) + 2.5*x2").unwrap();
        let want = Expression::binary(
            Add,
            Expression::unary(Sin, var(0)),
            Expression::binary(Mul, c(2.5), var(1)),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn cancellation_formula() {
        let e = parse("(x1 + 1e100) - 1e100").unwrap();
        let want = Expression::binary(Sub, Expression::binary(Add, var(0), c(1e100)), c(1e100));
        assert_eq!(e, want);
    }

    #[test]
    fn unterminated_call_reports_end_offset() {
        let err = parse("sin(").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse("x1 - x2 - x3").unwrap(),
            Expression::binary(Sub, Expression::binary(Sub, var(0), var(1)), var(2))
        );
        assert_eq!(
            parse("x1^x2^x3").unwrap(),
            Expression::binary(Pow, var(0), Expression::binary(Pow, var(1), var(2)))
        );
        assert_eq!(
            parse("-x1^2").unwrap(),
            Expression::unary(Neg, Expression::binary(Pow, var(0), c(2.0)))
        );
        assert_eq!(parse("-3").unwrap(), c(-3.0));
        assert_eq!(
            parse("-3^2").unwrap(),
            Expression::unary(Neg, Expression::binary(Pow, c(3.0), c(2.0)))
        );
        assert_eq!(parse("2^-3").unwrap(), Expression::binary(Pow, c(2.0), c(-3.0)));
        assert_eq!(
            parse("x1 * -x2 + 1").unwrap(),
            Expression::binary(Add, Expression::binary(Mul, var(0), Expression::unary(Neg, var(1))), c(1.0))
        );
    }

    #[test]
    fn unknown_symbols() {
        assert!(matches!(parse("foo + 1"), Err(ParseError::UnknownSymbol { offset: 0, .. })));
        assert!(matches!(parse("x0"), Err(ParseError::UnknownSymbol { .. })));
        assert!(matches!(parse("1 + bar(x1)"), Err(ParseError::UnknownSymbol { offset: 4, .. })));
    }

    #[test]
    fn column_aliases() {
        let names = vec!["mass".to_string(), "v".to_string()];
        let e = parse_with_names("mass * v^2 + x1", &names).unwrap();
        assert_eq!(e, parse("x1 * x2^2 + x1").unwrap());
        assert!(matches!(parse_with_names("x3", &names), Err(ParseError::UnknownSymbol { .. })));
    }

    #[test]
    fn malformed_inputs() {
        for bad in ["", "x1 +", "(x1", "x1 x2", "sin x1", "1..2", "x1 # 2", ")"] {
            assert!(parse(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(parse("1e-7").unwrap(), c(1e-7));
        assert_eq!(parse("2.5E+3").unwrap(), c(2500.0));
        assert_eq!(parse(".5").unwrap(), c(0.5));
    }
}
