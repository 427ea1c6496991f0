use std::fmt;

use super::{BinaryOp, Expression, UnaryOp};

// Binding strength used to decide where parentheses are required.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expression) -> u8 {
    match e {
        Expression::Variable(_) => PREC_ATOM,
        // printed with a leading minus, so it behaves like a negation
        Expression::Constant(v) if v.is_sign_negative() => PREC_NEG,
        Expression::Constant(_) => PREC_ATOM,
        Expression::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Expression::Unary(..) => PREC_ATOM,
        Expression::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_ADD,
        Expression::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_MUL,
        Expression::Binary(BinaryOp::Pow, ..) => PREC_POW,
    }
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn format_constant(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        if v == 0.0 && v.is_sign_negative() {
            return "-0".to_string();
        }
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expression, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Variable(i) => write!(f, "x{}", i + 1),
            Expression::Constant(v) => f.write_str(&format_constant(*v)),
            Expression::Unary(UnaryOp::Neg, child) => {
                f.write_str("-")?;
                // `-3` would read back as a literal
                let parens = precedence(child) < PREC_NEG
                    || matches!(**child, Expression::Constant(v) if !v.is_sign_negative());
                write_child(f, child, parens)
            }
            Expression::Unary(op, child) => write!(f, "{}({child})", op.name()),
            Expression::Binary(op, l, r) => {
                let p = precedence(self);
                if *op == BinaryOp::Pow {
                    write_child(f, l, precedence(l) <= PREC_POW)?;
                    f.write_str("^")?;
                    write_child(f, r, precedence(r) < PREC_POW)
                } else {
                    write_child(f, l, precedence(l) < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, r, precedence(r) <= p)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use proptest::prelude::*;

    #[test]
    fn simple_forms() {
        assert_eq!(Expression::var(0).to_string(), "x1");
        assert_eq!(
            Expression::binary(BinaryOp::Add, Expression::var(0), Expression::constant(1.0)).to_string(),
            "x1 + 1"
        );
        let e = Expression::unary(UnaryOp::Sin, Expression::unary(UnaryOp::Sin, Expression::var(0)));
        assert_eq!(e.to_string(), "sin(sin(x1))");
    }

    #[test]
    fn minimal_parentheses() {
        for (src, printed) in [
            ("(x1 + x2) * x3", "(x1 + x2) * x3"),
            ("x1 + (x2 + x3)", "x1 + (x2 + x3)"),
            ("(x1 + x2) + x3", "x1 + x2 + x3"),
            ("x1 - (x2 - x3)", "x1 - (x2 - x3)"),
            ("(x1^x2)^x3", "(x1^x2)^x3"),
            ("x1^x2^x3", "x1^x2^x3"),
            ("-(x1 * x2)", "-(x1 * x2)"),
            ("(-x1)^2", "(-x1)^2"),
            ("-(3)", "-(3)"),
            ("(-3)^2", "(-3)^2"),
            ("x1 * -3", "x1 * -3"),
            ("(x1+1e100)-1e100", "x1 + 1e100 - 1e100"),
        ] {
            let e = parse(src).unwrap();
            assert_eq!(e.to_string(), printed, "source {src:?}");
            assert_eq!(parse(&e.to_string()).unwrap(), e);
        }
    }

    #[test]
    fn constants_round_trip() {
        for v in [0.0, -0.0, 1.0, -2.0, 2.5, 1e100, -1e-7, 0.1, 1.0 / 3.0, 123456789.0, 1e15, 6.02e23] {
            let e = Expression::constant(v);
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{v:?} printed as {e}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expression> {
        let leaf = prop_oneof![
            (0usize..4).prop_map(Expression::Variable),
            prop_oneof![(-20i32..20).prop_map(f64::from), -1e6f64..1e6f64].prop_map(Expression::Constant),
        ];
        leaf.prop_recursive(6, 40, 2, |inner| {
            prop_oneof![
                (prop::sample::select(UnaryOp::ALL.to_vec()), inner.clone())
                    .prop_map(|(op, c)| Expression::unary(op, c)),
                (prop::sample::select(BinaryOp::ALL.to_vec()), inner.clone(), inner)
                    .prop_map(|(op, l, r)| Expression::binary(op, l, r)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
            prop_assert_eq!(back, e);
        }

        #[test]
        fn complexity_is_one_plus_children(e in arb_expr()) {
            let kids: usize = e.children().iter().map(|c| c.complexity()).sum();
            prop_assert_eq!(e.complexity(), 1 + kids);
        }
    }
}
