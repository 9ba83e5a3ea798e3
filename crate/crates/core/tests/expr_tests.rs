use pfsyn::expr::{eval, parse, BinOp, Expr, ExprError, Func};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::assert_close;

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::Bin(op, Box::new(l), Box::new(r))
}

fn ev(src: &str, state: &[f64], z: f64) -> f64 {
    eval(&parse(src).unwrap(), state, z).unwrap()
}

#[test]
fn example_memberships_parse_and_evaluate() {
    let up = parse("(1+z)/2").unwrap();
    let down = parse("(1-z)/2").unwrap();
    for &z in &[-1.0, -0.25, 0.0, 0.4, 1.0] {
        let a = eval(&up, &[], z).unwrap();
        let b = eval(&down, &[], z).unwrap();
        assert_eq!(a, (1.0 + z) / 2.0);
        assert_eq!(b, (1.0 - z) / 2.0);
        assert_eq!(a + b, 1.0);
    }
    assert!(up.references_z());
    assert_eq!(up.max_var_index(), None);
}

#[test]
fn example_premise_parses_and_evaluates() {
    let e = parse("sin(x1)").unwrap();
    assert_eq!(e, Expr::Call(Func::Sin, vec![Expr::Var(0)]));
    assert_close(
        eval(&e, &[std::f64::consts::FRAC_PI_2, 9.0], 0.0).unwrap(),
        1.0,
        1e-15,
        "sin at pi/2",
    );
    assert_eq!(e.max_var_index(), Some(0));
    assert!(!e.references_z());
}

#[test]
#[allow(clippy::approx_constant)] // 2^0.5 lands on sqrt(2) by construction
fn golden_values_match_the_frozen_oracle() {
    // Values frozen from an independent evaluator.
    let cases: &[(&str, &[f64], f64, f64)] = &[
        ("2^-3^2", &[], 0.0, 0.001953125),
        ("1+2*3^2-4/8", &[], 0.0, 18.5),
        ("-2^2", &[], 0.0, -4.0),
        ("2^0.5", &[], 0.0, 1.4142135623730951),
        ("abs(0-3.5)+max(2,7)", &[], 0.0, 10.5),
        ("sin(cos(2.5))", &[], 0.0, -0.7181523862509407),
        ("min(sin(1.25), cos(1.25))", &[], 0.0, 0.3153223623952687),
        ("(1+z)/2", &[], 0.4, 0.7),
        ("1/(1+z^2)", &[], 0.5, 0.8),
        ("x2^x1 - x1/x2", &[3.0, 2.0], 0.0, 6.5),
    ];
    for &(src, state, z, want) in cases {
        assert_close(ev(src, state, z), want, 1e-15, src);
    }
}

#[test]
fn subtraction_and_division_are_left_associative() {
    assert_eq!(
        parse("1-2-3").unwrap(),
        bin(BinOp::Sub, bin(BinOp::Sub, num(1.0), num(2.0)), num(3.0))
    );
    assert_eq!(ev("1-2-3", &[], 0.0), -4.0);
    assert_eq!(ev("16/4/2", &[], 0.0), 2.0);
}

#[test]
fn power_is_right_associative_and_outranks_unary_minus() {
    assert_eq!(ev("2^3^2", &[], 0.0), 512.0);
    assert_eq!(
        parse("-2^2").unwrap(),
        Expr::Neg(Box::new(bin(BinOp::Pow, num(2.0), num(2.0))))
    );
    // The exponent re-enters at unary, so a negative exponent needs no parens.
    assert_eq!(ev("2^-3", &[], 0.0), 0.125);
}

#[test]
fn parentheses_override_precedence() {
    assert_eq!(ev("(1+2)*3", &[], 0.0), 9.0);
    assert_eq!(ev("1+2*3", &[], 0.0), 7.0);
    assert_eq!(ev("2^(1+1)", &[], 0.0), 4.0);
    assert_eq!(ev("(-2)^2", &[], 0.0), 4.0);
}

#[test]
fn whitespace_and_scientific_notation_are_accepted() {
    assert_eq!(ev("  1 +\t2 * 3 ", &[], 0.0), 7.0);
    assert_eq!(ev("1e3", &[], 0.0), 1000.0);
    assert_eq!(ev("2.5e-3", &[], 0.0), 0.0025);
    assert_eq!(ev("4e+2", &[], 0.0), 400.0);
}

#[test]
fn display_uses_minimal_parentheses() {
    let cases: &[(Expr, &str)] = &[
        (
            bin(BinOp::Sub, bin(BinOp::Sub, num(1.0), num(2.0)), num(3.0)),
            "1-2-3",
        ),
        (
            bin(BinOp::Sub, num(1.0), bin(BinOp::Sub, num(2.0), num(3.0))),
            "1-(2-3)",
        ),
        (
            bin(BinOp::Pow, bin(BinOp::Pow, num(2.0), num(3.0)), num(2.0)),
            "(2^3)^2",
        ),
        (
            bin(BinOp::Pow, num(2.0), bin(BinOp::Pow, num(3.0), num(2.0))),
            "2^3^2",
        ),
        (Expr::Neg(Box::new(bin(BinOp::Pow, num(2.0), num(2.0)))), "-2^2"),
        (bin(BinOp::Pow, Expr::Neg(Box::new(num(2.0))), num(2.0)), "(-2)^2"),
        (
            bin(BinOp::Mul, Expr::Neg(Box::new(Expr::Var(0))), Expr::Var(1)),
            "-x1*x2",
        ),
        (
            bin(
                BinOp::Div,
                num(1.0),
                bin(BinOp::Mul, Expr::Var(0), Expr::Var(1)),
            ),
            "1/(x1*x2)",
        ),
        (Expr::Neg(Box::new(Expr::Neg(Box::new(Expr::Var(0))))), "--x1"),
        (
            Expr::Call(Func::Min, vec![Expr::Z, bin(BinOp::Add, num(1.0), Expr::Z)]),
            "min(z,1+z)",
        ),
    ];
    for (e, want) in cases {
        assert_eq!(e.to_string(), *want);
        assert_eq!(&parse(want).unwrap(), e);
    }
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    // Nonnegative constants only: a leading minus sign in a printed constant
    // would reparse as a unary minus node, changing the tree shape.
    const NUMS: [f64; 7] = [0.0, 1.0, 2.5, 0.3, 0.001, 7.0, 1e-30];
    let leaf = depth == 0;
    match if leaf { rng.gen_range(0..3) } else { rng.gen_range(0..9) } {
        0 => Expr::Num(NUMS[rng.gen_range(0..NUMS.len())]),
        1 => Expr::Var(rng.gen_range(0..4)),
        2 => Expr::Z,
        3 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
        4..=6 => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]
                [rng.gen_range(0..5)];
            bin(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
        }
        7 => {
            let f = [Func::Sin, Func::Cos, Func::Abs][rng.gen_range(0..3)];
            Expr::Call(f, vec![random_expr(rng, depth - 1)])
        }
        _ => {
            let f = [Func::Min, Func::Max][rng.gen_range(0..2)];
            Expr::Call(
                f,
                vec![random_expr(rng, depth - 1), random_expr(rng, depth - 1)],
            )
        }
    }
}

#[test]
fn random_trees_survive_a_print_parse_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for _ in 0..1000 {
        let tree = random_expr(&mut rng, 5);
        let printed = tree.to_string();
        let reparsed = parse(&printed)
            .unwrap_or_else(|e| panic!("failed to reparse `{printed}`: {e}"));
        assert_eq!(reparsed, tree, "round trip changed `{printed}`");
    }
}

#[test]
fn syntax_errors_carry_exact_offsets() {
    let cases: &[(&str, usize, &str)] = &[
        ("", 0, "empty expression"),
        ("sin(", 4, "unexpected end of input"),
        ("1 +", 3, "unexpected end of input"),
        ("(1", 2, "expected `)`"),
        ("1 2", 2, "unexpected trailing input"),
        ("min(1)", 5, "`min` takes 2 arguments, got 1"),
        ("sin(1,2)", 7, "`sin` takes 1 argument, got 2"),
        ("1..5", 2, "expected digits after decimal point"),
        ("1.", 2, "expected digits after decimal point"),
        ("@", 0, "unexpected character `@`"),
        ("sin 3", 4, "expected `(` after `sin`"),
        ("max(1 2)", 6, "expected `)`"),
    ];
    for &(src, offset, message) in cases {
        match parse(src) {
            Err(ExprError::Syntax { offset: o, message: m }) => {
                assert_eq!((o, m.as_str()), (offset, message), "source `{src}`");
            }
            other => panic!("`{src}` should be a syntax error, got {other:?}"),
        }
    }
    let shown = parse("").unwrap_err().to_string();
    assert_eq!(shown, "syntax error at byte 0: empty expression");
}

#[test]
fn unknown_identifiers_are_reported_with_their_name() {
    match parse("x0") {
        Err(ExprError::UnknownIdent { offset, name }) => {
            assert_eq!(offset, 0);
            assert_eq!(name, "x0");
        }
        other => panic!("expected unknown identifier, got {other:?}"),
    }
    match parse("2*foo(3)") {
        Err(ExprError::UnknownIdent { offset, name }) => {
            assert_eq!(offset, 2);
            assert_eq!(name, "foo");
        }
        other => panic!("expected unknown identifier, got {other:?}"),
    }
    assert_eq!(
        parse("x0").unwrap_err().to_string(),
        "unknown identifier `x0` at byte 0"
    );
}

#[test]
fn oversized_variable_indices_do_not_panic() {
    let src = "x99999999999999999999999";
    match parse(src) {
        Err(ExprError::Syntax { offset, message }) => {
            assert_eq!(offset, 0);
            assert_eq!(message, format!("variable index too large in `{src}`"));
        }
        other => panic!("expected syntax error, got {other:?}"),
    }
}

#[test]
fn evaluation_reports_runtime_failures() {
    let div = parse("1/(x1-1)").unwrap();
    assert_eq!(eval(&div, &[1.0], 0.0), Err(ExprError::DivisionByZero));
    assert_close(eval(&div, &[3.0], 0.0).unwrap(), 0.5, 0.0, "1/(3-1)");

    assert_eq!(ev_err("2^1024", &[], 0.0), ExprError::NonFinite);
    assert_eq!(ev_err("(0-1)^0.5", &[], 0.0), ExprError::NonFinite);

    let high = parse("x3").unwrap();
    assert_eq!(
        eval(&high, &[1.0], 0.0),
        Err(ExprError::VarOutOfRange { index: 3, dim: 1 })
    );
    assert_eq!(
        eval(&high, &[1.0], 0.0).unwrap_err().to_string(),
        "variable x3 exceeds state dimension 1"
    );
    assert_eq!(
        eval(&parse("x1").unwrap(), &[], 0.0),
        Err(ExprError::VarOutOfRange { index: 1, dim: 0 })
    );
}

fn ev_err(src: &str, state: &[f64], z: f64) -> ExprError {
    eval(&parse(src).unwrap(), state, z).unwrap_err()
}

#[test]
fn division_checks_for_exact_zero_only() {
    assert_close(ev("1/z", &[], 1e-300), 1e300, 1e286, "1/tiny");
    assert_eq!(ev_err("1/z", &[], 0.0), ExprError::DivisionByZero);
    assert_eq!(ev("0^0", &[], 0.0), 1.0);
}

#[test]
fn non_finite_literals_are_rejected_at_evaluation() {
    let e = Expr::Num(f64::NAN);
    assert_eq!(eval(&e, &[], 0.0), Err(ExprError::NonFinite));
    assert_eq!(
        eval(&Expr::Num(f64::INFINITY), &[], 0.0),
        Err(ExprError::NonFinite)
    );
}

#[test]
fn variable_inventory_helpers_walk_the_whole_tree() {
    let e = parse("x1*x5+sin(x2)").unwrap();
    assert_eq!(e.max_var_index(), Some(4));
    assert!(!e.references_z());

    let f = parse("min(1, max(z, 2))").unwrap();
    assert_eq!(f.max_var_index(), None);
    assert!(f.references_z());

    assert_eq!(parse("3.5").unwrap().max_var_index(), None);
    assert_eq!(parse("-x7").unwrap().max_var_index(), Some(6));
}

#[test]
fn evaluation_is_generic_over_the_scalar() {
    let e = parse("(1+z)/2").unwrap();
    assert_eq!(eval::<f32>(&e, &[], 0.5f32).unwrap(), 0.75f32);
    assert_eq!(eval::<f64>(&e, &[], 0.5f64).unwrap(), 0.75f64);

    // 2^200 overflows f32 but not f64, so the finiteness check is applied at
    // the working precision, not at f64.
    let big = parse("2^200").unwrap();
    assert_eq!(eval::<f32>(&big, &[], 0.0f32), Err(ExprError::NonFinite));
    assert_close(
        eval::<f64>(&big, &[], 0.0f64).unwrap(),
        1.6069380442589903e60,
        1e45,
        "2^200 in f64",
    );
}
