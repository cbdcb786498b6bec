use hilfer::expr::{Bindings, Expr};
use hilfer::fraccalc::HilferOrder;
use hilfer::quad::GaussRule;
use hilfer::solver::{solve, ImpulsiveSchedule, ImpulsiveSystem, MeshSpec, Mode, PiecewiseTrajectory, SegmentKind};
use hilfer::special::rgamma;
use hilfer::stability::{verify_lyapunov, LyapunovSpec};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Operators as (symbol, precedence, right-associative).
const OPS: [(&str, u8, bool); 5] = [
    ("+", 1, false),
    ("-", 1, false),
    ("*", 2, false),
    ("/", 2, false),
    ("^", 3, true),
];

/// Fully parenthesizes a flat `operand (op operand)*` sequence by precedence
/// climbing, independently of the crate's parser.
fn parenthesize(operands: &[String], ops: &[usize]) -> String {
    fn climb(operands: &[String], ops: &[usize], pos: &mut usize, min_prec: u8) -> String {
        let mut lhs = operands[*pos].clone();
        while *pos < ops.len() {
            let (sym, prec, right) = OPS[ops[*pos]];
            if prec < min_prec {
                break;
            }
            *pos += 1;
            let rhs = climb(operands, ops, pos, if right { prec } else { prec + 1 });
            lhs = format!("({lhs} {sym} {rhs})");
        }
        lhs
    }
    climb(operands, ops, &mut 0, 1)
}

fn operand() -> impl Strategy<Value = String> {
    prop_oneof![
        (1u32..40).prop_map(|k| format!("{}", k as f64 / 8.0)),
        Just("t".to_owned()),
        Just("x".to_owned()),
        Just("y".to_owned()),
        (0usize..3).prop_map(|k| ["abs(x - 1)", "sqrt(t)", "max(x, y)"][k].to_owned()),
    ]
}

fn same(a: Result<f64, hilfer::expr::ExprError>, b: Result<f64, hilfer::expr::ExprError>) -> bool {
    match (a, b) {
        (Ok(a), Ok(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn precedence_matches_parenthesized_form(
        operands in prop::collection::vec(operand(), 1..7),
        ops in prop::collection::vec(0usize..5, 6),
        t in 0.1f64..3.0,
        x in 0.1f64..3.0,
        y in 0.1f64..3.0,
    ) {
        let ops = &ops[..operands.len() - 1];
        let mut flat = operands[0].clone();
        for (o, rhs) in ops.iter().zip(&operands[1..]) {
            flat = format!("{flat} {} {rhs}", OPS[*o].0);
        }
        let full = parenthesize(&operands, ops);
        let (e1, e2): (Expr, Expr) = (flat.parse().unwrap(), full.parse().unwrap());
        let b = Bindings::new().t(t).x(x).y(y);
        prop_assert!(same(e1.eval(&b), e2.eval(&b)), "{flat} vs {full}");
    }

    #[test]
    fn evaluation_is_deterministic(
        operands in prop::collection::vec(operand(), 1..7),
        ops in prop::collection::vec(0usize..5, 6),
        x in -3.0f64..3.0,
    ) {
        let mut flat = operands[0].clone();
        for (o, rhs) in ops.iter().zip(&operands[1..]) {
            flat = format!("{flat} {} {rhs}", OPS[*o].0);
        }
        let e: Expr = flat.parse().unwrap();
        let b = Bindings::new().t(0.7).x(x).y(1.3);
        prop_assert!(same(e.eval(&b), e.eval(&b)));
    }
}

fn random_zero_system(seed: u64) -> ImpulsiveSystem {
    let mut rng = StdRng::seed_from_u64(seed);
    let order = HilferOrder::new(rng.gen_range(0.15..=1.0), rng.gen_range(0.0..=1.0)).unwrap();
    let mode = if rng.gen_bool(0.5) {
        Mode::NonInstantaneous
    } else {
        Mode::Instantaneous
    };
    let count = rng.gen_range(1..=3);
    let t_points: Vec<f64> = (0..count).map(|i| i as f64).collect();
    let p_points = match mode {
        Mode::NonInstantaneous => t_points.iter().map(|t| t + rng.gen_range(0.2..0.9)).collect(),
        Mode::Instantaneous => vec![],
    };
    let schedule = ImpulsiveSchedule::new(mode, t_points, p_points, count as f64).unwrap();
    let g = format!(
        "{}*x + {}*sin(x)*t + {}*x^2",
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-1.0..1.0)
    );
    let maps = (0..schedule.impulses_needed(mode))
        .map(|_| {
            format!("{}*y + {}*x*t", rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0))
                .parse()
                .unwrap()
        })
        .collect();
    ImpulsiveSystem::new(mode, order, schedule, g.parse().unwrap(), maps, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn zero_solution_is_preserved(seed in any::<u64>()) {
        let sys = random_zero_system(seed);
        let traj = solve(&sys, &MeshSpec::new(16, None).unwrap()).unwrap();
        prop_assert!(traj.max_abs() <= 1e-12);
    }

    #[test]
    fn zero_trajectory_passes_lyapunov_checks(
        seed in any::<u64>(),
        a1 in 0.5f64..3.0,
        a2 in 0.05f64..=1.0,
        a3 in 0.05f64..3.0,
        a4_frac in 0.05f64..=1.0,
        a in 0.5f64..3.0,
        b in 0.5f64..2.0,
        which in 0usize..3,
    ) {
        let sys = random_zero_system(seed);
        let traj = solve(&sys, &MeshSpec::new(16, None).unwrap()).unwrap();
        let v = ["abs(x)", "x^2", "abs(x)^1.5 + x^2"][which];
        let spec = LyapunovSpec::new(v.parse().unwrap(), a1, a2, a3, a4_frac * a1, a, b).unwrap();
        let report = verify_lyapunov(&sys, &traj, &spec, 1).unwrap();
        prop_assert!(report.passed, "{:?}", report);
    }
}

fn nonlinear_system(nu: f64) -> ImpulsiveSystem {
    let schedule = ImpulsiveSchedule::new(Mode::NonInstantaneous, vec![0.0, 1.0], vec![0.6, 1.6], 2.0).unwrap();
    ImpulsiveSystem::new(
        Mode::NonInstantaneous,
        HilferOrder::new(0.6, nu).unwrap(),
        schedule,
        "0 - x + sin(t)".parse().unwrap(),
        vec!["0.5*y".parse().unwrap(), "0.5*y".parse().unwrap()],
        1.0,
    )
    .unwrap()
}

/// Interpolates weighted values linearly in `(s-l)^μ`, which reproduces the
/// leading `c + a (s-l)^μ` behaviour at the lower bound.
fn interpolate(grid: &[f64], values: &[f64], l: f64, mu: f64, u: f64) -> f64 {
    let k = grid.partition_point(|&g| g <= u).clamp(1, grid.len() - 1);
    let v = |s: f64| (s - l).powf(mu);
    let r = (v(u) - v(grid[k - 1])) / (v(grid[k]) - v(grid[k - 1]));
    values[k - 1] + r * (values[k] - values[k - 1])
}

/// `|y(t) - c - (t-l)^{1-λ} I^μ g(·, x)(t)|` at grid node `j` of an active
/// segment, with the integral evaluated by Gauss–Jacobi on an interpolant of
/// the weighted values.
fn volterra_residual(traj: &PiecewiseTrajectory, seg: usize, j: usize) -> f64 {
    let s = &traj.segments[seg];
    let (mu, lam) = (traj.order.mu(), traj.order.lam());
    let (l, t) = (s.lower, s.grid[j]);
    let weighted = |u: f64| interpolate(&s.grid, &s.weighted_values, l, mu, u);
    // g = -x + sin(s) with x = (s-l)^{λ-1} y
    let state = GaussRule::jacobi_shared(200, mu - 1.0, lam - 1.0).integrate(l, t, |u| -weighted(u));
    let forcing = GaussRule::jacobi_shared(200, mu - 1.0, 0.0).integrate(l, t, f64::sin);
    let rhs = s.restart_value + (t - l).powf(1.0 - lam) * rgamma(mu) * (state + forcing);
    (s.weighted_values[j] - rhs).abs()
}

#[test]
fn solution_satisfies_volterra_equation() {
    for nu in [0.3, 1.0] {
        let coarse = solve(&nonlinear_system(nu), &MeshSpec::new(64, None).unwrap()).unwrap();
        let fine = solve(&nonlinear_system(nu), &MeshSpec::new(128, None).unwrap()).unwrap();
        // mesh error estimate per active segment: max coarse/fine gap at shared nodes
        let estimate = |seg: usize| {
            let (c, f) = (&coarse.segments[seg], &fine.segments[seg]);
            c.grid
                .iter()
                .zip(&c.weighted_values)
                .skip(1)
                .map(|(t, y)| {
                    let k = f.grid.iter().position(|u| (u - t).abs() < 1e-12).unwrap();
                    (y - f.weighted_values[k]).abs()
                })
                .fold(0.0, f64::max)
        };
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let seg = if rng.gen_bool(0.5) { 0 } else { 2 };
            assert_eq!(coarse.segments[seg].kind, SegmentKind::Active);
            let j = rng.gen_range(1..coarse.segments[seg].grid.len());
            let (residual, bound) = (volterra_residual(&coarse, seg, j), 5.0 * estimate(seg));
            let t = coarse.segments[seg].grid[j];
            assert!(
                residual <= bound,
                "nu = {nu}, t = {t}: residual {residual:e}, bound {bound:e}"
            );
        }
    }
}
