use std::time::Instant;

use bl_lab::asymptotics::{asymptotic_report, c_from_l0};
use bl_lab::shoot::{shoot, shoot_trajectory, sweep, BoundaryCondition, Family, SWEEP_CSV_HEADER};
use bl_lab::{classify, ClassTag, LabError, Params, Thresholds};

fn temperature(a: f64) -> BoundaryCondition {
    BoundaryCondition::new(Family::PrescribedTemperature, a)
}

fn flux(a: f64) -> BoundaryCondition {
    BoundaryCondition::new(Family::PrescribedFlux, a)
}

// Regression anchors: the edge of the set of parameters whose runs reach
// |f| = 100 by t = 1e4 with the algebraic tail.
#[test]
fn temperature_family_anchors() {
    for (beta, want) in [(-1.0, 0.50003534), (-0.5, -0.32788856)] {
        let r = shoot(&temperature(0.0), &Params::new(beta), ClassTag::UnboundedPositive).unwrap();
        assert!((r.value - want).abs() < 1e-7, "beta = {beta}: {}", r.value);
        assert_eq!(r.class_at_value.tag, ClassTag::UnboundedPositive);
        assert!(r.bracket.0 <= r.value && r.value <= r.bracket.1);
    }
}

#[test]
fn shooting_is_deterministic() {
    let run = || shoot(&temperature(0.0), &Params::new(-1.0), ClassTag::UnboundedPositive).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.to_json().to_string(), b.to_json().to_string());
}

#[test]
fn flux_family_at_unit_wall_value() {
    let r = shoot(&flux(1.0), &Params::new(-1.0), ClassTag::UnboundedPositive).unwrap();
    assert!((r.value - 1.5216009693529373).abs() < 1e-7, "{}", r.value);
    assert_eq!(r.class_at_value.tag, ClassTag::UnboundedPositive);
}

/// With f(0) = 0, f''(0) = -1 the conserved E = f'' + f f' equals -1, so f'
/// cannot decay while f grows: no parameter produces an unbounded run.
#[test]
fn flux_family_at_zero_wall_value_has_no_bracket() {
    let err = shoot(&flux(0.0), &Params::new(-1.0), ClassTag::UnboundedPositive).unwrap_err();
    assert!(matches!(err, LabError::BracketNotFound { .. }), "{err}");
}

#[test]
fn nonnegative_beta_is_rejected() {
    for beta in [0.0, 0.5, 1.0] {
        let err = shoot(&temperature(0.0), &Params::new(beta), ClassTag::UnboundedPositive).unwrap_err();
        assert!(matches!(err, LabError::Precondition(_)), "{err}");
        assert!(err.to_string().contains("bounded"));
    }
}

/// At beta = -1, a = 0, f''(0) = 0 gives f' = 1 - f^2/2, i.e.
/// f = sqrt(2) tanh(t / sqrt(2)).
#[test]
fn bounded_solution_at_zero_curvature() {
    let th = Thresholds::default();
    let tr = shoot_trajectory(&temperature(0.0), 0.0, &Params::new(-1.0), &th).unwrap();
    assert_eq!(classify(&tr, -1.0, &th).tag, ClassTag::BoundedDecaying);
    let r2 = 2f64.sqrt();
    for s in tr.samples().iter().filter(|s| s.t <= 20.0) {
        assert!((s.f - r2 * (s.t / r2).tanh()).abs() < 1e-9, "t = {}", s.t);
    }
}

#[test]
fn sweep_keeps_grid_order_and_failures() {
    let params = Params::new(-1.0);
    let cells = sweep(
        Family::PrescribedFlux,
        &[0.0, 1.0],
        &[-1.0, 0.5],
        &params,
        ClassTag::UnboundedPositive,
        Some(2),
    )
    .unwrap();
    let keys: Vec<(f64, f64)> = cells.iter().map(|c| (c.a, c.beta)).collect();
    assert_eq!(keys, vec![(0.0, -1.0), (0.0, 0.5), (1.0, -1.0), (1.0, 0.5)]);
    let kinds: Vec<&str> = cells
        .iter()
        .map(|c| match &c.outcome {
            Ok(_) => "ok",
            Err(e) => e.kind,
        })
        .collect();
    assert_eq!(
        kinds,
        vec!["BracketNotFound", "PreconditionRejected", "ok", "PreconditionRejected"]
    );
    assert_eq!(SWEEP_CSV_HEADER, "a,beta,value,class");
    assert!(cells[2].csv_row().ends_with(",UnboundedPositive"));
}

#[test]
fn sweep_does_not_depend_on_thread_count() {
    let params = Params::new(-1.0);
    let run = |threads| {
        sweep(
            Family::PrescribedTemperature,
            &[0.0, 0.5],
            &[-1.0, -0.5],
            &params,
            ClassTag::UnboundedPositive,
            threads,
        )
        .unwrap()
        .iter()
        .map(|c| c.to_json().to_string())
        .collect::<Vec<_>>()
    };
    assert_eq!(run(Some(1)), run(None));
}

#[test]
fn empty_sweep() {
    let cells = sweep(
        Family::PrescribedTemperature,
        &[],
        &[-1.0],
        &Params::new(-1.0),
        ClassTag::UnboundedPositive,
        None,
    )
    .unwrap();
    assert!(cells.is_empty());
}

/// The exponent at beta = -2 on a wall value where unbounded solutions exist.
/// The prefactor is also checked against the first integral
/// H = f f'' - f'^2/2 + f^2 f', which tends to c^3/3 along f ~ c t^(1/3).
#[test]
fn beta_minus_two_exponent_at_positive_wall_value() {
    let start = Instant::now();
    let beta = -2.0;
    let r = shoot(&temperature(5.0), &Params::new(beta), ClassTag::UnboundedPositive).unwrap();
    assert!((r.value - 2.30395902).abs() < 1e-6, "{}", r.value);
    let th = Thresholds::default();
    let tr = shoot_trajectory(&r.bc, r.value, &Params::new(beta), &th).unwrap();
    let fit = asymptotic_report(&tr, beta).unwrap();
    let p_rel = (fit.p_hat - 1.0 / 3.0).abs() * 3.0;
    let c_rel = (fit.c_hat - c_from_l0(fit.l0_hat, beta)).abs() / fit.c_from_l0;
    println!(
        "p_hat {} (rel {p_rel:.2e}), c rel {c_rel:.2e}, {:.1} s",
        fit.p_hat,
        start.elapsed().as_secs_f64()
    );
    assert!(p_rel <= 2e-2);
    assert!(c_rel <= 5e-2);
    let (a, g) = (5.0, r.value);
    let h0 = a * g - 0.5 + a * a;
    let c_h = (3.0 * h0).cbrt();
    assert!((fit.c_hat - c_h).abs() <= 5e-2 * c_h, "c_hat {} vs {c_h}", fit.c_hat);
}
