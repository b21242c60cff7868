//! Solution classes and the sign-structure checks on computed trajectories.
//!
//! The far-field condition `f'(inf) = 0` is a limit and cannot be observed on
//! a finite horizon, so each class is an operational test on the run:
//!
//! * `FiniteTimeBlowUp`: the run hit the `f` cap or its step size collapsed.
//! * `UnboundedPositive` / `UnboundedNegative`: `|f|` reached `M`; over the
//!   tail window `f`, `f'`, `f''`, `f'''` carry the eventual sign pattern of
//!   unbounded solutions (`+ + - +` or `- - + -`); and `f'` is decaying
//!   algebraically, `-(t - t0) f''/f' >= decay_min` at the end of the run.
//!   The last test separates `f' -> 0` from `f' -> L != 0`, where `f''` dies
//!   off exponentially.
//! * `BoundedDecaying`: the run reached the horizon with `|f| < M`
//!   throughout and `|f'| <= slope_eps` at the end.
//! * `Indeterminate`: everything else, including constant solutions.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::ode::{third, OdeState};
use crate::trajectory::{Termination, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ClassTag {
    BoundedDecaying,
    UnboundedPositive,
    UnboundedNegative,
    FiniteTimeBlowUp,
    Indeterminate,
}

impl ClassTag {
    pub fn is_unbounded(self) -> bool {
        matches!(self, ClassTag::UnboundedPositive | ClassTag::UnboundedNegative)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassTag::BoundedDecaying => "BoundedDecaying",
            ClassTag::UnboundedPositive => "UnboundedPositive",
            ClassTag::UnboundedNegative => "UnboundedNegative",
            ClassTag::FiniteTimeBlowUp => "FiniteTimeBlowUp",
            ClassTag::Indeterminate => "Indeterminate",
        }
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "BoundedDecaying" | "bounded" => Ok(ClassTag::BoundedDecaying),
            "UnboundedPositive" | "unbounded" | "unbounded-positive" => Ok(ClassTag::UnboundedPositive),
            "UnboundedNegative" | "unbounded-negative" => Ok(ClassTag::UnboundedNegative),
            "FiniteTimeBlowUp" | "blow-up" => Ok(ClassTag::FiniteTimeBlowUp),
            "Indeterminate" => Ok(ClassTag::Indeterminate),
            other => Err(format!("unknown solution class `{other}`")),
        }
    }
}

/// Classification thresholds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// `M`: level `|f|` must reach to count as unbounded.
    pub m_unbounded: f64,
    /// `|f'(t_end)|` bound for bounded decaying solutions.
    pub slope_eps: f64,
    /// Fraction of the samples (from the end) forming the tail window.
    pub tail_fraction: f64,
    /// Lower bound on the end-of-run algebraic decay rate of `f'`.
    pub decay_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            m_unbounded: 100.0,
            slope_eps: 1e-6,
            tail_fraction: 0.25,
            decay_min: 0.02,
        }
    }
}

impl Thresholds {
    pub fn tail_start(&self, n: usize) -> usize {
        let len = ((n as f64) * self.tail_fraction).ceil() as usize;
        n - len.clamp(2.min(n), n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub t_end: f64,
    pub f_end: f64,
    pub fp_end: f64,
    pub fpp_end: f64,
    pub termination: Termination,
    /// The run is a constant solution (excluded from the classes).
    pub constant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionClass {
    pub tag: ClassTag,
    pub evidence: Evidence,
}

fn is_constant(samples: &[OdeState]) -> bool {
    let f0 = samples[0].f;
    samples.iter().all(|s| s.f == f0 && s.fp == 0.0 && s.fpp == 0.0)
}

/// `sign` is +1 for the positive branch and -1 for the negative one.
fn tail_matches_branch(samples: &[OdeState], beta: f64, sign: f64) -> bool {
    samples.iter().all(|s| {
        let f3 = third(s.f, s.fp, s.fpp, beta);
        sign * s.f > 0.0 && sign * s.fp > 0.0 && sign * s.fpp < 0.0 && sign * f3 > 0.0
    }) && samples.windows(2).all(|w| sign * (w[1].f - w[0].f) > 0.0)
}

pub fn classify(trajectory: &Trajectory, beta: f64, th: &Thresholds) -> SolutionClass {
    let samples = trajectory.samples();
    let last = trajectory.last();
    let termination = trajectory.termination();
    let constant = is_constant(samples);
    let evidence = Evidence {
        t_end: last.t,
        f_end: last.f,
        fp_end: last.fp,
        fpp_end: last.fpp,
        termination,
        constant,
    };
    let tag = if constant {
        ClassTag::Indeterminate
    } else {
        classify_tag(trajectory, beta, th)
    };
    SolutionClass { tag, evidence }
}

fn classify_tag(trajectory: &Trajectory, beta: f64, th: &Thresholds) -> ClassTag {
    let samples = trajectory.samples();
    let last = trajectory.last();
    match trajectory.termination() {
        Termination::FCapHit | Termination::StepCollapse => return ClassTag::FiniteTimeBlowUp,
        Termination::HorizonReached | Termination::EventStop => {}
    }

    let tail = &samples[th.tail_start(samples.len())..];
    let elapsed = last.t - trajectory.first().t;
    let decay = -elapsed * last.fpp / last.fp;
    if last.f.abs() >= th.m_unbounded && decay.is_finite() && decay >= th.decay_min {
        let sign = last.f.signum();
        if tail_matches_branch(tail, beta, sign) {
            return if sign > 0.0 {
                ClassTag::UnboundedPositive
            } else {
                ClassTag::UnboundedNegative
            };
        }
    }

    let bounded = samples.iter().all(|s| s.f.abs() < th.m_unbounded);
    if trajectory.termination() == Termination::HorizonReached && bounded && last.fp.abs() <= th.slope_eps {
        return ClassTag::BoundedDecaying;
    }
    ClassTag::Indeterminate
}

/// A sample at which an expected sign pattern fails.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignViolation {
    pub index: usize,
    pub t: f64,
    pub fp: f64,
    pub fpp: f64,
    pub fppp: f64,
}

/// Persistence of negative curvature: once `f''` is non-positive it stays
/// strictly negative.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureCheck {
    /// First sample time with `f'' <= 0`, if any.
    pub first_nonpositive_t: Option<f64>,
    pub strictly_negative_after: bool,
    pub violation: Option<SignViolation>,
}

/// Eventual sign products: `f'' f' < 0` and `f''' f'' < 0` from `t1` on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ProductCheck {
    Holds { t1: f64, index: usize },
    Violated(SignViolation),
}

impl ProductCheck {
    pub fn t1_index(&self) -> Option<usize> {
        match self {
            ProductCheck::Holds { index, .. } => Some(*index),
            ProductCheck::Violated(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignStructureReport {
    /// Constant runs carry no sign information; both checks are vacuous.
    pub constant: bool,
    pub curvature: CurvatureCheck,
    pub products: ProductCheck,
}

fn violation(s: &OdeState, index: usize, beta: f64) -> SignViolation {
    SignViolation {
        index,
        t: s.t,
        fp: s.fp,
        fpp: s.fpp,
        fppp: third(s.f, s.fp, s.fpp, beta),
    }
}

pub fn sign_structure_report(trajectory: &Trajectory, beta: f64) -> SignStructureReport {
    let samples = trajectory.samples();
    let constant = is_constant(samples);
    if constant {
        return SignStructureReport {
            constant,
            curvature: CurvatureCheck {
                first_nonpositive_t: None,
                strictly_negative_after: true,
                violation: None,
            },
            products: ProductCheck::Holds {
                t1: samples[0].t,
                index: 0,
            },
        };
    }

    let curvature = match samples.iter().position(|s| s.fpp <= 0.0) {
        None => CurvatureCheck {
            first_nonpositive_t: None,
            strictly_negative_after: true,
            violation: None,
        },
        Some(k) => {
            let bad = samples[k + 1..].iter().position(|s| s.fpp >= 0.0).map(|j| k + 1 + j);
            CurvatureCheck {
                first_nonpositive_t: Some(samples[k].t),
                strictly_negative_after: bad.is_none(),
                violation: bad.map(|j| violation(&samples[j], j, beta)),
            }
        }
    };

    let holds = |s: &OdeState| {
        let f3 = third(s.f, s.fp, s.fpp, beta);
        s.fpp * s.fp < 0.0 && f3 * s.fpp < 0.0
    };
    let n = samples.len();
    let products = if !holds(&samples[n - 1]) {
        ProductCheck::Violated(violation(&samples[n - 1], n - 1, beta))
    } else {
        let mut i = n - 1;
        while i > 0 && holds(&samples[i - 1]) {
            i -= 1;
        }
        ProductCheck::Holds {
            t1: samples[i].t,
            index: i,
        }
    };

    SignStructureReport {
        constant,
        curvature,
        products,
    }
}

/// Tolerance form of curvature persistence used as a run-wide invariant:
/// after a sample with `f'' <= -atol`, every later sample must have
/// `f'' < 0`. Returns the offending samples.
pub fn curvature_violations(trajectory: &Trajectory, beta: f64, atol: f64) -> Vec<SignViolation> {
    let samples = trajectory.samples();
    match samples.iter().position(|s| s.fpp <= -atol) {
        None => Vec::new(),
        Some(k) => samples[k + 1..]
            .iter()
            .enumerate()
            .filter(|(_, s)| s.fpp >= 0.0)
            .map(|(j, s)| violation(s, k + 1 + j, beta))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{exact_solution, integrate, EventSpec, Params};

    fn exact_run(beta: f64, t_end: f64, n: usize) -> Trajectory {
        let ratio = (t_end / 1.0f64).powf(1.0 / n as f64);
        Trajectory::from_fn((0..=n).map(|i| ratio.powi(i as i32)), |t| {
            exact_solution(t, beta, 0.0).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn closed_form_is_bounded_decaying() {
        let tr = exact_run(-1.0, 1e4, 400);
        let c = classify(&tr, -1.0, &Thresholds::default());
        assert_eq!(c.tag, ClassTag::BoundedDecaying);
        assert!(!c.evidence.constant);
    }

    #[test]
    fn constants_are_flagged_not_classified() {
        let p = Params::new(-1.0).with_t_max(100.0);
        let tr = integrate(OdeState::new(0.0, 5.0, 0.0, 0.0), &p, &EventSpec::none()).unwrap();
        let c = classify(&tr, -1.0, &Thresholds::default());
        assert_eq!(c.tag, ClassTag::Indeterminate);
        assert!(c.evidence.constant);
        let rep = sign_structure_report(&tr, -1.0);
        assert!(rep.constant);
    }

    #[test]
    fn blow_up_is_classified_from_termination() {
        let p = Params::new(-1.0);
        let tr = integrate(OdeState::new(0.0, 0.0, 1.0, -2.0), &p, &EventSpec::none()).unwrap();
        assert_eq!(
            classify(&tr, -1.0, &Thresholds::default()).tag,
            ClassTag::FiniteTimeBlowUp
        );
    }

    #[test]
    fn closed_form_has_alternating_signs_from_the_start() {
        let tr = exact_run(-1.0, 100.0, 200);
        let rep = sign_structure_report(&tr, -1.0);
        assert_eq!(rep.products, ProductCheck::Holds { t1: 1.0, index: 0 });
        assert_eq!(rep.curvature.first_nonpositive_t, None);
        for s in tr.samples() {
            assert!(s.fp < 0.0 && s.fpp > 0.0 && third(s.f, s.fp, s.fpp, -1.0) < 0.0);
        }
    }

    #[test]
    fn curvature_violation_is_reported() {
        let tr = Trajectory::from_fn([0.0, 1.0, 2.0, 3.0], |t| {
            let fpp = if t == 2.0 { 0.5 } else { -1.0 };
            OdeState::new(t, 1.0, 1.0, fpp)
        })
        .unwrap();
        let rep = sign_structure_report(&tr, 0.0);
        assert!(!rep.curvature.strictly_negative_after);
        assert_eq!(rep.curvature.violation.unwrap().t, 2.0);
        assert_eq!(curvature_violations(&tr, 0.0, 1e-12).len(), 1);
    }

    #[test]
    fn growing_with_positive_limit_slope_is_not_unbounded() {
        // Blasius-type run (beta = 0) with f' -> L > 0: the sign pattern of the
        // positive branch holds but f'' dies off exponentially.
        let p = Params::new(0.0);
        let th = Thresholds::default();
        let tr = integrate(
            OdeState::new(0.0, 0.0, 1.0, -0.1),
            &p,
            &EventSpec::none().stop_at_level(th.m_unbounded),
        )
        .unwrap();
        assert!(tr.last().f >= th.m_unbounded);
        assert_eq!(classify(&tr, 0.0, &th).tag, ClassTag::Indeterminate);
    }

    #[test]
    fn tail_start_covers_at_least_two_samples() {
        let th = Thresholds::default();
        assert_eq!(th.tail_start(2), 0);
        assert_eq!(th.tail_start(100), 75);
        assert_eq!(th.tail_start(5), 3);
    }
}
