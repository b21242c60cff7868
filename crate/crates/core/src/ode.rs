//! The equation `f''' + f f'' - beta f'^2 = 0`, its closed-form convex
//! solution family, and the adaptive integrator producing [`Trajectory`]s.

use serde::Serialize;

use crate::dopri::{AcceptedStep, Attempt, Dopri5};
use crate::error::{LabError, Result};
use crate::fd;
use crate::trajectory::{Component, Event, EventKind, Termination, Trajectory};

/// One point of a solution. `f'''` is never stored; see [`rhs`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OdeState {
    pub t: f64,
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
}

impl OdeState {
    pub const fn new(t: f64, f: f64, fp: f64, fpp: f64) -> Self {
        Self { t, f, fp, fpp }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.f.is_finite() && self.fp.is_finite() && self.fpp.is_finite()
    }

    fn y(&self) -> [f64; 3] {
        [self.f, self.fp, self.fpp]
    }

    fn at(t: f64, y: [f64; 3]) -> Self {
        Self::new(t, y[0], y[1], y[2])
    }
}

/// Model parameter and numerical controls for one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Params {
    pub beta: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Integration horizon standing in for `t -> infinity`.
    pub t_max: f64,
    /// `|f| >= f_cap` stops the run (unboundedness guard).
    pub f_cap: f64,
    /// Relative step floor: a step below `step_min * max(1, |t|)` is a
    /// collapse (finite-time blow-up detector).
    pub step_min: f64,
    /// Hard cap on accepted + rejected step attempts.
    pub max_steps: usize,
}

impl Params {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            rtol: 1e-10,
            atol: 1e-12,
            t_max: 1e4,
            f_cap: 1e8,
            step_min: 1e-13,
            max_steps: 20_000_000,
        }
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self, t0: f64) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("f_cap", self.f_cap),
            ("step_min", self.step_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.beta.is_finite() {
            return Err(LabError::InvalidParams(format!(
                "beta must be finite, got {}",
                self.beta
            )));
        }
        if !(self.t_max > t0) || !self.t_max.is_finite() {
            return Err(LabError::InvalidParams(format!(
                "t_max = {} must exceed the initial time {t0}",
                self.t_max
            )));
        }
        if self.max_steps == 0 {
            return Err(LabError::InvalidParams("max_steps must be positive".into()));
        }
        Ok(())
    }

    fn step_floor(&self, t: f64) -> f64 {
        self.step_min * t.abs().max(1.0)
    }
}

/// Third derivative from the equation: `f''' = beta f'^2 - f f''`.
pub fn rhs(state: &OdeState, beta: f64) -> Result<f64> {
    if !state.is_finite() || !beta.is_finite() {
        return Err(LabError::Domain(format!("non-finite input {state:?}, beta = {beta}")));
    }
    Ok(third(state.f, state.fp, state.fpp, beta))
}

#[inline]
pub(crate) fn third(f: f64, fp: f64, fpp: f64, beta: f64) -> f64 {
    beta * fp * fp - f * fpp
}

/// `[f, f', f'', f''', f'''']` at a sample; the fourth derivative comes from
/// differentiating the equation once.
pub(crate) fn jet(s: &OdeState, beta: f64) -> [f64; 5] {
    let f3 = third(s.f, s.fp, s.fpp, beta);
    let f4 = (2.0 * beta - 1.0) * s.fp * s.fpp - s.f * f3;
    [s.f, s.fp, s.fpp, f3, f4]
}

/// The convex solution `f(t) = 6 / ((2 - beta)(t - tau))` and its first two
/// derivatives.
pub fn exact_solution(t: f64, beta: f64, tau: f64) -> Result<OdeState> {
    if beta == 2.0 {
        return Err(LabError::DegenerateParameter(
            "beta = 2 makes the closed form singular".into(),
        ));
    }
    if !(t > tau) {
        return Err(LabError::Domain(format!(
            "closed form requires t > tau, got t = {t}, tau = {tau}"
        )));
    }
    let k = 6.0 / (2.0 - beta);
    let d = t - tau;
    Ok(OdeState::new(t, k / d, -k / (d * d), 2.0 * k / (d * d * d)))
}

/// Analytic `f'''` of the closed-form family.
pub fn exact_third_derivative(t: f64, beta: f64, tau: f64) -> f64 {
    -36.0 / ((2.0 - beta) * (t - tau).powi(4))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignWatch {
    pub component: Component,
    /// Stop the run at the first located crossing.
    pub terminal: bool,
}

/// Which events an integration records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventSpec {
    pub sign_changes: Vec<SignWatch>,
    /// Stop as soon as `|f|` reaches this level.
    pub stop_level: Option<f64>,
}

impl EventSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// Record (without stopping) every sign change of f, f' and f''.
    pub fn all_sign_changes() -> Self {
        let watch = |component| SignWatch {
            component,
            terminal: false,
        };
        Self {
            sign_changes: vec![watch(Component::F), watch(Component::Fp), watch(Component::Fpp)],
            stop_level: None,
        }
    }

    pub fn stop_at_level(mut self, level: f64) -> Self {
        self.stop_level = Some(level);
        self
    }

    pub fn stop_on_sign(mut self, component: Component) -> Self {
        match self.sign_changes.iter_mut().find(|w| w.component == component) {
            Some(w) => w.terminal = true,
            None => self.sign_changes.push(SignWatch {
                component,
                terminal: true,
            }),
        }
        self
    }
}

fn system(beta: f64) -> impl Fn(&[f64; 3]) -> [f64; 3] {
    move |y: &[f64; 3]| [y[1], y[2], third(y[0], y[1], y[2], beta)]
}

/// Bisection on the dense output of one step. `g(t0) < 0 <= g(t1)` after
/// orientation; returns the earliest time found with `g >= 0` unless
/// `closest` asks for whichever bracket end has the smaller `|g|`.
fn locate<G: Fn(&[f64; 3]) -> f64>(step: &AcceptedStep<3>, g: G, closest: bool) -> f64 {
    let (mut lo, mut hi) = (step.t0, step.t1);
    let sign = if g(&step.y1) >= 0.0 { 1.0 } else { -1.0 };
    let h = |t: f64| sign * g(&step.eval(t));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if closest && h(lo).abs() < h(hi).abs() {
        lo
    } else {
        hi
    }
}

struct Crossing {
    t: f64,
    kind: EventKind,
    terminal: bool,
}

fn crossings(step: &AcceptedStep<3>, spec: &EventSpec) -> Vec<Crossing> {
    let mut out = Vec::new();
    for w in &spec.sign_changes {
        let k = w.component.index();
        let (a, b) = (step.y0[k], step.y1[k]);
        if a * b < 0.0 || (b == 0.0 && a != 0.0) {
            let t = locate(step, |y| y[k], true);
            out.push(Crossing {
                t,
                kind: EventKind::SignChange(w.component),
                terminal: w.terminal,
            });
        }
    }
    if let Some(level) = spec.stop_level {
        let g = |y: &[f64; 3]| y[0].abs() - level;
        if g(&step.y0) < 0.0 && g(&step.y1) >= 0.0 {
            out.push(Crossing {
                t: locate(step, g, false),
                kind: EventKind::Level,
                terminal: true,
            });
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Adaptive Dormand-Prince 5(4) integration of `(f, f', f'')` from `initial`
/// until `t_max`, `|f| >= f_cap`, a step collapse, or a terminal event.
pub fn integrate(initial: OdeState, params: &Params, events: &EventSpec) -> Result<Trajectory> {
    if !initial.is_finite() {
        return Err(LabError::Domain(format!("non-finite initial state {initial:?}")));
    }
    params.validate(initial.t)?;

    let mut t = initial.t;
    let mut y = initial.y();
    let mut stepper = Dopri5::new(system(params.beta), &y, params.rtol, params.atol);
    let mut h = stepper.initial_step(&y, params.t_max - t);
    let mut samples = vec![initial];
    let mut log = Vec::new();
    let mut attempts = 0usize;

    let termination = loop {
        attempts += 1;
        if attempts > params.max_steps {
            return Err(LabError::IntegrationFailure {
                reason: format!("step limit {} exceeded at t = {t}", params.max_steps),
                partial: samples,
            });
        }
        if h < params.step_floor(t) {
            if samples.len() < 2 {
                return Err(LabError::IntegrationFailure {
                    reason: format!("step size collapsed to {h:e} before any progress"),
                    partial: samples,
                });
            }
            break Termination::StepCollapse;
        }
        let remaining = params.t_max - t;
        let (h_try, end) = if h >= remaining {
            (remaining, Some(params.t_max))
        } else {
            (h, None)
        };
        match stepper.attempt(t, &y, h_try, end) {
            Attempt::Rejected { h_next } => h = h_next,
            Attempt::Accepted { step, h_next } => {
                let found = crossings(&step, events);
                let stop = found.iter().find(|c| c.terminal).map(|c| c.t);
                for c in found.iter().filter(|c| stop.is_none_or(|ts| c.t <= ts)) {
                    log.push(Event {
                        t: c.t,
                        kind: c.kind,
                        state: Some(OdeState::at(c.t, step.eval(c.t))),
                    });
                }
                if let Some(ts) = stop {
                    if ts > t {
                        samples.push(OdeState::at(ts, step.eval(ts)));
                    }
                    break Termination::EventStop;
                }
                t = step.t1;
                y = step.y1;
                samples.push(OdeState::at(t, y));
                if y[0].abs() >= params.f_cap {
                    break Termination::FCapHit;
                }
                if end.is_some() {
                    break Termination::HorizonReached;
                }
                h = h_next;
            }
        }
    };

    if samples.len() < 2 {
        return Err(LabError::IntegrationFailure {
            reason: "run stopped before the first accepted step".into(),
            partial: samples,
        });
    }
    Trajectory::new(samples, termination, log)
}

/// Fixed-step fifth-order Dormand-Prince integration to exactly `t_end`, used
/// for convergence-order checks.
pub fn integrate_fixed(initial: OdeState, beta: f64, h: f64, t_end: f64) -> Result<Trajectory> {
    if !(h > 0.0) || !(t_end > initial.t) {
        return Err(LabError::InvalidParams(format!(
            "fixed-step run needs h > 0 and t_end > t0 (h = {h}, t0 = {}, t_end = {t_end})",
            initial.t
        )));
    }
    let n = ((t_end - initial.t) / h).round().max(1.0) as usize;
    let mut y = initial.y();
    let mut stepper = Dopri5::new(system(beta), &y, 1.0, 1.0);
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(initial);
    for i in 1..=n {
        let t_prev = samples[i - 1].t;
        let t = if i == n { t_end } else { initial.t + i as f64 * h };
        y = stepper.fixed(&y, t - t_prev);
        samples.push(OdeState::at(t, y));
    }
    Trajectory::new(samples, Termination::HorizonReached, Vec::new())
}

/// `|f''' + f f'' - beta f'^2|` at interior samples, with `f'''` taken from a
/// non-uniform sixth-order finite difference of the stored `f''` samples
/// (independent of the equation). Returns `(t, residual)` pairs.
pub fn pointwise_residual(trajectory: &Trajectory, beta: f64) -> Result<Vec<(f64, f64)>> {
    let s = trajectory.samples();
    if s.len() < 3 {
        return Err(LabError::InsufficientData {
            needed: 3,
            got: s.len(),
        });
    }
    let ts: Vec<f64> = s.iter().map(|x| x.t).collect();
    let fpp: Vec<f64> = s.iter().map(|x| x.fpp).collect();
    Ok(fd::interior_derivatives(&ts, &fpp)
        .into_iter()
        .map(|(i, f3)| {
            let x = &s[i];
            (x.t, (f3 + x.f * x.fpp - beta * x.fp * x.fp).abs())
        })
        .collect())
}

/// Maximum of [`pointwise_residual`]: the solution-quality metric.
pub fn residual(trajectory: &Trajectory, beta: f64) -> Result<f64> {
    Ok(pointwise_residual(trajectory, beta)?
        .into_iter()
        .map(|(_, r)| r)
        .fold(0.0, f64::max))
}

/// [`residual`] with each pointwise term divided by the size of the terms
/// it balances, `1 + |f f''| + |beta| f'^2`. Agrees with the absolute
/// residual while the state is O(1) and stays meaningful near blow-up.
pub fn scaled_residual(trajectory: &Trajectory, beta: f64) -> Result<f64> {
    let s = trajectory.samples();
    let ts: Vec<f64> = s.iter().map(|x| x.t).collect();
    let fpp: Vec<f64> = s.iter().map(|x| x.fpp).collect();
    if s.len() < 3 {
        return Err(LabError::InsufficientData {
            needed: 3,
            got: s.len(),
        });
    }
    Ok(fd::interior_derivatives(&ts, &fpp)
        .into_iter()
        .map(|(i, f3)| {
            let x = &s[i];
            let scale = 1.0 + (x.f * x.fpp).abs() + (beta * x.fp * x.fp).abs();
            (f3 + x.f * x.fpp - beta * x.fp * x.fp).abs() / scale
        })
        .fold(0.0, f64::max))
}
