//! Blow-up coordinates `s = int f dt`, `u = f'/f^2`, `v = f''/f^3`, in which
//! the equation becomes the autonomous planar system
//!
//! ```text
//! u' = v - 2u^2
//! v' = -v + beta u^2 - 3uv
//! ```
//!
//! Its equilibria are the origin (a saddle-node for every beta) and
//! `((beta-2)/6, (beta-2)^2/18)`, the image of the closed-form family.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dopri::{Attempt, Dopri5};
use crate::error::{LabError, Result};
use crate::fd;
use crate::ode::Params;
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseState {
    pub s: f64,
    pub u: f64,
    pub v: f64,
}

impl PhaseState {
    pub const fn new(s: f64, u: f64, v: f64) -> Self {
        Self { s, u, v }
    }
}

pub fn planar_rhs(u: f64, v: f64, beta: f64) -> (f64, f64) {
    (v - 2.0 * u * u, -v + beta * u * u - 3.0 * u * v)
}

pub fn jacobian(u: f64, v: f64, beta: f64) -> [[f64; 2]; 2] {
    [[-4.0 * u, 1.0], [2.0 * beta * u - 3.0 * v, -1.0 - 3.0 * u]]
}

/// Maps every sample to blow-up coordinates; `s` is the integral of `f`
/// measured from the sample at `tau_index`, by the trapezoidal rule with the
/// endpoint correction `h^2 (f'_a - f'_b) / 12` (fourth order, using the
/// stored `f'`).
pub fn to_blowup(trajectory: &Trajectory, tau_index: usize) -> Result<Vec<PhaseState>> {
    let samples = trajectory.samples();
    if tau_index >= samples.len() {
        return Err(LabError::Domain(format!(
            "tau index {tau_index} beyond {} samples",
            samples.len()
        )));
    }
    let sign = samples[0].f.signum();
    if let Some(bad) = samples.iter().find(|x| x.f == 0.0 || x.f.signum() != sign) {
        return Err(LabError::Domain(format!(
            "f vanishes or changes sign near t = {}; blow-up coordinates need f != 0",
            bad.t
        )));
    }
    let mut cum = vec![0.0; samples.len()];
    for i in 1..samples.len() {
        let (a, b) = (&samples[i - 1], &samples[i]);
        let h = b.t - a.t;
        cum[i] = cum[i - 1] + 0.5 * h * (a.f + b.f) + h * h / 12.0 * (a.fp - b.fp);
    }
    let origin = cum[tau_index];
    Ok(samples
        .iter()
        .zip(&cum)
        .map(|(x, c)| PhaseState::new(c - origin, x.fp / (x.f * x.f), x.fpp / (x.f * x.f * x.f)))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EquilibriumClass {
    SaddleNode,
    StableNode,
    UnstableNode,
    Saddle,
    Focus,
    Degenerate,
}

impl fmt::Display for EquilibriumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumReport {
    pub point: (f64, f64),
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [Complex64; 2],
    pub class: EquilibriumClass,
}

impl EquilibriumReport {
    fn at(u: f64, v: f64, beta: f64) -> Self {
        let jacobian = jacobian(u, v, beta);
        let eigenvalues = eigenvalues(&jacobian);
        Self {
            point: (u, v),
            jacobian,
            eigenvalues,
            class: classify_linear(&jacobian, &eigenvalues),
        }
    }

    /// `|det(J - lambda I)|` for each eigenvalue.
    pub fn eigen_residuals(&self) -> [f64; 2] {
        let j = &self.jacobian;
        self.eigenvalues
            .map(|l| ((j[0][0] - l) * (j[1][1] - l) - j[0][1] * j[1][0]).norm())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "u": self.point.0,
            "v": self.point.1,
            "eigenvalues": self.eigenvalues.iter().map(|l| [l.re, l.im]).collect::<Vec<_>>(),
            "class": self.class.to_string(),
        })
    }
}

/// Roots of `lambda^2 - tr lambda + det` in closed form. Real pairs are
/// ordered by decreasing value; the larger-magnitude root is formed first
/// and the other from `det / lambda` to avoid cancellation.
pub fn eigenvalues(j: &[[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        let big = if half >= 0.0 { half + r } else { half - r };
        let small = if big == 0.0 { 0.0 } else { det / big };
        // `+ 0.0` turns a negative zero into zero.
        let (a, b) = (big + 0.0, small + 0.0);
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half, im), Complex64::new(half, -im)]
    }
}

fn classify_linear(j: &[[f64; 2]; 2], ev: &[Complex64; 2]) -> EquilibriumClass {
    let norm = j.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let zero_tol = 1e-10 * norm.max(1.0);
    if ev[0].im != 0.0 {
        return if ev[0].re.abs() <= zero_tol {
            EquilibriumClass::Degenerate
        } else {
            EquilibriumClass::Focus
        };
    }
    let (a, b) = (ev[0].re, ev[1].re);
    match (a.abs() <= zero_tol, b.abs() <= zero_tol) {
        (true, true) => EquilibriumClass::Degenerate,
        (true, false) | (false, true) => EquilibriumClass::SaddleNode,
        _ if a < 0.0 && b < 0.0 => EquilibriumClass::StableNode,
        _ if a > 0.0 && b > 0.0 => EquilibriumClass::UnstableNode,
        _ => EquilibriumClass::Saddle,
    }
}

/// The origin and `((beta-2)/6, (beta-2)^2/18)`; one point when they
/// coincide at `beta = 2`.
pub fn equilibria(beta: f64) -> Vec<EquilibriumReport> {
    let u = (beta - 2.0) / 6.0;
    let v = (beta - 2.0) * (beta - 2.0) / 18.0;
    let mut out = vec![EquilibriumReport::at(0.0, 0.0, beta)];
    if u != 0.0 || v != 0.0 {
        out.push(EquilibriumReport::at(u, v, beta));
    }
    out
}

pub fn equilibria_json(beta: f64) -> Value {
    json!({
        "beta": beta,
        "points": equilibria(beta).iter().map(EquilibriumReport::to_json).collect::<Vec<_>>(),
    })
}

/// Quadratic center manifold `v = a2 u^2` of the origin and the reduced flow
/// `u' = flow_coeff u^2`, computed from the eigenbasis of the linearization.
pub fn center_manifold_coeff(beta: f64) -> (f64, f64) {
    let j = jacobian(0.0, 0.0, beta);
    let [l1, l2] = eigenvalues(&j);
    let lambda_s = if l1.re.abs() > l2.re.abs() { l1.re } else { l2.re };
    // Null vector and stable eigenvector of J, columns of P.
    let ec = [1.0, -j[0][0] / j[0][1]];
    let es = [j[0][1], lambda_s - j[0][0]];
    let det = ec[0] * es[1] - es[0] * ec[1];
    let to_eigen = |w: (f64, f64)| ((es[1] * w.0 - es[0] * w.1) / det, (-ec[1] * w.0 + ec[0] * w.1) / det);
    // Quadratic part of the field along the center direction. The field is
    // quadratic, so F(ec) - J ec is exactly the x^2 coefficient.
    let f = planar_rhs(ec[0], ec[1], beta);
    let n = (
        f.0 - (j[0][0] * ec[0] + j[0][1] * ec[1]),
        f.1 - (j[1][0] * ec[0] + j[1][1] * ec[1]),
    );
    let (nx, ny) = to_eigen(n);
    // Invariance at order x^2: 0 = lambda_s h2 + ny.
    let h2 = -ny / lambda_s;
    // u = x ec.u + h2 x^2 es.u, v = x ec.v + h2 x^2 es.v with ec.v = 0.
    let a2 = h2 * es[1] / (ec[0] * ec[0]);
    let flow = nx / ec[0];
    (a2, flow)
}

/// Adaptive Dormand-Prince integration of the planar system from `initial`
/// to `s = params.t_max`, with the tolerances of `params`. The run stops
/// early once `max(|u|, |v|)` reaches `params.f_cap`.
pub fn integrate_planar(initial: PhaseState, beta: f64, params: &Params) -> Result<Vec<PhaseState>> {
    let (s0, s_end) = (initial.s, params.t_max);
    if ![s0, initial.u, initial.v].iter().all(|x| x.is_finite()) {
        return Err(LabError::Domain(format!("non-finite initial phase state {initial:?}")));
    }
    params.validate(s0)?;
    let rhs = move |y: &[f64; 2]| {
        let (du, dv) = planar_rhs(y[0], y[1], beta);
        [du, dv]
    };
    let mut y = [initial.u, initial.v];
    let mut s = s0;
    let mut stepper = Dopri5::new(rhs, &y, params.rtol, params.atol);
    let mut h = stepper.initial_step(&y, s_end - s);
    let mut out = vec![initial];
    for _ in 0..params.max_steps {
        if h < params.step_min * s.abs().max(1.0) {
            return Err(LabError::IntegrationFailure {
                reason: format!("planar step size collapsed to {h:e} at s = {s}"),
                partial: Vec::new(),
            });
        }
        let remaining = s_end - s;
        let (h_try, end) = if h >= remaining {
            (remaining, Some(s_end))
        } else {
            (h, None)
        };
        match stepper.attempt(s, &y, h_try, end) {
            Attempt::Rejected { h_next } => h = h_next,
            Attempt::Accepted { step, h_next } => {
                s = step.t1;
                y = step.y1;
                out.push(PhaseState::new(s, y[0], y[1]));
                if end.is_some() || y[0].abs().max(y[1].abs()) >= params.f_cap {
                    return Ok(out);
                }
                h = h_next;
            }
        }
    }
    Err(LabError::IntegrationFailure {
        reason: format!("planar step limit {} exceeded at s = {s}", params.max_steps),
        partial: Vec::new(),
    })
}

/// Largest mismatch between finite-difference `d(u, v)/ds` along the image
/// of `trajectory` and the planar field.
pub fn transform_consistency(trajectory: &Trajectory, beta: f64) -> Result<f64> {
    if trajectory.len() < 3 {
        return Err(LabError::InsufficientData {
            needed: 3,
            got: trajectory.len(),
        });
    }
    let phase = to_blowup(trajectory, 0)?;
    let s: Vec<f64> = phase.iter().map(|p| p.s).collect();
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::Domain("blow-up time s is not strictly increasing".into()));
    }
    let u: Vec<f64> = phase.iter().map(|p| p.u).collect();
    let v: Vec<f64> = phase.iter().map(|p| p.v).collect();
    let du = fd::interior_derivatives(&s, &u);
    let dv = fd::interior_derivatives(&s, &v);
    Ok(du
        .iter()
        .zip(&dv)
        .map(|(&(i, du), &(_, dv))| {
            let (fu, fv) = planar_rhs(u[i], v[i], beta);
            (du - fu).abs().max((dv - fv).abs())
        })
        .fold(0.0, f64::max))
}

pub fn write_phase_csv<W: Write>(states: &[PhaseState], mut w: W) -> std::io::Result<()> {
    writeln!(w, "s,u,v")?;
    for p in states {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", p.s, p.u, p.v)?;
    }
    Ok(())
}

/// Field samples on an `n x n` grid over `[u_lo, u_hi] x [v_lo, v_hi]`.
pub fn write_vector_field_csv<W: Write>(
    beta: f64,
    u_range: (f64, f64),
    v_range: (f64, f64),
    n: usize,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "u,v,du,dv")?;
    let at = |(lo, hi): (f64, f64), i: usize| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    for i in 0..n {
        for k in 0..n {
            let (u, v) = (at(u_range, i), at(v_range, k));
            let (du, dv) = planar_rhs(u, v, beta);
            writeln!(w, "{u:.16e},{v:.16e},{du:.16e},{dv:.16e}")?;
        }
    }
    Ok(())
}
