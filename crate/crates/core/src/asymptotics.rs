//! Power-law fits and the limit identities of unbounded solutions.
//!
//! Along an unbounded solution with `f'(inf) = 0`, `phi = f' |f|^(-beta)`
//! tends to a limit `l0` and `|f(t)| ~ c t^(1/(1-beta))` with
//! `c = (|l0| (1-beta))^(1/(1-beta))`. The quantity
//!
//! ```text
//! R(s) = sgn(f) |f|^(-beta-1) f'' + |f|^(-beta) f'
//!        - (beta+1) * integral_s^T |f|^(-beta-2) f' f'' dr
//! ```
//!
//! has zero derivative in `s` on exact solutions, so its spread over `s`
//! measures integration and quadrature error.

use serde::Serialize;
use serde_json::{json, Value};

use crate::classify::{sign_structure_report, ProductCheck};
use crate::error::{LabError, Result};
use crate::ode::OdeState;
use crate::trajectory::Trajectory;

pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub c_hat: f64,
    pub p_hat: f64,
    pub rms_log_error: f64,
}

/// Least-squares fit of `log|f| = log c + p log t` over samples with
/// `t` in `[t_lo, t_hi]`.
pub fn fit_power_law(trajectory: &Trajectory, window: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    let (t0, t1) = trajectory.t_span();
    if !(lo < hi) || lo < t0 || hi > t1 || lo <= 0.0 {
        return Err(LabError::Domain(format!(
            "fit window [{lo}, {hi}] must satisfy 0 < lo < hi inside [{t0}, {t1}]"
        )));
    }
    let pts: Vec<&OdeState> = trajectory.samples().iter().filter(|s| s.t >= lo && s.t <= hi).collect();
    if let Some(s) = pts.iter().find(|s| s.f == 0.0) {
        return Err(LabError::Domain(format!(
            "f vanishes at t = {} inside the fit window",
            s.t
        )));
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(LabError::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: pts.len(),
        });
    }
    let xs: Vec<f64> = pts.iter().map(|s| s.t.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|s| s.f.abs().ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    if sxx == 0.0 {
        return Err(LabError::Domain("fit window holds a single abscissa".into()));
    }
    let p = sxy / sxx;
    let b = ym - p * xm;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - b - p * x).powi(2)).sum();
    Ok(PowerLawFit {
        c_hat: b.exp(),
        p_hat: p,
        rms_log_error: (rss / n).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L0Estimate {
    pub l0_hat: f64,
    /// `(t, phi)` at every sample from the start index on.
    pub curve: Vec<(f64, f64)>,
}

fn branch_sign(samples: &[OdeState]) -> Result<f64> {
    let sign = samples[0].f.signum();
    if samples[0].f == 0.0 || samples.iter().any(|s| s.f.signum() != sign || s.f == 0.0) {
        return Err(LabError::Domain(
            "f changes sign or vanishes on the evaluation tail".into(),
        ));
    }
    Ok(sign)
}

/// `phi = f' f^(-beta)` on `f > 0`, `psi = f' (-f)^(-beta)` on `f < 0`,
/// evaluated from sample `start` to the end; `l0_hat` is the last value.
pub fn estimate_l0(trajectory: &Trajectory, beta: f64, start: usize) -> Result<L0Estimate> {
    let samples = trajectory.samples();
    if start >= samples.len() {
        return Err(LabError::Domain(format!(
            "start index {start} beyond {} samples",
            samples.len()
        )));
    }
    let tail = &samples[start..];
    branch_sign(tail)?;
    let curve: Vec<(f64, f64)> = tail.iter().map(|s| (s.t, s.fp * s.f.abs().powf(-beta))).collect();
    Ok(L0Estimate {
        l0_hat: curve.last().expect("non-empty tail").1,
        curve,
    })
}

fn identity_lead(s: &OdeState, beta: f64) -> f64 {
    let af = s.f.abs();
    s.f.signum() * af.powf(-beta - 1.0) * s.fpp + af.powf(-beta) * s.fp
}

fn identity_integrand(s: &OdeState, beta: f64) -> f64 {
    s.f.abs().powf(-beta - 2.0) * s.fp * s.fpp
}

/// `R(s)` for each requested `s`, with the improper integral truncated at
/// the end of the run and evaluated by the trapezoidal rule on the samples.
pub fn identity_residual(trajectory: &Trajectory, beta: f64, s_values: &[f64]) -> Result<Vec<f64>> {
    let samples = trajectory.samples();
    let (t0, t_end) = trajectory.t_span();
    let g: Vec<f64> = samples.iter().map(|s| identity_integrand(s, beta)).collect();
    // suffix[i] = integral from t_i to t_end.
    let mut suffix = vec![0.0; samples.len()];
    for i in (0..samples.len() - 1).rev() {
        suffix[i] = suffix[i + 1] + 0.5 * (g[i] + g[i + 1]) * (samples[i + 1].t - samples[i].t);
    }
    s_values
        .iter()
        .map(|&s| {
            if !(s >= t0 && s <= t_end) {
                return Err(LabError::Domain(format!("s = {s} outside [{t0}, {t_end}]")));
            }
            let st = trajectory.state_at(s, beta)?;
            if st.f == 0.0 {
                return Err(LabError::Domain(format!("f vanishes at s = {s}")));
            }
            let k = trajectory.index_at_or_after(s);
            let gs = identity_integrand(&st, beta);
            let head = if samples[k].t > s {
                0.5 * (gs + g[k]) * (samples[k].t - s)
            } else {
                0.0
            };
            Ok(identity_lead(&st, beta) - (beta + 1.0) * (head + suffix[k]))
        })
        .collect()
}

/// Drift of `E = f'' + f f'`, exactly conserved when `beta = -1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyDrift {
    pub e0: f64,
    pub max_drift: f64,
}

pub fn energy_conservation(trajectory: &Trajectory, beta: f64) -> Result<EnergyDrift> {
    if beta != -1.0 {
        return Err(LabError::InvalidParams(format!(
            "f'' + f f' is conserved only for beta = -1, got beta = {beta}"
        )));
    }
    let energy = |s: &OdeState| s.fpp + s.f * s.fp;
    let e0 = energy(trajectory.first());
    let max_drift = trajectory
        .samples()
        .iter()
        .map(|s| (energy(s) - e0).abs())
        .fold(0.0, f64::max);
    Ok(EnergyDrift { e0, max_drift })
}

pub fn c_from_l0(l0: f64, beta: f64) -> f64 {
    (l0.abs() * (1.0 - beta)).powf(1.0 / (1.0 - beta))
}

/// Exponents refitted on shifted windows and a halved horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindowSensitivity {
    /// Fit on `[T/2, T]`.
    pub p_narrow: f64,
    /// Fit on `[T/8, T]`.
    pub p_wide: f64,
    /// Fit on `[T/8, T/2]`, i.e. the default window for horizon `T/2`.
    pub p_half_horizon: f64,
    /// Largest deviation of the three from the default `p_hat`.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub beta: f64,
    pub p_hat: f64,
    pub p_theory: f64,
    pub c_hat: f64,
    pub l0_hat: f64,
    pub c_from_l0: f64,
    pub window: (f64, f64),
    pub rms_log_error: f64,
    /// Start of the range where `f'' f' < 0` and `f''' f'' < 0` hold.
    pub t1: f64,
    pub s_values: Vec<f64>,
    pub identity_values: Vec<f64>,
    pub identity_stddev: f64,
    /// `|integrand(T)| * T`, a size estimate for the truncated tail of the
    /// improper integral.
    pub identity_tail_estimate: f64,
    pub energy_drift: Option<EnergyDrift>,
    pub window_sensitivity: WindowSensitivity,
}

impl AsymptoticFit {
    /// Report form; `energy_drift` is present only for `beta = -1`.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "beta": self.beta,
            "p_hat": self.p_hat,
            "p_theory": self.p_theory,
            "c_hat": self.c_hat,
            "l0_hat": self.l0_hat,
            "c_from_l0": self.c_from_l0,
            "window": [self.window.0, self.window.1],
            "rms_log_error": self.rms_log_error,
            "identity_stddev": self.identity_stddev,
            "t1": self.t1,
            "s_values": self.s_values,
            "identity_values": self.identity_values,
            "window_sensitivity": self.window_sensitivity,
        });
        if let Some(e) = &self.energy_drift {
            v["energy_drift"] = json!({"e0": e.e0, "max_drift": e.max_drift});
        }
        v
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

pub const IDENTITY_POINTS: usize = 5;

/// Full asymptotic report on an unbounded run: power-law fit on
/// `[T/4, T]`, `l0` from `t1` on, `R(s)` at five geometric points in
/// `[max(t1, T/1000), T/2]`, and the `beta = -1` energy drift.
pub fn asymptotic_report(trajectory: &Trajectory, beta: f64) -> Result<AsymptoticFit> {
    let t_end = trajectory.last().t;
    let window = (t_end / 4.0, t_end);
    let fit = fit_power_law(trajectory, window)?;

    let (t1, t1_index) = match sign_structure_report(trajectory, beta).products {
        ProductCheck::Holds { t1, index } => (t1, index),
        ProductCheck::Violated(v) => {
            return Err(LabError::Precondition(format!(
                "sign products f''f' < 0, f'''f'' < 0 fail at the end of the run (t = {})",
                v.t
            )))
        }
    };
    let first_nonzero = trajectory.samples()[t1_index..]
        .iter()
        .position(|s| s.f != 0.0)
        .map(|j| t1_index + j)
        .ok_or_else(|| LabError::Domain("f vanishes on the whole tail".into()))?;
    let l0 = estimate_l0(trajectory, beta, first_nonzero)?;

    let s_lo = t1.max(t_end * 1e-3).max(trajectory.samples()[first_nonzero].t);
    let s_hi = 0.5 * t_end;
    if !(s_lo < s_hi) {
        return Err(LabError::Domain(format!(
            "no room for identity points: t1 = {t1} too close to the end {t_end}"
        )));
    }
    let ratio = (s_hi / s_lo).powf(1.0 / (IDENTITY_POINTS - 1) as f64);
    let s_values: Vec<f64> = (0..IDENTITY_POINTS).map(|k| s_lo * ratio.powi(k as i32)).collect();
    let identity_values = identity_residual(trajectory, beta, &s_values)?;
    let (_, identity_stddev) = mean_std(&identity_values);

    let p_narrow = fit_power_law(trajectory, (t_end / 2.0, t_end))?.p_hat;
    let p_wide = fit_power_law(trajectory, (t_end / 8.0, t_end))?.p_hat;
    let p_half_horizon = fit_power_law(trajectory, (t_end / 8.0, t_end / 2.0))?.p_hat;
    let max_deviation = [p_narrow, p_wide, p_half_horizon]
        .iter()
        .map(|p| (p - fit.p_hat).abs())
        .fold(0.0, f64::max);

    Ok(AsymptoticFit {
        beta,
        p_hat: fit.p_hat,
        p_theory: 1.0 / (1.0 - beta),
        c_hat: fit.c_hat,
        l0_hat: l0.l0_hat,
        c_from_l0: c_from_l0(l0.l0_hat, beta),
        window,
        rms_log_error: fit.rms_log_error,
        t1,
        identity_tail_estimate: identity_integrand(trajectory.last(), beta).abs() * t_end,
        s_values,
        identity_values,
        identity_stddev,
        energy_drift: (beta == -1.0)
            .then(|| energy_conservation(trajectory, beta))
            .transpose()?,
        window_sensitivity: WindowSensitivity {
            p_narrow,
            p_wide,
            p_half_horizon,
            max_deviation,
        },
    })
}

/// Consecutive samples where the curve increases by more than `tol`,
/// reported as `(t, increase)`.
pub fn monotonicity_violations(curve: &[(f64, f64)], tol: f64) -> Vec<(f64, f64)> {
    curve
        .windows(2)
        .filter(|w| w[1].1 > w[0].1 + tol)
        .map(|w| (w[1].0, w[1].1 - w[0].1))
        .collect()
}
