//! Shooting on the free initial derivative of the two boundary-condition
//! families, and grid sweeps over `(a, beta)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::classify::{classify, ClassTag, SolutionClass, Thresholds};
use crate::error::{LabError, Result};
use crate::ode::{integrate, EventSpec, OdeState, Params};
use crate::trajectory::Trajectory;

pub const MAX_BISECTIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    /// `f(0) = a`, `f'(0) = 1`; the free unknown is `f''(0)`.
    PrescribedTemperature,
    /// `f(0) = a`, `f''(0) = -1`; the free unknown is `f'(0)`.
    PrescribedFlux,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::PrescribedTemperature => "PrescribedTemperature",
            Family::PrescribedFlux => "PrescribedFlux",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "PrescribedTemperature" | "temperature" => Ok(Family::PrescribedTemperature),
            "PrescribedFlux" | "flux" => Ok(Family::PrescribedFlux),
            other => Err(format!("unknown boundary-condition family `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryCondition {
    pub family: Family,
    pub a: f64,
}

impl BoundaryCondition {
    pub fn new(family: Family, a: f64) -> Self {
        Self { family, a }
    }

    /// Name of the free unknown at `t = 0`.
    pub fn free(&self) -> &'static str {
        match self.family {
            Family::PrescribedTemperature => "fpp0",
            Family::PrescribedFlux => "fp0",
        }
    }

    pub fn initial_state(&self, free: f64) -> OdeState {
        match self.family {
            Family::PrescribedTemperature => OdeState::new(0.0, self.a, 1.0, free),
            Family::PrescribedFlux => OdeState::new(0.0, self.a, free, -1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShootingResult {
    pub bc: BoundaryCondition,
    pub beta: f64,
    pub bracket: (f64, f64),
    pub value: f64,
    pub class_at_value: SolutionClass,
    pub iterations: usize,
    pub residual_bc: f64,
}

impl ShootingResult {
    pub fn to_json(&self) -> Value {
        let ev = &self.class_at_value.evidence;
        json!({
            "family": self.bc.family.as_str(),
            "a": self.bc.a,
            "beta": self.beta,
            "bracket": [self.bracket.0, self.bracket.1],
            "value": self.value,
            "class": self.class_at_value.tag.as_str(),
            "t_end": ev.t_end,
            "f_end": ev.f_end,
            "fp_end": ev.fp_end,
            "iterations": self.iterations,
            "residual_bc": self.residual_bc,
        })
    }
}

/// Integrates one shooting candidate. Runs stop once `|f|` reaches the
/// unboundedness level.
pub fn shoot_trajectory(bc: &BoundaryCondition, free: f64, params: &Params, th: &Thresholds) -> Result<Trajectory> {
    let events = EventSpec::none().stop_at_level(th.m_unbounded);
    integrate(bc.initial_state(free), params, &events)
}

fn candidate_class(bc: &BoundaryCondition, free: f64, params: &Params, th: &Thresholds) -> ClassTag {
    match shoot_trajectory(bc, free, params, th) {
        Ok(tr) => classify(&tr, params.beta, th).tag,
        Err(_) => ClassTag::Indeterminate,
    }
}

/// Default scan: +-geomspace(1e-3, 10, 32), ascending.
pub fn scan_grid() -> Vec<f64> {
    let n = 32;
    let (lo, hi) = (1e-3f64.ln(), 10f64.ln());
    let pos: Vec<f64> = (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    pos.iter().rev().map(|x| -x).chain(pos.iter().copied()).collect()
}

fn refine(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.extend(grid.last());
    out
}

fn scan(bc: &BoundaryCondition, grid: &[f64], params: &Params, th: &Thresholds) -> Vec<(f64, ClassTag)> {
    grid.iter().map(|&x| (x, candidate_class(bc, x, params, th))).collect()
}

/// Adjacent scan pair where exactly one side has the target class, closest
/// to zero.
fn pick_bracket(table: &[(f64, ClassTag)], target: ClassTag) -> Option<(f64, f64, bool)> {
    table
        .windows(2)
        .filter(|w| (w[0].1 == target) != (w[1].1 == target))
        .map(|w| (w[0].0, w[1].0, w[0].1 == target))
        .min_by(|x, y| {
            let dx = x.0.abs().min(x.1.abs());
            let dy = y.0.abs().min(y.1.abs());
            dx.total_cmp(&dy).then(x.0.total_cmp(&y.0))
        })
}

/// Scans the free parameter, brackets the edge of the set of values whose
/// run classifies as `target`, and bisects to that edge. The returned value
/// is the target-side end of the final bracket.
pub fn shoot(bc: &BoundaryCondition, params: &Params, target: ClassTag) -> Result<ShootingResult> {
    shoot_with(bc, params, target, &Thresholds::default())
}

pub fn shoot_with(
    bc: &BoundaryCondition,
    params: &Params,
    target: ClassTag,
    th: &Thresholds,
) -> Result<ShootingResult> {
    let beta = params.beta;
    if target.is_unbounded() && beta >= 0.0 {
        return Err(LabError::Precondition(format!(
            "beta = {beta}: for beta >= 0 every solution with f'(inf) = 0 is bounded, so no unbounded target exists"
        )));
    }
    if !bc.a.is_finite() {
        return Err(LabError::InvalidParams(format!("a = {} is not finite", bc.a)));
    }
    params.validate(0.0)?;

    let grid = scan_grid();
    let mut table = scan(bc, &grid, params, th);
    let mut found = pick_bracket(&table, target);
    if found.is_none() {
        let fine = refine(&grid);
        let mids: Vec<f64> = fine.iter().skip(1).step_by(2).copied().collect();
        let extra = scan(bc, &mids, params, th);
        table = fine
            .iter()
            .map(|&x| {
                table
                    .iter()
                    .chain(extra.iter())
                    .find(|e| e.0 == x)
                    .copied()
                    .expect("every refined point was scanned")
            })
            .collect();
        found = pick_bracket(&table, target);
    }
    let Some((mut lo, mut hi, lo_is_target)) = found else {
        return Err(LabError::BracketNotFound {
            scan: table.into_iter().map(|(x, c)| (x, c.to_string())).collect(),
        });
    };

    let mut iterations = 0;
    while (hi - lo).abs() > 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        if iterations == MAX_BISECTIONS {
            return Err(LabError::Convergence { iterations, lo, hi });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let mid_is_target = candidate_class(bc, mid, params, th) == target;
        if mid_is_target == lo_is_target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let value = if lo_is_target { lo } else { hi };
    let tr = shoot_trajectory(bc, value, params, th)?;
    let class_at_value = classify(&tr, beta, th);
    Ok(ShootingResult {
        bc: *bc,
        beta,
        bracket: (lo, hi),
        value,
        residual_bc: class_at_value.evidence.fp_end.abs(),
        class_at_value,
        iterations,
    })
}

/// Outcome of one sweep cell; failures are kept, never propagated.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub a: f64,
    pub beta: f64,
    pub outcome: std::result::Result<ShootingResult, CellError>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellError {
    pub kind: &'static str,
    pub message: String,
}

impl SweepCell {
    pub fn to_json(&self) -> Value {
        match &self.outcome {
            Ok(r) => r.to_json(),
            Err(e) => json!({
                "a": self.a,
                "beta": self.beta,
                "error": e.kind,
                "message": e.message,
            }),
        }
    }

    pub fn csv_row(&self) -> String {
        match &self.outcome {
            Ok(r) => format!("{:e},{:e},{:.16e},{}", self.a, self.beta, r.value, r.class_at_value.tag),
            Err(e) => format!("{:e},{:e},NaN,{}", self.a, self.beta, e.kind),
        }
    }
}

pub const SWEEP_CSV_HEADER: &str = "a,beta,value,class";

/// Evaluates `shoot` on the grid `a_values x beta_values`. Cells run in
/// parallel (capped at `threads` when given) and are returned `a`-major in
/// grid order.
pub fn sweep(
    family: Family,
    a_values: &[f64],
    beta_values: &[f64],
    params: &Params,
    target: ClassTag,
    threads: Option<usize>,
) -> Result<Vec<SweepCell>> {
    let cells: Vec<(f64, f64)> = a_values
        .iter()
        .flat_map(|&a| beta_values.iter().map(move |&b| (a, b)))
        .collect();
    let run = |&(a, beta): &(f64, f64)| {
        let p = Params { beta, ..params.clone() };
        let outcome = shoot(&BoundaryCondition::new(family, a), &p, target).map_err(|e| CellError {
            kind: e.kind(),
            message: e.to_string(),
        });
        SweepCell { a, beta, outcome }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| LabError::InvalidParams(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(run).collect()))
}
