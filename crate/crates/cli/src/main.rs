//! `bl-lab`: integration, shooting, sweeps, asymptotic fits, phase-plane
//! output and the acceptance suite from the command line.
//!
//! Exit status: 0 on success, 1 on a domain or convergence error (and on
//! failed acceptance checks), 2 on an invalid invocation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bl_lab::asymptotics::asymptotic_report;
use bl_lab::blowup::{
    equilibria_json, integrate_planar, to_blowup, write_phase_csv, write_vector_field_csv, PhaseState,
};
use bl_lab::report::{report_string, write_atomic, write_report_json, write_trajectory_csv};
use bl_lab::shoot::{shoot, shoot_trajectory, sweep, BoundaryCondition, Family, SWEEP_CSV_HEADER};
use bl_lab::verify::{summarize, title, Suite};
use bl_lab::{exact_solution, integrate, ClassTag, EventSpec, LabError, OdeState, Params, Thresholds, Trajectory};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "bl-lab",
    version,
    about = "Numerical laboratory for f''' + f f'' - beta f'^2 = 0"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one initial-value problem and write the trajectory CSV.
    Integrate(IntegrateArgs),
    /// Shoot on the free initial datum of a boundary-condition family.
    Shoot(ShootArgs),
    /// Shoot over a grid of wall values and betas.
    Sweep(SweepArgs),
    /// Power-law fit and identity checks on an unbounded run.
    Fit(FitArgs),
    /// Equilibria of the planar system, vector field and phase curves.
    Phase(PhaseArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct NumericArgs {
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Integration horizon.
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    f_cap: Option<f64>,
}

impl NumericArgs {
    fn params(&self, beta: f64) -> Params {
        let mut p = Params::new(beta);
        if let Some(v) = self.rtol {
            p.rtol = v;
        }
        if let Some(v) = self.atol {
            p.atol = v;
        }
        if let Some(v) = self.t_max {
            p.t_max = v;
        }
        if let Some(v) = self.f_cap {
            p.f_cap = v;
        }
        p
    }
}

#[derive(Args, Clone)]
struct BcArgs {
    /// `temperature` (f'(0) = 1, free f''(0)) or `flux` (f''(0) = -1, free f'(0)).
    #[arg(long, default_value = "temperature")]
    family: Family,
    /// Wall value f(0).
    #[arg(long, default_value_t = 0.0)]
    a: f64,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    /// Start on the closed-form solution 6/((2 - beta)(t - tau)).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tau: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    /// End time (overrides --t-max).
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    f0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    fp0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    fpp0: Option<f64>,
    /// Record sign changes of f, f', f''.
    #[arg(long)]
    events: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    num: NumericArgs,
}

#[derive(Args)]
struct ShootArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[command(flatten)]
    bc: BcArgs,
    #[arg(long, default_value = "unbounded")]
    target: ClassTag,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the trajectory at the converged value.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[command(flatten)]
    num: NumericArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "temperature")]
    family: Family,
    /// Comma-separated wall values; an empty string gives an empty grid.
    #[arg(long, allow_hyphen_values = true)]
    a: FloatList,
    /// Comma-separated betas.
    #[arg(long, allow_hyphen_values = true)]
    beta: FloatList,
    #[arg(long, default_value = "unbounded")]
    target: ClassTag,
    /// JSON array of results.
    #[arg(long)]
    out: PathBuf,
    /// CSV summary `a,beta,value,class`.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    num: NumericArgs,
}

#[derive(Clone, Debug)]
struct FloatList(Vec<f64>);

impl std::str::FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<Result<_, _>>()
            .map(FloatList)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    /// Trajectory CSV to fit; without it the run comes from shooting.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    bc: BcArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    num: NumericArgs,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    /// Equilibrium report JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Vector-field grid CSV `u,v,du,dv`.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true, default_values_t = [-2.0, 2.0])]
    u_range: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true, default_values_t = [-2.0, 2.0])]
    v_range: Vec<f64>,
    #[arg(long, default_value_t = 21)]
    grid: usize,
    /// Trajectory CSV to map into blow-up coordinates (tail where f keeps one sign).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Start of a planar orbit, integrated to s = --t-max.
    #[arg(long, num_args = 2, value_names = ["U", "V"], allow_hyphen_values = true)]
    orbit: Option<Vec<f64>>,
    /// Phase CSV `s,u,v` for --input or --orbit.
    #[arg(long)]
    phase_out: Option<PathBuf>,
    #[command(flatten)]
    num: NumericArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only the criteria that need no shooting.
    #[arg(long)]
    quick: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("invalid invocation: {0}")]
    Config(String),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("{0} acceptance check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Lab(LabError::InvalidParams(_)) => 2,
            _ => 1,
        }
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Integrate(a) => run_integrate(a),
        Command::Shoot(a) => run_shoot(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Fit(a) => run_fit(a),
        Command::Phase(a) => run_phase(a),
        Command::Verify(a) => run_verify(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bl-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn emit_json(v: &Value, out: Option<&Path>) -> CliResult {
    match out {
        Some(p) => write_report_json(v, p)?,
        None => print!("{}", report_string(v)),
    }
    Ok(())
}

fn run_integrate(a: IntegrateArgs) -> CliResult {
    let mut params = a.num.params(a.beta);
    if let Some(t) = a.t_end {
        params.t_max = t;
    }
    let mut init = if a.exact {
        exact_solution(a.t0, a.beta, a.tau)?
    } else {
        OdeState::new(a.t0, 0.0, 0.0, 0.0)
    };
    if a.exact && (a.f0.is_some() || a.fp0.is_some() || a.fpp0.is_some()) {
        return Err(CliError::Config(
            "--exact fixes the initial state; drop --f0/--fp0/--fpp0".into(),
        ));
    }
    if !a.exact && a.f0.is_none() && a.fp0.is_none() && a.fpp0.is_none() {
        return Err(CliError::Config(
            "give --exact or at least one of --f0, --fp0, --fpp0".into(),
        ));
    }
    init.f = a.f0.unwrap_or(init.f);
    init.fp = a.fp0.unwrap_or(init.fp);
    init.fpp = a.fpp0.unwrap_or(init.fpp);
    let events = if a.events {
        EventSpec::all_sign_changes()
    } else {
        EventSpec::none()
    };
    let tr = integrate(init, &params, &events)?;
    write_trajectory_csv(&tr, &a.out)?;
    let last = tr.last();
    println!(
        "{} samples, {} at t = {}, f = {:.16e}",
        tr.len(),
        tr.termination(),
        last.t,
        last.f
    );
    Ok(())
}

fn run_shoot(a: ShootArgs) -> CliResult {
    let params = a.num.params(a.beta);
    let bc = BoundaryCondition::new(a.bc.family, a.bc.a);
    let r = shoot(&bc, &params, a.target)?;
    if let Some(p) = &a.trajectory {
        let tr = shoot_trajectory(&bc, r.value, &params, &Thresholds::default())?;
        write_trajectory_csv(&tr, p)?;
    }
    emit_json(&r.to_json(), a.out.as_deref())
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("BL_LAB_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "BL_LAB_THREADS must be a positive integer, got `{s}`"
            ))),
        },
    }
}

fn run_sweep(a: SweepArgs) -> CliResult {
    let threads = threads_from_env()?;
    let (a_values, betas) = (&a.a.0, &a.beta.0);
    let params = a.num.params(betas.first().copied().unwrap_or(0.0));
    let cells = sweep(a.family, a_values, betas, &params, a.target, threads)?;
    let json = Value::Array(cells.iter().map(|c| c.to_json()).collect());
    write_report_json(&json, &a.out)?;
    if let Some(p) = &a.csv {
        write_atomic(p, |w| {
            writeln!(w, "{SWEEP_CSV_HEADER}")?;
            for c in &cells {
                writeln!(w, "{}", c.csv_row())?;
            }
            Ok(())
        })?;
    }
    let ok = cells.iter().filter(|c| c.outcome.is_ok()).count();
    println!("{ok} of {} cells converged", cells.len());
    Ok(())
}

fn run_fit(a: FitArgs) -> CliResult {
    let tr = match &a.input {
        Some(p) => Trajectory::read_csv_file(p)?,
        None => {
            let params = a.num.params(a.beta);
            let bc = BoundaryCondition::new(a.bc.family, a.bc.a);
            let r = shoot(&bc, &params, ClassTag::UnboundedPositive)?;
            shoot_trajectory(&bc, r.value, &params, &Thresholds::default())?
        }
    };
    let fit = asymptotic_report(&tr, a.beta)?;
    emit_json(&fit.to_json(), a.out.as_deref())
}

fn run_phase(a: PhaseArgs) -> CliResult {
    if a.input.is_some() && a.orbit.is_some() {
        return Err(CliError::Config("--input and --orbit are exclusive".into()));
    }
    if (a.input.is_some() || a.orbit.is_some()) != a.phase_out.is_some() {
        return Err(CliError::Config(
            "--phase-out goes together with --input or --orbit".into(),
        ));
    }
    if let Some(p) = &a.field {
        let (u, v) = ((a.u_range[0], a.u_range[1]), (a.v_range[0], a.v_range[1]));
        write_atomic(p, |w| write_vector_field_csv(a.beta, u, v, a.grid, w))?;
    }
    let states: Option<Vec<PhaseState>> = if let Some(p) = &a.input {
        let tr = Trajectory::read_csv_file(p)?;
        let start = tr
            .samples()
            .windows(2)
            .rposition(|w| w[0].f == 0.0 || w[0].f.signum() != w[1].f.signum())
            .map_or(0, |i| i + 1);
        let tail = tr.tail_from(start)?;
        Some(to_blowup(&tail, 0)?)
    } else if let Some(uv) = &a.orbit {
        let params = a.num.params(a.beta);
        Some(integrate_planar(PhaseState::new(0.0, uv[0], uv[1]), a.beta, &params)?)
    } else {
        None
    };
    if let (Some(states), Some(p)) = (states, &a.phase_out) {
        write_atomic(p, |w| write_phase_csv(&states, w))?;
    }
    emit_json(&equilibria_json(a.beta), a.out.as_deref())
}

fn run_verify(a: VerifyArgs) -> CliResult {
    let suite = Suite::new();
    let checks = if a.quick { suite.quick() } else { suite.all() };
    for c in &checks {
        println!("{c}");
    }
    println!();
    for (id, ok) in summarize(&checks) {
        println!("{} criterion {id:>2}: {}", if ok { "PASS" } else { "FAIL" }, title(id));
    }
    if a.quick {
        println!("quick mode: criteria 2-6 and 10 and the transform part of 8 not run");
    }
    match checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}
