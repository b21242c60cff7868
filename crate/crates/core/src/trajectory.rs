//! The solution record: ordered `(t, f, f', f'')` samples, the reason the
//! run stopped, and the located sign-change events. Also the trajectory CSV
//! format.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::ode::{self, OdeState};

/// Why an integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    HorizonReached,
    FCapHit,
    StepCollapse,
    EventStop,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::HorizonReached => "HorizonReached",
            Termination::FCapHit => "FCapHit",
            Termination::StepCollapse => "StepCollapse",
            Termination::EventStop => "EventStop",
        };
        f.write_str(s)
    }
}

impl FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "HorizonReached" => Ok(Termination::HorizonReached),
            "FCapHit" => Ok(Termination::FCapHit),
            "StepCollapse" => Ok(Termination::StepCollapse),
            "EventStop" => Ok(Termination::EventStop),
            other => Err(format!("unknown termination `{other}`")),
        }
    }
}

/// Which state component an event watches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Component {
    F,
    Fp,
    Fpp,
}

impl Component {
    pub fn of(self, s: &OdeState) -> f64 {
        match self {
            Component::F => s.f,
            Component::Fp => s.fp,
            Component::Fpp => s.fpp,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Component::F => 0,
            Component::Fp => 1,
            Component::Fpp => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EventKind {
    /// A sign change of the component.
    SignChange(Component),
    /// `|f|` reached the configured stop level.
    Level,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::SignChange(Component::F) => "f_sign",
            EventKind::SignChange(Component::Fp) => "fp_sign",
            EventKind::SignChange(Component::Fpp) => "fpp_sign",
            EventKind::Level => "f_level",
        };
        f.write_str(s)
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f_sign" => Ok(EventKind::SignChange(Component::F)),
            "fp_sign" => Ok(EventKind::SignChange(Component::Fp)),
            "fpp_sign" => Ok(EventKind::SignChange(Component::Fpp)),
            "f_level" => Ok(EventKind::Level),
            other => Err(format!("unknown event kind `{other}`")),
        }
    }
}

/// A located event. `state` is the dense-output state at `t`; it is not
/// persisted in CSV (only `t` and `kind` are).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub state: Option<OdeState>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    samples: Vec<OdeState>,
    termination: Termination,
    events: Vec<Event>,
}

impl Trajectory {
    /// Builds a trajectory, checking that samples are finite and strictly
    /// increasing in `t` and that there are at least two of them.
    pub fn new(samples: Vec<OdeState>, termination: Termination, events: Vec<Event>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(LabError::InvariantViolation(format!(
                "a trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(LabError::InvariantViolation(format!("sample {i} is not finite")));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(LabError::InvariantViolation(format!(
                "t is not strictly increasing at sample {} (t = {} then {})",
                i + 1,
                samples[i].t,
                samples[i + 1].t
            )));
        }
        Ok(Self {
            samples,
            termination,
            events,
        })
    }

    /// Samples a closed-form solution at the given times.
    pub fn from_fn<F: Fn(f64) -> OdeState>(ts: impl IntoIterator<Item = f64>, f: F) -> Result<Self> {
        let samples = ts.into_iter().map(f).collect();
        Self::new(samples, Termination::HorizonReached, Vec::new())
    }

    pub fn samples(&self) -> &[OdeState] {
        &self.samples
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &OdeState {
        &self.samples[0]
    }

    pub fn last(&self) -> &OdeState {
        self.samples.last().expect("trajectory has at least two samples")
    }

    pub fn t_span(&self) -> (f64, f64) {
        (self.first().t, self.last().t)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// The sub-trajectory starting at sample `start` (inclusive). Events
    /// before the new start are dropped.
    pub fn tail_from(&self, start: usize) -> Result<Self> {
        if start + 2 > self.samples.len() {
            return Err(LabError::InsufficientData {
                needed: 2,
                got: self.samples.len().saturating_sub(start),
            });
        }
        let t0 = self.samples[start].t;
        let events = self.events.iter().filter(|e| e.t >= t0).cloned().collect();
        Self::new(self.samples[start..].to_vec(), self.termination, events)
    }

    /// Index of the first sample with `t >= t`, or `len()` if none.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        self.samples.partition_point(|s| s.t < t)
    }

    /// Dense evaluation between samples by quintic Hermite interpolation.
    /// The value, first and second derivative of each component at both ends
    /// of the interval are recovered from the equation itself, so nothing
    /// beyond the samples needs storing.
    pub fn state_at(&self, t: f64, beta: f64) -> Result<OdeState> {
        let (lo, hi) = self.t_span();
        if !(lo..=hi).contains(&t) {
            return Err(LabError::Domain(format!(
                "t = {t} outside trajectory span [{lo}, {hi}]"
            )));
        }
        let j = self.index_at_or_after(t);
        if self.samples[j].t == t {
            return Ok(self.samples[j]);
        }
        let (a, b) = (&self.samples[j - 1], &self.samples[j]);
        let h = b.t - a.t;
        let th = (t - a.t) / h;
        let ja = ode::jet(a, beta);
        let jb = ode::jet(b, beta);
        let comp = |k: usize| hermite5(th, h, [ja[k], ja[k + 1], ja[k + 2]], [jb[k], jb[k + 1], jb[k + 2]]);
        Ok(OdeState {
            t,
            f: comp(0),
            fp: comp(1),
            fpp: comp(2),
        })
    }

    /// Writes the CSV form: header `t,f,fp,fpp`, one row per sample at 17
    /// significant digits, then `# event,<kind>,<t>` lines and a
    /// `# termination,<kind>` line. LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,f,fp,fpp")?;
        for s in &self.samples {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", s.t, s.f, s.fp, s.fpp)?;
        }
        for e in &self.events {
            writeln!(w, "# event,{},{:.16e}", e.kind, e.t)?;
        }
        writeln!(w, "# termination,{}", self.termination)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut samples = Vec::new();
        let mut events = Vec::new();
        let mut termination = Termination::HorizonReached;
        let mut saw_header = false;
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let parse_err = |message: String| LabError::Parse { line: line_no, message };
            if !saw_header {
                if line != "t,f,fp,fpp" {
                    return Err(parse_err(format!("expected header `t,f,fp,fpp`, found `{line}`")));
                }
                saw_header = true;
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let fields: Vec<&str> = comment.trim().split(',').collect();
                match fields.as_slice() {
                    ["event", kind, t] => {
                        let kind = kind.parse::<EventKind>().map_err(parse_err)?;
                        let t = t
                            .parse::<f64>()
                            .map_err(|e| parse_err(format!("bad event time: {e}")))?;
                        events.push(Event { t, kind, state: None });
                    }
                    ["termination", kind] => {
                        termination = kind.parse().map_err(parse_err)?;
                    }
                    _ => {}
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(format!("bad number: {e}")))?;
            if vals.len() != 4 {
                return Err(parse_err(format!("expected 4 columns, found {}", vals.len())));
            }
            samples.push(OdeState {
                t: vals[0],
                f: vals[1],
                fp: vals[2],
                fpp: vals[3],
            });
        }
        if !saw_header {
            return Err(LabError::Parse {
                line: 1,
                message: "empty file".into(),
            });
        }
        Self::new(samples, termination, events)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Quintic Hermite interpolant on an interval of length `h` at fraction `th`
/// from `(y, y', y'')` at both ends.
fn hermite5(th: f64, h: f64, a: [f64; 3], b: [f64; 3]) -> f64 {
    let t2 = th * th;
    let t3 = t2 * th;
    let t4 = t3 * th;
    let t5 = t4 * th;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = th - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
    h00 * a[0] + h * h10 * a[1] + h * h * h20 * a[2] + h01 * b[0] + h * h11 * b[1] + h * h * h21 * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::exact_solution;

    fn exact(beta: f64) -> Trajectory {
        Trajectory::from_fn((0..=100).map(|i| 1.0 + 0.1 * i as f64), |t| {
            exact_solution(t, beta, 0.0).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = Trajectory::read_csv("t,f,g,h\n0,1,2,3\n1,1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn non_monotone_time_is_an_invariant_violation() {
        let csv = "t,f,fp,fpp\n0,1,0,0\n2,1,0,0\n1,1,0,0\n";
        let err = Trajectory::read_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, LabError::InvariantViolation(_)), "{err}");
    }

    #[test]
    fn bad_number_reports_line() {
        let csv = "t,f,fp,fpp\n0,1,0,0\n1,x,0,0\n";
        match Trajectory::read_csv(csv.as_bytes()).unwrap_err() {
            LabError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn events_and_termination_survive_round_trip() {
        let tr = Trajectory::new(
            vec![OdeState::new(0.0, 1.0, -1.0, 0.5), OdeState::new(1.0, 0.1, -0.3, 0.2)],
            Termination::EventStop,
            vec![Event {
                t: 0.75,
                kind: EventKind::SignChange(Component::Fp),
                state: None,
            }],
        )
        .unwrap();
        let text = tr.to_csv_string();
        assert!(text.contains("# event,fp_sign,7.5000000000000000e-1\n"));
        let back = Trajectory::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn hermite_dense_output_tracks_closed_form() {
        let tr = exact(-1.0);
        for &t in &[1.1, 2.37, 7.9, 10.99] {
            let got = tr.state_at(t, -1.0).unwrap();
            let want = exact_solution(t, -1.0, 0.0).unwrap();
            assert!((got.f - want.f).abs() < 1e-5, "t={t}: {} vs {}", got.f, want.f);
            assert!((got.fpp - want.fpp).abs() < 1e-3);
        }
        assert!(tr.state_at(0.5, -1.0).is_err());
    }

    #[test]
    fn tail_from_keeps_late_events_only() {
        let mut tr = exact(-1.0);
        tr.events.push(Event {
            t: 1.2,
            kind: EventKind::Level,
            state: None,
        });
        tr.events.push(Event {
            t: 9.2,
            kind: EventKind::Level,
            state: None,
        });
        let tail = tr.tail_from(10).unwrap();
        assert_eq!(tail.first().t, 2.0);
        assert_eq!(tail.events().len(), 1);
        assert!(tr.tail_from(100).is_err());
    }
}
