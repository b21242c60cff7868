//! Dormand-Prince 5(4) stepping engine with PI step-size control and the
//! standard 4th-order continuous extension. Shared by the f-space integrator
//! and the planar blow-up integrator; both systems are autonomous.

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// Controller constants (Hairer-Norsett-Wanner defaults for DOPRI5).
const SAFE: f64 = 0.9;
const FAC_MIN_INV: f64 = 5.0;
const FAC_MAX_INV: f64 = 0.1;
const PI_BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - PI_BETA * 0.75;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// An accepted step together with its continuous extension.
#[derive(Clone, Debug)]
pub(crate) struct AcceptedStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> AcceptedStep<N> {
    /// Dense output at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        if t == self.t1 {
            return self.y1;
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        out
    }
}

pub(crate) enum Attempt<const N: usize> {
    Accepted { step: AcceptedStep<N>, h_next: f64 },
    Rejected { h_next: f64 },
}

/// Adaptive stepper. Holds the FSAL derivative of the current state and the
/// PI controller memory; the caller owns `t` and `y`.
pub(crate) struct Dopri5<F, const N: usize> {
    rhs: F,
    rtol: f64,
    atol: f64,
    k1: [f64; N],
    facold: f64,
    last_rejected: bool,
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    pub fn new(rhs: F, y0: &[f64; N], rtol: f64, atol: f64) -> Self {
        let k1 = rhs(y0);
        Self {
            rhs,
            rtol,
            atol,
            k1,
            facold: 1e-4,
            last_rejected: false,
        }
    }

    fn scale(&self, y: f64) -> f64 {
        self.atol + self.rtol * y.abs()
    }

    /// Starting step size estimate (Hairer's `hinit`), capped by `h_max`.
    pub fn initial_step(&self, y0: &[f64; N], h_max: f64) -> f64 {
        let n = N as f64;
        let f0 = self.k1;
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sk = self.scale(y0[i]);
            dnf += (f0[i] / sk).powi(2);
            dny += (y0[i] / sk).powi(2);
        }
        dnf /= n;
        dny /= n;
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(h_max);
        let y1 = axpy(y0, h, &[(1.0, &f0)]);
        let f1 = (self.rhs)(&y1);
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.scale(y0[i]);
            der2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        let h = (100.0 * h).min(h1).min(h_max);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            1e-6_f64.min(h_max)
        }
    }

    fn stages(&self, y: &[f64; N], h: f64) -> ([f64; N], [[f64; N]; 7]) {
        let k1 = self.k1;
        let k2 = (self.rhs)(&axpy(y, h, &[(A21, &k1)]));
        let k3 = (self.rhs)(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = (self.rhs)(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = (self.rhs)(&axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = (self.rhs)(&axpy(
            y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y1 = axpy(y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = (self.rhs)(&y1);
        (y1, [k1, k2, k3, k4, k5, k6, k7])
    }

    /// One error-controlled step attempt from `(t, y)` with step `h`. When
    /// `t_end` is given the accepted step ends exactly there.
    pub fn attempt(&mut self, t: f64, y: &[f64; N], h: f64, t_end: Option<f64>) -> Attempt<N> {
        let (y1, k) = self.stages(y, h);
        let mut err = 0.0;
        for i in 0..N {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sk = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sk).powi(2);
        }
        let mut err = (err / N as f64).sqrt();
        let finite = y1.iter().chain(k[6].iter()).all(|v| v.is_finite());
        if !err.is_finite() || !finite {
            err = 1e10;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = fac11 / self.facold.powf(PI_BETA);
            let fac = FAC_MAX_INV.max(FAC_MIN_INV.min(fac / SAFE));
            let mut h_next = h / fac;
            if self.last_rejected {
                h_next = h_next.min(h);
            }
            self.facold = err.max(1e-4);
            self.last_rejected = false;

            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y1[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                cont[4][i] =
                    h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            self.k1 = k[6];
            let t1 = t_end.unwrap_or(t + h);
            Attempt::Accepted {
                step: AcceptedStep {
                    t0: t,
                    t1,
                    h,
                    y0: *y,
                    y1,
                    cont,
                },
                h_next,
            }
        } else {
            self.last_rejected = true;
            Attempt::Rejected {
                h_next: h / FAC_MIN_INV.min(fac11 / SAFE),
            }
        }
    }

    /// Fifth-order step with no error control.
    pub fn fixed(&mut self, y: &[f64; N], h: f64) -> [f64; N] {
        let (y1, k) = self.stages(y, h);
        self.k1 = k[6];
        y1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let rhs = |y: &[f64; 1]| [-y[0]];
        let mut st = Dopri5::new(rhs, &[1.0], 1e-10, 1e-12);
        let (mut t, mut y) = (0.0, [1.0]);
        let mut h = st.initial_step(&y, 1.0);
        while t < 5.0 {
            let hh = h.min(5.0 - t);
            let end = (hh == 5.0 - t).then_some(5.0);
            match st.attempt(t, &y, hh, end) {
                Attempt::Accepted { step, h_next } => {
                    t = step.t1;
                    y = step.y1;
                    h = h_next;
                }
                Attempt::Rejected { h_next } => h = h_next,
            }
        }
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_hits_both_endpoints() {
        let rhs = |y: &[f64; 2]| [y[1], -y[0]];
        let mut st = Dopri5::new(rhs, &[0.0, 1.0], 1e-6, 1e-9);
        let Attempt::Accepted { step, .. } = st.attempt(0.0, &[0.0, 1.0], 0.05, None) else {
            panic!("step rejected");
        };
        assert_eq!(step.eval(0.0), [0.0, 1.0]);
        assert_eq!(step.eval(step.t1), step.y1);
        let mid = step.eval(0.025);
        assert!((mid[0] - 0.025f64.sin()).abs() < 1e-10);
    }
}
