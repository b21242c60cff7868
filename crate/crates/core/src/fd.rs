//! Finite-difference derivatives on non-uniform grids.

/// Derivative at `xs[i]` of the Lagrange polynomial through the points
/// `xs[lo..lo+m]`, `ys[lo..lo+m]` (which must contain `i`).
fn lagrange_derivative(xs: &[f64], ys: &[f64], lo: usize, m: usize, i: usize) -> f64 {
    let xi = xs[i];
    let mut d = 0.0;
    for j in lo..lo + m {
        let w = if j == i {
            (lo..lo + m)
                .filter(|&k| k != i)
                .map(|k| 1.0 / (xi - xs[k]))
                .sum::<f64>()
        } else {
            let mut w = 1.0 / (xs[j] - xi);
            for k in lo..lo + m {
                if k != i && k != j {
                    w *= (xi - xs[k]) / (xs[j] - xs[k]);
                }
            }
            w
        };
        d += w * ys[j];
    }
    d
}

/// Centered derivative estimates at interior points: seven-point (sixth
/// order) stencils when at least seven points exist, then five- and
/// three-point stencils on shorter grids. Returns `(index, derivative)` pairs.
pub(crate) fn interior_derivatives(xs: &[f64], ys: &[f64]) -> Vec<(usize, f64)> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let half = match n {
        0..=2 => return Vec::new(),
        3..=4 => 1,
        5..=6 => 2,
        _ => 3,
    };
    (half..n - half)
        .map(|i| (i, lagrange_derivative(xs, ys, i - half, 2 * half + 1, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_point_stencil_is_exact_on_sextics() {
        let xs: [f64; 9] = [0.0, 0.3, 0.45, 1.1, 1.2, 2.0, 2.7, 2.75, 3.5];
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(6) - 2.0 * x.powi(5) + x).collect();
        let d = interior_derivatives(&xs, &ys);
        assert_eq!(d.len(), 3);
        for (i, d) in d {
            let x = xs[i];
            let want = 6.0 * x.powi(5) - 10.0 * x.powi(4) + 1.0;
            assert!((d - want).abs() < 1e-9, "i={i}: {d} vs {want}");
        }
    }

    #[test]
    fn five_point_stencil_is_exact_on_quartics() {
        let xs: [f64; 6] = [0.0, 0.3, 0.45, 1.1, 1.2, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(4) - 3.0 * x * x + 1.0).collect();
        for (i, d) in interior_derivatives(&xs, &ys) {
            let x = xs[i];
            let want = 4.0 * x.powi(3) - 6.0 * x;
            assert!((d - want).abs() < 1e-11, "i={i}: {d} vs {want}");
        }
    }

    #[test]
    fn three_point_fallback_on_short_grids() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.0, 1.0, 9.0];
        let d = interior_derivatives(&xs, &ys);
        assert_eq!(d.len(), 1);
        assert!((d[0].1 - 2.0).abs() < 1e-14);
        assert!(interior_derivatives(&xs[..2], &ys[..2]).is_empty());
    }
}
