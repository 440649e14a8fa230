//! One-dimensional derivative-free minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// A located minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMin {
    pub x: f64,
    pub f: f64,
    /// The best grid point was the first or last sample, so no interior
    /// bracket existed and the grid point itself was returned.
    pub degenerate: bool,
}

/// Golden-section search for a minimum of `f` on `[a, b]` until the bracket
/// is narrower than `tol`. Also compares against the interior probes, so the
/// result is the best point evaluated.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .fold((mid, fm), |best, p| if p.1 < best.1 { p } else { best })
}

/// Samples `m` equally spaced points on `[lo, hi]` (both ends included),
/// then refines the bracket around the best sample by golden section.
/// Non-finite values count as `+inf`.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, m: usize, tol: f64) -> LineMin {
    assert!(m >= 3, "grid needs at least 3 points");
    let mut g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let step = (hi - lo) / (m - 1) as f64;
    let xs: Vec<f64> = (0..m).map(|i| if i == m - 1 { hi } else { lo + step * i as f64 }).collect();
    let mut best_i = 0;
    let mut best_f = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = g(x);
        if v < best_f {
            best_f = v;
            best_i = i;
        }
    }
    if best_i == 0 || best_i == m - 1 || !best_f.is_finite() {
        return LineMin {
            x: xs[best_i],
            f: best_f,
            degenerate: true,
        };
    }
    let (x, fx) = golden_section(&mut g, xs[best_i - 1], xs[best_i + 1], tol);
    if fx <= best_f {
        LineMin { x, f: fx, degenerate: false }
    } else {
        LineMin {
            x: xs[best_i],
            f: best_f,
            degenerate: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn grid_escapes_local_minimum() {
        // Shallow dip at 0.2, deep one at 0.8.
        let f = |x: f64| -0.2 * (-((x - 0.2) / 0.05).powi(2)).exp() - (-((x - 0.8) / 0.05).powi(2)).exp();
        let r = grid_then_golden(f, 0.0, 1.0, 50, 1e-8);
        assert!((r.x - 0.8).abs() < 1e-6);
        assert!(!r.degenerate);
    }

    #[test]
    fn boundary_minimum_is_degenerate() {
        let r = grid_then_golden(|x| x, 1.0, 2.0, 11, 1e-6);
        assert!(r.degenerate);
        assert_eq!(r.x, 1.0);
        let r = grid_then_golden(|x| if x < 1.5 { f64::NAN } else { -x }, 1.0, 2.0, 11, 1e-6);
        assert_eq!(r.x, 2.0);
    }
}
