//! One-dimensional minimization on a closed interval.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a unimodal `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `width`. Returns the best abscissa seen.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, width: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while b - a > width && iters < 400 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iters += 1;
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Bisection for a sign change of `g` on `[lo, hi]`. Returns `None` if the
/// endpoint values do not bracket a root.
pub(crate) fn bisect<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a), g(b));
    if !(ga.is_finite() && gb.is_finite()) || ga * gb > 0.0 {
        return None;
    }
    if ga == 0.0 {
        return Some(a);
    }
    if gb == 0.0 {
        return Some(b);
    }
    let neg_at_a = ga < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return Some(m);
        }
        if (gm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_quadratic_minimum() {
        let x = golden_section(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn golden_handles_kink() {
        let x = golden_section(|x| (x - 0.7).abs(), 0.0, 2.0, 1e-12);
        assert!((x - 0.7).abs() < 1e-11);
    }

    #[test]
    fn bisect_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!(bisect(|x| x * x + 1.0, 0.0, 1.0).is_none());
    }
}
