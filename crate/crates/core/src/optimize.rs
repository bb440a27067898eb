//! Golden-section search for the maximum of a unimodal function on an interval.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `f` on `[lo, hi]` to bracket width `tol`. Endpoints are compared
/// against the interior optimum, so boundary maxima are returned exactly.
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Maximum {
    debug_assert!(lo <= hi);
    if hi - lo <= tol {
        let (a, b) = (f(lo), f(hi));
        return if b > a {
            Maximum { arg: hi, value: b, evaluations: 2 }
        } else {
            Maximum { arg: lo, value: a, evaluations: 2 }
        };
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while b - a > tol {
        if fc >= fd {
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
        evaluations += 1;
    }
    let mut best = if fc >= fd {
        Maximum { arg: c, value: fc, evaluations }
    } else {
        Maximum { arg: d, value: fd, evaluations }
    };
    for end in [lo, hi] {
        let v = f(end);
        best.evaluations += 1;
        if v > best.value {
            best.arg = end;
            best.value = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maximum() {
        let m = golden_section_max(|x| -(x - 0.2).powi(2), -1.0, 1.0, 1e-10);
        assert!((m.arg - 0.2).abs() < 1e-9);
        assert!(m.evaluations < 60);
    }

    #[test]
    fn returns_boundary_maximum_exactly() {
        let m = golden_section_max(|x| -x, 0.0, 3.0, 1e-10);
        assert_eq!(m.arg, 0.0);
        assert_eq!(m.value, 0.0);
        let m = golden_section_max(|x: f64| x.sqrt(), 0.0, 3.0, 1e-10);
        assert_eq!(m.arg, 3.0);
    }

    #[test]
    fn degenerate_interval() {
        let m = golden_section_max(|x| x, 2.0, 2.0, 1e-10);
        assert_eq!(m.arg, 2.0);
    }
}
