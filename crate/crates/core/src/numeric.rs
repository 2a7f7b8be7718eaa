//! Small numeric helpers shared by the analysis modules.

use crate::error::{OpticsError, Result};

/// Neumaier-compensated sum, evaluated in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Golden-section minimization of a unimodal `f` over `[lo, hi]`.
///
/// Returns the abscissa of the minimum once the bracket is narrower than
/// `tol`. A minimum that lands on either end of the original bracket is
/// reported as [`OpticsError::Bracket`], since the true minimum may lie
/// outside it.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (lo0, hi0) = (lo.min(hi), lo.max(hi));
    let (mut a, mut b) = (lo0, hi0);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc < fd || (fc.is_finite() && fd.is_nan()) {
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
    let x = 0.5 * (a + b);
    if x - lo0 <= tol || hi0 - x <= tol {
        return Err(OpticsError::Bracket { lo: lo0, hi: hi0, at: x });
    }
    Ok(x)
}

/// Linear-interpolated percentile of already sorted data, `q` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 >= n {
                sorted[n - 1]
            } else {
                sorted[i] + frac * (sorted[i + 1] - sorted[i])
            }
        }
    }
}
