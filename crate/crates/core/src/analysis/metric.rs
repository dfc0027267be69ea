use crate::quad::trapezoid;
use crate::{Error, Result};

/// Time-averaged absolute difference of two series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetric {
    pub value: f64,
    /// Averaging time actually used (`T`, or longer after the steady-state
    /// extension).
    pub t_used: f64,
    /// Whether the windowed average of the reference settled (always true
    /// without a window).
    pub settled: bool,
}

fn check_grid(t: &[f64], a: &[f64], b: &[f64]) -> Result<()> {
    if t.len() != a.len() || t.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} points, series have {} and {}",
            t.len(),
            a.len(),
            b.len()
        )));
    }
    if t.len() < 2 || t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("t_grid", "need an increasing grid starting at 0 with two or more points"));
    }
    Ok(())
}

/// Index of the last grid point not beyond `t` (with rounding slack).
fn last_index(t_grid: &[f64], t: f64) -> usize {
    let slack = 1e-9 * t.abs().max(1.0);
    t_grid.iter().rposition(|&x| x <= t + slack).unwrap_or(0)
}

fn window_mean(t: &[f64], y: &[f64], from: f64, to: f64) -> f64 {
    let (i, j) = (last_index(t, from), last_index(t, to));
    if j <= i {
        return y[j];
    }
    trapezoid(&t[i..=j], &y[i..=j]) / (t[j] - t[i])
}

/// `(1/T) ∫_0^T |a - b| dt` by the trapezoid rule.
///
/// With `steady_window = Some(w)` the averaging time is extended in steps of
/// `wT` until the mean of `a` over the last window differs from the mean over
/// the window before by less than 1% (or 1e-6 absolute), as far as the data
/// reach; `settled` reports whether that happened.
pub fn error_metric(t: &[f64], a: &[f64], b: &[f64], t_end: f64, steady_window: Option<f64>) -> Result<ErrorMetric> {
    check_grid(t, a, b)?;
    let t_last = t[t.len() - 1];
    if !(t_end > 0.0) || t_end > t_last * (1.0 + 1e-9) {
        return Err(Error::param("T", format!("averaging time {t_end} outside the grid (0, {t_last}]")));
    }
    let mut t_used = t_end;
    let mut settled = true;
    if let Some(w) = steady_window {
        if !(w > 0.0 && w <= 0.5) {
            return Err(Error::param("steady_window", format!("fraction must be in (0, 0.5], got {w}")));
        }
        let width = w * t_end;
        loop {
            let cur = window_mean(t, a, t_used - width, t_used);
            let prev = window_mean(t, a, t_used - 2.0 * width, t_used - width);
            let change = (cur - prev).abs();
            if change <= 0.01 * cur.abs().max(prev.abs()) || change < 1e-6 {
                settled = true;
                break;
            }
            settled = false;
            if t_used + width > t_last * (1.0 + 1e-9) {
                break;
            }
            t_used += width;
        }
    }
    let j = last_index(t, t_used);
    let diff: Vec<f64> = a[..=j].iter().zip(&b[..=j]).map(|(x, y)| (x - y).abs()).collect();
    let value = trapezoid(&t[..=j], &diff) / t[j];
    Ok(ErrorMetric { value, t_used: t[j], settled })
}

/// Running average `E(t) = (1/t) ∫_0^t |a - b| ds` at every grid point, with
/// `E(0) = |a(0) - b(0)|`.
pub fn error_metric_cumulative(t: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_grid(t, a, b)?;
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push((a[0] - b[0]).abs());
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * ((a[i] - b[i]).abs() + (a[i - 1] - b[i - 1]).abs());
        out.push(acc / t[i]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::uniform_grid;

    #[test]
    fn reference_values() {
        let t = uniform_grid(10.0, 0.1);
        let one = vec![1.0; t.len()];
        let zero = vec![0.0; t.len()];
        assert_eq!(error_metric(&t, &one, &one, 10.0, None).unwrap().value, 0.0);
        assert!((error_metric(&t, &one, &zero, 10.0, None).unwrap().value - 1.0).abs() < 1e-12);
        let run = error_metric_cumulative(&t, &one, &zero).unwrap();
        assert!(run.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn window_extends_until_settled() {
        let t = uniform_grid(100.0, 0.1);
        // slowly relaxing reference: needs more than T = 10 to settle
        let a: Vec<f64> = t.iter().map(|&x| 0.5 + 0.5 * (-x / 8.0).exp()).collect();
        let b = vec![0.5; t.len()];
        let m = error_metric(&t, &a, &b, 10.0, Some(0.1)).unwrap();
        assert!(m.settled && m.t_used > 10.0, "{m:?}");
        let plain = error_metric(&t, &a, &b, 10.0, None).unwrap();
        assert!(m.value < plain.value);
    }

    #[test]
    fn bad_inputs() {
        let t = uniform_grid(1.0, 0.1);
        let y = vec![0.0; t.len()];
        assert!(error_metric(&t, &y, &y[1..], 1.0, None).is_err());
        assert!(error_metric(&t, &y, &y, 2.0, None).is_err());
        assert!(error_metric(&t, &y, &y, 1.0, Some(0.9)).is_err());
    }
}
