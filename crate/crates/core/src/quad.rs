//! Quadrature rules used by the rate and kernel code.

use crate::C64;

/// Composite Simpson rule on uniformly spaced samples (odd number of points).
pub fn simpson(samples: &[C64], h: f64) -> C64 {
    let n = samples.len();
    assert!(n % 2 == 1, "simpson needs an odd number of samples, got {n}");
    if n == 1 {
        return C64::new(0.0, 0.0);
    }
    let mut acc = samples[0] + samples[n - 1];
    for (i, v) in samples.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * (h / 3.0)
}

/// Number of Simpson intervals (even) covering `length` with step at most `max_step`.
pub fn simpson_intervals(length: f64, max_step: f64) -> usize {
    let n = (length / max_step).ceil().max(2.0) as usize;
    n + n % 2
}

/// Trapezoid rule for samples on a (possibly non-uniform) grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum()
}

// 15-point Kronrod nodes and weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

/// Adaptive Gauss-Kronrod integration of a complex integrand over `[a, b]`,
/// with optional interior breakpoints where the integrand is sharply peaked.
pub fn adaptive_gk<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> C64 {
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    edges.extend(inner);
    edges.push(b);

    let mut stack: Vec<(f64, f64, C64, f64)> = edges
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    let mut total = C64::new(0.0, 0.0);
    let mut evals = 0usize;
    let span = b - a;
    while let Some((lo, hi, v, err)) = stack.pop() {
        let local_tol = tol * ((hi - lo) / span).max(1e-3);
        if err <= local_tol || hi - lo < 1e-14 * span.max(1.0) || evals > 200_000 {
            total += v;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (lv, le) = gk15(&f, lo, mid);
        let (rv, re) = gk15(&f, mid, hi);
        evals += 2;
        stack.push((lo, mid, lv, le));
        stack.push((mid, hi, rv, re));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.25;
        let samples: Vec<C64> = (0..9)
            .map(|i| {
                let x = i as f64 * h;
                C64::new(x * x * x - x, 2.0 * x)
            })
            .collect();
        let got = simpson(&samples, h);
        // ∫0^2 x^3 - x = 4 - 2, ∫0^2 2x = 4
        assert!((got - C64::new(2.0, 4.0)).norm() < 1e-14);
    }

    #[test]
    fn simpson_intervals_are_even() {
        assert_eq!(simpson_intervals(1.0, 0.3), 4);
        assert_eq!(simpson_intervals(1.0, 0.25), 4);
        assert_eq!(simpson_intervals(1e-9, 1.0), 2);
    }

    #[test]
    fn adaptive_gk_resolves_narrow_lorentzian() {
        let eps = 1e-4;
        let f = |x: f64| C64::new(1.0, 0.0) / C64::new(eps, x - 0.3);
        // ∫_{-1}^{1} dx / (eps + i(x - x0))
        let exact = {
            let up = C64::new(eps, 1.0 - 0.3).ln();
            let lo = C64::new(eps, -1.0 - 0.3).ln();
            (up - lo) / C64::new(0.0, 1.0)
        };
        let got = adaptive_gk(f, -1.0, 1.0, &[0.3], 1e-11);
        assert!((got - exact).norm() < 1e-9, "{got} vs {exact}");
    }

    #[test]
    fn trapezoid_nonuniform() {
        let t = [0.0, 0.5, 2.0];
        let y = [0.0, 0.5, 2.0];
        assert!((trapezoid(&t, &y) - 2.0).abs() < 1e-15);
    }
}
