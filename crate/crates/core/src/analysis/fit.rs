//! Relaxation fit
//! `F(t) = (I - s1) cos(a t^b) e^{-λ1 t} + s2 (e^{-λ2 t} - 1) + s1`
//! by bounded Levenberg-Marquardt with multiple starts.

use nalgebra::{DMatrix, DVector};

use crate::{par, Error, Result};

/// Which fitting function to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    /// All six parameters.
    Full,
    /// Without the second exponential (`s2 = λ2 = 0`).
    Reduced,
}

impl FitModel {
    pub fn name(&self) -> &'static str {
        match self {
            FitModel::Full => "full",
            FitModel::Reduced => "reduced",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            FitModel::Full => 6,
            FitModel::Reduced => 4,
        }
    }

    /// Expand the free parameters to `[s1, s2, a, b, λ1, λ2]`.
    fn expand(&self, x: &[f64]) -> [f64; 6] {
        match self {
            FitModel::Full => [x[0], x[1], x[2], x[3], x[4], x[5]],
            FitModel::Reduced => [x[0], 0.0, x[1], x[2], x[3], 0.0],
        }
    }

}

/// Smallest admissible `b` (the bound is the half-open `(0, 2]`).
const B_MIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub s1: f64,
    pub s2: f64,
    pub a: f64,
    pub b: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Initial value `I` (fixed, not fitted).
    pub initial: f64,
    /// Steady state `s1 - s2`.
    pub p_ss: f64,
    /// `σ = √(Σ (F - y)² / (N - p))`.
    pub rmsd: f64,
    pub n_points: usize,
    /// False when no start met the convergence test within the iteration cap.
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn eval(&self, t: f64) -> f64 {
        model_value(&[self.s1, self.s2, self.a, self.b, self.lambda1, self.lambda2], self.initial, t)
    }
}

fn model_value(q: &[f64; 6], init: f64, t: f64) -> f64 {
    let [s1, s2, a, b, l1, l2] = *q;
    let tb = if t == 0.0 { 0.0 } else { t.powf(b) };
    (init - s1) * (a * tb).cos() * (-l1 * t).exp() + s2 * ((-l2 * t).exp() - 1.0) + s1
}

/// Value and gradient with respect to `[s1, s2, a, b, λ1, λ2]`.
fn model_grad(q: &[f64; 6], init: f64, t: f64) -> (f64, [f64; 6]) {
    let [s1, s2, a, b, l1, l2] = *q;
    let (tb, lnt) = if t == 0.0 { (0.0, 0.0) } else { (t.powf(b), t.ln()) };
    let (s, c) = (a * tb).sin_cos();
    let e1 = (-l1 * t).exp();
    let e2 = (-l2 * t).exp();
    let amp = init - s1;
    let f = amp * c * e1 + s2 * (e2 - 1.0) + s1;
    let g = [
        1.0 - c * e1,
        e2 - 1.0,
        -amp * s * tb * e1,
        -amp * s * a * tb * lnt * e1,
        -amp * c * e1 * t,
        -s2 * t * e2,
    ];
    (f, g)
}

#[derive(Clone, Debug)]
struct Outcome {
    /// Free parameters in the order of [`FitModel::expand`].
    x: Vec<f64>,
    sse: f64,
    converged: bool,
    iterations: usize,
}

const MAX_ITER: usize = 2000;

/// `s1` and `s2` enter linearly:
/// `F = I cos(a t^b) e^{-λ1 t} + s1 (1 - cos(a t^b) e^{-λ1 t}) + s2 (e^{-λ2 t} - 1)`,
/// so they are eliminated by linear least squares (variable projection) and
/// the iteration runs over `θ = (a, b, λ1[, λ2])` only.
struct Projected {
    /// Linear coefficients `(s1[, s2])`.
    s: Vec<f64>,
    residual: DVector<f64>,
    /// Orthonormal basis of the span of the linear columns.
    basis: DMatrix<f64>,
}

fn n_linear(model: FitModel) -> usize {
    match model {
        FitModel::Full => 2,
        FitModel::Reduced => 1,
    }
}

fn full_params(model: FitModel, s: &[f64], theta: &[f64]) -> Vec<f64> {
    match model {
        FitModel::Full => vec![s[0], s[1], theta[0], theta[1], theta[2], theta[3]],
        FitModel::Reduced => vec![s[0], theta[0], theta[1], theta[2]],
    }
}

fn project(model: FitModel, theta: &[f64], t: &[f64], y: &[f64], init: f64) -> Projected {
    let k = n_linear(model);
    let n = t.len();
    let (a, b, l1) = (theta[0], theta[1], theta[2]);
    let l2 = if k == 2 { theta[3] } else { 0.0 };
    let mut phi = DMatrix::<f64>::zeros(n, k);
    let mut target = DVector::<f64>::zeros(n);
    for i in 0..n {
        let tb = if t[i] == 0.0 { 0.0 } else { t[i].powf(b) };
        let ce = (a * tb).cos() * (-l1 * t[i]).exp();
        phi[(i, 0)] = 1.0 - ce;
        if k == 2 {
            phi[(i, 1)] = (-l2 * t[i]).exp() - 1.0;
        }
        target[i] = y[i] - init * ce;
    }
    // rank-revealing solve: a column can vanish (λ2 → 0, or a = λ1 = 0)
    let svd = phi.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..k).filter(|&j| svd.singular_values[j] > 1e-10 * smax.max(1e-300)).collect();
    let basis = DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])]);
    let mut s = vec![0.0; k];
    for &j in &keep {
        let coef = u.column(j).dot(&target) / svd.singular_values[j];
        for (m, sm) in s.iter_mut().enumerate() {
            *sm += vt[(j, m)] * coef;
        }
    }
    let residual = &phi * DVector::from_column_slice(&s) - &target;
    Projected { s, residual, basis }
}

/// Bounds of `θ`.
fn theta_bounds(model: FitModel) -> (Vec<f64>, Vec<f64>) {
    let inf = f64::INFINITY;
    match model {
        FitModel::Full => (vec![0.0, B_MIN, 0.0, 0.0], vec![inf, 2.0, inf, inf]),
        FitModel::Reduced => (vec![0.0, B_MIN, 0.0], vec![inf, 2.0, inf]),
    }
}

fn levenberg_marquardt(model: FitModel, start: Vec<f64>, t: &[f64], y: &[f64], init: f64) -> Outcome {
    let k = n_linear(model);
    let p = model.n_params() - k;
    let (lo, hi) = theta_bounds(model);
    let clamp = |x: &mut [f64]| {
        for i in 0..p {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut theta = start;
    clamp(&mut theta);
    let mut cur = project(model, &theta, t, y, init);
    let mut sse = cur.residual.norm_squared();
    let mut mu = 1e-3;
    let done = |theta: &[f64], cur: &Projected, sse: f64, converged: bool, iterations: usize| Outcome {
        x: full_params(model, &cur.s, theta),
        sse,
        converged,
        iterations,
    };
    for iter in 0..MAX_ITER {
        // Kaufman's Jacobian: derivatives at fixed linear coefficients,
        // projected off the span of the linear columns
        let mut q = [0.0; 6];
        q[0] = cur.s[0];
        q[2..2 + p].copy_from_slice(&theta);
        if k == 2 {
            q[1] = cur.s[1];
        }
        let mut jac = DMatrix::<f64>::zeros(t.len(), p);
        for (i, &ti) in t.iter().enumerate() {
            let (_, g) = model_grad(&q, init, ti);
            for j in 0..p {
                jac[(i, j)] = g[2 + j];
            }
        }
        let overlap = cur.basis.transpose() * &jac;
        jac -= &cur.basis * overlap;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &cur.residual;
        let scale: Vec<f64> = (0..p).map(|i| jtj[(i, i)].max(1e-12)).collect();
        let mut accepted = false;
        while mu < 1e16 {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += mu * scale[i];
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                mu *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(v, d)| v + d).collect();
            clamp(&mut trial);
            let next = project(model, &trial, t, y, init);
            let trial_sse = next.residual.norm_squared();
            if trial_sse.is_finite() && trial_sse < sse {
                let step: f64 = trial.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let size: f64 = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let gain = sse - trial_sse;
                theta = trial;
                cur = next;
                sse = trial_sse;
                mu = (mu * 0.3).max(1e-15);
                accepted = true;
                if gain <= 1e-15 * sse || step <= 1e-13 * (size + 1e-13) {
                    return done(&theta, &cur, sse, true, iter + 1);
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            return done(&theta, &cur, sse, true, iter + 1);
        }
    }
    done(&theta, &cur, sse, false, MAX_ITER)
}

/// `start` with `a` replaced by the best value of a log-spaced scan (by the
/// projected residual). `a = 0` is stationary since `F` is even in `a`, so
/// gradient steps alone cannot leave that neighbourhood.
fn scan_frequency(model: FitModel, start: &[f64], t: &[f64], y: &[f64], init: f64) -> Vec<f64> {
    let mut best = (f64::INFINITY, start.to_vec());
    for a in std::iter::once(start[0]).chain((0..=48).map(|i| 10f64.powf(-2.0 + i as f64 / 12.0))) {
        let mut trial = start.to_vec();
        trial[0] = a;
        let sse = project(model, &trial, t, y, init).residual.norm_squared();
        if sse < best.0 {
            best = (sse, trial);
        }
    }
    best.1
}

/// Starting points for `θ`: `λ1 = λ2` log-spaced over `[1e-3, 1]`,
/// `b ∈ {0.5, 1}` and `a` from the zero crossings of the data about its tail.
fn starts(model: FitModel, t: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let n = y.len();
    let tail = &y[n - (n / 5).max(1)..];
    let s1 = tail.iter().sum::<f64>() / tail.len() as f64;
    let crossings = y.windows(2).filter(|w| (w[0] - s1) * (w[1] - s1) < 0.0).count();
    let span = t[n - 1] - t[0];
    let omega = if crossings > 0 { std::f64::consts::PI * crossings as f64 / span } else { 1.0 / span };
    let mut out = Vec::with_capacity(8);
    for b in [0.5, 1.0] {
        for lam in [1e-3, 1e-2, 1e-1, 1.0] {
            let a = omega * span.powf(1.0 - b);
            out.push(match model {
                FitModel::Full => vec![a, b, lam, lam],
                FitModel::Reduced => vec![a, b, lam],
            });
        }
    }
    out
}

/// Fit the full relaxation model with initial value `initial`.
pub fn fit_relaxation(t: &[f64], y: &[f64], initial: f64) -> Result<FitResult> {
    fit_relaxation_with(FitModel::Full, t, y, initial)
}

pub fn fit_relaxation_with(model: FitModel, t: &[f64], y: &[f64], initial: f64) -> Result<FitResult> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} times, {} values", t.len(), y.len())));
    }
    if t.len() < 50 {
        return Err(Error::param("series", format!("need at least 50 points, got {}", t.len())));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) || t.iter().any(|&v| v < 0.0) {
        return Err(Error::param("series", "times must be non-negative and all values finite"));
    }
    // every guess is run as given and with its frequency rescanned
    let guesses: Vec<Vec<f64>> = starts(model, t, y)
        .into_iter()
        .flat_map(|s| [scan_frequency(model, &s, t, y, initial), s])
        .collect();
    let outcomes = par::map(&guesses, |s| levenberg_marquardt(model, s.clone(), t, y, initial));
    let pick = |want_converged: bool| {
        outcomes
            .iter()
            .filter(|o| o.converged || !want_converged)
            .fold(None::<&Outcome>, |best, o| match best {
                Some(b) if b.sse <= o.sse => Some(b),
                _ => Some(o),
            })
    };
    let best = pick(true).or_else(|| pick(false)).expect("at least one start");
    let q = model.expand(&best.x);
    let dof = (t.len() - model.n_params()) as f64;
    let result = FitResult {
        model,
        s1: q[0],
        s2: q[1],
        a: q[2],
        b: q[3],
        lambda1: q[4],
        lambda2: q[5],
        initial,
        p_ss: q[0] - q[1],
        rmsd: (best.sse / dof).sqrt(),
        n_points: t.len(),
        converged: best.converged,
        iterations: best.iterations,
    };
    if !result.converged {
        log::warn!("no fit start converged; best σ = {:e}", result.rmsd);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::uniform_grid;

    const TRUE: [f64; 6] = [0.4, 0.1, 2.0, 1.0, 0.05, 0.5];

    #[test]
    fn recovers_noise_free_parameters() {
        let t = uniform_grid(60.0, 0.1);
        let y: Vec<f64> = t.iter().map(|&t| model_value(&TRUE, 1.0, t)).collect();
        let fit = fit_relaxation(&t, &y, 1.0).unwrap();
        let got = [fit.s1, fit.s2, fit.a, fit.b, fit.lambda1, fit.lambda2];
        for (g, w) in got.iter().zip(TRUE) {
            assert!(((g - w) / w).abs() < 1e-6, "{got:?}");
        }
        assert!(fit.converged);
        assert!((fit.p_ss - 0.3).abs() < 1e-6);
        assert_eq!(fit.eval(0.0), 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let q = [0.3, 0.2, 1.7, 0.8, 0.2, 0.7];
        for &t in &[0.0, 0.3, 2.5] {
            let (_, g) = model_grad(&q, 0.9, t);
            for i in 0..6 {
                let h = 1e-6;
                let mut up = q;
                let mut dn = q;
                up[i] += h;
                dn[i] -= h;
                let fd = (model_value(&up, 0.9, t) - model_value(&dn, 0.9, t)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7, "t={t} i={i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn reduced_model_is_worse_on_two_scale_data() {
        let t = uniform_grid(60.0, 0.1);
        let y: Vec<f64> = t.iter().map(|&t| model_value(&TRUE, 1.0, t)).collect();
        let full = fit_relaxation(&t, &y, 1.0).unwrap();
        let reduced = fit_relaxation_with(FitModel::Reduced, &t, &y, 1.0).unwrap();
        assert!(full.rmsd * 10.0 <= reduced.rmsd);
        assert_eq!(reduced.s2, 0.0);
    }

    #[test]
    fn short_series_is_rejected() {
        let t = uniform_grid(1.0, 0.1);
        assert!(fit_relaxation(&t, &vec![0.0; t.len()], 1.0).is_err());
    }
}
