//! Fitting a single neuron's weights: least squares and the iterative
//! projection rule, plus the exterior criterion.
//!
//! Design matrices hold one input vector per column (`p x n`), so the
//! projection update is `w <- w - chi / ||U_A||_F^2 * U_A * eta_A` with
//! `eta_A = U_A^T w - y_A` the training residuals at the current weights.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::neuron::{TransferKind, WeightVector};
use crate::rng::rng_for;

/// Training (A) and examining (B) design matrices with their targets.
#[derive(Debug, Clone)]
pub struct DesignPair {
    pub u_a: DMatrix<f64>,
    pub y_a: DVector<f64>,
    pub u_b: DMatrix<f64>,
    pub y_b: DVector<f64>,
}

impl DesignPair {
    pub fn new(u_a: DMatrix<f64>, y_a: DVector<f64>, u_b: DMatrix<f64>, y_b: DVector<f64>) -> Result<Self> {
        if u_a.ncols() != y_a.len() {
            return Err(Error::Dimension {
                expected: u_a.ncols(),
                found: y_a.len(),
            });
        }
        if u_b.ncols() != y_b.len() {
            return Err(Error::Dimension {
                expected: u_b.ncols(),
                found: y_b.len(),
            });
        }
        if u_a.nrows() != u_b.nrows() {
            return Err(Error::Dimension {
                expected: u_a.nrows(),
                found: u_b.nrows(),
            });
        }
        if u_a.iter().chain(u_b.iter()).chain(y_a.iter()).chain(y_b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design contains non-finite values".into()));
        }
        if u_a.ncols() < u_a.nrows() {
            log::warn!("only {} training rows for {} weights", u_a.ncols(), u_a.nrows());
        }
        Ok(Self { u_a, y_a, u_b, y_b })
    }

    /// Builds both design matrices from paired input columns.
    pub fn from_inputs(
        kind: TransferKind,
        a: (&[f64], &[f64]),
        y_a: &[f64],
        b: (&[f64], &[f64]),
        y_b: &[f64],
    ) -> Result<Self> {
        Self::new(
            design_matrix(kind, a.0, a.1),
            DVector::from_column_slice(y_a),
            design_matrix(kind, b.0, b.1),
            DVector::from_column_slice(y_b),
        )
    }

    pub fn p(&self) -> usize {
        self.u_a.nrows()
    }
}

/// `p x n` matrix whose k-th column is the input vector of example k.
pub fn design_matrix(kind: TransferKind, u1: &[f64], u2: &[f64]) -> DMatrix<f64> {
    let p = kind.arity();
    DMatrix::from_fn(p, u1.len(), |r, k| match r {
        0 => 1.0,
        1 => u1[k],
        2 => u2[k],
        _ => u1[k] * u2[k],
    })
}

/// Least-squares weights plus whether the ridge fallback was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct LsmFit {
    pub weights: WeightVector,
    pub degenerate: bool,
}

pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Minimizes the training sum of squared errors via QR of `U_A^T`; falls
/// back to ridge-regularized normal equations when rank deficient.
pub fn lsm_fit(u_a: &DMatrix<f64>, y_a: &DVector<f64>) -> Result<LsmFit> {
    let (p, n) = u_a.shape();
    if n == 0 {
        return Err(Error::InvalidArgument("least squares needs at least one example".into()));
    }
    if y_a.len() != n {
        return Err(Error::Dimension { expected: n, found: y_a.len() });
    }
    if n >= p {
        let qr = u_a.transpose().qr();
        let r = qr.r();
        let diag_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let full_rank = diag_max > 0.0 && (0..p).all(|i| r[(i, i)].abs() > 1e-10 * diag_max);
        if full_rank {
            let qty = qr.q().transpose() * y_a;
            if let Some(w) = r.solve_upper_triangular(&qty) {
                if w.iter().all(|v| v.is_finite()) {
                    return Ok(LsmFit {
                        weights: WeightVector(w.iter().copied().collect()),
                        degenerate: false,
                    });
                }
            }
        }
    }
    log::warn!("rank-deficient least-squares system; using ridge fallback");
    let gram = u_a * u_a.transpose() + DMatrix::identity(p, p) * RIDGE_LAMBDA;
    let rhs = u_a * y_a;
    let w = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.clone().lu().solve(&rhs))
        .ok_or_else(|| Error::InvalidArgument("singular least-squares system".into()))?;
    Ok(LsmFit {
        weights: WeightVector(w.iter().copied().collect()),
        degenerate: true,
    })
}

/// Sum of squared residuals of `w` over the columns of `u`.
pub fn compute_cr(w: &WeightVector, u: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    residuals(w.as_slice(), u, y).norm_squared()
}

fn residuals(w: &[f64], u: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let w = DVector::from_column_slice(w);
    u.tr_mul(&w) - y
}

/// How the examining-set error is aggregated each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RseForm {
    /// Sum of squared residuals (consistent with the selection criterion).
    #[default]
    SumOfSquares,
    /// Square of the summed residuals; kept for fidelity experiments.
    SquaredSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Learning rate, `1 < chi <= 2`.
    pub chi: f64,
    /// Noise-level goal; when set it replaces the decrement rule.
    pub epsilon: Option<f64>,
    /// Minimal decrement of the examining error between steps.
    pub delta: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub rse: RseForm,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            chi: 1.9,
            epsilon: None,
            delta: 0.0015,
            max_steps: 100,
            seed: 0,
            rse: RseForm::SumOfSquares,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 1.0 && self.chi <= 2.0) {
            return Err(Error::InvalidArgument(format!("chi = {} is not in (1, 2]", self.chi)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta = {} must be positive", self.delta)));
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0) {
                return Err(Error::InvalidArgument(format!("epsilon = {eps} must be non-negative")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStop {
    Epsilon,
    Delta,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Examining error before the first step and after each step.
    pub e_b: Vec<f64>,
    pub steps: usize,
    pub stop: FitStop,
}

impl FitTrace {
    /// Examining error of the returned weights.
    pub fn final_error(&self) -> f64 {
        *self.e_b.last().expect("trace always holds the initial error")
    }
}

/// Projection fit from a standard-Gaussian start drawn from `cfg.seed`.
pub fn projection_fit(d: &DesignPair, cfg: &FitConfig) -> Result<(WeightVector, FitTrace)> {
    let mut rng = rng_for(cfg.seed, &[0xF17]);
    let w0: Vec<f64> = (0..d.p()).map(|_| rng.sample(StandardNormal)).collect();
    projection_fit_from(d, cfg, WeightVector(w0))
}

/// Projection fit from explicit initial weights.
pub fn projection_fit_from(d: &DesignPair, cfg: &FitConfig, w0: WeightVector) -> Result<(WeightVector, FitTrace)> {
    cfg.validate()?;
    if w0.len() != d.p() {
        return Err(Error::Dimension { expected: d.p(), found: w0.len() });
    }
    let norm_sq = d.u_a.norm_squared();
    if !(norm_sq > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let gain = cfg.chi / norm_sq;
    let rse = |w: &DVector<f64>| -> f64 {
        let eta_b = d.u_b.tr_mul(w) - &d.y_b;
        match cfg.rse {
            RseForm::SumOfSquares => eta_b.norm_squared(),
            RseForm::SquaredSum => eta_b.sum().powi(2),
        }
    };

    let mut w = DVector::from_vec(w0.0);
    let mut e_b = vec![rse(&w)];
    if !e_b[0].is_finite() {
        return Err(Error::Divergence { step: 0 });
    }
    if cfg.epsilon.is_some_and(|eps| e_b[0] <= eps) {
        return Ok((to_weights(&w), FitTrace { e_b, steps: 0, stop: FitStop::Epsilon }));
    }
    for step in 1..=cfg.max_steps {
        let eta_a = d.u_a.tr_mul(&w) - &d.y_a;
        w.gemv(-gain, &d.u_a, &eta_a, 1.0);
        let err = rse(&w);
        if !err.is_finite() {
            return Err(Error::Divergence { step });
        }
        let prev = e_b[step - 1];
        e_b.push(err);
        let stop = match cfg.epsilon {
            Some(eps) => (err <= eps).then_some(FitStop::Epsilon),
            None => (prev - err < cfg.delta).then_some(FitStop::Delta),
        };
        if let Some(stop) = stop {
            return Ok((to_weights(&w), FitTrace { e_b, steps: step, stop }));
        }
    }
    Ok((
        to_weights(&w),
        FitTrace {
            e_b,
            steps: cfg.max_steps,
            stop: FitStop::MaxSteps,
        },
    ))
}

fn to_weights(w: &DVector<f64>) -> WeightVector {
    WeightVector(w.iter().copied().collect())
}

/// Weight-fitting method used for every neuron candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fitter {
    Lsm,
    Projection(FitConfig),
}

impl Default for Fitter {
    fn default() -> Self {
        Fitter::Projection(FitConfig::default())
    }
}

/// Fitted candidate: weights and the examining error they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub weights: WeightVector,
    pub examining_error: f64,
    pub steps: Option<usize>,
}

impl Fitter {
    /// Fits on A; reads B only to evaluate (and, for projection, to stop).
    pub fn fit(&self, d: &DesignPair, seed: u64) -> Result<Fitted> {
        match self {
            Fitter::Lsm => {
                let fit = lsm_fit(&d.u_a, &d.y_a)?;
                let examining_error = compute_cr(&fit.weights, &d.u_b, &d.y_b);
                Ok(Fitted {
                    weights: fit.weights,
                    examining_error,
                    steps: None,
                })
            }
            Fitter::Projection(cfg) => {
                let cfg = FitConfig { seed, ..*cfg };
                let (weights, trace) = projection_fit(d, &cfg)?;
                // CR = E_B(k*) under the sum-of-squares form; recomputed so the
                // squared-sum option still selects on squared error.
                let examining_error = match cfg.rse {
                    RseForm::SumOfSquares => trace.final_error(),
                    RseForm::SquaredSum => compute_cr(&weights, &d.u_b, &d.y_b),
                };
                Ok(Fitted {
                    weights,
                    examining_error,
                    steps: Some(trace.steps),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Gaussian elimination with partial pivoting on the normal equations.
    fn normal_equations_oracle(u: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
        let p = u.nrows();
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = (0..u.ncols()).map(|k| u[(i, k)] * u[(j, k)]).sum();
            }
            a[i][p] = (0..u.ncols()).map(|k| u[(i, k)] * y[k]).sum();
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&x, &z| a[x][c].abs().total_cmp(&a[z][c].abs())).unwrap();
            a.swap(c, piv);
            for r in c + 1..p {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        let mut w = vec![0.0; p];
        for r in (0..p).rev() {
            let s: f64 = (r + 1..p).map(|k| a[r][k] * w[k]).sum();
            w[r] = (a[r][p] - s) / a[r][r];
        }
        w
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let u1: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let u2: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y = DVector::from_fn(n, |_, _| rng.random());
        (design_matrix(TransferKind::Bilinear, &u1, &u2), y)
    }

    #[test]
    fn exact_system_interpolates() {
        let u = design_matrix(TransferKind::Bilinear, &[0.0, 1.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![0.3, 0.9, -0.2, 0.5]);
        let fit = lsm_fit(&u, &y).unwrap();
        assert!(!fit.degenerate);
        assert!(compute_cr(&fit.weights, &u, &y) < 1e-20);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let (u, y) = random_design(&mut rng, 50);
            let fit = lsm_fit(&u, &y).unwrap();
            let oracle = normal_equations_oracle(&u, &y);
            for (a, b) in fit.weights.as_slice().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
            let w = DVector::from_column_slice(fit.weights.as_slice());
            let defect = &u * (u.transpose() * &w - &y);
            assert!(defect.norm() < 1e-8 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (u, _) = random_design(&mut rng, 30);
        let y = DVector::from_element(30, 0.7);
        let w = lsm_fit(&u, &y).unwrap().weights;
        let expected = [0.7, 0.0, 0.0, 0.0];
        for (a, b) in w.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_uses_ridge() {
        // u2 == u1 makes the columns dependent.
        let x = [0.1, 0.4, 0.5, 0.9, 0.3];
        let u = design_matrix(TransferKind::Bilinear, &x, &x);
        let y = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 1.0]);
        let fit = lsm_fit(&u, &y).unwrap();
        assert!(fit.degenerate);
        assert!(fit.weights.is_finite());
        let underdetermined = design_matrix(TransferKind::Bilinear, &[0.1, 0.2], &[0.3, 0.4]);
        assert!(lsm_fit(&underdetermined, &DVector::from_vec(vec![1.0, 0.0])).unwrap().degenerate);
    }

    #[test]
    fn criterion_values() {
        let u = design_matrix(TransferKind::Bilinear, &[0.0; 7], &[0.0; 7]);
        let ones = DVector::from_element(7, 1.0);
        assert_eq!(compute_cr(&WeightVector(vec![0.0; 4]), &u, &ones), 7.0);
        assert_eq!(compute_cr(&WeightVector(vec![1.0, 0.0, 0.0, 0.0]), &u, &ones), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (u, y) = random_design(&mut rng, 40);
        let w = WeightVector(vec![0.3, -0.2, 0.9, 0.1]);
        let mut naive = 0.0;
        for k in 0..40 {
            let g = w.0[0] + w.0[1] * u[(1, k)] + w.0[2] * u[(2, k)] + w.0[3] * u[(1, k)] * u[(2, k)];
            naive += (g - y[k]) * (g - y[k]);
        }
        assert!((compute_cr(&w, &u, &y) - naive).abs() < 1e-12);
    }

    #[test]
    fn exact_start_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (u, _) = random_design(&mut rng, 20);
        let w = WeightVector(vec![0.5, -0.1, 0.2, 0.3]);
        let y = u.tr_mul(&DVector::from_column_slice(w.as_slice()));
        let d = DesignPair::new(u.clone(), y.clone(), u, y).unwrap();
        let (out, trace) = projection_fit_from(&d, &FitConfig::default(), w.clone()).unwrap();
        assert_eq!(out, w);
        assert!(trace.steps <= 1);
    }

    #[test]
    fn single_example_projects_exactly() {
        // chi = 1 is outside the configurable range, so apply the step by hand.
        let u = design_matrix(TransferKind::Bilinear, &[0.7], &[0.2]);
        let y = DVector::from_vec(vec![0.9]);
        let w0 = DVector::from_vec(vec![0.1, -0.4, 0.3, 2.0]);
        let eta = u.tr_mul(&w0) - &y;
        let w1 = &w0 - &u * &eta * (1.0 / u.norm_squared());
        assert!((u.tr_mul(&w1) - &y).norm() < 1e-12);

        // chi = 2 reflects: the residual flips sign with equal magnitude.
        let d = DesignPair::new(u.clone(), y.clone(), u.clone(), y.clone()).unwrap();
        let cfg = FitConfig { chi: 2.0, max_steps: 1, ..Default::default() };
        let (w, _) = projection_fit_from(&d, &cfg, WeightVector(w0.iter().copied().collect())).unwrap();
        let after = u.tr_mul(&DVector::from_column_slice(w.as_slice())) - &y;
        assert!((after[0] + eta[0]).abs() < 1e-12);
    }

    #[test]
    fn trace_shape_and_stop_reasons() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (ua, ya) = random_design(&mut rng, 30);
        let (ub, yb) = random_design(&mut rng, 30);
        let d = DesignPair::new(ua, ya, ub, yb).unwrap();
        let cfg = FitConfig { max_steps: 3, delta: 1e-300, ..Default::default() };
        let (_, t) = projection_fit(&d, &cfg).unwrap();
        assert_eq!(t.e_b.len(), t.steps + 1);
        assert!(t.steps <= 3);
        let cfg = FitConfig { epsilon: Some(1e9), ..Default::default() };
        let (_, t) = projection_fit(&d, &cfg).unwrap();
        assert_eq!((t.steps, t.stop), (0, FitStop::Epsilon));
    }

    #[test]
    fn config_validation() {
        for chi in [1.0, 2.5, f64::NAN] {
            assert!(FitConfig { chi, ..Default::default() }.validate().is_err());
        }
        assert!(FitConfig { delta: 0.0, ..Default::default() }.validate().is_err());
        assert!(FitConfig { max_steps: 0, ..Default::default() }.validate().is_err());
        assert!(FitConfig { epsilon: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(FitConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_norm_is_rejected() {
        let u = DMatrix::zeros(4, 3);
        let y = DVector::zeros(3);
        let d = DesignPair::new(u.clone(), y.clone(), u, y).unwrap();
        assert!(matches!(projection_fit(&d, &FitConfig::default()), Err(Error::ZeroNorm)));
    }

    #[test]
    fn squared_sum_form() {
        let u = design_matrix(TransferKind::Bilinear, &[0.0, 0.0], &[0.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let d = DesignPair::new(u.clone(), y.clone(), u, y).unwrap();
        let cfg = FitConfig { rse: RseForm::SquaredSum, max_steps: 1, ..Default::default() };
        let (_, t) = projection_fit_from(&d, &cfg, WeightVector(vec![0.0; 4])).unwrap();
        // Canceling residuals: the literal form reports zero error.
        assert_eq!(t.e_b[0], 0.0);
    }
}
