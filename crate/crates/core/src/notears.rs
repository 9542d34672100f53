//! NOTEARS: score-based DAG learning by continuous optimization of a
//! least-squares loss under the trace-exponential acyclicity constraint
//! h(A) = tr(exp(A∘A)) - d.
//!
//! The constrained problem is solved with an augmented Lagrangian: minimize
//! S(A) + λ1‖A‖₁ + (ρ/2)h(A)² + αh(A), escalating ρ whenever h fails to
//! shrink and updating the multiplier α after each outer step. The inner
//! smooth+L1 problem is made fully smooth by splitting A = P - N with
//! P, N ≥ 0 and handed to the bounded quasi-Newton solver.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::expm::expm;
use crate::graph::WeightedAdjacency;
use crate::solver::{BoundedLbfgs, SolveDiagnostics};

/// Loss S(A) minimized under the acyclicity constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// 1/(2M)·‖X − X·A‖²_F, the convention of the original algorithm.
    LeastSquares,
    /// Bernoulli log-likelihood of the linear logits, natural for 0/1 data.
    Logistic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NotearsConfig {
    /// L1 penalty weight. The usual 0.1 convention assumes unit-variance
    /// columns; 0/1 columns have variance at most 1/4, so the default is
    /// scaled accordingly.
    pub lambda1: f64,
    pub max_outer_iter: usize,
    /// Stop once h(A) falls below this.
    pub h_tol: f64,
    /// Penalty cap; reaching it ends the outer loop.
    pub rho_max: f64,
    /// Threshold for the final binarization (applied by the caller), on
    /// the same covariance scale as the coefficients.
    pub omega: f64,
    pub loss: LossKind,
    /// Iteration cap of one inner quasi-Newton solve.
    pub inner_max_iter: usize,
    /// Subtract column means before solving. Raw 0/1 columns otherwise make
    /// the intercept-free loss spend edges on reproducing base rates
    /// instead of structure.
    pub center_data: bool,
}

impl Default for NotearsConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.025,
            max_outer_iter: 100,
            h_tol: 1e-8,
            rho_max: 1e16,
            omega: 0.1,
            loss: LossKind::LeastSquares,
            inner_max_iter: 250,
            center_data: true,
        }
    }
}

impl NotearsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) {
            return Err(Error::Parameter("lambda1 must be >= 0".into()));
        }
        if !(self.h_tol > 0.0) {
            return Err(Error::Parameter("h_tol must be > 0".into()));
        }
        if !(self.rho_max > 1.0) {
            return Err(Error::Parameter("rho_max must be > 1".into()));
        }
        if self.max_outer_iter == 0 || self.inner_max_iter == 0 {
            return Err(Error::Parameter("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a continuous structure-learning run: the weighted adjacency
/// plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub weights: WeightedAdjacency,
    pub diagnostics: SolveDiagnostics,
}

/// Trace-exponential acyclicity function and its gradient on a raw matrix.
///
/// value = tr(exp(A∘A)) − d, gradient = exp(A∘A)ᵀ ∘ 2A. Zero exactly when
/// the support of A is acyclic.
pub fn h_trexp_mat(a: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let d = a.nrows();
    let b = a.component_mul(a);
    let e = expm(&b)?;
    let value = e.trace() - d as f64;
    let grad = e.transpose().component_mul(&(a * 2.0));
    Ok((value, grad))
}

/// [`h_trexp_mat`] on a validated adjacency.
pub fn h_trexp(a: &WeightedAdjacency) -> Result<(f64, DMatrix<f64>)> {
    h_trexp_mat(a.entries())
}

/// Least-squares loss and gradient on raw matrices:
/// value = 1/(2M)·‖X − X·A‖²_F, gradient = −(1/M)·Xᵀ(X − X·A).
pub fn loss_ls_mat(a: &DMatrix<f64>, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let m = x.nrows() as f64;
    let residual = x - x * a;
    let value = residual.norm_squared() / (2.0 * m);
    let grad = x.transpose() * residual * (-1.0 / m);
    (value, grad)
}

/// [`loss_ls_mat`] on the dataset's 0/1 matrix.
pub fn loss_ls(a: &WeightedAdjacency, data: &BinaryDataset) -> Result<(f64, DMatrix<f64>)> {
    if a.d() != data.n() {
        return Err(Error::Mismatch(format!(
            "adjacency is {}x{} but dataset has {} columns",
            a.d(),
            a.d(),
            data.n()
        )));
    }
    Ok(loss_ls_mat(a.entries(), &data.to_matrix()))
}

/// Logistic loss: 1/M Σ softplus((XA)_ij) − X_ij (XA)_ij, the Bernoulli
/// negative log-likelihood of linear logits.
pub fn loss_logistic_mat(a: &DMatrix<f64>, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let m = x.nrows() as f64;
    let z = x * a;
    let mut value = 0.0;
    let mut inner = z.clone();
    for (cell, &xv) in inner.iter_mut().zip(x.iter()) {
        let zv = *cell;
        // stable softplus: max(z, 0) + ln(1 + exp(-|z|))
        value += zv.max(0.0) + (-zv.abs()).exp().ln_1p() - xv * zv;
        *cell = 1.0 / (1.0 + (-zv).exp()) - xv;
    }
    let grad = x.transpose() * inner / m;
    (value / m, grad)
}

fn eval_loss(kind: LossKind, a: &DMatrix<f64>, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    match kind {
        LossKind::LeastSquares => loss_ls_mat(a, x),
        LossKind::Logistic => loss_logistic_mat(a, x),
    }
}

/// Subtract each column's mean in place.
pub(crate) fn center_columns(x: &mut DMatrix<f64>) {
    for j in 0..x.ncols() {
        let mean = x.column(j).mean();
        for i in 0..x.nrows() {
            x[(i, j)] -= mean;
        }
    }
}

/// Augmented-Lagrangian NOTEARS. Returns the weighted matrix (the caller
/// thresholds); non-convergence is reported through the diagnostics, not an
/// error.
pub fn notears(data: &BinaryDataset, cfg: &NotearsConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if data.m() < 2 {
        return Err(Error::Parameter("need at least 2 samples".into()));
    }
    let d = data.n();
    let mut x = data.to_matrix();
    // centering only makes sense for the least-squares loss; the logistic
    // loss needs raw 0/1 targets
    if cfg.center_data && cfg.loss == LossKind::LeastSquares {
        center_columns(&mut x);
    }

    // off-diagonal cells; the diagonal stays exactly zero
    let cells: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let e = cells.len();

    let assemble = |v: &[f64]| {
        let mut a = DMatrix::zeros(d, d);
        for (k, &(i, j)) in cells.iter().enumerate() {
            a[(i, j)] = v[k] - v[e + k];
        }
        a
    };

    let inner = BoundedLbfgs {
        max_iter: cfg.inner_max_iter,
        ..BoundedLbfgs::default()
    };

    let mut v = vec![0.0f64; 2 * e];
    let mut rho = 1.0f64;
    let mut alpha = 0.0f64;
    let mut h_prev = f64::INFINITY;
    let mut h_current = f64::INFINITY;
    let mut outer_iterations = 0usize;
    let mut evaluations = 0usize;
    let mut converged = false;

    for _ in 0..cfg.max_outer_iter {
        outer_iterations += 1;
        let outcome = inner.minimize(v.clone(), |vars, grad_out| {
            let a = assemble(vars);
            // a runaway trial step can overflow the matrix exponential;
            // report an infinite objective so the line search backs off
            let (h, gh) = match h_trexp_mat(&a) {
                Ok(pair) => pair,
                Err(Error::Numeric(_)) => {
                    grad_out.fill(0.0);
                    return Ok(f64::INFINITY);
                }
                Err(e) => return Err(e),
            };
            let (loss, gl) = eval_loss(cfg.loss, &a, &x);
            let l1: f64 = vars.iter().sum();
            let value = loss + 0.5 * rho * h * h + alpha * h + cfg.lambda1 * l1;
            let scale = rho * h + alpha;
            for (k, &(i, j)) in cells.iter().enumerate() {
                let g = gl[(i, j)] + scale * gh[(i, j)];
                grad_out[k] = g + cfg.lambda1;
                grad_out[e + k] = -g + cfg.lambda1;
            }
            Ok(value)
        })?;
        evaluations += outcome.evaluations;
        v = outcome.x;

        let a = assemble(&v);
        let (h, _) = h_trexp_mat(&a)?;
        h_current = h;
        if h > h_prev / 4.0 {
            rho = (rho * 10.0).min(cfg.rho_max);
        }
        alpha += rho * h;
        h_prev = h;
        if h <= cfg.h_tol {
            converged = true;
            break;
        }
        if rho >= cfg.rho_max {
            break;
        }
    }

    let weights = WeightedAdjacency::new(assemble(&v), data.labels().to_vec())?;
    Ok(SolveResult {
        weights,
        diagnostics: SolveDiagnostics {
            converged,
            final_h: h_current,
            outer_iterations,
            evaluations,
        },
    })
}
