//! DAGMA: DAG learning with the log-determinant acyclicity characterization
//! over M-matrices and a central-path scheme.
//!
//! h(A) = -log det(sI - A∘A) + d·log s is zero exactly on acyclic supports
//! and finite only while sI - A∘A stays an M-matrix (spectral radius of A∘A
//! below s). Since sI - A∘A is a Z-matrix, that domain is certified by an
//! unpivoted LU factorization with all pivots positive, which also yields
//! the log-determinant and the inverse for the gradient.
//!
//! Each central-path stage minimizes μ·(S(A) + λ1‖A‖₁) + h(A) by proximal
//! gradient steps (soft-thresholding handles the L1 term exactly) with a
//! Barzilai-Borwein step size and step-halving that rejects any iterate
//! leaving the domain or increasing the objective. S(A) is the same
//! least-squares loss as in the NOTEARS module, so the benchmark compares
//! the constraint functions, not the losses.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::WeightedAdjacency;
use crate::notears::{loss_ls_mat, SolveResult};
use crate::solver::SolveDiagnostics;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagmaConfig {
    /// Log-det domain parameter: the constraint lives on sI - A∘A.
    pub s: f64,
    /// Decreasing central-path coefficients.
    pub mu_schedule: Vec<f64>,
    /// L1 penalty weight, scaled to the variance of 0/1 columns as in the
    /// NOTEARS module.
    pub lambda1: f64,
    /// Iteration cap per central-path stage, and the cap on line-search
    /// halvings before a domain rejection becomes an error.
    pub max_inner_iter: usize,
    /// Initial step size of each stage's first iteration.
    pub lr: f64,
    /// Threshold for the final binarization (applied by the caller).
    pub omega: f64,
    /// Relative objective decrease below which a stage is considered
    /// converged.
    pub inner_tol: f64,
    /// Subtract column means before solving; see the NOTEARS module.
    pub center_data: bool,
}

impl Default for DagmaConfig {
    fn default() -> Self {
        Self {
            s: 1.0,
            mu_schedule: vec![1.0, 0.1, 0.01, 0.001],
            lambda1: 0.025,
            max_inner_iter: 12000,
            lr: 3e-4,
            omega: 0.1,
            inner_tol: 1e-9,
            center_data: true,
        }
    }
}

impl DagmaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) {
            return Err(Error::Parameter("s must be positive".into()));
        }
        if self.mu_schedule.is_empty() {
            return Err(Error::Parameter("mu schedule is empty".into()));
        }
        for w in self.mu_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Parameter(
                    "mu schedule must be strictly decreasing".into(),
                ));
            }
        }
        if !(self.mu_schedule.iter().all(|&m| m > 0.0)) {
            return Err(Error::Parameter("mu values must be positive".into()));
        }
        if !(self.lambda1 >= 0.0) {
            return Err(Error::Parameter("lambda1 must be >= 0".into()));
        }
        if self.max_inner_iter == 0 {
            return Err(Error::Parameter("max_inner_iter must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Parameter("lr must be positive".into()));
        }
        Ok(())
    }
}

/// Unpivoted LU of a Z-matrix. All pivots positive certifies a nonsingular
/// M-matrix (positive leading principal minors), in which case the
/// log-determinant and inverse are returned.
fn mmatrix_logdet_inverse(mat: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    const PIVOT_FLOOR: f64 = 1e-12;
    let d = mat.nrows();
    let mut lu = mat.clone();
    let mut logdet = 0.0;
    for k in 0..d {
        let pivot = lu[(k, k)];
        if !(pivot > PIVOT_FLOOR) || !pivot.is_finite() {
            return None;
        }
        logdet += pivot.ln();
        for i in k + 1..d {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            for j in k + 1..d {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
        }
    }
    // invert by solving L U X = I column by column
    let mut inv = DMatrix::<f64>::identity(d, d);
    for col in 0..d {
        // forward substitution with unit lower triangle
        for i in 0..d {
            let mut sum = inv[(i, col)];
            for k in 0..i {
                sum -= lu[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = sum;
        }
        // back substitution
        for i in (0..d).rev() {
            let mut sum = inv[(i, col)];
            for k in i + 1..d {
                sum -= lu[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = sum / lu[(i, i)];
        }
    }
    Some((logdet, inv))
}

/// Log-determinant acyclicity function and gradient on a raw matrix:
/// value = −log det(sI − A∘A) + d·log s, gradient = 2·(sI − A∘A)⁻ᵀ ∘ A.
pub fn h_logdet_mat(a: &DMatrix<f64>, s: f64) -> Result<(f64, DMatrix<f64>)> {
    if !(s > 0.0) {
        return Err(Error::Parameter("s must be positive".into()));
    }
    let d = a.nrows();
    let mut m = -a.component_mul(a);
    for i in 0..d {
        m[(i, i)] += s;
    }
    let (logdet, inv) = mmatrix_logdet_inverse(&m).ok_or_else(|| {
        let max_entry = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        Error::Domain(format!(
            "sI - A∘A is not an M-matrix (s = {s}, max |entry| = {max_entry:.3e})"
        ))
    })?;
    let value = -logdet + d as f64 * s.ln();
    let grad = inv.transpose().component_mul(&(a * 2.0));
    Ok((value, grad))
}

/// [`h_logdet_mat`] on a validated adjacency.
pub fn h_logdet(a: &WeightedAdjacency, s: f64) -> Result<(f64, DMatrix<f64>)> {
    h_logdet_mat(a.entries(), s)
}

fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Central-path DAGMA. Every accepted iterate stays inside the M-matrix
/// domain; a line search that cannot re-enter the domain is a numeric error.
pub fn dagma(data: &BinaryDataset, cfg: &DagmaConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if data.m() < 2 {
        return Err(Error::Parameter("need at least 2 samples".into()));
    }
    let d = data.n();
    let mut x = data.to_matrix();
    if cfg.center_data {
        crate::notears::center_columns(&mut x);
    }

    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut evaluations = 0usize;
    let mut converged = true;

    // objective pieces at the current iterate
    let eval_smooth = |a: &DMatrix<f64>, mu: f64| -> Result<(f64, f64, DMatrix<f64>)> {
        let (h, gh) = h_logdet_mat(a, cfg.s)?;
        let (loss, gl) = loss_ls_mat(a, &x);
        let smooth = mu * loss + h;
        let grad = gl * mu + gh;
        Ok((smooth, h, grad))
    };

    for (stage, &mu) in cfg.mu_schedule.iter().enumerate() {
        let l1_of = |a: &DMatrix<f64>| mu * cfg.lambda1 * a.iter().map(|v| v.abs()).sum::<f64>();
        let (mut smooth, _, mut grad) = eval_smooth(&a, mu)?;
        evaluations += 1;
        let mut objective = smooth + l1_of(&a);
        let mut step = cfg.lr;
        let mut prev_a: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
        let mut stage_converged = false;

        for _ in 0..cfg.max_inner_iter {
            // Barzilai-Borwein step from the previous iterate pair
            if let Some((pa, pg)) = &prev_a {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for idx in 0..d * d {
                    let si = a[idx] - pa[idx];
                    let yi = grad[idx] - pg[idx];
                    ss += si * si;
                    sy += si * yi;
                }
                step = if sy > 1e-18 {
                    (ss / sy).clamp(1e-10, 1e6)
                } else {
                    (step * 2.0).clamp(1e-10, 1e6)
                };
            }

            let mut t = step;
            let mut candidate = None;
            let mut domain_rejections = 0usize;
            for halving in 0..=cfg.max_inner_iter {
                let mut trial = DMatrix::<f64>::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            trial[(i, j)] =
                                soft_threshold(a[(i, j)] - t * grad[(i, j)], t * mu * cfg.lambda1);
                        }
                    }
                }
                match eval_smooth(&trial, mu) {
                    Ok((smooth_t, h_t, grad_t)) => {
                        evaluations += 1;
                        let obj_t = smooth_t + l1_of(&trial);
                        if obj_t <= objective + 1e-12 * objective.abs().max(1.0) {
                            candidate = Some((trial, smooth_t, h_t, grad_t, obj_t));
                            break;
                        }
                    }
                    Err(Error::Domain(msg)) => {
                        domain_rejections += 1;
                        if domain_rejections > cfg.max_inner_iter {
                            return Err(Error::Numeric(format!(
                                "line search rejected {domain_rejections} times: {msg}"
                            )));
                        }
                    }
                    Err(e) => return Err(e),
                }
                if halving == cfg.max_inner_iter {
                    break;
                }
                t *= 0.5;
                if t < 1e-300 {
                    break;
                }
            }

            let Some((trial, smooth_t, _h_t, grad_t, obj_t)) = candidate else {
                // no decreasing in-domain step exists at working precision
                stage_converged = true;
                break;
            };
            let move_norm = (&trial - &a).amax();
            let decrease = objective - obj_t;
            prev_a = Some((std::mem::replace(&mut a, trial), std::mem::replace(&mut grad, grad_t)));
            smooth = smooth_t;
            objective = obj_t;
            let _ = smooth;
            if decrease <= cfg.inner_tol * objective.abs().max(1.0) && move_norm < 1e-9 {
                stage_converged = true;
                break;
            }
        }
        if !stage_converged {
            log::debug!("dagma stage {stage} (mu = {mu}) hit the iteration cap");
            converged = false;
        }
    }

    let (final_h, _) = h_logdet_mat(&a, cfg.s)?;
    let weights = WeightedAdjacency::new(a, data.labels().to_vec())?;
    Ok(SolveResult {
        weights,
        diagnostics: SolveDiagnostics {
            converged,
            final_h,
            outer_iterations: cfg.mu_schedule.len(),
            evaluations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{default_labels, threshold};
    use crate::metrics::{confusion, f1};
    use crate::notears::{notears, NotearsConfig};
    use crate::simulate::{generate_ground_truth, sample_dataset, TierSpec};

    #[test]
    fn h_zero_matrix_is_zero_for_any_s() {
        for s in [0.5, 1.0, 2.0] {
            let a = DMatrix::zeros(3, 3);
            let (h, g) = h_logdet_mat(&a, s).unwrap();
            assert!(h.abs() < 1e-12, "h = {h} at s = {s}");
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn h_upper_triangular_is_zero() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, -1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let (h, _) = h_logdet_mat(&a, 1.0).unwrap();
        assert!(h.abs() < 1e-9, "h = {h}");
    }

    #[test]
    fn h_two_cycle_closed_form() {
        // det(2I - [[0,1],[1,0]]∘same) = det([[2,-1],[-1,2]]) = 3
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (h, _) = h_logdet_mat(&a, 2.0).unwrap();
        let expected = -(3.0f64).ln() + 2.0 * (2.0f64).ln();
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.2877).abs() < 1e-4);
    }

    #[test]
    fn domain_violation_is_detected() {
        // spectral radius of A∘A is exactly s = 1: the boundary is outside
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(h_logdet_mat(&a, 1.0), Err(Error::Domain(_))));
        // far outside
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]);
        assert!(matches!(h_logdet_mat(&b, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn h_positive_on_cyclic_interior_points() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let (h, _) = h_logdet_mat(&a, 1.0).unwrap();
        assert!(h > 1e-6, "h = {h}");
    }

    #[test]
    fn h_gradient_matches_finite_differences() {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let unit = |r: &mut rand_chacha::ChaCha8Rng| {
            (r.next_u64() >> 11) as f64 / 9007199254740992.0
        };
        for _ in 0..10 {
            let d = 4;
            let mut a = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        // stay well inside the s = 1 domain
                        a[(i, j)] = 0.4 * (2.0 * unit(&mut rng) - 1.0);
                    }
                }
            }
            let (_, grad) = h_logdet_mat(&a, 1.0).unwrap();
            let step = 1e-6;
            let mut fd = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    let mut ap = a.clone();
                    let mut am = a.clone();
                    ap[(i, j)] += step;
                    am[(i, j)] -= step;
                    fd[(i, j)] = (h_logdet_mat(&ap, 1.0).unwrap().0
                        - h_logdet_mat(&am, 1.0).unwrap().0)
                        / (2.0 * step);
                }
            }
            let rel = (&grad - &fd).norm() / fd.norm().max(1.0);
            assert!(rel < 1e-5, "relative gradient error {rel}");
        }
    }

    #[test]
    fn copy_pair_learns_exactly_one_edge() {
        let data = crate::notears::tests::noisy_copy_data(5000, 101);
        let cfg = DagmaConfig::default();
        let result = dagma(&data, &cfg).unwrap();
        let g = threshold(&result.weights, cfg.omega).unwrap();
        assert_eq!(g.edge_count(), 1, "weights: {:?}", result.weights.entries());
    }

    #[test]
    fn beats_or_matches_notears_on_tiered_data() {
        let mut wins = 0;
        for seed in 0..10u64 {
            let spec = TierSpec {
                tiers: vec![("a".into(), 2), ("b".into(), 2), ("c".into(), 1)],
                edge_probability: 0.8,
                allow_skip_edges: false,
                weight_range: (4.0, 6.0),
                seed: 600 + seed,
            };
            let gt = generate_ground_truth(&spec).unwrap();
            let data = sample_dataset(&gt, 10_000, 700 + seed).unwrap();
            let da_cfg = DagmaConfig::default();
            let nt_cfg = NotearsConfig::default();
            let da = dagma(&data, &da_cfg).unwrap();
            let nt = notears(&data, &nt_cfg).unwrap();
            let f_da = f1(&confusion(&threshold(&da.weights, da_cfg.omega).unwrap(), &gt.graph).unwrap());
            let f_nt = f1(&confusion(&threshold(&nt.weights, nt_cfg.omega).unwrap(), &gt.graph).unwrap());
            if f_da.value >= f_nt.value {
                wins += 1;
            }
        }
        assert!(wins >= 7, "dagma won only {wins}/10 seeds");
    }

    #[test]
    fn independent_columns_stay_sparse() {
        use rand::{RngCore, SeedableRng};
        let mut total_edges = 0usize;
        for seed in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(800 + seed);
            let cols: Vec<Vec<bool>> = (0..5)
                .map(|_| (0..10_000).map(|_| rng.next_u64() & 1 == 1).collect())
                .collect();
            let data = BinaryDataset::from_columns(default_labels(5), cols).unwrap();
            let cfg = DagmaConfig::default();
            let result = dagma(&data, &cfg).unwrap();
            total_edges += threshold(&result.weights, cfg.omega).unwrap().edge_count();
        }
        let average = total_edges as f64 / 10.0;
        assert!(average <= 1.0, "average spurious edges {average}");
    }

    #[test]
    fn output_is_deterministic() {
        let spec = TierSpec {
            tiers: vec![("a".into(), 2), ("b".into(), 2)],
            edge_probability: 0.9,
            allow_skip_edges: false,
            weight_range: (1.5, 2.5),
            seed: 31,
        };
        let gt = generate_ground_truth(&spec).unwrap();
        let data = sample_dataset(&gt, 2000, 32).unwrap();
        let cfg = DagmaConfig::default();
        let a = dagma(&data, &cfg).unwrap();
        let b = dagma(&data, &cfg).unwrap();
        assert_eq!(a.weights.entries(), b.weights.entries());
        assert_eq!(a.diagnostics.evaluations, b.diagnostics.evaluations);
    }
}
