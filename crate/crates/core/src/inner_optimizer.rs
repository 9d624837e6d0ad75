//! Inner-optimization trajectories: closed-form and iterative GD on
//! quadratics, truncated GD/SGD on least squares, and the analytic
//! `B_{t,eta} w_train` oracle for untruncated runs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, norm, sym_eigen};
use crate::rng::seed_rng;
use crate::task_models::{QuadraticTask, RegressionTask, Split};

const RANK_TOL: f64 = 1e-10;

/// How the frozen direction `u` is chosen when a trajectory hits the norm
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreezePolicy {
    /// u = w_tau / ||w_tau|| at the first crossing. Keeps the frozen point
    /// in the row span of the design, which the truncated-loss analysis
    /// relies on.
    FirstCrossingDirection,
    /// u = e_1.
    FixedAxis,
}

/// Parameters of one truncated inner run.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryConfig {
    /// Unroll length t.
    pub unroll_len: usize,
    /// Step size eta.
    pub step_size: f64,
    /// Truncation threshold is `trunc_multiplier * sigma` (default 40).
    /// A task with sigma = 0 is never truncated.
    pub trunc_multiplier: f64,
    pub freeze_policy: FreezePolicy,
}

impl TrajectoryConfig {
    pub fn new(unroll_len: usize, step_size: f64) -> Self {
        TrajectoryConfig {
            unroll_len,
            step_size,
            trunc_multiplier: 40.0,
            freeze_policy: FreezePolicy::FirstCrossingDirection,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step_size < 0.0 {
            return Err(Error::InvalidParam("step_size must be >= 0".into()));
        }
        if self.trunc_multiplier <= 0.0 {
            return Err(Error::InvalidParam("trunc_multiplier must be > 0".into()));
        }
        Ok(())
    }

    fn threshold(&self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            f64::INFINITY
        } else {
            self.trunc_multiplier * sigma
        }
    }
}

/// Endpoint of one inner run.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub w_final: Vec<f64>,
    pub truncated: bool,
    /// 1-based step at which the norm threshold was first crossed.
    pub trunc_step: Option<usize>,
    /// ||w_tau|| after each step, for diagnostics only.
    pub iterate_norms: Option<Vec<f64>>,
}

/// w_t = (I - eta H)^t w0 evaluated coordinate-wise in the eigenbasis.
/// Overflow to non-finite components is allowed; it is how divergence for
/// eta > 2/L shows up.
pub fn gd_quadratic_closed_form(task: &QuadraticTask, eta: f64, t: usize) -> Vec<f64> {
    let z: Vec<f64> = task
        .eigvals
        .iter()
        .zip(&task.coeffs)
        .map(|(&lam, &c)| c * (1.0 - eta * lam).powi(t as i32))
        .collect();
    task.from_eigenbasis(&z)
}

/// Literal loop `w <- w - eta H w`, the oracle for the closed form.
pub fn gd_quadratic_iterative(task: &QuadraticTask, eta: f64, t: usize) -> Vec<f64> {
    let mut w = task.w0.clone();
    for _ in 0..t {
        let hw = task.h.matvec(&w);
        linalg::axpy(&mut w, -eta, &hw);
    }
    w
}

/// Empirical squared loss `(1/2n) sum (y_i - <w, x_i>)^2` on one split.
pub fn ls_empirical_loss(task: &RegressionTask, split: Split, w: &[f64]) -> Result<f64> {
    let (x, y) = task.split(split);
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptySplit {
            split: match split {
                Split::Train => "train",
                Split::Valid => "valid",
            },
        });
    }
    let mut s = 0.0;
    for i in 0..n {
        let r = y[i] - linalg::dot(x.row(i), w);
        s += r * r;
    }
    Ok(s / (2.0 * n as f64))
}

fn freeze(w: &mut [f64], wn: f64, threshold: f64, policy: FreezePolicy) {
    match policy {
        FreezePolicy::FirstCrossingDirection => {
            linalg::scale(w, threshold / wn);
        }
        FreezePolicy::FixedAxis => {
            w.fill(0.0);
            w[0] = threshold;
        }
    }
}

/// Truncated full-batch GD on the training split, starting from 0.
///
/// The gradient is `(1/n) Xᵀ(Xw - y)`, accumulated row by row so that a
/// single-row task reproduces one SGD step bit for bit. The norm is checked
/// after each update; at the first crossing the iterate is replaced by
/// `threshold * u` and frozen there for all later steps.
pub fn gd_ls_truncated(task: &RegressionTask, cfg: &TrajectoryConfig) -> Result<TrajectoryResult> {
    cfg.validate()?;
    let threshold = cfg.threshold(task.sigma);
    let eta = cfg.step_size;
    let (x, y) = (&task.x_train, &task.y_train);
    let (n, d) = (task.n_train, task.dim);
    let inv_n = 1.0 / n as f64;
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut norms = Vec::with_capacity(cfg.unroll_len);
    for tau in 1..=cfg.unroll_len {
        g.fill(0.0);
        for i in 0..n {
            let row = x.row(i);
            let r = linalg::dot(row, &w) - y[i];
            for (gj, &xj) in g.iter_mut().zip(row) {
                *gj += xj * r;
            }
        }
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= eta * (inv_n * gj);
        }
        let wn = norm(&w);
        if wn >= threshold {
            freeze(&mut w, wn, threshold, cfg.freeze_policy);
            norms.resize(cfg.unroll_len, threshold);
            return Ok(TrajectoryResult {
                w_final: w,
                truncated: true,
                trunc_step: Some(tau),
                iterate_norms: Some(norms),
            });
        }
        norms.push(wn);
    }
    Ok(TrajectoryResult {
        w_final: w,
        truncated: false,
        trunc_step: None,
        iterate_norms: Some(norms),
    })
}

/// Analytic endpoint of untruncated GD:
/// `B_{t,eta} w_train` with `B_{t,eta} = I - (I - eta H_train)^t` and
/// `w_train = Proj_{Xᵀ} w* + X† xi`, both assembled from the
/// eigendecomposition of H_train.
pub fn untruncated_gd_oracle(task: &RegressionTask, eta: f64, t: usize) -> Result<Vec<f64>> {
    let n = task.n_train as f64;
    let h_train = task.x_train.gram_t(1.0 / n);
    let eig = sym_eigen(&h_train)?;
    let rank = task.n_train.min(task.dim);
    let lam_top = eig.values[0].max(0.0);
    let lam_rank = eig.values[rank - 1].max(0.0);
    if lam_top == 0.0 || (lam_rank / lam_top).sqrt() < RANK_TOL {
        return Err(Error::RankDeficientDesign {
            ratio: if lam_top == 0.0 { 0.0 } else { (lam_rank / lam_top).sqrt() },
        });
    }

    // Coordinates of w_train in the eigenbasis of H_train:
    // Proj component <v_i, w*>, pseudo-inverse component <v_i, Xᵀxi>/(n lam_i).
    let g = task.x_train.matvec_t(&task.xi_train);
    let mut result = vec![0.0; task.dim];
    for i in 0..rank {
        let v = eig.vector(i);
        let lam = eig.values[i];
        let coord = linalg::dot(&v, &task.w_star) + linalg::dot(&v, &g) / (n * lam);
        let b_t = 1.0 - (1.0 - eta * lam).powi(t as i32);
        linalg::axpy(&mut result, b_t * coord, &v);
    }
    Ok(result)
}

/// Truncated single-sample SGD from 0 with uniformly sampled indices.
pub fn sgd_ls_truncated(
    task: &RegressionTask,
    cfg: &TrajectoryConfig,
    rng_seed: u64,
) -> Result<TrajectoryResult> {
    cfg.validate()?;
    let threshold = cfg.threshold(task.sigma);
    let eta = cfg.step_size;
    let n = task.n_train;
    let mut rng = seed_rng(rng_seed);
    let mut w = vec![0.0; task.dim];
    let mut norms = Vec::with_capacity(cfg.unroll_len);
    for tau in 1..=cfg.unroll_len {
        let i = rng.random_range(0..n);
        let row = task.x_train.row(i);
        let r = linalg::dot(row, &w) - task.y_train[i];
        // Same association as the row-accumulated GD gradient, so that
        // n = 1 reproduces full-batch GD bit for bit.
        for (wj, &xj) in w.iter_mut().zip(row) {
            *wj -= eta * (xj * r);
        }
        let wn = norm(&w);
        if wn >= threshold {
            freeze(&mut w, wn, threshold, cfg.freeze_policy);
            norms.resize(cfg.unroll_len, threshold);
            return Ok(TrajectoryResult {
                w_final: w,
                truncated: true,
                trunc_step: Some(tau),
                iterate_norms: Some(norms),
            });
        }
        norms.push(wn);
    }
    Ok(TrajectoryResult {
        w_final: w,
        truncated: false,
        trunc_step: None,
        iterate_norms: Some(norms),
    })
}
