//! Inner-task generation: random quadratic problems in eigenbasis form and
//! random-design least-squares episodes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, norm, sym_eigen, Matrix};
use crate::rng::seed_rng;

/// Good-event constant from the random-matrix conditioning bound.
pub const GOOD_EVENT_L: f64 = 100.0;

const DEGENERATE_GAP_REL: f64 = 1e-10;
const DEGENERATE_CMIN: f64 = 1e-12;
const MAX_RESAMPLE_ATTEMPTS: usize = 64;

/// A PSD quadratic inner problem `f(w) = 1/2 wᵀ H w`, stored together with
/// its eigendecomposition so meta-gradients can be evaluated in closed form.
#[derive(Debug, Clone)]
pub struct QuadraticTask {
    pub dim: usize,
    /// The Hessian H.
    pub h: Matrix,
    /// Unit-norm starting point.
    pub w0: Vec<f64>,
    /// Eigenvalues of H, sorted descending.
    pub eigvals: Vec<f64>,
    /// Column i is the eigenvector of `eigvals[i]`.
    pub eigvecs: Matrix,
    /// c_i = <w0, u_i>.
    pub coeffs: Vec<f64>,
    /// Largest eigenvalue L.
    pub l_max: f64,
    /// Smallest eigenvalue alpha.
    pub alpha_min: f64,
    /// min(|c_1|, |c_d|).
    pub c_min: f64,
}

impl QuadraticTask {
    /// Build a task from an explicit Hessian and starting point.
    ///
    /// `w0` is normalized to unit length. Fails only if the eigensolver does
    /// not converge; hand-built degenerate instances (tied spectrum, start
    /// orthogonal to an extreme eigenvector) are permitted and reported via
    /// [`QuadraticTask::is_degenerate`] — the sampler rejects them.
    pub fn new(h: Matrix, mut w0: Vec<f64>) -> Result<Self> {
        assert_eq!(h.rows(), h.cols());
        assert_eq!(h.rows(), w0.len());
        let n = norm(&w0);
        if n == 0.0 {
            return Err(Error::InvalidParam("w0 must be nonzero".into()));
        }
        linalg::scale(&mut w0, 1.0 / n);
        let eig = sym_eigen(&h)?;
        let dim = h.rows();
        let coeffs: Vec<f64> = (0..dim).map(|i| linalg::dot(&eig.vector(i), &w0)).collect();
        let l_max = eig.values[0];
        let alpha_min = eig.values[dim - 1];
        let c_min = coeffs[0].abs().min(coeffs[dim - 1].abs());
        Ok(QuadraticTask {
            dim,
            h,
            w0,
            eigvals: eig.values,
            eigvecs: eig.vectors,
            coeffs,
            l_max,
            alpha_min,
            c_min,
        })
    }

    /// Build a diagonal task directly from a spectrum and eigenbasis
    /// coefficients (H = diag(eigvals), w0 = coeffs normalized). Handy for
    /// constructing instances with a prescribed condition number.
    pub fn from_spectrum(eigvals: &[f64], coeffs: &[f64]) -> Result<Self> {
        assert_eq!(eigvals.len(), coeffs.len());
        let d = eigvals.len();
        let mut h = Matrix::zeros(d, d);
        for i in 0..d {
            if eigvals[i] <= 0.0 {
                return Err(Error::InvalidParam("eigenvalues must be positive".into()));
            }
            h[(i, i)] = eigvals[i];
        }
        QuadraticTask::new(h, coeffs.to_vec())
    }

    /// Map eigenbasis coordinates back to the original basis.
    pub fn from_eigenbasis(&self, z: &[f64]) -> Vec<f64> {
        self.eigvecs.matvec(z)
    }

    /// True if the spectrum is tied (L = alpha) or the start is orthogonal
    /// to an extreme eigenvector; such instances fall outside the analyzed
    /// regime and are rejected by [`sample_quadratic_task`].
    pub fn is_degenerate(&self) -> bool {
        (self.dim > 1
            && (self.l_max - self.alpha_min) / self.l_max.max(f64::MIN_POSITIVE)
                < DEGENERATE_GAP_REL)
            || self.c_min < DEGENERATE_CMIN
    }
}

/// One least-squares episode: `y = X w* + xi`, optionally with a held-out
/// validation split drawn from the same ground truth.
#[derive(Debug, Clone)]
pub struct RegressionTask {
    pub dim: usize,
    pub n_train: usize,
    pub n_valid: usize,
    /// Unit-norm ground truth.
    pub w_star: Vec<f64>,
    pub x_train: Matrix,
    pub xi_train: Vec<f64>,
    pub y_train: Vec<f64>,
    pub x_valid: Matrix,
    pub xi_valid: Vec<f64>,
    pub y_valid: Vec<f64>,
    pub sigma: f64,
}

/// Which sample split an operation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
}

impl RegressionTask {
    pub fn split(&self, split: Split) -> (&Matrix, &[f64]) {
        match split {
            Split::Train => (&self.x_train, &self.y_train),
            Split::Valid => (&self.x_valid, &self.y_valid),
        }
    }
}

/// Conditioning diagnostics for one episode's training design.
#[derive(Debug, Clone)]
pub struct TaskDiagnostics {
    /// Singular values of X_train, sorted descending.
    pub singular_values: Vec<f64>,
    /// Range of the nonzero eigenvalues of H_train = XᵀX/n.
    pub h_eig_min: f64,
    pub h_eig_max: f64,
    pub noise_norm: f64,
    /// ||xi|| / sqrt(n).
    pub noise_norm_ratio: f64,
    /// Whether the conditioning event with L = 100 holds: all
    /// sigma_i(X) in [sqrt(d/L), sqrt(Ld)], nonzero eigenvalues of H_train
    /// in [1/L, L], and ||xi|| in [sqrt(d) sigma / 4, sqrt(d) sigma].
    pub good_event: bool,
}

fn sample_normal_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn sample_unit_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    loop {
        let mut v = sample_normal_vec(rng, len);
        let n = norm(&v);
        if n > 0.0 {
            linalg::scale(&mut v, 1.0 / n);
            return v;
        }
    }
}

/// Sample a quadratic task with H = XᵀX for a dim x dim standard Gaussian X
/// and a random unit-norm starting point. Degenerate draws (tied extreme
/// eigenvalues or a start orthogonal to an extreme eigenvector) are
/// resampled.
pub fn sample_quadratic_task(dim: usize, rng_seed: u64) -> Result<QuadraticTask> {
    assert!(dim >= 1, "dim must be positive");
    let mut rng = seed_rng(rng_seed);
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let x = Matrix::from_rows((0..dim).map(|_| sample_normal_vec(&mut rng, dim)).collect());
        let h = x.gram_t(1.0);
        let w0 = sample_unit_vec(&mut rng, dim);
        let task = QuadraticTask::new(h, w0)?;
        // Degenerate draws have probability zero; retry with fresh ones.
        if !task.is_degenerate() {
            return Ok(task);
        }
    }
    Err(Error::InvalidParam(
        "could not sample a non-degenerate quadratic task".into(),
    ))
}

/// Sample a least-squares episode: w* uniform on the unit sphere, Gaussian
/// design rows, N(0, sigma^2) label noise, labels assembled as X w* + xi.
pub fn sample_regression_task(
    dim: usize,
    n_train: usize,
    n_valid: usize,
    sigma: f64,
    rng_seed: u64,
) -> Result<RegressionTask> {
    assert!(dim >= 1, "dim must be positive");
    if n_train < 1 {
        return Err(Error::InvalidParam("n_train must be >= 1".into()));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidParam("sigma must be nonnegative".into()));
    }
    let mut rng = seed_rng(rng_seed);
    let w_star = sample_unit_vec(&mut rng, dim);

    let mut draw_split = |n: usize| {
        let x = Matrix::from_rows((0..n).map(|_| sample_normal_vec(&mut rng, dim)).collect());
        let xi: Vec<f64> = sample_normal_vec(&mut rng, n).into_iter().map(|z| sigma * z).collect();
        let y: Vec<f64> = (0..n).map(|i| linalg::dot(x.row(i), &w_star) + xi[i]).collect();
        (x, xi, y)
    };
    let (x_train, xi_train, y_train) = draw_split(n_train);
    let (x_valid, xi_valid, y_valid) = draw_split(n_valid);

    Ok(RegressionTask {
        dim,
        n_train,
        n_valid,
        w_star,
        x_train,
        xi_train,
        y_train,
        x_valid,
        xi_valid,
        y_valid,
        sigma,
    })
}

/// Compute singular values of the training design and check the L = 100
/// conditioning event.
pub fn diagnose_task(task: &RegressionTask) -> Result<TaskDiagnostics> {
    let x = &task.x_train;
    let (n, d) = (x.rows(), x.cols());
    // Singular values via the smaller Gram matrix.
    let gram = if n <= d { x.gram(1.0) } else { x.gram_t(1.0) };
    let eig = sym_eigen(&gram)?;
    let singular_values: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let h_eigs: Vec<f64> = singular_values.iter().map(|&s| s * s / n as f64).collect();
    let h_eig_max = h_eigs.first().copied().unwrap_or(0.0);
    let h_eig_min = h_eigs.last().copied().unwrap_or(0.0);
    let noise_norm = norm(&task.xi_train);

    let l = GOOD_EVENT_L;
    let df = d as f64;
    let sing_ok = singular_values
        .iter()
        .all(|&s| s >= (df / l).sqrt() && s <= (l * df).sqrt());
    let eig_ok = h_eigs.iter().all(|&e| e >= 1.0 / l && e <= l);
    let noise_ok =
        noise_norm >= df.sqrt() * task.sigma / 4.0 && noise_norm <= df.sqrt() * task.sigma;

    Ok(TaskDiagnostics {
        singular_values,
        h_eig_min,
        h_eig_max,
        noise_norm,
        noise_norm_ratio: noise_norm / (n as f64).sqrt(),
        good_event: sing_ok && eig_ok && noise_ok,
    })
}
