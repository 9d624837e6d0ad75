//! Meta-objectives for least squares: train-by-train and train-by-validation
//! losses, their SGD counterparts, grid search over eta, and fresh-task
//! generalization evaluation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inner_optimizer::{
    gd_ls_truncated, ls_empirical_loss, sgd_ls_truncated, TrajectoryConfig, TrajectoryResult,
};
use crate::linalg;
use crate::rng::{derive_seed, STREAM_EVAL, STREAM_REPLICA, STREAM_TASK};
use crate::task_models::{sample_regression_task, RegressionTask, Split, GOOD_EVENT_L};

/// Which meta-loss a spec averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaKind {
    /// Final training loss of the inner run on n samples.
    TbT { n: usize },
    /// Held-out validation loss: train on n1 samples, score on n2.
    TbV { n1: usize, n2: usize },
}

/// Inner optimizer used by a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerKind {
    Gd,
    /// Single-sample SGD; the expectation over index sequences is estimated
    /// by averaging `replicas` independent trajectories.
    Sgd { replicas: usize },
}

/// An empirical meta-objective: the mean meta-loss over `num_tasks` tasks
/// drawn deterministically from `master_seed`.
#[derive(Debug, Clone)]
pub struct MetaObjectiveSpec {
    pub kind: MetaKind,
    pub inner: InnerKind,
    pub dim: usize,
    pub sigma: f64,
    pub unroll: usize,
    pub num_tasks: usize,
    pub master_seed: u64,
    /// Truncation threshold multiplier passed through to the inner runs.
    pub trunc_multiplier: f64,
}

impl MetaObjectiveSpec {
    pub fn new(kind: MetaKind, inner: InnerKind, dim: usize, sigma: f64, unroll: usize, num_tasks: usize, master_seed: u64) -> Self {
        MetaObjectiveSpec {
            kind,
            inner,
            dim,
            sigma,
            unroll,
            num_tasks,
            master_seed,
            trunc_multiplier: 40.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            MetaKind::TbT { n } if n < 1 => {
                return Err(Error::InvalidParam("TbT needs n >= 1".into()))
            }
            MetaKind::TbV { n1, n2 } if n1 < 1 || n2 < 1 => {
                return Err(Error::InvalidParam("TbV needs n1, n2 >= 1".into()))
            }
            _ => {}
        }
        if let InnerKind::Sgd { replicas } = self.inner {
            if replicas < 1 {
                return Err(Error::InvalidParam("SGD needs replicas >= 1".into()));
            }
        }
        if self.dim < 1 {
            return Err(Error::InvalidParam("dim must be >= 1".into()));
        }
        if self.num_tasks < 1 {
            return Err(Error::InvalidParam("num_tasks must be >= 1".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidParam("sigma must be nonnegative".into()));
        }
        Ok(())
    }

    /// (n_train, n_valid) of the sampled tasks.
    pub fn split_sizes(&self) -> (usize, usize) {
        match self.kind {
            MetaKind::TbT { n } => (n, 0),
            MetaKind::TbV { n1, n2 } => (n1, n2),
        }
    }

    fn trajectory_config(&self, eta: f64) -> TrajectoryConfig {
        let mut cfg = TrajectoryConfig::new(self.unroll, eta);
        cfg.trunc_multiplier = self.trunc_multiplier;
        cfg
    }
}

/// Search grid over eta.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: GridScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridScale {
    LogLinear,
    Linear,
}

impl Default for GridSpec {
    /// 25 log-linear points on [1e-6, 1].
    fn default() -> Self {
        GridSpec {
            lo: 1e-6,
            hi: 1.0,
            points: 25,
            scale: GridScale::LogLinear,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo < self.hi) {
            return Err(Error::InvalidParam("grid needs 0 < lo < hi".into()));
        }
        if self.points < 2 {
            return Err(Error::InvalidParam("grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let k = self.points;
        (0..k)
            .map(|i| {
                let s = i as f64 / (k - 1) as f64;
                match self.scale {
                    GridScale::LogLinear => self.lo * (self.hi / self.lo).powf(s),
                    GridScale::Linear => self.lo + (self.hi - self.lo) * s,
                }
            })
            .collect()
    }
}

/// Fresh-task performance of one eta.
#[derive(Debug, Clone)]
pub struct GeneralizationReport {
    pub eta: f64,
    /// Monte Carlo estimate of E ||w_t - w*||^2.
    pub mean_excess_risk: f64,
    pub std_err: f64,
    pub num_test_tasks: usize,
    pub mean_train_rmse: f64,
    pub mean_test_rmse: f64,
}

/// Final training loss of a truncated GD run at eta.
pub fn tbt_meta_loss(task: &RegressionTask, eta: f64, cfg: &TrajectoryConfig) -> Result<f64> {
    let mut cfg = *cfg;
    cfg.step_size = eta;
    let traj = gd_ls_truncated(task, &cfg)?;
    ls_empirical_loss(task, Split::Train, &traj.w_final)
}

/// Validation loss of a truncated GD run at eta; the trajectory sees only the
/// train split.
pub fn tbv_meta_loss(task: &RegressionTask, eta: f64, cfg: &TrajectoryConfig) -> Result<f64> {
    if task.n_valid == 0 {
        return Err(Error::MissingValidationSplit);
    }
    let mut cfg = *cfg;
    cfg.step_size = eta;
    let traj = gd_ls_truncated(task, &cfg)?;
    ls_empirical_loss(task, Split::Valid, &traj.w_final)
}

fn score_split(kind: MetaKind) -> Split {
    match kind {
        MetaKind::TbT { .. } => Split::Train,
        MetaKind::TbV { .. } => Split::Valid,
    }
}

/// Meta-loss of one task under a spec's inner optimizer: a single GD run, or
/// the mean over SGD replicas.
fn task_meta_loss(spec: &MetaObjectiveSpec, task: &RegressionTask, eta: f64, task_seed: u64) -> Result<f64> {
    let cfg = spec.trajectory_config(eta);
    let split = score_split(spec.kind);
    match spec.inner {
        InnerKind::Gd => {
            let traj = gd_ls_truncated(task, &cfg)?;
            ls_empirical_loss(task, split, &traj.w_final)
        }
        InnerKind::Sgd { replicas } => {
            // A single-sample task has exactly one index sequence, and the
            // update shares GD's arithmetic, so one replica already equals
            // the full-batch value bit for bit.
            let replicas = if task.n_train == 1 { 1 } else { replicas };
            let mut sum = 0.0;
            for r in 0..replicas {
                let seed = derive_seed(task_seed, STREAM_REPLICA, r as u64);
                let traj = sgd_ls_truncated(task, &cfg, seed)?;
                sum += ls_empirical_loss(task, split, &traj.w_final)?;
            }
            Ok(sum / replicas as f64)
        }
    }
}

/// Sample task k of a spec's ensemble.
pub fn spec_task(spec: &MetaObjectiveSpec, k: usize) -> Result<(RegressionTask, u64)> {
    let (n_train, n_valid) = spec.split_sizes();
    let seed = derive_seed(spec.master_seed, STREAM_TASK, k as u64);
    let task = sample_regression_task(spec.dim, n_train, n_valid, spec.sigma, seed)?;
    Ok((task, seed))
}

/// Mean meta-loss over the objective's task ensemble. Tasks are evaluated in
/// parallel with per-task seeds and reduced in index order, so the result is
/// independent of scheduling.
pub fn empirical_meta_objective(spec: &MetaObjectiveSpec, eta: f64) -> Result<f64> {
    spec.validate()?;
    let losses: Vec<Result<f64>> = (0..spec.num_tasks)
        .into_par_iter()
        .map(|k| {
            let (task, seed) = spec_task(spec, k)?;
            task_meta_loss(spec, &task, eta, seed)
        })
        .collect();
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / spec.num_tasks as f64)
}

/// Evaluate the objective on every grid point; returns the argmin eta (ties break
/// toward the smallest eta) and the full curve.
pub fn grid_search(spec: &MetaObjectiveSpec, grid: &GridSpec) -> Result<(f64, Vec<f64>)> {
    grid.validate()?;
    let etas = grid.values();
    let mut values = Vec::with_capacity(etas.len());
    for &eta in &etas {
        values.push(empirical_meta_objective(spec, eta)?);
    }
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    Ok((etas[best], values))
}

/// Largest eta for which the SGD argmin analysis applies: 1/(2 L^3 d) for
/// train-by-train and 1/(c5 d^2 log^2 d) for train-by-validation, with the
/// good-event constant L = 100. Exceeding it is a warning condition for
/// callers, not an error.
pub fn sgd_feasible_limit(kind: MetaKind, dim: usize, c5: f64) -> f64 {
    let d = dim as f64;
    match kind {
        MetaKind::TbT { .. } => 1.0 / (2.0 * GOOD_EVENT_L.powi(3) * d),
        MetaKind::TbV { .. } => {
            let log_d = d.ln().max(1.0);
            1.0 / (c5 * d * d * log_d * log_d)
        }
    }
}

fn rmse(task: &RegressionTask, split: Split, w: &[f64]) -> Result<f64> {
    Ok((2.0 * ls_empirical_loss(task, split, w)?).sqrt())
}

fn excess_risk(w: &[f64], w_star: &[f64]) -> f64 {
    let diff: Vec<f64> = w.iter().zip(w_star).map(|(a, b)| a - b).collect();
    linalg::dot(&diff, &diff)
}

fn run_inner(task: &RegressionTask, cfg: &TrajectoryConfig, inner: InnerKind, task_seed: u64) -> Result<Vec<TrajectoryResult>> {
    match inner {
        InnerKind::Gd => Ok(vec![gd_ls_truncated(task, cfg)?]),
        InnerKind::Sgd { replicas } => {
            let replicas = if task.n_train == 1 { 1 } else { replicas };
            (0..replicas)
                .map(|r| sgd_ls_truncated(task, cfg, derive_seed(task_seed, STREAM_REPLICA, r as u64)))
                .collect()
        }
    }
}

/// Run the inner optimizer at eta on `num_test_tasks` fresh tasks and report
/// mean and standard error of ||w_t - w*||^2 plus train/test RMSE. Each task
/// carries an independent held-out split of size n_train for the test RMSE.
pub fn evaluate_generalization(
    eta: f64,
    dim: usize,
    n_train: usize,
    sigma: f64,
    t: usize,
    num_test_tasks: usize,
    inner: InnerKind,
    seed: u64,
) -> Result<GeneralizationReport> {
    if num_test_tasks < 2 {
        return Err(Error::InvalidParam("need at least 2 test tasks".into()));
    }
    let per_task: Vec<Result<(f64, f64, f64)>> = (0..num_test_tasks)
        .into_par_iter()
        .map(|k| {
            let task_seed = derive_seed(seed, STREAM_EVAL, k as u64);
            let task = sample_regression_task(dim, n_train, n_train, sigma, task_seed)?;
            let cfg = TrajectoryConfig::new(t, eta);
            let trajs = run_inner(&task, &cfg, inner, task_seed)?;
            let mut risk = 0.0;
            let mut train = 0.0;
            let mut test = 0.0;
            for traj in &trajs {
                risk += excess_risk(&traj.w_final, &task.w_star);
                train += rmse(&task, Split::Train, &traj.w_final)?;
                test += rmse(&task, Split::Valid, &traj.w_final)?;
            }
            let r = trajs.len() as f64;
            Ok((risk / r, train / r, test / r))
        })
        .collect();

    let mut risks = Vec::with_capacity(num_test_tasks);
    let (mut train_sum, mut test_sum) = (0.0, 0.0);
    for r in per_task {
        let (risk, train, test) = r?;
        risks.push(risk);
        train_sum += train;
        test_sum += test;
    }
    let kf = num_test_tasks as f64;
    let mean = risks.iter().sum::<f64>() / kf;
    let var = risks.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (kf - 1.0);
    Ok(GeneralizationReport {
        eta,
        mean_excess_risk: mean,
        std_err: (var / kf).sqrt(),
        num_test_tasks,
        mean_train_rmse: train_sum / kf,
        mean_test_rmse: test_sum / kf,
    })
}
