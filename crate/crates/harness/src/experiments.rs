//! The five experiment pipelines. Each returns the complete CSV document as
//! a string; all randomness flows from the master seed through per-task
//! derived streams, so reruns are byte-identical at any thread count.

use anyhow::{anyhow, Result};

use steptune::ls_meta::{
    evaluate_generalization, grid_search, sgd_feasible_limit, GridScale, GridSpec, InnerKind,
    MetaKind, MetaObjectiveSpec,
};
use steptune::quad_meta::{
    log_meta_value_grad_stable, meta_gd, quad_optimal_eta_bracket, GradMethod, MetaGdOutcome,
};
use steptune::rng::{derive_seed, STREAM_EVAL};
use steptune::task_models::{sample_quadratic_task, QuadraticTask};

use crate::records::{Cell, CsvDoc};

/// Argmin of the log meta-objective on a linear grid over the doubled
/// minimizer bracket; ties break toward the smallest eta.
pub fn quad_grid_argmin(task: &QuadraticTask, t: usize, points: usize) -> f64 {
    let (lo, hi) = quad_optimal_eta_bracket(task);
    let (glo, ghi) = (lo / 2.0, hi * 2.0);
    let mut best = (f64::INFINITY, glo);
    for i in 0..points {
        let eta = glo + (ghi - glo) * i as f64 / (points - 1) as f64;
        let v = log_meta_value_grad_stable(task, eta, t).value;
        if v < best.0 {
            best = (v, eta);
        }
    }
    best.1
}

pub struct QuadMetaTrainParams {
    pub dim: usize,
    pub t: usize,
    pub eta0: f64,
    pub steps: usize,
    pub step_const: f64,
    pub method: GradMethod,
    pub grid_points: usize,
    pub seed: u64,
}

pub fn run_quad_meta_train(p: &QuadMetaTrainParams) -> Result<String> {
    let mut doc = CsvDoc::new(&["k", "eta", "grad", "status", "eta_star_grid", "rel_err"]);
    if p.steps == 0 {
        return Ok(doc.into_string());
    }
    let task = sample_quadratic_task(p.dim, p.seed)?;
    let outcome = meta_gd(&task, p.t, p.eta0, p.steps, p.step_const, p.method);
    let trace = outcome.trace();
    for k in 1..trace.etas.len() {
        doc.push_row(vec![
            Cell::from(k),
            Cell::from(trace.etas[k]),
            Cell::from(trace.grads[k - 1]),
            Cell::from("ok"),
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    match outcome {
        MetaGdOutcome::Aborted { step, ref trace } => {
            doc.push_row(vec![
                Cell::from(step),
                Cell::from(*trace.etas.last().unwrap()),
                Cell::Empty,
                Cell::from("overflow"),
                Cell::Empty,
                Cell::Empty,
            ]);
        }
        MetaGdOutcome::Converged(ref trace) => {
            let eta_final = *trace.etas.last().unwrap();
            let eta_star = quad_grid_argmin(&task, p.t, p.grid_points);
            let rel = (eta_final - eta_star).abs() / eta_star;
            doc.push_row(vec![
                Cell::from(p.steps),
                Cell::from(eta_final),
                Cell::Empty,
                Cell::from("summary"),
                Cell::from(eta_star),
                Cell::from(rel),
            ]);
        }
    }
    Ok(doc.into_string())
}

pub struct QuadSweepTParams {
    pub dim: usize,
    pub t_list: Vec<usize>,
    pub grid_points: usize,
    pub seed: u64,
}

pub fn run_quad_sweep_t(p: &QuadSweepTParams) -> Result<String> {
    let task = sample_quadratic_task(p.dim, p.seed)?;
    let (lo, hi) = quad_optimal_eta_bracket(&task);
    let mut doc = CsvDoc::new(&["t", "eta_star", "bracket_lo", "bracket_hi"]);
    for &t in &p.t_list {
        if t == 0 {
            return Err(anyhow!("t values must be >= 1"));
        }
        let eta_star = quad_grid_argmin(&task, t, p.grid_points);
        doc.push_row(vec![
            Cell::from(t),
            Cell::from(eta_star),
            Cell::from(lo),
            Cell::from(hi),
        ]);
    }
    Ok(doc.into_string())
}

pub struct LsCompareParams {
    pub dim: usize,
    pub n: usize,
    pub sigma_list: Vec<f64>,
    pub t: usize,
    pub m: usize,
    pub grid: GridSpec,
    pub test_tasks: usize,
    pub seed: u64,
    /// None runs the GD inner; Some(r) runs the SGD inner with r replicas
    /// and feasible-range grids.
    pub replicas: Option<usize>,
    pub c5: f64,
}

const LS_COMPARE_COLUMNS: &[&str] = &[
    "sigma",
    "n_train_tbt",
    "n1_tbv",
    "n2_tbv",
    "t",
    "m",
    "replicas",
    "grid_hi_tbt",
    "grid_hi_tbv",
    "eta_star_tbt",
    "eta_star_tbv",
    "excess_tbt",
    "excess_tbt_stderr",
    "excess_tbv",
    "excess_tbv_stderr",
    "train_rmse_tbt",
    "test_rmse_tbt",
    "train_rmse_tbv",
    "test_rmse_tbv",
    "test_tasks",
];

pub fn run_ls_compare(p: &LsCompareParams) -> Result<String> {
    // Even split for train-by-validation under the same sample budget.
    let n1 = p.n / 2;
    let n2 = p.n - n1;
    if n1 == 0 {
        return Err(anyhow!("n must be >= 2 to split for train-by-validation"));
    }
    let inner = match p.replicas {
        None => InnerKind::Gd,
        Some(r) => InnerKind::Sgd { replicas: r },
    };
    let tbt_kind = MetaKind::TbT { n: p.n };
    let tbv_kind = MetaKind::TbV { n1, n2 };
    let (grid_tbt, grid_tbv) = match p.replicas {
        None => (p.grid, p.grid),
        Some(_) => {
            // SGD argmin analysis only covers a narrow feasible range; search
            // inside it, and warn if the requested grid reaches beyond.
            let lim_tbt = sgd_feasible_limit(tbt_kind, p.dim, p.c5);
            let lim_tbv = sgd_feasible_limit(tbv_kind, p.dim, p.c5);
            if p.grid.hi > lim_tbt || p.grid.hi > lim_tbv {
                eprintln!(
                    "warning: grid upper bound {:.3e} exceeds SGD feasible limits \
                     (TbT {lim_tbt:.3e}, TbV {lim_tbv:.3e}); clamping",
                    p.grid.hi
                );
            }
            let narrow = |hi: f64| GridSpec {
                lo: hi / 1e3,
                hi,
                points: p.grid.points,
                scale: GridScale::LogLinear,
            };
            (narrow(lim_tbt), narrow(lim_tbv))
        }
    };

    let mut doc = CsvDoc::new(LS_COMPARE_COLUMNS);
    for (idx, &sigma) in p.sigma_list.iter().enumerate() {
        let spec_tbt = MetaObjectiveSpec::new(tbt_kind, inner, p.dim, sigma, p.t, p.m, p.seed);
        let spec_tbv = MetaObjectiveSpec::new(tbv_kind, inner, p.dim, sigma, p.t, p.m, p.seed);
        let (eta_tbt, _) = grid_search(&spec_tbt, &grid_tbt)?;
        let (eta_tbv, _) = grid_search(&spec_tbv, &grid_tbv)?;

        // Fresh evaluation tasks, independent of the training ensembles;
        // each objective is evaluated at its own training-set size.
        let eval_seed = derive_seed(p.seed, STREAM_EVAL, idx as u64);
        let rep_tbt =
            evaluate_generalization(eta_tbt, p.dim, p.n, sigma, p.t, p.test_tasks, inner, eval_seed)?;
        let rep_tbv =
            evaluate_generalization(eta_tbv, p.dim, n1, sigma, p.t, p.test_tasks, inner, eval_seed)?;

        doc.push_row(vec![
            Cell::from(sigma),
            Cell::from(p.n),
            Cell::from(n1),
            Cell::from(n2),
            Cell::from(p.t),
            Cell::from(p.m),
            match p.replicas {
                None => Cell::Empty,
                Some(r) => Cell::from(r),
            },
            Cell::from(grid_tbt.hi),
            Cell::from(grid_tbv.hi),
            Cell::from(eta_tbt),
            Cell::from(eta_tbv),
            Cell::from(rep_tbt.mean_excess_risk),
            Cell::from(rep_tbt.std_err),
            Cell::from(rep_tbv.mean_excess_risk),
            Cell::from(rep_tbv.std_err),
            Cell::from(rep_tbt.mean_train_rmse),
            Cell::from(rep_tbt.mean_test_rmse),
            Cell::from(rep_tbv.mean_train_rmse),
            Cell::from(rep_tbv.mean_test_rmse),
            Cell::from(p.test_tasks),
        ]);
    }
    Ok(doc.into_string())
}

pub struct LsLargeSampleParams {
    pub dim: usize,
    pub n: usize,
    pub sigma: f64,
    pub t: usize,
    pub m: usize,
    pub grid: GridSpec,
    pub test_tasks: usize,
    pub seed: u64,
}

pub fn run_ls_large_sample(p: &LsLargeSampleParams) -> Result<String> {
    let spec = MetaObjectiveSpec::new(
        MetaKind::TbT { n: p.n },
        InnerKind::Gd,
        p.dim,
        p.sigma,
        p.t,
        p.m,
        p.seed,
    );
    let (eta_star, _) = grid_search(&spec, &p.grid)?;
    let eval_seed = derive_seed(p.seed, STREAM_EVAL, 0);
    let rep = evaluate_generalization(
        eta_star,
        p.dim,
        p.n,
        p.sigma,
        p.t,
        p.test_tasks,
        InnerKind::Gd,
        eval_seed,
    )?;
    let reference = p.dim as f64 * p.sigma * p.sigma / p.n as f64;
    let warning = if p.n <= p.dim {
        "n<=d: outside the large-sample regime"
    } else {
        ""
    };
    let mut doc = CsvDoc::new(&[
        "dim",
        "n",
        "sigma",
        "t",
        "m",
        "eta_star",
        "mean_excess_risk",
        "std_err",
        "reference_d_sigma2_over_n",
        "warning",
    ]);
    doc.push_row(vec![
        Cell::from(p.dim),
        Cell::from(p.n),
        Cell::from(p.sigma),
        Cell::from(p.t),
        Cell::from(p.m),
        Cell::from(eta_star),
        Cell::from(rep.mean_excess_risk),
        Cell::from(rep.std_err),
        Cell::from(reference),
        Cell::from(warning),
    ]);
    Ok(doc.into_string())
}
