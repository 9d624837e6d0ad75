//! Meta-objectives and meta-gradients for the quadratic inner task: the
//! exploding/vanishing plain gradient, the stabilized log-gradient, a literal
//! back-propagation path with overflow diagnostics, and the meta-GD loop.

use crate::linalg::{self, logsumexp};
use crate::task_models::QuadraticTask;

/// Which formula produced a [`MetaGradReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMethod {
    /// Closed-form value/gradient of f(w_t) itself.
    PlainClosed,
    /// Stabilized closed-form gradient of (1/t) log f(w_t).
    LogStable,
    /// Literal reverse-mode sweep through the unrolled trajectory.
    LogNaiveBackprop,
}

/// Meta-objective value and gradient at one eta, with overflow diagnostics.
#[derive(Debug, Clone)]
pub struct MetaGradReport {
    pub value: f64,
    pub grad: f64,
    pub method: GradMethod,
    /// Some intermediate (or the result) left the representable range.
    /// Never set for `LogStable`.
    pub overflow_flag: bool,
    /// log10 of the largest-magnitude intermediate, naive path only.
    pub max_intermediate_log10: Option<f64>,
}

/// Value and gradient of the plain objective F(eta) = f(w_{t,eta}):
/// value = 1/2 sum c_i^2 lam_i (1 - eta lam_i)^{2t},
/// grad  = -t sum c_i^2 lam_i^2 (1 - eta lam_i)^{2t-1}.
/// Non-finite results are reported via `overflow_flag`, not raised; they are
/// the phenomenon under study.
pub fn plain_meta_value_grad(task: &QuadraticTask, eta: f64, t: usize) -> MetaGradReport {
    assert!(eta >= 0.0 && t >= 1);
    let tf = t as f64;
    let mut value = 0.0;
    let mut grad = 0.0;
    for (&lam, &c) in task.eigvals.iter().zip(&task.coeffs) {
        let r = 1.0 - eta * lam;
        let c2 = c * c;
        value += 0.5 * c2 * lam * r.powi(2 * t as i32);
        grad += -tf * c2 * lam * lam * r.powi(2 * t as i32 - 1);
    }
    MetaGradReport {
        value,
        grad,
        method: GradMethod::PlainClosed,
        overflow_flag: !value.is_finite() || !grad.is_finite(),
        max_intermediate_log10: None,
    }
}

/// Per-eigenvalue log-magnitudes a_i = ln|1 - eta lam_i| and signs.
fn log_ratios(task: &QuadraticTask, eta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut logs = Vec::with_capacity(task.dim);
    let mut signs = Vec::with_capacity(task.dim);
    for &lam in &task.eigvals {
        let r = 1.0 - eta * lam;
        logs.push(r.abs().ln());
        signs.push(if r >= 0.0 { 1.0 } else { -1.0 });
    }
    (logs, signs)
}

/// (1/t) log f(w_{t,eta}) evaluated in log-space.
fn log_value(task: &QuadraticTask, logs: &[f64], t: usize) -> f64 {
    let terms: Vec<f64> = task
        .coeffs
        .iter()
        .zip(&task.eigvals)
        .zip(logs)
        .map(|((&c, &lam), &a)| (c * c * lam).ln() + 2.0 * t as f64 * a)
        .collect();
    (logsumexp(&terms) - std::f64::consts::LN_2) / t as f64
}

/// Value and gradient of the log objective (1/t) log f(w_{t,eta}).
///
/// The gradient is the ratio
///   -2 sum c_i^2 lam_i^2 (1 - eta lam_i)^{2t-1}
///    / sum c_i^2 lam_i   (1 - eta lam_i)^{2t},
/// with numerator and denominator both divided by m^{2t},
/// m = max_i |1 - eta lam_i|, so every term stays in range for any t.
pub fn log_meta_value_grad_stable(task: &QuadraticTask, eta: f64, t: usize) -> MetaGradReport {
    assert!(eta >= 0.0 && t >= 1);
    let (logs, signs) = log_ratios(task, eta);
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut numer = 0.0;
    let mut denom = 0.0;
    for i in 0..task.dim {
        let c2 = task.coeffs[i] * task.coeffs[i];
        let lam = task.eigvals[i];
        let scaled = (logs[i] - m).exp();
        numer += c2 * lam * lam * signs[i] * scaled.powi(2 * t as i32 - 1);
        denom += c2 * lam * scaled.powi(2 * t as i32);
    }
    // denom = 0 would need every |1 - eta lam_i| to vanish at once, which a
    // non-degenerate spectrum rules out; guard against it regardless.
    let grad = if denom == 0.0 {
        0.0
    } else {
        (-2.0 * numer / denom) * (-m).exp()
    };

    MetaGradReport {
        value: log_value(task, &logs, t),
        grad,
        method: GradMethod::LogStable,
        overflow_flag: false,
        max_intermediate_log10: None,
    }
}

/// Gradient of the log objective by the literal chain rule: seed the reverse
/// sweep with 1/(t f(w_t)), back-propagate through f and through each of the
/// t unrolled steps. `overflow_flag` is set if any intermediate is non-finite
/// or the seed's magnitude leaves the double range (|log10| > 308, judged
/// from the log-space value of f so underflow of f itself is still detected).
pub fn log_meta_grad_naive_backprop(task: &QuadraticTask, eta: f64, t: usize) -> MetaGradReport {
    assert!(eta >= 0.0 && t >= 1);
    let (logs, _) = log_ratios(task, eta);
    let value = log_value(task, &logs, t);
    // log10 of the seed 1/(t f), from the stable value so it is meaningful
    // even when f itself under- or overflows in double arithmetic.
    let seed_log10 = -(t as f64).log10() - t as f64 * value / std::f64::consts::LN_10;

    let mut max_log10 = seed_log10;
    let mut overflow = seed_log10.abs() > 308.0 || !seed_log10.is_finite();
    let mut track = |v: f64| {
        if !v.is_finite() {
            overflow = true;
        } else if v != 0.0 {
            max_log10 = max_log10.max(v.abs().log10());
        }
    };

    // Forward unroll, storing every iterate.
    let mut iterates = Vec::with_capacity(t + 1);
    iterates.push(task.w0.clone());
    for tau in 0..t {
        let hw = task.h.matvec(&iterates[tau]);
        let mut w = iterates[tau].clone();
        linalg::axpy(&mut w, -eta, &hw);
        for &v in &w {
            track(v);
        }
        iterates.push(w);
    }

    let w_t = &iterates[t];
    let hw_t = task.h.matvec(w_t);
    let f = 0.5 * linalg::dot(w_t, &hw_t);
    let seed = 1.0 / (t as f64 * f);
    track(f);
    track(seed);

    // Reverse sweep: wbar_t = seed * H w_t; per step,
    // grad += <wbar_tau, -H w_{tau-1}> and wbar_{tau-1} = (I - eta H) wbar_tau.
    let mut wbar: Vec<f64> = hw_t.iter().map(|&v| seed * v).collect();
    let mut grad = 0.0;
    for tau in (1..=t).rev() {
        let hw_prev = task.h.matvec(&iterates[tau - 1]);
        grad -= linalg::dot(&wbar, &hw_prev);
        track(grad);
        let hwbar = task.h.matvec(&wbar);
        linalg::axpy(&mut wbar, -eta, &hwbar);
        for &v in &wbar {
            track(v);
        }
    }
    drop(track);

    MetaGradReport {
        value,
        grad,
        method: GradMethod::LogNaiveBackprop,
        overflow_flag: overflow || !grad.is_finite(),
        max_intermediate_log10: Some(max_log10),
    }
}

/// Evaluate the chosen gradient method at one point.
pub fn meta_grad_report(task: &QuadraticTask, eta: f64, t: usize, method: GradMethod) -> MetaGradReport {
    match method {
        GradMethod::PlainClosed => plain_meta_value_grad(task, eta, t),
        GradMethod::LogStable => log_meta_value_grad_stable(task, eta, t),
        GradMethod::LogNaiveBackprop => log_meta_grad_naive_backprop(task, eta, t),
    }
}

/// Trace of one meta-gradient-descent run.
#[derive(Debug, Clone)]
pub struct MetaGDTrace {
    /// eta_0 ... eta_K (one longer than `grads`).
    pub etas: Vec<f64>,
    /// Gradient used at each accepted step.
    pub grads: Vec<f64>,
    /// Human-readable step rule, e.g. "mu_k = 0.01/sqrt(k)".
    pub step_rule: String,
    /// Number of times a negative eta was reset to 0.
    pub resets: usize,
}

/// Outcome of [`meta_gd`]: either the full K-step trace, or the partial trace
/// up to the step whose gradient came back non-finite.
#[derive(Debug, Clone)]
pub enum MetaGdOutcome {
    Converged(MetaGDTrace),
    Aborted {
        trace: MetaGDTrace,
        /// 1-based meta-step at which the non-finite gradient appeared.
        step: usize,
    },
}

impl MetaGdOutcome {
    pub fn trace(&self) -> &MetaGDTrace {
        match self {
            MetaGdOutcome::Converged(t) => t,
            MetaGdOutcome::Aborted { trace, .. } => trace,
        }
    }

    pub fn aborted(&self) -> bool {
        matches!(self, MetaGdOutcome::Aborted { .. })
    }
}

/// Meta-gradient descent on eta with step size mu_k = c/sqrt(k), k = 1..K.
/// A negative eta is reset to 0; a non-finite gradient aborts with the trace
/// accumulated so far (this is how the naive method's failure surfaces).
pub fn meta_gd(
    task: &QuadraticTask,
    t: usize,
    eta0: f64,
    steps: usize,
    step_const: f64,
    method: GradMethod,
) -> MetaGdOutcome {
    assert!(eta0 >= 0.0 && steps >= 1 && step_const > 0.0);
    let mut trace = MetaGDTrace {
        etas: vec![eta0],
        grads: Vec::with_capacity(steps),
        step_rule: format!("mu_k = {step_const}/sqrt(k)"),
        resets: 0,
    };
    let mut eta = eta0;
    for k in 1..=steps {
        let report = meta_grad_report(task, eta, t, method);
        if !report.grad.is_finite() {
            return MetaGdOutcome::Aborted { trace, step: k };
        }
        trace.grads.push(report.grad);
        let mu = step_const / (k as f64).sqrt();
        eta -= mu * report.grad;
        if eta < 0.0 {
            eta = 0.0;
            trace.resets += 1;
        }
        trace.etas.push(eta);
    }
    MetaGdOutcome::Converged(trace)
}

/// The minimizer bracket [1/L, 1/alpha] of the log objective.
pub fn quad_optimal_eta_bracket(task: &QuadraticTask) -> (f64, f64) {
    (1.0 / task.l_max, 1.0 / task.alpha_min)
}
