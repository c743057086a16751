//! Limited-memory quasi-Newton minimization with a strong-Wolfe line
//! search, plus the pulse-problem wrappers (GRAPE per-step controls or
//! GROUP Fourier coefficients) and seeded multi-start.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groupbasis::{expand, project_gradient, GroupParametrization, ResponseMatrix};
use crate::objective::EnsembleProblem;
use crate::propagation::PulseShape;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Sufficient-decrease / curvature parameters of the line search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchParams {
    pub sufficient_decrease: f64,
    pub curvature: f64,
    /// Cap on cost/gradient evaluations within one line search.
    pub max_evaluations: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams { sufficient_decrease: 1e-4, curvature: 0.9, max_evaluations: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Stop when the gradient infinity norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the relative cost change falls below this.
    pub cost_tolerance: f64,
    /// Quasi-Newton history length.
    pub memory: usize,
    pub line_search: LineSearchParams,
    /// Amplitude penalty lambda sum(u^2) dt added to the cost (0 = off).
    pub penalty_weight: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-7,
            cost_tolerance: 1e-10,
            memory: 20,
            line_search: LineSearchParams::default(),
            penalty_weight: 0.0,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                field: "max_iterations",
                message: "must be at least 1".into(),
            });
        }
        for (field, v) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("cost_tolerance", self.cost_tolerance),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    message: format!("must be > 0, got {v}"),
                });
            }
        }
        if self.memory == 0 {
            return Err(Error::InvalidParameter {
                field: "memory",
                message: "must be at least 1".into(),
            });
        }
        let ls = &self.line_search;
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < ls.curvature && ls.curvature < 1.0)
        {
            return Err(Error::InvalidParameter {
                field: "line_search",
                message: format!(
                    "need 0 < sufficient_decrease < curvature < 1, got {} and {}",
                    ls.sufficient_decrease, ls.curvature
                ),
            });
        }
        if !(self.penalty_weight >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "penalty_weight",
                message: format!("must be >= 0, got {}", self.penalty_weight),
            });
        }
        Ok(())
    }
}

/// Why a minimization stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    CostTolerance,
    MaxIterations,
    /// The line search could not make progress; the best iterate so far
    /// is returned.
    LineSearchFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::CostTolerance => "cost_tolerance",
            Termination::MaxIterations => "max_iterations",
            Termination::LineSearchFailure => "line_search_failure",
        }
    }
}

/// One accepted iteration: cost after the step, gradient infinity norm,
/// and the accepted step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub cost: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

/// Output of [`minimize`]; the pulse-level wrapper enriches this into an
/// [`OptimizationRun`].
#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub final_cost: f64,
    /// Record 0 is the starting point; one record per accepted step after.
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub n_evaluations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS descent with a strong-Wolfe line search.
///
/// `f(x, grad_out) -> cost` must fill `grad_out` with the gradient at
/// `x`. Non-finite costs or gradients abort with diagnostics; a stalled
/// line search returns the best iterate, flagged.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &OptimizerOptions) -> Result<MinimizeResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    opts.validate()?;
    let n = x0.len();
    let mut n_evals = 0usize;

    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut cost = f(&x, &mut g);
    n_evals += 1;
    check_finite(cost, &g, 0)?;

    let mut history = vec![IterationRecord { cost, grad_norm: inf_norm(&g), step_size: 0.0 }];

    if inf_norm(&g) <= opts.gradient_tolerance {
        return Ok(MinimizeResult {
            x,
            final_cost: cost,
            history,
            termination: Termination::GradientTolerance,
            n_evaluations: n_evals,
        });
    }

    // History ring for the two-loop recursion.
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    let mut termination = Termination::MaxIterations;

    for iter in 0..opts.max_iterations {
        // Two-loop recursion for p = -H g.
        let mut p = g.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            alphas[i] = rho_hist[i] * dot(&s_hist[i], &p);
            for (pj, yj) in p.iter_mut().zip(&y_hist[i]) {
                *pj -= alphas[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            for pj in p.iter_mut() {
                *pj *= gamma;
            }
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &p);
            for (pj, sj) in p.iter_mut().zip(&s_hist[i]) {
                *pj += (alphas[i] - beta) * sj;
            }
        }
        for pj in p.iter_mut() {
            *pj = -*pj;
        }

        let mut dphi0 = dot(&g, &p);
        if dphi0 >= 0.0 {
            // Not a descent direction (stale curvature); restart from
            // steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            p.clone_from(&g);
            for pj in p.iter_mut() {
                *pj = -*pj;
            }
            dphi0 = dot(&g, &p);
        }

        // Initial trial step: natural quasi-Newton step once curvature
        // information exists, otherwise the classical 2 f / |g.p| guess.
        let alpha0 = if k > 0 {
            1.0
        } else {
            (2.0 * cost.abs().max(1e-12) / dphi0.abs()).clamp(1e-12, 1e12)
        };

        let ls = line_search(
            &mut f,
            &x,
            &p,
            cost,
            dphi0,
            &g,
            alpha0,
            &opts.line_search,
            &mut n_evals,
            iter,
        )?;
        let (alpha, new_cost, new_x, new_g) = match ls {
            Some(t) => t,
            None => {
                termination = Termination::LineSearchFailure;
                break;
            }
        };

        // Curvature pair.
        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }

        let prev_cost = cost;
        x = new_x;
        g = new_g;
        cost = new_cost;
        history.push(IterationRecord { cost, grad_norm: inf_norm(&g), step_size: alpha });

        if inf_norm(&g) <= opts.gradient_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }
        if (prev_cost - cost).abs() <= opts.cost_tolerance * prev_cost.abs().max(1e-16) {
            termination = Termination::CostTolerance;
            break;
        }
    }

    Ok(MinimizeResult { x, final_cost: cost, history, termination, n_evaluations: n_evals })
}

fn check_finite(cost: f64, grad: &[f64], iteration: usize) -> Result<()> {
    if !cost.is_finite() {
        return Err(Error::NonFinite {
            what: "cost",
            iteration,
            detail: format!("cost = {cost}"),
        });
    }
    if let Some(idx) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            iteration,
            detail: format!("gradient[{idx}] = {}", grad[idx]),
        });
    }
    Ok(())
}

type LineSearchHit = (f64, f64, Vec<f64>, Vec<f64>);

/// Strong-Wolfe line search (bracket + zoom with bisection fallback).
/// Returns `(alpha, cost, x, grad)` or `None` when no acceptable step
/// was found within the evaluation budget.
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    p: &[f64],
    phi0: f64,
    dphi0: f64,
    g0: &[f64],
    alpha0: f64,
    params: &LineSearchParams,
    n_evals: &mut usize,
    iteration: usize,
) -> Result<Option<LineSearchHit>>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let c1 = params.sufficient_decrease;
    let c2 = params.curvature;

    let mut probe = |alpha: f64, n_evals: &mut usize| -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let xt: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect();
        let mut gt = vec![0.0; n];
        let cost = f(&xt, &mut gt);
        *n_evals += 1;
        check_finite(cost, &gt, iteration)?;
        let slope = dot(&gt, p);
        Ok((cost, slope, xt, gt))
    };

    let _ = g0;
    let mut alpha_prev = 0.0;
    let mut phi_prev = phi0;
    let mut dphi_prev = dphi0;
    let mut alpha = alpha0.max(f64::MIN_POSITIVE);
    let mut budget = params.max_evaluations;

    // Bracketing phase.
    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None;
    let mut hit: Option<LineSearchHit> = None;
    for first in (0..).map(|i| i == 0) {
        if budget == 0 {
            break;
        }
        budget -= 1;
        let (phi, dphi, xt, gt) = probe(alpha, n_evals)?;
        if phi > phi0 + c1 * alpha * dphi0 || (!first && phi >= phi_prev) {
            bracket = Some((alpha_prev, phi_prev, dphi_prev, alpha, phi, dphi));
            break;
        }
        if dphi.abs() <= -c2 * dphi0 {
            hit = Some((alpha, phi, xt, gt));
            break;
        }
        if dphi >= 0.0 {
            bracket = Some((alpha, phi, dphi, alpha_prev, phi_prev, dphi_prev));
            break;
        }
        alpha_prev = alpha;
        phi_prev = phi;
        dphi_prev = dphi;
        alpha *= 4.0;
        if alpha > 1e18 {
            break;
        }
    }
    if let Some(hit) = hit {
        return Ok(Some(hit));
    }

    // Zoom phase.
    let Some((mut lo, mut phi_lo, mut dphi_lo, mut hi, mut phi_hi, mut _dphi_hi)) = bracket else {
        return Ok(None);
    };
    while budget > 0 {
        budget -= 1;
        // Cubic-style interpolation with a guarded bisection fallback.
        let mid = {
            let d1 = dphi_lo + (phi_lo - phi_hi) * 3.0 / (hi - lo);
            let disc = d1 * d1 - dphi_lo * (phi_lo - phi_hi) * 9.0 / ((hi - lo) * (hi - lo));
            if disc > 0.0 && (hi - lo).abs() > 1e-30 {
                let step = (hi - lo) * dphi_lo / (dphi_lo - d1 - disc.sqrt() * (hi - lo).signum());
                let cand = lo + step;
                let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
                let margin = 0.1 * (b - a);
                if cand.is_finite() && cand > a + margin && cand < b - margin {
                    cand
                } else {
                    0.5 * (lo + hi)
                }
            } else {
                0.5 * (lo + hi)
            }
        };
        let (phi, dphi, xt, gt) = probe(mid, n_evals)?;
        if phi > phi0 + c1 * mid * dphi0 || phi >= phi_lo {
            hi = mid;
            phi_hi = phi;
            _dphi_hi = dphi;
        } else {
            if dphi.abs() <= -c2 * dphi0 {
                return Ok(Some((mid, phi, xt, gt)));
            }
            if dphi * (hi - lo) >= 0.0 {
                hi = lo;
                phi_hi = phi_lo;
                _dphi_hi = dphi_lo;
            }
            lo = mid;
            phi_lo = phi;
            dphi_lo = dphi;
        }
        if (hi - lo).abs() <= 1e-14 * lo.abs().max(1.0) {
            break;
        }
    }
    Ok(None)
}

/// Pulse parametrization being optimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Grape,
    Group { basis_size: usize },
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunMode::Grape => write!(f, "grape"),
            RunMode::Group { basis_size } => write!(f, "group_m{basis_size}"),
        }
    }
}

/// Seeded random starting vector. GRAPE: 2N uniform controls in
/// [-scale, scale] rad/s, x channel then y channel. GROUP: 2M uniform
/// coefficients in [-scale/sqrt(M), scale/sqrt(M)], same layout.
pub fn random_initial(mode: RunMode, scale: f64, n_steps: usize, seed: u64) -> Result<Vec<f64>> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter {
            field: "scale",
            message: format!("must be finite and >= 0, got {scale}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (len, amp) = match mode {
        RunMode::Grape => (2 * n_steps, scale),
        RunMode::Group { basis_size } => (2 * basis_size, scale / (basis_size as f64).sqrt()),
    };
    if amp == 0.0 {
        return Ok(vec![0.0; len]);
    }
    Ok((0..len).map(|_| rng.random_range(-amp..amp)).collect())
}

/// One completed optimization.
#[derive(Clone, Debug)]
pub struct OptimizationRun {
    pub seed: u64,
    pub mode: RunMode,
    /// Flat starting vector (controls or coefficients).
    pub initial: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub final_cost: f64,
    /// 1 - final_cost; the expected fidelity when no penalty is active.
    pub final_fidelity: f64,
    pub termination: Termination,
    pub pulse: PulseShape,
    /// Final coefficients for GROUP runs.
    pub coefficients: Option<Vec<[f64; 2]>>,
    pub n_evaluations: usize,
}

/// An ensemble problem plus the parametrization to optimize it in.
pub struct PulseOptimization<'a> {
    pub problem: &'a EnsembleProblem,
    pub mode: RunMode,
    /// Required for GROUP mode.
    pub response: Option<&'a ResponseMatrix>,
    /// Amplitude scale of random starts, rad/s.
    pub initial_scale: f64,
}

/// Internal optimizer coordinate unit (rad/s). Controls are measured in
/// multiples of this during minimization so that gradient norms and the
/// stopping tolerances live on an O(1) scale; raw rad/s gradients for
/// this problem are ~1e-8 per unit and would satisfy any absolute
/// tolerance immediately.
const CONTROL_UNIT: f64 = 2.0 * std::f64::consts::PI * 1.0e4;

/// Reassemble a flat [x..., y...] vector into per-step pairs, scaling
/// by `unit`.
fn unflatten_scaled(x: &[f64], unit: f64) -> Vec<[f64; 2]> {
    let n = x.len() / 2;
    (0..n).map(|j| [unit * x[j], unit * x[n + j]]).collect()
}

impl<'a> PulseOptimization<'a> {
    fn response_for_group(&self) -> Result<&'a ResponseMatrix> {
        match (self.mode, self.response) {
            (RunMode::Group { basis_size }, Some(r)) => {
                if r.basis_size() != basis_size || r.n_steps() != self.problem.n_steps() {
                    return Err(Error::DimensionMismatch {
                        context: "GROUP response matrix vs problem",
                        left: r.basis_size(),
                        right: basis_size,
                    });
                }
                Ok(r)
            }
            (RunMode::Group { .. }, None) => Err(Error::InvalidParameter {
                field: "response",
                message: "GROUP mode requires a response matrix".into(),
            }),
            (RunMode::Grape, _) => Err(Error::InvalidParameter {
                field: "mode",
                message: "response_for_group called in GRAPE mode".into(),
            }),
        }
    }

    /// Cost+gradient in the flat optimizer coordinates (controls or
    /// coefficients in units of [`CONTROL_UNIT`]), including the
    /// optional amplitude penalty.
    fn evaluate(&self, x: &[f64], grad_out: &mut [f64], penalty: f64) -> Result<f64> {
        let dt = self.problem.dt();
        match self.mode {
            RunMode::Grape => {
                let mut values = unflatten_scaled(x, CONTROL_UNIT);
                let report = self.problem.cost_gradient(&values)?;
                let mut cost = report.cost;
                let n = values.len();
                for j in 0..n {
                    grad_out[j] = report.gradient[j][0] * CONTROL_UNIT;
                    grad_out[n + j] = report.gradient[j][1] * CONTROL_UNIT;
                }
                if penalty > 0.0 {
                    for (j, v) in values.iter_mut().enumerate() {
                        cost += penalty * (v[0] * v[0] + v[1] * v[1]) * dt;
                        grad_out[j] += 2.0 * penalty * v[0] * dt * CONTROL_UNIT;
                        grad_out[n + j] += 2.0 * penalty * v[1] * dt * CONTROL_UNIT;
                    }
                }
                Ok(cost)
            }
            RunMode::Group { .. } => {
                let response = self.response_for_group()?;
                let coeffs = unflatten_scaled(x, CONTROL_UNIT);
                let param =
                    GroupParametrization::new(coeffs, self.problem.n_steps(), dt)?;
                let pulse = expand(&param, response)?;
                let report = self.problem.cost_gradient(pulse.values())?;
                let mut cost = report.cost;
                let mut grad_u = report.gradient;
                if penalty > 0.0 {
                    for (v, g) in pulse.values().iter().zip(grad_u.iter_mut()) {
                        cost += penalty * (v[0] * v[0] + v[1] * v[1]) * dt;
                        g[0] += 2.0 * penalty * v[0] * dt;
                        g[1] += 2.0 * penalty * v[1] * dt;
                    }
                }
                let grad_c = project_gradient(&grad_u, response)?;
                let m = grad_c.len();
                for (i, g) in grad_c.iter().enumerate() {
                    grad_out[i] = g[0] * CONTROL_UNIT;
                    grad_out[m + i] = g[1] * CONTROL_UNIT;
                }
                Ok(cost)
            }
        }
    }

    /// One seeded optimization from a random start.
    pub fn run_single(&self, seed: u64, opts: &OptimizerOptions) -> Result<OptimizationRun> {
        opts.validate()?;
        if let RunMode::Group { .. } = self.mode {
            self.response_for_group()?;
        }
        let raw0 = random_initial(self.mode, self.initial_scale, self.problem.n_steps(), seed)?;
        let x0: Vec<f64> = raw0.iter().map(|v| v / CONTROL_UNIT).collect();

        let mut inner_error: Option<Error> = None;
        let result = minimize(
            |x, grad| match self.evaluate(x, grad, opts.penalty_weight) {
                Ok(cost) => cost,
                Err(e) => {
                    // Surface the first structural error as non-finite
                    // cost so the optimizer aborts promptly.
                    if inner_error.is_none() {
                        inner_error = Some(e);
                    }
                    f64::NAN
                }
            },
            &x0,
            opts,
        );
        if let Some(e) = inner_error {
            return Err(e);
        }
        let result = result?;

        let (pulse, coefficients) = match self.mode {
            RunMode::Grape => (
                PulseShape::new(self.problem.dt(), unflatten_scaled(&result.x, CONTROL_UNIT))?,
                None,
            ),
            RunMode::Group { .. } => {
                let response = self.response_for_group()?;
                let coeffs = unflatten_scaled(&result.x, CONTROL_UNIT);
                let param = GroupParametrization::new(
                    coeffs.clone(),
                    self.problem.n_steps(),
                    self.problem.dt(),
                )?;
                (expand(&param, response)?, Some(coeffs))
            }
        };
        Ok(OptimizationRun {
            seed,
            mode: self.mode,
            initial: raw0,
            final_cost: result.final_cost,
            final_fidelity: 1.0 - result.final_cost,
            history: result.history,
            termination: result.termination,
            pulse,
            coefficients,
            n_evaluations: result.n_evaluations,
        })
    }

    /// Independent runs from seeds `base_seed + i`, sorted by final
    /// fidelity (descending, ties by seed). Individual failures are
    /// collected, not fatal.
    pub fn multistart(
        &self,
        n_starts: usize,
        base_seed: u64,
        opts: &OptimizerOptions,
    ) -> Result<MultistartOutcome> {
        if n_starts == 0 {
            return Err(Error::InvalidParameter {
                field: "n_starts",
                message: "need at least one start".into(),
            });
        }
        opts.validate()?;
        let outcomes: Vec<(u64, Result<OptimizationRun>)> = (0..n_starts)
            .into_par_iter()
            .map(|i| {
                let seed = base_seed + i as u64;
                (seed, self.run_single(seed, opts))
            })
            .collect();

        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (seed, outcome) in outcomes {
            match outcome {
                Ok(run) => runs.push(run),
                Err(e) => failures.push(RunFailure { seed, message: e.to_string() }),
            }
        }
        runs.sort_by(|a, b| {
            b.final_fidelity
                .total_cmp(&a.final_fidelity)
                .then(a.seed.cmp(&b.seed))
        });
        Ok(MultistartOutcome { runs, failures })
    }
}

#[derive(Clone, Debug)]
pub struct RunFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug)]
pub struct MultistartOutcome {
    pub runs: Vec<OptimizationRun>,
    pub failures: Vec<RunFailure>,
}
