// scratch: full-scale convergence + timing probe
use mqpulse::hamiltonian::{QuadrupoleParams, SpinSystemParams};
use mqpulse::objective::{EnsembleProblem, Normalization};
use mqpulse::optimizer::{OptimizerOptions, PulseOptimization, RunMode};
use mqpulse::powder::{build_ensemble, PowderSpec};
use mqpulse::spinops::Spin;
use std::time::Instant;

fn main() {
    let tau = std::f64::consts::TAU;
    let quad = QuadrupoleParams::new(3.2e6, 0.2, Spin::THREE_HALVES).unwrap();
    let params = SpinSystemParams::new(quad, 130.9e6, 0.0, 30e3).unwrap();
    let spec = PowderSpec::default();
    let ensemble = build_ensemble(&spec, &params, 1).unwrap();
    let problem =
        EnsembleProblem::new(&ensemble, 1331, 1e-7, Normalization::three_quantum_iz()).unwrap();

    let max_iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let opt = PulseOptimization {
        problem: &problem,
        mode: RunMode::Grape,
        response: None,
        initial_scale: tau * 20e3,
    };
    let opts = OptimizerOptions { max_iterations: max_iters, ..Default::default() };
    let t0 = Instant::now();
    let run = opt.run_single(11, &opts).unwrap();
    let dt = t0.elapsed();
    for (i, rec) in run.history.iter().enumerate() {
        if i % 10 == 0 || i == run.history.len() - 1 {
            println!("iter {i:4}  F = {:.4}  |g| = {:.3e}  step = {:.3e}", 1.0 - rec.cost, rec.grad_norm, rec.step_size);
        }
    }
    println!(
        "total: {:.1?} for {} iters / {} evals -> {:.2} s/eval ({:?})",
        dt,
        run.history.len() - 1,
        run.n_evaluations,
        dt.as_secs_f64() / run.n_evaluations as f64,
        run.termination
    );
}
