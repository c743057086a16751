//! Piecewise-constant time evolution of density operators and the exact
//! derivative of each step propagator.
//!
//! Each step diagonalizes the instantaneous Hamiltonian, so the step
//! propagator `U_j = V exp(-i E dt) V^dagger` is exact and the control
//! derivative is available in closed form as `dU_j/du = U_j D_j` with
//! `D_j = V ((V^dagger (-i H_k dt) V) (.) G_j) V^dagger`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{assemble_step_hamiltonian, DriftTable};
use crate::linalg::{
    adjoint_mul_into, hadamard_into, hermitian_eigen_into, mul_adjoint_into, mul_into, CMatrix,
};
use crate::powder::EnsembleMember;
use crate::spinops::{InitialState, TargetOperator};

/// Piecewise-constant two-channel control waveform; values are
/// (ux, uy) in rad/s per step.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseShape {
    dt: f64,
    values: Vec<[f64; 2]>,
}

impl PulseShape {
    pub fn new(dt: f64, values: Vec<[f64; 2]>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                field: "dt",
                message: format!("step length must be finite and > 0, got {dt}"),
            });
        }
        if values.is_empty() {
            return Err(Error::EmptyInput("pulse must contain at least one step"));
        }
        if values.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidParameter {
                field: "values",
                message: "all control amplitudes must be finite".into(),
            });
        }
        Ok(PulseShape { dt, values })
    }

    pub fn zero(dt: f64, n_steps: usize) -> Result<Self> {
        Self::new(dt, vec![[0.0, 0.0]; n_steps])
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.values.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.values.len() as f64
    }

    #[inline]
    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }
}

/// Eigendecomposition of one step Hamiltonian together with the exact
/// step propagator.
#[derive(Clone, Debug)]
pub struct StepEigenDecomposition {
    /// Eigenvalues in rad/s, ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary of eigenvectors (columns).
    pub eigenvectors: CMatrix,
    /// U = V exp(-i diag(E) dt) V^dagger.
    pub propagator: CMatrix,
}

/// Relative Hermiticity tolerance for step Hamiltonians.
const HERMITICITY_TOL: f64 = 1e-12;

/// Eigenvalue-gap threshold (|dE| dt) below which the derivative filter
/// takes its degenerate-limit value 1.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// Diagonalize `h` and build the exact step propagator for interval `dt`.
pub fn step_propagator(h: &CMatrix, dt: f64) -> Result<StepEigenDecomposition> {
    let scale = h.max_abs().max(1.0);
    let herm = h.hermiticity_error();
    if herm > HERMITICITY_TOL * scale {
        return Err(Error::NotHermitian { deviation: herm, tolerance: HERMITICITY_TOL * scale });
    }
    let n = h.dim();
    let mut eigenvalues = vec![0.0; n];
    let mut eigenvectors = CMatrix::zeros(n);
    hermitian_eigen_into(h, &mut eigenvalues, &mut eigenvectors);
    let mut propagator = CMatrix::zeros(n);
    let mut scratch = CMatrix::zeros(n);
    propagator_from_eigen(&eigenvalues, &eigenvectors, dt, &mut propagator, &mut scratch);
    Ok(StepEigenDecomposition { eigenvalues, eigenvectors, propagator })
}

/// `out = V exp(-i diag(E) dt) V^dagger` without re-diagonalizing.
pub(crate) fn propagator_from_eigen(
    evals: &[f64],
    evecs: &CMatrix,
    dt: f64,
    out: &mut CMatrix,
    scratch: &mut CMatrix,
) {
    let n = evecs.dim();
    // scratch = V * diag(exp(-i E dt)): scale columns.
    scratch.clone_from(evecs);
    for (c, &e) in evals.iter().enumerate() {
        let phase = C64::from_polar(1.0, -e * dt);
        for r in 0..n {
            scratch[(r, c)] *= phase;
        }
    }
    mul_adjoint_into(out, scratch, evecs);
}

/// Entry filter of the exact derivative (the degenerate case takes the
/// limit value 1). Evaluated as `exp(ix/2) sin(x/2)/(x/2)`, which is
/// cancellation-free for small gaps.
#[inline]
pub(crate) fn derivative_filter(de_dt: f64) -> C64 {
    if de_dt.abs() < DEGENERACY_THRESHOLD {
        C64::ONE
    } else {
        let half = 0.5 * de_dt;
        let (s, c) = half.sin_cos();
        let sinc = s / half;
        C64::new(c * sinc, s * sinc)
    }
}

/// Fill `g` with the derivative filter for all eigenvalue pairs:
/// `g[m][n] = (exp(i (E_m - E_n) dt) - 1) / (i (E_m - E_n) dt)`.
/// Swapping m and n conjugates the filter, so only the upper triangle
/// is evaluated.
pub(crate) fn fill_filter_matrix(evals: &[f64], dt: f64, g: &mut CMatrix) {
    let n = evals.len();
    for m in 0..n {
        g[(m, m)] = C64::ONE;
        for k in m + 1..n {
            let f = derivative_filter((evals[m] - evals[k]) * dt);
            g[(m, k)] = f;
            g[(k, m)] = f.conj();
        }
    }
}

/// Exact derivative factor `D_j` of the step propagator with respect to
/// the amplitude multiplying `control_op`, so that `dU_j/du = U_j D_j`.
pub fn propagator_derivative(
    step: &StepEigenDecomposition,
    control_op: &CMatrix,
    dt: f64,
) -> CMatrix {
    let n = control_op.dim();
    let v = &step.eigenvectors;
    // W = V^dagger (-i control dt) V
    let mut tmp = CMatrix::zeros(n);
    let mut w = CMatrix::zeros(n);
    mul_into(&mut tmp, control_op, v);
    adjoint_mul_into(&mut w, v, &tmp);
    w.scale_mut(C64::new(0.0, -dt));

    let mut g = CMatrix::zeros(n);
    fill_filter_matrix(&step.eigenvalues, dt, &mut g);
    let mut wg = CMatrix::zeros(n);
    hadamard_into(&mut wg, &w, &g);

    let mut d = CMatrix::zeros(n);
    mul_into(&mut tmp, v, &wg);
    mul_adjoint_into(&mut d, &tmp, v);
    d
}

/// Truncated commutator-series form of the full derivative
/// `dU/du = -i dt U sum_l (i dt)^l / (l+1)! [h, control]_l`,
/// used as an independent cross-check of [`propagator_derivative`].
pub fn commutator_series_derivative(
    h: &CMatrix,
    control_op: &CMatrix,
    dt: f64,
    order: usize,
) -> Result<CMatrix> {
    let n = h.dim();
    let step = step_propagator(h, dt)?;

    let mut series = control_op.clone(); // l = 0 term, coefficient 1/1!
    let mut nested = control_op.clone();
    let mut scratch = CMatrix::zeros(n);
    let mut tmp = CMatrix::zeros(n);
    let mut coeff = C64::ONE;
    for l in 1..=order {
        crate::linalg::commutator_into(&mut tmp, h, &nested, &mut scratch);
        nested.clone_from(&tmp);
        coeff *= C64::new(0.0, dt) / (l as f64 + 1.0);
        series.add_scaled_mut(&nested, coeff);
    }
    let mut out = CMatrix::zeros(n);
    mul_into(&mut out, &step.propagator, &series);
    out.scale_mut(C64::new(0.0, -dt));
    Ok(out)
}

/// Forward/backward state trajectories over a full pulse for one
/// ensemble member.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// rho(t_j), j = 0..=N (forward-propagated initial state).
    pub forward: Vec<CMatrix>,
    /// rho_t^dagger(t_j), j = 0..=N (backward-propagated target adjoint).
    pub backward: Vec<CMatrix>,
    /// Per-step eigendecompositions and propagators.
    pub steps: Vec<StepEigenDecomposition>,
}

/// Propagate the initial state forward and the target adjoint backward
/// across the whole pulse. The step Hamiltonian is evaluated at the step
/// midpoint, and `member.rf_scale` multiplies both control channels.
pub fn evolve(
    pulse: &PulseShape,
    member: &EnsembleMember,
    initial: &InitialState,
    target: &TargetOperator,
) -> Result<Trajectory> {
    let spin = member.params.quad.spin;
    let dim = spin.dim();
    for (what, d) in [("initial state", initial.matrix.dim()), ("target", target.matrix.dim())] {
        if d != dim {
            return Err(Error::DimensionMismatch {
                context: match what {
                    "initial state" => "evolve: initial state vs spin dimension",
                    _ => "evolve: target vs spin dimension",
                },
                left: d,
                right: dim,
            });
        }
    }
    let n_steps = pulse.n_steps();
    let dt = pulse.dt();
    let table = DriftTable::new(&member.params, &member.orient, n_steps, dt)?;

    let mut h = CMatrix::zeros(dim);
    let mut steps = Vec::with_capacity(n_steps);
    let mut forward = Vec::with_capacity(n_steps + 1);
    forward.push(initial.matrix.clone());
    let mut tmp = CMatrix::zeros(dim);
    for (j, u) in pulse.values().iter().enumerate() {
        assemble_step_hamiltonian(&mut h, table.step_diag(j), u[0], u[1], member.rf_scale, spin);
        let step = step_propagator(&h, dt)?;
        let mut next = CMatrix::zeros(dim);
        mul_into(&mut tmp, &step.propagator, &forward[j]);
        mul_adjoint_into(&mut next, &tmp, &step.propagator);
        forward.push(next);
        steps.push(step);
    }

    let mut backward = vec![CMatrix::zeros(dim); n_steps + 1];
    backward[n_steps] = target.matrix.adjoint();
    for j in (0..n_steps).rev() {
        let u = &steps[j].propagator;
        // rho_b(t_j) = U_j^dagger rho_b(t_{j+1}) U_j
        adjoint_mul_into(&mut tmp, u, &backward[j + 1]);
        let mut prev = CMatrix::zeros(dim);
        mul_into(&mut prev, &tmp, u);
        backward[j] = prev;
    }

    Ok(Trajectory { forward, backward, steps })
}
