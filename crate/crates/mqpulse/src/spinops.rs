//! Spin angular-momentum operators, the thermal initial state, and the
//! triple-quantum target operator.
//!
//! The Zeeman basis is ordered m = +I, I-1, ..., -I, so for I = 3/2 the
//! 3Q coherence sits in the (0, 3) corner of the density matrix.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, MAX_DIM};

/// Half-integer spin quantum number, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !(value > 0.0) || twice.fract() != 0.0 || !twice.is_finite() {
            return Err(Error::InvalidSpin(value));
        }
        let twice = twice as u32;
        if twice as usize + 1 > MAX_DIM {
            return Err(Error::UnsupportedSpin(
                value,
                "operator dimension exceeds the supported maximum (spin 7/2)",
            ));
        }
        Ok(Spin { twice })
    }

    pub const THREE_HALVES: Spin = Spin { twice: 3 };

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Hilbert-space dimension 2I+1.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum number of basis index `r` (m = I - r).
    pub fn m(self, r: usize) -> f64 {
        self.value() - r as f64
    }

    /// The Casimir invariant I(I+1).
    pub fn casimir(self) -> f64 {
        self.value() * (self.value() + 1.0)
    }
}

/// Cartesian angular-momentum matrices for one spin.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub spin: Spin,
    pub ix: CMatrix,
    pub iy: CMatrix,
    pub iz: CMatrix,
}

impl SpinOperators {
    /// Raising-operator matrix element <m+1| I+ |m> for the state at
    /// basis index `r + 1` (i.e. coupling index r to r+1).
    pub(crate) fn raising_element(spin: Spin, r: usize) -> f64 {
        let m = spin.m(r + 1);
        (spin.casimir() - m * (m + 1.0)).sqrt()
    }
}

/// Density operator at thermal equilibrium (Zeeman polarization, equals Iz).
#[derive(Clone, Debug)]
pub struct InitialState {
    pub matrix: CMatrix,
}

/// The 3Q coherence operator: a single unit entry connecting m = +I and
/// m = -I.
#[derive(Clone, Debug)]
pub struct TargetOperator {
    pub matrix: CMatrix,
}

/// Build Ix, Iy, Iz for the given spin.
pub fn angular_momentum_operators(spin: Spin) -> SpinOperators {
    let n = spin.dim();
    let mut iz = CMatrix::zeros(n);
    for r in 0..n {
        iz[(r, r)] = C64::new(spin.m(r), 0.0);
    }
    // I+ couples |m> -> |m+1>, i.e. row r, column r+1 in this ordering.
    let mut ix = CMatrix::zeros(n);
    let mut iy = CMatrix::zeros(n);
    for r in 0..n - 1 {
        let a = 0.5 * SpinOperators::raising_element(spin, r);
        ix[(r, r + 1)] = C64::new(a, 0.0);
        ix[(r + 1, r)] = C64::new(a, 0.0);
        iy[(r, r + 1)] = C64::new(0.0, -a);
        iy[(r + 1, r)] = C64::new(0.0, a);
    }
    SpinOperators { spin, ix, iy, iz }
}

/// The thermal initial state rho(0) = Iz.
pub fn thermal_state(spin: Spin) -> InitialState {
    InitialState { matrix: angular_momentum_operators(spin).iz }
}

/// The 3Q target operator; only defined for spin 3/2.
pub fn three_quantum_target(spin: Spin) -> Result<TargetOperator> {
    if spin != Spin::THREE_HALVES {
        return Err(Error::UnsupportedSpin(
            spin.value(),
            "the triple-quantum target is defined for spin 3/2 only",
        ));
    }
    let mut matrix = CMatrix::zeros(4);
    matrix[(0, 3)] = C64::ONE;
    Ok(TargetOperator { matrix })
}
