//! Time-dependent single-spin Hamiltonian under magic-angle spinning:
//! isotropic chemical shift, first- and second-order secular quadrupole
//! terms, and the rf control term.
//!
//! Conventions (fixed here, documented once):
//!
//! * `Orientation` = Euler angles (alpha, beta, gamma) of the quadrupole
//!   principal axis frame in the rotor frame, with the rotation matrix
//!   `Rz(alpha) Ry(beta) Rz(gamma)` mapping principal-frame coordinates
//!   to rotor-frame coordinates.
//! * The rotor axis is tilted by the magic angle from the static field;
//!   a vector fixed in the rotor has lab coordinates
//!   `Ry(theta_m) Rz(omega_r t) v`.
//! * The base quadrupole scale is `omega_q = 2 pi * 3 C_Q / (2I(2I-1))`;
//!   second-order coefficients carry `1/omega_0`.
//! * Public inputs are Hz and ppm; matrix elements are rad/s.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::spinops::{Spin, SpinOperators};

/// arccos(1/sqrt(3)), the magic angle.
pub const MAGIC_ANGLE: f64 = 0.9553166181245093;

const TAU: f64 = std::f64::consts::TAU;

/// Quadrupole coupling tensor parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadrupoleParams {
    /// Quadrupole coupling constant C_Q in Hz.
    pub cq_hz: f64,
    /// Asymmetry parameter, 0 <= eta <= 1.
    pub eta: f64,
    pub spin: Spin,
}

impl QuadrupoleParams {
    pub fn new(cq_hz: f64, eta: f64, spin: Spin) -> Result<Self> {
        if !(cq_hz >= 0.0) || !cq_hz.is_finite() {
            return Err(Error::InvalidParameter {
                field: "cq_hz",
                message: format!("must be finite and >= 0, got {cq_hz}"),
            });
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter {
                field: "eta",
                message: format!("must lie in [0, 1], got {eta}"),
            });
        }
        Ok(QuadrupoleParams { cq_hz, eta, spin })
    }

    /// omega_q = 2 pi * 3 C_Q / (2I(2I-1)) in rad/s.
    pub fn omega_q(&self) -> f64 {
        let two_i = self.spin.twice_value();
        TAU * 3.0 * self.cq_hz / (two_i * (two_i - 1.0))
    }
}

impl Spin {
    fn twice_value(self) -> f64 {
        2.0 * self.value()
    }
}

/// Static parameters of the observed spin system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinSystemParams {
    pub quad: QuadrupoleParams,
    /// Larmor frequency omega_0 / 2 pi in Hz.
    pub larmor_hz: f64,
    /// Isotropic chemical shift in ppm.
    pub shift_ppm: f64,
    /// MAS rate omega_r / 2 pi in Hz.
    pub rotor_hz: f64,
}

impl SpinSystemParams {
    pub fn new(quad: QuadrupoleParams, larmor_hz: f64, shift_ppm: f64, rotor_hz: f64) -> Result<Self> {
        if !(larmor_hz > 0.0) || !larmor_hz.is_finite() {
            return Err(Error::InvalidParameter {
                field: "larmor_hz",
                message: format!("must be finite and > 0, got {larmor_hz}"),
            });
        }
        if !(rotor_hz >= 0.0) || !rotor_hz.is_finite() {
            return Err(Error::InvalidParameter {
                field: "rotor_hz",
                message: format!("must be finite and >= 0, got {rotor_hz}"),
            });
        }
        if !shift_ppm.is_finite() {
            return Err(Error::InvalidParameter {
                field: "shift_ppm",
                message: format!("must be finite, got {shift_ppm}"),
            });
        }
        Ok(SpinSystemParams { quad, larmor_hz, shift_ppm, rotor_hz })
    }
}

/// Euler angles (radians) of the quadrupole principal axis frame in the
/// rotor frame. Angles are wrapped into [0, 2pi) x [0, pi] x [0, 2pi).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orientation {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Orientation {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (field, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    field,
                    message: format!("must be finite, got {v}"),
                });
            }
        }
        let mut beta = wrap_tau(beta);
        let mut alpha = alpha;
        let mut gamma = gamma;
        // beta in (pi, 2pi) folds back onto [0, pi] with azimuthal flips.
        if beta > std::f64::consts::PI {
            beta = TAU - beta;
            alpha += std::f64::consts::PI;
            gamma += std::f64::consts::PI;
        }
        Ok(Orientation { alpha: wrap_tau(alpha), beta, gamma: wrap_tau(gamma) })
    }
}

fn wrap_tau(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y == TAU { 0.0 } else { y }
}

/// The three secular quadrupole coefficients at one instant, in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadFrequencies {
    /// First-order coefficient multiplying 3 Iz^2 - I(I+1).
    pub w1: f64,
    /// Second-order coefficient multiplying (-8 Iz^2 + 4 I(I+1) - 1) Iz.
    pub w21: f64,
    /// Second-order coefficient multiplying (-2 Iz^2 + 2 I(I+1) - 1) Iz.
    pub w22: f64,
}

/// Rank-2 Wigner small-d matrix d^2_{m' m}(beta); row/column indices are
/// m' + 2 and m + 2.
pub(crate) fn wigner_d2(beta: f64) -> [[f64; 5]; 5] {
    let cb = beta.cos();
    let sb = beta.sin();
    let p = (1.0 + cb) / 2.0; // cos^2(beta/2)
    let q = (1.0 - cb) / 2.0; // sin^2(beta/2)
    let r38 = (3.0f64 / 8.0).sqrt();
    let r32 = (3.0f64 / 2.0).sqrt();
    [
        // m' = -2
        [p * p, p * sb, r38 * sb * sb, q * sb, q * q],
        // m' = -1
        [-p * sb, p * (2.0 * cb - 1.0), r32 * sb * cb, q * (2.0 * cb + 1.0), q * sb],
        // m' = 0
        [r38 * sb * sb, -r32 * sb * cb, (3.0 * cb * cb - 1.0) / 2.0, r32 * sb * cb, r38 * sb * sb],
        // m' = +1
        [-q * sb, q * (2.0 * cb + 1.0), -r32 * sb * cb, p * (2.0 * cb - 1.0), p * sb],
        // m' = +2
        [q * q, -q * sb, r38 * sb * sb, -p * sb, p * p],
    ]
}

/// Per-orientation precomputation: the rotor-frame rank-2 components of
/// the quadrupole tensor contracted with the magic-angle leg of the
/// rotation, so that each lab component is a 5-term harmonic series in
/// the rotor phase.
#[derive(Clone, Debug)]
pub(crate) struct OrientationWeights {
    /// weights[k][mp + 2]: harmonic amplitudes of lab component k (0, 1, 2).
    weights: [[C64; 5]; 3],
}

impl OrientationWeights {
    pub(crate) fn new(eta: f64, orient: &Orientation) -> Self {
        // PAS spherical components: v0 = sqrt(3/2), v(+-1) = 0,
        // v(+-2) = eta / 2 (unit V_zz). Under a coordinate map
        // v' = Rz(psi) v the components pick up e^{+i m psi}, and under
        // v' = Ry(beta) v they mix with this d^2 table as
        // a'_{m'} = sum_m d2[m'][m] a_m.
        let v0 = (1.5f64).sqrt();
        let v2 = eta / 2.0;

        let d_beta = wigner_d2(orient.beta);
        // rho_{m'} = e^{i m' alpha} sum_{m''} d2[m'][m''] e^{i m'' gamma}
        //            v_{m''}, with v nonzero at m'' in {-2, 0, 2}.
        let e_g2 = C64::from_polar(1.0, 2.0 * orient.gamma);
        let mut rho = [C64::ZERO; 5];
        for mp in -2i32..=2 {
            let row = (mp + 2) as usize;
            let mut z = v0 * C64::new(d_beta[row][2], 0.0);
            z += v2 * (e_g2 * d_beta[row][4] + e_g2.conj() * d_beta[row][0]);
            rho[row] = z * C64::from_polar(1.0, mp as f64 * orient.alpha);
        }

        // Magic-angle leg: lab component k = d2[k][m'] applied after the
        // rotor phase; fold the d element into per-harmonic weights.
        let d_m = wigner_d2(MAGIC_ANGLE);
        let mut weights = [[C64::ZERO; 5]; 3];
        for (k, w) in weights.iter_mut().enumerate() {
            for mp in 0..5 {
                w[mp] = rho[mp] * d_m[k + 2][mp];
            }
        }
        OrientationWeights { weights }
    }

    /// Lab components (v0, v1, v2) at rotor phase `phi = omega_r t`:
    /// v_k = sum_{m'} weights[k][m'] e^{+i m' phi}.
    pub(crate) fn lab_components(&self, phi: f64) -> (C64, C64, C64) {
        let z1 = C64::from_polar(1.0, phi);
        let z2 = z1 * z1;
        let ph = [z2.conj(), z1.conj(), C64::ONE, z1, z2];
        let mut v = [C64::ZERO; 3];
        for (k, w) in self.weights.iter().enumerate() {
            v[k] = w.iter().zip(ph.iter()).map(|(a, p)| a * p).sum();
        }
        (v[0], v[1], v[2])
    }
}

fn quad_frequencies_from_components(
    params: &SpinSystemParams,
    v0: C64,
    v1: C64,
    v2: C64,
) -> QuadFrequencies {
    let c = params.quad.omega_q() / 3.0;
    let omega0 = TAU * params.larmor_hz;
    let w1 = c / 6.0f64.sqrt() * v0.re;
    let second = c * c / (2.0 * omega0);
    QuadFrequencies {
        w1,
        w21: -second * v1.norm_sqr(),
        w22: second * v2.norm_sqr(),
    }
}

/// Evaluate the three quadrupole coefficients for one crystallite at
/// time `t`.
pub fn quad_frequencies(
    params: &SpinSystemParams,
    orient: &Orientation,
    t: f64,
) -> Result<QuadFrequencies> {
    if params.larmor_hz == 0.0 {
        return Err(Error::InvalidParameter {
            field: "larmor_hz",
            message: "second-order quadrupole terms require a nonzero Larmor frequency".into(),
        });
    }
    let weights = OrientationWeights::new(params.quad.eta, orient);
    let phi = TAU * params.rotor_hz * t;
    let (v0, v1, v2) = weights.lab_components(phi);
    Ok(quad_frequencies_from_components(params, v0, v1, v2))
}

/// Diagonal drift entry for magnetic quantum number `m`.
fn drift_entry(params: &SpinSystemParams, freqs: &QuadFrequencies, casimir: f64, m: f64) -> f64 {
    let omega0 = TAU * params.larmor_hz;
    let shift = omega0 * params.shift_ppm * 1e-6;
    let m2 = m * m;
    shift * m
        + freqs.w1 * (3.0 * m2 - casimir)
        + freqs.w21 * (-8.0 * m2 + 4.0 * casimir - 1.0) * m
        + freqs.w22 * (-2.0 * m2 + 2.0 * casimir - 1.0) * m
}

/// The drift Hamiltonian (chemical shift + secular quadrupole) at time
/// `t`, diagonal in the Zeeman basis. Entries in rad/s.
pub fn drift_hamiltonian(
    params: &SpinSystemParams,
    orient: &Orientation,
    ops: &SpinOperators,
    t: f64,
) -> Result<CMatrix> {
    if ops.spin != params.quad.spin {
        return Err(Error::DimensionMismatch {
            context: "drift_hamiltonian: spin operators vs system parameters",
            left: ops.spin.dim(),
            right: params.quad.spin.dim(),
        });
    }
    let freqs = quad_frequencies(params, orient, t)?;
    let spin = params.quad.spin;
    let casimir = spin.casimir();
    let n = spin.dim();
    let mut h = CMatrix::zeros(n);
    for r in 0..n {
        h[(r, r)] = C64::new(drift_entry(params, &freqs, casimir, spin.m(r)), 0.0);
    }
    Ok(h)
}

/// drift + ux Ix + uy Iy, with ux, uy in rad/s.
pub fn total_hamiltonian(
    drift: &CMatrix,
    ux: f64,
    uy: f64,
    ops: &SpinOperators,
) -> Result<CMatrix> {
    if drift.dim() != ops.ix.dim() {
        return Err(Error::DimensionMismatch {
            context: "total_hamiltonian: drift vs spin operators",
            left: drift.dim(),
            right: ops.ix.dim(),
        });
    }
    let mut h = drift.clone();
    h.add_scaled_mut(&ops.ix, C64::new(ux, 0.0));
    h.add_scaled_mut(&ops.iy, C64::new(uy, 0.0));
    Ok(h)
}

/// Precomputed diagonal drift entries on a fixed step grid, evaluated at
/// step midpoints `(j + 1/2) dt`. This is the control-independent part of
/// every step Hamiltonian, shared across all optimizer iterations.
#[derive(Clone, Debug)]
pub struct DriftTable {
    dim: usize,
    /// n_steps * dim diagonal entries, step-major.
    diag: Vec<f64>,
}

impl DriftTable {
    pub fn new(
        params: &SpinSystemParams,
        orient: &Orientation,
        n_steps: usize,
        dt: f64,
    ) -> Result<Self> {
        if params.larmor_hz == 0.0 {
            return Err(Error::InvalidParameter {
                field: "larmor_hz",
                message: "second-order quadrupole terms require a nonzero Larmor frequency".into(),
            });
        }
        let spin = params.quad.spin;
        let casimir = spin.casimir();
        let dim = spin.dim();
        let weights = OrientationWeights::new(params.quad.eta, orient);
        let omega_r = TAU * params.rotor_hz;
        let mut diag = Vec::with_capacity(n_steps * dim);
        for j in 0..n_steps {
            let t = (j as f64 + 0.5) * dt;
            let (v0, v1, v2) = weights.lab_components(omega_r * t);
            let freqs = quad_frequencies_from_components(params, v0, v1, v2);
            for r in 0..dim {
                diag.push(drift_entry(params, &freqs, casimir, spin.m(r)));
            }
        }
        Ok(DriftTable { dim, diag })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.diag.len() / self.dim
    }

    #[inline]
    pub fn step_diag(&self, j: usize) -> &[f64] {
        &self.diag[j * self.dim..(j + 1) * self.dim]
    }
}

/// Write `diag(step) + scale (ux Ix + uy Iy)` into `h`. The off-diagonal
/// couplings of Ix and Iy sit one step off the diagonal with known
/// ladder amplitudes, so the matrix is filled directly.
pub(crate) fn assemble_step_hamiltonian(
    h: &mut CMatrix,
    diag: &[f64],
    ux: f64,
    uy: f64,
    scale: f64,
    spin: Spin,
) {
    let n = diag.len();
    h.set_zero();
    for r in 0..n {
        h[(r, r)] = C64::new(diag[r], 0.0);
    }
    // (ux Ix + uy Iy)_{r, r+1} = (ux - i uy) / 2 * <r|I+|r+1>-amplitude
    let half = 0.5 * scale;
    let coupling = C64::new(ux * half, -uy * half);
    for r in 0..n - 1 {
        let a = SpinOperators::raising_element(spin, r);
        h[(r, r + 1)] = coupling * a;
        h[(r + 1, r)] = coupling.conj() * a;
    }
}
