//! Dense complex matrices with inline storage, sized for single-spin
//! density-operator work (dimension 2I+1, capped at [`MAX_DIM`]).
//!
//! The optimizer inner loop diagonalizes and multiplies 4x4 Hermitian
//! matrices hundreds of millions of times, so storage is a fixed inline
//! array (no per-matrix heap traffic) and the eigensolver is a cyclic
//! complex Jacobi iteration rather than a general LAPACK-style driver.

use num_complex::Complex64 as C64;

/// Largest supported matrix dimension (spin 7/2 -> 8 levels).
pub const MAX_DIM: usize = 8;

const CAP: usize = MAX_DIM * MAX_DIM;

/// Square complex matrix with runtime dimension `<= MAX_DIM`.
#[derive(Clone)]
pub struct CMatrix {
    dim: usize,
    data: [C64; CAP],
}

impl std::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.dim, self.dim)?;
        for r in 0..self.dim {
            write!(f, "  ")?;
            for c in 0..self.dim {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl PartialEq for CMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.entries().zip(other.entries()).all(|(a, b)| a == b)
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "matrix dimension {dim} outside 1..={MAX_DIM}"
        );
        CMatrix { dim, data: [C64::ZERO; CAP] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::ONE;
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> C64>(dim: usize, mut f: F) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.data[r * dim + c] = f(r, c);
            }
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = C64::new(d, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data[..self.dim * self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data[..self.dim * self.dim]
    }

    pub fn entries(&self) -> impl Iterator<Item = &C64> {
        self.as_slice().iter()
    }

    pub fn set_zero(&mut self) {
        self.as_mut_slice().fill(C64::ZERO);
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |r, c| self[(r, c)].conj())
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = self.clone();
        for v in out.as_mut_slice() {
            *v *= z;
        }
        out
    }

    pub fn scale_mut(&mut self, z: C64) {
        for v in self.as_mut_slice() {
            *v *= z;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a -= b;
        }
        out
    }

    pub fn add_scaled_mut(&mut self, other: &Self, z: C64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a += z * b;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        mul_into(&mut out, self, other);
        out
    }

    pub fn trace(&self) -> C64 {
        let n = self.dim;
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries()
            .zip(other.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise deviation from `A = A^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            worst = worst.max(self.data[r * n + r].im.abs());
            for c in r + 1..n {
                let d = self.data[r * n + c] - self.data[c * n + r].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.entries().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns eigenvalues in ascending order and the unitary
    /// of eigenvectors (columns), so `self = V diag(E) V^dagger`.
    ///
    /// Only the Hermitian part of `self` is consulted; callers are
    /// expected to pass matrices that are Hermitian to roundoff.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMatrix) {
        let mut evals = vec![0.0; self.dim];
        let mut evecs = CMatrix::zeros(self.dim);
        hermitian_eigen_into(self, &mut evals, &mut evecs);
        (evals, evecs)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

/// `out = a * b`.
pub fn mul_into(out: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
    let n = a.dim;
    assert!(n == b.dim && n == out.dim, "dimension mismatch in mul");
    if n == 4 {
        // Fixed-size views let the compiler fully unroll the 4x4 kernel,
        // which carries the propagation inner loop.
        let av: &[C64; 16] = a.data[..16].try_into().unwrap();
        let bv: &[C64; 16] = b.data[..16].try_into().unwrap();
        let ov: &mut [C64; 16] = (&mut out.data[..16]).try_into().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                ov[r * 4 + c] = av[r * 4] * bv[c]
                    + av[r * 4 + 1] * bv[4 + c]
                    + av[r * 4 + 2] * bv[8 + c]
                    + av[r * 4 + 3] * bv[12 + c];
            }
        }
        return;
    }
    for r in 0..n {
        let ar = &a.data[r * n..r * n + n];
        let or = &mut out.data[r * n..r * n + n];
        for c in 0..n {
            let mut acc = C64::ZERO;
            for k in 0..n {
                acc += ar[k] * b.data[k * n + c];
            }
            or[c] = acc;
        }
    }
}

/// `out = a * b^dagger`.
pub fn mul_adjoint_into(out: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
    let n = a.dim;
    assert!(n == b.dim && n == out.dim, "dimension mismatch in mul_adjoint");
    if n == 4 {
        let av: &[C64; 16] = a.data[..16].try_into().unwrap();
        let bv: &[C64; 16] = b.data[..16].try_into().unwrap();
        let ov: &mut [C64; 16] = (&mut out.data[..16]).try_into().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                ov[r * 4 + c] = av[r * 4] * bv[c * 4].conj()
                    + av[r * 4 + 1] * bv[c * 4 + 1].conj()
                    + av[r * 4 + 2] * bv[c * 4 + 2].conj()
                    + av[r * 4 + 3] * bv[c * 4 + 3].conj();
            }
        }
        return;
    }
    for r in 0..n {
        let ar = &a.data[r * n..r * n + n];
        let or = &mut out.data[r * n..r * n + n];
        for c in 0..n {
            let bc = &b.data[c * n..c * n + n];
            let mut acc = C64::ZERO;
            for k in 0..n {
                acc += ar[k] * bc[k].conj();
            }
            or[c] = acc;
        }
    }
}

/// `out = a^dagger * b`.
pub fn adjoint_mul_into(out: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
    let n = a.dim;
    assert!(n == b.dim && n == out.dim, "dimension mismatch in adjoint_mul");
    if n == 4 {
        let av: &[C64; 16] = a.data[..16].try_into().unwrap();
        let bv: &[C64; 16] = b.data[..16].try_into().unwrap();
        let ov: &mut [C64; 16] = (&mut out.data[..16]).try_into().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                ov[r * 4 + c] = av[r].conj() * bv[c]
                    + av[4 + r].conj() * bv[4 + c]
                    + av[8 + r].conj() * bv[8 + c]
                    + av[12 + r].conj() * bv[12 + c];
            }
        }
        return;
    }
    for r in 0..n {
        let or = &mut out.data[r * n..r * n + n];
        for c in 0..n {
            let mut acc = C64::ZERO;
            for k in 0..n {
                acc += a.data[k * n + r].conj() * b.data[k * n + c];
            }
            or[c] = acc;
        }
    }
}

/// `Tr[a * b]`.
pub fn trace_mul(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.dim;
    assert_eq!(n, b.dim, "dimension mismatch in trace_mul");
    let mut acc = C64::ZERO;
    for r in 0..n {
        for c in 0..n {
            acc += a.data[r * n + c] * b.data[c * n + r];
        }
    }
    acc
}

/// `Tr[a^dagger * b]` (the Hilbert-Schmidt inner product).
pub fn trace_adjoint_mul(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.dim;
    assert_eq!(n, b.dim, "dimension mismatch in trace_adjoint_mul");
    let mut acc = C64::ZERO;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        acc += x.conj() * y;
    }
    acc
}

/// `out = a (.) b` (elementwise Hadamard product).
pub fn hadamard_into(out: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
    let n = a.dim;
    assert!(n == b.dim && n == out.dim, "dimension mismatch in hadamard");
    for ((o, x), y) in out
        .as_mut_slice()
        .iter_mut()
        .zip(a.as_slice())
        .zip(b.as_slice())
    {
        *o = x * y;
    }
}

/// `out = a*b - b*a`.
pub fn commutator_into(out: &mut CMatrix, a: &CMatrix, b: &CMatrix, scratch: &mut CMatrix) {
    mul_into(out, a, b);
    mul_into(scratch, b, a);
    for (o, s) in out.as_mut_slice().iter_mut().zip(scratch.as_slice()) {
        *o -= s;
    }
}

const JACOBI_MAX_SWEEPS: usize = 50;

/// In-place variant of [`CMatrix::hermitian_eigen`] writing into caller
/// buffers; used by the propagation inner loop, so it performs no heap
/// allocation.
pub fn hermitian_eigen_into(h: &CMatrix, evals: &mut [f64], evecs: &mut CMatrix) {
    let n = h.dim;
    assert_eq!(evals.len(), n, "eigenvalue buffer length mismatch");
    assert_eq!(evecs.dim, n, "eigenvector buffer dimension mismatch");

    // Work on the Hermitian average so tiny asymmetries cannot bias the
    // rotations.
    let mut a = h.clone();
    let mut scale2 = 0.0f64;
    for r in 0..n {
        a.data[r * n + r] = C64::new(h.data[r * n + r].re, 0.0);
        scale2 = scale2.max(a.data[r * n + r].re * a.data[r * n + r].re);
        for c in r + 1..n {
            let z = 0.5 * (h.data[r * n + c] + h.data[c * n + r].conj());
            a.data[r * n + c] = z;
            a.data[c * n + r] = z.conj();
            scale2 = scale2.max(z.norm_sqr());
        }
    }

    for r in 0..n {
        for c in 0..n {
            evecs.data[r * n + c] = if r == c { C64::ONE } else { C64::ZERO };
        }
    }
    let tol = 1e-15 * scale2.sqrt().max(f64::MIN_POSITIVE);
    let tol2 = tol * tol;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off2 = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off2 = off2.max(a.data[p * n + q].norm_sqr());
            }
        }
        if off2 <= tol2 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut a, evecs, p, q, tol);
            }
        }
    }

    for i in 0..n {
        evals[i] = a.data[i * n + i].re;
    }
    // In-place selection sort of the eigenpairs (ascending), swapping
    // eigenvector columns alongside.
    for i in 0..n {
        let mut best = i;
        for j in i + 1..n {
            if evals[j] < evals[best] {
                best = j;
            }
        }
        if best != i {
            evals.swap(i, best);
            for r in 0..n {
                evecs.data.swap(r * n + i, r * n + best);
            }
        }
    }
}

/// One complex Jacobi rotation zeroing `a[p][q]`; accumulates into `v`.
fn jacobi_rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, tol: f64) {
    let n = a.dim;
    let apq = a.data[p * n + q];
    let mag = apq.norm();
    if mag <= tol {
        return;
    }
    let phase = apq / mag; // e^{i phi}
    let app = a.data[p * n + p].re;
    let aqq = a.data[q * n + q].re;

    // tan(theta) for the stable (small-angle) root of
    // |apq| (1 - t^2) + (aqq - app) t = 0, i.e. t^2 - 2 tau t - 1 = 0.
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        -1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let sp = s * phase; // s e^{i phi}
    let spc = sp.conj(); // s e^{-i phi}

    // Columns: A <- A R with R_pp = c, R_qp = s e^{-i phi},
    // R_pq = -s e^{i phi}, R_qq = c.
    for k in 0..n {
        let akp = a.data[k * n + p];
        let akq = a.data[k * n + q];
        a.data[k * n + p] = c * akp + spc * akq;
        a.data[k * n + q] = -sp * akp + c * akq;
    }
    // Rows: A <- R^dagger A.
    for k in 0..n {
        let apk = a.data[p * n + k];
        let aqk = a.data[q * n + k];
        a.data[p * n + k] = c * apk + sp * aqk;
        a.data[q * n + k] = -spc * apk + c * aqk;
    }
    // Restore exact Hermitian structure on the rotated block.
    a.data[p * n + q] = C64::ZERO;
    a.data[q * n + p] = C64::ZERO;
    a.data[p * n + p] = C64::new(a.data[p * n + p].re, 0.0);
    a.data[q * n + q] = C64::new(a.data[q * n + q].re, 0.0);

    for k in 0..n {
        let vkp = v.data[k * n + p];
        let vkq = v.data[k * n + q];
        v.data[k * n + p] = c * vkp + spc * vkq;
        v.data[k * n + q] = -sp * vkp + c * vkq;
    }
}

/// Eigendecomposition of a Hermitian tridiagonal matrix given by its
/// real diagonal and complex super-diagonal couplings (`couplings[r]`
/// is the (r, r+1) entry). This is the shape of every rf-driven step
/// Hamiltonian (diagonal drift plus ladder couplings), and a diagonal
/// phase gauge reduces it to a real symmetric problem, so the hot loop
/// avoids complex Jacobi rotations entirely.
pub fn hermitian_tridiagonal_eigen_into(
    diag: &[f64],
    couplings: &[C64],
    evals: &mut [f64],
    evecs: &mut CMatrix,
) {
    let n = diag.len();
    assert_eq!(couplings.len(), n - 1, "need n-1 couplings");
    assert_eq!(evals.len(), n, "eigenvalue buffer length mismatch");
    assert_eq!(evecs.dim, n, "eigenvector buffer dimension mismatch");

    // Gauge phases p_r with p_0 = 1 and p_{r+1} = p_r conj(c_r)/|c_r|,
    // making conj(p_r) c_r p_{r+1} = |c_r| real.
    let mut phases = [C64::ONE; MAX_DIM];
    let mut offdiag = [0.0f64; MAX_DIM];
    for r in 0..n - 1 {
        let mag = couplings[r].norm();
        offdiag[r] = mag;
        phases[r + 1] = if mag == 0.0 {
            phases[r]
        } else {
            phases[r] * (couplings[r].conj() / mag)
        };
    }

    // Dense real symmetric copy (n <= 8, stays in registers/cache).
    let mut a = [0.0f64; CAP];
    let mut v = [0.0f64; CAP];
    let mut scale2 = 0.0f64;
    for r in 0..n {
        a[r * n + r] = diag[r];
        v[r * n + r] = 1.0;
        scale2 = scale2.max(diag[r] * diag[r]);
        if r + 1 < n {
            a[r * n + r + 1] = offdiag[r];
            a[(r + 1) * n + r] = offdiag[r];
            scale2 = scale2.max(offdiag[r] * offdiag[r]);
        }
    }
    let tol = 1e-15 * scale2.sqrt().max(f64::MIN_POSITIVE);

    if n == 4 {
        let a4: &mut [f64; 16] = (&mut a[..16]).try_into().unwrap();
        let v4: &mut [f64; 16] = (&mut v[..16]).try_into().unwrap();
        real_jacobi4(a4, v4, tol);
    } else {
        real_jacobi(&mut a, &mut v, n, tol);
    }

    for i in 0..n {
        evals[i] = a[i * n + i];
    }
    // Sort ascending, then restore the phase gauge on the rows.
    let mut order = [0usize; MAX_DIM];
    for (i, o) in order.iter_mut().take(n).enumerate() {
        *o = i;
    }
    order[..n].sort_by(|&i, &j| evals[i].total_cmp(&evals[j]));
    let vals = {
        let mut tmp = [0.0f64; MAX_DIM];
        tmp[..n].copy_from_slice(&evals[..n]);
        tmp
    };
    for (new, &old) in order[..n].iter().enumerate() {
        evals[new] = vals[old];
        for r in 0..n {
            evecs.data[r * n + new] = phases[r] * v[r * n + old];
        }
    }
}

fn real_jacobi(a: &mut [f64], v: &mut [f64], n: usize, tol: f64) {
    let tol2 = tol * tol;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off2 = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off2 = off2.max(a[p * n + q] * a[p * n + q]);
            }
        }
        if off2 <= tol2 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp + s * akq;
                    a[k * n + q] = -s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk + s * aqk;
                    a[q * n + k] = -s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp + s * vkq;
                    v[k * n + q] = -s * vkp + c * vkq;
                }
            }
        }
    }
}

/// Fixed-size variant of [`real_jacobi`]; the constant bounds let the
/// compiler unroll the row/column updates, and this dimension carries
/// the whole optimizer hot path.
fn real_jacobi4(a: &mut [f64; 16], v: &mut [f64; 16], tol: f64) {
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let tol2 = tol * tol;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off2 = 0.0f64;
        for &(p, q) in &PAIRS {
            off2 = off2.max(a[p * 4 + q] * a[p * 4 + q]);
        }
        if off2 <= tol2 {
            break;
        }
        for &(p, q) in &PAIRS {
            let apq = a[p * 4 + q];
            if apq.abs() <= tol {
                continue;
            }
            let tau = (a[q * 4 + q] - a[p * 4 + p]) / (2.0 * apq);
            let t = if tau >= 0.0 {
                -1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                1.0 / (-tau + (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            for k in 0..4 {
                let akp = a[k * 4 + p];
                let akq = a[k * 4 + q];
                a[k * 4 + p] = c * akp + s * akq;
                a[k * 4 + q] = -s * akp + c * akq;
            }
            for k in 0..4 {
                let apk = a[p * 4 + k];
                let aqk = a[q * 4 + k];
                a[p * 4 + k] = c * apk + s * aqk;
                a[q * 4 + k] = -s * apk + c * aqk;
            }
            a[p * 4 + q] = 0.0;
            a[q * 4 + p] = 0.0;
            for k in 0..4 {
                let vkp = v[k * 4 + p];
                let vkq = v[k * 4 + q];
                v[k * 4 + p] = c * vkp + s * vkq;
                v[k * 4 + q] = -s * vkp + c * vkq;
            }
        }
    }
}
