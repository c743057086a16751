// scratch: profile step-kernel components
use mqpulse::linalg::*;
use num_complex::Complex64 as C64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use std::time::Instant;

fn random_hermitian(dim: usize, rng: &mut impl Rng, scale: f64) -> CMatrix {
    let mut h = CMatrix::zeros(dim);
    for r in 0..dim {
        h[(r, r)] = C64::new(rng.random_range(-scale..scale), 0.0);
        for c in r + 1..dim {
            let z = C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
            h[(r, c)] = z;
            h[(c, r)] = z.conj();
        }
    }
    h
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200_000;
    let hs: Vec<CMatrix> = (0..64).map(|_| random_hermitian(4, &mut rng, 1e6)).collect();

    let mut evals = vec![0.0; 4];
    let mut evecs = CMatrix::zeros(4);
    let t0 = Instant::now();
    for i in 0..n {
        hermitian_eigen_into(&hs[i % 64], &mut evals, &mut evecs);
        black_box(&evecs);
    }
    println!("eig: {:.1} ns/op", t0.elapsed().as_nanos() as f64 / n as f64);

    let a = hs[0].clone();
    let b = hs[1].clone();
    let mut out = CMatrix::zeros(4);
    let t0 = Instant::now();
    for _ in 0..n * 10 {
        mul_into(&mut out, black_box(&a), black_box(&b));
        black_box(&out);
    }
    println!("mul_into: {:.1} ns/op", t0.elapsed().as_nanos() as f64 / (n * 10) as f64);

    let t0 = Instant::now();
    for _ in 0..n * 10 {
        adjoint_mul_into(&mut out, black_box(&a), black_box(&b));
        black_box(&out);
    }
    println!("adjoint_mul_into: {:.1} ns/op", t0.elapsed().as_nanos() as f64 / (n * 10) as f64);

    let t0 = Instant::now();
    for _ in 0..n * 10 {
        mul_adjoint_into(&mut out, black_box(&a), black_box(&b));
        black_box(&out);
    }
    println!("mul_adjoint_into: {:.1} ns/op", t0.elapsed().as_nanos() as f64 / (n * 10) as f64);

    // structured eigensolver on physics-like step Hamiltonians
    let diag = [2.0e6, -0.5e6, 0.2e6, 1.4e6];
    let w = C64::new(1.2e5, -0.7e5);
    let amps = [0.8660254037844386f64, 1.0, 0.8660254037844386];
    let couplings: Vec<C64> = amps.iter().map(|&a| w * a).collect();
    let t0 = Instant::now();
    for i in 0..n {
        let mut d = diag;
        d[0] += i as f64; // defeat caching of identical input
        hermitian_tridiagonal_eigen_into(&d, &couplings, &mut evals, &mut evecs);
        black_box(&evecs);
    }
    println!("tridiag eig: {:.1} ns/op", t0.elapsed().as_nanos() as f64 / n as f64);
}
// appended: tridiagonal eig bench
