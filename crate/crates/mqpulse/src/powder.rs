//! Crystallite orientation sampling and the weighted Hamiltonian
//! ensemble: REPULSION-relaxed (alpha, beta) pairs, equidistant gamma
//! angles, and rf-field scale factors.

use std::io::Write;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::{Orientation, SpinSystemParams};

const TAU: f64 = std::f64::consts::TAU;

/// One member of the averaging ensemble: a crystallite orientation, an
/// rf amplitude scale applied to both control channels, and its weight.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub orient: Orientation,
    pub rf_scale: f64,
    pub params: SpinSystemParams,
    pub weight: f64,
}

/// Size specification for the powder/rf ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct PowderSpec {
    /// Number of REPULSION (alpha, beta) pairs.
    pub n_alpha_beta: usize,
    /// Number of equidistant gamma steps.
    pub n_gamma: usize,
    /// rf amplitude multipliers, e.g. [0.95, 1.0, 1.05].
    pub rf_scales: Vec<f64>,
    /// Relaxation iterations for the REPULSION set.
    pub repulsion_iterations: usize,
}

impl PowderSpec {
    pub fn new(n_alpha_beta: usize, n_gamma: usize, rf_scales: Vec<f64>) -> Result<Self> {
        let spec = PowderSpec { n_alpha_beta, n_gamma, rf_scales, repulsion_iterations: 2000 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_alpha_beta == 0 {
            return Err(Error::InvalidParameter {
                field: "n_alpha_beta",
                message: "must be at least 1".into(),
            });
        }
        if self.n_gamma == 0 {
            return Err(Error::InvalidParameter {
                field: "n_gamma",
                message: "must be at least 1".into(),
            });
        }
        if self.rf_scales.is_empty() {
            return Err(Error::InvalidParameter {
                field: "rf_scales",
                message: "must not be empty".into(),
            });
        }
        if self.rf_scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "rf_scales",
                message: "every scale must be finite and > 0".into(),
            });
        }
        Ok(())
    }

    pub fn member_count(&self) -> usize {
        self.n_alpha_beta * self.n_gamma * self.rf_scales.len()
    }
}

impl Default for PowderSpec {
    /// Desk-scale default: 50 (alpha, beta) pairs x 3 gamma steps x
    /// rf scales 95/100/105%.
    fn default() -> Self {
        PowderSpec {
            n_alpha_beta: 50,
            n_gamma: 3,
            rf_scales: vec![0.95, 1.0, 1.05],
            repulsion_iterations: 2000,
        }
    }
}

#[derive(Clone, Copy)]
struct Vec3 {
    x: f64,
    y: f64,
    z: f64,
}

impl Vec3 {
    fn normalized(self) -> Vec3 {
        let n = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Vec3 { x: self.x / n, y: self.y / n, z: self.z / n }
    }
}

fn pair_potential(points: &[Vec3]) -> f64 {
    let mut phi = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = points[i].x - points[j].x;
            let dy = points[i].y - points[j].y;
            let dz = points[i].z - points[j].z;
            phi += 1.0 / (dx * dx + dy * dy + dz * dz).sqrt();
        }
    }
    phi
}

fn repulsion_forces(points: &[Vec3]) -> Vec<Vec3> {
    let n = points.len();
    let mut forces = vec![Vec3 { x: 0.0, y: 0.0, z: 0.0 }; n];
    for i in 0..n {
        for j in i + 1..n {
            let dx = points[i].x - points[j].x;
            let dy = points[i].y - points[j].y;
            let dz = points[i].z - points[j].z;
            let d2 = dx * dx + dy * dy + dz * dz;
            let inv = 1.0 / (d2 * d2.sqrt());
            forces[i].x += dx * inv;
            forces[i].y += dy * inv;
            forces[i].z += dz * inv;
            forces[j].x -= dx * inv;
            forces[j].y -= dy * inv;
            forces[j].z -= dz * inv;
        }
    }
    forces
}

fn relax_step(points: &[Vec3], forces: &[Vec3], step: f64) -> Vec<Vec3> {
    points
        .iter()
        .zip(forces)
        .map(|(p, f)| {
            Vec3 { x: p.x + step * f.x, y: p.y + step * f.y, z: p.z + step * f.z }.normalized()
        })
        .collect()
}

/// Quasi-uniform points on the unit sphere from seeded random placement
/// followed by pairwise-repulsion relaxation. The inverse-distance
/// potential is non-increasing across iterations (a trial step that
/// would raise it is retried with a smaller step), and the result is
/// deterministic in (n, iterations, seed).
pub fn repulsion_orientations(n: usize, iterations: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            field: "n",
            message: "need at least one orientation".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec3> = (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..TAU);
            let r = (1.0 - z * z).sqrt();
            Vec3 { x: r * phi.cos(), y: r * phi.sin(), z }
        })
        .collect();

    if n > 1 {
        let base_step = 5.0 / (n as f64).powf(1.5);
        let mut damping = 1.0f64;
        let mut phi_cur = pair_potential(&points);
        for iter in 0..iterations {
            let forces = repulsion_forces(&points);
            let decay = 1.0 / (1.0 + iter as f64 / 100.0);
            loop {
                let trial = relax_step(&points, &forces, base_step * decay * damping);
                let phi_trial = pair_potential(&trial);
                if phi_trial <= phi_cur {
                    points = trial;
                    phi_cur = phi_trial;
                    damping = (damping * 1.1).min(1.0);
                    break;
                }
                damping *= 0.5;
                if damping < 1e-18 {
                    break; // equilibrated to step-size underflow
                }
            }
            if damping < 1e-18 {
                break;
            }
        }
    }

    Ok(points
        .iter()
        .map(|p| {
            let beta = p.z.clamp(-1.0, 1.0).acos();
            let alpha = p.y.atan2(p.x).rem_euclid(TAU);
            (alpha, beta)
        })
        .collect())
}

/// Build the full weighted ensemble: REPULSION (alpha, beta) pairs,
/// gamma = k 2pi / n_gamma, and one member per rf scale, all with
/// uniform weights.
pub fn build_ensemble(
    spec: &PowderSpec,
    params: &SpinSystemParams,
    seed: u64,
) -> Result<Vec<EnsembleMember>> {
    spec.validate()?;
    let pairs = repulsion_orientations(spec.n_alpha_beta, spec.repulsion_iterations, seed)?;
    let total = spec.member_count();
    let weight = 1.0 / total as f64;
    let mut members = Vec::with_capacity(total);
    for &(alpha, beta) in &pairs {
        for k in 0..spec.n_gamma {
            let gamma = k as f64 * TAU / spec.n_gamma as f64;
            let orient = Orientation::new(alpha, beta, gamma)?;
            for &rf_scale in &spec.rf_scales {
                members.push(EnsembleMember { orient, rf_scale, params: *params, weight });
            }
        }
    }
    Ok(members)
}

/// Serialize an ensemble as plain text, one member per line:
/// `alpha beta gamma rf_scale weight`, 17 significant digits.
pub fn write_ensemble_text<W: Write>(mut w: W, members: &[EnsembleMember]) -> std::io::Result<()> {
    writeln!(w, "# alpha_rad beta_rad gamma_rad rf_scale weight")?;
    for m in members {
        writeln!(
            w,
            "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
            m.orient.alpha, m.orient.beta, m.orient.gamma, m.rf_scale, m.weight
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::QuadrupoleParams;
    use crate::spinops::Spin;

    fn params() -> SpinSystemParams {
        SpinSystemParams::new(
            QuadrupoleParams::new(3.2e6, 0.2, Spin::THREE_HALVES).unwrap(),
            130.9e6,
            0.0,
            30e3,
        )
        .unwrap()
    }

    fn to_vec3(alpha: f64, beta: f64) -> Vec3 {
        Vec3 {
            x: beta.sin() * alpha.cos(),
            y: beta.sin() * alpha.sin(),
            z: beta.cos(),
        }
    }

    #[test]
    fn rejects_empty_request() {
        assert!(repulsion_orientations(0, 10, 1).is_err());
    }

    #[test]
    fn single_point_is_fine() {
        let pts = repulsion_orientations(1, 100, 42).unwrap();
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn potential_never_increases() {
        // Re-run the relaxation manually, recomputing the potential after
        // every accepted iteration.
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut points: Vec<Vec3> = (0..n)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..TAU);
                let r = (1.0 - z * z).sqrt();
                Vec3 { x: r * phi.cos(), y: r * phi.sin(), z }
            })
            .collect();
        let base_step = 5.0 / (n as f64).powf(1.5);
        let mut damping = 1.0f64;
        let mut phi_cur = pair_potential(&points);
        let mut history = vec![phi_cur];
        for iter in 0..1000 {
            let forces = repulsion_forces(&points);
            let decay = 1.0 / (1.0 + iter as f64 / 100.0);
            loop {
                let trial = relax_step(&points, &forces, base_step * decay * damping);
                let phi_trial = pair_potential(&trial);
                if phi_trial <= phi_cur {
                    points = trial;
                    phi_cur = phi_trial;
                    damping = (damping * 1.1).min(1.0);
                    break;
                }
                damping *= 0.5;
                assert!(damping > 1e-18, "step underflow before 1000 iterations");
            }
            history.push(phi_cur);
        }
        for w in history.windows(2) {
            assert!(w[1] <= w[0], "potential increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn relaxation_spreads_points_apart() {
        let n = 16;
        let seed = 3;
        let start = repulsion_orientations(n, 0, seed).unwrap();
        let relaxed = repulsion_orientations(n, 1000, seed).unwrap();

        let min_dist = |pts: &[(f64, f64)]| -> f64 {
            let v: Vec<Vec3> = pts.iter().map(|&(a, b)| to_vec3(a, b)).collect();
            let mut best = f64::INFINITY;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    let dx = v[i].x - v[j].x;
                    let dy = v[i].y - v[j].y;
                    let dz = v[i].z - v[j].z;
                    best = best.min((dx * dx + dy * dy + dz * dz).sqrt());
                }
            }
            best
        };
        assert!(
            min_dist(&relaxed) > min_dist(&start),
            "relaxation did not increase the minimum pairwise distance"
        );
    }

    #[test]
    fn repulsion_is_deterministic() {
        let a = repulsion_orientations(24, 500, 7).unwrap();
        let b = repulsion_orientations(24, 500, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ensemble_counts_weights_and_scales() {
        let spec = PowderSpec::default();
        let members = build_ensemble(&spec, &params(), 1).unwrap();
        assert_eq!(members.len(), 450);
        let wsum: f64 = members.iter().map(|m| m.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        for m in &members {
            assert!((m.weight - 1.0 / 450.0).abs() < 1e-15);
        }
        for scale in [0.95, 1.0, 1.05] {
            let count = members.iter().filter(|m| m.rf_scale == scale).count();
            assert_eq!(count, 150);
        }
    }

    #[test]
    fn trivial_ensemble() {
        let spec = PowderSpec::new(1, 1, vec![1.0]).unwrap();
        let members = build_ensemble(&spec, &params(), 5).unwrap();
        assert_eq!(members.len(), 1);
        assert_eq!(members[0].weight, 1.0);
    }

    #[test]
    fn gamma_steps_are_equidistant() {
        let mut spec = PowderSpec::new(2, 2, vec![1.0]).unwrap();
        spec.repulsion_iterations = 50;
        let members = build_ensemble(&spec, &params(), 5).unwrap();
        let mut gammas: Vec<f64> = members.iter().map(|m| m.orient.gamma).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        assert_eq!(gammas.len(), 2);
        assert!((gammas[0] - 0.0).abs() < 1e-15);
        assert!((gammas[1] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn serialization_is_deterministic() {
        let spec = PowderSpec::new(4, 2, vec![0.95, 1.05]).unwrap();
        let mut spec = spec;
        spec.repulsion_iterations = 200;
        let a = build_ensemble(&spec, &params(), 11).unwrap();
        let b = build_ensemble(&spec, &params(), 11).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_ensemble_text(&mut buf_a, &a).unwrap();
        write_ensemble_text(&mut buf_b, &b).unwrap();
        assert_eq!(buf_a, buf_b);
        assert!(!buf_a.is_empty());
    }

    #[test]
    fn spec_validation() {
        assert!(PowderSpec::new(0, 1, vec![1.0]).is_err());
        assert!(PowderSpec::new(1, 0, vec![1.0]).is_err());
        assert!(PowderSpec::new(1, 1, vec![]).is_err());
        assert!(PowderSpec::new(1, 1, vec![-0.5]).is_err());
    }
}
