//! Euler–Maruyama integration of the mean-field particle system
//!
//! ```text
//! dX_i = −V'(X_i) dt − (1/N) Σ_j W'(X_i − X_j) dt + √2 dB_i.
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::measures::{mean_field_force, ParticleEnsemble};
use crate::potentials::PotentialSpec;

/// One Euler–Maruyama step; the noise is drawn from `rng` in particle order.
pub fn particle_step(p: &mut ParticleEnsemble, v: &PotentialSpec, w: &PotentialSpec, dt: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let force = mean_field_force(&p.positions, w);
    let amp = (2.0 * dt).sqrt();
    for (x, f) in p.positions.iter_mut().zip(force) {
        let z: f64 = StandardNormal.sample(rng);
        *x += -(v.grad(*x) + f) * dt + amp * z;
        if !x.is_finite() {
            return Err(Error::NonFiniteDrift(*x));
        }
    }
    p.time += dt;
    Ok(())
}

/// Summary of a particle run sampled every `record_every` steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleRecord {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Runs `round(t_end/dt)` steps with noise from the stream seeded by
/// `seed`. The returned ensemble carries `seed`.
pub fn particle_solve(
    p0: &ParticleEnsemble,
    v: &PotentialSpec,
    w: &PotentialSpec,
    dt: f64,
    t_end: f64,
    record_every: usize,
    seed: u64,
) -> Result<(ParticleEnsemble, ParticleRecord)> {
    if !(t_end > 0.0) || record_every == 0 {
        return Err(Error::Invalid("need t_end > 0 and record_every ≥ 1".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = p0.clone();
    p.seed = seed;
    let mut rec = ParticleRecord::default();
    let push = |p: &ParticleEnsemble, rec: &mut ParticleRecord| {
        rec.times.push(p.time);
        rec.mean.push(p.mean());
        rec.variance.push(p.variance());
    };
    push(&p, &mut rec);
    for k in 1..=steps {
        particle_step(&mut p, v, w, dt, &mut rng)?;
        if k % record_every == 0 || k == steps {
            push(&p, &mut rec);
        }
    }
    Ok((p, rec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fit::fit_exponential;

    fn pot(name: &str, p: &[f64]) -> PotentialSpec {
        PotentialSpec::builtin(name, p).unwrap()
    }

    #[test]
    fn brownian_variance_growth() {
        let n = 100_000;
        let p = ParticleEnsemble::new(vec![0.0; n], 0, 0.0).unwrap();
        let z = pot("zero", &[]);
        let dt = 0.01;
        let (out, _) = particle_solve(&p, &z, &z, dt, 5.0 * dt, 1, 21).unwrap();
        let var = out.variance();
        let expect = 2.0 * 5.0 * dt;
        // sample variance of a Gaussian has sd σ²√(2/n)
        assert!((var - expect).abs() < 3.0 * expect * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn interaction_keeps_the_mean() {
        let n = 5000;
        let init: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64 + 0.3).collect();
        let p = ParticleEnsemble::new(init, 0, 0.0).unwrap();
        let dt = 1e-3;
        let (out, rec) = particle_solve(&p, &pot("zero", &[]), &pot("quadratic", &[1.0]), dt, 1.0, 100, 4).unwrap();
        // drift of the mean is pure noise: sd √(2t/N)
        let sd = (2.0 * out.time / n as f64).sqrt();
        assert!((out.mean() - 0.3).abs() < 4.0 * sd);
        assert_eq!(rec.times.len(), 11);
    }

    #[test]
    fn ou_mean_decay() {
        let n = 20_000;
        let p = ParticleEnsemble::new(vec![3.0; n], 0, 0.0).unwrap();
        let (_, rec) = particle_solve(&p, &pot("quadratic", &[1.0]), &pot("zero", &[]), 1e-3, 2.0, 50, 8).unwrap();
        let fit = fit_exponential(&rec.times, &rec.mean, None).unwrap();
        assert!((fit.lambda_fit - 1.0).abs() < 0.05);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = ParticleEnsemble::new(vec![0.5, -0.2, 1.0], 0, 0.0).unwrap();
        let (v, w) = (pot("quadratic", &[1.0]), pot("cubic_abs", &[]));
        let a = particle_solve(&p, &v, &w, 1e-2, 0.5, 5, 99).unwrap();
        let b = particle_solve(&p, &v, &w, 1e-2, 0.5, 5, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.seed, 99);
    }
}
