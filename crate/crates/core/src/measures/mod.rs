//! Probability measures on a truncated 1-D grid and as particle ensembles.

mod convolution;
mod grid;
mod particles;

pub use convolution::{convolve_grad_w, convolve_w};
pub(crate) use convolution::{conv_value, require_even};
pub use grid::{GridMeasure, GridSpec};
pub use particles::{mean_field_force, ParticleEnsemble};

use crate::error::Result;
use crate::potentials::PotentialSpec;

/// Midpoint-rule mean and raw second moment.
pub fn moments(mu: &GridMeasure) -> (f64, f64) {
    mu.moments()
}

pub fn second_moment(mu: &GridMeasure) -> f64 {
    mu.moments().1
}

pub fn particles_to_grid(p: &ParticleEnsemble, lo: f64, hi: f64, m: usize) -> Result<GridMeasure> {
    p.to_grid(lo, hi, m)
}

pub fn sample_from_grid(mu: &GridMeasure, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    ParticleEnsemble::sample_from_grid(mu, n, seed)
}

/// The three terms of the free energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergyParts {
    pub entropy: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl FreeEnergyParts {
    pub fn total(&self) -> f64 {
        self.entropy + self.potential + self.interaction
    }
}

/// `∫ρ log ρ + ∫V ρ + ½∬W(x−y)ρ(x)ρ(y)` by midpoint quadrature, with
/// `0 log 0 = 0`.
pub fn free_energy(mu: &GridMeasure, v: &PotentialSpec, w: &PotentialSpec) -> Result<f64> {
    Ok(free_energy_parts(mu, v, w)?.total())
}

pub fn free_energy_parts(mu: &GridMeasure, v: &PotentialSpec, w: &PotentialSpec) -> Result<FreeEnergyParts> {
    require_even(w)?;
    let v_vals: Vec<f64> = mu.centers().iter().map(|&x| v.value(x)).collect();
    let w_conv = conv_value(&mu.grid(), mu.density(), w);
    Ok(free_energy_with(mu.density(), mu.dx(), &v_vals, &w_conv))
}

/// Free energy from precomputed `V` values and `W * ρ`.
pub(crate) fn free_energy_with(rho: &[f64], dx: f64, v_vals: &[f64], w_conv: &[f64]) -> FreeEnergyParts {
    let (mut ent, mut pot, mut int) = (0.0, 0.0, 0.0);
    for ((&r, &vv), &wc) in rho.iter().zip(v_vals).zip(w_conv) {
        if r > 0.0 {
            ent += r * r.ln();
            pot += vv * r;
            int += wc * r;
        }
    }
    FreeEnergyParts {
        entropy: ent * dx,
        potential: pot * dx,
        interaction: 0.5 * int * dx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pot(name: &str, p: &[f64]) -> PotentialSpec {
        PotentialSpec::builtin(name, p).unwrap()
    }

    #[test]
    fn uniform_entropy_is_zero() {
        let mu = GridMeasure::uniform(GridSpec::new(0.0, 1.0, 500).unwrap(), 0.0, 1.0).unwrap();
        let f = free_energy(&mu, &pot("zero", &[]), &pot("zero", &[])).unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn gaussian_entropy() {
        let mu = GridMeasure::gaussian(GridSpec::new(-10.0, 10.0, 2000).unwrap(), 0.0, 1.0).unwrap();
        let f = free_energy(&mu, &pot("zero", &[]), &pot("zero", &[])).unwrap();
        let exact = -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((f - exact).abs() < 1e-3);
    }

    #[test]
    fn uniform_in_quadratic_well() {
        let mu = GridMeasure::uniform(GridSpec::new(0.0, 1.0, 1000).unwrap(), 0.0, 1.0).unwrap();
        let f = free_energy(&mu, &pot("quadratic", &[1.0]), &pot("zero", &[])).unwrap();
        // midpoint rule error for ∫x²/2 is dx²/24
        assert!((f - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn interaction_term_for_quadratic_kernel() {
        // ½∬(x−y)²/2 = variance/2
        let mu = GridMeasure::gaussian(GridSpec::new(-12.0, 12.0, 1200).unwrap(), 0.5, 1.5).unwrap();
        let parts = free_energy_parts(&mu, &pot("zero", &[]), &pot("quadratic", &[1.0])).unwrap();
        let (m1, m2) = mu.moments();
        assert!((parts.interaction - 0.5 * (m2 - m1 * m1)).abs() < 1e-12);
    }

    #[test]
    fn refinement_changes_free_energy_by_o_dx() {
        let v = pot("double_well", &[1.0]);
        let w = pot("cubic_abs", &[]);
        let f = |m| {
            let mu = GridMeasure::from_fn(GridSpec::new(-4.0, 4.0, m).unwrap(), |x| (-x * x).exp()).unwrap();
            free_energy(&mu, &v, &w).unwrap()
        };
        let (a, b) = (f(200), f(400));
        assert!((a - b).abs() < 8.0 / 200.0);
    }
}
