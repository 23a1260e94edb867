//! Time integration of the granular-media equation on the grid and with
//! interacting particles.

mod particles;
mod pde;

pub use particles::{particle_solve, particle_step, ParticleRecord};
pub use pde::{pde_step, PdeStepper, StepInfo};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measures::GridMeasure;
use crate::potentials::PotentialSpec;
use crate::transport::{brenier_map, dissipation_j, wasserstein2, wasserstein2_sq};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward Euler in the density with the potential frozen per step.
    SemiImplicit,
    /// Forward Euler with adaptive sub-stepping.
    Explicit,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi_implicit" => Ok(Self::SemiImplicit),
            "explicit" => Ok(Self::Explicit),
            other => Err(Error::Invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Explicit steps need `dt ≤ 0.45 dx²`.
pub(crate) fn check_explicit_guard(dt: f64, dx: f64) -> Result<()> {
    let limit = 0.45 * dx * dx;
    if dt > limit {
        Err(Error::StabilityGuard { dt, limit })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub scheme: Scheme,
    /// Clamp negative cells to zero and renormalize (logged).
    pub clamp_negative: bool,
    /// Undo the drift of the mean after each step when `V = 0`.
    pub conserve_center_of_mass: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, record_every: usize) -> Result<Self> {
        if !(dt > 0.0) || !(t_end > 0.0) || record_every == 0 {
            return Err(Error::Invalid(format!(
                "need dt > 0, t_end > 0, record_every ≥ 1 (dt={dt}, t_end={t_end}, record_every={record_every})"
            )));
        }
        Ok(Self {
            dt,
            t_end,
            record_every,
            scheme: Scheme::SemiImplicit,
            clamp_negative: true,
            conserve_center_of_mass: true,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Checks the scheme guard for grid spacing `dx`.
    pub fn validate(&self, dx: f64) -> Result<()> {
        match self.scheme {
            Scheme::Explicit => check_explicit_guard(self.dt, dx),
            Scheme::SemiImplicit => Ok(()),
        }
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }

    fn stepper(&self, mu: &GridMeasure, v: &PotentialSpec, w: &PotentialSpec) -> Result<PdeStepper> {
        Ok(PdeStepper::new(mu, v, w, self.scheme)?
            .with_clamp(self.clamp_negative)
            .with_center_of_mass_correction(self.conserve_center_of_mass))
    }
}

/// Conservation and validity diagnostics accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunDiagnostics {
    pub steps: usize,
    pub max_mass_error: f64,
    pub clamped_mass: f64,
    /// Largest increase of the free energy over one step.
    pub max_free_energy_increase: f64,
    /// Largest density in the two boundary cells.
    pub max_boundary_density: f64,
    /// Sum of `|mean shift|` undone by the centre-of-mass correction.
    pub com_correction: f64,
    /// Largest `|mean(t) − mean(0)|`.
    pub max_mean_drift: f64,
}

impl RunDiagnostics {
    /// Clamped mass ≤ 1e-9 and boundary cells ≤ 1e-10.
    pub fn is_valid(&self) -> bool {
        self.clamped_mass <= 1e-9 && self.max_boundary_density <= 1e-10
    }

    fn absorb(&mut self, info: &StepInfo, mu: &GridMeasure, mean0: f64) {
        self.steps += 1;
        self.max_mass_error = self.max_mass_error.max(info.mass_error);
        self.clamped_mass += info.clamped_mass;
        self.com_correction += info.com_correction.abs();
        let d = mu.density();
        self.max_boundary_density = self.max_boundary_density.max(d[0]).max(d[d.len() - 1]);
        self.max_mean_drift = self.max_mean_drift.max((mu.mean() - mean0).abs());
    }

    fn merge(&mut self, other: &RunDiagnostics) {
        self.steps = self.steps.max(other.steps);
        self.max_mass_error = self.max_mass_error.max(other.max_mass_error);
        self.clamped_mass += other.clamped_mass;
        self.max_free_energy_increase = self.max_free_energy_increase.max(other.max_free_energy_increase);
        self.max_boundary_density = self.max_boundary_density.max(other.max_boundary_density);
        self.com_correction += other.com_correction;
        self.max_mean_drift = self.max_mean_drift.max(other.max_mean_drift);
    }
}

/// Observables recorded along a trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// W₂ to the reference (NaN without one; the partner in pair runs).
    pub w2_to_ref: Vec<f64>,
    pub free_energy: Vec<f64>,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// `(W₂², J)` between paired solutions.
    pub dissipation_pairs: Option<(Vec<f64>, Vec<f64>)>,
    pub diagnostics: RunDiagnostics,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, mu: &GridMeasure, fe: f64, w2: f64) {
        let (m1, m2) = mu.moments();
        self.times.push(t);
        self.w2_to_ref.push(w2);
        self.free_energy.push(fe);
        self.mean.push(m1);
        self.second_moment.push(m2);
    }

    /// CSV `t,w2,free_energy,mean,second_moment[,w2_pair_sq,j]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,w2,free_energy,mean,second_moment");
        if self.dissipation_pairs.is_some() {
            out.push_str(",w2_pair_sq,j");
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                self.times[k], self.w2_to_ref[k], self.free_energy[k], self.mean[k], self.second_moment[k]
            );
            if let Some((w, j)) = &self.dissipation_pairs {
                let _ = write!(out, ",{:e},{:e}", w[k], j[k]);
            }
            out.push('\n');
        }
        out
    }

    pub fn sup_second_moment(&self) -> f64 {
        self.second_moment.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A finished run: its record and final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub record: TrajectoryRecord,
    pub final_state: GridMeasure,
}

fn record_step(k: usize, steps: usize, every: usize) -> bool {
    k.is_multiple_of(every) || k == steps
}

/// Integrates from `mu0` to `cfg.t_end`, recording every `record_every`
/// steps (and at the final step).
pub fn pde_solve(
    mu0: &GridMeasure,
    v: &PotentialSpec,
    w: &PotentialSpec,
    cfg: &SolverConfig,
    reference: Option<&GridMeasure>,
) -> Result<Trajectory> {
    mu0.require_normalized()?;
    cfg.validate(mu0.dx())?;
    let mut st = cfg.stepper(mu0, v, w)?;
    let mut mu = mu0.clone();
    let mean0 = mu0.mean();
    let steps = cfg.steps();
    let mut rec = TrajectoryRecord::default();
    let w2_ref = |mu: &GridMeasure| -> Result<f64> {
        match reference {
            Some(r) => wasserstein2(mu, r),
            None => Ok(f64::NAN),
        }
    };
    let fe0 = st.free_energy(&mu).total();
    rec.push(0.0, &mu, fe0, w2_ref(&mu)?);
    let mut prev_fe = fe0;
    for k in 1..=steps {
        let info = st.step(&mut mu, cfg.dt)?;
        rec.diagnostics.absorb(&info, &mu, mean0);
        if k > 1 {
            let inc = info.free_energy_before - prev_fe;
            rec.diagnostics.max_free_energy_increase = rec.diagnostics.max_free_energy_increase.max(inc);
        }
        prev_fe = info.free_energy_before;
        if record_step(k, steps, cfg.record_every) {
            let fe = st.free_energy(&mu).total();
            rec.diagnostics.max_free_energy_increase = rec.diagnostics.max_free_energy_increase.max(fe - prev_fe);
            rec.push(k as f64 * cfg.dt, &mu, fe, w2_ref(&mu)?);
        }
    }
    Ok(Trajectory { record: rec, final_state: mu })
}

/// Evolves `mu0` and `nu0` side by side. `w2_to_ref` holds `W₂(μt, νt)`;
/// with `with_j` the record also carries `W₂²` and `J(νt | μt)` from the
/// monotone rearrangement of `μt` onto `νt`.
pub fn pair_run(
    mu0: &GridMeasure,
    nu0: &GridMeasure,
    v: &PotentialSpec,
    w: &PotentialSpec,
    cfg: &SolverConfig,
    with_j: bool,
) -> Result<(Trajectory, Trajectory)> {
    mu0.require_normalized()?;
    nu0.require_normalized()?;
    cfg.validate(mu0.dx())?;
    cfg.validate(nu0.dx())?;
    let mut sa = cfg.stepper(mu0, v, w)?;
    let mut sb = cfg.stepper(nu0, v, w)?;
    let (mut mu, mut nu) = (mu0.clone(), nu0.clone());
    let (ma, mb) = (mu0.mean(), nu0.mean());
    let mut ra = TrajectoryRecord::default();
    let mut rb = TrajectoryRecord::default();
    let mut pairs = (Vec::new(), Vec::new());
    let steps = cfg.steps();
    let (mut pa, mut pb) = (f64::NAN, f64::NAN);

    let mut observe = |t: f64,
                       mu: &GridMeasure,
                       nu: &GridMeasure,
                       sa: &mut PdeStepper,
                       sb: &mut PdeStepper,
                       ra: &mut TrajectoryRecord,
                       rb: &mut TrajectoryRecord|
     -> Result<(f64, f64)> {
        let w2sq = wasserstein2_sq(mu, nu)?;
        let (fa, fb) = (sa.free_energy(mu).total(), sb.free_energy(nu).total());
        ra.push(t, mu, fa, w2sq.sqrt());
        rb.push(t, nu, fb, w2sq.sqrt());
        if with_j {
            let j = dissipation_j(mu, &brenier_map(mu, nu)?, v, w)?;
            pairs.0.push(w2sq);
            pairs.1.push(j);
        }
        Ok((fa, fb))
    };

    observe(0.0, &mu, &nu, &mut sa, &mut sb, &mut ra, &mut rb)?;
    for k in 1..=steps {
        let ia = sa.step(&mut mu, cfg.dt)?;
        let ib = sb.step(&mut nu, cfg.dt)?;
        ra.diagnostics.absorb(&ia, &mu, ma);
        rb.diagnostics.absorb(&ib, &nu, mb);
        if k > 1 {
            ra.diagnostics.max_free_energy_increase = ra.diagnostics.max_free_energy_increase.max(ia.free_energy_before - pa);
            rb.diagnostics.max_free_energy_increase = rb.diagnostics.max_free_energy_increase.max(ib.free_energy_before - pb);
        }
        pa = ia.free_energy_before;
        pb = ib.free_energy_before;
        if record_step(k, steps, cfg.record_every) {
            let (fa, fb) = observe(k as f64 * cfg.dt, &mu, &nu, &mut sa, &mut sb, &mut ra, &mut rb)?;
            ra.diagnostics.max_free_energy_increase = ra.diagnostics.max_free_energy_increase.max(fa - pa);
            rb.diagnostics.max_free_energy_increase = rb.diagnostics.max_free_energy_increase.max(fb - pb);
        }
    }
    if with_j {
        ra.dissipation_pairs = Some(pairs.clone());
        rb.dissipation_pairs = Some(pairs);
    }
    Ok((
        Trajectory {
            record: ra,
            final_state: mu,
        },
        Trajectory {
            record: rb,
            final_state: nu,
        },
    ))
}

/// [`pair_run`] with the dissipation functional recorded. The returned
/// record belongs to `μ` and has merged diagnostics of both runs.
pub fn coupled_dissipation_run(
    mu0: &GridMeasure,
    nu0: &GridMeasure,
    v: &PotentialSpec,
    w: &PotentialSpec,
    cfg: &SolverConfig,
) -> Result<TrajectoryRecord> {
    let (a, b) = pair_run(mu0, nu0, v, w, cfg, true)?;
    let mut rec = a.record;
    rec.diagnostics.merge(&b.record.diagnostics);
    Ok(rec)
}

/// Outcome of the discrete dissipation inequality
/// `(W₂²(t_{k+1}) − W₂²(t_k)) / (2Δt) ≤ −J̄ + rel·|J̄| + abs` with `J̄` the
/// trapezoid average over the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationCheck {
    pub intervals: usize,
    /// Intervals where the inequality fails.
    pub flagged: Vec<usize>,
    /// Largest `slope + J̄ − rel·|J̄|` (positive means violation).
    pub worst_excess: f64,
}

impl DissipationCheck {
    pub fn fraction_ok(&self) -> f64 {
        if self.intervals == 0 {
            return 1.0;
        }
        1.0 - self.flagged.len() as f64 / self.intervals as f64
    }
}

pub fn dissipation_check(rec: &TrajectoryRecord, rel: f64, abs: f64) -> Result<DissipationCheck> {
    let (w2, j) = rec
        .dissipation_pairs
        .as_ref()
        .ok_or_else(|| Error::Invalid("record has no dissipation pairs".into()))?;
    let mut flagged = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let n = rec.times.len();
    for k in 0..n.saturating_sub(1) {
        let dt = rec.times[k + 1] - rec.times[k];
        let slope = (w2[k + 1] - w2[k]) / (2.0 * dt);
        let jbar = 0.5 * (j[k] + j[k + 1]);
        let excess = slope + jbar - rel * jbar.abs();
        worst = worst.max(excess);
        if excess > abs {
            flagged.push(k);
        }
    }
    Ok(DissipationCheck {
        intervals: n.saturating_sub(1),
        flagged,
        worst_excess: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GridSpec;

    fn pot(name: &str, p: &[f64]) -> PotentialSpec {
        PotentialSpec::builtin(name, p).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1.0, 1).is_err());
        assert!(SolverConfig::new(1e-3, 1.0, 0).is_err());
        let cfg = SolverConfig::new(1e-3, 1.0, 1).unwrap().with_scheme(Scheme::Explicit);
        assert!(cfg.validate(0.01).is_err());
        assert!(cfg.validate(0.1).is_ok());
        assert_eq!(cfg.steps(), 1000);
        assert_eq!("explicit".parse::<Scheme>().unwrap(), Scheme::Explicit);
    }

    #[test]
    fn ou_moments() {
        let g = GridSpec::new(-12.0, 12.0, 800).unwrap();
        let mu0 = GridMeasure::gaussian(g, 2.0, 2.0).unwrap();
        let cfg = SolverConfig::new(1e-3, 1.0, 100).unwrap();
        let tr = pde_solve(&mu0, &pot("quadratic", &[1.0]), &pot("zero", &[]), &cfg, None).unwrap();
        let (m1, m2) = tr.final_state.moments();
        let t: f64 = 1.0;
        assert!((m1 - 2.0 * (-t).exp()).abs() < 0.01 * 2.0 * (-t).exp());
        let var = 1.0 + 3.0 * (-2.0 * t).exp();
        assert!((m2 - m1 * m1 - var).abs() < 0.01 * var);
        let fe = &tr.record.free_energy;
        assert!(fe.windows(2).all(|w| w[1] <= w[0] + 1e-8));
        assert!(tr.record.diagnostics.max_mass_error < 1e-12);
    }

    #[test]
    fn stationary_reference_stays_put() {
        let g = GridSpec::new(-10.0, 10.0, 400).unwrap();
        let v = pot("quadratic", &[1.0]);
        let u: Vec<f64> = g.centers().iter().map(|&x| v.value(x)).collect();
        let mu = GridMeasure::gibbs(g, &u).unwrap();
        let cfg = SolverConfig::new(1e-3, 0.5, 50).unwrap();
        let tr = pde_solve(&mu, &v, &pot("zero", &[]), &cfg, Some(&mu)).unwrap();
        assert!(tr.record.w2_to_ref.iter().all(|&d| d < 1e-5));
    }

    #[test]
    fn centre_of_mass_without_confinement() {
        let g = GridSpec::new(-8.0, 8.0, 320).unwrap();
        let mu0 = GridMeasure::from_fn(g, |x| (-(x - 0.5).powi(2)).exp() + 0.5 * (-4.0 * (x + 1.0).powi(2)).exp()).unwrap();
        let cfg = SolverConfig::new(1e-3, 1.0, 100).unwrap();
        let tr = pde_solve(&mu0, &pot("zero", &[]), &pot("cubic_abs", &[]), &cfg, None).unwrap();
        let m0 = tr.record.mean[0];
        assert!(tr.record.mean.iter().all(|m| (m - m0).abs() < 1e-8));
    }

    #[test]
    fn identical_pair_has_no_dissipation() {
        let g = GridSpec::new(-8.0, 8.0, 200).unwrap();
        let mu = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let cfg = SolverConfig::new(1e-3, 0.1, 10).unwrap();
        let rec = coupled_dissipation_run(&mu, &mu, &pot("quadratic", &[1.0]), &pot("cubic_abs", &[]), &cfg).unwrap();
        let (w2, j) = rec.dissipation_pairs.unwrap();
        assert!(w2.iter().all(|&v| v < 1e-20));
        assert!(j.iter().all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn diffusion_contracts() {
        let g = GridSpec::new(-12.0, 12.0, 480).unwrap();
        let a = GridMeasure::gaussian(g, 0.0, 0.6).unwrap();
        let b = GridMeasure::gaussian(g, 0.0, 1.5).unwrap();
        let z = pot("zero", &[]);
        let cfg = SolverConfig::new(1e-3, 1.0, 20).unwrap();
        let (ta, _) = pair_run(&a, &b, &z, &z, &cfg, false).unwrap();
        let w = &ta.record.w2_to_ref;
        assert!(w.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    }

    #[test]
    fn csv_layout() {
        let g = GridSpec::new(-5.0, 5.0, 50).unwrap();
        let mu = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let cfg = SolverConfig::new(1e-2, 0.05, 2).unwrap();
        let z = pot("zero", &[]);
        let rec = coupled_dissipation_run(&mu, &mu, &z, &z, &cfg).unwrap();
        let csv = rec.to_csv();
        assert!(csv.starts_with("t,w2,free_energy,mean,second_moment,w2_pair_sq,j\n"));
        assert_eq!(csv.lines().count(), 1 + rec.len());
        assert_eq!(rec.times, vec![0.0, 0.02, 0.04, 0.05]);
    }
}
