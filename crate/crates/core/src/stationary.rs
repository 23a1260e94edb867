//! Stationary states: solutions of `log μ + V + W * μ = λ`, computed as
//! fixed points of the Gibbs map `μ ↦ e^{−V − W*μ} / Z`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measures::{conv_value, free_energy, require_even, GridMeasure, GridSpec};
use crate::potentials::{Family, Lattice, PotentialSpec};
use crate::transport::{probe_maps, pushforward, ProbeOptions, TransportMap};

/// Cells below this density are ignored by `λ` and the residual.
pub const RESIDUAL_FLOOR: f64 = 1e-10;
/// Consecutive increases of the update size that count as oscillation.
const OSCILLATION_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    pub mu: GridMeasure,
    /// The constant `λ` in `log μ + V + W * μ = λ`.
    pub lambda_mult: f64,
    pub residual_inf: f64,
    pub iterations: usize,
    pub pinned_mean: Option<f64>,
}

impl StationaryState {
    /// Density CSV preceded by `# lo=.. hi=..` and
    /// `# lambda=<f> residual=<e> iters=<n>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# lambda={:e} residual={:e} iters={}",
            self.lambda_mult, self.residual_inf, self.iterations
        );
        out.push_str(&self.mu.to_csv());
        out
    }
}

/// `(λ, sup |log ρ + Φ − λ|)` over cells with `ρ > RESIDUAL_FLOOR`, `λ` the
/// density-weighted mean of `log ρ + Φ`.
fn lambda_and_residual(rho: &[f64], phi: &[f64]) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (&r, &p) in rho.iter().zip(phi) {
        if r > RESIDUAL_FLOOR {
            num += r * (r.ln() + p);
            den += r;
        }
    }
    if den == 0.0 {
        return (f64::NAN, f64::INFINITY);
    }
    let lambda = num / den;
    let res = rho
        .iter()
        .zip(phi)
        .filter(|(r, _)| **r > RESIDUAL_FLOOR)
        .map(|(r, p)| (r.ln() + p - lambda).abs())
        .fold(0.0, f64::max);
    (lambda, res)
}

fn potential(mu: &GridMeasure, v_vals: &[f64], w: &PotentialSpec) -> Vec<f64> {
    let wc = conv_value(&mu.grid(), mu.density(), w);
    v_vals.iter().zip(wc).map(|(v, c)| v + c).collect()
}

/// Damped Gibbs iteration `μ ← (1−θ)μ + θ·e^{−V−W*μ}/Z`.
#[derive(Debug, Clone)]
pub struct FixedPointSolver {
    pub grid: GridSpec,
    pub pin_mean: Option<f64>,
    pub damping: f64,
    /// Stop when the L¹ size of an update and the stationarity residual
    /// both fall below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting density (default: unit Gaussian at the pinned mean or the
    /// grid centre).
    pub init: Option<GridMeasure>,
}

impl FixedPointSolver {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            pin_mean: None,
            damping: 0.5,
            tol: 1e-12,
            max_iter: 20_000,
            init: None,
        }
    }

    pub fn pin(mut self, mean: f64) -> Self {
        self.pin_mean = Some(mean);
        self
    }

    pub fn damping(mut self, theta: f64) -> Self {
        self.damping = theta;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn init(mut self, mu: GridMeasure) -> Self {
        self.init = Some(mu);
        self
    }

    pub fn solve(&self, v: &PotentialSpec, w: &PotentialSpec) -> Result<StationaryState> {
        require_even(w)?;
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Invalid(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if v.is_zero() && self.pin_mean.is_none() {
            return Err(Error::PinRequired);
        }
        let grid = self.grid;
        let v_vals: Vec<f64> = grid.centers().iter().map(|&x| v.value(x)).collect();
        let mut mu = match &self.init {
            Some(m) if m.grid() == grid => m.clone().normalized()?,
            Some(_) => return Err(Error::InvalidGrid("initializer lives on a different grid".into())),
            None => {
                let c = self.pin_mean.unwrap_or(0.5 * (grid.lo + grid.hi));
                GridMeasure::gaussian(grid, c, 1.0)?
            }
        };
        if let Some(m) = self.pin_mean {
            mu = mu.translated(m - mu.mean());
        }
        let theta = self.damping;
        let mut prev_change = f64::INFINITY;
        let mut rising = 0usize;
        for it in 0..=self.max_iter {
            let phi = potential(&mu, &v_vals, w);
            // An L¹-small update can still leave O(1) relative error in tail
            // cells, so the residual must reach `tol` as well.
            if prev_change < self.tol {
                let (lambda, res) = lambda_and_residual(mu.density(), &phi);
                if res < self.tol {
                    return Ok(StationaryState {
                        mu,
                        lambda_mult: lambda,
                        residual_inf: res,
                        iterations: it,
                        pinned_mean: self.pin_mean,
                    });
                }
            }
            if it == self.max_iter {
                break;
            }
            let g = GridMeasure::gibbs(grid, &phi)?;
            let next: Vec<f64> = mu
                .density()
                .iter()
                .zip(g.density())
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect();
            let mut next_mu = GridMeasure::new(grid, next)?.normalized()?;
            if let Some(m) = self.pin_mean {
                let shift = m - next_mu.mean();
                if shift != 0.0 {
                    next_mu = next_mu.translated(shift);
                }
            }
            let change = next_mu.l1_distance(&mu);
            mu = next_mu;
            if change > prev_change && change >= self.tol {
                rising += 1;
                if rising >= OSCILLATION_WINDOW {
                    return Err(Error::Oscillation(rising));
                }
            } else {
                rising = 0;
            }
            prev_change = change;
        }
        Err(Error::MaxIterations(self.max_iter))
    }
}

/// Functional form of [`FixedPointSolver`].
#[allow(clippy::too_many_arguments)]
pub fn fixed_point_solve(
    v: &PotentialSpec,
    w: &PotentialSpec,
    grid: GridSpec,
    pin_mean: Option<f64>,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryState> {
    let mut s = FixedPointSolver::new(grid).damping(damping).tol(tol).max_iter(max_iter);
    s.pin_mean = pin_mean;
    s.solve(v, w)
}

/// Recomputes `sup |log ρ + V + W*ρ − λ|` with `λ` refitted.
pub fn stationarity_residual(s: &StationaryState, v: &PotentialSpec, w: &PotentialSpec) -> f64 {
    measure_residual(&s.mu, v, w)
}

/// The residual of an arbitrary density.
pub fn measure_residual(mu: &GridMeasure, v: &PotentialSpec, w: &PotentialSpec) -> f64 {
    let v_vals: Vec<f64> = mu.centers().iter().map(|&x| v.value(x)).collect();
    let phi = potential(mu, &v_vals, w);
    lambda_and_residual(mu.density(), &phi).1
}

/// Free energy of `T#μ` by change of variables on the grid of `μ`:
/// `∫ρ log(ρ/T') + ∫V(T)ρ + ½∬W(Tx − Ty)ρρ`.
pub fn free_energy_after(mu: &GridMeasure, t: &TransportMap, v: &PotentialSpec, w: &PotentialSpec) -> Result<f64> {
    let (tv, dtv) = t.tabulate(mu);
    let wts = mu.weights();
    let rho = mu.density();
    let mut idx = Vec::new();
    let (mut ent, mut pot) = (0.0, 0.0);
    for i in 0..rho.len() {
        if wts[i] <= 0.0 {
            continue;
        }
        if !(dtv[i] > 0.0) {
            return Err(Error::NonMonotoneMap(mu.grid().center(i)));
        }
        ent += wts[i] * (rho[i] / dtv[i]).ln();
        pot += wts[i] * v.value(tv[i]);
        idx.push(i);
    }
    let int = match w.family() {
        Family::Zero => 0.0,
        Family::Quadratic { a, offset } => {
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for &i in &idx {
                s0 += wts[i];
                s1 += wts[i] * tv[i];
                s2 += wts[i] * tv[i] * tv[i];
            }
            0.5 * (a * (s0 * s2 - s1 * s1) + offset * s0 * s0)
        }
        _ => {
            let mut acc = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                let mut row = 0.5 * w.value(0.0) * wts[i];
                for &j in &idx[..k] {
                    row += wts[j] * w.value(tv[i] - tv[j]);
                }
                acc += wts[i] * row;
            }
            acc
        }
    };
    Ok(ent + pot + int)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub holds: bool,
    /// `min_k F(T_k#μ) − F(μ)`.
    pub min_delta: f64,
    pub worst_probe: usize,
    pub probes: usize,
}

/// Checks `F(μ) ≤ F(T#μ) + 1e-9` over random monotone maps (mean preserving
/// when `V = 0`). Translations are included when `V ≠ 0`. `T#μ` is the grid
/// pushforward; the change-of-variables form in [`free_energy_after`] is
/// off by O(dx) wherever a knot of a piecewise map falls inside a cell.
pub fn minimizer_audit(
    s: &StationaryState,
    v: &PotentialSpec,
    w: &PotentialSpec,
    n_perturbations: usize,
    seed: u64,
) -> Result<AuditReport> {
    let opts = ProbeOptions::new(n_perturbations, seed, v.is_zero());
    let maps = probe_maps(&s.mu, opts)?;
    let f0 = free_energy(&s.mu, v, w)?;
    let mut min_delta = f64::INFINITY;
    let mut worst = 0;
    for (k, t) in maps.iter().enumerate() {
        let d = free_energy(&pushforward(&s.mu, t, s.mu.grid())?, v, w)? - f0;
        if d < min_delta {
            min_delta = d;
            worst = k;
        }
    }
    Ok(AuditReport {
        holds: min_delta >= -1e-9,
        min_delta,
        worst_probe: worst,
        probes: maps.len(),
    })
}

/// Existence cases for minimizers of the free energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoercivityCase {
    /// `V = 0`, `W` convex with `W ≥ b|x|² − b'`.
    I,
    /// `V ≥ a|x| − a'`, `W ≥ b|x|² − b'`.
    Ii,
    /// `V ≥ a|x|² − a'`, `W ≥ b|x|² − b'`, `b > −a`.
    Iii,
    /// `W` bounded below, `e^{−V}` satisfying a transport inequality.
    Iv,
}

impl std::str::FromStr for CoercivityCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i" => Ok(Self::I),
            "ii" => Ok(Self::Ii),
            "iii" => Ok(Self::Iii),
            "iv" => Ok(Self::Iv),
            other => Err(Error::Invalid(format!("unknown coercivity case '{other}'"))),
        }
    }
}

/// Lower envelope `f(x) ≥ a|x|^k − a'` fitted on a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub a: f64,
    pub a_prime: f64,
}

/// `a` is the smallest `f(x)/|x|^k` over the outer half of the lattice and
/// `a'` the smallest offset making the envelope hold everywhere.
pub fn fit_envelope(p: &PotentialSpec, power: f64, lattice: &Lattice) -> Envelope {
    let pts = lattice.points();
    let reach = pts.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let a = pts
        .iter()
        .filter(|x| x.abs() >= 0.5 * reach && x.abs() > 0.0)
        .map(|&x| p.value(x) / x.abs().powf(power))
        .fold(f64::INFINITY, f64::min);
    let a_prime = pts
        .iter()
        .map(|&x| a * x.abs().powf(power) - p.value(x))
        .fold(f64::NEG_INFINITY, f64::max);
    Envelope { a, a_prime }
}

/// True when `f(x) ≥ a|x|^k − a'` at every lattice point.
pub fn envelope_holds(p: &PotentialSpec, power: f64, env: Envelope, lattice: &Lattice) -> bool {
    lattice
        .points()
        .iter()
        .all(|&x| p.value(x) >= env.a * x.abs().powf(power) - env.a_prime - 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    pub case: CoercivityCase,
    pub v_envelope: Option<Envelope>,
    pub w_envelope: Envelope,
    pub holds: bool,
    /// `∫e^{−V}` and the second moment of `e^{−V}/Z` (case iv).
    pub gibbs_mass: Option<f64>,
    pub gibbs_second_moment: Option<f64>,
    /// The transport-inequality constant is never certified here.
    pub talagrand_verified: bool,
}

pub fn coercivity_diagnostics(
    v: &PotentialSpec,
    w: &PotentialSpec,
    case: CoercivityCase,
    lattice: &Lattice,
) -> CoercivityReport {
    let w_env = fit_envelope(w, 2.0, lattice);
    let mut report = CoercivityReport {
        case,
        v_envelope: None,
        w_envelope: w_env,
        holds: false,
        gibbs_mass: None,
        gibbs_second_moment: None,
        talagrand_verified: false,
    };
    match case {
        CoercivityCase::I => {
            report.holds = v.is_zero() && w.alpha >= 0.0 && w_env.a > 0.0;
        }
        CoercivityCase::Ii => {
            let ve = fit_envelope(v, 1.0, lattice);
            report.holds = ve.a > 0.0 && w_env.a > 0.0;
            report.v_envelope = Some(ve);
        }
        CoercivityCase::Iii => {
            let ve = fit_envelope(v, 2.0, lattice);
            report.holds = ve.a > 0.0 && w_env.a > -ve.a;
            report.v_envelope = Some(ve);
        }
        CoercivityCase::Iv => {
            let pts = lattice.points();
            let w_min = pts.iter().map(|&x| w.value(x)).fold(f64::INFINITY, f64::min);
            let (mut z, mut m2) = (0.0, 0.0);
            for &x in &pts {
                let e = (-v.value(x)).exp();
                z += e * lattice.step;
                m2 += x * x * e * lattice.step;
            }
            let tail = (-v.value(lattice.lo)).exp().max((-v.value(lattice.hi)).exp());
            report.gibbs_mass = Some(z);
            report.gibbs_second_moment = Some(m2 / z);
            report.holds = w_min.is_finite() && z.is_finite() && z > 0.0 && tail < 1e-8 * z;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{pde_step, Scheme};
    use crate::transport::wasserstein2;

    fn pot(name: &str, p: &[f64]) -> PotentialSpec {
        PotentialSpec::builtin(name, p).unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec::new(-10.0, 10.0, 400).unwrap()
    }

    #[test]
    fn quadratic_confinement_gives_standard_gaussian() {
        let s = FixedPointSolver::new(grid()).solve(&pot("quadratic", &[1.0]), &pot("zero", &[])).unwrap();
        let n = GridMeasure::gaussian(grid(), 0.0, 1.0).unwrap();
        assert!(wasserstein2(&s.mu, &n).unwrap() < 2.0 * grid().dx());
        assert!(s.residual_inf < 1e-8);
        // λ = −log Z = −½ log 2π
        assert!((s.lambda_mult + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-6);
    }

    #[test]
    fn quadratic_interaction_gives_standard_gaussian() {
        let s = FixedPointSolver::new(grid()).pin(0.0).solve(&pot("zero", &[]), &pot("quadratic", &[1.0])).unwrap();
        let n = GridMeasure::gaussian(grid(), 0.0, 1.0).unwrap();
        assert!(wasserstein2(&s.mu, &n).unwrap() < 2.0 * grid().dx());
    }

    #[test]
    fn cubic_interaction_even_state() {
        let s = FixedPointSolver::new(grid()).pin(0.0).solve(&pot("zero", &[]), &pot("cubic_abs", &[])).unwrap();
        assert!(s.residual_inf < 1e-6);
        let d = s.mu.density();
        let m = d.len();
        for i in 0..m {
            assert!((d[i] - d[m - 1 - i]).abs() < 1e-10);
        }
        assert!((stationarity_residual(&s, &pot("zero", &[]), &pot("cubic_abs", &[])) - s.residual_inf).abs() < 1e-12);
        let next = pde_step(&s.mu, &pot("zero", &[]), &pot("cubic_abs", &[]), 1e-3, Scheme::SemiImplicit).unwrap();
        assert!(next.l1_distance(&s.mu) < 1e-6 * 1e-3);
    }

    #[test]
    fn pin_is_required_without_confinement() {
        let r = FixedPointSolver::new(grid()).solve(&pot("zero", &[]), &pot("cubic_abs", &[]));
        assert!(matches!(r, Err(Error::PinRequired)));
        assert!(FixedPointSolver::new(grid()).damping(0.0).solve(&pot("quadratic", &[1.0]), &pot("zero", &[])).is_err());
        let r = FixedPointSolver::new(grid()).pin(0.0).max_iter(2).solve(&pot("zero", &[]), &pot("cubic_abs", &[]));
        assert!(matches!(r, Err(Error::MaxIterations(2))));
    }

    #[test]
    fn residual_examples() {
        let g = grid();
        let n = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let v = pot("quadratic", &[1.0, 0.5 * (2.0 * std::f64::consts::PI).ln()]);
        assert!(measure_residual(&n, &v, &pot("zero", &[])) < 1e-8);
        let perturbed = GridMeasure::new(g, n.density().iter().zip(g.centers()).map(|(r, x)| r * (1.0 + 0.01 * x.sin())).collect())
            .unwrap()
            .normalized()
            .unwrap();
        assert!(measure_residual(&perturbed, &v, &pot("zero", &[])) > 1e-3);
    }

    #[test]
    fn audits() {
        let (quad, zero, cubic) = (pot("quadratic", &[1.0]), pot("zero", &[]), pot("cubic_abs", &[]));
        let s = FixedPointSolver::new(grid()).solve(&quad, &zero).unwrap();
        assert!(minimizer_audit(&s, &quad, &zero, 60, 1).unwrap().holds);
        let c = FixedPointSolver::new(grid()).pin(0.0).solve(&zero, &cubic).unwrap();
        let rep = minimizer_audit(&c, &zero, &cubic, 200, 2).unwrap();
        assert!(rep.holds, "{rep:?}");
        let mut shifted = s.clone();
        shifted.mu = s.mu.translated(1.0);
        assert!(!minimizer_audit(&shifted, &quad, &zero, 60, 1).unwrap().holds);
    }

    #[test]
    fn free_energy_after_identity_matches_grid_value() {
        let g = grid();
        let mu = GridMeasure::gaussian(g, 0.3, 1.2).unwrap();
        for (v, w) in [(pot("double_well", &[1.0]), pot("cubic_abs", &[])), (pot("zero", &[]), pot("quadratic", &[2.0, 0.1]))] {
            let a = free_energy_after(&mu, &TransportMap::Identity, &v, &w).unwrap();
            let b = crate::measures::free_energy(&mu, &v, &w).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn coercivity_cases() {
        let lat = Lattice::new(-10.0, 10.0, 0.01);
        let r = coercivity_diagnostics(&pot("quadratic", &[1.0]), &pot("zero", &[]), CoercivityCase::Iii, &lat);
        let ve = r.v_envelope.unwrap();
        assert!((ve.a - 0.5).abs() < 1e-12 && ve.a_prime.abs() < 1e-12);
        assert!(r.holds);
        let ph = pot("pseudo_huber", &[]);
        assert!(envelope_holds(&ph, 1.0, Envelope { a: 1.0, a_prime: 0.0 }, &lat));
        let r = coercivity_diagnostics(&ph, &pot("quadratic", &[1.0]), CoercivityCase::Ii, &lat);
        assert!(r.holds && r.v_envelope.unwrap().a >= 1.0);
        let cubic = pot("cubic_abs", &[]);
        let r = coercivity_diagnostics(&pot("zero", &[]), &cubic, CoercivityCase::I, &lat);
        assert!(r.holds && r.w_envelope.a > 0.0);
        assert!(envelope_holds(&cubic, 2.0, r.w_envelope, &lat));
        // |x|³ ≥ x² fails for |x| < 1
        assert!(!envelope_holds(&cubic, 2.0, Envelope { a: 1.0, a_prime: 0.0 }, &lat));
        let r = coercivity_diagnostics(&pot("quadratic", &[1.0]), &pot("gauss_well", &[0.1]), CoercivityCase::Iv, &lat);
        assert!(r.holds && !r.talagrand_verified);
        assert!((r.gibbs_second_moment.unwrap() - 1.0).abs() < 1e-6);
    }
}
