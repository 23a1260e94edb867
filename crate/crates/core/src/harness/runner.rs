//! Experiments behind the CLI.
//!
//! [`run_scenario`] is pure: it returns every table and plot as text in an
//! [`Outcome`], and [`Outcome::write`] puts them on disk. Cells (initial
//! datum, pair, ensemble size × seed) run on the rayon pool and are
//! collected in input order, so the bytes do not depend on scheduling.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::config::{Experiment, InitialSpec, Reference, Scenario, TheoryRate};
use super::fit::{
    default_window, exponential_envelope_violations, fit_exponential, fit_polynomial_envelope,
    polynomial_envelope_violations, RateReport,
};
use super::plot::{render_svg, Scale, Series};
use crate::dynamics::{dissipation_check, pair_run, particle_solve, pde_solve, pde_step, RunDiagnostics, Trajectory};
use crate::error::{Error, Result};
use crate::measures::{particles_to_grid, GridMeasure, ParticleEnsemble};
use crate::potentials::{DegeneracyProfile, Lattice, PotentialSpec};
use crate::stationary::{coercivity_diagnostics, minimizer_audit, CoercivityCase, FixedPointSolver, StationaryState};
use crate::transport::{hyp_u_constant, translation_probe, wasserstein2, wj_constant, wj_probe, ProbeOptions};

/// Provenance tags of theoretical references.
pub const PROV_CONVEX: &str = "convex-contraction: alpha+beta";
pub const PROV_WJ: &str = "uniform-wj-constant";
pub const PROV_PERTURBED: &str = "bounded-perturbation";
pub const PROV_POLYNOMIAL: &str = "polynomial-contraction";
pub const PROV_COUNTEREXAMPLE: &str = "no-uniform-rate";

/// A probe estimate of the WJ constant of `e^{−V}` must reach this fraction
/// of the configured `c_wj`.
pub const WJ_PROBE_FRACTION: f64 = 0.99;

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: String,
    pub initial: String,
    pub seed: Option<u64>,
    pub metric: String,
    pub value: f64,
    pub r_squared: Option<f64>,
    /// Theoretical reference value and its provenance tag.
    pub theory: Option<(f64, &'static str)>,
    pub holds: Option<bool>,
}

impl SummaryRow {
    fn new(cell: impl Into<String>, initial: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        Self {
            cell: cell.into(),
            initial: initial.into(),
            seed: None,
            metric: metric.into(),
            value,
            r_squared: None,
            theory: None,
            holds: None,
        }
    }
}

/// A pass/fail assertion of the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, holds: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), holds, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub id: String,
    pub experiment: String,
    pub rows: Vec<SummaryRow>,
    pub checks: Vec<Check>,
    /// `(file name, contents)` in write order.
    pub artifacts: Vec<(String, String)>,
    /// Set when the run stopped on an error; everything before it is kept.
    pub failure: Option<String>,
}

impl Outcome {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds) && self.rows.iter().all(|r| r.holds != Some(false))
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn rows_with_metric<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a SummaryRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    /// `scenario,experiment,cell,initial,seed,metric,value,r_squared,theory,provenance,holds`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("scenario,experiment,cell,initial,seed,metric,value,r_squared,theory,provenance,holds\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},\"{}\",{},{},{:e},{},{},{},{}",
                self.id,
                self.experiment,
                r.cell,
                r.initial,
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.metric,
                r.value,
                opt(r.r_squared),
                opt(r.theory.map(|t| t.0)),
                r.theory.map(|t| t.1).unwrap_or(""),
                r.holds.map(|h| h.to_string()).unwrap_or_default()
            );
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(out, "# FAILED: {}", f.replace('\n', " "));
        }
        out
    }

    /// `check,holds,detail`
    pub fn checks_csv(&self) -> String {
        let mut out = String::from("check,holds,detail\n");
        for c in &self.checks {
            let _ = writeln!(out, "{},{},\"{}\"", c.name, c.holds, c.detail.replace('"', "'"));
        }
        out
    }

    /// Writes `summary.csv`, `checks.csv` and the artifacts under `dir/<id>/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let sub = dir.join(&self.id);
        std::fs::create_dir_all(&sub)?;
        for (name, contents) in &self.artifacts {
            std::fs::write(sub.join(name), contents)?;
        }
        std::fs::write(sub.join("checks.csv"), self.checks_csv())?;
        std::fs::write(sub.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }
}

/// Runs the scenario's experiment. Errors end the run and are recorded in
/// [`Outcome::failure`] with the partial results.
pub fn run_scenario(s: &Scenario) -> Outcome {
    let mut out = Outcome {
        id: s.id.clone(),
        experiment: s.experiment.as_str().to_string(),
        ..Default::default()
    };
    let res = match s.experiment {
        Experiment::Converge => converge(s, &mut out),
        Experiment::ContractPair => contract_pair(s, &mut out),
        Experiment::WjProbe => wj_probe_experiment(s, &mut out),
        Experiment::Counterexample => counterexample(s, &mut out),
        Experiment::StationaryOnly => stationary_only(s, &mut out),
        Experiment::Simulate => simulate(s, &mut out),
    };
    if let Err(e) = res {
        out.failure = Some(e.to_string());
    }
    out
}

/// Mass, centre of mass (`V = 0`), free-energy monotonicity and clamping.
/// Boundary density is reported by [`boundary_flag`] instead, since it
/// flags the truncation rather than the scheme.
pub fn conservation_checks(label: &str, d: &RunDiagnostics, v_zero: bool) -> Vec<Check> {
    let mut c = vec![
        Check::new(format!("{label}:mass"), d.max_mass_error < 1e-12, format!("max mass error {:e}", d.max_mass_error)),
        Check::new(
            format!("{label}:free_energy_monotone"),
            d.max_free_energy_increase < 1e-8,
            format!("largest one-step increase {:e}", d.max_free_energy_increase),
        ),
        Check::new(
            format!("{label}:clamped_mass"),
            d.clamped_mass <= 1e-9,
            format!("total clamped mass {:e}", d.clamped_mass),
        ),
    ];
    if v_zero {
        c.push(Check::new(
            format!("{label}:center_of_mass"),
            d.max_mean_drift < 1e-7,
            format!("max |mean(t) − mean(0)| {:e}", d.max_mean_drift),
        ));
    }
    c
}

/// Summary row flagging a run whose boundary cells exceed `1e-10`.
pub fn boundary_flag(label: &str, initial: &str, d: &RunDiagnostics) -> SummaryRow {
    let mut row = SummaryRow::new(label, initial, "max_boundary_density", d.max_boundary_density);
    if d.max_boundary_density > 1e-10 {
        row.metric = "max_boundary_density_flagged".into();
    }
    row
}

fn stationary_for(s: &Scenario, mean: Option<f64>) -> Result<StationaryState> {
    let mut solver = FixedPointSolver::new(s.grid)
        .damping(s.run.damping)
        .tol(s.run.tol)
        .max_iter(s.run.max_iter);
    if s.v.is_zero() {
        let m = s.run.pin_mean.or(mean).ok_or(Error::PinRequired)?;
        solver = solver.pin(m);
    }
    solver.solve(&s.v, &s.w)
}

/// Smallest W2 value that rate fits and envelopes take into account.
fn floor(s: &Scenario) -> f64 {
    s.run.fit_floor.unwrap_or(10.0 * s.grid.dx())
}

fn fit_window(s: &Scenario, times: &[f64], values: &[f64]) -> (f64, f64) {
    s.run
        .fit_window
        .unwrap_or_else(|| default_window(times, values, floor(s)))
}

fn fit_rate(s: &Scenario, times: &[f64], values: &[f64]) -> Result<RateReport> {
    let window = fit_window(s, times, values);
    fit_exponential(times, values, Some(window))
}

/// `max_R wj_constant(K(R), R, M̂(R), 1)` with `K(R)` the convexity of `W`
/// outside `R` and `M̂(R)` from the stationary density. Returns
/// `(best, per-radius (R, K, M̂, C))`.
pub fn wj_reference(w: &PotentialSpec, mu: &GridMeasure, radii: &[f64]) -> Result<(f64, Vec<(f64, f64, f64, f64)>)> {
    let mut per = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for &r in radii {
        let k = w.convexity_outside(r).unwrap_or(0.0);
        if !(k > 0.0) {
            continue;
        }
        let m = hyp_u_constant(mu, r)?;
        let c = wj_constant(k, r, m, 1)?;
        best = best.max(c);
        per.push((r, k, m, c));
    }
    if per.is_empty() {
        return Err(Error::Invalid(format!("{} is not uniformly convex outside any of the radii", w.name())));
    }
    Ok((best, per))
}

/// `C̃ = (C − α)e^{−2K} + α + β` with `α` from `V`, `β = min(β_W, 0)` and
/// `K = sup |W|`.
pub fn perturbed_rate(c_wj: f64, v: &PotentialSpec, w: &PotentialSpec) -> Result<f64> {
    let k = w
        .sup_abs
        .ok_or_else(|| Error::Invalid(format!("{} has no sup bound", w.name())))?;
    let (alpha, beta) = (v.alpha, w.alpha.min(0.0));
    Ok((c_wj - alpha) * (-2.0 * k).exp() + alpha + beta)
}

fn trajectory_plot(title: &str, series: Vec<Series>) -> Result<String> {
    render_svg(title, &series, Scale::SemilogY)
}

fn converge(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let v_zero = s.v.is_zero();
    let cells: Vec<Result<(Trajectory, Option<StationaryState>)>> = s
        .initial
        .par_iter()
        .map(|init| {
            let mu0 = init.build(s.grid)?;
            let (reference, state) = match &s.run.reference {
                Reference::Stationary => {
                    let st = stationary_for(s, Some(mu0.mean()))?;
                    (Some(st.mu.clone()), Some(st))
                }
                Reference::Fixed(spec) => (Some(spec.build(s.grid)?), None),
                Reference::None => (None, None),
            };
            let tr = pde_solve(&mu0, &s.v, &s.w, &s.solver, reference.as_ref())?;
            Ok((tr, state))
        })
        .collect();

    if s.theory.rate == Some(TheoryRate::Perturbed) {
        out.checks.push(probe_c_wj(s)?);
    }

    let mut rates = Vec::new();
    let mut series = Vec::new();
    let mut runs = Vec::new();
    for (k, (init, cell)) in s.initial.iter().zip(cells).enumerate() {
        let (tr, state) = cell?;
        let rec = &tr.record;
        let label = format!("init{k}");
        out.artifacts.push((format!("traj_{k}.csv"), rec.to_csv()));
        out.checks.extend(conservation_checks(&label, &rec.diagnostics, v_zero));
        out.rows.push(boundary_flag(&label, &init.label(), &rec.diagnostics));
        let mut m2 = SummaryRow::new(&label, init.label(), "sup_second_moment", rec.sup_second_moment());
        m2.holds = Some(rec.sup_second_moment().is_finite());
        out.rows.push(m2);
        if matches!(s.run.reference, Reference::None) {
            continue;
        }
        if let Some(st) = &state {
            out.rows.push(SummaryRow::new(&label, init.label(), "stationary_residual", st.residual_inf));
        }
        let fit = fit_rate(s, &rec.times, &rec.w2_to_ref)?;
        let mut row = SummaryRow::new(&label, init.label(), "rate", fit.lambda_fit);
        row.r_squared = Some(fit.r_squared);
        let theory = match s.theory.rate {
            Some(TheoryRate::Convex) => Some((s.v.alpha + s.w.alpha, PROV_CONVEX)),
            Some(TheoryRate::Wj) => {
                let st = state.as_ref().ok_or_else(|| Error::Invalid("theory 'wj' needs the stationary reference".into()))?;
                Some((wj_reference(&s.w, &st.mu, &s.theory.radii)?.0, PROV_WJ))
            }
            Some(TheoryRate::Perturbed) => Some((perturbed_rate(s.theory.c_wj.unwrap(), &s.v, &s.w)?, PROV_PERTURBED)),
            Some(TheoryRate::Polynomial) | None => None,
        };
        if let Some((c, prov)) = theory {
            row.theory = Some((c, prov));
            row.holds = Some(fit.lambda_fit >= c - s.theory.tolerance * c.abs());
            if matches!(s.theory.rate, Some(TheoryRate::Convex | TheoryRate::Perturbed)) {
                let slack = s.run.slack.unwrap_or(0.02);
                let bad = exponential_envelope_violations(&rec.times, &rec.w2_to_ref, c, slack, floor(s));
                out.checks.push(Check::new(
                    format!("{label}:theory_envelope"),
                    bad.is_empty(),
                    format!("W2(t) <= (1+{slack})exp(-{c:.6}t)W2(0); {} violations", bad.len()),
                ));
            }
        }
        if s.theory.rate == Some(TheoryRate::Polynomial) {
            let c = DegeneracyProfile::new(s.theory.p, s.theory.c_deg)?.polynomial_rate();
            let slack = s.run.slack.unwrap_or(0.05);
            let bad = polynomial_envelope_violations(&rec.times, &rec.w2_to_ref, s.theory.p, c, slack, floor(s));
            out.checks.push(Check::new(
                format!("{label}:polynomial_envelope"),
                bad.is_empty(),
                format!("c = {c:.6}, {} violations", bad.len()),
            ));
        }
        out.rows.push(row);
        rates.push(fit.lambda_fit);
        series.push(Series::new(format!("{label} {}", init.label()), rec.times.clone(), rec.w2_to_ref.clone()));
        runs.push((label, rec.times.clone(), rec.w2_to_ref.clone()));
    }

    if !rates.is_empty() {
        let c_fit = rates.iter().copied().fold(f64::INFINITY, f64::min);
        out.checks.push(Check::new(
            "rates_positive",
            c_fit > 0.0,
            format!("min fitted rate {c_fit:.6} over {} initial data", rates.len()),
        ));
        let slack = s.run.slack.unwrap_or(0.02);
        let mut total = 0;
        for (_, t, w2) in &runs {
            total += exponential_envelope_violations(t, w2, c_fit, slack, floor(s)).len();
        }
        out.checks.push(Check::new(
            "uniform_envelope",
            total == 0 && c_fit > 0.0,
            format!("W2(t) <= (1+{slack})exp(-C_fit t)W2(0) with C_fit = {c_fit:.6}; {total} violations"),
        ));
        out.rows.push(SummaryRow::new("all", "", "uniform_rate", c_fit));
        let (t0, w0) = runs
            .iter()
            .map(|(_, t, w)| (t.clone(), w[0]))
            .fold((Vec::new(), 0.0f64), |acc, (t, w)| if w > acc.1 { (t, w) } else { acc });
        let env: Vec<f64> = t0.iter().map(|t| w0 * (-c_fit * t).exp()).collect();
        series.push(Series::new("exp(-C_fit t) bound", t0, env));
        out.artifacts.push(("w2.svg".into(), trajectory_plot(&format!("{}: W2 to equilibrium", s.id), series)?));
    }
    Ok(())
}

/// WJ constant of `e^{−V}` on the grid estimated by probing with `W = 0`.
fn probe_c_wj(s: &Scenario) -> Result<Check> {
    let c = s.theory.c_wj.unwrap();
    let u: Vec<f64> = s.grid.centers().iter().map(|&x| s.v.value(x)).collect();
    let gibbs = GridMeasure::gibbs(s.grid, &u)?;
    let zero = PotentialSpec::builtin("zero", &[])?;
    let rep = wj_probe(&gibbs, &s.v, &zero, ProbeOptions::new(s.run.probes, s.run.probe_seed, false))?;
    Ok(Check::new(
        "c_wj_probe",
        rep.min_ratio >= WJ_PROBE_FRACTION * c,
        format!("min J/W2^2 on exp(-V) over {} probes = {:.6}, c_wj = {c}", rep.evaluated(), rep.min_ratio),
    ))
}

fn contract_pair(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let v_zero = s.v.is_zero();
    let pairs: Vec<(usize, usize)> = (0..s.initial.len() / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    let cells: Vec<Result<(Trajectory, Trajectory)>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mu0 = s.initial[a].build(s.grid)?;
            let nu0 = s.initial[b].build(s.grid)?;
            pair_run(&mu0, &nu0, &s.v, &s.w, &s.solver, s.run.dissipation)
        })
        .collect();
    let mut series = Vec::new();
    for (k, (&(a, b), cell)) in pairs.iter().zip(cells).enumerate() {
        let (ta, tb) = cell?;
        let label = format!("pair{k}");
        let init = format!("{} vs {}", s.initial[a].label(), s.initial[b].label());
        let rec = &ta.record;
        let (t, w2) = (&rec.times, &rec.w2_to_ref);
        out.artifacts.push((format!("pair_{k}.csv"), rec.to_csv()));
        out.artifacts.push((format!("pair_{k}_partner.csv"), tb.record.to_csv()));
        out.checks.extend(conservation_checks(&format!("{label}a"), &rec.diagnostics, v_zero));
        out.checks.extend(conservation_checks(&format!("{label}b"), &tb.record.diagnostics, v_zero));
        let mut both = rec.diagnostics;
        both.max_boundary_density = both.max_boundary_density.max(tb.record.diagnostics.max_boundary_density);
        out.rows.push(boundary_flag(&label, &init, &both));
        let same_mean = (rec.mean[0] - tb.record.mean[0]).abs() < 1e-9;

        match s.theory.rate {
            Some(TheoryRate::Polynomial) => {
                let c = DegeneracyProfile::new(s.theory.p, s.theory.c_deg)?.polynomial_rate();
                let pf = fit_polynomial_envelope(t, w2, s.theory.p, c)?;
                let mut row = SummaryRow::new(&label, &init, "polynomial_c", pf.c_fit);
                row.theory = Some((c, PROV_POLYNOMIAL));
                row.holds = Some(pf.holds);
                out.rows.push(row);
                let slack = s.run.slack.unwrap_or(0.05);
                let bad = polynomial_envelope_violations(t, w2, s.theory.p, c, slack, floor(s));
                out.checks.push(Check::new(
                    format!("{label}:polynomial_envelope"),
                    bad.is_empty() && same_mean,
                    format!(
                        "W2 <= (1+{slack})(W2(0)^-p + c t)^(-1/p), p = {}, c = {c:.6}; {} violations; equal means: {same_mean}",
                        s.theory.p,
                        bad.len()
                    ),
                ));
                let env: Vec<f64> = t.iter().map(|t| (w2[0].powf(-s.theory.p) + c * t).powf(-1.0 / s.theory.p)).collect();
                series.push(Series::new(format!("{label} bound"), t.clone(), env));
            }
            None => {
                // rate is informational here; short or flat records have none
                if let Ok(fit) = fit_rate(s, t, w2) {
                    let mut row = SummaryRow::new(&label, &init, "rate", fit.lambda_fit);
                    row.r_squared = Some(fit.r_squared);
                    out.rows.push(row);
                }
            }
            _ => {
                let fit = fit_rate(s, t, w2)?;
                let mut row = SummaryRow::new(&label, &init, "rate", fit.lambda_fit);
                row.r_squared = Some(fit.r_squared);
                if s.theory.rate == Some(TheoryRate::Convex) {
                    let beta = if s.w.alpha <= 0.0 || same_mean { s.w.alpha } else { 0.0 };
                    let c = s.v.alpha + beta;
                    row.theory = Some((c, PROV_CONVEX));
                    row.holds = Some(fit.lambda_fit >= c - s.theory.tolerance * c.abs());
                    let slack = s.run.slack.unwrap_or(0.02);
                    let bad = exponential_envelope_violations(t, w2, c, slack, floor(s));
                    out.checks.push(Check::new(
                        format!("{label}:contraction_envelope"),
                        bad.is_empty(),
                        format!("W2 <= (1+{slack})exp(-{c}t)W2(0); {} violations", bad.len()),
                    ));
                    let env: Vec<f64> = t.iter().map(|t| w2[0] * (-c * t).exp()).collect();
                    series.push(Series::new(format!("{label} bound"), t.clone(), env));
                }
                out.rows.push(row);
            }
        }
        if s.run.dissipation {
            let (rel, abs) = s.run.dissipation_tol;
            let dc = dissipation_check(rec, rel, abs)?;
            let mut row = SummaryRow::new(&label, &init, "dissipation_ok_fraction", dc.fraction_ok());
            row.holds = Some(dc.fraction_ok() >= 0.95);
            out.rows.push(row);
            let flagged: Vec<String> = dc.flagged.iter().map(|k| format!("{:e}", rec.times[*k])).collect();
            out.checks.push(Check::new(
                format!("{label}:dissipation"),
                dc.fraction_ok() >= 0.95,
                format!(
                    "{}/{} intervals ok; flagged at t = [{}]; worst excess {:e}",
                    dc.intervals - dc.flagged.len(),
                    dc.intervals,
                    flagged.join(" "),
                    dc.worst_excess
                ),
            ));
        }
        series.push(Series::new(format!("{label} W2"), t.clone(), w2.clone()));
    }
    out.artifacts.push(("w2_pair.svg".into(), trajectory_plot(&format!("{}: W2 between solutions", s.id), series)?));
    Ok(())
}

fn stationary_state(s: &Scenario, out: &mut Outcome) -> Result<StationaryState> {
    let st = stationary_for(s, s.run.pin_mean)?;
    let mut row = SummaryRow::new("stationary", "", "residual_inf", st.residual_inf);
    row.holds = Some(st.residual_inf < s.run.tol);
    out.rows.push(row);
    out.rows.push(SummaryRow::new("stationary", "", "lambda", st.lambda_mult));
    out.rows.push(SummaryRow::new("stationary", "", "iterations", st.iterations as f64));
    out.artifacts.push(("stationary.csv".into(), st.to_csv()));
    Ok(st)
}

fn wj_probe_experiment(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let st = stationary_state(s, out)?;
    let opts = ProbeOptions::new(s.run.probes, s.run.probe_seed, s.v.is_zero());
    let rep = wj_probe(&st.mu, &s.v, &s.w, opts)?;
    out.artifacts.push(("probes.csv".into(), rep.to_csv()));
    let mut row = SummaryRow::new("probe", "", "min_ratio", rep.min_ratio);
    row.seed = Some(s.run.probe_seed);
    let bound = if s.v.is_zero() && s.theory.rate != Some(TheoryRate::Convex) {
        let (best, per) = wj_reference(&s.w, &st.mu, &s.theory.radii)?;
        for (r, k, m, c) in per {
            let mut rr = SummaryRow::new(format!("R={r}"), "", "wj_constant", c);
            rr.theory = Some((c, PROV_WJ));
            out.rows.push(rr);
            out.rows.push(SummaryRow::new(format!("R={r}"), "", "K", k));
            out.rows.push(SummaryRow::new(format!("R={r}"), "", "hyp_u_M", m));
        }
        Some((best, PROV_WJ))
    } else { s.theory.c_wj.map(|c| (WJ_PROBE_FRACTION * c, PROV_CONVEX)) };
    if let Some((c, prov)) = bound {
        row.theory = Some((c, prov));
        row.holds = Some(rep.min_ratio >= c);
        let below = rep.records.iter().filter(|r| r.ratio.is_some_and(|q| q < c)).count();
        out.checks.push(Check::new(
            "wj_bound",
            below == 0,
            format!(
                "{below} of {} probes below {c:.6e}; min ratio {:.6e} at probe {}",
                rep.evaluated(),
                rep.min_ratio,
                rep.argmin_id
            ),
        ));
    }
    out.rows.push(row);
    Ok(())
}

fn counterexample(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let mu = s.initial[0].build(s.grid)?;
    let r = translation_probe(&mu, &s.v, &s.run.m_values)?;
    // ∫(V'(x+M) − V'(x))dμ ≤ 2 sup|V'|, so r(M) ≤ 2 sup|V'| / M.
    let m_max = s.run.m_values.iter().copied().fold(0.0, f64::max);
    let lat = Lattice::with_count(s.grid.lo - m_max, s.grid.hi + m_max, 20_001);
    let sup_grad = lat.points().iter().map(|&x| s.v.grad(x).abs()).fold(0.0, f64::max);
    let mut csv = String::from("M,r,rM\n");
    let mut bound_ok = true;
    for (&m, &rm) in s.run.m_values.iter().zip(&r) {
        let _ = writeln!(csv, "{m:e},{rm:e},{:e}", rm * m);
        let bound = 2.0 * sup_grad / m;
        let mut row = SummaryRow::new(format!("M={m}"), s.initial[0].label(), "r", rm);
        row.theory = Some((bound, PROV_COUNTEREXAMPLE));
        row.holds = Some(rm <= bound * (1.0 + 1e-9));
        bound_ok &= row.holds == Some(true);
        out.rows.push(row);
        out.rows.push(SummaryRow::new(format!("M={m}"), s.initial[0].label(), "r_times_M", rm * m));
    }
    out.artifacts.push(("translation.csv".into(), csv));
    let decreasing = r.windows(2).all(|w| w[1] < w[0]);
    out.checks.push(Check::new("r_decreasing", decreasing, format!("r(M) = {r:?}")));
    out.checks.push(Check::new(
        "r_times_M_bounded",
        bound_ok,
        format!("r(M)·M <= 2 sup|V'| = {:.6}", 2.0 * sup_grad),
    ));
    let series = vec![Series::new("r(M)", s.run.m_values.clone(), r)];
    out.artifacts.push(("translation.svg".into(), render_svg(&format!("{}: r(M)", s.id), &series, Scale::SemilogY)?));
    Ok(())
}

fn stationary_only(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let st = stationary_state(s, out)?;
    let audit = minimizer_audit(&st, &s.v, &s.w, s.run.probes, s.run.probe_seed)?;
    out.checks.push(Check::new(
        "minimizer_audit",
        audit.holds,
        format!("min F(T#mu) - F(mu) = {:e} over {} probes", audit.min_delta, audit.probes),
    ));
    let dt = s.solver.dt;
    let next = pde_step(&st.mu, &s.v, &s.w, dt, s.solver.scheme)?;
    let moved = next.l1_distance(&st.mu);
    out.checks.push(Check::new(
        "dynamics_fixed_point",
        moved < 1e-6 * dt,
        format!("one step of dt = {dt:e} moves the state by {moved:e} in L1"),
    ));
    let case = if s.v.is_zero() {
        CoercivityCase::I
    } else if s.v.alpha > 0.0 {
        CoercivityCase::Iii
    } else if s.w.sup_abs.is_some() {
        CoercivityCase::Iv
    } else {
        CoercivityCase::Ii
    };
    let lat = Lattice::with_count(s.grid.lo, s.grid.hi, 4001);
    let rep = coercivity_diagnostics(&s.v, &s.w, case, &lat);
    let mut row = SummaryRow::new("coercivity", format!("{case:?}"), "w_envelope_b", rep.w_envelope.a);
    row.holds = Some(rep.holds);
    out.rows.push(row);
    if let Some(ve) = rep.v_envelope {
        out.rows.push(SummaryRow::new("coercivity", format!("{case:?}"), "v_envelope_a", ve.a));
    }
    let x = s.grid.centers();
    let series = vec![Series::new("density", x, st.mu.density().to_vec())];
    out.artifacts.push(("stationary.svg".into(), render_svg(&format!("{}: stationary density", s.id), &series, Scale::Linear)?));
    Ok(())
}

/// Noise streams of particle runs are decorrelated from the sampling
/// stream of the same seed.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

fn simulate(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let v_zero = s.v.is_zero();
    let runs: Vec<Result<(GridMeasure, Trajectory)>> = s
        .initial
        .par_iter()
        .map(|init| {
            let mu0 = init.build(s.grid)?;
            let tr = pde_solve(&mu0, &s.v, &s.w, &s.solver, None)?;
            Ok((mu0, tr))
        })
        .collect();
    let mut finals = Vec::new();
    let mut series = Vec::new();
    for (k, (init, run)) in s.initial.iter().zip(runs).enumerate() {
        let (mu0, tr) = run?;
        let label = format!("init{k}");
        out.artifacts.push((format!("traj_{k}.csv"), tr.record.to_csv()));
        out.checks.extend(conservation_checks(&label, &tr.record.diagnostics, v_zero));
        out.rows.push(boundary_flag(&label, &init.label(), &tr.record.diagnostics));
        out.rows.push(SummaryRow::new(&label, init.label(), "free_energy_end", *tr.record.free_energy.last().unwrap()));
        out.rows.push(SummaryRow::new(&label, init.label(), "sup_second_moment", tr.record.sup_second_moment()));
        let fe0 = tr.record.free_energy[0];
        series.push(Series::new(
            format!("{label} F(t)-F(0)"),
            tr.record.times.clone(),
            tr.record.free_energy.iter().map(|f| f - fe0).collect(),
        ));
        finals.push((mu0, tr.final_state));
    }
    out.artifacts.push(("free_energy.svg".into(), render_svg(&format!("{}: free energy", s.id), &series, Scale::Linear)?));
    if s.run.particles.is_empty() {
        return Ok(());
    }
    let dt = s.run.particle_dt.unwrap_or(s.solver.dt);
    let cells: Vec<(usize, usize, u64)> = (0..finals.len())
        .flat_map(|k| s.run.particles.iter().flat_map(move |&n| s.seeds.iter().map(move |&seed| (k, n, seed))))
        .collect();
    let dists: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(k, n, seed)| {
            let (mu0, mu_t) = &finals[k];
            let p0 = ParticleEnsemble::sample_from_grid(mu0, n, seed)?;
            let (pt, _) = particle_solve(&p0, &s.v, &s.w, dt, s.solver.t_end, usize::MAX, seed ^ NOISE_STREAM)?;
            wasserstein2(&particles_to_grid(&pt, s.grid.lo, s.grid.hi, s.grid.m)?, mu_t)
        })
        .collect();
    let mut csv = String::from("initial,n,seed,w2\n");
    let mut means = vec![vec![0.0; s.run.particles.len()]; finals.len()];
    for (&(k, n, seed), d) in cells.iter().zip(dists) {
        let d = d?;
        let _ = writeln!(csv, "{k},{n},{seed},{d:e}");
        let mut row = SummaryRow::new(format!("init{k}"), s.initial[k].label(), format!("w2_particles_n{n}"), d);
        row.seed = Some(seed);
        out.rows.push(row);
        let j = s.run.particles.iter().position(|&m| m == n).unwrap();
        means[k][j] += d / s.seeds.len() as f64;
    }
    out.artifacts.push(("particles.csv".into(), csv));
    for (k, m) in means.iter().enumerate() {
        for (&n, &d) in s.run.particles.iter().zip(m) {
            out.rows.push(SummaryRow::new(format!("init{k}"), s.initial[k].label(), format!("w2_particles_mean_n{n}"), d));
        }
        let decreasing = m.windows(2).all(|w| w[1] < w[0]);
        out.checks.push(Check::new(
            format!("init{k}:particles_converge"),
            decreasing,
            format!("mean W2 over seeds by N {:?}: {m:?}", s.run.particles),
        ));
    }
    Ok(())
}

/// Builds the initial datum `k` of a scenario on its grid.
pub fn initial_measure(s: &Scenario, k: usize) -> Result<GridMeasure> {
    s.initial
        .get(k)
        .ok_or_else(|| Error::Invalid(format!("scenario has no initial datum {k}")))
        .and_then(|i: &InitialSpec| i.build(s.grid))
}
