//! Scenario files.
//!
//! One scenario per file, `key = value` lines under `[section]` headers,
//! `#` starts a comment:
//!
//! ```text
//! [scenario]
//! id = cubic_converge
//! experiment = converge        # converge | contract_pair | wj_probe | counterexample | stationary_only | simulate
//! seeds = 1, 2
//!
//! [potentials]
//! V = zero
//! W = cubic_abs
//!
//! [grid]
//! lo = -8
//! hi = 8
//! m = 640
//!
//! [solver]
//! dt = 1e-3
//! t_end = 5
//! record_every = 20
//! scheme = semi_implicit       # or explicit
//! clamp_negative = true
//!
//! [initial]
//! gaussian(0, 0.5)
//! uniform(-1, 1)
//! bimodal(-1.5, 1.5, 0.4)      # equal-weight pair of Gaussians
//! mixture(0.3, -1, 0.5, 0.7, 1, 0.5)   # (weight, mean, sd) triples
//!
//! [run]
//! reference = stationary       # stationary | none | <distribution>
//! fit_floor = 1e-6
//!
//! [theory]
//! rate = wj                    # convex | wj | perturbed | polynomial
//! radii = 0.5, 1, 2
//! ```
//!
//! Potentials are catalog names with optional parameters, `quadratic(1)`.
//! Keys of `[run]` and `[theory]` are listed on [`RunOptions`] and
//! [`TheoryOptions`].

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::dynamics::{Scheme, SolverConfig};
use crate::error::{Error, Result};
use crate::measures::{GridMeasure, GridSpec};
use crate::potentials::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Converge,
    ContractPair,
    WjProbe,
    Counterexample,
    StationaryOnly,
    /// Plain trajectories, optionally with particle runs alongside.
    Simulate,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converge => "converge",
            Self::ContractPair => "contract_pair",
            Self::WjProbe => "wj_probe",
            Self::Counterexample => "counterexample",
            Self::StationaryOnly => "stationary_only",
            Self::Simulate => "simulate",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "converge" => Self::Converge,
            "contract_pair" | "contract" => Self::ContractPair,
            "wj_probe" | "wj-probe" => Self::WjProbe,
            "counterexample" => Self::Counterexample,
            "stationary_only" | "stationary" => Self::StationaryOnly,
            "simulate" => Self::Simulate,
            other => return Err(Error::Invalid(format!("unknown experiment '{other}'"))),
        })
    }
}

/// Initial distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Gaussian { mean: f64, sd: f64 },
    Uniform { a: f64, b: f64 },
    Bimodal { left: f64, right: f64, sd: f64 },
    /// `(weight, mean, sd)` components.
    Mixture(Vec<(f64, f64, f64)>),
}

impl InitialSpec {
    pub fn build(&self, grid: GridSpec) -> Result<GridMeasure> {
        match self {
            Self::Gaussian { mean, sd } => GridMeasure::gaussian(grid, *mean, *sd),
            Self::Uniform { a, b } => GridMeasure::uniform(grid, *a, *b),
            Self::Bimodal { left, right, sd } => mixture(grid, &[(0.5, *left, *sd), (0.5, *right, *sd)]),
            Self::Mixture(parts) => mixture(grid, parts),
        }
    }

    /// Short label used in file names and summaries.
    pub fn label(&self) -> String {
        match self {
            Self::Gaussian { mean, sd } => format!("gaussian({mean},{sd})"),
            Self::Uniform { a, b } => format!("uniform({a},{b})"),
            Self::Bimodal { left, right, sd } => format!("bimodal({left},{right},{sd})"),
            Self::Mixture(p) => format!("mixture({} parts)", p.len()),
        }
    }
}

fn mixture(grid: GridSpec, parts: &[(f64, f64, f64)]) -> Result<GridMeasure> {
    let mut density = vec![0.0; grid.m];
    for &(wt, mean, sd) in parts {
        if !(wt > 0.0) {
            return Err(Error::Invalid(format!("mixture weight must be positive, got {wt}")));
        }
        let g = GridMeasure::gaussian(grid, mean, sd)?;
        for (d, r) in density.iter_mut().zip(g.density()) {
            *d += wt * r;
        }
    }
    GridMeasure::new(grid, density)?.normalized()
}

/// `name(a, b, ...)` or a bare `name`.
fn call(text: &str) -> Result<(String, Vec<f64>)> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text.to_string(), Vec::new()));
    };
    if !text.ends_with(')') {
        return Err(Error::Invalid(format!("unbalanced parentheses in '{text}'")));
    }
    let name = text[..open].trim().to_string();
    let args = parse_list(&text[open + 1..text.len() - 1])?;
    Ok((name, args))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Invalid(format!("cannot parse '{t}'"))))
        .collect()
}

impl FromStr for InitialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = call(s)?;
        let want = |n: usize| -> Result<()> {
            if a.len() == n {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} takes {n} arguments, got {}", a.len())))
            }
        };
        match name.as_str() {
            "gaussian" => {
                want(2)?;
                Ok(Self::Gaussian { mean: a[0], sd: a[1] })
            }
            "uniform" => {
                want(2)?;
                Ok(Self::Uniform { a: a[0], b: a[1] })
            }
            "bimodal" => {
                want(3)?;
                Ok(Self::Bimodal { left: a[0], right: a[1], sd: a[2] })
            }
            "mixture" => {
                if a.is_empty() || a.len() % 3 != 0 {
                    return Err(Error::Invalid("mixture takes (weight, mean, sd) triples".into()));
                }
                Ok(Self::Mixture(a.chunks(3).map(|c| (c[0], c[1], c[2])).collect()))
            }
            other => Err(Error::Invalid(format!("unknown distribution '{other}'"))),
        }
    }
}

pub fn parse_potential(s: &str) -> Result<PotentialSpec> {
    let (name, args) = call(s)?;
    PotentialSpec::builtin(&name, &args)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Stationary,
    None,
    Fixed(InitialSpec),
}

/// `[run]` keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// `reference`: what `W₂` is measured against in `converge`.
    pub reference: Reference,
    /// `pin_mean`: mean of the stationary state when `V = 0` (default: the
    /// mean of each initial datum).
    pub pin_mean: Option<f64>,
    /// `fit_floor`: the fit window ends where `W₂` first drops below this
    /// (default `10·dx`).
    pub fit_floor: Option<f64>,
    /// `fit_window = t_lo, t_hi` overrides the default window.
    pub fit_window: Option<(f64, f64)>,
    /// `slack`: relative slack of pointwise envelopes (default 0.02, 0.05
    /// for polynomial envelopes).
    pub slack: Option<f64>,
    /// `dissipation`: record `J` in `contract_pair`.
    pub dissipation: bool,
    /// `dissipation_tol = rel, abs` (default `0.05, 1e-8`).
    pub dissipation_tol: (f64, f64),
    /// `probes`, `probe_seed` for `wj_probe` and the minimizer audit.
    pub probes: usize,
    pub probe_seed: u64,
    /// `m_values` for `counterexample`.
    pub m_values: Vec<f64>,
    /// `particles`: ensemble sizes run next to the PDE in `simulate`, one
    /// run per size and seed; `particle_dt` defaults to the solver `dt`.
    pub particles: Vec<usize>,
    pub particle_dt: Option<f64>,
    /// Stationary solver settings.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            reference: Reference::Stationary,
            pin_mean: None,
            fit_floor: None,
            fit_window: None,
            slack: None,
            dissipation: false,
            dissipation_tol: (0.05, 1e-8),
            probes: 1000,
            probe_seed: 0,
            m_values: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            particles: Vec::new(),
            particle_dt: None,
            damping: 0.5,
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryRate {
    /// `α + β` for `α`-convex `V` and `β`-convex `W`.
    Convex,
    /// The WJ constant `wj_constant(K(R), R, M̂(R), 1)` maximized over `R`.
    Wj,
    /// `C̃ = (C − α)e^{−2K} + α + β` for a bounded interaction.
    Perturbed,
    /// `(W₂(0)^{−p} + c t)^{−1/p}`.
    Polynomial,
}

impl FromStr for TheoryRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convex" => Self::Convex,
            "wj" => Self::Wj,
            "perturbed" => Self::Perturbed,
            "polynomial" => Self::Polynomial,
            other => return Err(Error::Invalid(format!("unknown theory rate '{other}'"))),
        })
    }
}

/// `[theory]` keys.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryOptions {
    pub rate: Option<TheoryRate>,
    /// `radii` for the WJ constant.
    pub radii: Vec<f64>,
    /// `c_wj`: WJ constant of `e^{−V}` used by `perturbed`.
    pub c_wj: Option<f64>,
    pub p: f64,
    pub c_deg: f64,
    /// `tolerance`: relative slack of the fitted-vs-theory comparison.
    pub tolerance: f64,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        Self {
            rate: None,
            radii: vec![1.0],
            c_wj: None,
            p: 1.0,
            c_deg: 0.5,
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub experiment: Experiment,
    pub v: PotentialSpec,
    pub w: PotentialSpec,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub initial: Vec<InitialSpec>,
    pub seeds: Vec<u64>,
    pub run: RunOptions,
    pub theory: TheoryOptions,
}

type Sections = BTreeMap<String, Vec<(usize, String, Option<String>)>>;

fn split_sections(text: &str) -> Result<Sections> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Config { line: line_no, msg: "unterminated section header".into() });
            }
            let name = line[1..line.len() - 1].trim().to_string();
            out.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some(sec) = &current else {
            return Err(Error::Config { line: line_no, msg: "entry outside any section".into() });
        };
        let entry = match line.split_once('=') {
            Some((k, v)) => (line_no, k.trim().to_string(), Some(v.trim().to_string())),
            None => (line_no, line.to_string(), None),
        };
        out.get_mut(sec).unwrap().push(entry);
    }
    Ok(out)
}

struct Section<'a> {
    name: &'a str,
    entries: &'a [(usize, String, Option<String>)],
}

impl Section<'_> {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries
            .iter()
            .rev()
            .find(|(_, k, v)| k == key && v.is_some())
            .map(|(l, _, v)| (*l, v.as_deref().unwrap()))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config { line, msg: format!("[{}] {key}: cannot parse '{v}'", self.name) }),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::Config { line: 0, msg: format!("[{}] missing key '{key}'", self.name) })
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some((line, v)) => parse_list(v)
                .map(Some)
                .map_err(|e| Error::Config { line, msg: format!("[{}] {key}: {e}", self.name) }),
        }
    }

    fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (line, k, v) in self.entries {
            if v.is_none() || !known.contains(&k.as_str()) {
                return Err(Error::Config { line: *line, msg: format!("[{}] unexpected entry '{k}'", self.name) });
            }
        }
        Ok(())
    }
}

const EMPTY: &[(usize, String, Option<String>)] = &[];

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let secs = split_sections(text)?;
        for name in secs.keys() {
            if !["scenario", "potentials", "grid", "solver", "initial", "run", "theory"].contains(&name.as_str()) {
                return Err(Error::Config { line: 0, msg: format!("unknown section [{name}]") });
            }
        }
        let sec = |name: &'static str| Section {
            name,
            entries: secs.get(name).map(|v| v.as_slice()).unwrap_or(EMPTY),
        };

        let s = sec("scenario");
        s.check_keys(&["id", "experiment", "seeds"])?;
        let id: String = s.require("id")?;
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config { line: 0, msg: format!("scenario id '{id}' must be [A-Za-z0-9_-]+") });
        }
        let experiment = s.parse::<Experiment>("experiment")?.unwrap_or(Experiment::Simulate);
        let seeds = s.list::<u64>("seeds")?.unwrap_or_else(|| vec![0]);

        let p = sec("potentials");
        p.check_keys(&["V", "W"])?;
        let pot = |key: &str| -> Result<PotentialSpec> {
            match p.get(key) {
                None => PotentialSpec::builtin("zero", &[]),
                Some((line, v)) => parse_potential(v).map_err(|e| Error::Config { line, msg: format!("{key}: {e}") }),
            }
        };
        let (v, w) = (pot("V")?, pot("W")?);
        if !w.is_even {
            return Err(Error::Config { line: 0, msg: "W must be even".into() });
        }

        let g = sec("grid");
        g.check_keys(&["lo", "hi", "m"])?;
        let grid = GridSpec::new(g.require("lo")?, g.require("hi")?, g.require("m")?)?;

        let so = sec("solver");
        so.check_keys(&["dt", "t_end", "record_every", "scheme", "clamp_negative", "conserve_center_of_mass"])?;
        let mut solver = SolverConfig::new(
            so.require("dt")?,
            so.require("t_end")?,
            so.parse("record_every")?.unwrap_or(1),
        )?
        .with_scheme(so.parse::<Scheme>("scheme")?.unwrap_or(Scheme::SemiImplicit));
        if let Some(c) = so.parse("clamp_negative")? {
            solver.clamp_negative = c;
        }
        if let Some(c) = so.parse("conserve_center_of_mass")? {
            solver.conserve_center_of_mass = c;
        }
        solver.validate(grid.dx())?;

        let mut initial = Vec::new();
        for (line, k, v) in sec("initial").entries {
            let text = match v {
                None => k.as_str(),
                Some(v) => v.as_str(),
            };
            initial.push(text.parse().map_err(|e| Error::Config { line: *line, msg: format!("{e}") })?);
        }

        let r = sec("run");
        r.check_keys(&[
            "reference",
            "pin_mean",
            "fit_floor",
            "fit_window",
            "slack",
            "dissipation",
            "dissipation_tol",
            "probes",
            "probe_seed",
            "m_values",
            "particles",
            "particle_dt",
            "damping",
            "tol",
            "max_iter",
        ])?;
        let mut run = RunOptions::default();
        if let Some((line, v)) = r.get("reference") {
            run.reference = match v {
                "stationary" => Reference::Stationary,
                "none" => Reference::None,
                other => Reference::Fixed(other.parse().map_err(|e| Error::Config { line, msg: format!("{e}") })?),
            };
        }
        run.pin_mean = r.parse("pin_mean")?;
        run.fit_floor = r.parse("fit_floor")?;
        if let Some(wnd) = r.list::<f64>("fit_window")? {
            if wnd.len() != 2 || !(wnd[0] < wnd[1]) {
                return Err(Error::Config { line: 0, msg: "fit_window takes t_lo, t_hi with t_lo < t_hi".into() });
            }
            run.fit_window = Some((wnd[0], wnd[1]));
        }
        run.slack = r.parse("slack")?;
        run.dissipation = r.parse("dissipation")?.unwrap_or(false);
        if let Some(t) = r.list::<f64>("dissipation_tol")? {
            if t.len() != 2 {
                return Err(Error::Config { line: 0, msg: "dissipation_tol takes rel, abs".into() });
            }
            run.dissipation_tol = (t[0], t[1]);
        }
        run.probes = r.parse("probes")?.unwrap_or(run.probes);
        run.probe_seed = r.parse("probe_seed")?.unwrap_or(seeds[0]);
        run.m_values = r.list("m_values")?.unwrap_or(run.m_values);
        run.particles = r.list("particles")?.unwrap_or_default();
        run.particle_dt = r.parse("particle_dt")?;
        run.damping = r.parse("damping")?.unwrap_or(run.damping);
        run.tol = r.parse("tol")?.unwrap_or(run.tol);
        run.max_iter = r.parse("max_iter")?.unwrap_or(run.max_iter);

        let t = sec("theory");
        t.check_keys(&["rate", "radii", "c_wj", "p", "c_deg", "tolerance"])?;
        let mut theory = TheoryOptions::default();
        theory.rate = t.parse("rate")?;
        theory.radii = t.list("radii")?.unwrap_or(theory.radii);
        theory.c_wj = t.parse("c_wj")?;
        theory.p = t.parse("p")?.unwrap_or(theory.p);
        theory.c_deg = t.parse("c_deg")?.unwrap_or(theory.c_deg);
        theory.tolerance = t.parse("tolerance")?.unwrap_or(theory.tolerance);

        let sc = Scenario { id, experiment, v, w, grid, solver, initial, seeds, run, theory };
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Experiment-specific requirements.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config { line: 0, msg: format!("{}: {msg}", self.experiment.as_str()) });
        let need_initial = match self.experiment {
            Experiment::ContractPair => 2,
            Experiment::Converge | Experiment::Simulate | Experiment::Counterexample => 1,
            Experiment::WjProbe | Experiment::StationaryOnly => 0,
        };
        if self.initial.len() < need_initial {
            return fail(&format!("needs at least {need_initial} initial distributions"));
        }
        if self.seeds.is_empty() {
            return fail("needs at least one seed");
        }
        if matches!(self.experiment, Experiment::WjProbe | Experiment::StationaryOnly)
            && self.v.is_zero()
            && self.run.pin_mean.is_none()
        {
            return fail("V = 0 needs pin_mean");
        }
        if self.experiment == Experiment::Counterexample && self.run.m_values.iter().any(|m| !(*m > 0.0)) {
            return fail("m_values must be positive");
        }
        if self.theory.rate == Some(TheoryRate::Perturbed) && self.theory.c_wj.is_none() {
            return fail("theory rate 'perturbed' needs c_wj");
        }
        if self.theory.radii.iter().any(|r| !(*r > 0.0)) {
            return fail("radii must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "
# cubic interaction
[scenario]
id = demo
experiment = converge
seeds = 3, 4

[potentials]
V = zero
W = cubic_abs

[grid]
lo = -8
hi = 8
m = 320

[solver]
dt = 1e-3
t_end = 0.5
record_every = 10

[initial]
gaussian(0, 0.5)
bimodal(-1.5, 1.5, 0.4)   # two bumps
mixture(0.3, -1, 0.5, 0.7, 1, 0.5)
uniform(-1, 1)

[run]
fit_floor = 1e-6

[theory]
rate = wj
radii = 0.5, 1, 2
";

    #[test]
    fn parses_a_full_scenario() {
        let s = Scenario::parse(FULL).unwrap();
        assert_eq!(s.id, "demo");
        assert_eq!(s.experiment, Experiment::Converge);
        assert_eq!(s.seeds, vec![3, 4]);
        assert!(s.v.is_zero());
        assert_eq!(s.w.name(), "cubic_abs");
        assert_eq!(s.grid.m, 320);
        assert_eq!(s.solver.steps(), 500);
        assert_eq!(s.initial.len(), 4);
        assert_eq!(s.initial[1], InitialSpec::Bimodal { left: -1.5, right: 1.5, sd: 0.4 });
        assert_eq!(s.run.fit_floor, Some(1e-6));
        assert_eq!(s.run.probe_seed, 3);
        assert_eq!(s.theory.rate, Some(TheoryRate::Wj));
        assert_eq!(s.theory.radii, vec![0.5, 1.0, 2.0]);
        for init in &s.initial {
            let mu = init.build(s.grid).unwrap();
            assert!(mu.is_normalized(1e-12));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            FULL.replace("cubic_abs", "cubic_thing"),
            FULL.replace("[grid]", "[gird]"),
            FULL.replace("m = 320", "m = three"),
            FULL.replace("fit_floor", "fit_flor"),
            FULL.replace("gaussian(0, 0.5)", "gaussian(0)"),
            FULL.replace("dt = 1e-3", "dt = -1"),
            FULL.replace("id = demo", "id = de mo"),
        ];
        for text in &bad {
            assert!(Scenario::parse(text).is_err(), "{text}");
        }
        let err = Scenario::parse(&FULL.replace("m = 320", "m = three")).unwrap_err();
        assert!(matches!(err, Error::Config { line: 15, .. }), "{err:?}");
    }

    #[test]
    fn experiment_requirements() {
        let pair = FULL.replace("experiment = converge", "experiment = contract_pair");
        assert!(Scenario::parse(&pair).is_ok());
        let one = pair.replace("bimodal(-1.5, 1.5, 0.4)   # two bumps\n", "").replace("mixture(0.3, -1, 0.5, 0.7, 1, 0.5)\n", "").replace("uniform(-1, 1)\n", "");
        assert!(Scenario::parse(&one).is_err());
        let probe = FULL.replace("experiment = converge", "experiment = wj_probe");
        assert!(Scenario::parse(&probe).is_err());
        assert!(Scenario::parse(&probe.replace("[run]", "[run]\npin_mean = 0")).is_ok());
    }

    #[test]
    fn potential_syntax() {
        assert_eq!(parse_potential("quadratic(2, 0.5)").unwrap().family(), crate::potentials::Family::Quadratic { a: 2.0, offset: 0.5 });
        assert!(parse_potential("quadratic(2").is_err());
        assert!(parse_potential("zero").unwrap().is_zero());
    }
}
