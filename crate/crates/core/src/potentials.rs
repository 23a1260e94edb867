//! Exterior (`V`) and interaction (`W`) potentials.
//!
//! Potentials are closed-form scalar functions of one variable with exact
//! first and second derivatives. Convexity metadata is attached by the
//! catalog from the analytic formulas and can be re-checked numerically with
//! [`PotentialSpec::verify_metadata`].

use crate::error::{invalid, Error, Result};

/// Closed-form families in the catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Zero,
    /// `a x²/2 + offset`
    Quadratic { a: f64, offset: f64 },
    /// `|x|^exponent` with `exponent > 2`
    PowerAbs { exponent: f64 },
    /// `x⁴ − eps x²`
    DoubleWell { eps: f64 },
    /// `√(1 + x²)`
    PseudoHuber,
    /// `−depth · exp(−x²)`
    GaussWell { depth: f64 },
}

/// An analytic potential together with its convexity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    name: String,
    family: Family,
    /// Lower bound on the second derivative.
    pub alpha: f64,
    /// `(K, R)` such that the second derivative is at least `K` on `|x| ≥ R`.
    pub k_outside: Option<(f64, f64)>,
    /// Bound on `sup |P|` for bounded potentials.
    pub sup_abs: Option<f64>,
    pub is_even: bool,
}

impl PotentialSpec {
    /// Looks a potential up in the catalog.
    ///
    /// | name | params | formula |
    /// |---|---|---|
    /// | `zero` | – | `0` |
    /// | `quadratic` | `a [, offset]` | `a x²/2 + offset` |
    /// | `power_abs` | `e [, R]` | `|x|^(2+e)` |
    /// | `cubic_abs` | `[R]` | `|x|³` |
    /// | `double_well` | `eps` | `x⁴ − eps x²` |
    /// | `pseudo_huber` | – | `√(1+x²)` |
    /// | `gauss_well` | `depth` | `−depth e^(−x²)` |
    ///
    /// The optional `R` of the power families selects the radius at which the
    /// `(K, R)` metadata is reported (default 1).
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if params.len() < lo || params.len() > hi {
                Err(invalid(
                    name,
                    format!("expected {lo}..={hi} parameters, got {}", params.len()),
                ))
            } else if params.iter().any(|p| !p.is_finite()) {
                Err(invalid(name, "parameters must be finite"))
            } else {
                Ok(())
            }
        };
        let spec = match name {
            "zero" => {
                arity(0, 0)?;
                Self::from_family("zero", Family::Zero)
            }
            "quadratic" => {
                arity(1, 2)?;
                let a = params[0];
                if a <= 0.0 {
                    return Err(invalid(name, "coefficient must be positive"));
                }
                let offset = params.get(1).copied().unwrap_or(0.0);
                Self::from_family(name, Family::Quadratic { a, offset })
            }
            "power_abs" | "cubic_abs" => {
                let (e, r) = if name == "cubic_abs" {
                    arity(0, 1)?;
                    (1.0, params.first().copied().unwrap_or(1.0))
                } else {
                    arity(1, 2)?;
                    (params[0], params.get(1).copied().unwrap_or(1.0))
                };
                if e <= 0.0 {
                    return Err(invalid(name, "exponent excess must be positive"));
                }
                if r <= 0.0 {
                    return Err(invalid(name, "radius must be positive"));
                }
                let mut spec = Self::from_family(name, Family::PowerAbs { exponent: 2.0 + e });
                spec.k_outside = spec.convexity_outside(r).map(|k| (k, r));
                spec
            }
            "double_well" => {
                arity(1, 1)?;
                if params[0] < 0.0 {
                    return Err(invalid(name, "eps must be non-negative"));
                }
                Self::from_family(name, Family::DoubleWell { eps: params[0] })
            }
            "pseudo_huber" => {
                arity(0, 0)?;
                Self::from_family(name, Family::PseudoHuber)
            }
            "gauss_well" => {
                arity(1, 1)?;
                if params[0] <= 0.0 {
                    return Err(invalid(name, "depth must be positive"));
                }
                Self::from_family(name, Family::GaussWell { depth: params[0] })
            }
            other => return Err(Error::UnknownPotential(other.to_string())),
        };
        Ok(spec)
    }

    fn from_family(name: &str, family: Family) -> Self {
        let (alpha, k_outside, sup_abs) = match family {
            Family::Zero => (0.0, None, Some(0.0)),
            Family::Quadratic { a, .. } => (a, Some((a, 0.0)), None),
            Family::PowerAbs { .. } => (0.0, None, None),
            Family::DoubleWell { eps } => {
                let k = 12.0 - 2.0 * eps;
                (-2.0 * eps, (k > 0.0).then_some((k, 1.0)), None)
            }
            Family::PseudoHuber => (0.0, None, None),
            // hess = 2d e^{-x²}(1 − 2x²) is smallest at x² = 3/2.
            Family::GaussWell { depth } => (-4.0 * depth * (-1.5f64).exp(), None, Some(depth)),
        };
        Self {
            name: name.to_string(),
            family,
            alpha,
            k_outside,
            sup_abs,
            is_even: true,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, Family::Zero)
    }

    /// Exponent of a power family, if any.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            Family::PowerAbs { exponent } => Some(exponent),
            _ => None,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::Quadratic { a, offset } => 0.5 * a * x * x + offset,
            Family::PowerAbs { exponent } => {
                if exponent == 3.0 {
                    x * x * x.abs()
                } else {
                    x.abs().powf(exponent)
                }
            }
            Family::DoubleWell { eps } => {
                let x2 = x * x;
                x2 * x2 - eps * x2
            }
            Family::PseudoHuber => (1.0 + x * x).sqrt(),
            Family::GaussWell { depth } => -depth * (-x * x).exp(),
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::Quadratic { a, .. } => a * x,
            Family::PowerAbs { exponent } => {
                if exponent == 3.0 {
                    3.0 * x * x.abs()
                } else {
                    exponent * x.signum() * x.abs().powf(exponent - 1.0)
                }
            }
            Family::DoubleWell { eps } => 4.0 * x * x * x - 2.0 * eps * x,
            Family::PseudoHuber => x / (1.0 + x * x).sqrt(),
            Family::GaussWell { depth } => 2.0 * depth * x * (-x * x).exp(),
        }
    }

    pub fn hess(&self, x: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::Quadratic { a, .. } => a,
            Family::PowerAbs { exponent } => {
                if exponent == 3.0 {
                    6.0 * x.abs()
                } else {
                    exponent * (exponent - 1.0) * x.abs().powf(exponent - 2.0)
                }
            }
            Family::DoubleWell { eps } => 12.0 * x * x - 2.0 * eps,
            Family::PseudoHuber => (1.0 + x * x).powf(-1.5),
            Family::GaussWell { depth } => 2.0 * depth * (-x * x).exp() * (1.0 - 2.0 * x * x),
        }
    }

    /// Infimum of the second derivative over `|x| ≥ r`, from the closed form.
    pub fn convexity_outside(&self, r: f64) -> Option<f64> {
        let r = r.abs();
        match self.family {
            Family::Zero => Some(0.0),
            Family::Quadratic { a, .. } => Some(a),
            Family::PowerAbs { .. } | Family::DoubleWell { .. } => Some(self.hess(r)),
            Family::PseudoHuber => Some(0.0),
            Family::GaussWell { depth } => {
                let x2 = (r * r).max(1.5);
                Some(2.0 * depth * (-x2).exp() * (1.0 - 2.0 * x2))
            }
        }
    }

    /// Checks `grad` and `hess` against central finite differences of
    /// `value` and `grad` at step `1e-5`, relative tolerance `1e-6`.
    ///
    /// For the power family the step shrinks as `1e-5·|x|` inside `|x| < 1`
    /// and points closer than `1e-3` to the kink are skipped.
    pub fn verify_derivatives(&self, samples: &Lattice) -> Result<()> {
        const H: f64 = 1e-5;
        for x in samples.points() {
            if self.power_exponent().is_some() && x.abs() < 1e-3 {
                continue;
            }
            // |x|^p is not smooth at 0, so the step shrinks with |x| there.
            let h = if self.power_exponent().is_some() { H * x.abs().min(1.0) } else { H };
            let fd_grad = (self.value(x + h) - self.value(x - h)) / (2.0 * h);
            let fd_hess = (self.grad(x + h) - self.grad(x - h)) / (2.0 * h);
            let g = self.grad(x);
            let h = self.hess(x);
            // The FD error floor is roundoff of the function values, ~1e-16·|f|/H.
            let floor_g = 1e-10 * self.value(x).abs().max(1.0);
            let floor_h = 1e-10 * g.abs().max(1.0);
            if (fd_grad - g).abs() > 1e-6 * g.abs() + floor_g {
                return Err(Error::Invalid(format!(
                    "{}: grad({x}) = {g} but finite difference gives {fd_grad}",
                    self.name
                )));
            }
            if (fd_hess - h).abs() > 1e-6 * h.abs() + floor_h {
                return Err(Error::Invalid(format!(
                    "{}: hess({x}) = {h} but finite difference gives {fd_hess}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Scans the lattice and checks every metadata field: `alpha`,
    /// `(K, R)`, `sup_abs` and evenness.
    pub fn verify_metadata(&self, samples: &Lattice) -> Result<()> {
        let tol = |v: f64| 1e-12 * v.abs().max(1.0);
        for x in samples.points() {
            let h = self.hess(x);
            if h < self.alpha - tol(self.alpha) {
                return Err(Error::Invalid(format!(
                    "{}: hess({x}) = {h} < alpha = {}",
                    self.name, self.alpha
                )));
            }
            if let Some((k, r)) = self.k_outside {
                if x.abs() >= r && h < k - tol(k) {
                    return Err(Error::Invalid(format!(
                        "{}: hess({x}) = {h} < K = {k} outside R = {r}",
                        self.name
                    )));
                }
            }
            if let Some(s) = self.sup_abs {
                if self.value(x).abs() > s + tol(s) {
                    return Err(Error::Invalid(format!(
                        "{}: |value({x})| exceeds sup bound {s}",
                        self.name
                    )));
                }
            }
            if self.is_even {
                let (v, vm) = (self.value(x), self.value(-x));
                let (g, gm) = (self.grad(x), self.grad(-x));
                if (v - vm).abs() > tol(v) || (g + gm).abs() > tol(g) {
                    return Err(Error::Invalid(format!("{}: not even at {x}", self.name)));
                }
            }
        }
        Ok(())
    }
}

/// A uniform lattice `lo, lo + step, …` up to `hi` (inclusive, up to rounding).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Lattice {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        Self { lo, hi, step }
    }

    /// `count` equispaced points covering `[lo, hi]`.
    pub fn with_count(lo: f64, hi: f64, count: usize) -> Self {
        let step = if count > 1 {
            (hi - lo) / (count - 1) as f64
        } else {
            1.0
        };
        Self { lo, hi, step }
    }

    pub fn len(&self) -> usize {
        if !(self.hi >= self.lo) || !(self.step > 0.0) {
            return 0;
        }
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.lo + k as f64 * self.step)
            .collect()
    }
}

impl Default for Lattice {
    fn default() -> Self {
        Self::new(-10.0, 10.0, 0.01)
    }
}

/// Outcome of [`check_doubling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingReport {
    pub holds: bool,
    /// Smallest non-negative `C` with `P(x+y) ≤ C (1 + P(x) + P(y))` on the
    /// lattice.
    pub c_doubling: f64,
}

/// Smallest doubling constant of `p` over all lattice pairs of `domain`
/// sampled with `samples` points.
///
/// When `1 + P(x) + P(y)` is not positive somewhere the inequality is
/// meaningless: `holds` is false and the constant is reported for `P − min P`.
pub fn check_doubling(p: &PotentialSpec, domain: (f64, f64), samples: usize) -> Result<DoublingReport> {
    let (lo, hi) = domain;
    if !(hi > lo) {
        return Err(Error::Invalid(format!("empty domain [{lo}, {hi}]")));
    }
    if samples < 2 {
        return Err(Error::Invalid("doubling scan needs at least 2 samples".into()));
    }
    let xs = Lattice::with_count(lo, hi, samples).points();
    let vals: Vec<f64> = xs.iter().map(|&x| p.value(x)).collect();
    let mut shift = 0.0;
    let mut holds = true;
    let min_denominator = vals
        .iter()
        .flat_map(|a| vals.iter().map(move |b| 1.0 + a + b))
        .fold(f64::INFINITY, f64::min);
    if min_denominator <= 0.0 {
        holds = false;
        let mut min_v = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for &x in &xs {
            for &y in &xs {
                min_v = min_v.min(p.value(x + y));
            }
        }
        shift = -min_v;
    }
    let mut c: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            let ratio = (p.value(x + y) + shift) / (1.0 + vals[i] + vals[j] + 2.0 * shift);
            c = c.max(ratio);
        }
    }
    Ok(DoublingReport { holds, c_doubling: c })
}

/// Checks `(P'(x) − P'(y))(x − y) ≥ (K/3)|x − y|²` for every lattice pair
/// with `|x| ≥ 2R` or `|y| ≥ 2R`.
pub fn check_uniform_convexity_outside(p: &PotentialSpec, k: f64, r: f64, grid: &Lattice) -> bool {
    let xs = grid.points();
    let gs: Vec<f64> = xs.iter().map(|&x| p.grad(x)).collect();
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            if xs[i].abs() < 2.0 * r && xs[j].abs() < 2.0 * r {
                continue;
            }
            let d = xs[i] - xs[j];
            let lhs = (gs[i] - gs[j]) * d;
            let rhs = k / 3.0 * d * d;
            if lhs < rhs - 1e-12 * rhs.abs().max(1.0) {
                return false;
            }
        }
    }
    true
}

/// Degenerate-convexity profile `(p, c_deg)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyProfile {
    pub p: f64,
    pub c_deg: f64,
}

impl DegeneracyProfile {
    pub fn new(p: f64, c_deg: f64) -> Result<Self> {
        if !(p > 0.0) || !(c_deg > 0.0) {
            return Err(Error::Invalid(format!(
                "degeneracy profile needs p > 0 and c_deg > 0 (got p = {p}, c_deg = {c_deg})"
            )));
        }
        Ok(Self { p, c_deg })
    }

    /// Rate `c` of the polynomial contraction
    /// `W₂(t) ≤ (W₂(0)^{-p} + c t)^{-1/p}` obtained from this profile.
    ///
    /// From `d/dt w ≤ −c_deg ε^p (2w − ε²)` (with `w = W₂²`), the optimal
    /// `ε² = 2pw/(p+2)` gives `d/dt w ≤ −c_deg k_p w^{1+p/2}` with
    /// `k_p = (2p/(p+2))^{p/2} · 4/(p+2)`; integrating in `s = √w` yields
    /// `c = p c_deg k_p / 2`. For `p = 1`, `c_deg = 1/2` this is `√6/9`.
    pub fn polynomial_rate(&self) -> f64 {
        let p = self.p;
        let k_p = (2.0 * p / (p + 2.0)).powf(p / 2.0) * 4.0 / (p + 2.0);
        p * self.c_deg * k_p / 2.0
    }
}

/// Checks `(P'(y) − P'(x))(y − x) ≥ c_deg ε^p (|y − x|² − ε²)` for every
/// lattice pair and every `ε` in `eps_list`.
pub fn check_degenerate_convexity(
    p: &PotentialSpec,
    prof: &DegeneracyProfile,
    eps_list: &[f64],
    grid: &Lattice,
) -> Result<bool> {
    DegeneracyProfile::new(prof.p, prof.c_deg)?;
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Invalid("every eps must be positive".into()));
    }
    let xs = grid.points();
    let gs: Vec<f64> = xs.iter().map(|&x| p.grad(x)).collect();
    let weights: Vec<(f64, f64)> = eps_list
        .iter()
        .map(|&e| (prof.c_deg * e.powf(prof.p), e * e))
        .collect();
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            let d = xs[j] - xs[i];
            let lhs = (gs[j] - gs[i]) * d;
            for &(w, e2) in &weights {
                let rhs = w * (d * d - e2);
                if lhs < rhs - 1e-12 * rhs.abs().max(1.0) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
