use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use crate::error::{Error, Result};

/// Uniform cell-centred grid on `[lo, hi]` with `m` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub m: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidGrid(format!("bad interval [{lo}, {hi}]")));
        }
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells, got {m}")));
        }
        Ok(Self { lo, hi, m })
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.m as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.center(i)).collect()
    }
}

/// A probability density on a uniform grid, stored as cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: GridSpec,
    density: Vec<f64>,
}

impl GridMeasure {
    /// Wraps raw cell values. They must be finite and non-negative; they are
    /// not normalized.
    pub fn new(grid: GridSpec, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.m {
            return Err(Error::InvalidGrid(format!(
                "density has {} cells, grid has {}",
                density.len(),
                grid.m
            )));
        }
        if let Some(bad) = density.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGrid(format!("invalid density value {bad}")));
        }
        Ok(Self { grid, density })
    }

    /// Samples `f` at cell centres and normalizes.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let density = grid.centers().into_iter().map(|x| f(x).max(0.0)).collect();
        Self::new(grid, density)?.normalized()
    }

    /// `e^{-u(x)}` sampled at cell centres, normalized. The minimum of `u`
    /// is subtracted first so the exponent never overflows.
    pub fn gibbs(grid: GridSpec, u: &[f64]) -> Result<Self> {
        let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
        let density = u.iter().map(|&v| (u_min - v).exp()).collect();
        Self::new(grid, density)?.normalized()
    }

    pub fn gaussian(grid: GridSpec, mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(Error::Invalid(format!("gaussian sd must be positive, got {sd}")));
        }
        Self::from_fn(grid, |x| {
            let z = (x - mean) / sd;
            (-0.5 * z * z).exp()
        })
    }

    /// Uniform density on `[a, b]`, with partially covered cells weighted by
    /// their overlap.
    pub fn uniform(grid: GridSpec, a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Invalid(format!("empty uniform support [{a}, {b}]")));
        }
        let density = (0..grid.m)
            .map(|i| {
                let (l, r) = (grid.edge(i), grid.edge(i + 1));
                (r.min(b) - l.max(a)).max(0.0)
            })
            .collect();
        Self::new(grid, density)?.normalized()
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn density_mut(&mut self) -> &mut [f64] {
        &mut self.density
    }

    pub fn into_density(self) -> Vec<f64> {
        self.density
    }

    pub fn m(&self) -> usize {
        self.grid.m
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn lo(&self) -> f64 {
        self.grid.lo
    }

    pub fn hi(&self) -> f64 {
        self.grid.hi
    }

    pub fn centers(&self) -> Vec<f64> {
        self.grid.centers()
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.dx()
    }

    /// Cell masses `ρ_i dx`.
    pub fn weights(&self) -> Vec<f64> {
        let dx = self.dx();
        self.density.iter().map(|v| v * dx).collect()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        self.density.iter_mut().for_each(|v| *v /= mass);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.mass() - 1.0).abs() <= tol
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.is_normalized(1e-9) {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.mass()))
        }
    }

    /// Midpoint-rule mean and raw second moment.
    pub fn moments(&self) -> (f64, f64) {
        let dx = self.dx();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, &rho) in self.density.iter().enumerate() {
            let x = self.grid.center(i);
            m1 += x * rho;
            m2 += x * x * rho;
        }
        (m1 * dx, m2 * dx)
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    /// CDF at the `m + 1` cell edges.
    pub fn cdf_edges(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut out = Vec::with_capacity(self.m() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &rho in &self.density {
            acc += rho * dx;
            out.push(acc);
        }
        out
    }

    /// Piecewise-linear CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let edges = self.cdf_edges();
        self.cdf_with(&edges, x)
    }

    pub(crate) fn cdf_with(&self, edges: &[f64], x: f64) -> f64 {
        if x <= self.lo() {
            return 0.0;
        }
        if x >= self.hi() {
            return edges[self.m()];
        }
        let pos = (x - self.lo()) / self.dx();
        let i = (pos.floor() as usize).min(self.m() - 1);
        edges[i] + self.density[i] * (x - self.grid.edge(i))
    }

    /// Generalized inverse of the CDF.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::OutOfUnitInterval(u));
        }
        let edges = self.cdf_edges();
        Ok(self.quantile_with(&edges, u).0)
    }

    /// Quantile together with the (positive-mass) cell that contains it.
    ///
    /// `u` is measured in units of total mass, so unnormalized roundoff does
    /// not push it past the last cell.
    pub(crate) fn quantile_with(&self, edges: &[f64], u: f64) -> (f64, usize) {
        let total = edges[self.m()];
        let target = u * total;
        // first edge index k with edges[k] >= target; cell is k-1
        let k = edges.partition_point(|&c| c < target).clamp(1, self.m());
        let mut i = k - 1;
        while self.density[i] <= 0.0 && i + 1 < self.m() {
            i += 1;
        }
        let rho = self.density[i];
        let x = if rho > 0.0 {
            self.grid.edge(i) + ((target - edges[i]) / (rho * self.dx())).clamp(0.0, 1.0) * self.dx()
        } else {
            self.grid.edge(i)
        };
        (x, i)
    }

    /// First and last cell with positive density.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.density.iter().position(|&v| v > 0.0)?;
        let last = self.density.iter().rposition(|&v| v > 0.0)?;
        Some((first, last))
    }

    /// True when the positive cells form one contiguous block.
    pub fn has_connected_support(&self) -> bool {
        match self.support() {
            Some((a, b)) => self.density[a..=b].iter().all(|&v| v > 0.0),
            None => false,
        }
    }

    /// `Σ |ρ_i − σ_i| dx`.
    pub fn l1_distance(&self, other: &GridMeasure) -> f64 {
        self.density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.dx()
    }

    /// Translates the density by `shift`: a circular shift by whole cells
    /// followed by linear interpolation for the sub-cell remainder.
    pub fn translated(&self, shift: f64) -> GridMeasure {
        let m = self.m() as isize;
        let cells = shift / self.dx();
        let whole = cells.floor();
        let frac = cells - whole;
        let whole = whole as isize;
        let src = |j: isize| self.density[j.rem_euclid(m) as usize];
        let density = (0..m)
            .map(|i| (1.0 - frac) * src(i - whole) + frac * src(i - whole - 1))
            .collect();
        GridMeasure {
            grid: self.grid,
            density,
        }
    }

    /// Mass-conservative shift by `|delta| < dx`: each face carries the
    /// upwind fraction `delta/dx` of its donor cell; no mass crosses the
    /// domain boundary.
    pub(crate) fn shift_small(&mut self, delta: f64) {
        let s = delta / self.dx();
        if s == 0.0 || !s.is_finite() {
            return;
        }
        let m = self.m();
        let old = self.density.clone();
        if s > 0.0 {
            for f in 0..m - 1 {
                let flux = s * old[f];
                self.density[f] -= flux;
                self.density[f + 1] += flux;
            }
        } else {
            for f in 0..m - 1 {
                let flux = -s * old[f + 1];
                self.density[f + 1] -= flux;
                self.density[f] += flux;
            }
        }
    }

    /// CSV with header `x,density`, preceded by a `# lo=.. hi=..` line so the
    /// grid round-trips exactly.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# lo={:e} hi={:e}\nx,density\n", self.lo(), self.hi());
        for (i, &rho) in self.density.iter().enumerate() {
            let _ = writeln!(out, "{:e},{:e}", self.grid.center(i), rho);
        }
        out
    }

    /// Reads the format written by [`to_csv`](Self::to_csv). Without the
    /// comment line the grid is reconstructed from the cell centres.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut bounds: Option<(f64, f64)> = None;
        let mut xs = Vec::new();
        let mut density = Vec::new();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let kv = parse_sidecar(comment);
                if let (Some(lo), Some(hi)) = (kv_get(&kv, "lo"), kv_get(&kv, "hi")) {
                    bounds = Some((lo, hi));
                }
                continue;
            }
            if line.starts_with("x,") {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok()).ok_or(Error::Config {
                    line: n + 1,
                    msg: format!("bad row '{line}'"),
                })
            };
            xs.push(parse(parts.next())?);
            density.push(parse(parts.next())?);
        }
        let m = density.len();
        let (lo, hi) = match bounds {
            Some(b) => b,
            None => {
                if m < 2 {
                    return Err(Error::InvalidGrid("need at least 2 rows".into()));
                }
                let dx = (xs[m - 1] - xs[0]) / (m - 1) as f64;
                (xs[0] - 0.5 * dx, xs[m - 1] + 0.5 * dx)
            }
        };
        Self::new(GridSpec::new(lo, hi, m)?, density)
    }
}

/// Parses `key=value` tokens of a comment line.
pub(crate) fn parse_sidecar(comment: &str) -> Vec<(String, String)> {
    comment
        .split_whitespace()
        .filter_map(|tok| {
            let (k, v) = tok.split_once('=')?;
            Some((k.to_string(), v.to_string()))
        })
        .collect()
}

pub(crate) fn kv_get(kv: &[(String, String)], key: &str) -> Option<f64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
}
