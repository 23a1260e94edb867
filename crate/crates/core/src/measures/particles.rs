use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::potentials::{Family, PotentialSpec};

use super::grid::{kv_get, parse_sidecar};
use super::{GridMeasure, GridSpec};

/// Equal-weight particle approximation of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    /// Seed the ensemble was drawn or evolved with.
    pub seed: u64,
    pub time: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, seed: u64, time: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Invalid("ensemble needs at least one particle".into()));
        }
        if let Some(x) = positions.iter().find(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("non-finite particle position {x}")));
        }
        Ok(Self {
            positions,
            seed,
            time,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.positions.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / self.len() as f64
    }

    /// Inverse-CDF sampling of `n` i.i.d. points from `mu`.
    pub fn sample_from_grid(mu: &GridMeasure, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("need at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = mu.cdf_edges();
        let positions = (0..n)
            .map(|_| {
                // open interval (0, 1)
                let u: f64 = loop {
                    let u = rng.random::<f64>();
                    if u > 0.0 {
                        break u;
                    }
                };
                mu.quantile_with(&edges, u).0
            })
            .collect();
        Self::new(positions, seed, 0.0)
    }

    /// Histogram on `[lo, hi]` with `m` cells. Particles outside are dropped;
    /// a particle exactly on `hi` goes to the last cell.
    pub fn to_grid(&self, lo: f64, hi: f64, m: usize) -> Result<GridMeasure> {
        let grid = GridSpec::new(lo, hi, m)?;
        let dx = grid.dx();
        let mut counts = vec![0.0; m];
        let mut inside = 0usize;
        for &x in &self.positions {
            if x < lo || x > hi {
                continue;
            }
            let i = (((x - lo) / dx).floor() as usize).min(m - 1);
            counts[i] += 1.0;
            inside += 1;
        }
        if inside == 0 {
            return Err(Error::NoParticlesInside { lo, hi });
        }
        GridMeasure::new(grid, counts)?.normalized()
    }

    /// CSV `position` with a `# seed=<u64> time=<f>` sidecar line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={} time={:e}\nposition\n", self.seed, self.time);
        for x in &self.positions {
            let _ = writeln!(out, "{x:e}");
        }
        out
    }

    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let (mut seed, mut time) = (0u64, 0.0);
        let mut positions = Vec::new();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "position" {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let kv = parse_sidecar(comment);
                if let Some((_, s)) = kv.iter().find(|(k, _)| k == "seed") {
                    seed = s.parse().map_err(|_| Error::Config {
                        line: n + 1,
                        msg: format!("bad seed '{s}'"),
                    })?;
                }
                time = kv_get(&kv, "time").unwrap_or(time);
                continue;
            }
            positions.push(line.parse().map_err(|_| Error::Config {
                line: n + 1,
                msg: format!("bad position '{line}'"),
            })?);
        }
        Self::new(positions, seed, time)
    }
}

/// Mean-field force `(1/N) Σ_j W'(X_i − X_j)` for every particle.
///
/// Quadratic kernels reduce to the empirical mean and `|x|³` to prefix sums
/// over the sorted positions; other kernels are summed pairwise.
pub fn mean_field_force(positions: &[f64], w: &PotentialSpec) -> Vec<f64> {
    let n = positions.len();
    let inv_n = 1.0 / n as f64;
    match w.family() {
        Family::Zero => vec![0.0; n],
        Family::Quadratic { a, .. } => {
            let mean = positions.iter().sum::<f64>() * inv_n;
            positions.iter().map(|x| a * (x - mean)).collect()
        }
        Family::PowerAbs { exponent } if exponent == 3.0 => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| positions[i].total_cmp(&positions[j]));
            let c = positions.iter().sum::<f64>() * inv_n;
            let y: Vec<f64> = order.iter().map(|&i| positions[i] - c).collect();
            let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
            for v in &y {
                t1 += v;
                t2 += v * v;
            }
            t0 += n as f64;
            let (mut l0, mut l1, mut l2) = (0.0, 0.0, 0.0);
            let mut out = vec![0.0; n];
            for (k, &x) in y.iter().enumerate() {
                let (r0, r1, r2) = (t0 - l0 - 1.0, t1 - l1 - x, t2 - l2 - x * x);
                let left = x * x * l0 - 2.0 * x * l1 + l2;
                let right = x * x * r0 - 2.0 * x * r1 + r2;
                out[order[k]] = 3.0 * (left - right) * inv_n;
                l0 += 1.0;
                l1 += x;
                l2 += x * x;
            }
            out
        }
        _ => positions
            .iter()
            .map(|&xi| positions.iter().map(|&xj| w.grad(xi - xj)).sum::<f64>() * inv_n)
            .collect(),
    }
}
