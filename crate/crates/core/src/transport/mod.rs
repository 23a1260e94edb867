//! Exact one-dimensional optimal transport and the dissipation functional.
//!
//! In one dimension the optimal map between absolutely continuous measures is
//! the monotone rearrangement `T = Q_ν ∘ F_μ` and
//! `W₂²(μ, ν) = ∫₀¹ |Q_μ(u) − Q_ν(u)|² du`.

mod map;
mod probe;

pub use map::{MonotoneMap, TransportMap, MIN_SLOPE};
pub use probe::{probe_maps, translation_probe, wj_probe, ProbeOptions, ProbeRecord, ProbeReport};

use crate::error::{Error, Result};
use crate::measures::{require_even, GridMeasure, GridSpec, ParticleEnsemble};
use crate::potentials::{Family, PotentialSpec};

/// Exact W₂ between grid measures by midpoint quadrature of the quantile
/// difference with `4·max(m_μ, m_ν)` nodes.
pub fn wasserstein2(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    Ok(wasserstein2_sq(mu, nu)?.sqrt())
}

pub fn wasserstein2_sq(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    mu.require_normalized()?;
    nu.require_normalized()?;
    let n = 4 * mu.m().max(nu.m());
    let (em, en) = (mu.cdf_edges(), nu.cdf_edges());
    let mut acc = 0.0;
    for k in 0..n {
        let u = (k as f64 + 0.5) / n as f64;
        let d = mu.quantile_with(&em, u).0 - nu.quantile_with(&en, u).0;
        acc += d * d;
    }
    Ok(acc / n as f64)
}

/// W₂ between equal-size ensembles: the sorted matching is optimal.
pub fn wasserstein2_particles(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::CountMismatch(a.len(), b.len()));
    }
    let sorted = |p: &ParticleEnsemble| {
        let mut v = p.positions.clone();
        v.sort_by(f64::total_cmp);
        v
    };
    let (x, y) = (sorted(a), sorted(b));
    let s: f64 = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok((s / x.len() as f64).sqrt())
}

/// Monotone rearrangement pushing `mu` onto `nu`.
pub fn brenier_map(mu: &GridMeasure, nu: &GridMeasure) -> Result<TransportMap> {
    mu.require_normalized()?;
    nu.require_normalized()?;
    if !mu.has_connected_support() {
        return Err(Error::DisconnectedSupport);
    }
    Ok(TransportMap::Monotone(Box::new(MonotoneMap::new(mu, nu))))
}

/// Image measure `T#μ` on `grid`: the mass of each source cell is spread
/// uniformly over the image of the cell.
pub fn pushforward(mu: &GridMeasure, t: &TransportMap, grid: GridSpec) -> Result<GridMeasure> {
    let mut out = vec![0.0; grid.m];
    let dx = grid.dx();
    for (i, w) in mu.weights().into_iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let src = mu.grid();
        let (a, b) = (t.t_of(src.edge(i)), t.t_of(src.edge(i + 1)));
        let (a, b) = (a.min(b), a.max(b));
        let first = ((a - grid.lo) / dx).floor().max(0.0) as usize;
        if a >= grid.hi || b <= grid.lo {
            continue;
        }
        if b - a <= 0.0 {
            out[first.min(grid.m - 1)] += w;
            continue;
        }
        let mut k = first;
        while k < grid.m && grid.edge(k) < b {
            let overlap = (b.min(grid.edge(k + 1)) - a.max(grid.edge(k))).max(0.0);
            out[k] += w * overlap / (b - a);
            k += 1;
        }
    }
    let density = out.into_iter().map(|w| w / dx).collect();
    GridMeasure::new(grid, density)
}

/// Terms of the dissipation functional `J(T#μ | μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JParts {
    /// `∫ (T' + 1/T' − 2) dμ`
    pub diffusion: f64,
    /// `∫ (V'(T) − V'(x)) (T − x) dμ`
    pub confinement: f64,
    /// `½∬ (W'(Tx − Ty) − W'(x − y)) (Tx − Ty − (x − y)) dμ dμ`
    pub interaction: f64,
}

impl JParts {
    pub fn total(&self) -> f64 {
        self.diffusion + self.confinement + self.interaction
    }
}

/// `J_{V,W}(T#μ | μ)` with the one-dimensional Hessian terms
/// `Δφ = T'` and `Δφ*(∇φ) = 1/T'`.
pub fn dissipation_j(mu: &GridMeasure, t: &TransportMap, v: &PotentialSpec, w: &PotentialSpec) -> Result<f64> {
    Ok(dissipation_j_parts(mu, t, v, w)?.total())
}

pub fn dissipation_j_parts(mu: &GridMeasure, t: &TransportMap, v: &PotentialSpec, w: &PotentialSpec) -> Result<JParts> {
    require_even(w)?;
    let (tv, dtv) = t.tabulate(mu);
    j_from_table(mu, &tv, &dtv, v, w)
}

pub(crate) fn j_from_table(mu: &GridMeasure, tv: &[f64], dtv: &[f64], v: &PotentialSpec, w: &PotentialSpec) -> Result<JParts> {
    let xs = mu.centers();
    let wts = mu.weights();
    let mut parts = JParts::default();
    let mut idx = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        if wts[i] <= 0.0 {
            continue;
        }
        let d = dtv[i];
        if !(d > 0.0) {
            return Err(Error::NonMonotoneMap(xs[i]));
        }
        let (x, tx) = (xs[i], tv[i]);
        parts.diffusion += wts[i] * (d + 1.0 / d - 2.0);
        parts.confinement += wts[i] * (v.grad(tx) - v.grad(x)) * (tx - x);
        idx.push(i);
    }
    parts.interaction = match w.family() {
        Family::Zero => 0.0,
        Family::Quadratic { a, .. } => {
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for &i in &idx {
                let u = tv[i] - xs[i];
                s0 += wts[i];
                s1 += wts[i] * u;
                s2 += wts[i] * u * u;
            }
            a * (s0 * s2 - s1 * s1)
        }
        _ => {
            // symmetric summand: sum over i > j
            let mut acc = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                let mut row = 0.0;
                for &j in &idx[..k] {
                    let a = tv[i] - tv[j];
                    let b = xs[i] - xs[j];
                    row += wts[j] * (w.grad(a) - w.grad(b)) * (a - b);
                }
                acc += wts[i] * row;
            }
            acc
        }
    };
    Ok(parts)
}

/// `∫ |T − x|² dμ` by midpoint quadrature.
pub fn displacement_sq(mu: &GridMeasure, t: &TransportMap) -> f64 {
    let (tv, _) = t.tabulate(mu);
    mu.centers()
        .iter()
        .zip(&tv)
        .zip(mu.weights())
        .map(|((x, t), w)| w * (t - x) * (t - x))
        .sum()
}

/// Volume of the unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// WJ constant `2 (3/K + 4 c_n R^{2+n} e^M)^{-1}` for an interaction that is
/// `K`-convex outside the ball of radius `R`, with `M` from
/// [`hyp_u_constant`].
pub fn wj_constant(k: f64, r: f64, m: f64, n: u32) -> Result<f64> {
    if !(k > 0.0) || !(r > 0.0) || n == 0 {
        return Err(Error::Invalid(format!("wj_constant needs K > 0, R > 0, n ≥ 1 (K={k}, R={r}, n={n})")));
    }
    Ok(2.0 / (3.0 / k + 4.0 * unit_ball_volume(n) * r.powf(2.0 + n as f64) * m.exp()))
}

/// `sup_{|x−y| ≤ 2R} sup_{z ∈ [x,y]} U(z) − U(x) − U(y)` for `U = −log ρ`
/// over the support of `mu`.
pub fn hyp_u_constant(mu: &GridMeasure, r: f64) -> Result<f64> {
    let (a, b) = mu.support().ok_or(Error::ZeroMass)?;
    let rho = mu.density();
    if let Some(k) = (a..=b).find(|&k| rho[k] <= 0.0) {
        return Err(Error::ZeroDensityInSupport(mu.grid().center(k)));
    }
    let u: Vec<f64> = rho[a..=b].iter().map(|v| -v.ln()).collect();
    let xs: Vec<f64> = (a..=b).map(|i| mu.grid().center(i)).collect();
    hyp_u_from_values(&xs, &u, r)
}

/// [`hyp_u_constant`] for tabulated `U` at increasing points `xs`.
pub fn hyp_u_from_values(xs: &[f64], u: &[f64], r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("radius must be positive, got {r}")));
    }
    if xs.len() != u.len() || xs.is_empty() {
        return Err(Error::Invalid("need matching, non-empty tables".into()));
    }
    let reach = 2.0 * r * (1.0 + 1e-12);
    let mut best = f64::NEG_INFINITY;
    for i in 0..xs.len() {
        let mut zmax = f64::NEG_INFINITY;
        for j in i..xs.len() {
            if xs[j] - xs[i] > reach {
                break;
            }
            zmax = zmax.max(u[j]);
            best = best.max(zmax - u[i] - u[j]);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GridSpec;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn pot(name: &str, p: &[f64]) -> PotentialSpec {
        PotentialSpec::builtin(name, p).unwrap()
    }

    fn gauss(g: GridSpec, m: f64, s: f64) -> GridMeasure {
        GridMeasure::gaussian(g, m, s).unwrap()
    }

    #[test]
    fn w2_examples() {
        let g = GridSpec::new(-12.0, 14.0, 1300).unwrap();
        let a = gauss(g, 0.0, 1.0);
        assert!(wasserstein2(&a, &a).unwrap() < 1e-10);
        assert!((wasserstein2(&a, &gauss(g, 2.0, 1.0)).unwrap() - 2.0).abs() < 2.0 * g.dx());
        assert!((wasserstein2(&a, &gauss(g, 0.0, 2.0)).unwrap() - 1.0).abs() < 2.0 * g.dx());
        let half = GridMeasure::new(g, vec![0.5; g.m]).unwrap();
        assert!(matches!(wasserstein2(&a, &half), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn w2_against_quantile_oracle() {
        // independent oracle: analytic normal quantiles
        let g = GridSpec::new(-10.0, 10.0, 2000).unwrap();
        let (a, b) = (gauss(g, -0.5, 0.7), gauss(g, 1.0, 1.6));
        let (na, nb) = (Normal::new(-0.5, 0.7).unwrap(), Normal::new(1.0, 1.6).unwrap());
        let n = 20_000;
        let oracle: f64 = (0..n)
            .map(|k| {
                let u = (k as f64 + 0.5) / n as f64;
                (na.inverse_cdf(u) - nb.inverse_cdf(u)).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((wasserstein2_sq(&a, &b).unwrap() - oracle).abs() < 1e-3);
    }

    #[test]
    fn particle_w2_examples() {
        let p = |v: Vec<f64>| ParticleEnsemble::new(v, 0, 0.0).unwrap();
        assert_eq!(wasserstein2_particles(&p(vec![0.0, 1.0]), &p(vec![0.0, 1.0])).unwrap(), 0.0);
        assert!((wasserstein2_particles(&p(vec![0.0, 1.0]), &p(vec![1.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((wasserstein2_particles(&p(vec![0.0, 2.0]), &p(vec![1.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!(wasserstein2_particles(&p(vec![0.0]), &p(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn sampled_w2_matches_grid_w2() {
        let g = GridSpec::new(-8.0, 10.0, 900).unwrap();
        let (a, b) = (gauss(g, 0.0, 1.0), gauss(g, 1.5, 0.6));
        let pa = ParticleEnsemble::sample_from_grid(&a, 100_000, 1).unwrap();
        let pb = ParticleEnsemble::sample_from_grid(&b, 100_000, 2).unwrap();
        let grid_w2 = wasserstein2(&a, &b).unwrap();
        assert!((wasserstein2_particles(&pa, &pb).unwrap() - grid_w2).abs() < 0.02);
    }

    #[test]
    fn histogram_of_many_normals_is_close() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = ParticleEnsemble::new(xs, 5, 0.0).unwrap();
        let h = p.to_grid(-6.0, 6.0, 200).unwrap();
        let exact = gauss(GridSpec::new(-6.0, 6.0, 200).unwrap(), 0.0, 1.0);
        assert!(wasserstein2(&h, &exact).unwrap() < 0.01);
    }

    #[test]
    fn brenier_examples() {
        let g = GridSpec::new(-10.0, 14.0, 1200).unwrap();
        let a = gauss(g, 0.0, 1.0);
        let id = brenier_map(&a, &a).unwrap();
        for x in [-2.0, -0.3, 0.0, 1.7] {
            assert!((id.t_of(x) - x).abs() < g.dx());
        }
        let t = brenier_map(&a, &gauss(g, 1.5, 2.0)).unwrap();
        for x in [-2.0, -0.3, 0.0, 1.7] {
            assert!((t.t_of(x) - (1.5 + 2.0 * x)).abs() < 2.0 * g.dx(), "{x} {} {}", t.t_of(x), t.dt_of(x));
            // piecewise-constant densities: O(dx·|log ρ|') slope error
            assert!((t.dt_of(x) - 2.0).abs() < 0.1, "{x} {}", t.dt_of(x));
        }
        let gu = GridSpec::new(0.0, 2.0, 400).unwrap();
        let u1 = GridMeasure::uniform(gu, 0.0, 1.0).unwrap();
        let u2 = GridMeasure::uniform(gu, 0.0, 2.0).unwrap();
        let t = brenier_map(&u1, &u2).unwrap();
        for x in [0.1, 0.5, 0.93] {
            assert!((t.t_of(x) - 2.0 * x).abs() < 2.0 * gu.dx());
        }
        if let TransportMap::Monotone(m) = &t {
            assert!(m.clamped.is_empty());
        }
        let holes = GridMeasure::new(gu, (0..400).map(|i| if i % 50 == 7 { 0.0 } else { 1.0 }).collect())
            .unwrap()
            .normalized()
            .unwrap();
        assert!(matches!(brenier_map(&holes, &u2), Err(Error::DisconnectedSupport)));
    }

    #[test]
    fn brenier_pushforward_property() {
        let g = GridSpec::new(-8.0, 8.0, 800).unwrap();
        let mu = gauss(g, -1.0, 0.8);
        let nu = GridMeasure::from_fn(g, |x| (-(x * x - 2.0).powi(2)).exp()).unwrap();
        let t = brenier_map(&mu, &nu).unwrap();
        for gfun in [|x: f64| x, |x: f64| x * x, |x: f64| x.sin()] {
            let lhs: f64 = mu.centers().iter().zip(mu.weights()).map(|(&x, w)| w * gfun(t.t_of(x))).sum();
            let rhs: f64 = nu.centers().iter().zip(nu.weights()).map(|(&x, w)| w * gfun(x)).sum();
            assert!((lhs - rhs).abs() < 1e-3, "{lhs} vs {rhs}");
        }
        let w2 = wasserstein2_sq(&mu, &nu).unwrap();
        assert!((displacement_sq(&mu, &t) - w2).abs() < 0.02 * w2);
        let img = pushforward(&mu, &t, g).unwrap();
        assert!(wasserstein2(&img, &nu).unwrap() < 2.0 * g.dx());
    }

    #[test]
    fn map_derivatives_match_finite_differences() {
        let g = GridSpec::new(-8.0, 8.0, 800).unwrap();
        let pl = TransportMap::piecewise_linear(vec![-1.0, 0.0, 0.5, 2.0], &[0.5, 2.0, 1.3], 1.0, 1.0).unwrap();
        let maps = [TransportMap::Identity, TransportMap::dilation(1.7, 0.3), TransportMap::translation(-2.0), pl];
        for t in &maps {
            for x in [-3.0, -0.7, 0.2, 1.1, 4.0] {
                let h = 1e-6;
                let fd = (t.t_of(x + h) - t.t_of(x - h)) / (2.0 * h);
                assert!((fd - t.dt_of(x)).abs() < 1e-5 * t.dt_of(x), "{} at {x}", t.description());
            }
        }
        let b = brenier_map(&gauss(g, 0.0, 1.0), &gauss(g, 0.0, 1.0)).unwrap();
        let (tv, _) = b.tabulate(&gauss(g, 0.0, 1.0));
        assert!(tv.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn j_examples() {
        let g = GridSpec::new(-12.0, 12.0, 1200).unwrap();
        let mu = gauss(g, 0.0, 1.0);
        let (zero, quad, cubic) = (pot("zero", &[]), pot("quadratic", &[1.0]), pot("cubic_abs", &[]));
        for (v, w) in [(&zero, &zero), (&quad, &cubic), (&cubic, &quad)] {
            assert_eq!(dissipation_j(&mu, &TransportMap::Identity, v, w).unwrap(), 0.0);
        }
        let m = 0.7;
        let j = dissipation_j(&mu, &TransportMap::translation(m), &quad, &zero).unwrap();
        assert!((j - m * m).abs() < 1e-6 * m * m);
        for lambda in [0.3, 1.0, 2.5] {
            let j = dissipation_j(&mu, &TransportMap::dilation(lambda, 0.0), &zero, &zero).unwrap();
            assert!((j - (lambda + 1.0 / lambda - 2.0)).abs() < 1e-8);
        }
        let bad = TransportMap::Affine { scale: -1.0, shift: 0.0 };
        assert!(matches!(dissipation_j(&mu, &bad, &zero, &zero), Err(Error::NonMonotoneMap(_))));
    }

    #[test]
    fn near_identity_brenier_diffusion_term() {
        // displacement far below dx: the entropy term must still be O(ε²)
        let g = GridSpec::new(-10.0, 10.0, 400).unwrap();
        let mu = gauss(g, 0.0, 1.0);
        for eps in [1e-3, 1e-2, 1e-1] {
            let s = 1.0 + eps;
            let t = brenier_map(&mu, &gauss(g, 0.0, s)).unwrap();
            let z = pot("zero", &[]);
            let d = dissipation_j_parts(&mu, &t, &z, &z).unwrap().diffusion;
            let exact = s + 1.0 / s - 2.0;
            assert!((d - exact).abs() < 0.1 * exact, "eps {eps}: {d} vs {exact}");
        }
    }

    #[test]
    fn interaction_term_matches_pairwise_sum() {
        let g = GridSpec::new(-5.0, 5.0, 120).unwrap();
        let mu = gauss(g, 0.3, 1.1);
        let t = TransportMap::piecewise_linear(vec![-2.0, -0.5, 1.0, 2.5], &[0.6, 1.8, 0.9], 1.0, 1.0).unwrap();
        let xs = mu.centers();
        let w8 = mu.weights();
        for w in [pot("quadratic", &[1.3]), pot("cubic_abs", &[]), pot("gauss_well", &[0.2])] {
            let parts = dissipation_j_parts(&mu, &t, &pot("zero", &[]), &w).unwrap();
            let mut oracle = 0.0;
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    let a = t.t_of(xs[i]) - t.t_of(xs[j]);
                    let b = xs[i] - xs[j];
                    oracle += 0.5 * w8[i] * w8[j] * (w.grad(a) - w.grad(b)) * (a - b);
                }
            }
            assert!((parts.interaction - oracle).abs() < 1e-12 * (1.0 + oracle.abs()), "{}", w.name());
        }
    }

    #[test]
    fn wj_constant_examples() {
        assert!((wj_constant(6.0, 1.0, 0.0, 1).unwrap() - 2.0 / 8.5).abs() < 1e-12);
        let c = wj_constant(1.0, 1.0, 1.0, 1).unwrap();
        assert!((c - 2.0 / (3.0 + 8.0 * 1f64.exp())).abs() < 1e-12);
        let seq: Vec<f64> = (1..8)
            .map(|k| wj_constant(10f64.powi(k), 10f64.powi(-k), 0.0, 1).unwrap())
            .collect();
        assert!(seq.windows(2).all(|w| w[1] > w[0]));
        assert!(wj_constant(0.0, 1.0, 0.0, 1).is_err());
        assert!(wj_constant(1.0, 0.0, 0.0, 1).is_err());
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    fn hyp_oracle(xs: &[f64], u: &[f64], r: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if (xs[i] - xs[j]).abs() > 2.0 * r + 1e-12 {
                    continue;
                }
                let (a, b) = (i.min(j), i.max(j));
                for k in a..=b {
                    best = best.max(u[k] - u[i] - u[j]);
                }
            }
        }
        best
    }

    #[test]
    fn hyp_u_examples() {
        let xs: Vec<f64> = (0..161).map(|i| -4.0 + 0.05 * i as f64).collect();
        let quad: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
        let lap: Vec<f64> = xs.iter().map(|x: &f64| x.abs()).collect();
        for u in [&quad, &lap] {
            let m = hyp_u_from_values(&xs, u, 1.0).unwrap();
            assert!(m.abs() < 1e-6);
            assert!((m - hyp_oracle(&xs, u, 1.0)).abs() < 1e-12);
        }
        let g = GridSpec::new(0.0, 2.0, 100).unwrap();
        let uni = GridMeasure::uniform(g, 0.0, 2.0).unwrap();
        // U = −log(1/2) = log 2
        assert!((hyp_u_constant(&uni, 0.5).unwrap() + 2f64.ln()).abs() < 1e-12);
        // normalized Gaussian: U = x²/2 + ½log 2π
        let gs = GridSpec::new(-8.0, 8.0, 801).unwrap();
        let n = gauss(gs, 0.0, 1.0);
        let expect = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((hyp_u_constant(&n, 1.0).unwrap() - expect).abs() < 1e-6);
        let mut holed = n.clone();
        holed.density_mut()[400] = 0.0;
        assert!(matches!(hyp_u_constant(&holed, 1.0), Err(Error::ZeroDensityInSupport(_))));
    }

    proptest! {
        #[test]
        fn w2_is_symmetric_and_nonnegative(m1 in -2.0f64..2.0, s1 in 0.4f64..2.0, m2 in -2.0f64..2.0, s2 in 0.4f64..2.0) {
            let g = GridSpec::new(-12.0, 12.0, 300).unwrap();
            let (a, b) = (gauss(g, m1, s1), gauss(g, m2, s2));
            let ab = wasserstein2(&a, &b).unwrap();
            let ba = wasserstein2(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
            let c = gauss(g, 0.5 * (m1 + m2), 1.0);
            let via = wasserstein2(&a, &c).unwrap() + wasserstein2(&c, &b).unwrap();
            prop_assert!(ab <= via + 2.0 * g.dx());
        }

        #[test]
        fn j_dominates_alpha_w2_for_convex_v(shift in -1.0f64..1.0, lambda in 0.3f64..3.0, a in 0.2f64..3.0) {
            let g = GridSpec::new(-10.0, 10.0, 400).unwrap();
            let mu = gauss(g, 0.2, 1.0);
            let v = pot("quadratic", &[a]);
            let t = TransportMap::dilation(lambda, 0.0).shifted(shift);
            let j = dissipation_j(&mu, &t, &v, &pot("cubic_abs", &[])).unwrap();
            prop_assert!(j >= a * displacement_sq(&mu, &t) - 1e-12);
        }
    }
}
