//! Grid convolutions `W * ρ` and `W' * ρ`.
//!
//! Sums run over cell centres with weights `ρ_j dx`. The quadratic and
//! `|x|³` families have exact moment/prefix-sum evaluations of the same
//! discrete sums; everything else uses an `O(m²)` kernel table.

use crate::error::{Error, Result};
use crate::measures::GridMeasure;
use crate::potentials::{Family, PotentialSpec};

use super::GridSpec;

/// `a[i] = Σ_j W'(x_i − x_j) ρ_j dx`.
pub fn convolve_grad_w(mu: &GridMeasure, w: &PotentialSpec) -> Result<Vec<f64>> {
    require_even(w)?;
    Ok(conv_grad(&mu.grid(), mu.density(), w))
}

/// `a[i] = Σ_j W(x_i − x_j) ρ_j dx`.
pub fn convolve_w(mu: &GridMeasure, w: &PotentialSpec) -> Result<Vec<f64>> {
    require_even(w)?;
    Ok(conv_value(&mu.grid(), mu.density(), w))
}

pub(crate) fn require_even(w: &PotentialSpec) -> Result<()> {
    if w.is_even {
        Ok(())
    } else {
        Err(Error::NotEven(w.name().to_string()))
    }
}

/// Centre coordinates shifted to the middle of the grid, which keeps the
/// moment sums well conditioned on off-centre domains.
fn local_coords(grid: &GridSpec) -> Vec<f64> {
    let dx = grid.dx();
    let half = 0.5 * grid.m as f64;
    (0..grid.m).map(|i| (i as f64 + 0.5 - half) * dx).collect()
}

pub(crate) fn conv_value(grid: &GridSpec, rho: &[f64], w: &PotentialSpec) -> Vec<f64> {
    let dx = grid.dx();
    let m = grid.m;
    match w.family() {
        Family::Zero => vec![0.0; m],
        Family::Quadratic { a, offset } => {
            let y = local_coords(grid);
            let (m0, m1, m2) = moments3(&y, rho, dx);
            y.iter()
                .map(|&x| 0.5 * a * (x * x * m0 - 2.0 * x * m1 + m2) + offset * m0)
                .collect()
        }
        Family::PowerAbs { exponent } if exponent == 3.0 => cubic_value(grid, rho),
        _ => {
            let table: Vec<f64> = (0..m).map(|d| w.value(d as f64 * dx)).collect();
            direct(rho, dx, |d| table[d.unsigned_abs()])
        }
    }
}

pub(crate) fn conv_grad(grid: &GridSpec, rho: &[f64], w: &PotentialSpec) -> Vec<f64> {
    let dx = grid.dx();
    let m = grid.m;
    match w.family() {
        Family::Zero => vec![0.0; m],
        Family::Quadratic { a, .. } => {
            let y = local_coords(grid);
            let (m0, m1, _) = moments3(&y, rho, dx);
            y.iter().map(|&x| a * (x * m0 - m1)).collect()
        }
        Family::PowerAbs { exponent } if exponent == 3.0 => cubic_grad(grid, rho),
        _ => {
            let table: Vec<f64> = (0..m).map(|d| w.grad(d as f64 * dx)).collect();
            direct(rho, dx, |d| {
                let g = table[d.unsigned_abs()];
                if d < 0 {
                    -g
                } else {
                    g
                }
            })
        }
    }
}

fn moments3(y: &[f64], rho: &[f64], dx: f64) -> (f64, f64, f64) {
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (&x, &r) in y.iter().zip(rho) {
        m0 += r;
        m1 += x * r;
        m2 += x * x * r;
    }
    (m0 * dx, m1 * dx, m2 * dx)
}

/// `Σ_j k(i − j) ρ_j dx` with `k` indexed by the signed cell offset.
fn direct(rho: &[f64], dx: f64, k: impl Fn(isize) -> f64) -> Vec<f64> {
    let m = rho.len();
    (0..m)
        .map(|i| {
            let mut acc = 0.0;
            for (j, &r) in rho.iter().enumerate() {
                if r != 0.0 {
                    acc += k(i as isize - j as isize) * r;
                }
            }
            acc * dx
        })
        .collect()
}

/// Inclusive prefix sums of `ρ y^k dx` for `k = 0..=3`, with a leading zero.
fn prefix_powers(y: &[f64], rho: &[f64], dx: f64) -> [Vec<f64>; 4] {
    let m = rho.len();
    let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(m + 1));
    let mut acc = [0.0; 4];
    for o in out.iter_mut() {
        o.push(0.0);
    }
    for (&x, &r) in y.iter().zip(rho) {
        let w = r * dx;
        let mut p = w;
        for k in 0..4 {
            acc[k] += p;
            out[k].push(acc[k]);
            p *= x;
        }
    }
    out
}

// Below: j < i contributes (x_i − x_j)^k, j > i contributes (x_j − x_i)^k;
// the diagonal term vanishes for both kernels.

fn cubic_grad(grid: &GridSpec, rho: &[f64]) -> Vec<f64> {
    let y = local_coords(grid);
    let s = prefix_powers(&y, rho, grid.dx());
    let m = rho.len();
    (0..m)
        .map(|i| {
            let x = y[i];
            let (l0, l1, l2) = (s[0][i], s[1][i], s[2][i]);
            let (r0, r1, r2) = (s[0][m] - s[0][i + 1], s[1][m] - s[1][i + 1], s[2][m] - s[2][i + 1]);
            let left = x * x * l0 - 2.0 * x * l1 + l2;
            let right = x * x * r0 - 2.0 * x * r1 + r2;
            3.0 * (left - right)
        })
        .collect()
}

fn cubic_value(grid: &GridSpec, rho: &[f64]) -> Vec<f64> {
    let y = local_coords(grid);
    let s = prefix_powers(&y, rho, grid.dx());
    let m = rho.len();
    (0..m)
        .map(|i| {
            let x = y[i];
            let l: [f64; 4] = std::array::from_fn(|k| s[k][i]);
            let r: [f64; 4] = std::array::from_fn(|k| s[k][m] - s[k][i + 1]);
            let x2 = x * x;
            let left = x2 * x * l[0] - 3.0 * x2 * l[1] + 3.0 * x * l[2] - l[3];
            let right = -x2 * x * r[0] + 3.0 * x2 * r[1] - 3.0 * x * r[2] + r[3];
            left + right
        })
        .collect()
}
