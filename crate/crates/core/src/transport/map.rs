use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measures::GridMeasure;

/// Lower clamp on the derivative of an exact monotone rearrangement.
pub const MIN_SLOPE: f64 = 1e-12;

/// Cell mass below which tabulated slopes fall back to the density ratio.
const CHORD_MIN_MASS: f64 = 1e-8;

/// A nondecreasing map of the line together with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportMap {
    Identity,
    /// `x ↦ scale·x + shift`
    Affine { scale: f64, shift: f64 },
    /// Linear interpolation through `(knots, values)`, continued with
    /// `left_slope`/`right_slope` outside the knot range.
    PiecewiseLinear {
        knots: Vec<f64>,
        values: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    },
    /// Monotone rearrangement `Q_ν ∘ F_μ`.
    Monotone(Box<MonotoneMap>),
}

impl TransportMap {
    pub fn translation(m: f64) -> Self {
        Self::Affine { scale: 1.0, shift: m }
    }

    /// `x ↦ center + lambda (x − center)`.
    pub fn dilation(lambda: f64, center: f64) -> Self {
        Self::Affine {
            scale: lambda,
            shift: center * (1.0 - lambda),
        }
    }

    pub fn piecewise_linear(knots: Vec<f64>, slopes: &[f64], left_slope: f64, right_slope: f64) -> Result<Self> {
        if knots.len() < 2 || slopes.len() + 1 != knots.len() {
            return Err(Error::Invalid("piecewise map needs k knots and k-1 slopes".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("knots must be strictly increasing".into()));
        }
        if slopes.iter().chain([&left_slope, &right_slope]).any(|s| !(*s > 0.0)) {
            return Err(Error::Invalid("slopes must be positive".into()));
        }
        let mut values = Vec::with_capacity(knots.len());
        values.push(knots[0]);
        for (k, s) in slopes.iter().enumerate() {
            let prev = values[k];
            values.push(prev + s * (knots[k + 1] - knots[k]));
        }
        Ok(Self::PiecewiseLinear {
            knots,
            values,
            left_slope,
            right_slope,
        })
    }

    pub fn description(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Affine { scale, shift } if *scale == 1.0 => format!("translation({shift:.6e})"),
            Self::Affine { scale, shift } => format!("affine(scale={scale:.6e},shift={shift:.6e})"),
            Self::PiecewiseLinear { knots, .. } => format!("piecewise_linear({} knots)", knots.len()),
            Self::Monotone(_) => "monotone_rearrangement".into(),
        }
    }

    /// Short kind label used in probe reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Affine { scale, .. } if *scale == 1.0 => "translation",
            Self::Affine { .. } => "dilation",
            Self::PiecewiseLinear { .. } => "piecewise",
            Self::Monotone(_) => "brenier",
        }
    }

    pub fn t_of(&self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Affine { scale, shift } => scale * x + shift,
            Self::PiecewiseLinear {
                knots,
                values,
                left_slope,
                right_slope,
            } => {
                let n = knots.len();
                if x <= knots[0] {
                    return values[0] + left_slope * (x - knots[0]);
                }
                if x >= knots[n - 1] {
                    return values[n - 1] + right_slope * (x - knots[n - 1]);
                }
                let k = knots.partition_point(|&t| t <= x) - 1;
                let s = (values[k + 1] - values[k]) / (knots[k + 1] - knots[k]);
                values[k] + s * (x - knots[k])
            }
            Self::Monotone(m) => m.eval(x).0,
        }
    }

    pub fn dt_of(&self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Affine { scale, .. } => *scale,
            Self::PiecewiseLinear {
                knots,
                values,
                left_slope,
                right_slope,
            } => {
                let n = knots.len();
                if x < knots[0] {
                    return *left_slope;
                }
                if x >= knots[n - 1] {
                    return *right_slope;
                }
                let k = knots.partition_point(|&t| t <= x) - 1;
                (values[k + 1] - values[k]) / (knots[k + 1] - knots[k])
            }
            Self::Monotone(m) => m.eval(x).1,
        }
    }

    /// The same map followed by a translation by `c`.
    pub fn shifted(self, c: f64) -> Self {
        match self {
            Self::Identity => Self::translation(c),
            Self::Affine { scale, shift } => Self::Affine { scale, shift: shift + c },
            Self::PiecewiseLinear {
                knots,
                mut values,
                left_slope,
                right_slope,
            } => {
                values.iter_mut().for_each(|v| *v += c);
                Self::PiecewiseLinear {
                    knots,
                    values,
                    left_slope,
                    right_slope,
                }
            }
            Self::Monotone(mut m) => {
                m.shift += c;
                m.table_t.iter_mut().for_each(|v| *v += c);
                Self::Monotone(m)
            }
        }
    }

    /// `(T(x_i), T'(x_i))` at the cell centres of `mu`. Exact rearrangements
    /// built on the same grid return their stored table, whose slopes are
    /// cell chords rather than pointwise values.
    pub fn tabulate(&self, mu: &GridMeasure) -> (Vec<f64>, Vec<f64>) {
        if let Self::Monotone(m) = self {
            if m.source.grid() == mu.grid() {
                return (m.table_t.clone(), m.table_dt.clone());
            }
        }
        mu.centers().iter().map(|&x| (self.t_of(x), self.dt_of(x))).unzip()
    }

    /// CSV `x,T(x),Tprime(x)` at the cell centres of `mu`.
    pub fn to_csv(&self, mu: &GridMeasure) -> String {
        let (t, dt) = self.tabulate(mu);
        let mut out = String::from("x,T(x),Tprime(x)\n");
        for ((x, t), d) in mu.centers().iter().zip(t).zip(dt) {
            let _ = writeln!(out, "{x:e},{t:e},{d:e}");
        }
        out
    }
}

/// Exact monotone rearrangement between two grid measures.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMap {
    source: GridMeasure,
    target: GridMeasure,
    source_edges: Vec<f64>,
    target_edges: Vec<f64>,
    shift: f64,
    table_t: Vec<f64>,
    table_dt: Vec<f64>,
    /// Source cells where the derivative was clamped to [`MIN_SLOPE`].
    pub clamped: Vec<usize>,
}

impl MonotoneMap {
    pub(crate) fn new(source: &GridMeasure, target: &GridMeasure) -> Self {
        let mut map = Self {
            source_edges: source.cdf_edges(),
            target_edges: target.cdf_edges(),
            source: source.clone(),
            target: target.clone(),
            shift: 0.0,
            table_t: Vec::new(),
            table_dt: Vec::new(),
            clamped: Vec::new(),
        };
        let m = source.m();
        map.table_t.reserve(m);
        map.table_dt.reserve(m);
        let g = source.grid();
        let mass = map.source_edges[m];
        let ends: Vec<f64> = (0..=m).map(|i| map.eval_raw(g.edge(i)).0).collect();
        for i in 0..m {
            let (t, pointwise, _) = map.eval_raw(g.center(i));
            // chord slope over the cell: the pointwise ratio of two step
            // densities carries an O(dx) error even when T is close to x.
            // Cells too light to resolve through the CDF keep the ratio.
            let raw = if source.density()[i] * g.dx() / mass > CHORD_MIN_MASS {
                (ends[i + 1] - ends[i]) / g.dx()
            } else {
                pointwise
            };
            let clamped = !(raw >= MIN_SLOPE);
            if clamped && source.density()[i] > 0.0 {
                map.clamped.push(i);
            }
            map.table_t.push(t);
            map.table_dt.push(if clamped { MIN_SLOPE } else { raw });
        }
        map
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let (t, dt, _) = self.eval_raw(x);
        (t, dt)
    }

    fn eval_raw(&self, x: f64) -> (f64, f64, bool) {
        let mass = self.source_edges[self.source.m()];
        let u = (self.source.cdf_with(&self.source_edges, x) / mass).clamp(1e-300, 1.0 - f64::EPSILON);
        let (t, j) = self.target.quantile_with(&self.target_edges, u);
        let rho_s = source_density_at(&self.source, x);
        // both densities in units of their own total mass
        let tmass = self.target_edges[self.target.m()];
        let rho_t = self.target.density()[j] / tmass;
        let raw = (rho_s / mass) / rho_t;
        let clamped = !(raw >= MIN_SLOPE);
        (t + self.shift, if clamped { MIN_SLOPE } else { raw }, clamped)
    }

    pub fn source(&self) -> &GridMeasure {
        &self.source
    }

    pub fn target(&self) -> &GridMeasure {
        &self.target
    }
}

fn source_density_at(mu: &GridMeasure, x: f64) -> f64 {
    if x < mu.lo() || x > mu.hi() {
        return 0.0;
    }
    let i = (((x - mu.lo()) / mu.dx()).floor() as usize).min(mu.m() - 1);
    mu.density()[i]
}
