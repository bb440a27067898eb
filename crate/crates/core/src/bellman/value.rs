use std::sync::Arc;

use serde::Serialize;

use super::{BellmanError, Grid};
use crate::model::{ModelSpec, WeightFunction};

/// Upper envelope `coef * w(x)` used to clip extrapolation past `x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub coef: f64,
    pub weight: WeightFunction,
}

impl Envelope {
    /// `d w(x) / (1 - alpha beta)` for `model` on `grid`.
    pub fn for_model(model: &ModelSpec, grid: &Grid) -> Self {
        Self {
            coef: model.value_bound_coef(grid),
            weight: *model.weight(),
        }
    }

    #[inline]
    pub fn bound(&self, x: f64) -> f64 {
        self.coef * self.weight.eval(x)
    }
}

/// Piecewise-linear value function on a grid.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    envelope: Envelope,
}

fn segment_slopes(grid: &Grid, values: &[f64]) -> Vec<f64> {
    grid.nodes()
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0]))
        .collect()
}

/// Shape diagnostics for membership in the solver's invariant class.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShapeReport {
    pub non_negative: bool,
    pub non_decreasing: bool,
    pub concave: bool,
    /// Largest `chord(x_j) - V(x_j)` over interior nodes.
    pub worst_concavity_defect: f64,
    /// Largest `V(x_j) - V(x_{j+1})`.
    pub worst_decrease: f64,
}

impl ShapeReport {
    pub fn ok(&self) -> bool {
        self.non_negative && self.non_decreasing && self.concave
    }
}

impl ValueFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, envelope: Envelope) -> Result<Self, BellmanError> {
        if values.len() != grid.len() {
            return Err(BellmanError::GridMismatch);
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(BellmanError::NotFinite { x: grid.nodes()[j] });
        }
        let slopes = segment_slopes(&grid, &values);
        Ok(Self {
            grid,
            values,
            slopes,
            envelope,
        })
    }

    pub fn zero(grid: Arc<Grid>, envelope: Envelope) -> Self {
        let values = vec![0.0; grid.len()];
        let slopes = vec![0.0; grid.len() - 1];
        Self {
            grid,
            values,
            slopes,
            envelope,
        }
    }

    pub fn from_fn(grid: Arc<Grid>, envelope: Envelope, f: impl Fn(f64) -> f64) -> Result<Self, BellmanError> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values, envelope)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.envelope.weight
    }

    /// Interpolated value; errors on negative queries.
    pub fn try_eval(&self, x: f64) -> Result<f64, BellmanError> {
        if x < 0.0 || x.is_nan() {
            return Err(BellmanError::QueryBelowZero(x));
        }
        Ok(self.eval(x))
    }

    /// Interpolated value for `x >= 0`; linear continuation past `x_max`,
    /// clipped to `[V(x_max), coef * w(x)]`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "value query below zero: {x}");
        let nodes = self.grid.nodes();
        if x >= nodes[nodes.len() - 1] {
            return self.extrapolate(x);
        }
        let (k, _) = self.grid.locate(x);
        self.values[k] + self.slopes[k] * (x - nodes[k])
    }

    fn extrapolate(&self, x: f64) -> f64 {
        let m = self.values.len();
        let x_max = self.grid.nodes()[m - 1];
        let last = self.values[m - 1];
        if x == x_max {
            return last;
        }
        let ext = last + self.slopes[m - 2] * (x - x_max);
        ext.min(self.envelope.bound(x)).max(last)
    }

    /// Evaluates many queries; fastest when `xs` is sorted ascending.
    #[inline]
    pub fn eval_into(&self, xs: &[f64], out: &mut [f64]) {
        let nodes = self.grid.nodes();
        let m = nodes.len();
        let x_max = nodes[m - 1];
        let mut k = 0usize;
        for (o, &x) in out.iter_mut().zip(xs) {
            debug_assert!(x >= 0.0, "value query below zero: {x}");
            if x >= x_max {
                *o = self.extrapolate(x);
                continue;
            }
            if x < nodes[k] {
                k = nodes[..k].partition_point(|&n| n <= x).max(1) - 1;
            } else {
                let mut steps = 0;
                while x >= nodes[k + 1] {
                    k += 1;
                    steps += 1;
                    if steps == 8 {
                        k += nodes[k..].partition_point(|&n| n <= x).max(1) - 1;
                        break;
                    }
                }
            }
            *o = self.values[k] + self.slopes[k] * (x - nodes[k]);
        }
    }

    /// Shape check with concavity tolerance `tol * max|V|`.
    pub fn shape(&self, tol: f64) -> ShapeReport {
        let x = self.grid.nodes();
        let v = &self.values;
        let scale = v.iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(1e-300);
        let non_negative = v.iter().all(|&a| a >= 0.0);
        let worst_decrease = v.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
        let worst_concavity_defect = (1..v.len() - 1)
            .map(|j| {
                let t = (x[j] - x[j - 1]) / (x[j + 1] - x[j - 1]);
                let chord = v[j - 1] + t * (v[j + 1] - v[j - 1]);
                chord - v[j]
            })
            .fold(f64::NEG_INFINITY, f64::max);
        ShapeReport {
            non_negative,
            non_decreasing: worst_decrease <= tol * scale,
            concave: worst_concavity_defect <= tol * scale,
            worst_concavity_defect,
            worst_decrease,
        }
    }

    /// `max_j |V(x_j)| / w(x_j)`.
    pub fn w_norm(&self) -> f64 {
        self.grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&x, v)| v.abs() / self.envelope.weight.eval(x))
            .fold(0.0, f64::max)
    }
}

/// Weighted sup-distance `max_j |v1 - v2| / w(x_j)` on shared nodes.
pub fn w_norm_distance(v1: &ValueFunction, v2: &ValueFunction) -> Result<f64, BellmanError> {
    if !Arc::ptr_eq(&v1.grid, &v2.grid) && v1.grid.nodes() != v2.grid.nodes() {
        return Err(BellmanError::GridMismatch);
    }
    let w = v1.envelope.weight;
    Ok(v1
        .grid
        .nodes()
        .iter()
        .zip(v1.values.iter().zip(&v2.values))
        .map(|(&x, (a, b))| (a - b).abs() / w.eval(x))
        .fold(0.0, f64::max))
}

/// A stationary investment rule `x -> i(x)`.
pub trait StationaryRule: Sync {
    fn invest(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> StationaryRule for F {
    fn invest(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Optimal investment sampled on grid nodes.
#[derive(Debug, Clone)]
pub struct Policy {
    grid: Arc<Grid>,
    invest: Vec<f64>,
}

impl Policy {
    pub fn new(grid: Arc<Grid>, invest: Vec<f64>) -> Result<Self, BellmanError> {
        if invest.len() != grid.len() {
            return Err(BellmanError::GridMismatch);
        }
        for (&x, &i) in grid.nodes().iter().zip(&invest) {
            if !(i >= 0.0 && i <= x) {
                return Err(BellmanError::InfeasiblePolicy { x, invest: i });
            }
        }
        Ok(Self { grid, invest })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn invest_nodes(&self) -> &[f64] {
        &self.invest
    }

    pub fn consume_nodes(&self) -> Vec<f64> {
        self.grid
            .nodes()
            .iter()
            .zip(&self.invest)
            .map(|(x, i)| x - i)
            .collect()
    }

    /// Interpolated investment, continued linearly past `x_max` and kept in `[0, x]`.
    #[inline]
    pub fn invest_at(&self, x: f64) -> f64 {
        let nodes = self.grid.nodes();
        let m = nodes.len();
        let raw = if x >= nodes[m - 1] {
            let slope = (self.invest[m - 1] - self.invest[m - 2]) / (nodes[m - 1] - nodes[m - 2]);
            self.invest[m - 1] + slope * (x - nodes[m - 1])
        } else {
            let (k, t) = self.grid.locate(x.max(0.0));
            self.invest[k] + t * (self.invest[k + 1] - self.invest[k])
        };
        raw.clamp(0.0, x.max(0.0))
    }

    #[inline]
    pub fn consume_at(&self, x: f64) -> f64 {
        x - self.invest_at(x)
    }

    /// Policy scaled by `factor` and clipped to the feasible set.
    pub fn scaled(&self, factor: f64) -> Policy {
        let invest = self
            .grid
            .nodes()
            .iter()
            .zip(&self.invest)
            .map(|(&x, &i)| (factor * i).clamp(0.0, x))
            .collect();
        Policy {
            grid: self.grid.clone(),
            invest,
        }
    }
}

impl StationaryRule for Policy {
    fn invest(&self, x: f64) -> f64 {
        self.invest_at(x)
    }
}
