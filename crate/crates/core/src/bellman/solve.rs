use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::operator::{apply_operator_hinted, SearchHint};
use super::{
    w_norm_distance, BellmanError, Envelope, Grid, Policy, ShapeReport, ValueFunction, INNER_TOL_RATIO,
};
use crate::model::ModelSpec;
use crate::risk::Aggregator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Target bound on the distance to the fixed point, in w-norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub value: ValueFunction,
    pub policy: Policy,
    pub iterations: usize,
    /// `||V_k - V_{k-1}||_w` at the last iteration.
    pub final_residual: f64,
    /// Certified `||V_k - V*||_w <= modulus/(1-modulus) * final_residual`.
    pub error_bound: f64,
    pub contraction_modulus: f64,
    /// `||V_{k+1} - V_k||_w` for every iteration, starting with `||V_1 - V_0||_w`.
    pub residual_history: Vec<f64>,
    pub shape: ShapeReport,
    pub aggregator: Aggregator,
}

impl SolveResult {
    pub fn grid(&self) -> &Arc<Grid> {
        self.value.grid()
    }

    /// A priori iteration bound `ceil(ln(tol (1-ab) / ||V_1 - V_0||) / ln(ab))`.
    pub fn iteration_bound(&self, tol: f64) -> usize {
        let ab = self.contraction_modulus;
        let first = self.residual_history.first().copied().unwrap_or(0.0);
        if first <= 0.0 {
            return 1;
        }
        ((tol * (1.0 - ab) / first).ln() / ab.ln()).ceil().max(1.0) as usize
    }

    /// Largest ratio of consecutive residuals from the third iteration on.
    pub fn worst_decay_ratio(&self) -> f64 {
        self.residual_history
            .windows(2)
            .skip(1)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

/// Value iteration from `V_0 = 0` under the model's entropic aggregator.
pub fn solve(model: &ModelSpec, grid: &Arc<Grid>, opts: &SolveOptions) -> Result<SolveResult, BellmanError> {
    solve_with(model, grid, opts, Aggregator::Entropic { gamma: model.gamma() })
}

/// Expected-utility baseline of the same model.
pub fn solve_risk_neutral(
    model: &ModelSpec,
    grid: &Arc<Grid>,
    opts: &SolveOptions,
) -> Result<SolveResult, BellmanError> {
    solve_with(model, grid, opts, Aggregator::Expected)
}

pub fn solve_with(
    model: &ModelSpec,
    grid: &Arc<Grid>,
    opts: &SolveOptions,
    agg: Aggregator,
) -> Result<SolveResult, BellmanError> {
    if !(opts.tol > 0.0) {
        return Err(BellmanError::InvalidTolerance(opts.tol));
    }
    let ab = model.modulus();
    let threshold = opts.tol * (1.0 - ab) / ab;
    let mut v = ValueFunction::zero(grid.clone(), Envelope::for_model(model, grid));
    let mut history = Vec::new();
    let floor = 16.0 * INNER_TOL_RATIO * grid.x_max();
    let mut prev_invest: Option<Vec<f64>> = None;
    let mut radius = vec![0.0; grid.len()];
    for k in 1..=opts.max_iter {
        let hint = prev_invest.as_ref().map(|invest| SearchHint {
            invest,
            radius: &radius,
        });
        let (next, policy) = apply_operator_hinted(&v, model, agg, hint)?;
        if let Some(old) = &prev_invest {
            for ((r, a), b) in radius.iter_mut().zip(old).zip(policy.invest_nodes()) {
                *r = (4.0 * (a - b).abs()).max(floor);
            }
        }
        prev_invest = Some(policy.invest_nodes().to_vec());
        let diff = w_norm_distance(&next, &v)?;
        history.push(diff);
        v = next;
        if diff <= threshold {
            let shape = v.shape(1e-9);
            return Ok(SolveResult {
                value: v,
                policy,
                iterations: k,
                final_residual: diff,
                error_bound: ab / (1.0 - ab) * diff,
                contraction_modulus: ab,
                residual_history: history,
                shape,
                aggregator: agg,
            });
        }
    }
    Err(BellmanError::MaxIterations {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}
