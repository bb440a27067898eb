use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{BellmanError, Envelope, Grid, SolveResult, StationaryRule, ValueFunction};
use crate::model::ModelSpec;
use crate::risk::Aggregator;

fn checked_invest(rule: &impl StationaryRule, x: f64) -> Result<f64, BellmanError> {
    let i = rule.invest(x);
    if !(i >= 0.0 && i <= x) {
        return Err(BellmanError::InfeasiblePolicy { x, invest: i });
    }
    Ok(i)
}

/// One stage `u(x - i(x)) + beta * rho(J(f(i(x), .)))`.
fn stage(
    rule: &impl StationaryRule,
    next: &ValueFunction,
    model: &ModelSpec,
    agg: Aggregator,
    x: f64,
    states: &mut [f64],
    conts: &mut [f64],
) -> Result<f64, BellmanError> {
    let i = checked_invest(rule, x)?;
    let shock = model.shock();
    model.production().next_states(i, shock.nodes(), states);
    for (c, &s) in conts.iter_mut().zip(states.iter()) {
        *c = next.eval(s);
    }
    Ok(model.utility().value(x - i) + model.beta() * agg.aggregate(conts, shock.probs()))
}

/// `J_1, ..., J_T` of a stationary rule on the grid nodes, each interpolated
/// piecewise-linearly when composed.
pub fn policy_value_sequence(
    rule: &impl StationaryRule,
    model: &ModelSpec,
    grid: &Arc<Grid>,
    horizon: usize,
) -> Result<Vec<ValueFunction>, BellmanError> {
    policy_value_sequence_with(rule, model, grid, horizon, Aggregator::Entropic { gamma: model.gamma() })
}

pub fn policy_value_sequence_with(
    rule: &impl StationaryRule,
    model: &ModelSpec,
    grid: &Arc<Grid>,
    horizon: usize,
    agg: Aggregator,
) -> Result<Vec<ValueFunction>, BellmanError> {
    if horizon == 0 {
        return Err(BellmanError::InvalidHorizon);
    }
    let n = model.shock().len();
    let mut out: Vec<ValueFunction> = Vec::with_capacity(horizon);
    let mut current = ValueFunction::zero(grid.clone(), Envelope::for_model(model, grid));
    for _ in 0..horizon {
        let values: Result<Vec<f64>, BellmanError> = grid
            .nodes()
            .par_iter()
            .map_init(
                || (vec![0.0; n], vec![0.0; n]),
                |(s, c), &x| stage(rule, &current, model, agg, x, s, c),
            )
            .collect();
        current = ValueFunction::new(grid.clone(), values?, *current.envelope())?;
        out.push(current.clone());
    }
    Ok(out)
}

/// `J_T(x, rule)`: `T`-stage value of applying `rule` at every stage, starting from zero.
pub fn evaluate_policy_finite(
    rule: &impl StationaryRule,
    model: &ModelSpec,
    grid: &Arc<Grid>,
    horizon: usize,
    x: f64,
) -> Result<f64, BellmanError> {
    if horizon == 0 {
        return Err(BellmanError::InvalidHorizon);
    }
    if x < 0.0 {
        return Err(BellmanError::QueryBelowZero(x));
    }
    let agg = Aggregator::Entropic { gamma: model.gamma() };
    let tail = if horizon == 1 {
        ValueFunction::zero(grid.clone(), Envelope::for_model(model, grid))
    } else {
        policy_value_sequence(rule, model, grid, horizon - 1)?.pop().expect("non-empty")
    };
    let n = model.shock().len();
    stage(rule, &tail, model, agg, x, &mut vec![0.0; n], &mut vec![0.0; n])
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow {
    pub horizon: usize,
    /// `min_j (V + slack - J_T)`; non-negative when the lower bound holds.
    pub lower_margin: f64,
    /// `min_j (J_T + (ab)^T ||V||_w w + slack - V)`.
    pub upper_margin: f64,
    pub lower_failures: Vec<usize>,
    pub upper_failures: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    /// `J_T` non-decreasing in `T` at every node, across all computed horizons.
    pub monotone_in_horizon: bool,
    pub passed: bool,
}

/// Slack on the sandwich inequalities, relative to `w(x)`.
pub const SANDWICH_SLACK: f64 = 1e-6;

/// Checks `J_T(x, i*) <= V(x) <= J_T(x, i*) + (ab)^T ||V||_w w(x)` for each `T`.
pub fn sandwich_check(
    result: &SolveResult,
    model: &ModelSpec,
    horizons: &[usize],
) -> Result<SandwichReport, BellmanError> {
    let grid = result.grid();
    let t_max = horizons.iter().copied().max().ok_or(BellmanError::InvalidHorizon)?;
    let seq = policy_value_sequence_with(&result.policy, model, grid, t_max, result.aggregator)?;
    let v = &result.value;
    let w = *model.weight();
    let v_norm = v.w_norm();
    let ab = result.contraction_modulus;
    let mut rows = Vec::new();
    for &t in horizons {
        let j = &seq[t - 1];
        let gap = ab.powi(t as i32) * v_norm;
        let mut row = SandwichRow {
            horizon: t,
            lower_margin: f64::INFINITY,
            upper_margin: f64::INFINITY,
            lower_failures: Vec::new(),
            upper_failures: Vec::new(),
        };
        for (idx, &x) in grid.nodes().iter().enumerate() {
            let wx = w.eval(x);
            let slack = SANDWICH_SLACK * wx;
            let lower = v.values()[idx] + slack - j.values()[idx];
            let upper = j.values()[idx] + gap * wx + slack - v.values()[idx];
            row.lower_margin = row.lower_margin.min(lower);
            row.upper_margin = row.upper_margin.min(upper);
            if lower < 0.0 {
                row.lower_failures.push(idx);
            }
            if upper < 0.0 {
                row.upper_failures.push(idx);
            }
        }
        rows.push(row);
    }
    let monotone_in_horizon = seq.windows(2).all(|p| {
        p[0].values()
            .iter()
            .zip(p[1].values())
            .all(|(a, b)| *a <= *b + 1e-12 * b.abs().max(1.0))
    });
    let passed = monotone_in_horizon
        && rows
            .iter()
            .all(|r| r.lower_failures.is_empty() && r.upper_failures.is_empty());
    Ok(SandwichReport {
        rows,
        monotone_in_horizon,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        DiscreteShock, ModelParts, ProductionSpec, TabulatedUtility, UtilitySpec, WeightFunction,
    };
    use crate::risk::certainty_equivalent;
    use crate::testutil::{preset, small_grid, small_solve};

    /// Linear felicity keeps `J_1` linear, so grid interpolation is exact.
    fn linear_model() -> ModelSpec {
        let u = TabulatedUtility::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        ModelSpec::new(ModelParts {
            utility: UtilitySpec::Tabulated(u),
            production: ProductionSpec::Multiplicative { theta: 0.5 },
            shock: DiscreteShock::explicit(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap(),
            beta: 0.95,
            gamma: 1.0,
            weight: WeightFunction::shifted(10.0, 0.5).unwrap(),
            alpha: None,
        })
        .unwrap()
    }

    #[test]
    fn one_stage_is_felicity() {
        let m = preset();
        let grid = small_grid();
        let rule = |x: f64| 0.3 * x;
        for x in [0.0, 0.01, 1.0, 7.3] {
            let j = evaluate_policy_finite(&rule, &m, &grid, 1, x).unwrap();
            assert_eq!(j, m.utility().value(x - 0.3 * x));
        }
    }

    #[test]
    fn two_stages_match_direct_composition() {
        let m = linear_model();
        let grid = Arc::new(Grid::uniform(33, 10.0).unwrap());
        let k = 0.4;
        let rule = |x: f64| k * x;
        for x in [0.5, 3.7, 9.0] {
            let nexts: Vec<f64> = [0.5, 1.5].iter().map(|z| (k * x).sqrt() * z).collect();
            let tails: Vec<f64> = nexts.iter().map(|s| (1.0 - k) * s).collect();
            let direct = (1.0 - k) * x + 0.95 * certainty_equivalent(&tails, &[0.5, 0.5], 1.0).unwrap();
            let j2 = evaluate_policy_finite(&rule, &m, &grid, 2, x).unwrap();
            assert!((j2 - direct).abs() < 1e-12, "{j2} vs {direct}");
        }
    }

    #[test]
    fn rejects_zero_horizon_and_infeasible_rules() {
        let m = preset();
        let grid = small_grid();
        let ok = |x: f64| 0.5 * x;
        assert_eq!(
            evaluate_policy_finite(&ok, &m, &grid, 0, 1.0).unwrap_err(),
            BellmanError::InvalidHorizon
        );
        let greedy = |x: f64| 2.0 * x;
        assert_eq!(
            evaluate_policy_finite(&greedy, &m, &grid, 3, 1.0).unwrap_err().code(),
            "infeasible_policy"
        );
    }

    #[test]
    fn horizon_values_increase_and_stay_bounded() {
        let m = preset();
        let grid = small_grid();
        let seq = policy_value_sequence(&|x: f64| 0.4 * x, &m, &grid, 25).unwrap();
        let env = Envelope::for_model(&m, &grid);
        for pair in seq.windows(2) {
            for (a, b) in pair[0].values().iter().zip(pair[1].values()) {
                assert!(a <= b);
            }
        }
        for (&x, &v) in grid.nodes().iter().zip(seq[24].values()) {
            assert!(v >= 0.0 && v <= env.bound(x));
        }
    }

    #[test]
    fn optimal_policy_is_sandwiched() {
        let (m, r) = small_solve();
        let report = sandwich_check(r, m, &[5, 10, 20, 30, 40]).unwrap();
        assert!(report.passed, "{report:?}");
        let seq = policy_value_sequence(&r.policy, m, r.grid(), 40).unwrap();
        let gap = |t: usize| w_norm_distance_nodes(&r.value, &seq[t - 1]);
        assert!(gap(40) < 0.5 * gap(10));
        assert!(gap(40) <= m.modulus().powi(40) * r.value.w_norm() + 1e-6);
    }

    fn w_norm_distance_nodes(a: &ValueFunction, b: &ValueFunction) -> f64 {
        crate::bellman::w_norm_distance(a, b).unwrap()
    }

    #[test]
    fn perturbed_policy_does_no_better() {
        let (m, r) = small_solve();
        let seq = policy_value_sequence(&r.policy.scaled(0.9), m, r.grid(), 30).unwrap();
        for ((&x, v), j) in r.grid().nodes().iter().zip(r.value.values()).zip(seq[29].values()) {
            assert!(*j <= v + 1e-6 * m.weight().eval(x));
        }
    }
}
