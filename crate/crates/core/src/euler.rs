//! Euler-equation and envelope-condition diagnostics for a solved model.
//!
//! At an interior node the optimal plan satisfies
//! `u'(c*(x)) = beta * sum_i F_i p_i u'(c*(f(i*, z_i))) f'(i*, z_i)` where
//! `F_i p_i` is the exponential tilt of the shock law by `exp(-gamma V(f(i*, z_i)))`.

use serde::Serialize;
use thiserror::Error;

use crate::bellman::SolveResult;
use crate::model::ModelSpec;
use crate::risk::{tilted_weights, Aggregator};

/// Fraction of nodes (by index, centred) used for summary statistics.
pub const INTERIOR_WINDOW: f64 = 0.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EulerError {
    #[error("income must be positive, got {0}")]
    NonPositiveIncome(f64),
    #[error("zero consumption at x={0}: marginal utility unbounded")]
    ZeroConsumption(f64),
    #[error("zero investment at x={0}: marginal product undefined")]
    ZeroInvestment(f64),
}

impl EulerError {
    pub fn code(&self) -> &'static str {
        match self {
            EulerError::NonPositiveIncome(_) => "non_positive_income",
            EulerError::ZeroConsumption(_) => "zero_consumption",
            EulerError::ZeroInvestment(_) => "zero_investment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerRecord {
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedNode {
    pub x: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerReport {
    pub records: Vec<EulerRecord>,
    pub skipped: Vec<SkippedNode>,
    /// Income range `[x_lo, x_hi]` of the interior window.
    pub window: (f64, f64),
    pub max: f64,
    pub median: f64,
}

/// Tilt, next-period states and marginal products after investing `y`.
struct NextPeriod {
    states: Vec<f64>,
    weights: Vec<f64>,
    marginal_products: Vec<f64>,
}

fn next_period(y: f64, result: &SolveResult, model: &ModelSpec, agg: Aggregator) -> NextPeriod {
    let shock = model.shock();
    let f = model.production();
    let n = shock.len();
    let mut states = vec![0.0; n];
    f.next_states(y, shock.nodes(), &mut states);
    let mut weights = vec![0.0; n];
    match agg {
        Aggregator::Entropic { gamma } => {
            let mut values = vec![0.0; n];
            result.value.eval_into(&states, &mut values);
            tilted_weights(&values, shock.probs(), gamma, &mut weights);
        }
        Aggregator::Expected => weights.copy_from_slice(shock.probs()),
    }
    let marginal_products = shock.nodes().iter().map(|&z| f.deriv(y, z)).collect();
    NextPeriod {
        states,
        weights,
        marginal_products,
    }
}

/// Normalized tilt `F(y, z_i) p_i` of the shock law at investment `y`.
pub fn tilt_weights(y: f64, result: &SolveResult, model: &ModelSpec) -> Vec<f64> {
    next_period(y, result, model, result.aggregator).weights
}

/// `G(y) = sum_i F(y, z_i) p_i V'(f(y, z_i)) f'(y, z_i)` with `V' = u'(c*)`.
pub fn vhat_derivative(y: f64, result: &SolveResult, model: &ModelSpec) -> Result<f64, EulerError> {
    if !(y > 0.0) {
        return Err(EulerError::ZeroInvestment(y));
    }
    let next = next_period(y, result, model, result.aggregator);
    let u = model.utility();
    Ok(next
        .states
        .iter()
        .zip(&next.weights)
        .zip(&next.marginal_products)
        .map(|((&s, w), fp)| w * u.deriv(result.policy.consume_at(s)) * fp)
        .sum())
}

/// Euler residual at income `x` under the solve's own aggregator.
pub fn euler_residual(x: f64, result: &SolveResult, model: &ModelSpec) -> Result<EulerRecord, EulerError> {
    euler_residual_with(x, result, model, result.aggregator)
}

/// Euler residual with explicit tilt: `Expected` gives the classical form.
pub fn euler_residual_with(
    x: f64,
    result: &SolveResult,
    model: &ModelSpec,
    agg: Aggregator,
) -> Result<EulerRecord, EulerError> {
    if !(x > 0.0) {
        return Err(EulerError::NonPositiveIncome(x));
    }
    let invest = result.policy.invest_at(x);
    let consume = x - invest;
    if !(consume > 0.0) {
        return Err(EulerError::ZeroConsumption(x));
    }
    if !(invest > 0.0) {
        return Err(EulerError::ZeroInvestment(x));
    }
    let u = model.utility();
    let lhs = u.deriv(consume);
    let next = next_period(invest, result, model, agg);
    let expectation: f64 = next
        .states
        .iter()
        .zip(&next.weights)
        .zip(&next.marginal_products)
        .map(|((&s, w), fp)| w * u.deriv(result.policy.consume_at(s)) * fp)
        .sum();
    let rhs = model.beta() * expectation;
    Ok(EulerRecord {
        x,
        lhs,
        rhs,
        rel_residual: (lhs - rhs).abs() / lhs.max(rhs),
    })
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Euler residuals at every positive node, summarized over the interior window.
pub fn euler_report(result: &SolveResult, model: &ModelSpec) -> EulerReport {
    let grid = result.grid();
    let nodes = grid.nodes();
    let window = grid.middle_window(INTERIOR_WINDOW);
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut in_window = Vec::new();
    for (j, &x) in nodes.iter().enumerate().skip(1) {
        match euler_residual(x, result, model) {
            Ok(r) => {
                if window.contains(&j) {
                    in_window.push(r.rel_residual);
                }
                records.push(r);
            }
            Err(e) => skipped.push(SkippedNode {
                x,
                reason: e.to_string(),
            }),
        }
    }
    let max = in_window.iter().copied().fold(0.0, f64::max);
    EulerReport {
        records,
        skipped,
        window: (nodes[window.start], nodes[window.end - 1]),
        max,
        median: median(&mut in_window),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRecord {
    pub x: f64,
    /// Central difference `(V_{j+1} - V_{j-1}) / (x_{j+1} - x_{j-1})`.
    pub slope: f64,
    pub marginal_utility: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub records: Vec<EnvelopeRecord>,
    pub window: (f64, f64),
    pub max: f64,
    pub median: f64,
}

/// Compares central differences of `V` with `u'(c*)` at interior nodes.
pub fn envelope_check(result: &SolveResult, model: &ModelSpec) -> EnvelopeReport {
    let grid = result.grid();
    let x = grid.nodes();
    let v = result.value.values();
    let c = result.policy.consume_nodes();
    let window = grid.middle_window(INTERIOR_WINDOW);
    let mut records = Vec::new();
    let mut in_window = Vec::new();
    for j in 1..x.len() - 1 {
        if !(c[j] > 0.0) {
            continue;
        }
        let slope = (v[j + 1] - v[j - 1]) / (x[j + 1] - x[j - 1]);
        let mu = model.utility().deriv(c[j]);
        let rel_error = (slope - mu).abs() / mu;
        if window.contains(&j) {
            in_window.push(rel_error);
        }
        records.push(EnvelopeRecord {
            x: x[j],
            slope,
            marginal_utility: mu,
            rel_error,
        });
    }
    EnvelopeReport {
        records,
        window: (x[window.start], x[window.end - 1]),
        max: in_window.iter().copied().fold(0.0, f64::max),
        median: median(&mut in_window),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bellman::{Envelope, Grid, Policy, SolveResult, ValueFunction};
    use crate::testutil::{degenerate_solve, small_solve};

    #[test]
    fn tilt_is_a_probability_vector() {
        let (m, r) = small_solve();
        for y in [1e-3, 0.1, 1.0, 4.0] {
            let w = tilt_weights(y, r, m);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn one_atom_shock_gives_the_deterministic_euler_equation() {
        let (m, r) = degenerate_solve();
        let z = m.shock().nodes()[0];
        let u = m.utility();
        for &x in &r.grid().nodes()[20..80] {
            let rec = euler_residual(x, r, m).unwrap();
            let i = r.policy.invest_at(x);
            let next = m.production().value(i, z);
            let direct = m.beta() * u.deriv(r.policy.consume_at(next)) * m.production().deriv(i, z);
            assert!((rec.rhs - direct).abs() <= 1e-14 * direct);
            let g = vhat_derivative(i, r, m).unwrap();
            assert!((m.beta() * g - direct).abs() <= 1e-14 * direct);
        }
    }

    #[test]
    fn expected_weights_give_the_classical_form() {
        let (m, r) = small_solve();
        let x = r.grid().nodes()[50];
        let rec = euler_residual_with(x, r, m, Aggregator::Expected).unwrap();
        let i = r.policy.invest_at(x);
        let shock = m.shock();
        let classical: f64 = shock
            .nodes()
            .iter()
            .zip(shock.probs())
            .map(|(&z, p)| {
                let s = m.production().value(i, z);
                p * m.utility().deriv(r.policy.consume_at(s)) * m.production().deriv(i, z)
            })
            .sum::<f64>()
            * m.beta();
        assert!((rec.rhs - classical).abs() <= 1e-14 * classical);
    }

    #[test]
    fn first_order_condition_matches_residual_identity() {
        let (m, r) = small_solve();
        for &x in &r.grid().nodes()[30..60] {
            let rec = euler_residual(x, r, m).unwrap();
            let g = vhat_derivative(r.policy.invest_at(x), r, m).unwrap();
            assert!((rec.rhs - m.beta() * g).abs() <= 1e-14 * rec.rhs);
        }
    }

    #[test]
    fn vhat_derivative_is_non_increasing() {
        let (m, r) = small_solve();
        let ys: Vec<f64> = (1..60).map(|k| 0.05 * k as f64).collect();
        let g: Vec<f64> = ys.iter().map(|&y| vhat_derivative(y, r, m).unwrap()).collect();
        for pair in g.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9));
        }
        assert_eq!(vhat_derivative(0.0, r, m).unwrap_err().code(), "zero_investment");
    }

    #[test]
    fn residuals_are_small_in_the_interior() {
        let (m, r) = small_solve();
        let report = euler_report(r, m);
        assert!(report.median < 1e-2, "{}", report.median);
        assert!(report.records.iter().all(|rec| rec.rel_residual.is_finite()));
        assert!(report.window.0 > 0.0 && report.window.0 < report.window.1);
        assert_eq!(euler_residual(0.0, r, m).unwrap_err().code(), "non_positive_income");
    }

    #[test]
    fn policy_is_strictly_increasing_in_the_interior() {
        let (_, r) = small_solve();
        let tol = 1e-8 * r.grid().x_max();
        let window = r.grid().middle_window(INTERIOR_WINDOW);
        let i = &r.policy.invest_nodes()[window.clone()];
        let c = &r.policy.consume_nodes()[window];
        assert!(i.windows(2).all(|w| w[1] - w[0] > tol));
        assert!(c.windows(2).all(|w| w[1] - w[0] > tol));
    }

    #[test]
    fn envelope_holds_for_solved_models() {
        for (m, r) in [small_solve(), degenerate_solve()] {
            let report = envelope_check(r, m);
            assert!(report.max < 5e-2, "{}", report.max);
        }
    }

    #[test]
    fn envelope_is_exact_on_linear_values() {
        let (m, r) = small_solve();
        let grid = Arc::new(Grid::uniform(41, 10.0).unwrap());
        // u'(c) = a for the power felicity at c = (a / sigma)^(1 / (sigma - 1)).
        let (a, sigma) = (0.8, 0.5);
        let c = (a / sigma as f64).powf(1.0 / (sigma - 1.0));
        let env = Envelope::for_model(m, &grid);
        let synthetic = SolveResult {
            value: ValueFunction::from_fn(grid.clone(), env, |x| a * x).unwrap(),
            policy: Policy::new(grid.clone(), grid.nodes().iter().map(|&x| (x - c).max(0.0)).collect()).unwrap(),
            ..r.clone()
        };
        let report = envelope_check(&synthetic, m);
        let beyond: Vec<_> = report.records.iter().filter(|rec| rec.x > c).collect();
        assert!(!beyond.is_empty());
        assert!(beyond.iter().all(|rec| rec.rel_error < 1e-12));
    }
}
