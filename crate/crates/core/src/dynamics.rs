//! Optimally controlled income process `x' = f(i*(x), z)`: simulation,
//! Foster-Lyapunov drift checks and stationary-distribution estimates.
//!
//! Drift integrals are exact sums over the shock atoms, so every check in
//! this module is deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellman::SolveResult;
use crate::model::{ModelSpec, ProductionSpec};
use crate::risk::Aggregator;

/// Simulated states are capped at this multiple of `x_max`.
pub const DOMAIN_EXTENSION: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("initial income must be positive, got {0}")]
    NonPositiveStart(f64),
    #[error("zero consumption at x={0}: Lyapunov weight undefined")]
    ZeroConsumption(f64),
    #[error("infeasible investment {invest} at visited state {x}")]
    InfeasiblePolicy { x: f64, invest: f64 },
    #[error("run length {steps} must exceed burn-in {burn_in}")]
    BurnInTooLong { steps: usize, burn_in: usize },
    #[error("at least one chain is required")]
    NoChains,
    #[error("{chains} chains need {chains} seeds, got {seeds}")]
    SeedCount { chains: usize, seeds: usize },
}

impl DynamicsError {
    pub fn code(&self) -> &'static str {
        match self {
            DynamicsError::NonPositiveStart(_) => "non_positive_start",
            DynamicsError::ZeroConsumption(_) => "zero_consumption",
            DynamicsError::InfeasiblePolicy { .. } => "infeasible_policy",
            DynamicsError::BurnInTooLong { .. } => "burn_in_too_long",
            DynamicsError::NoChains => "no_chains",
            DynamicsError::SeedCount { .. } => "seed_count",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub seed: u64,
    pub stream: u64,
    pub x0: f64,
    pub steps: usize,
    pub burn_in: usize,
    /// `path[0] = x0`, `path[t+1] = f(i*(path[t]), z[shock_index[t]])`.
    pub path: Vec<f64>,
    pub shock_index: Vec<u32>,
    /// Number of states clipped into `(0, DOMAIN_EXTENSION * x_max]`.
    pub clipped: usize,
}

/// Simulates one path with the counter-based stream `(seed, 0)`.
pub fn simulate(
    result: &SolveResult,
    model: &ModelSpec,
    x0: f64,
    steps: usize,
    seed: u64,
) -> Result<SimulationTrace, DynamicsError> {
    simulate_stream(result, model, x0, steps, seed, 0)
}

/// Simulates one path on ChaCha stream `stream` of `seed`.
pub fn simulate_stream(
    result: &SolveResult,
    model: &ModelSpec,
    x0: f64,
    steps: usize,
    seed: u64,
    stream: u64,
) -> Result<SimulationTrace, DynamicsError> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(DynamicsError::NonPositiveStart(x0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let shock = model.shock();
    let f = model.production();
    let cap = DOMAIN_EXTENSION * result.grid().x_max();
    let mut path = Vec::with_capacity(steps + 1);
    let mut shock_index = Vec::with_capacity(steps);
    let mut clipped = 0;
    let mut x = x0;
    path.push(x);
    for _ in 0..steps {
        let invest = result.policy.invest_at(x);
        if !(invest >= 0.0 && invest <= x) {
            return Err(DynamicsError::InfeasiblePolicy { x, invest });
        }
        let k = shock.sample_index(rng.gen::<f64>());
        let mut next = f.value(invest, shock.nodes()[k]);
        if next > cap {
            next = cap;
            clipped += 1;
        } else if !(next > 0.0) {
            next = f64::MIN_POSITIVE;
            clipped += 1;
        }
        shock_index.push(k as u32);
        path.push(next);
        x = next;
    }
    Ok(SimulationTrace {
        seed,
        stream,
        x0,
        steps,
        burn_in: 0,
        path,
        shock_index,
        clipped,
    })
}

fn risk_coefficient(result: &SolveResult) -> f64 {
    match result.aggregator {
        Aggregator::Entropic { gamma } => gamma,
        Aggregator::Expected => 0.0,
    }
}

/// `W1(x) = sqrt(u'(c*(x)) exp(-gamma V(x)))`.
pub fn lyapunov_w1(x: f64, result: &SolveResult, model: &ModelSpec) -> Result<f64, DynamicsError> {
    if !(x > 0.0) {
        return Err(DynamicsError::NonPositiveStart(x));
    }
    let c = result.policy.consume_at(x);
    if !(c > 0.0) {
        return Err(DynamicsError::ZeroConsumption(x));
    }
    let gamma = risk_coefficient(result);
    Ok((model.utility().deriv(c) * (-gamma * result.value.eval(x)).exp()).sqrt())
}

/// `W(x) = W1(x) + x`.
pub fn lyapunov_w(x: f64, result: &SolveResult, model: &ModelSpec) -> Result<f64, DynamicsError> {
    Ok(lyapunov_w1(x, result, model)? + x)
}

/// `sum_i p_i g(f(i*(x), z_i))`.
fn drift_of(
    g: impl Fn(f64) -> Result<f64, DynamicsError>,
    x: f64,
    result: &SolveResult,
    model: &ModelSpec,
) -> Result<f64, DynamicsError> {
    let invest = result.policy.invest_at(x);
    let shock = model.shock();
    let mut total = 0.0;
    for (&z, p) in shock.nodes().iter().zip(shock.probs()) {
        total += p * g(model.production().value(invest, z))?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct D1Report {
    /// Investment levels, descending toward zero.
    pub ys: Vec<f64>,
    /// `sum_i p_i / (beta f'(y, z_i))`.
    pub values: Vec<f64>,
    /// Value at the smallest `y`, the proxy for the limit as `y -> 0+`.
    pub limit_estimate: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftConstants {
    pub lambda: f64,
    pub kappa: f64,
    /// Smallest `lambda g(x) + kappa - drift(x)` over the test points.
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftConstruction {
    pub delta: f64,
    pub lambda1: f64,
    pub kappa1: f64,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct D2Report {
    pub lambda2: f64,
    pub kappa2: f64,
    /// Constants came from the multiplicative closed form rather than a scan.
    pub closed_form: bool,
    pub sampled_y: Vec<f64>,
    pub min_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftMargin {
    pub x: f64,
    pub w1: f64,
    pub drift_w1: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    /// Empirical `(lambda1, kappa1)` for `W1` from the lambda scan.
    pub lambda1: f64,
    pub kappa1: f64,
    /// Constants built from the small-income threshold `delta`.
    pub construction: Option<DriftConstruction>,
    /// Per-test-point margins of `W1` against the construction constants.
    pub w1_margins: Vec<DriftMargin>,
    pub d1: D1Report,
    pub d2: D2Report,
    /// `W = W1 + x` with `lambda = max(lambda1, lambda2)`, `kappa = kappa1 + kappa2`.
    pub combined: Option<DriftConstants>,
    /// Empirical scan for `W` directly.
    pub w_scan: DriftConstants,
    /// `W` at `1e-6 x_max` and at `x_max`.
    pub w_near_zero: f64,
    pub w_at_x_max: f64,
    pub verdict: Verdict,
}

/// Candidate lambdas `0.50, 0.51, ..., 0.99`.
pub fn lambda_scan() -> Vec<f64> {
    (50..100).map(|k| k as f64 / 100.0).collect()
}

/// Chooses the scanned lambda with the smallest feasible kappa for `drift <= lambda g + kappa`.
fn scan_constants(g: &[f64], drift: &[f64]) -> DriftConstants {
    let mut best = DriftConstants {
        lambda: f64::NAN,
        kappa: f64::INFINITY,
        min_margin: f64::NEG_INFINITY,
    };
    for lambda in lambda_scan() {
        let kappa = g
            .iter()
            .zip(drift)
            .map(|(gx, d)| d - lambda * gx)
            .fold(0.0_f64, f64::max);
        if kappa < best.kappa {
            best = DriftConstants {
                lambda,
                kappa,
                min_margin: margin(g, drift, lambda, kappa),
            };
        }
    }
    best
}

fn margin(g: &[f64], drift: &[f64], lambda: f64, kappa: f64) -> f64 {
    g.iter()
        .zip(drift)
        .map(|(gx, d)| lambda * gx + kappa - d)
        .fold(f64::INFINITY, f64::min)
}

/// D1 proxy `sum_i p_i / (beta f'(y, z_i))` at `y in {1e-1, ..., 1e-4} x_max`.
pub fn d1_check(model: &ModelSpec, x_max: f64) -> D1Report {
    let shock = model.shock();
    let f = model.production();
    let ys: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4].iter().map(|r| r * x_max).collect();
    let values: Vec<f64> = ys
        .iter()
        .map(|&y| {
            shock
                .nodes()
                .iter()
                .zip(shock.probs())
                .map(|(&z, p)| p / (model.beta() * f.deriv(y, z)))
                .sum()
        })
        .collect();
    let limit_estimate = *values.last().expect("four probes");
    D1Report {
        ys,
        values,
        limit_estimate,
        passed: limit_estimate < 1.0,
    }
}

fn expected_output(model: &ModelSpec, y: f64) -> f64 {
    let shock = model.shock();
    shock
        .nodes()
        .iter()
        .zip(shock.probs())
        .map(|(&z, p)| p * model.production().value(y, z))
        .sum()
}

/// Fifty log-spaced investment levels on `[1e-6 x_max, 10 x_max]`.
pub fn d2_sample(x_max: f64) -> Vec<f64> {
    let (lo, hi) = ((1e-6 * x_max).ln(), (10.0 * x_max).ln());
    (0..50).map(|k| (lo + (hi - lo) * k as f64 / 49.0).exp()).collect()
}

/// `(lambda2, kappa2) = (theta, max{zbar, zbar^(1/(1-theta)) (1-theta)})` for the multiplicative technology.
pub fn multiplicative_d2_constants(theta: f64, zbar: f64) -> (f64, f64) {
    (theta, zbar.max(zbar.powf(1.0 / (1.0 - theta)) * (1.0 - theta)))
}

fn d2_report(model: &ModelSpec, x_max: f64) -> D2Report {
    let ys = d2_sample(x_max);
    let means: Vec<f64> = ys.iter().map(|&y| expected_output(model, y)).collect();
    let (lambda2, kappa2, closed_form) = match model.production() {
        ProductionSpec::Multiplicative { theta } => {
            let (l, k) = multiplicative_d2_constants(*theta, model.shock().mean());
            (l, k, true)
        }
        _ => {
            let c = scan_constants(&ys, &means);
            (c.lambda, c.kappa.max(f64::MIN_POSITIVE), false)
        }
    };
    let min_margin = margin(&ys, &means, lambda2, kappa2);
    D2Report {
        lambda2,
        kappa2,
        closed_form,
        sampled_y: ys,
        min_margin,
        passed: lambda2 < 1.0 && kappa2 > 0.0 && min_margin >= 0.0,
    }
}

/// Largest `delta` on a descending log scan with
/// `exp(gamma V(delta)/2) * sqrt(sum_i p_i / (beta f'(delta, z_i))) < 1`.
fn delta_construction(
    result: &SolveResult,
    model: &ModelSpec,
    x_test: &[f64],
    w1: &[f64],
    drift_w1: &[f64],
) -> Result<Option<DriftConstruction>, DynamicsError> {
    let x_max = result.grid().x_max();
    let gamma = risk_coefficient(result);
    let shock = model.shock();
    let f = model.production();
    let (lo, hi) = ((1e-8 * x_max).ln(), x_max.ln());
    for k in 0..400 {
        let delta = (hi - (hi - lo) * k as f64 / 399.0).exp();
        let inner: f64 = shock
            .nodes()
            .iter()
            .zip(shock.probs())
            .map(|(&z, p)| p / (model.beta() * f.deriv(delta, z)))
            .sum();
        let lambda1 = (0.5 * gamma * result.value.eval(delta)).exp() * inner.sqrt();
        if lambda1 < 1.0 {
            let kappa1 = drift_of(|s| lyapunov_w1(s, result, model), delta, result, model)?;
            let min_margin = margin(w1, drift_w1, lambda1, kappa1);
            let _ = x_test;
            return Ok(Some(DriftConstruction {
                delta,
                lambda1,
                kappa1,
                min_margin,
            }));
        }
    }
    Ok(None)
}

/// Default drift test points: 200 log-spaced incomes on `[1e-6 x_max, x_max]`.
pub fn default_drift_points(x_max: f64) -> Vec<f64> {
    let (lo, hi) = ((1e-6 * x_max).ln(), x_max.ln());
    (0..200).map(|k| (lo + (hi - lo) * k as f64 / 199.0).exp()).collect()
}

/// Evaluates drift conditions for `W1` and `W = W1 + x` at `x_test` by exact quadrature.
pub fn drift_check(
    result: &SolveResult,
    model: &ModelSpec,
    x_test: &[f64],
) -> Result<DriftReport, DynamicsError> {
    let x_max = result.grid().x_max();
    let w1: Vec<f64> = x_test
        .iter()
        .map(|&x| lyapunov_w1(x, result, model))
        .collect::<Result<_, _>>()?;
    let drift_w1: Vec<f64> = x_test
        .iter()
        .map(|&x| drift_of(|s| lyapunov_w1(s, result, model), x, result, model))
        .collect::<Result<_, _>>()?;
    let w: Vec<f64> = w1.iter().zip(x_test).map(|(a, x)| a + x).collect();
    let drift_w: Vec<f64> = x_test
        .iter()
        .map(|&x| drift_of(|s| lyapunov_w(s, result, model), x, result, model))
        .collect::<Result<_, _>>()?;

    let scan1 = scan_constants(&w1, &drift_w1);
    let d1 = d1_check(model, x_max);
    let d2 = d2_report(model, x_max);
    let construction = delta_construction(result, model, x_test, &w1, &drift_w1)?;
    let w1_margins = match &construction {
        Some(c) => x_test
            .iter()
            .zip(w1.iter().zip(&drift_w1))
            .map(|(&x, (&a, &d))| DriftMargin {
                x,
                w1: a,
                drift_w1: d,
                margin: c.lambda1 * a + c.kappa1 - d,
            })
            .collect(),
        None => Vec::new(),
    };
    let combined = construction.as_ref().map(|c| {
        let lambda = c.lambda1.max(d2.lambda2);
        let kappa = c.kappa1 + d2.kappa2;
        DriftConstants {
            lambda,
            kappa,
            min_margin: margin(&w, &drift_w, lambda, kappa),
        }
    });
    let w_scan = scan_constants(&w, &drift_w);
    let w_near_zero = lyapunov_w(1e-6 * x_max, result, model)?;
    let w_at_x_max = lyapunov_w(x_max, result, model)?;

    let construction_ok = construction
        .as_ref()
        .is_some_and(|c| c.lambda1 < 1.0 && c.min_margin >= 0.0);
    let combined_ok = combined.as_ref().is_some_and(|c| c.lambda < 1.0 && c.min_margin >= 0.0);
    let verdict = if d1.passed && construction_ok && d2.passed && combined_ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(DriftReport {
        lambda1: scan1.lambda,
        kappa1: scan1.kappa,
        construction,
        w1_margins,
        d1,
        d2,
        combined,
        w_scan,
        w_near_zero,
        w_at_x_max,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryConfig {
    pub chains: usize,
    pub steps: usize,
    pub burn_in: usize,
    /// One seed per chain; chains are pooled in this order.
    pub seeds: Vec<u64>,
    pub x0: f64,
}

impl StationaryConfig {
    /// Seeds `base, base + 1, ...` for `chains` chains.
    pub fn seeds_from(base: u64, chains: usize) -> Vec<u64> {
        (0..chains as u64).map(|k| base.wrapping_add(k)).collect()
    }
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            steps: 200_000,
            burn_in: 10_000,
            seeds: Self::seeds_from(1, 4),
            x0: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryEstimate {
    pub eval_points: Vec<f64>,
    pub ecdf: Vec<f64>,
    pub epsilon: f64,
    /// Pooled `P(x < epsilon)` with `epsilon = 1e-3 x_max`.
    pub mass_near_zero: f64,
    /// Kolmogorov-Smirnov distance between the first and second half of the chains.
    pub ks_halves: f64,
    pub samples: usize,
    pub mean: f64,
    pub clipped: usize,
    #[serde(skip)]
    pub pooled: Vec<f64>,
}

/// Two-sample Kolmogorov-Smirnov statistic on sorted inputs.
pub fn ks_distance_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Empirical CDF of sorted `sample` at `points`.
pub fn ecdf_sorted(sample: &[f64], points: &[f64]) -> Vec<f64> {
    let n = sample.len() as f64;
    points
        .iter()
        .map(|&p| sample.partition_point(|&s| s <= p) as f64 / n)
        .collect()
}

/// Simulates the chains of `config` with burn-in recorded on each trace.
pub fn simulate_chains(
    result: &SolveResult,
    model: &ModelSpec,
    config: &StationaryConfig,
) -> Result<Vec<SimulationTrace>, DynamicsError> {
    check_config(config)?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut t = simulate(result, model, config.x0, config.steps, seed)?;
            t.burn_in = config.burn_in;
            Ok(t)
        })
        .collect()
}

fn check_config(config: &StationaryConfig) -> Result<(), DynamicsError> {
    if config.chains == 0 {
        return Err(DynamicsError::NoChains);
    }
    if config.steps <= config.burn_in {
        return Err(DynamicsError::BurnInTooLong {
            steps: config.steps,
            burn_in: config.burn_in,
        });
    }
    if config.seeds.len() != config.chains {
        return Err(DynamicsError::SeedCount {
            chains: config.chains,
            seeds: config.seeds.len(),
        });
    }
    Ok(())
}

/// Pools post-burn-in states of independent chains into an ECDF on the grid nodes.
pub fn stationary_estimate(
    result: &SolveResult,
    model: &ModelSpec,
    config: &StationaryConfig,
) -> Result<StationaryEstimate, DynamicsError> {
    let traces = simulate_chains(result, model, config)?;
    Ok(estimate_from_traces(&traces, result))
}

/// Stationary statistics of already simulated chains, each trimmed by its own burn-in.
pub fn estimate_from_traces(traces: &[SimulationTrace], result: &SolveResult) -> StationaryEstimate {
    let kept = |t: &SimulationTrace| t.path[t.burn_in + 1..].to_vec();
    let (first, second): (Vec<f64>, Vec<f64>) = if traces.len() >= 2 {
        let half = traces.len() / 2;
        (
            traces[..half].iter().flat_map(kept).collect(),
            traces[half..].iter().flat_map(kept).collect(),
        )
    } else {
        let all = kept(&traces[0]);
        let mid = all.len() / 2;
        (all[..mid].to_vec(), all[mid..].to_vec())
    };
    let mut a = first;
    let mut b = second;
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let ks_halves = ks_distance_sorted(&a, &b);
    let mut pooled = a;
    pooled.extend_from_slice(&b);
    pooled.sort_by(|x, y| x.total_cmp(y));
    let eval_points = result.grid().nodes().to_vec();
    let ecdf = ecdf_sorted(&pooled, &eval_points);
    let epsilon = 1e-3 * result.grid().x_max();
    let mass_near_zero = pooled.partition_point(|&s| s < epsilon) as f64 / pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    StationaryEstimate {
        eval_points,
        ecdf,
        epsilon,
        mass_near_zero,
        ks_halves,
        samples: pooled.len(),
        mean,
        clipped: traces.iter().map(|t| t.clipped).sum(),
        pooled,
    }
}
