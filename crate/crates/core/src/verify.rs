//! Acceptance gates shared by `rsgrowth verify` and the test suite.
//!
//! A [`Verifier`] solves the configured model once and caches auxiliary
//! solves (finer grid, other risk coefficients, degenerate shock) as gates
//! request them.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellman::{
    apply_operator, policy_value_sequence, sandwich_check, solve, solve_risk_neutral, w_norm_distance,
    BellmanError, Envelope, Grid, GridConfig, SolveOptions, SolveResult, StationaryRule, ValueFunction,
};
use crate::dynamics::{
    d1_check, default_drift_points, drift_check, estimate_from_traces, simulate, stationary_estimate,
    DynamicsError, StationaryConfig, Verdict,
};
use crate::euler::{envelope_check, euler_report, euler_residual_with, INTERIOR_WINDOW};
use crate::io::{self, IoError, SolveSummary};
use crate::model::{make_preset, validate, DiscreteShock, ModelError, ModelSpec, PresetName};
use crate::risk::{
    association_lower_bound_check, certainty_equivalent, expected_value, subadditivity_check,
    taylor_approx, Aggregator, RiskError,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("unknown gate {0}")]
    UnknownGate(u8),
}

impl VerifyError {
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::Model(e) => e.code(),
            VerifyError::Bellman(e) => e.code(),
            VerifyError::Dynamics(e) => e.code(),
            VerifyError::Risk(e) => e.code(),
            VerifyError::Io(e) => e.code(),
            VerifyError::UnknownGate(_) => "unknown_gate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Main grid; the refinement gate also solves on `2 * points` nodes.
    pub grid: GridConfig,
    pub solver: SolveOptions,
    pub simulate: StationaryConfig,
    /// Seed for the randomized property suites.
    pub seed: u64,
}

impl VerifyConfig {
    pub fn for_preset(name: PresetName) -> Self {
        Self {
            grid: GridConfig::log(400, name.default_x_max()),
            solver: SolveOptions::default(),
            simulate: StationaryConfig::default(),
            seed: 7,
        }
    }
}

pub const GATE_COUNT: u8 = 14;

#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<&'static str, f64>,
}

impl Gate {
    fn new(id: u8, name: &'static str, passed: bool, metrics: &[(&'static str, f64)]) -> Self {
        let detail = metrics
            .iter()
            .map(|(k, v)| {
                if v.fract() == 0.0 && v.abs() < 1e9 {
                    format!("{k}={v}")
                } else {
                    format!("{k}={v:.3e}")
                }
            })
            .collect::<Vec<_>>()
            .join(" ");
        Self {
            id,
            name,
            passed,
            detail,
            metrics: metrics.iter().copied().collect(),
        }
    }

    /// `PASS  3 shape: ...`
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub gates: Vec<Gate>,
    pub passed: bool,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub struct Verifier<'a> {
    model: &'a ModelSpec,
    cfg: &'a VerifyConfig,
    grid: Arc<Grid>,
    main: SolveResult,
    fine: Option<SolveResult>,
    by_gamma: Vec<(f64, SolveResult)>,
    degenerate: Option<(ModelSpec, SolveResult)>,
}

impl<'a> Verifier<'a> {
    /// Solves the model on the main grid.
    pub fn new(model: &'a ModelSpec, cfg: &'a VerifyConfig) -> Result<Self, VerifyError> {
        let grid = Arc::new(cfg.grid.build()?);
        let main = solve(model, &grid, &cfg.solver)?;
        Ok(Self {
            model,
            cfg,
            grid,
            main,
            fine: None,
            by_gamma: Vec::new(),
            degenerate: None,
        })
    }

    pub fn main(&self) -> &SolveResult {
        &self.main
    }

    pub fn run_all(&mut self) -> Result<VerifyReport, VerifyError> {
        self.run_with(|_| {})
    }

    /// Runs every gate in order, handing each to `on_gate` as it finishes.
    pub fn run_with(&mut self, mut on_gate: impl FnMut(&Gate)) -> Result<VerifyReport, VerifyError> {
        let mut gates = Vec::new();
        for id in 1..=GATE_COUNT {
            let g = self.gate(id)?;
            on_gate(&g);
            gates.push(g);
        }
        let passed = gates.iter().all(|g| g.passed);
        Ok(VerifyReport { gates, passed })
    }

    pub fn gate(&mut self, id: u8) -> Result<Gate, VerifyError> {
        match id {
            1 => self.contraction(),
            2 => self.fixed_point(),
            3 => self.shape(),
            4 => self.sandwich(),
            5 => self.suboptimality(),
            6 => self.euler(),
            7 => self.envelope(),
            8 => self.risk_neutral_limit(),
            9 => self.risk_ordering(),
            10 => Ok(entropic_properties(self.cfg.seed)),
            11 => association(self.cfg.seed),
            12 => self.drift(),
            13 => self.stationarity(),
            14 => self.reproducibility(),
            other => Err(VerifyError::UnknownGate(other)),
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(salt);
        rng
    }

    fn contraction(&self) -> Result<Gate, VerifyError> {
        let assumptions = validate(self.model, &self.grid)?;
        let ab = self.model.modulus();
        let env = Envelope::for_model(self.model, &self.grid);
        let mut rng = self.rng(1);
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_ratio = 0.0_f64;
        for _ in 0..50 {
            let v1 = random_member(&mut rng, &self.grid, env)?;
            let v2 = random_member(&mut rng, &self.grid, env)?;
            let d = w_norm_distance(&v1, &v2)?;
            let (l1, _) = apply_operator(&v1, self.model)?;
            let (l2, _) = apply_operator(&v2, self.model)?;
            let dl = w_norm_distance(&l1, &l2)?;
            worst_excess = worst_excess.max(dl - ab * d - 1e-8);
            if d > 0.0 {
                worst_ratio = worst_ratio.max(dl / d);
            }
        }
        let passed = assumptions.passed() && worst_excess <= 0.0;
        Ok(Gate::new(
            1,
            "contraction",
            passed,
            &[
                ("assumptions_ok", flag(assumptions.passed())),
                ("modulus", ab),
                ("worst_ratio", worst_ratio),
                ("worst_excess", worst_excess),
            ],
        ))
    }

    fn fixed_point(&self) -> Result<Gate, VerifyError> {
        let (lv, _) = apply_operator(&self.main.value, self.model)?;
        let residual = w_norm_distance(&lv, &self.main.value)?;
        let env = Envelope::for_model(self.model, &self.grid);
        let bound_excess = self
            .grid
            .nodes()
            .iter()
            .zip(self.main.value.values())
            .map(|(&x, &v)| v - env.bound(x))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Gate::new(
            2,
            "fixed point and bound",
            residual <= 1e-8 && bound_excess <= 0.0,
            &[
                ("iterations", self.main.iterations as f64),
                ("residual", residual),
                ("bound_excess", bound_excess),
            ],
        ))
    }

    fn shape(&self) -> Result<Gate, VerifyError> {
        let x = self.grid.nodes();
        let shape = self.main.value.shape(1e-9);
        let invest = self.main.policy.invest_nodes();
        let consume = self.main.policy.consume_nodes();
        let tol = 1e-8 * self.grid.x_max();
        let drop = |v: &[f64]| v.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
        let (di, dc) = (drop(invest), drop(&consume));
        let interior = (1..x.len()).all(|j| invest[j] > 0.0 && invest[j] < x[j]);
        Ok(Gate::new(
            3,
            "shape",
            shape.ok() && di <= tol && dc <= tol && interior,
            &[
                ("concavity_defect", shape.worst_concavity_defect),
                ("value_drop", shape.worst_decrease),
                ("invest_drop", di),
                ("consume_drop", dc),
                ("interior", flag(interior)),
            ],
        ))
    }

    fn sandwich(&self) -> Result<Gate, VerifyError> {
        let report = sandwich_check(&self.main, self.model, &[5, 10, 20, 40])?;
        let lower = report.rows.iter().map(|r| r.lower_margin).fold(f64::INFINITY, f64::min);
        let upper = report.rows.iter().map(|r| r.upper_margin).fold(f64::INFINITY, f64::min);
        Ok(Gate::new(
            4,
            "sandwich",
            report.passed,
            &[
                ("lower_margin", lower),
                ("upper_margin", upper),
                ("monotone_in_t", flag(report.monotone_in_horizon)),
            ],
        ))
    }

    fn horizon_margin(&self, rule: &impl StationaryRule) -> Result<f64, VerifyError> {
        let seq = policy_value_sequence(rule, self.model, &self.grid, 40)?;
        let j = seq.last().expect("horizon 40");
        let w = self.model.weight();
        Ok(self
            .grid
            .nodes()
            .iter()
            .zip(self.main.value.values().iter().zip(j.values()))
            .map(|(&x, (v, jv))| v + 1e-6 * w.eval(x) - jv)
            .fold(f64::INFINITY, f64::min))
    }

    fn suboptimality(&self) -> Result<Gate, VerifyError> {
        let p = &self.main.policy;
        let margins = [
            self.horizon_margin(&p.scaled(0.8))?,
            self.horizon_margin(&p.scaled(0.9))?,
            self.horizon_margin(&p.scaled(1.1))?,
            self.horizon_margin(&|x: f64| 0.3 * x)?,
            self.horizon_margin(&|x: f64| 0.7 * x)?,
        ];
        let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Gate::new(
            5,
            "suboptimality",
            worst >= 0.0,
            &[("worst_margin", worst), ("policies", margins.len() as f64)],
        ))
    }

    fn fine(&mut self) -> Result<&SolveResult, VerifyError> {
        if self.fine.is_none() {
            let mut cfg = self.cfg.grid.clone();
            cfg.points *= 2;
            let grid = Arc::new(cfg.build()?);
            self.fine = Some(solve(self.model, &grid, &self.cfg.solver)?);
        }
        Ok(self.fine.as_ref().expect("just solved"))
    }

    fn euler(&mut self) -> Result<Gate, VerifyError> {
        let coarse = euler_report(&self.main, self.model).median;
        let model = self.model;
        let fine_result = self.fine()?;
        let points = fine_result.grid().len();
        let fine = euler_report(fine_result, model).median;
        let factor = coarse / fine;
        Ok(Gate::new(
            6,
            "euler residual",
            fine <= 1e-3 && factor >= 1.5,
            &[
                ("points", points as f64),
                ("median", fine),
                ("median_half_grid", coarse),
                ("refinement_factor", factor),
            ],
        ))
    }

    fn envelope(&mut self) -> Result<Gate, VerifyError> {
        let model = self.model;
        let fine = self.fine()?;
        let report = envelope_check(fine, model);
        Ok(Gate::new(
            7,
            "envelope",
            report.max <= 1e-2,
            &[("points", fine.grid().len() as f64), ("max", report.max), ("median", report.median)],
        ))
    }

    fn at_gamma(&mut self, gamma: f64) -> Result<&SolveResult, VerifyError> {
        if gamma == self.model.gamma() {
            return Ok(&self.main);
        }
        let pos = match self.by_gamma.iter().position(|(g, _)| *g == gamma) {
            Some(p) => p,
            None => {
                let m = self.model.with_gamma(gamma)?;
                let r = solve(&m, &self.grid, &self.cfg.solver)?;
                self.by_gamma.push((gamma, r));
                self.by_gamma.len() - 1
            }
        };
        Ok(&self.by_gamma[pos].1)
    }

    /// One-atom shock at the mean with `gamma = 1e-6`; the tilt is trivial so
    /// the solution does not depend on `gamma`.
    fn degenerate(&mut self) -> Result<&(ModelSpec, SolveResult), VerifyError> {
        if self.degenerate.is_none() {
            let m = self
                .model
                .with_shock(DiscreteShock::degenerate(self.model.shock().mean())?)?
                .with_gamma(1e-6)?;
            let grid = Arc::new(self.cfg.grid.build()?);
            let r = solve(&m, &grid, &self.cfg.solver)?;
            self.degenerate = Some((m, r));
        }
        Ok(self.degenerate.as_ref().expect("just solved"))
    }

    fn risk_neutral_limit(&mut self) -> Result<Gate, VerifyError> {
        let neutral = solve_risk_neutral(self.model, &self.grid, &self.cfg.solver)?;
        let near = self.at_gamma(1e-6)?;
        let rel = w_norm_distance(&near.value, &neutral.value)? / neutral.value.w_norm();
        let (dm, dr) = self.degenerate()?;
        let window = dr.grid().middle_window(INTERIOR_WINDOW);
        let mut worst_rhs = 0.0_f64;
        for &x in &dr.grid().nodes()[window] {
            let tilted = euler_residual_with(x, dr, dm, Aggregator::Entropic { gamma: 1e-6 });
            let classical = euler_residual_with(x, dr, dm, Aggregator::Expected);
            if let (Ok(a), Ok(b)) = (tilted, classical) {
                worst_rhs = worst_rhs.max((a.rhs - b.rhs).abs() / b.rhs.abs());
            } else {
                worst_rhs = f64::INFINITY;
            }
        }
        Ok(Gate::new(
            8,
            "risk-neutral limit",
            rel <= 1e-3 && worst_rhs <= 1e-6,
            &[("value_rel_gap", rel), ("euler_rhs_rel_gap", worst_rhs)],
        ))
    }

    fn risk_ordering(&mut self) -> Result<Gate, VerifyError> {
        let gammas = [0.5, 1.0, 2.0];
        let mut values = Vec::new();
        for g in gammas {
            values.push(self.at_gamma(g)?.value.values().to_vec());
        }
        let w = *self.model.weight();
        let mut worst = f64::NEG_INFINITY;
        for pair in values.windows(2) {
            for ((&x, lo), hi) in self.grid.nodes().iter().zip(&pair[0]).zip(&pair[1]) {
                worst = worst.max(hi - lo - 1e-9 * w.eval(x));
            }
        }
        let mut rng = self.rng(9);
        let mut rho_violations = 0;
        let ladder = [0.1, 0.5, 1.0, 2.0, 5.0];
        for _ in 0..100 {
            let (v, p) = random_outcomes(&mut rng, 12, 10.0);
            let rhos: Vec<f64> = ladder
                .iter()
                .map(|&g| certainty_equivalent(&v, &p, g))
                .collect::<Result<_, _>>()?;
            if rhos.windows(2).any(|r| r[1] > r[0] + 1e-12 * r[0].abs().max(1.0)) {
                rho_violations += 1;
            }
        }
        Ok(Gate::new(
            9,
            "risk ordering",
            worst <= 0.0 && rho_violations == 0,
            &[("worst_increase", worst), ("rho_violations", rho_violations as f64)],
        ))
    }

    fn drift(&self) -> Result<Gate, VerifyError> {
        let x_max = self.grid.x_max();
        let report = drift_check(&self.main, self.model, &default_drift_points(x_max))?;
        let additive = make_preset(PresetName::Additive, &BTreeMap::new())?;
        let additive_d1 = d1_check(&additive, PresetName::Additive.default_x_max());
        let scan_ok = report.w_scan.lambda < 1.0 && report.w_scan.min_margin >= 0.0;
        let d2_ok = report.d2.closed_form && report.d2.passed && report.d2.sampled_y.len() == 50;
        let lambda1 = report.construction.as_ref().map_or(f64::NAN, |c| c.lambda1);
        Ok(Gate::new(
            12,
            "drift",
            report.verdict == Verdict::Pass && scan_ok && d2_ok && !additive_d1.passed,
            &[
                ("verdict_pass", flag(report.verdict == Verdict::Pass)),
                ("lambda1", lambda1),
                ("scan_lambda", report.w_scan.lambda),
                ("d1_limit", report.d1.limit_estimate),
                ("d2_min_margin", report.d2.min_margin),
                ("additive_d1_limit", additive_d1.limit_estimate),
            ],
        ))
    }

    fn stationarity(&mut self) -> Result<Gate, VerifyError> {
        let est = stationary_estimate(&self.main, self.model, &self.cfg.simulate)?;
        let x0 = self.cfg.simulate.x0;
        let seed = self.cfg.simulate.seeds.first().copied().unwrap_or(0);
        let (dm, dr) = self.degenerate()?;
        let fixed = deterministic_fixed_point(dr, dm);
        let trace = simulate(dr, dm, x0, 5_000, seed)?;
        let last = *trace.path.last().expect("non-empty path");
        let fp_gap = fixed.map_or(f64::INFINITY, |f| (last - f).abs());
        let point_mass = StationaryConfig {
            chains: 2,
            steps: 2_000,
            burn_in: 1_000,
            seeds: StationaryConfig::seeds_from(seed, 2),
            x0,
        };
        let deg_ks = stationary_estimate(dr, dm, &point_mass)?.ks_halves;
        Ok(Gate::new(
            13,
            "stationarity",
            est.ks_halves <= 0.05 && est.mass_near_zero <= 0.01 && fp_gap <= 1e-8 && deg_ks == 0.0,
            &[
                ("ks_halves", est.ks_halves),
                ("mass_near_zero", est.mass_near_zero),
                ("samples", est.samples as f64),
                ("fixed_point", fixed.unwrap_or(f64::NAN)),
                ("fixed_point_gap", fp_gap),
                ("degenerate_ks", deg_ks),
            ],
        ))
    }

    fn reproducibility(&self) -> Result<Gate, VerifyError> {
        let a = artifact_bundle(self.model, self.cfg)?;
        let b = artifact_bundle(self.model, self.cfg)?;
        let same = a == b;
        let bytes: usize = a.iter().map(|(_, s)| s.len()).sum();
        Ok(Gate::new(
            14,
            "reproducibility",
            same,
            &[("artifacts", a.len() as f64), ("bytes", bytes as f64)],
        ))
    }
}

/// Solve and simulation artifacts for one configuration, rendered in memory.
pub fn artifact_bundle(
    model: &ModelSpec,
    cfg: &VerifyConfig,
) -> Result<Vec<(&'static str, String)>, VerifyError> {
    let grid = Arc::new(cfg.grid.build()?);
    let result = solve(model, &grid, &cfg.solver)?;
    let seed = cfg.simulate.seeds.first().copied().unwrap_or(0);
    let steps = 10_000;
    let mut trace = simulate(&result, model, cfg.simulate.x0, steps, seed)?;
    trace.burn_in = cfg.simulate.burn_in.min(steps / 2);
    let est = estimate_from_traces(std::slice::from_ref(&trace), &result);
    Ok(vec![
        ("value_policy.csv", io::value_policy_csv(&result)),
        ("solve.json", io::to_json("solve summary", &SolveSummary::new(&result, model))?),
        ("trace.csv", io::trace_csv(&trace)),
        ("ecdf.csv", io::ecdf_csv(&est)),
    ])
}

/// Bisection root of `x -> f(i*(x), z) - x` for a one-atom shock.
pub fn deterministic_fixed_point(result: &SolveResult, model: &ModelSpec) -> Option<f64> {
    let z = model.shock().nodes()[0];
    let g = |x: f64| model.production().value(result.policy.invest_at(x), z) - x;
    let nodes = result.grid().nodes();
    let (mut lo, mut hi) = (nodes[1], result.grid().x_max());
    if !(g(lo) > 0.0 && g(hi) < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Random non-negative, non-decreasing, concave function with `v(0) = 0`,
/// scaled to a random fraction of the value bound.
fn random_member(rng: &mut ChaCha8Rng, grid: &Arc<Grid>, env: Envelope) -> Result<ValueFunction, BellmanError> {
    let x_max = grid.x_max();
    let c: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
    let a = rng.gen_range(0.2..0.9);
    let b = rng.gen_range(0.1..5.0) / x_max;
    let k = rng.gen_range(0.0..x_max);
    let raw = |x: f64| c[0] * x.powf(a) + c[1] * (1.0 - (-b * x).exp()) + c[2] * (b * x).ln_1p() + c[3] * x.min(k);
    let peak = grid
        .nodes()
        .iter()
        .skip(1)
        .map(|&x| raw(x) / env.bound(x))
        .fold(0.0, f64::max);
    let scale = rng.gen_range(0.05..0.9) / peak.max(f64::MIN_POSITIVE);
    ValueFunction::from_fn(grid.clone(), env, |x| scale * raw(x))
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

/// Outcomes in `[0, range)` on `2..=max_atoms` atoms.
fn random_outcomes(rng: &mut ChaCha8Rng, max_atoms: usize, range: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(2..=max_atoms);
    let v = (0..n).map(|_| rng.gen_range(0.0..range)).collect();
    (v, random_probs(rng, n))
}

/// Gate 10: monotonicity, concavity, non-homogeneity, Jensen bound and the
/// quadratic Taylor remainder over 200 random cases each.
pub fn entropic_properties(seed: u64) -> Gate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(10);
    let cases = 200;
    let mut failures = [0usize; 4];
    let mut worst_taylor_ratio = 0.0_f64;
    let ce = |v: &[f64], p: &[f64], g: f64| certainty_equivalent(v, p, g).expect("valid random input");
    for _ in 0..cases {
        let (v, p) = random_outcomes(&mut rng, 12, 10.0);
        let gamma = rng.gen_range(0.05..3.0);
        let scale = 1e-12 * 10.0;
        // Monotonicity.
        let bumped: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..2.0)).collect();
        if ce(&v, &p, gamma) > ce(&bumped, &p, gamma) + scale {
            failures[0] += 1;
        }
        // Concavity.
        let other: Vec<f64> = v.iter().map(|_| rng.gen_range(0.0..10.0)).collect();
        for lam in [0.25, 0.5, 0.75] {
            let mix: Vec<f64> = v.iter().zip(&other).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            if ce(&mix, &p, gamma) < lam * ce(&v, &p, gamma) + (1.0 - lam) * ce(&other, &p, gamma) - scale {
                failures[1] += 1;
            }
        }
        // Jensen and the lower bound.
        let rho = ce(&v, &p, gamma);
        let mean = expected_value(&v, &p).expect("valid");
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        if rho > mean + scale || rho < min - scale {
            failures[2] += 1;
        }
        // Taylor remainder, outcomes in [0, 1): fit C at gamma = 1e-2, check at 1e-3.
        let (u, q) = random_outcomes(&mut rng, 12, 1.0);
        let err = |g: f64| (ce(&u, &q, g) - taylor_approx(&u, &q, g).expect("valid")).abs();
        let c = err(1e-2) / 1e-4;
        let small = err(1e-3);
        worst_taylor_ratio = worst_taylor_ratio.max(small / (c * 1e-6).max(1e-300));
        if small > (2.0 * c * 1e-6).max(1e-14) || c > 1.0 {
            failures[3] += 1;
        }
    }
    let v = [0.0, 1.0];
    let p = [0.5, 0.5];
    let witness = ce(&[0.0, 2.0], &p, 1.0) - 2.0 * ce(&v, &p, 1.0);
    let passed = failures.iter().all(|&f| f == 0) && witness.abs() > 1e-3;
    Gate::new(
        10,
        "entropic measure properties",
        passed,
        &[
            ("cases", cases as f64),
            ("monotonicity_failures", failures[0] as f64),
            ("concavity_failures", failures[1] as f64),
            ("jensen_failures", failures[2] as f64),
            ("taylor_failures", failures[3] as f64),
            ("taylor_ratio", worst_taylor_ratio),
            ("homogeneity_gap", witness),
        ],
    )
}

/// Random non-decreasing piecewise-linear function on `[0, x_max]`, extended flat.
fn random_monotone(rng: &mut ChaCha8Rng, x_max: f64) -> impl Fn(f64) -> f64 {
    let knots = rng.gen_range(2..8);
    let xs: Vec<f64> = (0..=knots).map(|k| x_max * k as f64 / knots as f64).collect();
    let mut ys = vec![rng.gen_range(0.0..1.0)];
    for _ in 0..knots {
        let last = *ys.last().expect("non-empty");
        ys.push(last + rng.gen_range(0.0..3.0));
    }
    move |x: f64| {
        let x = x.clamp(0.0, x_max);
        let k = xs.partition_point(|&a| a <= x).clamp(1, xs.len() - 1);
        let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        ys[k - 1] + t * (ys[k] - ys[k - 1])
    }
}

/// Gate 11: association inequality on 500 random pairs, subadditivity on 200.
pub fn association(seed: u64) -> Result<Gate, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(11);
    let mut worst_gap = f64::INFINITY;
    for _ in 0..500 {
        let n = rng.gen_range(1..=12);
        let probs = random_probs(&mut rng, n);
        let mut h: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut g: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        h.sort_by(|a, b| b.total_cmp(a));
        g.sort_by(|a, b| b.total_cmp(a));
        worst_gap = worst_gap.min(association_lower_bound_check(&h, &g, &probs)?.gap);
    }
    let presets = [
        (make_preset(PresetName::Multiplicative, &BTreeMap::new())?, PresetName::Multiplicative),
        (make_preset(PresetName::Additive, &BTreeMap::new())?, PresetName::Additive),
    ];
    let mut worst_slack = f64::INFINITY;
    let mut sub_failures = 0;
    for k in 0..200 {
        let (model, name) = &presets[k % 2];
        let x_max = name.default_x_max();
        let g1 = random_monotone(&mut rng, 2.0 * x_max);
        let g2 = random_monotone(&mut rng, 2.0 * x_max);
        let y = rng.gen_range(1e-3..1.0) * x_max;
        let check = subadditivity_check(&g1, &g2, y, model);
        worst_slack = worst_slack.min(check.slack);
        if !check.holds {
            sub_failures += 1;
        }
    }
    Ok(Gate::new(
        11,
        "association and subadditivity",
        worst_gap >= -1e-12 && sub_failures == 0,
        &[
            ("worst_gap", worst_gap),
            ("worst_slack", worst_slack),
            ("subadditivity_failures", sub_failures as f64),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn randomized_suites_pass() {
        assert!(entropic_properties(3).passed);
        assert!(association(3).unwrap().passed);
    }

    #[test]
    fn random_members_are_in_the_class() {
        let model = make_preset(PresetName::Multiplicative, &BTreeMap::new()).unwrap();
        let grid = Arc::new(Grid::log(64, 1e-3, 10.0).unwrap());
        let env = Envelope::for_model(&model, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let v = random_member(&mut rng, &grid, env).unwrap();
            assert!(v.shape(1e-12).ok());
            assert!(v.values()[0] == 0.0);
            assert!(grid.nodes().iter().zip(v.values()).all(|(&x, &a)| a <= env.bound(x)));
        }
    }

    #[test]
    fn gate_lines_are_labelled() {
        let g = Gate::new(3, "shape", false, &[("a", 1.0)]);
        assert_eq!(g.line(), "FAIL  3 shape: a=1");
        assert_eq!(Gate::new(1, "x", true, &[("b", 0.5)]).line(), "PASS  1 x: b=5.000e-1");
    }
}
