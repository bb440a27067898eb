use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Result;
use rsgrowth_core::bellman::{solve, Grid, SolveResult};
use rsgrowth_core::dynamics::{
    default_drift_points, drift_check, estimate_from_traces, simulate_chains, DriftReport, Verdict,
};
use rsgrowth_core::euler::{envelope_check, euler_report};
use rsgrowth_core::io::{self, EulerSummary, SolveSummary};
use rsgrowth_core::model::{validate, ModelSpec};
use rsgrowth_core::verify::Verifier;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::failure::Failure;

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        io::write_artifact(&self.out, name, contents).map_err(|e| Failure::config(e.code(), e.to_string()))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let text = io::to_json("artifact", value).map_err(|e| Failure::failed(e.code(), e.to_string()))?;
        self.write(name, &text)
    }

    fn model(&self) -> Result<ModelSpec, Failure> {
        self.cfg.model.build().map_err(Failure::model)
    }

    fn grid(&self) -> Result<Arc<Grid>, Failure> {
        Ok(Arc::new(self.cfg.grid.build().map_err(Failure::model)?))
    }

    /// Builds, solves and records the resolved configuration.
    fn solved(&self) -> Result<(ModelSpec, SolveResult), Failure> {
        let model = self.model()?;
        let grid = self.grid()?;
        self.write_json("config.json", &self.cfg)?;
        let result = solve(&model, &grid, &self.cfg.solver).map_err(Failure::solver)?;
        Ok((model, result))
    }
}

pub fn run_solve(ctx: &Context) -> Result<()> {
    let (model, result) = ctx.solved()?;
    let assumptions = validate(&model, result.grid()).map_err(Failure::model)?;
    ctx.write("value_policy.csv", &io::value_policy_csv(&result))?;
    ctx.write_json("solve.json", &SolveSummary::new(&result, &model))?;
    ctx.write_json("assumptions.json", &assumptions)?;
    println!(
        "solve: {} iterations, residual {:.3e}, error bound {:.3e}, modulus {:.6}",
        result.iterations, result.final_residual, result.error_bound, result.contraction_modulus
    );
    for check in assumptions.checks.iter().filter(|c| !c.passed) {
        eprintln!("warning: assumption {} not met: {}", check.name, check.detail);
    }
    Ok(())
}

pub fn run_euler(ctx: &Context) -> Result<()> {
    let (model, result) = ctx.solved()?;
    let report = euler_report(&result, &model);
    let envelope = envelope_check(&result, &model);
    ctx.write("euler.csv", &io::euler_csv(&report))?;
    ctx.write_json("euler_summary.json", &EulerSummary::from(&report))?;
    ctx.write_json("envelope.json", &envelope)?;
    println!(
        "euler: median {:.3e}, max {:.3e} on [{:.4e}, {:.4e}]; envelope max {:.3e}",
        report.median, report.max, report.window.0, report.window.1, envelope.max
    );
    Ok(())
}

fn drift_report(model: &ModelSpec, result: &SolveResult) -> Result<DriftReport, Failure> {
    drift_check(result, model, &default_drift_points(result.grid().x_max()))
        .map_err(|e| Failure::failed(e.code(), e.to_string()))
}

pub fn run_drift(ctx: &Context) -> Result<()> {
    let (model, result) = ctx.solved()?;
    let report = drift_report(&model, &result)?;
    ctx.write_json("drift.json", &report)?;
    println!(
        "drift: verdict {:?}, D1 limit {:.4}, D2 ({:.3}, {:.3})",
        report.verdict, report.d1.limit_estimate, report.d2.lambda2, report.d2.kappa2
    );
    if report.verdict == Verdict::Fail {
        let why = if report.d1.passed {
            "drift inequality not verified".to_string()
        } else {
            format!("D1 fails: limit estimate {:.4} >= 1", report.d1.limit_estimate)
        };
        return Err(Failure::failed("drift_failed", why).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    seeds: &'a [u64],
    x0: f64,
    steps: usize,
    burn_in: usize,
    samples: usize,
    clipped: usize,
    mean: f64,
    epsilon: f64,
    mass_near_zero: f64,
    ks_halves: f64,
    drift_verdict: Verdict,
}

pub fn run_simulate(ctx: &Context) -> Result<()> {
    let (model, result) = ctx.solved()?;
    let sim = &ctx.cfg.simulate;
    let verdict = drift_report(&model, &result)?.verdict;
    if verdict == Verdict::Fail {
        eprintln!("warning: drift check failed; stationary estimates are indicative only");
    }
    let traces = simulate_chains(&result, &model, sim).map_err(|e| Failure::config(e.code(), e.to_string()))?;
    for (k, t) in traces.iter().enumerate() {
        ctx.write(&format!("trace_{k}.csv"), &io::trace_csv(t))?;
    }
    let est = estimate_from_traces(&traces, &result);
    ctx.write("ecdf.csv", &io::ecdf_csv(&est))?;
    ctx.write_json(
        "simulate.json",
        &SimulateSummary {
            seeds: &sim.seeds,
            x0: sim.x0,
            steps: sim.steps,
            burn_in: sim.burn_in,
            samples: est.samples,
            clipped: est.clipped,
            mean: est.mean,
            epsilon: est.epsilon,
            mass_near_zero: est.mass_near_zero,
            ks_halves: est.ks_halves,
            drift_verdict: verdict,
        },
    )?;
    println!(
        "simulate: {} chains, KS(halves) {:.4}, P(x < {:.1e}) = {:.4}",
        traces.len(),
        est.ks_halves,
        est.epsilon,
        est.mass_near_zero
    );
    Ok(())
}

pub fn run_verify(ctx: &Context) -> Result<()> {
    let model = ctx.model()?;
    ctx.write_json("config.json", &ctx.cfg)?;
    let vcfg = ctx.cfg.verify_config(ctx.seed);
    let mut verifier = Verifier::new(&model, &vcfg).map_err(|e| match e {
        rsgrowth_core::verify::VerifyError::Model(m) => Failure::model(m),
        other => Failure::failed(other.code(), other.to_string()),
    })?;
    let report = verifier
        .run_with(|g| println!("{}", g.line()))
        .map_err(|e| Failure::failed(e.code(), e.to_string()))?;
    ctx.write_json("verify.json", &report)?;
    if !report.passed {
        let failed: Vec<String> = report
            .gates
            .iter()
            .filter(|g| !g.passed)
            .map(|g| format!("{} {}", g.id, g.name))
            .collect();
        return Err(Failure::failed("verification_failed", failed.join(", ")).into());
    }
    println!("verify: all {} gates pass", report.gates.len());
    Ok(())
}

/// JSON artifacts collated by `report`, in output order.
pub const REPORT_INPUTS: &[&str] = &[
    "config",
    "solve",
    "assumptions",
    "euler_summary",
    "envelope",
    "drift",
    "simulate",
    "verify",
];

pub fn run_report(ctx: &Context) -> Result<()> {
    let (found, missing) = collate(&ctx.out)?;
    if found.is_empty() {
        return Err(Failure::config(
            "no_artifacts",
            format!("no artifacts found in {}", ctx.out.display()),
        )
        .into());
    }
    let path = ctx.write_json(
        "report.json",
        &serde_json::json!({ "artifacts": found, "missing": missing }),
    )?;
    println!("report: {} artifacts collated into {}", found.len(), path.display());
    Ok(())
}

fn collate(dir: &Path) -> Result<(BTreeMap<&'static str, Value>, Vec<&'static str>), Failure> {
    let mut found = BTreeMap::new();
    let mut missing = Vec::new();
    for &name in REPORT_INPUTS {
        let path = dir.join(format!("{name}.json"));
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let value = serde_json::from_str(&text)
                    .map_err(|e| Failure::config("invalid_artifact", format!("{}: {e}", path.display())))?;
                found.insert(name, value);
            }
            Err(_) => missing.push(name),
        }
    }
    Ok((found, missing))
}
