use serde::Serialize;

use super::spec::expected_weight;
use super::{ModelError, ModelSpec, UtilitySpec};
use crate::bellman::Grid;

/// Relative slack on the growth bound.
const GROWTH_SLACK: f64 = 1e-9;
/// Strictness of discrete concavity, relative to slope scale.
const STRICT_CONCAVITY: f64 = 1e-12;
/// Agreement of analytic and finite-difference derivatives.
const DERIVATIVE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Grid point where the check came closest to (or furthest past) failing.
    pub worst_x: Option<f64>,
    pub worst_value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub alpha: f64,
    pub d: f64,
    pub modulus: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Worst {
    x: Option<f64>,
    value: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            x: None,
            value: f64::NEG_INFINITY,
        }
    }

    /// Tracks the largest `value` (most violating when positive).
    fn push(&mut self, x: f64, value: f64) {
        if value > self.value || self.x.is_none() {
            self.x = Some(x);
            self.value = value;
        }
    }

    fn check(self, name: &'static str, passed: bool, detail: impl Into<String>) -> AssumptionCheck {
        AssumptionCheck {
            name,
            passed,
            worst_x: self.x,
            worst_value: if self.value.is_finite() { self.value } else { 0.0 },
            detail: detail.into(),
        }
    }
}

/// Numerically checks the standing assumptions on the nodes of `grid`.
pub fn validate(spec: &ModelSpec, grid: &Grid) -> Result<ValidationReport, ModelError> {
    if !(spec.beta() > 0.0 && spec.beta() < 1.0) {
        return Err(ModelError::DiscountOutOfRange(spec.beta()));
    }
    if spec.gamma() <= 0.0 {
        return Err(ModelError::NonPositiveRisk(spec.gamma()));
    }
    if spec.shock().is_empty() {
        return Err(ModelError::EmptyShockSupport);
    }
    if spec.modulus() >= 1.0 {
        return Err(ModelError::NoContraction {
            alpha: spec.alpha(),
            beta: spec.beta(),
        });
    }
    let xs = grid.nodes();
    let u = spec.utility();
    let f = spec.production();
    let w = spec.weight();
    let shock = spec.shock();
    let d = spec.utility_bound(grid);
    let mut checks = Vec::new();

    // U1: u(0) = 0, increasing, strictly concave.
    {
        let slopes: Vec<f64> = xs
            .windows(2)
            .map(|p| (u.value(p[1]) - u.value(p[0])) / (p[1] - p[0]))
            .collect();
        let scale = slopes.iter().fold(0.0_f64, |a, s| a.max(s.abs()));
        let mut worst = Worst::new();
        let mut ok = u.value(0.0) == 0.0;
        for (j, s) in slopes.iter().enumerate() {
            worst.push(xs[j + 1], -s);
            ok &= *s > 0.0;
        }
        for j in 1..slopes.len() {
            let gap = slopes[j] - slopes[j - 1];
            ok &= gap <= -STRICT_CONCAVITY * scale;
        }
        checks.push(worst.check("U1", ok, "u(0)=0, increasing, strictly concave on nodes"));
    }

    // U2: w >= 1 non-decreasing, u <= d w.
    {
        let mut worst = Worst::new();
        let mut ok = true;
        let mut prev = 0.0;
        for &x in xs {
            let wx = w.eval(x);
            ok &= wx >= 1.0 && wx >= prev;
            prev = wx;
            let gap = u.value(x) - d * wx;
            worst.push(x, gap);
            ok &= gap <= 1e-12 * wx;
        }
        checks.push(worst.check("U2", ok, format!("u <= d w with d={d:.6}")));
    }

    // U3: u continuously differentiable.
    {
        let mut worst = Worst::new();
        let mut ok = true;
        for &x in xs.iter().filter(|&&x| x >= 1e-4 * grid.x_max()) {
            let du = u.deriv(x);
            ok &= du.is_finite() && du > 0.0;
            if let UtilitySpec::Power { .. } = u {
                let h = 1e-6 * x;
                let fd = (u.value(x + h) - u.value(x - h)) / (2.0 * h);
                let rel = (fd - du).abs() / du;
                worst.push(x, rel);
                ok &= rel <= DERIVATIVE_TOL;
            }
        }
        checks.push(worst.check("U3", ok, "u' finite, positive, matches finite differences"));
    }

    // U4: u'(0+) = infinity.
    {
        let at_zero = u.deriv(0.0);
        let tiny = u.deriv(f64::MIN_POSITIVE);
        let ok = at_zero.is_infinite() || tiny >= 1e6 * u.deriv(1.0);
        let mut worst = Worst::new();
        worst.push(0.0, -tiny);
        checks.push(worst.check("U4", ok, format!("u'(0+) ~ {tiny:.3e}")));
    }

    // F1: f(., z) non-decreasing and concave.
    {
        let ys: &[f64] = if f.continuous_at_zero() { xs } else { &xs[1..] };
        let mut worst = Worst::new();
        let mut ok = true;
        for &z in shock.nodes() {
            let vals: Vec<f64> = ys.iter().map(|&y| f.value(y, z)).collect();
            let slopes: Vec<f64> = ys
                .windows(2)
                .zip(vals.windows(2))
                .map(|(y, v)| (v[1] - v[0]) / (y[1] - y[0]))
                .collect();
            let scale = slopes.iter().fold(1e-300_f64, |a, s| a.max(s.abs()));
            for (j, s) in slopes.iter().enumerate() {
                ok &= *s >= -1e-12 * scale;
                if j > 0 {
                    let gap = (s - slopes[j - 1]) / scale;
                    worst.push(ys[j], gap);
                    ok &= gap <= 1e-9;
                }
            }
        }
        let detail = if f.continuous_at_zero() {
            "f(., z) non-decreasing and concave on nodes"
        } else {
            "f(., z) non-decreasing and concave on positive nodes (jump at y=0 by convention)"
        };
        checks.push(worst.check("F1", ok, detail));
    }

    // F2: sup_{y <= x} E w(f(y, z)) <= alpha w(x).
    {
        let mut worst = Worst::new();
        let mut ok = true;
        let mut running = 0.0_f64;
        for &x in xs {
            running = running.max(expected_weight(f, shock, w, x));
            let ratio = running / (spec.alpha() * w.eval(x));
            worst.push(x, ratio);
            ok &= ratio <= 1.0 + GROWTH_SLACK;
        }
        checks.push(worst.check(
            "F2",
            ok,
            format!("growth bound alpha={:.8}, worst ratio shown", spec.alpha()),
        ));
    }

    // F3: f continuously differentiable in y.
    {
        let mut worst = Worst::new();
        let mut ok = true;
        for &y in xs.iter().filter(|&&y| y >= 1e-4 * grid.x_max()) {
            for &z in shock.nodes() {
                let df = f.deriv(y, z);
                ok &= df.is_finite();
                let h = 1e-6 * y;
                let fd = (f.value(y + h, z) - f.value(y - h, z)) / (2.0 * h);
                let rel = (fd - df).abs() / df.abs().max(1e-12);
                worst.push(y, rel);
                ok &= rel <= DERIVATIVE_TOL;
            }
        }
        checks.push(worst.check("F3", ok, "df/dy matches finite differences"));
    }

    // F4: f(0, z) = 0.
    {
        let mut worst = Worst::new();
        for &z in shock.nodes() {
            worst.push(z, f.value(0.0, z).abs());
        }
        let ok = worst.value == 0.0;
        checks.push(worst.check("F4", ok, "f(0, z) = 0 at every atom"));
    }

    // F5: positive marginal product somewhere on a positive-probability set.
    {
        let mut worst = Worst::new();
        let mut ok = false;
        for &y in &xs[1..] {
            let best = shock
                .nodes()
                .iter()
                .zip(shock.probs())
                .filter(|(_, p)| **p > 0.0)
                .map(|(&z, _)| f.deriv(y, z))
                .fold(f64::NEG_INFINITY, f64::max);
            worst.push(y, -best);
            ok |= best > 0.0;
        }
        checks.push(worst.check("F5", ok, "investment with positive marginal product exists"));
    }

    {
        let mut worst = Worst::new();
        worst.push(0.0, spec.modulus());
        checks.push(worst.check(
            "contraction",
            spec.modulus() < 1.0,
            format!("alpha*beta = {:.8}", spec.modulus()),
        ));
    }

    Ok(ValidationReport {
        checks,
        alpha: spec.alpha(),
        d,
        modulus: spec.modulus(),
    })
}
