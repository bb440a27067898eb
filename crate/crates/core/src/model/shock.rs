use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ModelError;

/// Default number of quantile atoms.
pub const DEFAULT_SHOCK_NODES: usize = 128;

/// How a [`DiscreteShock`] was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShockProvenance {
    ExplicitList,
    QuantileDiscretized { source: String, nodes: usize },
}

/// Finite quadrature for the i.i.d. shock law: atoms sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteShock {
    nodes: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    mean: f64,
    provenance: ShockProvenance,
}

impl DiscreteShock {
    /// Atoms with probabilities; duplicates are merged and atoms sorted.
    pub fn explicit(nodes: Vec<f64>, probs: Vec<f64>) -> Result<Self, ModelError> {
        Self::build(nodes, probs, ShockProvenance::ExplicitList)
    }

    /// Point mass at `z`.
    pub fn degenerate(z: f64) -> Result<Self, ModelError> {
        Self::explicit(vec![z], vec![1.0])
    }

    /// Equal-probability quantile midpoints of a lognormal law.
    pub fn lognormal(mu: f64, sigma: f64, n: usize) -> Result<Self, ModelError> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(ModelError::InvalidShock(format!(
                "lognormal parameters mu={mu} sigma={sigma} invalid"
            )));
        }
        let normal = Normal::new(mu, sigma)
            .map_err(|e| ModelError::InvalidShock(format!("lognormal: {e}")))?;
        Self::quantile(n, "lognormal", |q| normal.inverse_cdf(q).exp())
    }

    /// Equal-probability quantile midpoints of `U[low, high]`.
    pub fn uniform(low: f64, high: f64, n: usize) -> Result<Self, ModelError> {
        if !(low >= 0.0 && high > low && high.is_finite()) {
            return Err(ModelError::InvalidShock(format!(
                "uniform support [{low}, {high}] invalid"
            )));
        }
        Self::quantile(n, "uniform", |q| low + q * (high - low))
    }

    /// Quantile midpoints of a two-point law `P(low) = p_low`; atoms merge back to two.
    pub fn two_point(low: f64, high: f64, p_low: f64, n: usize) -> Result<Self, ModelError> {
        if !(low >= 0.0 && high > low && p_low > 0.0 && p_low < 1.0) {
            return Err(ModelError::InvalidShock(format!(
                "two-point law ({low}, {high}, p_low={p_low}) invalid"
            )));
        }
        Self::quantile(n, "two-point", |q| if q < p_low { low } else { high })
    }

    fn quantile(n: usize, source: &str, inv: impl Fn(f64) -> f64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyShockSupport);
        }
        let p = 1.0 / n as f64;
        let nodes: Vec<f64> = (0..n).map(|k| inv((k as f64 + 0.5) * p)).collect();
        Self::build(
            nodes,
            vec![p; n],
            ShockProvenance::QuantileDiscretized {
                source: source.to_string(),
                nodes: n,
            },
        )
    }

    fn build(
        nodes: Vec<f64>,
        probs: Vec<f64>,
        provenance: ShockProvenance,
    ) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::EmptyShockSupport);
        }
        if nodes.len() != probs.len() {
            return Err(ModelError::InvalidShock(
                "nodes and probabilities differ in length".into(),
            ));
        }
        if nodes.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
            return Err(ModelError::InvalidShock("shock atoms must be finite and non-negative".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(ModelError::InvalidShock("shock probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidShock(format!(
                "shock probabilities sum to {total}, not 1"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (z, p) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == z => last.1 += p,
                _ => merged.push((z, p)),
            }
        }
        let (nodes, probs): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
        let mean = nodes.iter().zip(&probs).map(|(z, p)| z * p).sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self {
            nodes,
            probs,
            cumulative,
            mean,
            provenance,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn provenance(&self) -> &ShockProvenance {
        &self.provenance
    }

    pub fn is_degenerate(&self) -> bool {
        self.nodes.len() == 1
    }

    /// `E[1/z]`; infinite if an atom sits at zero.
    pub fn mean_reciprocal(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.probs)
            .map(|(z, p)| if *z > 0.0 { p / z } else { f64::INFINITY })
            .sum()
    }

    /// Inverse-CDF lookup of the atom index for a uniform draw in `[0, 1)`.
    #[inline]
    pub fn sample_index(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.nodes.len() - 1)
    }
}
