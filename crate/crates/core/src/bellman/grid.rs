use serde::{Deserialize, Serialize};

use crate::model::ModelError;

/// Smallest grid the solver accepts.
pub const MIN_GRID_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    /// Log-uniform nodes with a zero node prepended.
    Log,
    Custom,
}

/// State grid `0 = x_0 < x_1 < ... < x_{M-1} = x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl Grid {
    pub fn uniform(points: usize, x_max: f64) -> Result<Self, ModelError> {
        check_size(points, x_max)?;
        let h = x_max / (points - 1) as f64;
        let mut nodes: Vec<f64> = (0..points).map(|j| j as f64 * h).collect();
        nodes[points - 1] = x_max;
        Ok(Self {
            nodes,
            spacing: Spacing::Uniform,
        })
    }

    /// `points - 1` log-uniform nodes on `[x_min, x_max]` plus the node at zero.
    pub fn log(points: usize, x_min: f64, x_max: f64) -> Result<Self, ModelError> {
        check_size(points, x_max)?;
        if !(x_min > 0.0 && x_min < x_max) {
            return Err(ModelError::InvalidGrid(format!(
                "log grid needs 0 < x_min < x_max, got x_min={x_min}"
            )));
        }
        let n = points - 1;
        let (lo, hi) = (x_min.ln(), x_max.ln());
        let mut nodes = Vec::with_capacity(points);
        nodes.push(0.0);
        nodes.extend((0..n).map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()));
        nodes[1] = x_min;
        nodes[points - 1] = x_max;
        Ok(Self {
            nodes,
            spacing: Spacing::Log,
        })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, ModelError> {
        let x_max = nodes.last().copied().unwrap_or(0.0);
        check_size(nodes.len(), x_max)?;
        if nodes[0] != 0.0 {
            return Err(ModelError::InvalidGrid("first node must be exactly 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::InvalidGrid("nodes must be strictly increasing".into()));
        }
        Ok(Self {
            nodes,
            spacing: Spacing::Custom,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn x_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Segment index `k` and weight `t` with `x = (1-t) x_k + t x_{k+1}`, for `0 <= x <= x_max`.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let m = self.nodes.len();
        let k = self.nodes.partition_point(|&n| n <= x).clamp(1, m - 1) - 1;
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        (k, ((x - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Indices of the middle `fraction` of nodes.
    pub fn middle_window(&self, fraction: f64) -> std::ops::Range<usize> {
        let m = self.nodes.len();
        let skip = ((1.0 - fraction) * 0.5 * m as f64).round() as usize;
        skip..m.saturating_sub(skip)
    }
}

fn check_size(points: usize, x_max: f64) -> Result<(), ModelError> {
    if points < MIN_GRID_POINTS {
        return Err(ModelError::InvalidGrid(format!(
            "need at least {MIN_GRID_POINTS} nodes, got {points}"
        )));
    }
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(ModelError::InvalidGrid(format!("x_max={x_max} must be positive")));
    }
    Ok(())
}

/// Serializable grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub spacing: Spacing,
    pub x_max: f64,
    /// First positive node of a log grid, as a fraction of `x_max`.
    #[serde(default = "default_x_min_ratio")]
    pub x_min_ratio: f64,
}

fn default_x_min_ratio() -> f64 {
    1e-4
}

impl GridConfig {
    pub fn log(points: usize, x_max: f64) -> Self {
        Self {
            points,
            spacing: Spacing::Log,
            x_max,
            x_min_ratio: default_x_min_ratio(),
        }
    }

    pub fn build(&self) -> Result<Grid, ModelError> {
        match self.spacing {
            Spacing::Uniform => Grid::uniform(self.points, self.x_max),
            Spacing::Log => Grid::log(self.points, self.x_min_ratio * self.x_max, self.x_max),
            Spacing::Custom => Err(ModelError::InvalidGrid(
                "custom grids are built from explicit nodes".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_starts_at_zero_and_hits_endpoints() {
        let g = Grid::log(100, 1e-3, 10.0).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[1], 1e-3);
        assert_eq!(g.x_max(), 10.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        let r1 = g.nodes()[3] / g.nodes()[2];
        let r2 = g.nodes()[90] / g.nodes()[89];
        assert!((r1 - r2).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(Grid::uniform(15, 1.0).is_err());
        assert!(Grid::uniform(16, 0.0).is_err());
        assert!(Grid::from_nodes((1..=20).map(|k| k as f64).collect()).is_err());
        let mut bad: Vec<f64> = (0..20).map(|k| k as f64).collect();
        bad[5] = bad[4];
        assert!(Grid::from_nodes(bad).is_err());
    }

    #[test]
    fn locate_brackets_queries() {
        let g = Grid::uniform(21, 2.0).unwrap();
        assert_eq!(g.locate(0.0), (0, 0.0));
        let (k, t) = g.locate(0.35);
        assert_eq!(k, 3);
        assert!((t - 0.5).abs() < 1e-12);
        assert_eq!(g.locate(2.0), (19, 1.0));
    }

    #[test]
    fn middle_window_drops_twenty_percent_each_side() {
        let g = Grid::uniform(100, 1.0).unwrap();
        assert_eq!(g.middle_window(0.6), 20..80);
    }
}
