//! Small cached solves shared by unit tests.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::bellman::{solve, Grid, SolveOptions, SolveResult};
use crate::model::{make_preset, DiscreteShock, ModelSpec, PresetName};

pub(crate) fn preset() -> ModelSpec {
    make_preset(PresetName::Multiplicative, &BTreeMap::new()).unwrap()
}

pub(crate) fn small_grid() -> Arc<Grid> {
    Arc::new(Grid::log(96, 1e-3, 10.0).unwrap())
}

/// Multiplicative preset on 96 log-spaced nodes.
pub(crate) fn small_solve() -> &'static (ModelSpec, SolveResult) {
    static CELL: OnceLock<(ModelSpec, SolveResult)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = preset();
        let r = solve(&m, &small_grid(), &SolveOptions::default()).unwrap();
        (m, r)
    })
}

/// Same model with the shock collapsed to its mean.
pub(crate) fn degenerate_solve() -> &'static (ModelSpec, SolveResult) {
    static CELL: OnceLock<(ModelSpec, SolveResult)> = OnceLock::new();
    CELL.get_or_init(|| {
        let base = preset();
        let m = base
            .with_shock(DiscreteShock::degenerate(base.shock().mean()).unwrap())
            .unwrap();
        let r = solve(&m, &small_grid(), &SolveOptions::default()).unwrap();
        (m, r)
    })
}
