use rayon::prelude::*;

use super::{BellmanError, Policy, ValueFunction};
use crate::model::ModelSpec;
use crate::optimize::golden_section_max;
use crate::risk::Aggregator;

/// Inner maximizer tolerance as a fraction of `x_max`.
pub const INNER_TOL_RATIO: f64 = 1e-10;

/// One-step objective `u(x - y) + beta * agg(v(f(y, .)))` with scratch space.
pub(crate) struct Objective<'a> {
    v: &'a ValueFunction,
    model: &'a ModelSpec,
    agg: Aggregator,
    next: Vec<f64>,
    cont: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(v: &'a ValueFunction, model: &'a ModelSpec, agg: Aggregator) -> Self {
        let n = model.shock().len();
        Self {
            v,
            model,
            agg,
            next: vec![0.0; n],
            cont: vec![0.0; n],
        }
    }

    /// Certainty equivalent of continuation value after investing `y`.
    #[inline]
    pub(crate) fn continuation(&mut self, y: f64) -> f64 {
        let shock = self.model.shock();
        self.model.production().next_states(y, shock.nodes(), &mut self.next);
        self.v.eval_into(&self.next, &mut self.cont);
        self.agg.aggregate(&self.cont, shock.probs())
    }

    #[inline]
    pub(crate) fn eval(&mut self, x: f64, y: f64) -> f64 {
        self.model.utility().value(x - y) + self.model.beta() * self.continuation(y)
    }
}

/// Maximizes the one-step objective at income `x`.
pub(crate) fn maximize_at(obj: &mut Objective<'_>, x: f64, tol: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (obj.eval(0.0, 0.0), 0.0);
    }
    let best = golden_section_max(|y| obj.eval(x, y), 0.0, x, tol);
    (best.value, best.arg)
}

/// Maximizes on a bracket around `guess`, falling back to `[0, x]` when the
/// bracketed maximum sits on an interior bracket edge. Exact for concave objectives.
fn maximize_near(obj: &mut Objective<'_>, x: f64, tol: f64, guess: f64, radius: f64) -> (f64, f64) {
    if x <= 0.0 {
        return maximize_at(obj, x, tol);
    }
    let lo = (guess - radius).max(0.0);
    let hi = (guess + radius).min(x);
    let best = golden_section_max(|y| obj.eval(x, y), lo, hi, tol);
    let pinned_low = lo > 0.0 && best.arg - lo <= 2.0 * tol;
    let pinned_high = hi < x && hi - best.arg <= 2.0 * tol;
    if pinned_low || pinned_high {
        maximize_at(obj, x, tol)
    } else {
        (best.value, best.arg)
    }
}

/// Previous policy and per-node step sizes used to narrow the inner search.
pub(crate) struct SearchHint<'a> {
    pub(crate) invest: &'a [f64],
    pub(crate) radius: &'a [f64],
}

/// Applies the entropic Bellman operator to `v`.
pub fn apply_operator(v: &ValueFunction, model: &ModelSpec) -> Result<(ValueFunction, Policy), BellmanError> {
    apply_operator_with(v, model, Aggregator::Entropic { gamma: model.gamma() })
}

/// Applies the Bellman operator with an explicit continuation aggregator.
pub fn apply_operator_with(
    v: &ValueFunction,
    model: &ModelSpec,
    agg: Aggregator,
) -> Result<(ValueFunction, Policy), BellmanError> {
    apply_operator_hinted(v, model, agg, None)
}

pub(crate) fn apply_operator_hinted(
    v: &ValueFunction,
    model: &ModelSpec,
    agg: Aggregator,
    hint: Option<SearchHint<'_>>,
) -> Result<(ValueFunction, Policy), BellmanError> {
    let grid = v.grid();
    let tol = INNER_TOL_RATIO * grid.x_max();
    let out: Vec<(f64, f64)> = grid
        .nodes()
        .par_iter()
        .enumerate()
        .map_init(
            || Objective::new(v, model, agg),
            |obj, (j, &x)| match &hint {
                Some(h) => maximize_near(obj, x, tol, h.invest[j], h.radius[j]),
                None => maximize_at(obj, x, tol),
            },
        )
        .collect();
    let mut values = Vec::with_capacity(out.len());
    let mut invest = Vec::with_capacity(out.len());
    for (&x, (val, y)) in grid.nodes().iter().zip(out) {
        if !val.is_finite() {
            return Err(BellmanError::NotFinite { x });
        }
        values.push(val);
        invest.push(y);
    }
    Ok((
        ValueFunction::new(grid.clone(), values, *v.envelope())?,
        Policy::new(grid.clone(), invest)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{w_norm_distance, Envelope};
    use crate::testutil::{preset, small_grid};
    use proptest::prelude::*;

    fn member(a: f64, b: f64, c: f64, scale: f64) -> ValueFunction {
        let m = preset();
        let grid = small_grid();
        let env = Envelope::for_model(&m, &grid);
        ValueFunction::from_fn(grid, env, |x| scale * (x.powf(a) + c * (b * x).ln_1p())).unwrap()
    }

    #[test]
    fn zero_continuation_consumes_everything() {
        let m = preset();
        let v = ValueFunction::zero(small_grid(), Envelope::for_model(&m, &small_grid()));
        let (lv, pol) = apply_operator(&v, &m).unwrap();
        for ((&x, &val), &inv) in v.grid().nodes().iter().zip(lv.values()).zip(pol.invest_nodes()) {
            assert_eq!(inv, 0.0);
            assert!((val - m.utility().value(x)).abs() <= 1e-15 * val.max(1.0));
        }
    }

    #[test]
    fn zero_income_node_is_forced() {
        let m = preset();
        let (lv, pol) = apply_operator(&member(0.5, 2.0, 1.0, 3.0), &m).unwrap();
        assert_eq!(lv.values()[0], 0.0);
        assert_eq!(pol.invest_nodes()[0], 0.0);
    }

    #[test]
    fn brute_force_maximum_agrees() {
        let m = preset();
        let v = member(0.4, 1.0, 0.5, 4.0);
        let (lv, pol) = apply_operator(&v, &m).unwrap();
        let mut obj = Objective::new(&v, &m, Aggregator::Entropic { gamma: m.gamma() });
        for j in [10, 40, 80] {
            let x = v.grid().nodes()[j];
            let brute = (0..=4000)
                .map(|k| obj.eval(x, x * k as f64 / 4000.0))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(lv.values()[j] >= brute - 1e-12);
            assert!(lv.values()[j] - brute < 1e-6);
            assert!(pol.invest_nodes()[j] > 0.0 && pol.invest_nodes()[j] < x);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn contracts_with_modulus(
            a1 in 0.2..0.9_f64, b1 in 0.1..3.0_f64, c1 in 0.0..2.0_f64, s1 in 0.1..5.0_f64,
            a2 in 0.2..0.9_f64, b2 in 0.1..3.0_f64, c2 in 0.0..2.0_f64, s2 in 0.1..5.0_f64,
        ) {
            let m = preset();
            let (v1, v2) = (member(a1, b1, c1, s1), member(a2, b2, c2, s2));
            let (l1, _) = apply_operator(&v1, &m).unwrap();
            let (l2, _) = apply_operator(&v2, &m).unwrap();
            let d = w_norm_distance(&v1, &v2).unwrap();
            prop_assert!(w_norm_distance(&l1, &l2).unwrap() <= m.modulus() * d + 1e-8);
        }

        #[test]
        fn preserves_shape(a in 0.2..0.9_f64, b in 0.1..3.0_f64, c in 0.0..2.0_f64, s in 0.1..5.0_f64) {
            let m = preset();
            let (lv, pol) = apply_operator(&member(a, b, c, s), &m).unwrap();
            prop_assert!(lv.shape(1e-9).ok());
            let tol = 1e-8 * lv.grid().x_max();
            prop_assert!(pol.invest_nodes().windows(2).all(|w| w[1] >= w[0] - tol));
        }
    }
}
