//! Parameter sweeps for the λ-sink and two-discount reductions with a known
//! transition function. The preservation thresholds depend on `P`, so they
//! are only observed here, never computed inside a reduction.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::Mdp;
use crate::reduce::{
    automaton_product_reduction, check_optimality_preservation, compose, lambda_sink_reduction, two_discount_reduction,
};
use crate::spec::{BuchiAutomaton, LtlFormula, Specification};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub preserved: Option<bool>,
}

/// Which product reduction to sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepKind {
    LambdaSink,
    /// Sweeps `γ2` with `γ1 = γ2²`.
    TwoDiscount,
}

/// Runs the automaton product followed by the chosen reduction for every
/// parameter and checks optimality preservation with respect to `formula`.
pub fn preservation_sweep(
    mdp: &Mdp<f64>,
    formula: &LtlFormula,
    kind: SweepKind,
    params: &[f64],
    budget: u64,
) -> Result<Vec<SweepPoint>> {
    let aut = BuchiAutomaton::for_builtin(formula)
        .ok_or_else(|| crate::error::Error::Unsupported("sweeps need a built-in formula".into()))?;
    let product = automaton_product_reduction::<f64>(&mdp.shape(), &aut)?;
    let spec = Specification::ltl(formula.clone());
    let inner_shape = product.descriptor.shape();
    params
        .iter()
        .map(|&x| {
            let outer = match kind {
                SweepKind::LambdaSink => lambda_sink_reduction(&inner_shape, &product.accepting, x)?,
                SweepKind::TwoDiscount => two_discount_reduction(&inner_shape, &product.accepting, x * x, x)?,
            };
            let rd = compose(&product.descriptor, &outer, &mdp.shape())?;
            let report = check_optimality_preservation(mdp, &spec, &rd, budget)?;
            Ok(SweepPoint { param: x, preserved: report.preserved })
        })
        .collect()
}
