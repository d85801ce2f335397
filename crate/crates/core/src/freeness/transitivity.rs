use std::sync::Arc;

use serde::Serialize;

use super::{check_factorization, columns, sub, FactorizationReport, ProjectedMoments, Verdict};
use crate::algebra::{
    check_conditional_expectation, check_faithfulness, mat_vec, max_abs, CMatrix, ConditionalExpectation, MatrixAlgebra, C64,
    TOL, ZERO,
};
use crate::error::{Error, Result};
use crate::series::{check_order, unlinear, CumulantSeries};
use crate::transform::cumulants_from_moments;

/// `B ⊂ C ⊂ D` with expectations `F_DC`, `F_CB` and `F_DB`.
#[derive(Clone, Debug)]
pub struct ChainContext {
    pub d: Arc<MatrixAlgebra>,
    pub c: Arc<MatrixAlgebra>,
    pub b: Arc<MatrixAlgebra>,
    pub f_dc: ConditionalExpectation,
    pub f_cb: ConditionalExpectation,
    pub f_db: ConditionalExpectation,
}

impl ChainContext {
    pub fn new(f_dc: ConditionalExpectation, f_cb: ConditionalExpectation, f_db: ConditionalExpectation) -> Result<Self> {
        if !f_dc.target().same_as(f_cb.source())
            || !f_dc.source().same_as(f_db.source())
            || !f_cb.target().same_as(f_db.target())
        {
            return Err(Error::config("expectations do not form a chain B ⊂ C ⊂ D"));
        }
        Ok(Self {
            d: f_dc.source().clone(),
            c: f_dc.target().clone(),
            b: f_cb.target().clone(),
            f_dc,
            f_cb,
            f_db,
        })
    }

    /// `D = diag(ℂ^n)`, `C` and `B` spanned by the indicator projections of
    /// `c_groups` and `b_groups`, every expectation the `weights`-average
    /// over each group.
    pub fn diagonal(n: usize, c_groups: &[Vec<usize>], b_groups: &[Vec<usize>], weights: &[f64]) -> Result<Self> {
        if weights.len() != n || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::config("one positive weight per coordinate is required"));
        }
        let singletons: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let d = Arc::new(MatrixAlgebra::grouped_diagonal("D", n, &singletons)?);
        let c = Arc::new(MatrixAlgebra::grouped_diagonal("C", n, c_groups)?);
        let b = Arc::new(MatrixAlgebra::grouped_diagonal("B", n, b_groups)?);
        let f_dc = group_average(d.clone(), c.clone(), c_groups, weights)?;
        let f_cb = group_average(c, b.clone(), b_groups, weights)?;
        let f_db = group_average(d, b, b_groups, weights)?;
        Self::new(f_dc, f_cb, f_db)
    }
}

fn group_average(
    source: Arc<MatrixAlgebra>,
    target: Arc<MatrixAlgebra>,
    groups: &[Vec<usize>],
    weights: &[f64],
) -> Result<ConditionalExpectation> {
    let groups = groups.to_vec();
    let weights = weights.to_vec();
    ConditionalExpectation::from_fn(source, target, move |m| {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for g in &groups {
            let total: f64 = g.iter().map(|&i| weights[i]).sum();
            let val: C64 = g.iter().map(|&i| m[(i, i)] * weights[i]).sum::<C64>() / total;
            for &i in g {
                out[(i, i)] = val;
            }
        }
        out
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitivityReport {
    /// `‖F_CB ∘ F_DC − F_DB‖`.
    pub compatibility_residual: f64,
    pub expectations_valid: bool,
    pub faithful: [bool; 3],
    /// Free from `D` over `C`.
    pub d_over_c: FactorizationReport,
    /// Free from `C` over `B`, on the independently computed `C` cumulants.
    pub c_over_b: FactorizationReport,
    /// Free from `D` over `B`.
    pub d_over_b: FactorizationReport,
    /// `κ_D(d…)` against `F_CB(κ_C(F_DB(d)…))`.
    pub chained_deviation: f64,
    pub verdict: Verdict,
}

impl TransitivityReport {
    pub fn all_pass(&self) -> bool {
        self.d_over_c.passes && self.c_over_b.passes && self.d_over_b.passes
    }
}

/// Given `D`-valued cumulants, checks both hypotheses of the transitivity
/// statement and its conclusion.
pub fn check_transitivity(chain: &ChainContext, k_d: &CumulantSeries, k_max: usize) -> Result<TransitivityReport> {
    check_order(k_max, k_d.order_cap())?;
    if !k_d.algebra().same_as(&chain.d) {
        return Err(Error::dims("cumulants are not over the top algebra of the chain"));
    }
    let composed = chain.f_cb.compose(&chain.f_dc)?;
    let compatibility_residual = max_abs(&(composed.matrix() - chain.f_db.matrix()));
    let expectations_valid = [&chain.f_dc, &chain.f_cb, &chain.f_db]
        .iter()
        .all(|f| check_conditional_expectation(f).passes);
    let faithful = [
        check_faithfulness(&chain.f_dc).faithful,
        check_faithfulness(&chain.f_cb).faithful,
        check_faithfulness(&chain.f_db).faithful,
    ];

    let d_over_c = check_factorization(k_d, &chain.f_dc, k_max)?;
    let k_c = cumulants_from_moments(&ProjectedMoments::new(k_d, &chain.f_dc)?, k_max)?;
    let c_over_b = check_factorization(&k_c, &chain.f_cb, k_max)?;
    let d_over_b = check_factorization(k_d, &chain.f_db, k_max)?;

    let b_in_c = chain.f_cb.inclusion()?;
    let b_in_d = chain.f_db.inclusion()?;
    let pushed: Vec<Vec<C64>> = columns(chain.f_db.matrix())
        .iter()
        .map(|v| mat_vec(b_in_c, v))
        .collect();
    let n = k_d.n_vars();
    let dd = chain.d.dim();
    let mut chained_deviation: f64 = 0.0;
    for k in 1..=k_max {
        for ti in 0..n.pow(k as u32) {
            let idx = unlinear(ti, n, k);
            for tb in 0..dd.pow(k as u32 - 1) {
                let basis = unlinear(tb, dd, k - 1);
                let args: Vec<&[C64]> = basis.iter().map(|&a| pushed[a].as_slice()).collect();
                let via_c = mat_vec(b_in_d, &chain.f_cb.apply(&k_c.apply(&idx, &args)?));
                let diff = sub(k_d.value(&idx, &basis), &via_c);
                chained_deviation = chained_deviation.max(chain.d.norm(&diff));
            }
        }
    }

    let preconditions = compatibility_residual < TOL && expectations_valid && faithful.iter().all(|&f| f);
    let verdict = if !preconditions || !(d_over_c.passes && c_over_b.passes) {
        Verdict::HypothesisFails
    } else if d_over_b.passes && chained_deviation < TOL {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(TransitivityReport {
        compatibility_residual,
        expectations_valid,
        faithful,
        d_over_c,
        c_over_b,
        d_over_b,
        chained_deviation,
        verdict,
    })
}

/// Lifts a series over a subalgebra `S` of `D` along `F: D → S`:
/// `κ_D(d_1, …) = κ_S(F(d_1), …)`.
pub(crate) fn lift_along(series: &CumulantSeries, f: &ConditionalExpectation) -> Result<CumulantSeries> {
    if !series.algebra().same_as(f.target()) {
        return Err(Error::dims("series is not over the target of the expectation"));
    }
    let incl = f.inclusion()?;
    let f_cols = columns(f.matrix());
    let big = f.source().clone();
    let mut failure = None;
    let out = CumulantSeries::from_fn(big.clone(), series.n_vars(), series.order_cap(), |idx, basis| {
        let args: Vec<&[C64]> = basis.iter().map(|&a| f_cols[a].as_slice()).collect();
        match series.apply(idx, &args) {
            Ok(v) => mat_vec(incl, &v),
            Err(e) => {
                failure.get_or_insert(e);
                vec![ZERO; big.dim()]
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

impl ChainContext {
    /// Cumulants over `D` of variables free from `D` over `B` with the given
    /// `B`-valued data.
    pub fn lift_from_bottom(&self, series: &CumulantSeries) -> Result<CumulantSeries> {
        lift_along(series, &self.f_db)
    }

    /// Cumulants over `D` of variables free from `D` over `C` with the given
    /// `C`-valued data.
    pub fn lift_from_middle(&self, series: &CumulantSeries) -> Result<CumulantSeries> {
        lift_along(series, &self.f_dc)
    }
}
