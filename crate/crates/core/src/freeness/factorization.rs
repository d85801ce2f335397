use serde::Serialize;

use super::{columns, sub};
use crate::algebra::{mat_vec, AlgebraContext, ConditionalExpectation, C64, TOL};
use crate::error::{Error, Result};
use crate::series::{check_order, CumulantSeries};
use crate::transform::max_residual_on;

#[derive(Clone, Debug, Serialize)]
pub struct TupleDeviation {
    pub order: usize,
    /// 1-based variable indices.
    pub indices: Vec<usize>,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub tolerance: f64,
    pub max_deviation: f64,
    pub passes: bool,
    pub tuples: Vec<TupleDeviation>,
}

impl FactorizationReport {
    pub fn worst(&self) -> Option<&TupleDeviation> {
        self.tuples.iter().max_by(|a, b| a.deviation.total_cmp(&b.deviation))
    }
}

/// Compares `κ(X_{i_1} b_1, …)` with `F(κ(X_{i_1} F(b_1), …))` on every
/// basis tuple up to order `k_max`.
pub fn check_factorization(series: &CumulantSeries, f: &ConditionalExpectation, k_max: usize) -> Result<FactorizationReport> {
    check_order(k_max, series.order_cap())?;
    let alg = series.algebra();
    if !alg.same_as(f.source()) {
        return Err(Error::dims("series and expectation live over different algebras"));
    }
    let p = f.as_source_operator()?;
    let p_cols = columns(&p);
    let n = series.n_vars();
    let d = alg.dim();
    let mut tuples = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for k in 1..=k_max {
        for ti in 0..n.pow(k as u32) {
            let idx = crate::series::unlinear(ti, n, k);
            let mut worst: f64 = 0.0;
            for tb in 0..d.pow(k as u32 - 1) {
                let basis = crate::series::unlinear(tb, d, k - 1);
                let lhs = series.value(&idx, &basis);
                let args: Vec<&[C64]> = basis.iter().map(|&a| p_cols[a].as_slice()).collect();
                let rhs = mat_vec(&p, &series.apply(&idx, &args)?);
                worst = worst.max(alg.norm(&sub(lhs, &rhs)));
            }
            max_deviation = max_deviation.max(worst);
            tuples.push(TupleDeviation {
                order: k,
                indices: idx.iter().map(|i| i + 1).collect(),
                deviation: worst,
            });
        }
    }
    Ok(FactorizationReport {
        tolerance: TOL,
        max_deviation,
        passes: max_deviation < TOL,
        tuples,
    })
}

/// The restriction of a `B` series to `D` arguments, as a series over `D`.
/// Fails unless those values lie in `D`.
pub fn restrict_to_subalgebra(series: &CumulantSeries, f: &ConditionalExpectation) -> Result<CumulantSeries> {
    if !series.algebra().same_as(f.source()) {
        return Err(Error::dims("series and expectation live over different algebras"));
    }
    let incl = f.inclusion()?;
    let residual = max_residual_on(series, incl)?;
    if residual > TOL {
        return Err(Error::NotValuedIn(format!(
            "values on subalgebra arguments leave it (residual {residual:.3e})"
        )));
    }
    let cols = columns(incl);
    let mut failure = None;
    let out = CumulantSeries::from_fn(f.target().clone(), series.n_vars(), series.order_cap(), |idx, basis| {
        let args: Vec<&[C64]> = basis.iter().map(|&a| cols[a].as_slice()).collect();
        match series.apply(idx, &args) {
            Ok(v) => f.apply(&v),
            Err(e) => {
                failure.get_or_insert(e);
                f.target().zero()
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `κ_B(X_{i_1} b_1, …) = κ_D(X_{i_1} F(b_1), …)`: the cumulants of variables
/// free from `B` over `D` with the given `D`-valued distribution.
///
/// Accepts a series over `D`, or over `B` provided its restriction to `D`
/// arguments is `D`-valued (only that restriction is used).
pub fn lift_free_variables(series: &CumulantSeries, ctx: &AlgebraContext) -> Result<CumulantSeries> {
    let restricted;
    let d_series = if series.algebra().same_as(&ctx.d) {
        series
    } else if series.algebra().same_as(&ctx.b) {
        restricted = restrict_to_subalgebra(series, &ctx.f)?;
        &restricted
    } else {
        return Err(Error::dims("series is over neither B nor D"));
    };
    let f_cols = columns(ctx.f.matrix());
    let incl = ctx.d_in_b();
    let mut failure = None;
    let out = CumulantSeries::from_fn(ctx.b.clone(), d_series.n_vars(), d_series.order_cap(), |idx, basis| {
        let args: Vec<&[C64]> = basis.iter().map(|&a| f_cols[a].as_slice()).collect();
        match d_series.apply(idx, &args) {
            Ok(v) => mat_vec(incl, &v),
            Err(e) => {
                failure.get_or_insert(e);
                ctx.b.zero()
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
