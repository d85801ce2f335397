use rand::Rng;
use serde::Serialize;

use super::{columns, ProjectedMoments, Verdict};
use crate::algebra::{coords_max_abs, mat_vec, AlgebraContext, Coords, C64, TOL};
use crate::error::{Error, Result};
use crate::series::{check_order, CumulantSeries};
use crate::transform::{cumulants_from_moments, max_residual_on};

use super::factorization::restrict_to_subalgebra;

#[derive(Clone, Debug, Serialize)]
pub struct RestrictionReport {
    pub hypothesis_holds: bool,
    pub hypothesis_residual: f64,
    /// Largest difference between the two computations, relative to the
    /// size of the values (absent when the hypothesis fails).
    pub max_deviation: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// If the `B` cumulants are `D`-valued on `D` arguments, the `D` cumulants of
/// the variables (under `F∘E`) are their restriction. The right side is
/// rebuilt independently: `B` moments from the cumulants, `F` applied, then
/// the inverse transform over `D`.
pub fn check_restriction_theorem(series_b: &CumulantSeries, ctx: &AlgebraContext, k_max: usize) -> Result<RestrictionReport> {
    check_order(k_max, series_b.order_cap())?;
    if !series_b.algebra().same_as(&ctx.b) {
        return Err(Error::dims("series is not over B"));
    }
    let series = series_b.truncated(k_max)?;
    let residual = max_residual_on(&series, ctx.d_in_b())?;
    if residual > TOL {
        return Ok(RestrictionReport {
            hypothesis_holds: false,
            hypothesis_residual: residual,
            max_deviation: None,
            tolerance: TOL,
            verdict: Verdict::HypothesisFails,
        });
    }
    let restricted = restrict_to_subalgebra(&series, &ctx.f)?;
    let moments = ProjectedMoments::new(&series, &ctx.f)?;
    let direct = cumulants_from_moments(&moments, k_max)?;
    let scale = (1..=k_max)
        .map(|k| coords_max_abs(restricted.order_data(k)))
        .fold(1.0_f64, f64::max);
    let deviation = direct.max_abs_diff(&restricted)? / scale;
    Ok(RestrictionReport {
        hypothesis_holds: true,
        hypothesis_residual: residual,
        max_deviation: Some(deviation),
        tolerance: TOL,
        verdict: if deviation < TOL { Verdict::Pass } else { Verdict::Fail },
    })
}

/// A random `B`-valued series whose restriction to `D` arguments is
/// `D`-valued: `κ(b_1, …) = F(G(b_1, …)) + R(b_1 − F(b_1), b_2, …)` with
/// `κ_1 ∈ D` and `G`, `R` random multilinear maps.
pub fn random_restriction_series<R: Rng>(ctx: &AlgebraContext, n_vars: usize, order_cap: usize, rng: &mut R) -> Result<CumulantSeries> {
    let alg = &ctx.b;
    let d = alg.dim();
    let p = ctx.f_operator();
    let draw = |rng: &mut R| -> Coords {
        (0..d)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    };
    let g = CumulantSeries::from_fn(alg.clone(), n_vars, order_cap, |_, _| draw(rng))?;
    let r = CumulantSeries::from_fn(alg.clone(), n_vars, order_cap, |_, _| draw(rng))?;
    let p_cols = columns(&p);
    CumulantSeries::from_fn(alg.clone(), n_vars, order_cap, |idx, basis| {
        let mut v = mat_vec(&p, g.value(idx, basis));
        if let Some((&a0, rest)) = basis.split_first() {
            // e_{a0} − F(e_{a0}) expanded in the basis
            for (c, (&pc, e)) in p_cols[a0].iter().zip(alg.unit(a0).iter()).enumerate() {
                let w = e - pc;
                if w.norm() == 0.0 {
                    continue;
                }
                let mut b = vec![c];
                b.extend_from_slice(rest);
                for (x, y) in v.iter_mut().zip(r.value(idx, &b)) {
                    *x += w * y;
                }
            }
        }
        v
    })
}
