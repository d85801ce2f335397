//! Executable forms of the freeness-with-amalgamation criteria.
//!
//! Throughout, `F: B → D` is a conditional expectation and cumulant series
//! are stored over `B` unless stated otherwise.

mod factorization;
mod oracle;
mod restriction;
mod semicircular;
mod transitivity;

pub use factorization::{check_factorization, lift_free_variables, restrict_to_subalgebra, FactorizationReport, TupleDeviation};
pub use oracle::{freeness_oracle, kernel_basis, FreenessReport, OracleConfig, WordValue, FAIL_THRESHOLD, PASS_TOLERANCE};
pub use restriction::{check_restriction_theorem, random_restriction_series, RestrictionReport};
pub use semicircular::{
    check_semicircular_characterization, random_tracial_eta, semicircular_moments, ContextEta, Order4Identity,
    SemicircularModel, SemicircularReport,
};
pub use transitivity::{check_transitivity, ChainContext, TransitivityReport};

use std::sync::Arc;

use serde::Serialize;

use crate::algebra::{mat_vec, CMatrix, ConditionalExpectation, Coords, MatrixAlgebra, C64};
use crate::error::{Error, Result};
use crate::partition::enumerate_nc;
use crate::series::{Argument, CumulantSeries, MultiplicativeMap};
use crate::transform::Bracketing;

/// Three-way outcome shared by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    HypothesisFails,
}

impl Verdict {
    /// Process exit code: 0 pass, 1 fail, 2 inconclusive or unmet hypothesis.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive | Verdict::HypothesisFails => 2,
        }
    }
}

/// Moments of the variables described by a cumulant series over a large
/// algebra, pushed down to a subalgebra: `F(Σ_π π⟨X_{i_1} d_1, …⟩_κ)` for
/// subalgebra coefficients `d_j`.
pub struct ProjectedMoments<'a> {
    cumulants: &'a CumulantSeries,
    f: &'a ConditionalExpectation,
    inclusion: CMatrix,
    brackets: Vec<Vec<Bracketing>>,
}

impl<'a> ProjectedMoments<'a> {
    pub fn new(cumulants: &'a CumulantSeries, f: &'a ConditionalExpectation) -> Result<Self> {
        if !cumulants.algebra().same_as(f.source()) {
            return Err(Error::dims("cumulants and expectation live over different algebras"));
        }
        let inclusion = f.inclusion()?.clone();
        let brackets = (1..=cumulants.order_cap())
            .map(|k| Ok(enumerate_nc(k)?.into_iter().map(Bracketing::new).collect()))
            .collect::<Result<_>>()?;
        Ok(Self {
            cumulants,
            f,
            inclusion,
            brackets,
        })
    }
}

impl MultiplicativeMap for ProjectedMoments<'_> {
    fn algebra(&self) -> &Arc<MatrixAlgebra> {
        self.f.target()
    }

    fn n_vars(&self) -> usize {
        self.cumulants.n_vars()
    }

    fn max_order(&self) -> usize {
        self.cumulants.order_cap()
    }

    fn eval(&self, indices: &[usize], coeffs: &[&[C64]]) -> Result<Coords> {
        let big = self.cumulants.algebra();
        let args: Vec<Argument> = indices
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let right = match coeffs.get(j) {
                    Some(c) => mat_vec(&self.inclusion, c),
                    None => big.one().to_vec(),
                };
                Argument::new(i, right)
            })
            .collect();
        let mut total = big.zero();
        for pi in &self.brackets[indices.len() - 1] {
            for (t, v) in total.iter_mut().zip(pi.evaluate(&args, self.cumulants)?) {
                *t += v;
            }
        }
        Ok(self.f.apply(&total))
    }
}

pub(crate) fn sub(a: &[C64], b: &[C64]) -> Coords {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn columns(m: &CMatrix) -> Vec<Coords> {
    (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect()
}
