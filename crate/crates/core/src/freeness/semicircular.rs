//! Scalar moments of an operator-valued semicircular element and the test of
//! whether they form a semicircle law.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::Verdict;
use crate::algebra::{mat_vec, AlgebraContext, CMatrix, Coords, C64, TOL};
use crate::error::{Error, Result};
use crate::partition::{catalan, enumerate_nc2, nesting_forest, NestingNode};

/// The data needed to evaluate `τ(X^{2m})` for a semicircular `X` with
/// covariance `η`: an algebra with unit, product, `η` and a scalar state.
pub trait SemicircularModel: Sync {
    type Elem: Clone + Send;

    fn one(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn eta(&self, a: &Self::Elem) -> Self::Elem;
    fn trace(&self, a: &Self::Elem) -> C64;
    /// Distance of `a` from `a*`.
    fn adjoint_residual(&self, a: &Self::Elem) -> f64;
    /// Largest entry of `a − c·1`.
    fn distance_to_scalar(&self, a: &Self::Elem, c: C64) -> f64;
}

fn eval_pair<M: SemicircularModel>(model: &M, node: &NestingNode) -> M::Elem {
    let inside = eval_roots(model, node.children.iter().map(|c| &c.node));
    model.eta(&inside)
}

fn eval_roots<'a, M: SemicircularModel>(model: &M, nodes: impl Iterator<Item = &'a NestingNode>) -> M::Elem {
    let mut acc = model.one();
    for n in nodes {
        acc = model.mul(&acc, &eval_pair(model, n));
    }
    acc
}

/// `[m_0, m_1, …, m_{k_max}]` with `m_{2m} = Σ_{π ∈ NC2(2m)} τ(π⟨η⟩(1))` and
/// vanishing odd moments.
pub fn semicircular_moments<M: SemicircularModel>(model: &M, k_max: usize) -> Result<Vec<C64>> {
    let mut out = vec![C64::new(0.0, 0.0); k_max + 1];
    out[0] = model.trace(&model.one());
    for k in (2..=k_max).step_by(2) {
        let mut total = C64::new(0.0, 0.0);
        for pi in enumerate_nc2(k)? {
            let forest = nesting_forest(&pi);
            total += model.trace(&eval_roots(model, forest.roots.iter()));
        }
        out[k] = total;
    }
    Ok(out)
}

/// `η` on `B` given by coordinate images, with `τ = (1/N) Tr ∘ F`.
pub struct ContextEta<'a> {
    ctx: &'a AlgebraContext,
    map: CMatrix,
}

impl<'a> ContextEta<'a> {
    /// `images[a]` is `η(e_a)` as an ambient matrix.
    pub fn from_images(ctx: &'a AlgebraContext, images: &[CMatrix]) -> Result<Self> {
        let d = ctx.b.dim();
        if images.len() != d {
            return Err(Error::dims(format!("{} images for a basis of {d}", images.len())));
        }
        let mut map = CMatrix::zeros(d, d);
        for (a, m) in images.iter().enumerate() {
            let c = ctx.b.coords(m)?;
            for (i, z) in c.into_iter().enumerate() {
                map[(i, a)] = z;
            }
        }
        Ok(Self { ctx, map })
    }

    pub fn from_coordinates(ctx: &'a AlgebraContext, map: CMatrix) -> Result<Self> {
        let d = ctx.b.dim();
        if map.nrows() != d || map.ncols() != d {
            return Err(Error::dims("η must be a square map on B coordinates"));
        }
        Ok(Self { ctx, map })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.map
    }
}

impl SemicircularModel for ContextEta<'_> {
    type Elem = Coords;

    fn one(&self) -> Coords {
        self.ctx.b.one().to_vec()
    }

    fn mul(&self, a: &Coords, b: &Coords) -> Coords {
        self.ctx.b.mul(a, b)
    }

    fn eta(&self, a: &Coords) -> Coords {
        mat_vec(&self.map, a)
    }

    fn trace(&self, a: &Coords) -> C64 {
        let f = self.ctx.d.to_matrix(&self.ctx.f.apply(a));
        f.trace() / f.nrows() as f64
    }

    fn adjoint_residual(&self, a: &Coords) -> f64 {
        let m = self.ctx.b.to_matrix(a);
        crate::algebra::max_abs(&(&m - m.adjoint()))
    }

    fn distance_to_scalar(&self, a: &Coords, c: C64) -> f64 {
        let diff: Coords = a.iter().zip(self.ctx.b.one()).map(|(x, o)| x - c * o).collect();
        self.ctx.b.norm(&diff)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Order4Identity {
    pub m4: f64,
    /// `τ(η(η(1))) + τ(η(1)²)`.
    pub identity: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SemicircularReport {
    /// `τ(η(b)) = τ(b η(1))` on the basis and `η(1)` self-adjoint.
    pub hypothesis_holds: bool,
    pub traciality_residual: f64,
    pub eta_one_scalar: bool,
    pub eta_one_residual: f64,
    /// `c = τ(η(1))`.
    pub variance: f64,
    /// Even moments `m_2, m_4, …`.
    pub moments: Vec<f64>,
    pub catalan_match: bool,
    pub catalan_deviation: f64,
    pub consistent: bool,
    pub order4: Order4Identity,
    /// `m_4 − 2 m_2²`.
    pub fourth_moment_gap: f64,
    pub verdict: Verdict,
}

/// Checks that `η(1) ∈ ℂ` holds exactly when the scalar moments are
/// `Catalan(m)·c^m`, together with the fourth-moment identity.
pub fn check_semicircular_characterization<M: SemicircularModel>(
    model: &M,
    basis: &[M::Elem],
    k_max: usize,
) -> Result<SemicircularReport> {
    let k_max = k_max.max(4);
    let one = model.one();
    let eta1 = model.eta(&one);
    let c = model.trace(&eta1);

    let mut traciality_residual: f64 = 0.0;
    for b in basis {
        let lhs = model.trace(&model.eta(b));
        let rhs = model.trace(&model.mul(b, &eta1));
        traciality_residual = traciality_residual.max((lhs - rhs).norm());
    }
    let eta_one_residual = model.distance_to_scalar(&eta1, c);
    let self_adjoint = model.adjoint_residual(&eta1) < TOL;
    let hypothesis_holds = traciality_residual < TOL && self_adjoint;

    let moments = semicircular_moments(model, k_max)?;
    let mut catalan_deviation: f64 = 0.0;
    for m in 1..=k_max / 2 {
        let want = catalan(m) as f64 * c.powu(m as u32);
        let got = moments[2 * m];
        catalan_deviation = catalan_deviation.max((got - want).norm() / want.norm().max(1.0));
    }
    let eta_one_scalar = eta_one_residual < TOL;
    let catalan_match = catalan_deviation < TOL;
    let consistent = eta_one_scalar == catalan_match;

    let identity = model.trace(&model.eta(&eta1)) + model.trace(&model.mul(&eta1, &eta1));
    let m2 = moments[2];
    let m4 = moments[4];
    let order4 = Order4Identity {
        m4: m4.re,
        identity: identity.re,
        deviation: (m4 - identity).norm(),
    };
    let verdict = if !hypothesis_holds {
        Verdict::HypothesisFails
    } else if consistent {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(SemicircularReport {
        hypothesis_holds,
        traciality_residual,
        eta_one_scalar,
        eta_one_residual,
        variance: c.re,
        moments: moments.iter().skip(2).step_by(2).map(|z| z.re).collect(),
        catalan_match,
        catalan_deviation,
        consistent,
        order4,
        fourth_moment_gap: (m4 - 2.0 * m2 * m2).re,
        verdict,
    })
}

/// A random tracial covariance on `B = diag(ℂ^k)` with the uniform trace:
/// `η(b)_x = (1/k) Σ_y S_{xy} b_y` for a symmetric non-negative `S`. With
/// `constant_rows` the rows of `S` share one sum, so `η(1)` is scalar.
pub fn random_tracial_eta<R: Rng>(k: usize, constant_rows: bool, rng: &mut R) -> CMatrix {
    let mut s = CMatrix::zeros(k, k);
    if constant_rows {
        for _ in 0..3 {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(rng);
            let w = rng.random_range(0.1..1.0);
            for (x, &y) in perm.iter().enumerate() {
                s[(x, y)] += C64::new(w, 0.0);
                s[(y, x)] += C64::new(w, 0.0);
            }
        }
    } else {
        for x in 0..k {
            for y in x..k {
                let v = C64::new(rng.random_range(0.0..2.0), 0.0);
                s[(x, y)] = v;
                s[(y, x)] = v;
            }
        }
    }
    s / C64::new(k as f64, 0.0)
}
