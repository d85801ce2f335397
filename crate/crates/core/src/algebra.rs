//! Concrete matrix models of an inclusion `D ⊂ B ⊂ M` with conditional
//! expectations `E: M → B` and `F: B → D`.
//!
//! Every algebra is a span of explicit `N × N` complex matrices. Elements are
//! carried around as coordinate vectors in that basis; multiplication goes
//! through precomputed (sparse) structure constants so the cumulant kernels
//! never touch full matrices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
/// Coordinates of an element in the basis of some [`MatrixAlgebra`].
pub type Coords = Vec<C64>;

/// Absolute tolerance on matrix entries for every structural check.
pub const TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn coords_max_abs(c: &[C64]) -> f64 {
    c.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[derive(Debug)]
pub struct MatrixAlgebra {
    name: String,
    ambient_dim: usize,
    basis: Vec<CMatrix>,
    /// `coords(m)_a = <dual_a, m>` (Hilbert-Schmidt pairing).
    dual: Vec<CMatrix>,
    /// Structure constants: `e_a e_b = Σ_c products[a*d + b][c]`.
    products: Vec<Vec<(usize, C64)>>,
    one: Coords,
    full: bool,
}

fn hs(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

impl MatrixAlgebra {
    /// Span of `basis`. Fails unless the basis is independent, contains the
    /// identity in its span and is closed under multiplication.
    pub fn new(name: impl Into<String>, basis: Vec<CMatrix>) -> Result<Self> {
        let name = name.into();
        let ambient_dim = basis
            .first()
            .map(|b| b.nrows())
            .ok_or_else(|| Error::config(format!("{name}: empty basis")))?;
        if basis
            .iter()
            .any(|b| b.nrows() != ambient_dim || b.ncols() != ambient_dim)
        {
            return Err(Error::dims(format!("{name}: basis matrices differ in shape")));
        }
        let d = basis.len();
        let gram = CMatrix::from_fn(d, d, |a, b| hs(&basis[a], &basis[b]));
        let svd = gram.clone().svd(false, false);
        let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        if smin <= 1e-12 * smax.max(1.0) {
            return Err(Error::config(format!("{name}: basis is linearly dependent")));
        }
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Numeric(format!("{name}: singular Gram matrix")))?;
        // dual_a = Σ_b conj(Ginv_ab) e_b  so that <dual_a, e_c> = δ_ac
        let dual: Vec<CMatrix> = (0..d)
            .map(|a| {
                let mut m = CMatrix::zeros(ambient_dim, ambient_dim);
                for (b, e) in basis.iter().enumerate() {
                    m += e * gram_inv[(a, b)].conj();
                }
                m
            })
            .collect();
        let mut alg = Self {
            name,
            ambient_dim,
            basis,
            dual,
            products: Vec::new(),
            one: Vec::new(),
            full: false,
        };
        alg.one = alg.coords(&CMatrix::identity(ambient_dim, ambient_dim))?;
        let mut products = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let prod = &alg.basis[a] * &alg.basis[b];
                let c = alg.coords(&prod).map_err(|_| {
                    Error::config(format!("{}: not closed under multiplication", alg.name))
                })?;
                products.push(sparse(&c));
            }
        }
        alg.products = products;
        Ok(alg)
    }

    /// All `n × n` matrices, basis of matrix units `E_ij` in row-major order.
    pub fn full(n: usize) -> Self {
        let unit = |i: usize, j: usize| {
            let mut m = CMatrix::zeros(n, n);
            m[(i, j)] = ONE;
            m
        };
        let basis: Vec<CMatrix> = (0..n * n).map(|k| unit(k / n, k % n)).collect();
        let mut products = Vec::with_capacity(n.pow(4));
        for a in 0..n * n {
            for b in 0..n * n {
                let (i, j) = (a / n, a % n);
                let (k, l) = (b / n, b % n);
                products.push(if j == k { vec![(i * n + l, ONE)] } else { vec![] });
            }
        }
        let one = (0..n * n)
            .map(|k| if k / n == k % n { ONE } else { ZERO })
            .collect();
        Self {
            name: "M".into(),
            ambient_dim: n,
            dual: basis.clone(),
            basis,
            products,
            one,
            full: true,
        }
    }

    /// Block-diagonal subalgebra `⊕ M_{s_i}` with matrix-unit basis, block by block.
    pub fn block_diagonal(name: impl Into<String>, sizes: &[usize]) -> Result<Self> {
        let n: usize = sizes.iter().sum();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::config("block sizes must be positive"));
        }
        let mut basis = Vec::new();
        let mut off = 0;
        for &s in sizes {
            for i in 0..s {
                for j in 0..s {
                    let mut m = CMatrix::zeros(n, n);
                    m[(off + i, off + j)] = ONE;
                    basis.push(m);
                }
            }
            off += s;
        }
        Self::new(name, basis)
    }

    /// Span of the orthogonal projections onto the given groups of coordinates.
    pub fn grouped_diagonal(name: impl Into<String>, n: usize, groups: &[Vec<usize>]) -> Result<Self> {
        let basis = groups
            .iter()
            .map(|g| {
                let mut m = CMatrix::zeros(n, n);
                for &i in g {
                    if i >= n {
                        return Err(Error::config(format!("index {i} outside ambient dimension {n}")));
                    }
                    m[(i, i)] = ONE;
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, basis)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn one(&self) -> &[C64] {
        &self.one
    }

    pub fn zero(&self) -> Coords {
        vec![ZERO; self.dim()]
    }

    pub fn unit(&self, a: usize) -> Coords {
        let mut c = self.zero();
        c[a] = ONE;
        c
    }

    /// Least-squares coordinates and the max-entry residual.
    pub fn project(&self, m: &CMatrix) -> (Coords, f64) {
        let c: Coords = if self.full {
            m.transpose().iter().copied().collect()
        } else {
            self.dual.iter().map(|d| hs(d, m)).collect()
        };
        let back = self.to_matrix(&c);
        (c, max_abs(&(back - m)))
    }

    pub fn coords(&self, m: &CMatrix) -> Result<Coords> {
        if m.nrows() != self.ambient_dim || m.ncols() != self.ambient_dim {
            return Err(Error::dims(format!(
                "{}x{} matrix for ambient dimension {}",
                m.nrows(),
                m.ncols(),
                self.ambient_dim
            )));
        }
        let (c, res) = self.project(m);
        if res > TOL * m.iter().fold(1.0f64, |a, z| a.max(z.norm())) {
            return Err(Error::NotInSpan("algebra", res));
        }
        Ok(c)
    }

    pub fn contains(&self, m: &CMatrix) -> bool {
        self.coords(m).is_ok()
    }

    pub fn to_matrix(&self, c: &[C64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (z, e) in c.iter().zip(&self.basis) {
            if *z != ZERO {
                m += e * *z;
            }
        }
        m
    }

    pub fn mul(&self, x: &[C64], y: &[C64]) -> Coords {
        let d = self.dim();
        let mut out = vec![ZERO; d];
        for (a, xa) in x.iter().enumerate() {
            if *xa == ZERO {
                continue;
            }
            for (b, yb) in y.iter().enumerate() {
                if *yb == ZERO {
                    continue;
                }
                let w = xa * yb;
                for &(c, v) in &self.products[a * d + b] {
                    out[c] += w * v;
                }
            }
        }
        out
    }

    pub fn mul3(&self, x: &[C64], y: &[C64], z: &[C64]) -> Coords {
        self.mul(&self.mul(x, y), z)
    }

    /// Size of an element as the largest entry of its matrix.
    pub fn norm(&self, c: &[C64]) -> f64 {
        max_abs(&self.to_matrix(c))
    }

    /// Coordinates of `self`'s basis inside `sup`, as a `sup.dim() × self.dim()` matrix.
    pub fn inclusion_into(&self, sup: &MatrixAlgebra) -> Result<CMatrix> {
        if self.ambient_dim != sup.ambient_dim {
            return Err(Error::dims("inclusion between different ambient dimensions"));
        }
        let mut m = CMatrix::zeros(sup.dim(), self.dim());
        for (a, e) in self.basis.iter().enumerate() {
            let c = sup.coords(e).map_err(|_| {
                Error::config(format!("{} is not contained in {}", self.name, sup.name))
            })?;
            for (i, z) in c.into_iter().enumerate() {
                m[(i, a)] = z;
            }
        }
        Ok(m)
    }

    pub fn same_as(&self, other: &MatrixAlgebra) -> bool {
        std::ptr::eq(self, other)
            || (self.dim() == other.dim()
                && self.ambient_dim == other.ambient_dim
                && self
                    .basis
                    .iter()
                    .zip(&other.basis)
                    .all(|(a, b)| max_abs(&(a - b)) < TOL))
    }
}

fn sparse(c: &[C64]) -> Vec<(usize, C64)> {
    c.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-14)
        .map(|(i, z)| (i, *z))
        .collect()
}

pub(crate) fn mat_vec(m: &CMatrix, x: &[C64]) -> Coords {
    (m * DVector::from_column_slice(x)).iter().copied().collect()
}

/// A linear map from `source` onto `target ⊆ source`, stored by the target
/// coordinates of the images of the source basis.
#[derive(Clone, Debug)]
pub struct ConditionalExpectation {
    source: Arc<MatrixAlgebra>,
    target: Arc<MatrixAlgebra>,
    map: CMatrix,
    range_residual: f64,
    /// `target → source` coordinate inclusion (None when target ⊄ source).
    inclusion: Option<CMatrix>,
}

impl ConditionalExpectation {
    /// Tabulates `f` on the source basis. Images are projected onto the
    /// target; the largest projection residual is kept for the report.
    pub fn from_fn(
        source: Arc<MatrixAlgebra>,
        target: Arc<MatrixAlgebra>,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        if source.ambient_dim() != target.ambient_dim() {
            return Err(Error::dims("source and target live in different ambient dimensions"));
        }
        let mut map = CMatrix::zeros(target.dim(), source.dim());
        let mut range_residual: f64 = 0.0;
        for (a, e) in source.basis().iter().enumerate() {
            let (c, res) = target.project(&f(e));
            range_residual = range_residual.max(res);
            for (i, z) in c.into_iter().enumerate() {
                map[(i, a)] = z;
            }
        }
        let inclusion = target.inclusion_into(&source).ok();
        Ok(Self {
            source,
            target,
            map,
            range_residual,
            inclusion,
        })
    }

    /// Compression onto the diagonal blocks of `target` (the pinching).
    pub fn pinching(source: Arc<MatrixAlgebra>, target: Arc<MatrixAlgebra>, sizes: &[usize]) -> Result<Self> {
        let sizes = sizes.to_vec();
        Self::from_fn(source, target, move |m| {
            let mut out = CMatrix::zeros(m.nrows(), m.ncols());
            let mut off = 0;
            for &s in &sizes {
                for i in off..off + s {
                    for j in off..off + s {
                        out[(i, j)] = m[(i, j)];
                    }
                }
                off += s;
            }
            out
        })
    }

    /// `m ↦ Σ_g (Σ_{i∈g} w_i tr_i(m) / Σ_{i∈g} w_i) 1_g` where `tr_i` is the
    /// normalised trace of diagonal block `i` and `1_g` the projection onto the
    /// blocks of group `g`.
    pub fn weighted_block_trace(
        source: Arc<MatrixAlgebra>,
        target: Arc<MatrixAlgebra>,
        sizes: &[usize],
        groups: &[Vec<usize>],
        weights: &[f64],
    ) -> Result<Self> {
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let sizes = sizes.to_vec();
        let groups = groups.to_vec();
        let weights = weights.to_vec();
        Self::from_fn(source, target, move |m| {
            let mut out = CMatrix::zeros(m.nrows(), m.ncols());
            for g in &groups {
                let total: f64 = g.iter().map(|&i| weights[i]).sum();
                let mut val = ZERO;
                for &i in g {
                    let tr: C64 = (0..sizes[i]).map(|k| m[(offsets[i] + k, offsets[i] + k)]).sum();
                    val += tr * (weights[i] / sizes[i] as f64);
                }
                val /= total;
                for &i in g {
                    for k in 0..sizes[i] {
                        out[(offsets[i] + k, offsets[i] + k)] = val;
                    }
                }
            }
            out
        })
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &ConditionalExpectation) -> Result<Self> {
        if !inner.target.same_as(&self.source) {
            return Err(Error::dims("composition: inner target differs from outer source"));
        }
        let inclusion = self.target.inclusion_into(&inner.source).ok();
        Ok(Self {
            source: inner.source.clone(),
            target: self.target.clone(),
            map: &self.map * &inner.map,
            range_residual: self.range_residual.max(inner.range_residual),
            inclusion,
        })
    }

    pub fn source(&self) -> &Arc<MatrixAlgebra> {
        &self.source
    }

    pub fn target(&self) -> &Arc<MatrixAlgebra> {
        &self.target
    }

    /// `target.dim() × source.dim()` coordinate matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.map
    }

    pub fn range_residual(&self) -> f64 {
        self.range_residual
    }

    /// Source coordinates → target coordinates.
    pub fn apply(&self, x: &[C64]) -> Coords {
        mat_vec(&self.map, x)
    }

    pub fn apply_matrix(&self, m: &CMatrix) -> Result<CMatrix> {
        let c = self.source.coords(m)?;
        Ok(self.target.to_matrix(&self.apply(&c)))
    }

    /// `target → source` inclusion matrix.
    pub fn inclusion(&self) -> Result<&CMatrix> {
        self.inclusion
            .as_ref()
            .ok_or_else(|| Error::config("target is not a subalgebra of the source"))
    }

    /// The map viewed as an operator on source coordinates (`ι ∘ F`).
    pub fn as_source_operator(&self) -> Result<CMatrix> {
        Ok(self.inclusion()? * &self.map)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpectationReport {
    pub unitality: f64,
    pub idempotence: f64,
    pub range: f64,
    pub bimodule: f64,
    pub tolerance: f64,
    pub passes: bool,
}

pub fn check_conditional_expectation(e: &ConditionalExpectation) -> ExpectationReport {
    let src = e.source();
    let tgt = e.target();
    let unitality = tgt.norm(
        &e.apply(src.one())
            .iter()
            .zip(tgt.one())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let image = |m: &CMatrix| -> CMatrix {
        let (c, _) = src.project(m);
        tgt.to_matrix(&e.apply(&c))
    };
    let mut idempotence: f64 = 0.0;
    let mut bimodule: f64 = 0.0;
    let images: Vec<CMatrix> = src.basis().iter().map(image).collect();
    for im in &images {
        idempotence = idempotence.max(max_abs(&(image(im) - im)));
    }
    for b in tgt.basis() {
        for b2 in tgt.basis() {
            for (m, em) in src.basis().iter().zip(&images) {
                let lhs = image(&(b * m * b2));
                let rhs = b * em * b2;
                bimodule = bimodule.max(max_abs(&(lhs - rhs)));
            }
        }
    }
    let range = e.range_residual();
    let passes = [unitality, idempotence, range, bimodule].iter().all(|&v| v < TOL);
    ExpectationReport {
        unitality,
        idempotence,
        range,
        bimodule,
        tolerance: TOL,
        passes,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FaithfulnessReport {
    pub faithful: bool,
    pub smallest_singular_value: f64,
    /// Source coordinates of a non-zero `b1` with `F(b1 b2) = 0` for all `b2`.
    #[serde(serialize_with = "crate::io::ser_opt_coords")]
    pub witness: Option<Coords>,
}

/// Decides whether `F(b1 b2) = 0 ∀ b2` forces `b1 = 0`.
pub fn check_faithfulness(f: &ConditionalExpectation) -> FaithfulnessReport {
    let src = f.source();
    let (d, t) = (src.dim(), f.target().dim());
    // Row i: target coordinates of F(e_i e_j), stacked over j.
    let mut g = CMatrix::zeros(d, d * t);
    for i in 0..d {
        for j in 0..d {
            let v = f.apply(&src.mul(&src.unit(i), &src.unit(j)));
            for (k, z) in v.into_iter().enumerate() {
                g[(i, j * t + k)] = z;
            }
        }
    }
    let scale = max_abs(&g).max(1.0);
    let svd = g.svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let (mut kmin, mut smin) = (0, f64::INFINITY);
    for (k, &s) in sv.iter().enumerate() {
        if s < smin {
            smin = s;
            kmin = k;
        }
    }
    // G is d × d·t with t ≥ 1, so the thin SVD already has a square U.
    let faithful = smin > 1e-10 * scale;
    let witness = (!faithful).then(|| {
        let mut w: Coords = u.column(kmin).iter().map(|z| z.conj()).collect();
        let pivot = w
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        for z in &mut w {
            *z /= pivot;
        }
        w
    });
    FaithfulnessReport {
        faithful,
        smallest_singular_value: smin,
        witness,
    }
}

/// JSON description of a block-diagonal context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    pub ambient_dim: usize,
    /// Block sizes of `B` along the diagonal.
    pub b_blocks: Vec<usize>,
    /// Groups of `B`-block indices whose identities span `D`; absent means `D = ℂ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_groups: Option<Vec<Vec<usize>>>,
    /// One weight per `B` block (a probability vector); absent means the
    /// normalised trace, `w_i = s_i / N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// `M ⊃ B ⊃ D` with `E: M → B` and `F: B → D`.
#[derive(Clone, Debug)]
pub struct AlgebraContext {
    pub m: Arc<MatrixAlgebra>,
    pub b: Arc<MatrixAlgebra>,
    pub d: Arc<MatrixAlgebra>,
    pub e: ConditionalExpectation,
    pub f: ConditionalExpectation,
    spec: Option<ContextSpec>,
}

impl AlgebraContext {
    pub fn new(e: ConditionalExpectation, f: ConditionalExpectation) -> Result<Self> {
        if !e.target().same_as(f.source()) {
            return Err(Error::config("F must be defined on the range of E"));
        }
        e.inclusion()?;
        f.inclusion()?;
        Ok(Self {
            m: e.source().clone(),
            b: e.target().clone(),
            d: f.target().clone(),
            e,
            f,
            spec: None,
        })
    }

    pub fn from_spec(spec: &ContextSpec) -> Result<Self> {
        let n = spec.ambient_dim;
        let sizes = &spec.b_blocks;
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::config("b_blocks must be non-empty positive sizes"));
        }
        if sizes.iter().sum::<usize>() != n {
            return Err(Error::config(format!(
                "block sizes {sizes:?} do not sum to ambient dimension {n}"
            )));
        }
        if n > 12 {
            return Err(Error::SizeLimit {
                what: "ambient dimension",
                value: n,
                min: 1,
                max: 12,
            });
        }
        let groups = spec
            .d_groups
            .clone()
            .unwrap_or_else(|| vec![(0..sizes.len()).collect()]);
        let mut seen = vec![false; sizes.len()];
        for &i in groups.iter().flatten() {
            if i >= sizes.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::config(format!("d_groups: bad or repeated block index {i}")));
            }
        }
        if seen.iter().any(|s| !s) || groups.iter().any(Vec::is_empty) {
            return Err(Error::config("d_groups must partition the blocks of B"));
        }
        let weights = match &spec.weights {
            Some(w) => {
                if w.len() != sizes.len() {
                    return Err(Error::config("one weight per B block is required"));
                }
                if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::config("weights must be positive"));
                }
                if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::config("weights must sum to 1"));
                }
                w.clone()
            }
            None => sizes.iter().map(|&s| s as f64 / n as f64).collect(),
        };
        let m = Arc::new(MatrixAlgebra::full(n));
        let b = Arc::new(MatrixAlgebra::block_diagonal("B", sizes)?);
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let coord_groups: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| g.iter().flat_map(|&i| offsets[i]..offsets[i] + sizes[i]).collect())
            .collect();
        let d = Arc::new(MatrixAlgebra::grouped_diagonal("D", n, &coord_groups)?);
        let e = ConditionalExpectation::pinching(m, b.clone(), sizes)?;
        let f = ConditionalExpectation::weighted_block_trace(b, d, sizes, &groups, &weights)?;
        let mut ctx = Self::new(e, f)?;
        ctx.spec = Some(spec.clone());
        Ok(ctx)
    }

    pub fn spec(&self) -> Option<&ContextSpec> {
        self.spec.as_ref()
    }

    /// `F ∘ E : M → D`.
    pub fn trace_expectation(&self) -> Result<ConditionalExpectation> {
        self.f.compose(&self.e)
    }

    /// `M → D` built in one step from the spec, independent of the composition.
    pub fn direct_m_to_d(&self) -> Result<ConditionalExpectation> {
        let spec = self
            .spec
            .as_ref()
            .ok_or_else(|| Error::config("context was not built from a spec"))?;
        let sizes = &spec.b_blocks;
        let groups = spec
            .d_groups
            .clone()
            .unwrap_or_else(|| vec![(0..sizes.len()).collect()]);
        let weights = spec
            .weights
            .clone()
            .unwrap_or_else(|| sizes.iter().map(|&s| s as f64 / spec.ambient_dim as f64).collect());
        ConditionalExpectation::weighted_block_trace(self.m.clone(), self.d.clone(), sizes, &groups, &weights)
    }

    /// `F` as an operator on `B` coordinates.
    pub fn f_operator(&self) -> CMatrix {
        self.f.as_source_operator().expect("D ⊂ B checked at construction")
    }

    /// Coordinates (in `B`) of the basis of `D`, one column each.
    pub fn d_in_b(&self) -> &CMatrix {
        self.f.inclusion().expect("D ⊂ B checked at construction")
    }
}

/// `M_N ⊃` block-diagonal `B ⊃ ℂ`, with `F` the weighted normalised block trace.
pub fn make_block_diagonal_context(block_sizes: &[usize], weights: &[f64]) -> Result<AlgebraContext> {
    AlgebraContext::from_spec(&ContextSpec {
        ambient_dim: block_sizes.iter().sum(),
        b_blocks: block_sizes.to_vec(),
        d_groups: None,
        weights: Some(weights.to_vec()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContextReport {
    pub e: ExpectationReport,
    pub f: ExpectationReport,
    pub f_after_e: ExpectationReport,
    pub faithfulness: FaithfulnessReport,
    pub passes: bool,
}

pub fn check_context(ctx: &AlgebraContext) -> Result<ContextReport> {
    let e = check_conditional_expectation(&ctx.e);
    let f = check_conditional_expectation(&ctx.f);
    let f_after_e = check_conditional_expectation(&ctx.trace_expectation()?);
    let faithfulness = check_faithfulness(&ctx.f);
    let passes = e.passes && f.passes && f_after_e.passes && faithfulness.faithful;
    Ok(ContextReport {
        e,
        f,
        f_after_e,
        faithfulness,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| c64(x))))
    }

    fn m2(a: [f64; 4]) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &a.map(c64))
    }

    #[test]
    fn pinching_and_average() {
        let ctx = make_block_diagonal_context(&[1, 1], &[0.5, 0.5]).unwrap();
        let em = ctx.e.apply_matrix(&m2([1.0, 2.0, 3.0, 4.0])).unwrap();
        assert!(max_abs(&(em - diag(&[1.0, 4.0]))) < 1e-12);
        let fm = ctx.f.apply_matrix(&diag(&[1.0, 0.0])).unwrap();
        assert!(max_abs(&(fm - diag(&[0.5, 0.5]))) < 1e-12);
        let fm = ctx.f.apply_matrix(&diag(&[3.0, 7.0])).unwrap();
        assert!(max_abs(&(fm - diag(&[5.0, 5.0]))) < 1e-12);
    }

    #[test]
    fn context_checks_pass() {
        for (sizes, w) in [
            (vec![1, 1], vec![0.5, 0.5]),
            (vec![2, 1], vec![0.3, 0.7]),
            (vec![1, 2, 1], vec![0.2, 0.5, 0.3]),
        ] {
            let ctx = make_block_diagonal_context(&sizes, &w).unwrap();
            let report = check_context(&ctx).unwrap();
            assert!(report.passes, "{sizes:?}: {report:?}");
        }
    }

    #[test]
    fn upper_triangular_part_is_not_an_expectation() {
        let m = Arc::new(MatrixAlgebra::full(2));
        let upper = Arc::new(
            MatrixAlgebra::new(
                "T",
                vec![m2([1.0, 0.0, 0.0, 0.0]), m2([0.0, 1.0, 0.0, 0.0]), m2([0.0, 0.0, 0.0, 1.0])],
            )
            .unwrap(),
        );
        let e = ConditionalExpectation::from_fn(m, upper, |x| {
            let mut y = x.clone();
            y[(1, 0)] = ZERO;
            y
        })
        .unwrap();
        let r = check_conditional_expectation(&e);
        assert!(r.bimodule > 0.5, "{r:?}");
        assert!(!r.passes);
        assert!(r.unitality < TOL && r.idempotence < TOL && r.range < TOL);
    }

    #[test]
    fn normalised_trace_is_an_expectation() {
        let m = Arc::new(MatrixAlgebra::full(2));
        let scalars = Arc::new(MatrixAlgebra::new("C", vec![CMatrix::identity(2, 2)]).unwrap());
        let tr = ConditionalExpectation::from_fn(m, scalars, |x| {
            CMatrix::identity(2, 2) * (x.trace() / c64(2.0))
        })
        .unwrap();
        assert!(check_conditional_expectation(&tr).passes);
    }

    #[test]
    fn faithfulness_examples() {
        let ctx = make_block_diagonal_context(&[1, 1], &[0.5, 0.5]).unwrap();
        let r = check_faithfulness(&ctx.f);
        assert!(r.faithful && r.witness.is_none());

        // F(diag(x, y)) = x forgets the second coordinate.
        let b = ctx.b.clone();
        let scalars = ctx.d.clone();
        let forget = ConditionalExpectation::from_fn(b.clone(), scalars, |x| {
            CMatrix::identity(2, 2) * x[(0, 0)]
        })
        .unwrap();
        let r = check_faithfulness(&forget);
        assert!(!r.faithful);
        let w = b.to_matrix(r.witness.as_ref().unwrap());
        assert!(max_abs(&(w - diag(&[0.0, 1.0]))) < 1e-9);

        let id = ConditionalExpectation::from_fn(b.clone(), b, |x| x.clone()).unwrap();
        assert!(check_faithfulness(&id).faithful);
    }

    #[test]
    fn composed_matches_direct() {
        let spec = ContextSpec {
            ambient_dim: 4,
            b_blocks: vec![1, 2, 1],
            d_groups: Some(vec![vec![0, 2], vec![1]]),
            weights: Some(vec![0.25, 0.5, 0.25]),
        };
        let ctx = AlgebraContext::from_spec(&spec).unwrap();
        let composed = ctx.trace_expectation().unwrap();
        let direct = ctx.direct_m_to_d().unwrap();
        assert!(max_abs(&(composed.matrix() - direct.matrix())) < 1e-12);
        assert!(check_conditional_expectation(&composed).passes);
    }

    #[test]
    fn bad_specs() {
        assert!(make_block_diagonal_context(&[1, 1], &[0.5, 0.6]).is_err());
        assert!(make_block_diagonal_context(&[1, 1], &[1.0, 0.0]).is_err());
        assert!(make_block_diagonal_context(&[1, 1], &[1.0]).is_err());
        let spec = ContextSpec {
            ambient_dim: 3,
            b_blocks: vec![1, 1],
            d_groups: None,
            weights: None,
        };
        assert!(AlgebraContext::from_spec(&spec).is_err());
    }

    #[test]
    fn dependent_or_open_bases_are_rejected() {
        let a = m2([1.0, 0.0, 0.0, 0.0]);
        assert!(MatrixAlgebra::new("X", vec![a.clone(), a.clone() * c64(2.0)]).is_err());
        // span{1, E_12 + E_21} is closed; span{1, E_12} is closed too, span{E_11, E_12} lacks 1
        assert!(MatrixAlgebra::new("X", vec![a, m2([0.0, 1.0, 0.0, 0.0])]).is_err());
    }
}
