//! `B`-valued moment and cumulant series.
//!
//! A series of order cap `K` over `n` variables stores, for every order
//! `k ≤ K`, every index tuple `(i_1..i_k)` and every tuple of basis indices
//! `(a_1..a_{k-1})`, the value `⟨X_{i_1} e_{a_1}, …, X_{i_{k-1}} e_{a_{k-1}}, X_{i_k}⟩`
//! as coordinates in the same basis. Values on general coefficients follow by
//! multilinearity, a trailing coefficient multiplies on the right and a
//! leading one on the left.
//!
//! Variable indices are 0-based in the API and 1-based in files and output.

use std::marker::PhantomData;
use std::sync::Arc;

use crate::algebra::{AlgebraContext, CMatrix, Coords, MatrixAlgebra, C64, ZERO};
use crate::error::{Error, Result};

/// Hard ceiling on stored orders.
pub const MAX_ORDER: usize = 8;
/// Default order cap.
pub const DEFAULT_ORDER: usize = 6;

pub trait SeriesKind: Send + Sync + 'static {
    const NAME: &'static str;
}

#[derive(Clone, Copy, Debug)]
pub struct Moment;
#[derive(Clone, Copy, Debug)]
pub struct Cumulant;

impl SeriesKind for Moment {
    const NAME: &'static str = "moment";
}
impl SeriesKind for Cumulant {
    const NAME: &'static str = "cumulant";
}

#[derive(Debug)]
pub struct Series<K> {
    algebra: Arc<MatrixAlgebra>,
    n_vars: usize,
    order_cap: usize,
    /// `data[k - 1]`: `n^k · d^(k-1)` values of `d` coordinates each.
    data: Vec<Vec<C64>>,
    _kind: PhantomData<K>,
}

impl<K> Clone for Series<K> {
    fn clone(&self) -> Self {
        Self {
            algebra: self.algebra.clone(),
            n_vars: self.n_vars,
            order_cap: self.order_cap,
            data: self.data.clone(),
            _kind: PhantomData,
        }
    }
}

pub type MomentSeries = Series<Moment>;
pub type CumulantSeries = Series<Cumulant>;

pub(crate) fn check_order(k: usize, cap: usize) -> Result<()> {
    if k == 0 || k > cap {
        return Err(Error::OrderCap { requested: k, cap });
    }
    Ok(())
}

/// Mixed-radix helpers for index and basis tuples.
pub(crate) fn linear(tuple: &[usize], radix: usize) -> usize {
    tuple.iter().fold(0, |acc, &x| acc * radix + x)
}

pub(crate) fn unlinear(mut t: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = t % radix;
        t /= radix;
    }
    out
}

impl<K: SeriesKind> Series<K> {
    pub fn zeros(algebra: Arc<MatrixAlgebra>, n_vars: usize, order_cap: usize) -> Result<Self> {
        if order_cap > MAX_ORDER {
            return Err(Error::OrderCap {
                requested: order_cap,
                cap: MAX_ORDER,
            });
        }
        if n_vars == 0 {
            return Err(Error::config("a series needs at least one variable"));
        }
        let d = algebra.dim();
        let data = (1..=order_cap)
            .map(|k| vec![ZERO; n_vars.pow(k as u32) * d.pow(k as u32)])
            .collect();
        Ok(Self {
            algebra,
            n_vars,
            order_cap,
            data,
            _kind: PhantomData,
        })
    }

    /// Tabulates `f(indices, basis) -> coordinates` on every stored tuple.
    pub fn from_fn(
        algebra: Arc<MatrixAlgebra>,
        n_vars: usize,
        order_cap: usize,
        mut f: impl FnMut(&[usize], &[usize]) -> Coords,
    ) -> Result<Self> {
        let mut s = Self::zeros(algebra, n_vars, order_cap)?;
        for k in 1..=order_cap {
            let tuples: Vec<_> = s.tuples(k).collect();
            for (idx, basis) in tuples {
                let v = f(&idx, &basis);
                s.value_mut(&idx, &basis).copy_from_slice(&v);
            }
        }
        Ok(s)
    }

    pub fn algebra(&self) -> &Arc<MatrixAlgebra> {
        &self.algebra
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn order_cap(&self) -> usize {
        self.order_cap
    }

    pub fn kind(&self) -> &'static str {
        K::NAME
    }

    /// Number of `(index tuple, basis tuple)` entries at order `k`.
    pub fn entries_at(&self, k: usize) -> usize {
        self.n_vars.pow(k as u32) * self.algebra.dim().pow(k as u32 - 1)
    }

    /// All `(index tuple, basis tuple)` pairs at order `k`, in storage order.
    pub fn tuples(&self, k: usize) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> + '_ {
        let d = self.algebra.dim();
        let per = d.pow(k as u32 - 1);
        (0..self.entries_at(k)).map(move |t| {
            (
                unlinear(t / per, self.n_vars, k),
                unlinear(t % per, d, k - 1),
            )
        })
    }

    fn offset(&self, indices: &[usize], basis: &[usize]) -> usize {
        let d = self.algebra.dim();
        let k = indices.len();
        debug_assert_eq!(basis.len() + 1, k);
        (linear(indices, self.n_vars) * d.pow(k as u32 - 1) + linear(basis, d)) * d
    }

    pub fn value(&self, indices: &[usize], basis: &[usize]) -> &[C64] {
        let d = self.algebra.dim();
        let o = self.offset(indices, basis);
        &self.data[indices.len() - 1][o..o + d]
    }

    pub fn value_mut(&mut self, indices: &[usize], basis: &[usize]) -> &mut [C64] {
        let d = self.algebra.dim();
        let o = self.offset(indices, basis);
        &mut self.data[indices.len() - 1][o..o + d]
    }

    /// Raw storage for one order, `n^k · d^(k-1) · d` coordinates.
    pub fn order_data(&self, k: usize) -> &[C64] {
        &self.data[k - 1]
    }

    pub(crate) fn set_order_data(&mut self, k: usize, data: Vec<C64>) {
        assert_eq!(data.len(), self.data[k - 1].len());
        self.data[k - 1] = data;
    }

    /// Multilinear evaluation on general coefficients:
    /// `Σ_{a} c_1[a_1] ⋯ c_{k-1}[a_{k-1}] · value(indices, a)`.
    pub fn apply(&self, indices: &[usize], coeffs: &[&[C64]]) -> Result<Coords> {
        let k = indices.len();
        check_order(k, self.order_cap)?;
        if coeffs.len() + 1 != k {
            return Err(Error::dims(format!("{} coefficients for order {k}", coeffs.len())));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= self.n_vars) {
            return Err(Error::dims(format!("variable {} of {}", i + 1, self.n_vars)));
        }
        let d = self.algebra.dim();
        let data = &self.data[k - 1];
        let base = linear(indices, self.n_vars) * d.pow(k as u32 - 1);
        let mut out = vec![ZERO; d];
        contract(data, d, base, 0, coeffs, 0, crate::algebra::ONE, &mut out);
        Ok(out)
    }

    /// Largest difference, as a matrix entry, over all stored values.
    pub fn max_abs_diff(&self, other: &Series<K>) -> Result<f64> {
        if self.n_vars != other.n_vars || !self.algebra.same_as(&other.algebra) {
            return Err(Error::dims("series over different algebras or variable counts"));
        }
        let cap = self.order_cap.min(other.order_cap);
        let d = self.algebra.dim();
        let mut worst: f64 = 0.0;
        for k in 1..=cap {
            for (a, b) in self.data[k - 1].chunks(d).zip(other.data[k - 1].chunks(d)) {
                let diff: Coords = a.iter().zip(b).map(|(x, y)| x - y).collect();
                worst = worst.max(self.algebra.norm(&diff));
            }
        }
        Ok(worst)
    }

    /// Same data with a lower order cap.
    pub fn truncated(&self, cap: usize) -> Result<Self> {
        check_order(cap, self.order_cap)?;
        Ok(Self {
            algebra: self.algebra.clone(),
            n_vars: self.n_vars,
            order_cap: cap,
            data: self.data[..cap].to_vec(),
            _kind: PhantomData,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn contract(data: &[C64], d: usize, base: usize, lin: usize, coeffs: &[&[C64]], slot: usize, w: C64, out: &mut [C64]) {
    if slot == coeffs.len() {
        let o = (base + lin) * d;
        let v = &data[o..o + d];
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
        return;
    }
    for (a, c) in coeffs[slot].iter().enumerate() {
        if *c != ZERO {
            contract(data, d, base, lin * d + a, coeffs, slot + 1, w * c, out);
        }
    }
}

/// A family of `B`-balanced multilinear maps, viewed through its values
/// `f(X_{i_1} c_1, …, X_{i_{k-1}} c_{k-1}, X_{i_k})` (trailing coefficient 1).
pub trait MultiplicativeMap: Sync {
    fn algebra(&self) -> &Arc<MatrixAlgebra>;
    fn n_vars(&self) -> usize;
    fn max_order(&self) -> usize;
    fn eval(&self, indices: &[usize], coeffs: &[&[C64]]) -> Result<Coords>;
}

impl<K: SeriesKind> MultiplicativeMap for Series<K> {
    fn algebra(&self) -> &Arc<MatrixAlgebra> {
        &self.algebra
    }

    fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn max_order(&self) -> usize {
        self.order_cap
    }

    fn eval(&self, indices: &[usize], coeffs: &[&[C64]]) -> Result<Coords> {
        self.apply(indices, coeffs)
    }
}

/// One argument `X_{var} · right` of a multiplicative map.
#[derive(Clone, Debug, PartialEq)]
pub struct Argument {
    pub var: usize,
    pub right: Coords,
}

impl Argument {
    pub fn new(var: usize, right: Coords) -> Self {
        Self { var, right }
    }
}

/// Concrete random variables: matrices in `M` over a context.
#[derive(Clone, Debug)]
pub struct VariableTuple {
    pub context: Arc<AlgebraContext>,
    pub representatives: Vec<CMatrix>,
}

impl VariableTuple {
    pub fn new(context: Arc<AlgebraContext>, representatives: Vec<CMatrix>) -> Result<Self> {
        let n = context.m.ambient_dim();
        if representatives.is_empty() {
            return Err(Error::config("no variables"));
        }
        if representatives.iter().any(|x| x.nrows() != n || x.ncols() != n) {
            return Err(Error::dims(format!("variables must be {n}x{n}")));
        }
        Ok(Self {
            context,
            representatives,
        })
    }

    /// `E(left · X_{i_1} b_1 ⋯ X_{i_k} b_k)` by direct multiplication.
    pub fn moment(&self, args: &[Argument], left: &[C64]) -> Result<Coords> {
        if args.is_empty() {
            return Err(Error::config("moment of an empty word"));
        }
        let b = &self.context.b;
        if left.len() != b.dim() || args.iter().any(|a| a.right.len() != b.dim()) {
            return Err(Error::dims("coefficients must be B coordinates"));
        }
        let mut w = b.to_matrix(left);
        for a in args {
            let x = self
                .representatives
                .get(a.var)
                .ok_or_else(|| Error::dims(format!("variable {} of {}", a.var + 1, self.representatives.len())))?;
            w = w * x * b.to_matrix(&a.right);
        }
        let (c, _) = self.context.m.project(&w);
        Ok(self.context.e.apply(&c))
    }

    /// Moment series on basis tuples up to `order_cap`.
    pub fn moment_series(&self, order_cap: usize) -> Result<MomentSeries> {
        let b = self.context.b.clone();
        let one = b.one().to_vec();
        MomentSeries::from_fn(b.clone(), self.representatives.len(), order_cap, |idx, basis| {
            let args: Vec<Argument> = idx
                .iter()
                .enumerate()
                .map(|(j, &i)| Argument::new(i, basis.get(j).map(|&a| b.unit(a)).unwrap_or_else(|| b.one().to_vec())))
                .collect();
            self.moment(&args, &one).expect("shapes checked")
        })
    }
}

impl MultiplicativeMap for VariableTuple {
    fn algebra(&self) -> &Arc<MatrixAlgebra> {
        &self.context.b
    }

    fn n_vars(&self) -> usize {
        self.representatives.len()
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn eval(&self, indices: &[usize], coeffs: &[&[C64]]) -> Result<Coords> {
        let b = &self.context.b;
        let args: Vec<Argument> = indices
            .iter()
            .enumerate()
            .map(|(j, &i)| Argument::new(i, coeffs.get(j).map(|c| c.to_vec()).unwrap_or_else(|| b.one().to_vec())))
            .collect();
        self.moment(&args, b.one())
    }
}
