//! Bracketings over non-crossing partitions and the moment-cumulant transform.

use rayon::prelude::*;

use crate::algebra::{Coords, MatrixAlgebra, C64, CMatrix, TOL};
use crate::error::{Error, Result};
use crate::partition::{enumerate_nc, nesting_forest, NestingForest, NestingNode, NonCrossingPartition};
use crate::series::{
    check_order, unlinear, Argument, CumulantSeries, MomentSeries, MultiplicativeMap, Series, SeriesKind,
};

/// A partition together with its nesting forest, ready for evaluation.
#[derive(Clone, Debug)]
pub struct Bracketing {
    pub partition: NonCrossingPartition,
    pub forest: NestingForest,
}

impl Bracketing {
    pub fn new(partition: NonCrossingPartition) -> Self {
        let forest = nesting_forest(&partition);
        Self { partition, forest }
    }

    /// `π⟨m_1, …, m_n⟩`: roots multiply left to right, and the value of the
    /// blocks nested after the `p`-th element of a block right-multiplies that
    /// element's coefficient.
    pub fn evaluate(&self, args: &[Argument], f: &dyn MultiplicativeMap) -> Result<Coords> {
        if args.len() != self.partition.n() {
            return Err(Error::dims(format!(
                "{} arguments for a partition of {}",
                args.len(),
                self.partition.n()
            )));
        }
        let alg = f.algebra();
        let mut acc = alg.one().to_vec();
        for root in &self.forest.roots {
            let v = eval_node(root, args, f)?;
            acc = alg.mul(&acc, &v);
        }
        Ok(acc)
    }
}

fn eval_node(node: &NestingNode, args: &[Argument], f: &dyn MultiplicativeMap) -> Result<Coords> {
    let alg = f.algebra();
    let s = node.block.len();
    if s > f.max_order() {
        return Err(Error::OrderCap {
            requested: s,
            cap: f.max_order(),
        });
    }
    let mut coeffs: Vec<Coords> = node.block.iter().map(|&p| args[p - 1].right.clone()).collect();
    for child in &node.children {
        // A nested block always sits between two elements of its parent.
        assert!(
            child.after >= 1 && child.after < s,
            "nested block attached outside its parent"
        );
        let v = eval_node(&child.node, args, f)?;
        let slot = &mut coeffs[child.after - 1];
        *slot = alg.mul(slot, &v);
    }
    let indices: Vec<usize> = node.block.iter().map(|&p| args[p - 1].var).collect();
    let inner: Vec<&[C64]> = coeffs[..s - 1].iter().map(Vec::as_slice).collect();
    let v = f.eval(&indices, &inner)?;
    Ok(alg.mul(&v, &coeffs[s - 1]))
}

/// `π⟨args⟩_f`.
pub fn evaluate_bracketing(pi: &NonCrossingPartition, args: &[Argument], f: &dyn MultiplicativeMap) -> Result<Coords> {
    Bracketing::new(pi.clone()).evaluate(args, f)
}

/// `b_0 · f(X_{i_1} b_1, …, X_{i_k} b_k)` for a multiplicative map given on
/// trailing-one arguments.
pub fn apply_map(f: &dyn MultiplicativeMap, args: &[Argument], left: &[C64]) -> Result<Coords> {
    let alg = f.algebra();
    let k = args.len();
    let indices: Vec<usize> = args.iter().map(|a| a.var).collect();
    let inner: Vec<&[C64]> = args[..k - 1].iter().map(|a| a.right.as_slice()).collect();
    let v = f.eval(&indices, &inner)?;
    Ok(alg.mul3(left, &v, &args[k - 1].right))
}

/// Basis arguments for one stored tuple (trailing coefficient 1).
fn basis_args(alg: &MatrixAlgebra, idx: &[usize], basis: &[usize]) -> Vec<Argument> {
    idx.iter()
        .enumerate()
        .map(|(j, &i)| {
            let right = match basis.get(j) {
                Some(&a) => alg.unit(a),
                None => alg.one().to_vec(),
            };
            Argument::new(i, right)
        })
        .collect()
}

/// Fills order `k` of `target` with `head(tuple) ± Σ_π π⟨…⟩_lower`, evaluating
/// tuples in parallel. Only orders below `k` of `lower` are read.
fn fill_order<K: SeriesKind>(
    target: &Series<K>,
    lower: &dyn MultiplicativeMap,
    k: usize,
    partitions: &[Bracketing],
    sign: f64,
    head: &(dyn Fn(&[usize], &[usize]) -> Result<Coords> + Sync),
) -> Result<Vec<C64>> {
    let alg = target.algebra().clone();
    let d = alg.dim();
    let n = target.n_vars();
    let per = d.pow(k as u32 - 1);
    let chunks: Vec<Coords> = (0..target.entries_at(k))
        .into_par_iter()
        .map(|t| {
            let idx = unlinear(t / per, n, k);
            let basis = unlinear(t % per, d, k - 1);
            let args = basis_args(&alg, &idx, &basis);
            let mut v = head(&idx, &basis)?;
            for pi in partitions {
                let w = pi.evaluate(&args, lower)?;
                for (x, y) in v.iter_mut().zip(w) {
                    *x += sign * y;
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Solves `[m_1..m_k] = Σ_{π ∈ NC(k)} π{m_1..m_k}` order by order for the
/// top term `{m_1..m_k}`.
pub fn cumulants_from_moments(moments: &dyn MultiplicativeMap, k_max: usize) -> Result<CumulantSeries> {
    if moments.max_order() < k_max {
        return Err(Error::MissingData(format!(
            "moments are available to order {} but {k_max} was requested",
            moments.max_order()
        )));
    }
    let alg = moments.algebra().clone();
    let mut out = CumulantSeries::zeros(alg.clone(), moments.n_vars(), k_max)?;
    for k in 1..=k_max {
        let partitions: Vec<Bracketing> = enumerate_nc(k)?
            .into_iter()
            .filter(|p| !p.is_one_block())
            .map(Bracketing::new)
            .collect();
        let head = |idx: &[usize], basis: &[usize]| -> Result<Coords> {
            let coeffs: Vec<Coords> = basis.iter().map(|&a| alg.unit(a)).collect();
            let refs: Vec<&[C64]> = coeffs.iter().map(Vec::as_slice).collect();
            moments.eval(idx, &refs)
        };
        let data = fill_order(&out, &out, k, &partitions, -1.0, &head)?;
        out.set_order_data(k, data);
    }
    Ok(out)
}

/// `[m_1..m_k] = Σ_{π ∈ NC(k)} π{m_1..m_k}`.
pub fn moments_from_cumulants(cumulants: &CumulantSeries, k_max: usize) -> Result<MomentSeries> {
    check_order(k_max, cumulants.order_cap())?;
    let alg = cumulants.algebra().clone();
    let mut out = MomentSeries::zeros(alg.clone(), cumulants.n_vars(), k_max)?;
    for k in 1..=k_max {
        let partitions: Vec<Bracketing> = enumerate_nc(k)?.into_iter().map(Bracketing::new).collect();
        let zero = |_: &[usize], _: &[usize]| -> Result<Coords> { Ok(alg.zero()) };
        let data = fill_order(&out, cumulants, k, &partitions, 1.0, &zero)?;
        out.set_order_data(k, data);
    }
    Ok(out)
}

/// Least-squares membership test for a subspace given by coordinate columns.
#[derive(Clone, Debug)]
pub struct Subspace {
    projector: CMatrix,
}

impl Subspace {
    /// `columns`: coordinates of a spanning set, one per column.
    pub fn new(columns: &CMatrix) -> Result<Self> {
        let gram = columns.adjoint() * columns;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Numeric("subspace basis is degenerate".into()))?;
        Ok(Self {
            projector: columns * inv * columns.adjoint(),
        })
    }

    pub fn project(&self, v: &[C64]) -> Coords {
        crate::algebra::mat_vec(&self.projector, v)
    }

    /// Residual of `v` against the subspace, as a matrix entry of `alg`.
    pub fn residual(&self, alg: &MatrixAlgebra, v: &[C64]) -> f64 {
        let p = self.project(v);
        let diff: Coords = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        alg.norm(&diff)
    }
}

/// Whether every stored value on tuples of `sub`-basis arguments lies in
/// `sub`. `sub` holds the subalgebra basis as columns of series coordinates.
pub fn is_series_valued_in<K: SeriesKind>(series: &Series<K>, sub: &CMatrix) -> Result<bool> {
    Ok(max_residual_on(series, sub)? <= TOL)
}

/// Largest relative residual of series values on `sub`-basis tuples.
pub fn max_residual_on<K: SeriesKind>(series: &Series<K>, sub: &CMatrix) -> Result<f64> {
    let alg = series.algebra();
    if sub.nrows() != alg.dim() {
        return Err(Error::dims("subalgebra coordinates do not match the series algebra"));
    }
    let space = Subspace::new(sub)?;
    let dd = sub.ncols();
    let cols: Vec<Coords> = (0..dd).map(|j| sub.column(j).iter().copied().collect()).collect();
    let mut worst: f64 = 0.0;
    for k in 1..=series.order_cap() {
        let n = series.n_vars();
        for ti in 0..n.pow(k as u32) {
            let idx = unlinear(ti, n, k);
            for tb in 0..dd.pow(k as u32 - 1) {
                let basis = unlinear(tb, dd, k - 1);
                let refs: Vec<&[C64]> = basis.iter().map(|&a| cols[a].as_slice()).collect();
                let v = series.apply(&idx, &refs)?;
                let scale = alg.norm(&v).max(1.0);
                worst = worst.max(space.residual(alg, &v) / scale);
            }
        }
    }
    Ok(worst)
}
