//! The canonical realisation of a prescribed cumulant series.
//!
//! Words alternate `B` coefficients with generators `λ*_j` (creation) and
//! `λ_j^q` (absorb `q` creations). The rewrite
//!
//! ```text
//! λ*_{j_1} b_1 ⋯ λ*_{j_q} b_q λ_j^q  ↦  κ_{j_1..j_q, j}(b_1, …, b_q)
//! ```
//!
//! reduces words, `E_B` keeps the words that reduce to a pure `B` element, and
//! `Y_j = λ*_j + κ_j + Σ_q λ_j^q` has exactly the prescribed cumulants.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::{coords_max_abs, Coords, MatrixAlgebra, C64, TOL};
use crate::error::{Error, Result};
use crate::series::{check_order, Argument, CumulantSeries, MomentSeries, MultiplicativeMap};

/// Default guard on the number of words (or search states) per moment.
pub const DEFAULT_WORD_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Generator {
    Star { var: usize },
    Ladder { var: usize, level: usize },
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Star { var } => write!(f, "λ*_{}", var + 1),
            Generator::Ladder { var, level } => write!(f, "λ_{}^{}", var + 1, level),
        }
    }
}

/// `b_0 g_1 b_1 ⋯ g_r b_r`.
#[derive(Clone, Debug)]
pub struct FormalWord {
    pub coeffs: Vec<Coords>,
    pub gens: Vec<Generator>,
}

impl FormalWord {
    pub fn scalar(b: Coords) -> Self {
        Self {
            coeffs: vec![b],
            gens: Vec::new(),
        }
    }

    pub fn generator(alg: &MatrixAlgebra, g: Generator) -> Self {
        Self {
            coeffs: vec![alg.one().to_vec(), alg.one().to_vec()],
            gens: vec![g],
        }
    }

    pub fn is_pure(&self) -> bool {
        self.gens.is_empty()
    }

    /// Concatenation, multiplying the touching coefficients.
    pub fn concat(&self, alg: &MatrixAlgebra, other: &FormalWord) -> FormalWord {
        let mut coeffs = self.coeffs[..self.coeffs.len() - 1].to_vec();
        coeffs.push(alg.mul(self.coeffs.last().unwrap(), &other.coeffs[0]));
        coeffs.extend_from_slice(&other.coeffs[1..]);
        let mut gens = self.gens.clone();
        gens.extend_from_slice(&other.gens);
        FormalWord { coeffs, gens }
    }

    pub fn mul_left(&self, alg: &MatrixAlgebra, b: &[C64]) -> FormalWord {
        let mut w = self.clone();
        w.coeffs[0] = alg.mul(b, &w.coeffs[0]);
        w
    }

    pub fn mul_right(&self, alg: &MatrixAlgebra, b: &[C64]) -> FormalWord {
        let mut w = self.clone();
        let last = w.coeffs.len() - 1;
        w.coeffs[last] = alg.mul(&w.coeffs[last], b);
        w
    }

    /// Positions `p` of ladders `λ^q` preceded by at least `q` consecutive stars.
    pub fn redexes(&self) -> Vec<usize> {
        self.gens
            .iter()
            .enumerate()
            .filter_map(|(p, g)| match *g {
                Generator::Ladder { level, .. } if level <= p => self.gens[p - level..p]
                    .iter()
                    .all(|h| matches!(h, Generator::Star { .. }))
                    .then_some(p),
                _ => None,
            })
            .collect()
    }

    fn structurally_equal(&self, other: &FormalWord) -> bool {
        self.gens == other.gens
            && self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y).norm() <= TOL))
    }
}

/// Finite combination `Σ c_w w`, kept merged.
#[derive(Clone, Debug, Default)]
pub struct FormalElement {
    pub terms: Vec<(C64, FormalWord)>,
}

impl FormalElement {
    pub fn from_terms(alg: &MatrixAlgebra, terms: Vec<(C64, FormalWord)>) -> Self {
        let mut e = FormalElement { terms };
        e.normalise(alg);
        e
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sums all pure words into one, merges equal words and drops zeros.
    fn normalise(&mut self, alg: &MatrixAlgebra) {
        let mut pure = alg.zero();
        let mut groups: HashMap<Vec<Generator>, Vec<(C64, FormalWord)>> = HashMap::new();
        let mut order: Vec<Vec<Generator>> = Vec::new();
        for (c, w) in self.terms.drain(..) {
            if w.is_pure() {
                for (p, x) in pure.iter_mut().zip(&w.coeffs[0]) {
                    *p += c * x;
                }
                continue;
            }
            let slot = groups.entry(w.gens.clone()).or_insert_with(|| {
                order.push(w.gens.clone());
                Vec::new()
            });
            match slot.iter_mut().find(|(_, v)| v.structurally_equal(&w)) {
                Some((acc, _)) => *acc += c,
                None => slot.push((c, w)),
            }
        }
        if coords_max_abs(&pure) > 0.0 {
            self.terms.push((C64::new(1.0, 0.0), FormalWord::scalar(pure)));
        }
        for key in order {
            for (c, w) in groups.remove(&key).unwrap_or_default() {
                if c.norm() > 0.0 && w.coeffs.iter().all(|b| coords_max_abs(b) > 0.0) {
                    self.terms.push((c, w));
                }
            }
        }
    }

    pub fn mul(&self, alg: &MatrixAlgebra, other: &FormalElement, limit: usize) -> Result<FormalElement> {
        if self.len().saturating_mul(other.len()) > limit {
            return Err(Error::WordLimit { limit });
        }
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for (c1, w1) in &self.terms {
            for (c2, w2) in &other.terms {
                terms.push((c1 * c2, w1.concat(alg, w2)));
            }
        }
        Ok(FormalElement::from_terms(alg, terms))
    }

    pub fn mul_left(&self, alg: &MatrixAlgebra, b: &[C64]) -> FormalElement {
        let terms = self.terms.iter().map(|(c, w)| (*c, w.mul_left(alg, b))).collect();
        FormalElement::from_terms(alg, terms)
    }

    pub fn mul_right(&self, alg: &MatrixAlgebra, b: &[C64]) -> FormalElement {
        let terms = self.terms.iter().map(|(c, w)| (*c, w.mul_right(alg, b))).collect();
        FormalElement::from_terms(alg, terms)
    }
}

/// Target cumulant data with a ladder truncation level `L`.
#[derive(Clone, Debug)]
pub struct PrescribedCumulants {
    series: CumulantSeries,
    truncation: usize,
    word_limit: usize,
}

impl PrescribedCumulants {
    /// `λ^q` needs cumulants of order `q + 1`, so `truncation < order_cap`.
    pub fn new(series: CumulantSeries, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::config("ladder truncation must be at least 1"));
        }
        check_order(truncation + 1, series.order_cap())?;
        Ok(Self {
            series,
            truncation,
            word_limit: DEFAULT_WORD_LIMIT,
        })
    }

    /// Largest truncation the series supports.
    pub fn full(series: CumulantSeries) -> Result<Self> {
        let l = series.order_cap().saturating_sub(1);
        Self::new(series, l)
    }

    pub fn with_word_limit(mut self, limit: usize) -> Self {
        self.word_limit = limit;
        self
    }

    pub fn series(&self) -> &CumulantSeries {
        &self.series
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn word_limit(&self) -> usize {
        self.word_limit
    }

    pub fn algebra(&self) -> &Arc<MatrixAlgebra> {
        self.series.algebra()
    }

    pub fn n_vars(&self) -> usize {
        self.series.n_vars()
    }

    /// Moments of order up to `L + 1` are exact.
    pub fn exact_order(&self) -> usize {
        self.truncation + 1
    }
}

/// Rewrites the redex whose ladder sits at generator position `p`.
fn rewrite_at(w: &FormalWord, p: usize, k: &PrescribedCumulants) -> Result<FormalWord> {
    let alg = k.algebra();
    let (var, level) = match w.gens[p] {
        Generator::Ladder { var, level } => (var, level),
        Generator::Star { .. } => unreachable!("redex positions hold ladders"),
    };
    if level > k.truncation {
        return Err(Error::LevelCap {
            level,
            cap: k.truncation,
        });
    }
    let start = p - level;
    let mut indices: Vec<usize> = w.gens[start..p]
        .iter()
        .map(|g| match *g {
            Generator::Star { var } => var,
            Generator::Ladder { .. } => unreachable!("redex stars"),
        })
        .collect();
    indices.push(var);
    let between: Vec<&[C64]> = w.coeffs[start + 1..=p].iter().map(Vec::as_slice).collect();
    let value = k.series.apply(&indices, &between)?;
    let merged = alg.mul3(&w.coeffs[start], &value, &w.coeffs[p + 1]);

    let mut coeffs = w.coeffs[..start].to_vec();
    coeffs.push(merged);
    coeffs.extend_from_slice(&w.coeffs[p + 2..]);
    let mut gens = w.gens[..start].to_vec();
    gens.extend_from_slice(&w.gens[p + 1..]);
    Ok(FormalWord { coeffs, gens })
}

fn check_levels(w: &FormalWord, k: &PrescribedCumulants) -> Result<()> {
    for g in &w.gens {
        if let Generator::Ladder { level, .. } = *g {
            if level > k.truncation {
                return Err(Error::LevelCap {
                    level,
                    cap: k.truncation,
                });
            }
        }
    }
    Ok(())
}

/// Normal form under leftmost-innermost rewriting.
pub fn reduce(w: &FormalWord, k: &PrescribedCumulants) -> Result<FormalWord> {
    reduce_with(w, k, |_| 0)
}

/// Normal form where `pick(n)` chooses which of the `n` current redexes
/// (in left-to-right order) to rewrite next.
pub fn reduce_with(w: &FormalWord, k: &PrescribedCumulants, mut pick: impl FnMut(usize) -> usize) -> Result<FormalWord> {
    check_levels(w, k)?;
    let mut w = w.clone();
    loop {
        let redexes = w.redexes();
        if redexes.is_empty() {
            return Ok(w);
        }
        let p = redexes[pick(redexes.len()).min(redexes.len() - 1)];
        w = rewrite_at(&w, p, k)?;
    }
}

/// `E_B(x)`: the sum of the words that reduce to pure `B` elements.
pub fn expectation_eb(x: &FormalElement, k: &PrescribedCumulants) -> Result<Coords> {
    let mut out = k.algebra().zero();
    for (c, w) in &x.terms {
        let r = reduce(w, k)?;
        if r.is_pure() {
            for (o, v) in out.iter_mut().zip(&r.coeffs[0]) {
                *o += c * v;
            }
        }
    }
    Ok(out)
}

/// `Y_j = λ*_j + κ_j + Σ_{q=1}^{L} λ_j^q`.
pub fn variable_y(j: usize, k: &PrescribedCumulants) -> Result<FormalElement> {
    if j >= k.n_vars() {
        return Err(Error::dims(format!("variable {} of {}", j + 1, k.n_vars())));
    }
    let alg = k.algebra();
    let one = C64::new(1.0, 0.0);
    let mut terms = vec![
        (one, FormalWord::generator(alg, Generator::Star { var: j })),
        (one, FormalWord::scalar(k.series.value(&[j], &[]).to_vec())),
    ];
    for level in 1..=k.truncation {
        terms.push((one, FormalWord::generator(alg, Generator::Ladder { var: j, level })));
    }
    Ok(FormalElement::from_terms(alg, terms))
}

/// `E_B(b_0 Y_{i_1} b_1 ⋯ Y_{i_k} b_k)` by literal expansion into words.
pub fn moment_of_y_expanded(args: &[Argument], left: &[C64], k: &PrescribedCumulants) -> Result<Coords> {
    let alg = k.algebra();
    let mut x = FormalElement::from_terms(alg, vec![(C64::new(1.0, 0.0), FormalWord::scalar(left.to_vec()))]);
    for a in args {
        x = x.mul(alg, &variable_y(a.var, k)?, k.word_limit)?;
        x = x.mul_right(alg, &a.right);
    }
    expectation_eb(&x, k)
}

/// `E_B(b_0 Y_{i_1} b_1 ⋯ Y_{i_k} b_k)`.
///
/// Walks the generator choices left to right while keeping the word reduced:
/// unmatched stars sit on a stack with the coefficient that follows each, a
/// ladder `λ^q` immediately consumes the top `q` stars, and branches with a
/// ladder that can never be absorbed are dropped.
pub fn moment_of_y(args: &[Argument], left: &[C64], k: &PrescribedCumulants) -> Result<Coords> {
    if let Some(a) = args.iter().find(|a| a.var >= k.n_vars()) {
        return Err(Error::dims(format!("variable {} of {}", a.var + 1, k.n_vars())));
    }
    let mut walk = Walk {
        k,
        alg: k.algebra(),
        args,
        stack: Vec::with_capacity(args.len()),
        out: k.algebra().zero(),
        visited: 0,
    };
    walk.step(0, left.to_vec())?;
    Ok(walk.out)
}

struct Walk<'a> {
    k: &'a PrescribedCumulants,
    alg: &'a MatrixAlgebra,
    args: &'a [Argument],
    stack: Vec<(usize, Coords)>,
    out: Coords,
    visited: usize,
}

impl Walk<'_> {
    // `head` is the coefficient left of every unmatched star.
    fn step(&mut self, t: usize, head: Coords) -> Result<()> {
        self.visited += 1;
        if self.visited > self.k.word_limit {
            return Err(Error::WordLimit {
                limit: self.k.word_limit,
            });
        }
        if t == self.args.len() {
            if self.stack.is_empty() {
                for (o, v) in self.out.iter_mut().zip(&head) {
                    *o += v;
                }
            }
            return Ok(());
        }
        let (i, b) = (self.args[t].var, &self.args[t].right);
        let remaining = self.args.len() - t - 1;

        // A star in the last slot can never be absorbed.
        if remaining > 0 {
            self.stack.push((i, b.clone()));
            self.step(t + 1, head.clone())?;
            self.stack.pop();
        }

        let k1 = self.k.series.value(&[i], &[]);
        if coords_max_abs(k1) > 0.0 {
            self.with_last(head.clone(), |alg, last| alg.mul3(last, k1, b), |w, h| w.step(t + 1, h))?;
        }

        for level in 1..=self.k.truncation.min(self.stack.len()) {
            let popped = self.stack.split_off(self.stack.len() - level);
            let mut indices: Vec<usize> = popped.iter().map(|(v, _)| *v).collect();
            indices.push(i);
            let coeffs: Vec<&[C64]> = popped.iter().map(|(_, c)| c.as_slice()).collect();
            let value = self.k.series.apply(&indices, &coeffs)?;
            if coords_max_abs(&value) > 0.0 {
                self.with_last(head.clone(), |alg, last| alg.mul3(last, &value, b), |w, h| w.step(t + 1, h))?;
            }
            self.stack.extend(popped);
        }
        Ok(())
    }

    /// Replaces the rightmost open coefficient by `update(it)`, runs `next`,
    /// then restores it.
    fn with_last(
        &mut self,
        head: Coords,
        update: impl FnOnce(&MatrixAlgebra, &[C64]) -> Coords,
        next: impl FnOnce(&mut Self, Coords) -> Result<()>,
    ) -> Result<()> {
        match self.stack.last_mut() {
            None => {
                let h = update(self.alg, &head);
                next(self, h)
            }
            Some((_, c)) => {
                let fresh = update(self.alg, c);
                let saved = std::mem::replace(c, fresh);
                let r = next(self, head);
                self.stack.last_mut().unwrap().1 = saved;
                r
            }
        }
    }
}

/// The canonical variables `Y_1..Y_n` seen as a moment map.
#[derive(Clone, Debug)]
pub struct CanonicalModel {
    pub cumulants: PrescribedCumulants,
}

impl CanonicalModel {
    pub fn new(cumulants: PrescribedCumulants) -> Self {
        Self { cumulants }
    }

    pub fn moment(&self, args: &[Argument], left: &[C64]) -> Result<Coords> {
        moment_of_y(args, left, &self.cumulants)
    }

    /// Tabulated moments up to `order_cap ≤ L + 1`.
    pub fn moment_series(&self, order_cap: usize) -> Result<MomentSeries> {
        check_order(order_cap, self.cumulants.exact_order())?;
        let alg = self.cumulants.algebra().clone();
        let mut out = MomentSeries::zeros(alg.clone(), self.cumulants.n_vars(), order_cap)?;
        for kk in 1..=order_cap {
            let tuples: Vec<_> = out.tuples(kk).collect();
            for (idx, basis) in tuples {
                let v = self.eval_basis(&idx, &basis)?;
                out.value_mut(&idx, &basis).copy_from_slice(&v);
            }
        }
        Ok(out)
    }

    fn eval_basis(&self, idx: &[usize], basis: &[usize]) -> Result<Coords> {
        let alg = self.cumulants.algebra();
        let args: Vec<Argument> = idx
            .iter()
            .enumerate()
            .map(|(j, &i)| Argument::new(i, basis.get(j).map_or_else(|| alg.one().to_vec(), |&a| alg.unit(a))))
            .collect();
        self.moment(&args, alg.one())
    }
}

impl MultiplicativeMap for CanonicalModel {
    fn algebra(&self) -> &Arc<MatrixAlgebra> {
        self.cumulants.algebra()
    }

    fn n_vars(&self) -> usize {
        self.cumulants.n_vars()
    }

    fn max_order(&self) -> usize {
        self.cumulants.exact_order()
    }

    fn eval(&self, indices: &[usize], coeffs: &[&[C64]]) -> Result<Coords> {
        let alg = self.cumulants.algebra();
        let args: Vec<Argument> = indices
            .iter()
            .enumerate()
            .map(|(j, &i)| Argument::new(i, coeffs.get(j).map_or_else(|| alg.one().to_vec(), |c| c.to_vec())))
            .collect();
        self.moment(&args, alg.one())
    }
}
