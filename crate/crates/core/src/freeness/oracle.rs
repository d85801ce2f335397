//! Brute-force test of the definition: `F∘E(b_0 w_1 b_1 ⋯ w_s b_s) = 0` for
//! `w_j` centred polynomials in the variables and `D`, and `b_j ∈ ker F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{columns, sub, Verdict};
use crate::algebra::{mat_vec, AlgebraContext, CMatrix, Coords, MatrixAlgebra, C64};
use crate::error::{Error, Result};
use crate::series::{Argument, MultiplicativeMap};
use crate::transform::apply_map;

pub const PASS_TOLERANCE: f64 = 1e-8;
pub const FAIL_THRESHOLD: f64 = 1e-3;
const MAX_ORACLE_ORDER: usize = 6;

#[derive(Clone, Debug, Serialize)]
pub struct OracleConfig {
    pub max_order: usize,
    pub random_words: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_order: 6,
            random_words: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WordValue {
    pub word: String,
    pub order: usize,
    #[serde(serialize_with = "crate::io::ser_coords")]
    pub value: Coords,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreenessReport {
    pub words_tested: usize,
    pub max_norm: f64,
    pub tolerance: f64,
    pub fail_threshold: f64,
    pub verdict: Verdict,
    pub passes: bool,
    pub worst: Option<WordValue>,
    pub words: Vec<WordValue>,
}

/// A polynomial in the variables with `D` coefficients between them.
#[derive(Clone, Debug)]
struct Monomial {
    vars: Vec<usize>,
    inner: Vec<Coords>,
    label: String,
}

/// `w − F∘E(w)`, with the centring term stored in `B` coordinates.
#[derive(Clone, Debug)]
struct Centred {
    mono: Monomial,
    centre: Coords,
}

#[derive(Clone, Debug)]
struct Labelled {
    coords: Coords,
    label: String,
}

#[derive(Clone, Debug)]
struct TestWord {
    left: Option<Labelled>,
    factors: Vec<Centred>,
    /// `between[j]` sits after factor `j`, for `j < s - 1`.
    between: Vec<Labelled>,
    right: Option<Labelled>,
}

impl TestWord {
    fn order(&self) -> usize {
        self.factors.iter().map(|f| f.mono.vars.len()).sum()
    }

    fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(b) = &self.left {
            parts.push(b.label.clone());
        }
        for (j, f) in self.factors.iter().enumerate() {
            parts.push(format!("({})°", f.mono.label));
            if let Some(b) = self.between.get(j) {
                parts.push(b.label.clone());
            }
        }
        if let Some(b) = &self.right {
            parts.push(b.label.clone());
        }
        parts.join(" ")
    }
}

enum Token<'a> {
    Coeff(&'a [C64]),
    Var(usize),
}

/// Folds `c c X c X c …` into a leading coefficient and arguments.
fn fold(alg: &MatrixAlgebra, tokens: &[Token<'_>]) -> (Coords, Vec<Argument>) {
    let mut left = alg.one().to_vec();
    let mut args: Vec<Argument> = Vec::new();
    for t in tokens {
        match t {
            Token::Coeff(c) => match args.last_mut() {
                Some(a) => a.right = alg.mul(&a.right, c),
                None => left = alg.mul(&left, c),
            },
            Token::Var(i) => args.push(Argument::new(*i, alg.one().to_vec())),
        }
    }
    (left, args)
}

fn expectation(vars: &dyn MultiplicativeMap, alg: &MatrixAlgebra, tokens: &[Token<'_>]) -> Result<Coords> {
    let (left, args) = fold(alg, tokens);
    if args.is_empty() {
        return Ok(left);
    }
    apply_map(vars, &args, &left)
}

/// `F∘E` of a test word, expanding each `(w_j − c_j)` over subsets.
fn evaluate(vars: &dyn MultiplicativeMap, ctx: &AlgebraContext, p: &CMatrix, word: &TestWord) -> Result<Coords> {
    let alg = &ctx.b;
    let s = word.factors.len();
    let mut total = alg.zero();
    for mask in 0u32..(1 << s) {
        let mut tokens = Vec::new();
        let mut negated = false;
        if let Some(b) = &word.left {
            tokens.push(Token::Coeff(&b.coords));
        }
        for (j, f) in word.factors.iter().enumerate() {
            if mask & (1 << j) != 0 {
                tokens.push(Token::Coeff(&f.centre));
                negated = !negated;
            } else {
                for (t, &v) in f.mono.vars.iter().enumerate() {
                    tokens.push(Token::Var(v));
                    if let Some(d) = f.mono.inner.get(t) {
                        tokens.push(Token::Coeff(d));
                    }
                }
            }
            if let Some(b) = word.between.get(j) {
                tokens.push(Token::Coeff(&b.coords));
            }
        }
        if let Some(b) = &word.right {
            tokens.push(Token::Coeff(&b.coords));
        }
        let v = expectation(vars, alg, &tokens)?;
        let sign = if negated { -1.0 } else { 1.0 };
        for (t, x) in total.iter_mut().zip(v) {
            *t += sign * x;
        }
    }
    Ok(mat_vec(p, &total))
}

/// A basis of `ker F` chosen among the vectors `e_a − F(e_a)`.
pub fn kernel_basis(alg: &MatrixAlgebra, p: &CMatrix) -> Vec<Coords> {
    let d = alg.dim();
    let mut kept: Vec<Coords> = Vec::new();
    let mut ortho: Vec<Coords> = Vec::new();
    for a in 0..d {
        let e = alg.unit(a);
        let v = sub(&e, &mat_vec(p, &e));
        let mut r = v.clone();
        for q in &ortho {
            let dot: C64 = q.iter().zip(&r).map(|(x, y)| x.conj() * y).sum();
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= dot * qi;
            }
        }
        let norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-9 {
            ortho.push(r.iter().map(|z| z / norm).collect());
            kept.push(v);
        }
    }
    kept
}

fn monomials(ctx: &AlgebraContext, n: usize, max_len: usize) -> Vec<Monomial> {
    let d_cols = columns(ctx.d_in_b());
    let mut out: Vec<Monomial> = (0..n)
        .map(|i| Monomial {
            vars: vec![i],
            inner: Vec::new(),
            label: format!("X{}", i + 1),
        })
        .collect();
    if max_len >= 2 {
        for i in 0..n {
            for (a, d) in d_cols.iter().enumerate() {
                for j in 0..n {
                    out.push(Monomial {
                        vars: vec![i, j],
                        inner: vec![d.clone()],
                        label: format!("X{} d{} X{}", i + 1, a + 1, j + 1),
                    });
                }
            }
        }
    }
    out
}

fn centre(vars: &dyn MultiplicativeMap, ctx: &AlgebraContext, p: &CMatrix, mono: Monomial) -> Result<Centred> {
    let mut tokens = Vec::new();
    for (t, &v) in mono.vars.iter().enumerate() {
        tokens.push(Token::Var(v));
        if let Some(d) = mono.inner.get(t) {
            tokens.push(Token::Coeff(d));
        }
    }
    let e = expectation(vars, &ctx.b, &tokens)?;
    Ok(Centred {
        centre: mat_vec(p, &e),
        mono,
    })
}

fn random_combination(rng: &mut ChaCha8Rng, basis: &[Coords], d: usize) -> Coords {
    let mut out = vec![C64::new(0.0, 0.0); d];
    for b in basis {
        let w = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for (o, x) in out.iter_mut().zip(b) {
            *o += w * x;
        }
    }
    out
}

/// Every alternating word with at most three factors of length at most two
/// (total order capped by `max_order`), plus seeded random longer words.
pub fn freeness_oracle(vars: &dyn MultiplicativeMap, ctx: &AlgebraContext, config: &OracleConfig) -> Result<FreenessReport> {
    if config.max_order == 0 || config.max_order > MAX_ORACLE_ORDER {
        return Err(Error::SizeLimit {
            what: "oracle order",
            value: config.max_order,
            min: 1,
            max: MAX_ORACLE_ORDER,
        });
    }
    if !vars.algebra().same_as(&ctx.b) {
        return Err(Error::dims("variables are not B-valued for this context"));
    }
    if vars.max_order() < config.max_order {
        return Err(Error::MissingData(format!(
            "moments available to order {}, oracle needs {}",
            vars.max_order(),
            config.max_order
        )));
    }
    let alg = &ctx.b;
    let d = alg.dim();
    let n = vars.n_vars();
    let p = ctx.f_operator();
    let kernel: Vec<Labelled> = kernel_basis(alg, &p)
        .into_iter()
        .enumerate()
        .map(|(a, coords)| Labelled {
            coords,
            label: format!("c{}", a + 1),
        })
        .collect();
    let ends: Vec<Option<Labelled>> = std::iter::once(None).chain(kernel.iter().cloned().map(Some)).collect();
    let monos: Vec<Centred> = monomials(ctx, n, 2.min(config.max_order))
        .into_iter()
        .map(|m| centre(vars, ctx, &p, m))
        .collect::<Result<_>>()?;

    let mut words: Vec<TestWord> = Vec::new();
    for s in 1..=3usize {
        if s > 1 && kernel.is_empty() {
            break;
        }
        let mut choice = vec![0usize; s];
        let mut inner = vec![0usize; s - 1];
        loop {
            let factors: Vec<Centred> = choice.iter().map(|&c| monos[c].clone()).collect();
            let order: usize = factors.iter().map(|f| f.mono.vars.len()).sum();
            if order <= config.max_order {
                for l in &ends {
                    for r in &ends {
                        words.push(TestWord {
                            left: l.clone(),
                            factors: factors.clone(),
                            between: inner.iter().map(|&c| kernel[c].clone()).collect(),
                            right: r.clone(),
                        });
                    }
                }
            }
            if !advance(&mut inner, kernel.len()) && !advance(&mut choice, monos.len()) {
                break;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d_basis = columns(ctx.d_in_b());
    let kernel_coords: Vec<Coords> = kernel.iter().map(|k| k.coords.clone()).collect();
    for _ in 0..config.random_words {
        let max_s = if kernel.is_empty() { 1 } else { config.max_order.min(4) };
        let s = rng.random_range(1..=max_s);
        let mut budget = config.max_order - s;
        let mut factors = Vec::with_capacity(s);
        for _ in 0..s {
            let extra = rng.random_range(0..=budget.min(2));
            budget -= extra;
            let len = 1 + extra;
            let vars_: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
            let inner: Vec<Coords> = (1..len).map(|_| random_combination(&mut rng, &d_basis, d)).collect();
            let label = vars_.iter().map(|v| format!("X{}", v + 1)).collect::<Vec<_>>().join(" d ");
            factors.push(centre(vars, ctx, &p, Monomial { vars: vars_, inner, label })?);
        }
        let end = |rng: &mut ChaCha8Rng| {
            (!kernel.is_empty() && rng.random_bool(0.5)).then(|| Labelled {
                coords: random_combination(rng, &kernel_coords, d),
                label: "c".into(),
            })
        };
        let left = end(&mut rng);
        let right = end(&mut rng);
        let between = (1..s)
            .map(|_| Labelled {
                coords: random_combination(&mut rng, &kernel_coords, d),
                label: "c".into(),
            })
            .collect();
        words.push(TestWord {
            left,
            factors,
            between,
            right,
        });
    }

    let values: Vec<WordValue> = words
        .par_iter()
        .map(|w| {
            let value = evaluate(vars, ctx, &p, w)?;
            Ok(WordValue {
                word: w.label(),
                order: w.order(),
                norm: alg.norm(&value),
                value: ctx.f.apply(&value),
            })
        })
        .collect::<Result<_>>()?;

    let worst = values.iter().max_by(|a, b| a.norm.total_cmp(&b.norm)).cloned();
    let max_norm = worst.as_ref().map_or(0.0, |w| w.norm);
    let verdict = if max_norm < PASS_TOLERANCE {
        Verdict::Pass
    } else if max_norm >= FAIL_THRESHOLD {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(FreenessReport {
        words_tested: values.len(),
        max_norm,
        tolerance: PASS_TOLERANCE,
        fail_threshold: FAIL_THRESHOLD,
        verdict,
        passes: verdict == Verdict::Pass,
        worst,
        words: values,
    })
}

/// Odometer step; false once every digit has wrapped.
fn advance(digits: &mut [usize], radix: usize) -> bool {
    for x in digits.iter_mut().rev() {
        *x += 1;
        if *x < radix {
            return true;
        }
        *x = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{c64, make_block_diagonal_context};
    use crate::series::VariableTuple;
    use std::sync::Arc;

    #[test]
    fn b_element_is_not_free_from_b() {
        let ctx = Arc::new(make_block_diagonal_context(&[1, 1], &[0.5, 0.5]).unwrap());
        let x = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(1.0), c64(0.0)]));
        let vars = VariableTuple::new(ctx.clone(), vec![x]).unwrap();
        let r = freeness_oracle(&vars, &ctx, &OracleConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.max_norm >= 0.25 - 1e-12);
    }

    #[test]
    fn d_equal_b_is_vacuous() {
        let spec = crate::algebra::ContextSpec {
            ambient_dim: 2,
            b_blocks: vec![1, 1],
            d_groups: Some(vec![vec![0], vec![1]]),
            weights: None,
        };
        let ctx = Arc::new(AlgebraContext::from_spec(&spec).unwrap());
        let x = CMatrix::from_row_slice(2, 2, &[c64(1.0), c64(2.0), c64(2.0), c64(-1.0)]);
        let vars = VariableTuple::new(ctx.clone(), vec![x]).unwrap();
        let r = freeness_oracle(&vars, &ctx, &OracleConfig::default()).unwrap();
        assert!(kernel_basis(&ctx.b, &ctx.f_operator()).is_empty());
        assert!(r.passes, "max norm {}", r.max_norm);
    }

    #[test]
    fn odometer_visits_all() {
        let mut v = vec![0, 0];
        let mut n = 1;
        while advance(&mut v, 3) {
            n += 1;
        }
        assert_eq!(n, 9);
        assert!(!advance(&mut [], 3));
    }
}
