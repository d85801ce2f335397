//! JSON encodings. Complex numbers are `[re, im]` pairs and matrices are
//! row-major arrays of rows.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{AlgebraContext, CMatrix, ContextSpec, MatrixAlgebra, C64};
use crate::error::{Error, Result};
use crate::series::{Series, SeriesKind};

/// Wire form of one complex number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex(pub [f64; 2]);

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Complex([z.re, z.im])
    }
}

impl From<Complex> for C64 {
    fn from(z: Complex) -> Self {
        C64::new(z.0[0], z.0[1])
    }
}

pub fn ser_opt_coords<S: Serializer>(v: &Option<Vec<C64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref()
        .map(|v| v.iter().map(|&z| Complex::from(z)).collect::<Vec<_>>())
        .serialize(s)
}

pub fn ser_coords<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|&z| Complex::from(z)).collect::<Vec<_>>().serialize(s)
}

pub fn de_coords<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<C64>, D::Error> {
    Ok(Vec::<Complex>::deserialize(d)?.into_iter().map(C64::from).collect())
}

pub fn matrix_to_json(m: &CMatrix) -> Vec<Vec<Complex>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect())
        .collect()
}

pub fn matrix_from_json(rows: &[Vec<Complex>]) -> Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::config("matrix rows must be non-empty and of equal length"));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| rows[i][j].into()))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// A context given inline or as a path to a context file. Relative paths are
/// resolved against the directory of the document that contains them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContextSource {
    Inline(ContextSpec),
    Path(PathBuf),
}

impl ContextSource {
    pub fn resolve(&self, base: Option<&Path>) -> Result<ContextSpec> {
        match self {
            ContextSource::Inline(spec) => Ok(spec.clone()),
            ContextSource::Path(p) => {
                let full = match base {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                read_json(full)
            }
        }
    }
}

pub fn load_context(path: impl AsRef<Path>) -> Result<AlgebraContext> {
    AlgebraContext::from_spec(&read_json(path)?)
}

/// Which algebra of the context a series takes values in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    #[default]
    B,
    D,
}

impl Level {
    pub fn algebra(self, ctx: &AlgebraContext) -> &Arc<MatrixAlgebra> {
        match self {
            Level::B => &ctx.b,
            Level::D => &ctx.d,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesEntry {
    /// 1-based variable indices.
    pub indices: Vec<usize>,
    /// 0-based indices into the basis of the value algebra, one fewer than `indices`.
    pub basis: Vec<usize>,
    /// Ambient matrix of the value.
    pub value: Vec<Vec<Complex>>,
}

/// File form of a moment or cumulant series. Tuples without an entry are zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesDocument {
    pub kind: String,
    pub context: ContextSource,
    #[serde(default)]
    pub algebra: Level,
    pub n_vars: usize,
    pub order_cap: usize,
    pub entries: Vec<SeriesEntry>,
    /// Seconds since the Unix epoch at which the file was written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

/// A series together with the context it was read against.
#[derive(Clone, Debug)]
pub struct LoadedSeries<K> {
    pub context: Arc<AlgebraContext>,
    pub source: ContextSource,
    pub level: Level,
    pub series: Series<K>,
}

impl SeriesDocument {
    pub fn to_series<K: SeriesKind>(&self, ctx: &AlgebraContext) -> Result<Series<K>> {
        if self.kind != K::NAME {
            return Err(Error::config(format!("expected a {} series, found kind '{}'", K::NAME, self.kind)));
        }
        let alg = self.algebra.algebra(ctx).clone();
        let d = alg.dim();
        let mut series = Series::<K>::zeros(alg.clone(), self.n_vars, self.order_cap)?;
        for (i, e) in self.entries.iter().enumerate() {
            let k = e.indices.len();
            if k == 0 || k > self.order_cap || e.basis.len() + 1 != k {
                return Err(Error::config(format!(
                    "entry {i}: {k} indices and {} basis elements do not fit order cap {}",
                    e.basis.len(),
                    self.order_cap
                )));
            }
            if e.indices.iter().any(|&v| v == 0 || v > self.n_vars) {
                return Err(Error::config(format!("entry {i}: variable indices run from 1 to {}", self.n_vars)));
            }
            if e.basis.iter().any(|&a| a >= d) {
                return Err(Error::config(format!("entry {i}: basis indices run from 0 to {}", d - 1)));
            }
            let m = matrix_from_json(&e.value)?;
            if m.nrows() != alg.ambient_dim() || m.ncols() != alg.ambient_dim() {
                return Err(Error::dims(format!("entry {i}: value is not {0}×{0}", alg.ambient_dim())));
            }
            let idx: Vec<usize> = e.indices.iter().map(|v| v - 1).collect();
            let coords = alg.coords(&m)?;
            series.value_mut(&idx, &e.basis).copy_from_slice(&coords);
        }
        Ok(series)
    }

    /// Every non-zero tuple of `series` as an entry.
    pub fn from_series<K: SeriesKind>(series: &Series<K>, context: ContextSource, level: Level) -> Self {
        let alg = series.algebra();
        let mut entries = Vec::new();
        for k in 1..=series.order_cap() {
            for (idx, basis) in series.tuples(k) {
                let v = series.value(&idx, &basis);
                if v.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                entries.push(SeriesEntry {
                    indices: idx.iter().map(|v| v + 1).collect(),
                    basis,
                    value: matrix_to_json(&alg.to_matrix(v)),
                });
            }
        }
        Self {
            kind: K::NAME.to_string(),
            context,
            algebra: level,
            n_vars: series.n_vars(),
            order_cap: series.order_cap(),
            entries,
            generated_at: None,
        }
    }
}

/// Reads a series file. `context` overrides the context named in the file.
pub fn read_series<K: SeriesKind>(path: impl AsRef<Path>, context: Option<&Path>) -> Result<LoadedSeries<K>> {
    let path = path.as_ref();
    let doc: SeriesDocument = read_json(path)?;
    let spec = match context {
        Some(p) => read_json(p)?,
        None => doc.context.resolve(path.parent())?,
    };
    let ctx = AlgebraContext::from_spec(&spec)?;
    let source = ContextSource::Inline(spec);
    let series = doc.to_series(&ctx)?;
    Ok(LoadedSeries {
        context: Arc::new(ctx),
        source,
        level: doc.algebra,
        series,
    })
}

/// `η` on `B` as the images of the basis of `B`, in basis order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextSource>,
    pub images: Vec<Vec<Vec<Complex>>>,
}

impl EtaDocument {
    pub fn matrices(&self) -> Result<Vec<CMatrix>> {
        self.images.iter().map(|m| matrix_from_json(m)).collect()
    }
}
