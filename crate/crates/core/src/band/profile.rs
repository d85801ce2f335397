use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symmetric non-negative variance profile `σ` on `[0,1]²`.
#[derive(Clone, Debug, PartialEq)]
pub enum VarianceProfile {
    /// `σ ≡ c`.
    Constant(f64),
    /// `σ(x, y) = 4xy`.
    Product,
    /// `σ(x, y) = 1 + x + y`.
    Linear,
    /// A piecewise-constant profile on a `g×g` grid of cells.
    Cells(CellGrid),
}

/// Cell values, row `i` covering `x ∈ [i/g, (i+1)/g)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellGrid {
    pub values: Vec<Vec<f64>>,
}

impl CellGrid {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let g = values.len();
        if g == 0 || values.iter().any(|r| r.len() != g) {
            return Err(Error::config("profile grid must be square and non-empty"));
        }
        for i in 0..g {
            for j in 0..g {
                let v = values[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::config(format!("profile value {v} at ({i},{j}) is not a non-negative number")));
                }
                if (v - values[j][i]).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(Error::config(format!("profile grid is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    fn cell(&self, t: f64) -> usize {
        let g = self.size();
        ((t * g as f64).floor().max(0.0) as usize).min(g - 1)
    }
}

impl VarianceProfile {
    /// Two-by-two cells alternating 1.5 and 0.5; every row integral is 1.
    pub fn checkerboard() -> Self {
        VarianceProfile::Cells(CellGrid {
            values: vec![vec![1.5, 0.5], vec![0.5, 1.5]],
        })
    }

    /// `builtin:const|xy|linear|checkerboard`, or a path to a JSON cell grid
    /// `{"values": [[…], …]}`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.strip_prefix("builtin:") {
            Some("const") => Ok(VarianceProfile::Constant(1.0)),
            Some("xy") => Ok(VarianceProfile::Product),
            Some("linear") => Ok(VarianceProfile::Linear),
            Some("checkerboard") => Ok(Self::checkerboard()),
            Some(other) => Err(Error::config(format!(
                "unknown builtin profile '{other}' (expected const, xy, linear or checkerboard)"
            ))),
            None => Self::from_file(spec),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let grid: CellGrid = serde_json::from_str(&text)?;
        Ok(VarianceProfile::Cells(CellGrid::new(grid.values)?))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            VarianceProfile::Constant(c) => *c,
            VarianceProfile::Product => 4.0 * x * y,
            VarianceProfile::Linear => 1.0 + x + y,
            VarianceProfile::Cells(g) => g.values[g.cell(x)][g.cell(y)],
        }
    }

    /// `σ` at the midpoints `((i+½)/m, (j+½)/m)`, row-major.
    pub fn discretize(&self, m: usize) -> Vec<f64> {
        let h = 1.0 / m as f64;
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(self.eval((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
            }
        }
        out
    }
}

impl fmt::Display for VarianceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarianceProfile::Constant(c) if *c == 1.0 => write!(f, "builtin:const"),
            VarianceProfile::Constant(c) => write!(f, "constant:{c}"),
            VarianceProfile::Product => write!(f, "builtin:xy"),
            VarianceProfile::Linear => write!(f, "builtin:linear"),
            VarianceProfile::Cells(_) if *self == Self::checkerboard() => write!(f, "builtin:checkerboard"),
            VarianceProfile::Cells(g) => write!(f, "grid:{}x{}", g.size(), g.size()),
        }
    }
}
