use serde::Serialize;

use super::profile::VarianceProfile;
use crate::algebra::C64;
use crate::error::{Error, Result};
use crate::freeness::{semicircular_moments, SemicircularModel};

/// Default discretisation of `[0,1]` for the predictor.
pub const DEFAULT_GRID: usize = 64;
pub const MAX_PREDICT_ORDER: usize = 12;
/// Moment change under grid refinement that triggers a warning.
pub const REFINEMENT_TOLERANCE: f64 = 1e-3;

/// `L^∞[0,1]` on `m` midpoints with `(ηf)(x) = (1/m) Σ_y σ(x,y) f(y)` and
/// `τ(f) = (1/m) Σ_x f(x)`.
#[derive(Clone, Debug)]
pub struct KernelModel {
    m: usize,
    kernel: Vec<f64>,
}

impl KernelModel {
    pub fn new(profile: &VarianceProfile, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("grid resolution must be positive"));
        }
        Ok(Self {
            m,
            kernel: profile.discretize(m),
        })
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    /// Row integrals `r(x) = (1/m) Σ_y σ(x,y)`.
    pub fn row_integrals(&self) -> Vec<f64> {
        self.kernel
            .chunks(self.m)
            .map(|row| row.iter().sum::<f64>() / self.m as f64)
            .collect()
    }
}

impl SemicircularModel for KernelModel {
    type Elem = Vec<f64>;

    fn one(&self) -> Vec<f64> {
        vec![1.0; self.m]
    }

    fn mul(&self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x * y).collect()
    }

    fn eta(&self, f: &Vec<f64>) -> Vec<f64> {
        let h = 1.0 / self.m as f64;
        self.kernel
            .chunks(self.m)
            .map(|row| row.iter().zip(f).map(|(s, v)| s * v).sum::<f64>() * h)
            .collect()
    }

    fn trace(&self, f: &Vec<f64>) -> C64 {
        C64::new(f.iter().sum::<f64>() / self.m as f64, 0.0)
    }

    fn adjoint_residual(&self, _: &Vec<f64>) -> f64 {
        0.0
    }

    fn distance_to_scalar(&self, f: &Vec<f64>, c: C64) -> f64 {
        f.iter().map(|x| (x - c.re).abs()).fold(c.im.abs(), f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub profile: String,
    pub grid: usize,
    /// `moments[k-1]` is the predicted `∫ t^k dμ(t)`.
    pub moments: Vec<f64>,
    /// Largest moment change when the grid is doubled.
    pub refinement_change: f64,
    pub warning: Option<String>,
}

fn moments_on(model: &KernelModel, k_max: usize) -> Result<Vec<f64>> {
    Ok(semicircular_moments(model, k_max)?[1..].iter().map(|z| z.re).collect())
}

/// Limiting moments of the band ensemble, from the operator-valued
/// semicircular element with covariance `η` on a grid of `m` midpoints.
pub fn predict_moments_on_grid(profile: &VarianceProfile, k_max: usize, m: usize) -> Result<Prediction> {
    if k_max == 0 || k_max > MAX_PREDICT_ORDER {
        return Err(Error::SizeLimit {
            what: "predicted order",
            value: k_max,
            min: 1,
            max: MAX_PREDICT_ORDER,
        });
    }
    let moments = moments_on(&KernelModel::new(profile, m)?, k_max)?;
    let refined = moments_on(&KernelModel::new(profile, 2 * m)?, k_max)?;
    let refinement_change = moments
        .iter()
        .zip(&refined)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let warning = (refinement_change > REFINEMENT_TOLERANCE).then(|| {
        format!("grid of {m} points is too coarse: doubling it moves a moment by {refinement_change:.3e}")
    });
    Ok(Prediction {
        profile: profile.to_string(),
        grid: m,
        moments,
        refinement_change,
        warning,
    })
}

pub fn predict_moments(profile: &VarianceProfile, k_max: usize) -> Result<Prediction> {
    predict_moments_on_grid(profile, k_max, DEFAULT_GRID)
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub profile: String,
    pub grid: usize,
    /// Whether `∫ σ(x, y) dy` is constant in `x`.
    pub holds: bool,
    pub row_integral_min: f64,
    pub row_integral_max: f64,
    pub range: f64,
    pub tolerance: f64,
    /// The common value `c` when the criterion holds; the limit law is then
    /// the semicircle of variance `c`.
    pub variance: Option<f64>,
}

pub fn corollary_criterion(profile: &VarianceProfile, m: usize, tolerance: f64) -> Result<CriterionReport> {
    let rows = KernelModel::new(profile, m)?.row_integrals();
    let lo = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let holds = hi - lo < tolerance;
    Ok(CriterionReport {
        profile: profile.to_string(),
        grid: m,
        holds,
        row_integral_min: lo,
        row_integral_max: hi,
        range: hi - lo,
        tolerance,
        variance: holds.then(|| rows.iter().sum::<f64>() / m as f64),
    })
}
