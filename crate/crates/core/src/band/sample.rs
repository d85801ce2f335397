use faer::{c64, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::profile::VarianceProfile;
use crate::error::{Error, Result};

/// Number of moments estimated per trial.
pub const MOMENT_ORDERS: usize = 8;

/// Hermitian `n×n` matrix with independent centred Gaussian entries,
/// `E|g_ij|² = σ(x_i, x_j)/n` at the midpoints `x_i = (i+½)/n`. Off the
/// diagonal the real and imaginary parts each carry half the variance; the
/// diagonal is real.
///
/// Draw order is fixed: row by row, the diagonal entry first, then
/// `(re, im)` for every `j > i`.
pub fn sample_band_matrix(n: usize, profile: &VarianceProfile, seed: u64) -> Result<Mat<c64>> {
    if n < 2 {
        return Err(Error::SizeLimit {
            what: "band matrix size",
            value: n,
            min: 2,
            max: usize::MAX,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = profile.discretize(n);
    let nf = n as f64;
    let mut g = Mat::<c64>::zeros(n, n);
    for i in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        g[(i, i)] = c64::new(z * (sigma[i * n + i] / nf).sqrt(), 0.0);
        for j in i + 1..n {
            let s = (sigma[i * n + j] / (2.0 * nf)).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let v = c64::new(re * s, im * s);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g)
}

/// `Re tr(AB)` without forming the product.
fn trace_of_product(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a[(i, j)], b[(j, i)]);
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// `(1/n) tr(G^k)` for `k = 1..=8` from the powers `G`, `G²`, `G³`, `G⁴`.
fn trace_moments(g: &Mat<c64>) -> [f64; MOMENT_ORDERS] {
    let nf = g.nrows() as f64;
    let g2 = g * g;
    let g3 = &g2 * g;
    let g4 = &g2 * &g2;
    let tr = |m: &Mat<c64>| (0..m.nrows()).map(|i| m[(i, i)].re).sum::<f64>();
    [
        tr(g),
        tr(&g2),
        tr(&g3),
        tr(&g4),
        trace_of_product(&g4, g),
        trace_of_product(&g3, &g3),
        trace_of_product(&g4, &g3),
        trace_of_product(&g4, &g4),
    ]
    .map(|t| t / nf)
}

fn eigen_moments(eigs: &[f64]) -> [f64; MOMENT_ORDERS] {
    let mut out = [0.0; MOMENT_ORDERS];
    for &l in eigs {
        let mut p = 1.0;
        for slot in out.iter_mut() {
            p *= l;
            *slot += p;
        }
    }
    out.map(|t| t / eigs.len() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSample {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub profile: String,
    /// `moments[k-1]` is the trial average of `(1/n) tr(G^k)`.
    pub moments: Vec<f64>,
    /// Standard errors of `moments` across trials.
    pub standard_errors: Vec<f64>,
    pub trial_moments: Vec<Vec<f64>>,
    /// Largest gap between trace-power and eigenvalue-power moments over all
    /// trials and orders.
    pub trace_eigen_discrepancy: f64,
    /// Ascending eigenvalues per trial.
    #[serde(skip)]
    pub eigenvalues: Vec<Vec<f64>>,
}

impl SpectralSample {
    /// All eigenvalues of all trials, ascending.
    pub fn pooled_eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.eigenvalues.concat();
        all.sort_by(f64::total_cmp);
        all
    }
}

/// Runs `trials` independent draws, trial `t` seeded with `seed + t`.
/// Trials run in parallel and are aggregated in trial order, so the result
/// depends only on the arguments.
pub fn empirical_spectrum(n: usize, profile: &VarianceProfile, trials: usize, seed: u64) -> Result<SpectralSample> {
    if trials == 0 {
        return Err(Error::SizeLimit {
            what: "trial count",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let runs: Vec<Result<([f64; MOMENT_ORDERS], Vec<f64>, f64)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let g = sample_band_matrix(n, profile, seed.wrapping_add(t))?;
            let by_trace = trace_moments(&g);
            let eigs = g
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
            let by_eigs = eigen_moments(&eigs);
            let gap = by_trace
                .iter()
                .zip(&by_eigs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok((by_trace, eigs, gap))
        })
        .collect();

    let mut trial_moments = Vec::with_capacity(trials);
    let mut eigenvalues = Vec::with_capacity(trials);
    let mut discrepancy: f64 = 0.0;
    for run in runs {
        let (m, e, gap) = run?;
        trial_moments.push(m.to_vec());
        eigenvalues.push(e);
        discrepancy = discrepancy.max(gap);
    }
    let tf = trials as f64;
    let mut moments = vec![0.0; MOMENT_ORDERS];
    let mut standard_errors = vec![0.0; MOMENT_ORDERS];
    for k in 0..MOMENT_ORDERS {
        let mean = trial_moments.iter().map(|m| m[k]).sum::<f64>() / tf;
        moments[k] = mean;
        if trials > 1 {
            let var = trial_moments.iter().map(|m| (m[k] - mean).powi(2)).sum::<f64>() / (tf - 1.0);
            standard_errors[k] = (var / tf).sqrt();
        }
    }
    Ok(SpectralSample {
        n,
        trials,
        seed,
        profile: profile.to_string(),
        moments,
        standard_errors,
        trial_moments,
        trace_eigen_discrepancy: discrepancy,
        eigenvalues,
    })
}
