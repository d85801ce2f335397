use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// CDF of the semicircle law of variance `c` on `[−2√c, 2√c]`.
pub fn semicircle_cdf(t: f64, c: f64) -> f64 {
    let r = 2.0 * c.sqrt();
    if t <= -r {
        0.0
    } else if t >= r {
        1.0
    } else {
        0.5 + t * (4.0 * c - t * t).sqrt() / (4.0 * PI * c) + (t / r).asin() / PI
    }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `values` and the
/// semicircle law of variance `c`.
pub fn semicircle_distance(values: &[f64], c: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(c > 0.0) {
        return Err(Error::config(format!("semicircle variance must be positive, got {c}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = semicircle_cdf(x, c);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts normalised to a probability density.
    pub density: Vec<f64>,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; values outside the range are dropped
    /// from the counts but still count towards the density normalisation.
    pub fn new(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::config("histogram needs at least one bin and a non-empty range"));
        }
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            if (lo..=hi).contains(&v) {
                counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
            }
        }
        let scale = 1.0 / (values.len() as f64 * width);
        let density = counts.iter().map(|&c| c as f64 * scale).collect();
        Ok(Self { edges, counts, density })
    }

    /// Bins over the sample range, widened slightly so the extremes fall inside.
    pub fn auto(values: &[f64], bins: usize) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let pad = 1e-9 * (hi - lo).abs().max(1.0);
        Self::new(values, bins, lo - pad, hi + pad)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("left,right,count,density\n");
        for (i, (&c, &d)) in self.counts.iter().zip(&self.density).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", self.edges[i], self.edges[i + 1], c, d);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inverse_cdf(u: f64, c: f64) -> f64 {
        let r = 2.0 * c.sqrt();
        let (mut a, mut b) = (-r, r);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if semicircle_cdf(m, c) < u {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn cdf_shape() {
        assert_eq!(semicircle_cdf(-3.0, 1.0), 0.0);
        assert_eq!(semicircle_cdf(3.0, 1.0), 1.0);
        assert!((semicircle_cdf(0.0, 2.0) - 0.5).abs() < 1e-15);
        assert!((semicircle_cdf(2.0 * 2f64.sqrt() - 1e-12, 2.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn synthetic_semicircle_sample_is_close() {
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|i| inverse_cdf((i as f64 + 0.5) / n as f64, 1.0)).collect();
        assert!(semicircle_distance(&xs, 1.0).unwrap() < 0.02);
    }

    #[test]
    fn point_mass_is_half_away() {
        let d = semicircle_distance(&[0.0; 100], 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(matches!(semicircle_distance(&[], 1.0), Err(Error::EmptySample)));
    }

    #[test]
    fn histogram_counts_and_csv() {
        let h = Histogram::new(&[0.1, 0.2, 0.6, 1.0, 5.0], 2, 0.0, 1.0).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert!((h.density[0] - 0.8).abs() < 1e-12);
        let csv = h.to_csv();
        assert!(csv.starts_with("left,right,count,density\n0,0.5,2,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
