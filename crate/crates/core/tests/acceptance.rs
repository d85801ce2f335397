//! End-to-end acceptance checks. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line; the process fails if any does.

use std::sync::Arc;
use std::time::{Duration, Instant};

use amalgam::algebra::{AlgebraContext, CMatrix, ContextSpec, MatrixAlgebra, C64};
use amalgam::band::{
    corollary_criterion, empirical_spectrum, predict_moments_on_grid, semicircle_distance, CellGrid, KernelModel,
    SpectralSample, VarianceProfile,
};
use amalgam::canonical::{CanonicalModel, PrescribedCumulants};
use amalgam::freeness::{
    check_factorization, check_restriction_theorem, check_semicircular_characterization, check_transitivity,
    freeness_oracle, lift_free_variables, random_restriction_series, random_tracial_eta, ChainContext, ContextEta,
    OracleConfig, SemicircularModel, Verdict,
};
use amalgam::partition::enumerate_nc;
use amalgam::series::{CumulantSeries, MomentSeries};
use amalgam::transform::{cumulants_from_moments, moments_from_cumulants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn context(ambient: usize, blocks: &[usize], groups: Option<Vec<Vec<usize>>>, r: &mut ChaCha8Rng) -> AlgebraContext {
    let raw: Vec<f64> = blocks.iter().map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    AlgebraContext::from_spec(&ContextSpec {
        ambient_dim: ambient,
        b_blocks: blocks.to_vec(),
        d_groups: groups,
        weights: Some(raw.iter().map(|w| w / total).collect()),
    })
    .unwrap()
}

fn random_series<K: amalgam::series::SeriesKind>(
    alg: &Arc<MatrixAlgebra>,
    n: usize,
    cap: usize,
    r: &mut ChaCha8Rng,
) -> amalgam::series::Series<K> {
    amalgam::series::Series::from_fn(alg.clone(), n, cap, |_, _| {
        (0..alg.dim())
            .map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect()
    })
    .unwrap()
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    match (out, limit) {
        (Ok(msg), Some(l)) if took > l => Err(format!("{msg}; took {took:.1?}, limit {l:?}")),
        (Ok(msg), _) => Ok(format!("{msg}; {took:.1?}")),
        (Err(e), _) => Err(format!("{e}; {took:.1?}")),
    }
}

fn partition_counts() -> Outcome {
    let want = [1, 1, 2, 5, 14, 42, 132, 429, 1430];
    let got: Vec<usize> = (0..=8).map(|n| enumerate_nc(n).unwrap().len()).collect();
    if got == want {
        Ok(format!("|NC(n)| for n = 0..8 is {got:?}"))
    } else {
        Err(format!("counts {got:?}"))
    }
}

/// Contexts with `dim B ≤ 4` and a sampled number of variables and order.
fn transform_instance(i: usize, r: &mut ChaCha8Rng) -> (Arc<MatrixAlgebra>, usize, usize) {
    let (ctx, n, cap) = match i % 5 {
        0 => (context(2, &[1, 1], None, r), 2, 6),
        1 => (context(3, &[1, 1, 1], None, r), 1, 6),
        2 => (context(2, &[2], None, r), 1, 6),
        3 => (context(4, &[1, 1, 1, 1], None, r), 1, 5),
        _ => (context(3, &[2, 1], None, r), 2, 4),
    };
    (ctx.b.clone(), n, cap)
}

fn transform_round_trip() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (alg, n, cap) = transform_instance(i, &mut r);
        let m: MomentSeries = random_series(&alg, n, cap, &mut r);
        let k = cumulants_from_moments(&m, cap).map_err(|e| e.to_string())?;
        let back = moments_from_cumulants(&k, cap).map_err(|e| e.to_string())?;
        worst = worst.max(m.max_abs_diff(&back).unwrap());
    }
    if worst < 1e-9 {
        Ok(format!("100 series, max entry error {worst:.2e}"))
    } else {
        Err(format!("max entry error {worst:.2e}"))
    }
}

fn canonical_fidelity() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (ctx, n, cap) = match i % 4 {
            0 => (context(2, &[1, 1], None, &mut r), 2, 5),
            1 => (context(3, &[1, 1, 1], None, &mut r), 2, 4),
            2 => (context(3, &[1, 1, 1], None, &mut r), 1, 5),
            _ => (context(1, &[1], None, &mut r), 2, 5),
        };
        let k: CumulantSeries = random_series(&ctx.b, n, cap, &mut r);
        let model = CanonicalModel::new(PrescribedCumulants::full(k.clone()).unwrap());
        let moments = model.moment_series(cap).map_err(|e| e.to_string())?;
        let extracted = cumulants_from_moments(&moments, cap).map_err(|e| e.to_string())?;
        worst = worst.max(k.max_abs_diff(&extracted).unwrap());
    }
    if worst < 1e-9 {
        Ok(format!("20 prescriptions recovered, max error {worst:.2e}"))
    } else {
        Err(format!("max error {worst:.2e}"))
    }
}

/// Contexts for the oracle: `dim B ≤ 4`, `dim D ≤ 2`, `D ≠ B`.
fn oracle_context(i: usize, r: &mut ChaCha8Rng) -> (AlgebraContext, usize) {
    match i % 5 {
        0 => (context(2, &[1, 1], None, r), 2),
        1 => (context(3, &[1, 1, 1], None, r), 1),
        2 => (context(4, &[1, 1, 1, 1], Some(vec![vec![0, 1], vec![2, 3]]), r), 1),
        3 => (context(2, &[2], None, r), 1),
        _ => (context(3, &[1, 2], None, r), 1),
    }
}

fn oracle_moments(k: &CumulantSeries) -> Result<MomentSeries, String> {
    let model = CanonicalModel::new(PrescribedCumulants::full(k.clone()).map_err(|e| e.to_string())?);
    model.moment_series(6).map_err(|e| e.to_string())
}

fn forward_theorem() -> Outcome {
    let mut r = rng(4);
    let config = OracleConfig::default();
    let mut worst: f64 = 0.0;
    let mut words = 0;
    for i in 0..10 {
        let (ctx, n) = oracle_context(i, &mut r);
        let data: CumulantSeries = random_series(&ctx.d, n, 6, &mut r);
        let lifted = lift_free_variables(&data, &ctx).map_err(|e| e.to_string())?;
        let report = freeness_oracle(&oracle_moments(&lifted)?, &ctx, &config).map_err(|e| e.to_string())?;
        if report.verdict != Verdict::Pass {
            return Err(format!("instance {i}: {:?} with max norm {:.2e}", report.verdict, report.max_norm));
        }
        worst = worst.max(report.max_norm);
        words += report.words_tested;
    }
    if worst < 1e-8 {
        Ok(format!("10 lifted instances, {words} words, max norm {worst:.2e}"))
    } else {
        Err(format!("max norm {worst:.2e}"))
    }
}

/// Free variables plus a perturbation scaled so that the factorization
/// deviation is just above 0.1 (the deviation is linear and vanishes on the
/// free part).
fn converse_theorem() -> Outcome {
    let mut r = rng(5);
    let config = OracleConfig::default();
    let mut weakest = f64::INFINITY;
    for i in 0..10 {
        let (ctx, n) = oracle_context(i, &mut r);
        let data: CumulantSeries = random_series(&ctx.d, n, 6, &mut r);
        let free = lift_free_variables(&data, &ctx).unwrap();
        let noise: CumulantSeries = random_series(&ctx.b, n, 6, &mut r);
        let scale = 0.1001 / check_factorization(&noise, &ctx.f, 6).unwrap().max_deviation;
        let k = CumulantSeries::from_fn(ctx.b.clone(), n, 6, |idx, basis| {
            free.value(idx, basis)
                .iter()
                .zip(noise.value(idx, basis))
                .map(|(a, b)| a + b * scale)
                .collect()
        })
        .unwrap();
        let dev = check_factorization(&k, &ctx.f, 6).unwrap().max_deviation;
        if dev < 0.1 {
            return Err(format!("instance {i}: constructed deviation {dev:.3}"));
        }
        let report = freeness_oracle(&oracle_moments(&k)?, &ctx, &config).map_err(|e| e.to_string())?;
        weakest = weakest.min(report.max_norm);
        if report.max_norm < 1e-3 {
            return Err(format!("instance {i}: no word reached 1e-3 (max {:.2e})", report.max_norm));
        }
    }
    Ok(format!("10 series with deviation 0.1, weakest detecting word {weakest:.2e}"))
}

fn fourth_moment_identity() -> Outcome {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let k = 2 + i % 4;
        let uniform = AlgebraContext::from_spec(&ContextSpec {
            ambient_dim: k,
            b_blocks: vec![1; k],
            d_groups: None,
            weights: None,
        })
        .unwrap();
        let eta = ContextEta::from_coordinates(&uniform, random_tracial_eta(k, i % 2 == 0, &mut r)).unwrap();
        let basis: Vec<_> = (0..k).map(|a| uniform.b.unit(a)).collect();
        let rep = check_semicircular_characterization(&eta, &basis, 4).map_err(|e| e.to_string())?;
        worst = worst.max(rep.order4.deviation);

        // The same identity for the band predictor on a random cell profile.
        let g = 2 + i % 3;
        let mut cells = vec![vec![0.0; g]; g];
        for x in 0..g {
            for y in x..g {
                let v = r.random_range(0.0..2.0);
                cells[x][y] = v;
                cells[y][x] = v;
            }
        }
        let profile = VarianceProfile::Cells(CellGrid::new(cells).unwrap());
        let m = 4 * g;
        let model = KernelModel::new(&profile, m).unwrap();
        let eta1 = model.eta(&model.one());
        let identity = model.trace(&model.eta(&eta1)) + model.trace(&model.mul(&eta1, &eta1));
        let pred = predict_moments_on_grid(&profile, 4, m).unwrap();
        worst = worst.max((pred.moments[3] - identity.re).abs());
    }

    let ctx = AlgebraContext::from_spec(&ContextSpec {
        ambient_dim: 2,
        b_blocks: vec![1, 1],
        d_groups: None,
        weights: None,
    })
    .unwrap();
    let map = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]));
    let eta = ContextEta::from_coordinates(&ctx, map).unwrap();
    let basis: Vec<_> = (0..2).map(|a| ctx.b.unit(a)).collect();
    let rep = check_semicircular_characterization(&eta, &basis, 4).unwrap();
    let (m2, m4) = (rep.moments[0], rep.moments[1]);
    let example_ok = (m2 - 1.5).abs() < 1e-12 && (m4 - 5.0).abs() < 1e-12 && (2.0 * m2 * m2 - 4.5).abs() < 1e-12;
    if worst < 1e-9 && example_ok {
        Ok(format!("40 random covariances, max deviation {worst:.2e}; example m2 = {m2}, m4 = {m4}"))
    } else {
        Err(format!("max deviation {worst:.2e}; example m2 = {m2}, m4 = {m4}"))
    }
}

struct BandRuns {
    samples: Vec<(&'static str, VarianceProfile, SpectralSample)>,
    elapsed: Duration,
}

const BAND_N: usize = 512;
const BAND_TRIALS: usize = 20;
const BAND_SEED: u64 = 7;

fn band_runs() -> BandRuns {
    let start = Instant::now();
    let profiles = [
        ("const", VarianceProfile::Constant(1.0)),
        ("xy", VarianceProfile::Product),
        ("linear", VarianceProfile::Linear),
        ("checkerboard", VarianceProfile::checkerboard()),
    ];
    let samples = profiles
        .into_iter()
        .map(|(name, p)| {
            let s = empirical_spectrum(BAND_N, &p, BAND_TRIALS, BAND_SEED).unwrap();
            (name, p, s)
        })
        .collect();
    BandRuns {
        samples,
        elapsed: start.elapsed(),
    }
}

fn desk_scale_corollary(runs: &BandRuns) -> Outcome {
    let (_, _, c) = &runs.samples[0];
    let (_, xy_profile, xy) = &runs.samples[1];
    let ks = semicircle_distance(&c.pooled_eigenvalues(), 1.0).map_err(|e| e.to_string())?;
    let (m2, m4) = (c.moments[1], c.moments[3]);
    let xy_m4 = xy.moments[3];
    let criterion = corollary_criterion(xy_profile, 64, 1e-9).unwrap().holds;
    // Two of the four runs belong to this criterion.
    let elapsed = runs.elapsed / 2;
    let ok = ks < 0.05
        && (m2 - 1.0).abs() < 0.05
        && (m4 - 2.0).abs() < 0.1
        && (xy_m4 - 8.0 / 3.0).abs() < 0.1
        && !criterion
        && elapsed < Duration::from_secs(120)
        && c.trace_eigen_discrepancy < 1e-9
        && xy.trace_eigen_discrepancy < 1e-9;
    let msg = format!(
        "const: KS {ks:.4}, m2 {m2:.4}, m4 {m4:.4}; xy: m4 {xy_m4:.4}, criterion {criterion}; sampling {elapsed:.1?}"
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn cross_validation(runs: &BandRuns) -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, p, s) in &runs.samples {
        let pred = predict_moments_on_grid(p, 8, BAND_N).unwrap();
        for k in [2, 4, 6, 8] {
            let gap = (s.moments[k - 1] - pred.moments[k - 1]).abs();
            let ratio = gap / s.standard_errors[k - 1];
            worst_ratio = worst_ratio.max(ratio);
            if ratio >= 5.0 {
                return Err(format!(
                    "{name} m{k}: sample {:.5} vs predicted {:.5}, {ratio:.2} standard errors",
                    s.moments[k - 1],
                    pred.moments[k - 1]
                ));
            }
        }
        parts.push(format!("{name} m4 {:.4}/{:.4}", s.moments[3], pred.moments[3]));
    }
    Ok(format!("{}; worst gap {worst_ratio:.2} standard errors", parts.join(", ")))
}

fn restriction_theorem() -> Outcome {
    let mut r = rng(9);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (ctx, n, cap) = match i % 4 {
            0 => (context(3, &[1, 1, 1], Some(vec![vec![0, 2], vec![1]]), &mut r), 2, 4),
            1 => (context(4, &[1, 2, 1], Some(vec![vec![0, 2], vec![1]]), &mut r), 1, 4),
            2 => (context(2, &[1, 1], None, &mut r), 2, 4),
            _ => (context(3, &[2, 1], None, &mut r), 1, 4),
        };
        let s = random_restriction_series(&ctx, n, cap, &mut r).unwrap();
        let rep = check_restriction_theorem(&s, &ctx, cap).map_err(|e| e.to_string())?;
        if rep.verdict != Verdict::Pass {
            return Err(format!("instance {i}: {rep:?}"));
        }
        worst = worst.max(rep.max_deviation.unwrap_or(f64::INFINITY));
    }
    if worst < 1e-9 {
        Ok(format!("100 series, max relative deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e}"))
    }
}

fn transitivity() -> Outcome {
    let chain = ChainContext::diagonal(4, &[vec![0, 1], vec![2, 3]], &[vec![0, 1, 2, 3]], &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut r = rng(10);
    let bottom: CumulantSeries = random_series(&chain.b, 2, 4, &mut r);
    let k_d = chain.lift_from_bottom(&bottom).unwrap();
    let good = check_transitivity(&chain, &k_d, 4).map_err(|e| e.to_string())?;
    let middle: CumulantSeries = random_series(&chain.c, 2, 4, &mut r);
    let broken = check_transitivity(&chain, &chain.lift_from_middle(&middle).unwrap(), 4).map_err(|e| e.to_string())?;
    let detected = broken.verdict != Verdict::Pass && !broken.c_over_b.passes;
    let msg = format!(
        "chain: D/C {:.1e}, C/B {:.1e}, D/B {:.1e}; broken middle: C/B deviation {:.2e}, verdict {:?}",
        good.d_over_c.max_deviation,
        good.c_over_b.max_deviation,
        good.d_over_b.max_deviation,
        broken.c_over_b.max_deviation,
        broken.verdict
    );
    if good.all_pass() && good.verdict == Verdict::Pass && detected {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a filter
    // argument that matches nothing here skips the suite.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "partition counts", timed(Some(Duration::from_secs(5)), partition_counts)),
        (2, "transform round trip", timed(Some(Duration::from_secs(60)), transform_round_trip)),
        (3, "canonical model fidelity", timed(None, canonical_fidelity)),
        (4, "factorization implies freeness", timed(None, forward_theorem)),
        (5, "non-factorized series are not free", timed(None, converse_theorem)),
        (6, "fourth-moment identity", timed(None, fourth_moment_identity)),
    ];
    let runs = band_runs();
    results.push((7, "semicircle law at desk scale", desk_scale_corollary(&runs)));
    results.push((8, "predictor against Monte Carlo", cross_validation(&runs)));
    results.push((9, "restriction theorem", timed(None, restriction_theorem)));
    results.push((10, "transitivity", timed(None, transitivity)));

    let mut failed = 0;
    for (i, name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("criterion {i:>2} PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {i:>2} FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of {} acceptance criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
