//! Monte-Carlo checks of the large-scale parameter generator.

use statrs::distribution::{ContinuousCDF, Normal};

use chan3d::lsp::{
    self, Condition, LargeScaleParams, LinkGeometry, LspDistributionSpec, Scenario, N_LSP,
};
use chan3d::rng::{substream, Stream};

fn uncapped(mut spec: LspDistributionSpec) -> LspDistributionSpec {
    spec.spread_caps = [f64::INFINITY; 4];
    spec
}

fn link(condition: Condition) -> LinkGeometry {
    match condition {
        Condition::Los => LinkGeometry::new(150.0, 25.0, 1.5, false, true),
        Condition::Nlos => LinkGeometry::new(150.0, 25.0, 1.5, false, false),
        Condition::O2i => LinkGeometry::new(150.0, 25.0, 7.5, true, false),
    }
}

/// SF and K in dB, DS and spreads as log10.
fn log_values(p: &LargeScaleParams) -> [f64; N_LSP] {
    [
        p.sf_db,
        p.k_factor_db,
        p.ds.log10(),
        p.asa.log10(),
        p.asd.log10(),
        p.esa.log10(),
        p.esd.log10(),
    ]
}

fn draws(
    spec: &LspDistributionSpec,
    geometry: &LinkGeometry,
    n: usize,
    seed: u64,
) -> Vec<[f64; N_LSP]> {
    let prepared = spec.prepare().unwrap();
    let mut rng = substream(seed, Stream::Lsp, &[u64::MAX]);
    (0..n)
        .map(|_| log_values(&lsp::draw_lsps(&prepared, geometry, &mut rng)))
        .collect()
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn sample_correlation(samples: &[[f64; N_LSP]], i: usize, j: usize) -> f64 {
    let (mi, si) = mean_sd(samples.iter().map(|s| s[i]));
    let (mj, sj) = mean_sd(samples.iter().map(|s| s[j]));
    let n = samples.len() as f64;
    samples
        .iter()
        .map(|s| (s[i] - mi) * (s[j] - mj))
        .sum::<f64>()
        / (n - 1.0)
        / (si * sj)
}

#[test]
fn cross_correlation_matches_configuration() {
    for scenario in [Scenario::Uma, Scenario::Umi] {
        for (c, spec) in Condition::ALL.iter().zip(lsp::default_lsp_tables(scenario)) {
            let spec = uncapped(spec);
            let samples = draws(&spec, &link(*c), 100_000, 21);
            let sigmas: Vec<f64> = spec.marginals().iter().map(|m| m.sigma).collect();
            for i in 0..N_LSP {
                for j in 0..i {
                    if sigmas[i] == 0.0 || sigmas[j] == 0.0 {
                        continue;
                    }
                    let got = sample_correlation(&samples, i, j);
                    let want = spec.correlation[i][j];
                    assert!(
                        (got - want).abs() <= 0.03,
                        "{scenario:?} {c:?} ({}, {}): {got} vs {want}",
                        lsp::LSP_NAMES[i],
                        lsp::LSP_NAMES[j]
                    );
                }
            }
        }
    }
}

#[test]
fn shadow_fading_moments() {
    for (c, spec) in Condition::ALL
        .iter()
        .zip(lsp::default_lsp_tables(Scenario::Uma))
    {
        let samples = draws(&spec, &link(*c), 100_000, 4);
        let (mean, sd) = mean_sd(samples.iter().map(|s| s[lsp::SF]));
        assert!((mean - spec.sf.mu).abs() <= 0.1, "{c:?}: mean {mean}");
        assert!((sd / spec.sf.sigma - 1.0).abs() <= 0.02, "{c:?}: sd {sd}");
    }
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    // the alternating series stalls near 0, where the p-value is 1 to 1e-5
    if lambda < 0.3 {
        return 1.0;
    }
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

fn ks_statistic(mut xs: Vec<f64>, dist: &Normal) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn marginals_survive_correlation_mixing() {
    let c = Condition::Nlos;
    let spec = uncapped(lsp::default_lsp_tables(Scenario::Uma)[c.index()].clone());
    let geometry = link(c);
    let n = 10_000;
    let samples = draws(&spec, &geometry, n, 8);
    for (i, m) in spec.marginals().iter().enumerate() {
        if m.sigma == 0.0 {
            continue;
        }
        let dist = Normal::new(m.mean_at(geometry.d_2d, geometry.h_ue), m.sigma).unwrap();
        let d = ks_statistic(samples.iter().map(|s| s[i]).collect(), &dist);
        let p = ks_p_value(d, n);
        assert!(p > 0.01, "{}: D = {d}, p = {p}", lsp::LSP_NAMES[i]);
    }
}

#[test]
fn ks_p_value_sanity() {
    assert!(ks_p_value(0.0, 100) > 0.999);
    assert!(ks_p_value(0.5, 100) < 1e-10);
    // tabulated 5% critical value 1.358/√n
    assert!((ks_p_value(1.358 / (10_000f64).sqrt(), 10_000) - 0.05).abs() < 0.003);
}

#[test]
fn different_sites_are_independent() {
    let spec = lsp::default_lsp_tables(Scenario::Uma)[Condition::Nlos.index()]
        .prepare()
        .unwrap();
    let geometry = link(Condition::Nlos);
    let none = [None; N_LSP];
    let pairs: Vec<([f64; N_LSP], [f64; N_LSP])> = (0..10_000u64)
        .map(|ue| {
            let a = lsp::shared_site_lsps(&spec, &geometry, 17, ue, 0, &none);
            let b = lsp::shared_site_lsps(&spec, &geometry, 17, ue, 1, &none);
            (log_values(&a), log_values(&b))
        })
        .collect();
    for i in [lsp::SF, lsp::DS, lsp::ASA, lsp::ASD, lsp::ESA, lsp::ESD] {
        let joined: Vec<[f64; N_LSP]> = pairs
            .iter()
            .map(|(a, b)| {
                let mut row = [0.0; N_LSP];
                row[0] = a[i];
                row[1] = b[i];
                row
            })
            .collect();
        let rho = sample_correlation(&joined, 0, 1);
        assert!(rho.abs() < 0.05, "{}: ρ = {rho}", lsp::LSP_NAMES[i]);
    }
}

#[test]
fn same_site_draws_are_shared_and_reproducible() {
    let spec = lsp::default_lsp_tables(Scenario::Umi)[Condition::Los.index()]
        .prepare()
        .unwrap();
    let geometry = link(Condition::Los);
    let none = [None; N_LSP];
    let a = lsp::shared_site_lsps(&spec, &geometry, 3, 12, 4, &none);
    let b = lsp::shared_site_lsps(&spec, &geometry, 3, 12, 4, &none);
    assert_eq!(a, b);
}
