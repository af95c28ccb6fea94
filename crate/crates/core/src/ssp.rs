//! Small-scale parameters: cluster delays, powers, angles, sub-path offsets,
//! random phases and cross-polarization ratios.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, AngleVector};
use crate::lsp::{Condition, LargeScaleParams};

/// Symmetric 20-ray offset set of the SCM/WINNER family.
pub const DEFAULT_OFFSETS: [f64; 20] = [
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129, 0.6797,
    -0.6797, 0.8844, -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551,
];

/// Where √κ enters the cross-polar entries of the polarization matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XprConvention {
    /// Off-diagonal entries scaled by √κ.
    AsDisplayed,
    /// Off-diagonal entries scaled by 1/√κ.
    Inverse,
}

/// Fixed sub-path offsets α_m and per-angle spread scalers (degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubpathOffsets {
    pub alphas: Vec<f64>,
    pub c_asd: f64,
    pub c_esd: f64,
    pub c_asa: f64,
    pub c_esa: f64,
}

impl SubpathOffsets {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::invalid("offset table is empty"));
        }
        let mut sorted: Vec<f64> = self.alphas.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        for i in 0..n {
            if (sorted[i] + sorted[n - 1 - i]).abs() > 1e-12 {
                return Err(Error::invalid("offset table is not symmetric about 0"));
            }
        }
        for c in [self.c_asd, self.c_esd, self.c_asa, self.c_esa] {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::invalid(
                    "spread scalers must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    pub fn mean_square(&self) -> f64 {
        self.alphas.iter().map(|a| a * a).sum::<f64>() / self.alphas.len() as f64
    }
}

/// Scenario block for small-scale generation of one propagation condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SspParams {
    pub n_clusters: usize,
    pub r_tau: f64,
    /// Per-cluster shadowing σ (dB).
    pub cluster_shadow_db: f64,
    pub xpr_mu_db: f64,
    pub xpr_sigma_db: f64,
    pub xpr_convention: XprConvention,
    pub offsets: SubpathOffsets,
    /// Shift of the departure zenith mean from the LOS zenith (degrees).
    pub zod_offset_deg: f64,
    /// Shift of the arrival zenith mean from the LOS zenith (degrees).
    pub zoa_offset_deg: f64,
    /// Split the two strongest clusters into three delayed sub-clusters.
    pub subclusters: bool,
}

impl SspParams {
    pub fn default_for(condition: Condition) -> SspParams {
        let offsets = |c_asa: f64, c_esa: f64| SubpathOffsets {
            alphas: DEFAULT_OFFSETS.to_vec(),
            c_asd: 5.0,
            c_esd: 3.0,
            c_asa,
            c_esa,
        };
        let (r_tau, xpr_mu, xpr_sigma, off) = match condition {
            Condition::Los => (2.5, -8.0, 4.0, offsets(11.0, 7.0)),
            Condition::Nlos => (2.3, -7.0, 3.0, offsets(15.0, 7.0)),
            Condition::O2i => (2.2, -9.0, 5.0, offsets(8.0, 3.0)),
        };
        SspParams {
            n_clusters: 20,
            r_tau,
            cluster_shadow_db: 3.0,
            xpr_mu_db: xpr_mu,
            xpr_sigma_db: xpr_sigma,
            xpr_convention: XprConvention::AsDisplayed,
            offsets: off,
            zod_offset_deg: 0.0,
            zoa_offset_deg: 0.0,
            subclusters: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::invalid("n_clusters must be at least 1"));
        }
        if !(self.r_tau > 0.0) {
            return Err(Error::invalid("r_tau must be positive"));
        }
        if !(self.cluster_shadow_db >= 0.0) || !(self.xpr_sigma_db >= 0.0) {
            return Err(Error::invalid("standard deviations must be non-negative"));
        }
        self.offsets.validate()
    }
}

/// τ'_n = −r_τ·ds·ln u_n, sorted and shifted so the first delay is 0.
pub fn generate_delays<R: Rng + ?Sized>(
    ds: f64,
    n_clusters: usize,
    r_tau: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut d: Vec<f64> = (0..n_clusters)
        .map(|_| {
            // u in (0, 1] keeps the logarithm finite
            let u = 1.0 - rng.random::<f64>();
            -r_tau * ds * u.ln()
        })
        .collect();
    d.sort_by(f64::total_cmp);
    let min = d[0];
    d.iter_mut().for_each(|t| *t -= min);
    d
}

/// Exponential power-delay profile with per-cluster log-normal shadowing,
/// normalized to unit sum.
pub fn generate_cluster_powers<R: Rng + ?Sized>(
    delays: &[f64],
    ds: f64,
    r_tau: f64,
    shadow_sigma_db: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut p: Vec<f64> = delays
        .iter()
        .map(|&tau| {
            let z: f64 = StandardNormal.sample(rng);
            (-tau * (r_tau - 1.0) / (r_tau * ds)).exp() * 10f64.powf(-shadow_sigma_db * z / 10.0)
        })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Target RMS spreads in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularSpreads {
    pub azimuth_deg: f64,
    pub zenith_deg: f64,
}

/// Power-weighted circular RMS spread (radians) of `angles` (radians).
fn circular_spread(angles: &[f64], powers: &[f64]) -> f64 {
    let total: f64 = powers.iter().sum();
    let mean = angles
        .iter()
        .zip(powers)
        .map(|(&a, &p)| Complex64::from_polar(p, a))
        .sum::<Complex64>()
        .arg();
    let var: f64 = angles
        .iter()
        .zip(powers)
        .map(|(&a, &p)| p * wrap_angle(a - mean).powi(2))
        .sum();
    (var / total).sqrt()
}

fn weighted_rms(x: &[f64], p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    let mean = x.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() / total;
    (x.iter()
        .zip(p)
        .map(|(a, b)| b * (a - mean).powi(2))
        .sum::<f64>()
        / total)
        .sqrt()
}

/// Scale `a ≥ 0` such that the circular spread of `center + a·x` hits
/// `target` (radians). Falls back to the best reachable scale.
fn fit_azimuth_scale(x: &[f64], p: &[f64], target: f64) -> f64 {
    let lin = weighted_rms(x, p);
    if target <= 0.0 || lin == 0.0 {
        return 0.0;
    }
    let spread = |a: f64| {
        let ang: Vec<f64> = x.iter().map(|v| a * v).collect();
        circular_spread(&ang, p)
    };
    // the wrapped spread saturates near π/√3; walk up until bracketed
    let mut lo = 0.0;
    let mut hi = target / lin;
    let mut best = (f64::INFINITY, hi);
    for _ in 0..40 {
        let s = spread(hi);
        if (s - target).abs() < best.0 {
            best = ((s - target).abs(), hi);
        }
        if s >= target {
            break;
        }
        lo = hi;
        hi *= 1.25;
    }
    if spread(hi) < target {
        return best.1;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if spread(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Random signs, power-ranked magnitudes and a small perturbation per cluster.
fn raw_deviations<R: Rng + ?Sized>(powers: &[f64], rng: &mut R, shape: fn(f64) -> f64) -> Vec<f64> {
    let pmax = powers.iter().cloned().fold(f64::MIN, f64::max);
    powers
        .iter()
        .map(|&p| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let pert: f64 = StandardNormal.sample(rng);
            sign * shape(p / pmax) + pert / 7.0
        })
        .collect()
}

/// Per-cluster directions around `mean` (whose zenith is shifted by
/// `elevation_mean_offset_deg`). Azimuths are scaled so the power-weighted
/// circular spread equals the target; zeniths are scaled linearly. Stronger
/// clusters lie closer to the mean.
pub fn generate_cluster_angles<R: Rng + ?Sized>(
    spreads: AngularSpreads,
    powers: &[f64],
    mean: AngleVector,
    rng: &mut R,
    elevation_mean_offset_deg: f64,
) -> Vec<AngleVector> {
    let x = raw_deviations(powers, rng, |r| (-r.ln()).sqrt());
    let y = raw_deviations(powers, rng, |r| -r.ln());
    let a = fit_azimuth_scale(&x, powers, spreads.azimuth_deg.max(0.0).to_radians());
    let y_rms = weighted_rms(&y, powers);
    let b = if y_rms > 0.0 {
        spreads.zenith_deg.max(0.0).to_radians() / y_rms
    } else {
        0.0
    };
    let zenith_mean = mean.zenith + elevation_mean_offset_deg.to_radians();
    x.iter()
        .zip(&y)
        .map(|(&xi, &yi)| AngleVector::reflected(mean.azimuth + a * xi, zenith_mean + b * yi))
        .collect()
}

/// Cluster-level spread that, combined with the sub-path offsets, yields
/// `target` overall (degrees).
pub fn compensated_spread(target_deg: f64, c_deg: f64, offsets: &SubpathOffsets) -> f64 {
    (target_deg * target_deg - c_deg * c_deg * offsets.mean_square())
        .max(0.0)
        .sqrt()
}

/// Departure/arrival pair of one cluster or sub-path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayAngles {
    pub departure: AngleVector,
    pub arrival: AngleVector,
}

/// θ_{n,m} = θ_n + c·α_m for each of the four angle kinds; zeniths reflected
/// into [0, π].
pub fn expand_subpaths(cluster: RayAngles, offsets: &SubpathOffsets) -> Vec<RayAngles> {
    let shift = |a: AngleVector, c_az: f64, c_ze: f64, alpha: f64| {
        AngleVector::reflected(
            a.azimuth + (c_az * alpha).to_radians(),
            a.zenith + (c_ze * alpha).to_radians(),
        )
    };
    offsets
        .alphas
        .iter()
        .map(|&alpha| RayAngles {
            departure: shift(cluster.departure, offsets.c_asd, offsets.c_esd, alpha),
            arrival: shift(cluster.arrival, offsets.c_asa, offsets.c_esa, alpha),
        })
        .collect()
}

/// Cross-polarization ratio and the four random phases [VV, VH, HV, HH].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossPolar {
    pub kappa: f64,
    pub phases: [f64; 4],
}

impl CrossPolar {
    /// 2×2 matrix indexed [rx pol][tx pol] with V = 0, H = 1.
    pub fn matrix(&self, convention: XprConvention) -> [[Complex64; 2]; 2] {
        let x = match convention {
            XprConvention::AsDisplayed => self.kappa.sqrt(),
            XprConvention::Inverse if self.kappa > 0.0 => 1.0 / self.kappa.sqrt(),
            XprConvention::Inverse => 0.0,
        };
        let e = |phi: f64| Complex64::from_polar(1.0, phi);
        [
            [e(self.phases[0]), e(self.phases[1]) * x],
            [e(self.phases[2]) * x, e(self.phases[3])],
        ]
    }
}

fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * TAU
}

pub fn draw_polarization<R: Rng + ?Sized>(
    rng: &mut R,
    xpr_mu_db: f64,
    xpr_sigma_db: f64,
) -> CrossPolar {
    let z: f64 = StandardNormal.sample(rng);
    let kappa = 10f64.powf((xpr_mu_db + xpr_sigma_db * z) / 10.0);
    let mut phases = [0.0; 4];
    for p in &mut phases {
        *p = uniform_phase(rng);
    }
    CrossPolar { kappa, phases }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subpath {
    pub power: f64,
    pub angles: RayAngles,
    pub polar: CrossPolar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub delay: f64,
    pub power: f64,
    pub subpaths: Vec<Subpath>,
}

/// Small-scale parameters of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    /// Ordered by delay; the first entry has delay 0.
    pub clusters: Vec<Cluster>,
    /// LOS ray phases [VV, HH].
    pub los_phases: [f64; 2],
    pub convention: XprConvention,
}

impl ClusterSet {
    pub fn total_power(&self) -> f64 {
        self.clusters
            .iter()
            .flat_map(|c| &c.subpaths)
            .map(|s| s.power)
            .sum()
    }
}

/// Delay offsets of the three sub-clusters, in units of the sub-cluster
/// delay step.
const SUBCLUSTER_DELAYS: [f64; 3] = [0.0, 1.28, 2.56];
const SUBCLUSTER_STEP_S: f64 = 3.91e-9;

/// Splits the two strongest clusters into three sub-clusters each. Sub-paths
/// are grouped by rank of |α_m| in 10/6/4 proportions of the ray count, the
/// smallest offsets going to the undelayed sub-cluster.
fn split_subclusters(clusters: Vec<Cluster>, offsets: &SubpathOffsets) -> Vec<Cluster> {
    let m = offsets.alphas.len();
    let mut rank: Vec<usize> = (0..m).collect();
    rank.sort_by(|&a, &b| {
        offsets.alphas[a]
            .abs()
            .total_cmp(&offsets.alphas[b].abs())
            .then(a.cmp(&b))
    });
    let n1 = (m * 10).div_ceil(20);
    let n2 = (m * 16).div_ceil(20);
    let group_of = |sub: usize| {
        let r = rank.iter().position(|&i| i == sub).unwrap_or(0);
        if r < n1 {
            0
        } else if r < n2 {
            1
        } else {
            2
        }
    };
    let mut strongest: Vec<usize> = (0..clusters.len()).collect();
    strongest.sort_by(|&a, &b| {
        clusters[b]
            .power
            .total_cmp(&clusters[a].power)
            .then(a.cmp(&b))
    });
    strongest.truncate(2);

    let mut out = Vec::new();
    for (i, c) in clusters.into_iter().enumerate() {
        if !strongest.contains(&i) || c.subpaths.len() != m {
            out.push(c);
            continue;
        }
        for (g, &d) in SUBCLUSTER_DELAYS.iter().enumerate() {
            let subpaths: Vec<Subpath> = c
                .subpaths
                .iter()
                .enumerate()
                .filter(|(k, _)| group_of(*k) == g)
                .map(|(_, s)| s.clone())
                .collect();
            if subpaths.is_empty() {
                continue;
            }
            out.push(Cluster {
                delay: c.delay + d * SUBCLUSTER_STEP_S,
                power: subpaths.iter().map(|s| s.power).sum(),
                subpaths,
            });
        }
    }
    out.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    out
}

/// Full small-scale draw for one link. `los_departure`/`los_arrival` are the
/// geometric LOS directions used as cluster-angle means.
pub fn generate_cluster_set<R: Rng + ?Sized>(
    params: &SspParams,
    lsp: &LargeScaleParams,
    los_departure: AngleVector,
    los_arrival: AngleVector,
    rng: &mut R,
) -> ClusterSet {
    let delays = generate_delays(lsp.ds, params.n_clusters, params.r_tau, rng);
    let powers =
        generate_cluster_powers(&delays, lsp.ds, params.r_tau, params.cluster_shadow_db, rng);
    let off = &params.offsets;
    let dep_spreads = AngularSpreads {
        azimuth_deg: compensated_spread(lsp.asd, off.c_asd, off),
        zenith_deg: compensated_spread(lsp.esd, off.c_esd, off),
    };
    let arr_spreads = AngularSpreads {
        azimuth_deg: compensated_spread(lsp.asa, off.c_asa, off),
        zenith_deg: compensated_spread(lsp.esa, off.c_esa, off),
    };
    let dep = generate_cluster_angles(
        dep_spreads,
        &powers,
        los_departure,
        rng,
        params.zod_offset_deg,
    );
    let arr = generate_cluster_angles(
        arr_spreads,
        &powers,
        los_arrival,
        rng,
        params.zoa_offset_deg,
    );
    let m = off.alphas.len() as f64;
    let clusters: Vec<Cluster> = delays
        .iter()
        .zip(&powers)
        .zip(dep.iter().zip(&arr))
        .map(|((&delay, &power), (&d, &a))| {
            let rays = expand_subpaths(
                RayAngles {
                    departure: d,
                    arrival: a,
                },
                off,
            );
            let subpaths = rays
                .into_iter()
                .map(|angles| Subpath {
                    power: power / m,
                    angles,
                    polar: draw_polarization(rng, params.xpr_mu_db, params.xpr_sigma_db),
                })
                .collect();
            Cluster {
                delay,
                power,
                subpaths,
            }
        })
        .collect();
    let los_phases = [uniform_phase(rng), uniform_phase(rng)];
    let clusters = if params.subclusters {
        split_subclusters(clusters, off)
    } else {
        clusters
    };
    ClusterSet {
        clusters,
        los_phases,
        convention: params.xpr_convention,
    }
}
