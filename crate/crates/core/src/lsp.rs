//! Slow fading and correlated large-scale parameters.
//!
//! Pathloss shapes follow the UMa/UMi forms of the 3D-extended ITU/3GPP
//! models with the 3D distance substituted throughout. Every coefficient is
//! configurable; the defaults below are documented starting points, not
//! measured values.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Uma,
    Umi,
}

/// Propagation condition selecting the LSP table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Los,
    Nlos,
    /// Outdoor-to-indoor.
    O2i,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Los, Condition::Nlos, Condition::O2i];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub d_2d: f64,
    pub d_3d: f64,
    pub h_bs: f64,
    pub h_ue: f64,
    pub indoor: bool,
    pub los: bool,
}

impl LinkGeometry {
    pub fn new(d_2d: f64, h_bs: f64, h_ue: f64, indoor: bool, los: bool) -> Self {
        LinkGeometry {
            d_2d,
            d_3d: d_2d.hypot(h_bs - h_ue),
            h_bs,
            h_ue,
            indoor,
            los,
        }
    }

    pub fn condition(&self) -> Condition {
        match (self.indoor, self.los) {
            (true, _) => Condition::O2i,
            (false, true) => Condition::Los,
            (false, false) => Condition::Nlos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossParams {
    pub scenario: Scenario,
    /// Average building height (m), UMa NLOS term.
    pub building_height: f64,
    /// Street width (m), UMa NLOS term.
    pub street_width: f64,
    /// NLOS UE-height correction c_h in dB/m, applied as −c_h·(h_ue − 1.5).
    pub ue_height_coeff: f64,
    /// Constant added to indoor links (dB).
    pub penetration_loss_db: f64,
    /// Environment height for the effective-antenna-height breakpoint (m).
    pub effective_env_height: f64,
    /// Validity range of the carrier in GHz.
    pub frequency_range_ghz: [f64; 2],
}

impl PathlossParams {
    pub fn default_for(scenario: Scenario) -> Self {
        PathlossParams {
            scenario,
            building_height: 20.0,
            street_width: 20.0,
            ue_height_coeff: match scenario {
                Scenario::Uma => 0.6,
                Scenario::Umi => 0.3,
            },
            penetration_loss_db: 20.0,
            effective_env_height: 1.0,
            frequency_range_ghz: [0.45, 6.0],
        }
    }

    /// Distance exponent n of the NLOS law: PL grows by 10·n·log₁₀2 per
    /// doubling of the 3D distance.
    pub fn nlos_exponent(&self, h_bs: f64) -> f64 {
        match self.scenario {
            Scenario::Uma => (43.42 - 3.1 * h_bs.log10()) / 10.0,
            Scenario::Umi => 3.67,
        }
    }

    fn breakpoint(&self, h_bs: f64, h_ue: f64, frequency: f64) -> f64 {
        let hb = (h_bs - self.effective_env_height).max(0.1);
        let hu = (h_ue - self.effective_env_height).max(0.1);
        4.0 * hb * hu * frequency / SPEED_OF_LIGHT
    }

    fn los_db(&self, d: f64, h_bs: f64, h_ue: f64, f_ghz: f64) -> f64 {
        let near = |d: f64| 22.0 * d.log10() + 28.0 + 20.0 * f_ghz.log10();
        let bp = self.breakpoint(h_bs, h_ue, f_ghz * 1e9);
        if d <= bp {
            near(d)
        } else {
            // slope 40 beyond the breakpoint, continuous at it
            near(bp) + 40.0 * (d / bp).log10()
        }
    }

    fn nlos_db(&self, d: f64, h_bs: f64, h_ue: f64, f_ghz: f64) -> f64 {
        let height_term = -self.ue_height_coeff * (h_ue - 1.5);
        let raw = match self.scenario {
            Scenario::Uma => {
                let (w, h) = (self.street_width, self.building_height);
                161.04 - 7.1 * w.log10() + 7.5 * h.log10()
                    - (24.37 - 3.7 * (h / h_bs).powi(2)) * h_bs.log10()
                    + (43.42 - 3.1 * h_bs.log10()) * (d.log10() - 3.0)
                    + 20.0 * f_ghz.log10()
                    - (3.2 * 17.625f64.log10().powi(2) - 4.97)
            }
            Scenario::Umi => 36.7 * d.log10() + 22.7 + 26.0 * f_ghz.log10(),
        };
        raw + height_term
    }
}

/// Basic pathloss in dB for `link` at `frequency` (Hz).
pub fn pathloss_db(params: &PathlossParams, link: &LinkGeometry, frequency: f64) -> Result<f64> {
    if !(link.d_3d > 0.0) {
        return Err(Error::DegenerateGeometry("zero 3D distance".into()));
    }
    let f_ghz = frequency / 1e9;
    let [lo, hi] = params.frequency_range_ghz;
    if !(lo..=hi).contains(&f_ghz) {
        return Err(Error::invalid(format!(
            "carrier {f_ghz} GHz outside [{lo}, {hi}] GHz"
        )));
    }
    let d = link.d_3d;
    let los = params.los_db(d, link.h_bs, link.h_ue, f_ghz);
    let mut pl = if link.los {
        los
    } else {
        params.nlos_db(d, link.h_bs, link.h_ue, f_ghz).max(los)
    };
    if link.indoor {
        pl += params.penetration_loss_db;
    }
    Ok(pl)
}

/// LOS probability min(1, exp(−(d − d0)/decay)) over the 2D distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LosProbability {
    pub d0: f64,
    pub decay: f64,
}

impl Default for LosProbability {
    fn default() -> Self {
        LosProbability {
            d0: 18.0,
            decay: 63.0,
        }
    }
}

impl LosProbability {
    pub fn probability(&self, d_2d: f64) -> f64 {
        (-(d_2d - self.d0) / self.decay).exp().min(1.0)
    }
}

/// Index of each LSP in the correlation matrix and draw vectors.
pub const SF: usize = 0;
pub const K: usize = 1;
pub const DS: usize = 2;
pub const ASA: usize = 3;
pub const ASD: usize = 4;
pub const ESA: usize = 5;
pub const ESD: usize = 6;
pub const N_LSP: usize = 7;
pub const LSP_NAMES: [&str; N_LSP] = ["sf", "k", "ds", "asa", "asd", "esa", "esd"];

/// Marginal of one LSP: Normal(μ, σ) in dB for SF/K, in log₁₀ units for
/// DS (seconds) and the spreads (degrees).
///
/// When `mu_table` is non-empty μ is interpolated piecewise-linearly over
/// the 2D distance (clamped at the ends) instead of using `mu`; in either
/// case `mu_height_slope·(h_ue − 1.5)` is added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marginal {
    pub mu: f64,
    pub sigma: f64,
    #[serde(default)]
    pub mu_table: Vec<[f64; 2]>,
    #[serde(default)]
    pub mu_height_slope: f64,
}

impl Marginal {
    pub fn fixed(mu: f64, sigma: f64) -> Self {
        Marginal {
            mu,
            sigma,
            mu_table: Vec::new(),
            mu_height_slope: 0.0,
        }
    }

    pub fn mean_at(&self, d_2d: f64, h_ue: f64) -> f64 {
        let base = if self.mu_table.is_empty() {
            self.mu
        } else {
            interp_clamped(&self.mu_table, d_2d)
        };
        base + self.mu_height_slope * (h_ue - 1.5)
    }
}

fn interp_clamped(table: &[[f64; 2]], x: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if x <= first[0] {
        return first[1];
    }
    if x >= last[0] {
        return last[1];
    }
    let i = table.partition_point(|p| p[0] <= x);
    let [x0, y0] = table[i - 1];
    let [x1, y1] = table[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LspDistributionSpec {
    pub sf: Marginal,
    pub k: Marginal,
    pub ds: Marginal,
    pub asa: Marginal,
    pub asd: Marginal,
    pub esa: Marginal,
    pub esd: Marginal,
    /// Cross-correlation in the order sf, k, ds, asa, asd, esa, esd.
    pub correlation: [[f64; N_LSP]; N_LSP],
    /// Decorrelation distance per LSP (m); 0 disables spatial correlation.
    pub decorrelation: [f64; N_LSP],
    /// Upper caps for (asa, asd, esa, esd) in degrees.
    pub spread_caps: [f64; 4],
}

impl LspDistributionSpec {
    pub fn marginals(&self) -> [&Marginal; N_LSP] {
        [
            &self.sf, &self.k, &self.ds, &self.asa, &self.asd, &self.esa, &self.esd,
        ]
    }

    /// Validates and factors the correlation matrix.
    pub fn prepare(&self) -> Result<PreparedLsp> {
        for (name, m) in LSP_NAMES.iter().zip(self.marginals()) {
            if !(m.sigma >= 0.0) || !m.mu.is_finite() {
                return Err(Error::config(*name, "sigma must be >= 0 and mu finite"));
            }
            if m.mu_table.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                return Err(Error::config(
                    format!("{name}.mu_table"),
                    "distances must be strictly increasing",
                ));
            }
        }
        if self.decorrelation.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::config("decorrelation", "distances must be >= 0"));
        }
        let chol = cholesky_psd(&self.correlation)?;
        Ok(PreparedLsp {
            spec: self.clone(),
            chol,
        })
    }
}

/// Lower-triangular L with L·Lᵀ = C for a PSD correlation matrix C.
/// Zero pivots are allowed (perfectly correlated parameters).
pub fn cholesky_psd(c: &[[f64; N_LSP]; N_LSP]) -> Result<[[f64; N_LSP]; N_LSP]> {
    const TOL: f64 = 1e-9;
    for i in 0..N_LSP {
        if (c[i][i] - 1.0).abs() > TOL {
            return Err(Error::config(
                "correlation",
                format!("diagonal entry {i} is not 1"),
            ));
        }
        for j in 0..N_LSP {
            if (c[i][j] - c[j][i]).abs() > TOL {
                return Err(Error::config(
                    "correlation",
                    format!("not symmetric at ({i}, {j})"),
                ));
            }
            if c[i][j].abs() > 1.0 + TOL {
                return Err(Error::config(
                    "correlation",
                    format!("|entry ({i}, {j})| > 1"),
                ));
            }
        }
    }
    let mut l = [[0.0; N_LSP]; N_LSP];
    for j in 0..N_LSP {
        let d = c[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -TOL {
            return Err(Error::config(
                "correlation",
                "matrix is not positive semi-definite",
            ));
        }
        let pivot = d.max(0.0).sqrt();
        l[j][j] = pivot;
        for i in (j + 1)..N_LSP {
            let r = c[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if pivot > 1e-7 {
                l[i][j] = r / pivot;
            } else if r.abs() > 1e-6 {
                return Err(Error::config(
                    "correlation",
                    "matrix is not positive semi-definite",
                ));
            }
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedLsp {
    pub spec: LspDistributionSpec,
    chol: [[f64; N_LSP]; N_LSP],
}

/// The seven large-scale parameters of one UE–site link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleParams {
    pub sf_db: f64,
    pub k_factor_db: f64,
    /// Delay spread (s).
    pub ds: f64,
    /// RMS spreads in degrees.
    pub asa: f64,
    pub asd: f64,
    pub esa: f64,
    pub esd: f64,
}

impl PreparedLsp {
    /// Maps independent standard normals through the correlation factor and
    /// the marginals.
    pub fn map(&self, z: &[f64; N_LSP], link: &LinkGeometry) -> LargeScaleParams {
        let mut y = [0.0; N_LSP];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..=i).map(|k| self.chol[i][k] * z[k]).sum();
        }
        let s = &self.spec;
        let val = |m: &Marginal, yi: f64| m.mean_at(link.d_2d, link.h_ue) + m.sigma * yi;
        let caps = s.spread_caps;
        LargeScaleParams {
            sf_db: val(&s.sf, y[SF]),
            k_factor_db: val(&s.k, y[K]),
            ds: 10f64.powf(val(&s.ds, y[DS])),
            asa: 10f64.powf(val(&s.asa, y[ASA])).min(caps[0]),
            asd: 10f64.powf(val(&s.asd, y[ASD])).min(caps[1]),
            esa: 10f64.powf(val(&s.esa, y[ESA])).min(caps[2]),
            esd: 10f64.powf(val(&s.esd, y[ESD])).min(caps[3]),
        }
    }

    /// Correlated normals before the marginal mapping (exposed for tests).
    pub fn correlate(&self, z: &[f64; N_LSP]) -> [f64; N_LSP] {
        let mut y = [0.0; N_LSP];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..=i).map(|k| self.chol[i][k] * z[k]).sum();
        }
        y
    }
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R) -> [f64; N_LSP] {
    let mut z = [0.0; N_LSP];
    for v in &mut z {
        *v = StandardNormal.sample(rng);
    }
    z
}

pub fn draw_lsps<R: Rng + ?Sized>(
    spec: &PreparedLsp,
    link: &LinkGeometry,
    rng: &mut R,
) -> LargeScaleParams {
    let z = standard_normals(rng);
    spec.map(&z, link)
}

/// One LSP draw per (UE, site). The independent normals come from the
/// `(master_seed, ue, site)` substream, except where a spatial field value
/// is supplied, which replaces the corresponding normal. All three cells of
/// a site call this with the same arguments and get identical results.
pub fn shared_site_lsps(
    spec: &PreparedLsp,
    link: &LinkGeometry,
    master_seed: u64,
    ue: u64,
    site: u64,
    field_values: &[Option<f64>; N_LSP],
) -> LargeScaleParams {
    let mut rng = crate::rng::substream(master_seed, crate::rng::Stream::Lsp, &[ue, site]);
    let mut z = standard_normals(&mut rng);
    for (zi, f) in z.iter_mut().zip(field_values) {
        if let Some(v) = f {
            *zi = *v;
        }
    }
    spec.map(&z, link)
}

/// Unit-variance Gaussian field on a regular grid with correlation
/// exp(−|Δx|/d)·exp(−|Δy|/d), built by first-order recursive filtering of
/// white noise along each axis.
#[derive(Debug, Clone)]
pub struct SpatialField {
    origin: (f64, f64),
    spacing: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn generate<R: Rng + ?Sized>(
        rng: &mut R,
        min: (f64, f64),
        max: (f64, f64),
        spacing: f64,
        decorrelation: f64,
    ) -> Self {
        let nx = ((max.0 - min.0) / spacing).ceil() as usize + 1;
        let ny = ((max.1 - min.1) / spacing).ceil() as usize + 1;
        let mut values: Vec<f64> = (0..nx * ny).map(|_| StandardNormal.sample(rng)).collect();
        let rho = (-spacing / decorrelation).exp();
        let innov = (1.0 - rho * rho).sqrt();
        for j in 0..ny {
            for i in 1..nx {
                let prev = values[j * nx + i - 1];
                values[j * nx + i] = rho * prev + innov * values[j * nx + i];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let prev = values[(j - 1) * nx + i];
                values[j * nx + i] = rho * prev + innov * values[j * nx + i];
            }
        }
        SpatialField {
            origin: min,
            spacing,
            nx,
            ny,
            values,
        }
    }

    /// Nearest grid value; positions outside the grid are clamped to it.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let i = ((x - self.origin.0) / self.spacing)
            .round()
            .clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((y - self.origin.1) / self.spacing)
            .round()
            .clamp(0.0, (self.ny - 1) as f64) as usize;
        self.values[j * self.nx + i]
    }
}

/// Correlation matrix from the upper-triangle pairs `(i, j, ρ)`.
fn correlation_from_pairs(pairs: &[(usize, usize, f64)]) -> [[f64; N_LSP]; N_LSP] {
    let mut c = [[0.0; N_LSP]; N_LSP];
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(i, j, r) in pairs {
        c[i][j] = r;
        c[j][i] = r;
    }
    c
}

/// ZSD mean max(floor, a·d/1000 + b) as a two-point clamped table.
fn esd_table(slope_per_km: f64, intercept: f64, floor: f64) -> Vec<[f64; 2]> {
    let d_floor = (intercept - floor) / -slope_per_km * 1000.0;
    vec![[0.0, intercept], [d_floor, floor]]
}

/// Default LSP tables for a scenario, indexed by [`Condition::index`].
pub fn default_lsp_tables(scenario: Scenario) -> [LspDistributionSpec; 3] {
    let m = Marginal::fixed;
    let caps = [104.0, 104.0, 52.0, 52.0];
    match scenario {
        Scenario::Uma => {
            let esd = |intercept: f64, sigma: f64| Marginal {
                mu: intercept,
                sigma,
                mu_table: esd_table(-2.1, intercept, -0.5),
                mu_height_slope: -0.01,
            };
            let los = LspDistributionSpec {
                sf: m(0.0, 4.0),
                k: m(9.0, 3.5),
                ds: m(-7.03, 0.66),
                asa: m(1.81, 0.20),
                asd: m(1.15, 0.28),
                esa: m(0.95, 0.16),
                esd: esd(0.75, 0.40),
                correlation: correlation_from_pairs(&[
                    (ASD, DS, 0.4),
                    (ASA, DS, 0.8),
                    (ASA, SF, -0.5),
                    (ASD, SF, -0.5),
                    (DS, SF, -0.4),
                    (ASA, K, -0.2),
                    (DS, K, -0.4),
                    (ESA, SF, -0.8),
                    (ESD, DS, -0.2),
                    (ESD, ASD, 0.5),
                    (ESD, ASA, -0.3),
                    (ESA, ASA, 0.4),
                ]),
                decorrelation: [37.0, 12.0, 30.0, 15.0, 18.0, 15.0, 15.0],
                spread_caps: caps,
            };
            let nlos = LspDistributionSpec {
                sf: m(0.0, 6.0),
                k: m(0.0, 0.0),
                ds: m(-6.44, 0.39),
                asa: m(1.87, 0.11),
                asd: m(1.41, 0.28),
                esa: m(1.26, 0.16),
                esd: esd(0.9, 0.49),
                correlation: correlation_from_pairs(&[
                    (ASD, DS, 0.4),
                    (ASA, DS, 0.6),
                    (ASD, SF, -0.6),
                    (DS, SF, -0.4),
                    (ASD, ASA, 0.4),
                    (ESA, SF, -0.4),
                    (ESD, DS, -0.5),
                    (ESD, ASD, 0.5),
                    (ESA, ASD, -0.1),
                ]),
                decorrelation: [50.0, 0.0, 40.0, 50.0, 50.0, 50.0, 50.0],
                spread_caps: caps,
            };
            let o2i = LspDistributionSpec {
                sf: m(0.0, 7.0),
                k: m(0.0, 0.0),
                ds: m(-6.62, 0.32),
                asa: m(1.76, 0.16),
                asd: m(1.25, 0.42),
                esa: m(1.01, 0.43),
                esd: esd(0.9, 0.49),
                correlation: correlation_from_pairs(&[
                    (ASD, DS, 0.4),
                    (ASA, DS, 0.4),
                    (ASA, SF, 0.2),
                    (ASD, SF, 0.2),
                    (DS, SF, -0.5),
                    (ESD, DS, -0.6),
                    (ESD, ASD, -0.2),
                    (ESD, ASA, -0.4),
                    (ESA, ASA, 0.5),
                    (ESD, ESA, 0.5),
                ]),
                decorrelation: [7.0, 0.0, 10.0, 17.0, 11.0, 25.0, 25.0],
                spread_caps: caps,
            };
            [los, nlos, o2i]
        }
        Scenario::Umi => {
            let esd = |sigma: f64| Marginal {
                mu: 0.2,
                sigma,
                mu_table: esd_table(-3.1, 0.2, -0.5),
                mu_height_slope: 0.0,
            };
            let los = LspDistributionSpec {
                sf: m(0.0, 3.0),
                k: m(9.0, 5.0),
                ds: m(-7.19, 0.40),
                asa: m(1.75, 0.19),
                asd: m(1.20, 0.43),
                esa: m(0.60, 0.16),
                esd: esd(0.35),
                correlation: correlation_from_pairs(&[
                    (ASD, DS, 0.5),
                    (ASA, DS, 0.8),
                    (ASA, SF, -0.4),
                    (ASD, SF, -0.5),
                    (DS, SF, -0.4),
                    (ASD, ASA, 0.4),
                    (ASD, K, -0.2),
                    (ASA, K, -0.3),
                    (DS, K, -0.7),
                    (SF, K, 0.5),
                    (ESA, DS, 0.2),
                    (ESD, ASD, 0.5),
                    (ESA, ASD, 0.3),
                ]),
                decorrelation: [10.0, 15.0, 7.0, 8.0, 8.0, 12.0, 12.0],
                spread_caps: caps,
            };
            let nlos = LspDistributionSpec {
                sf: m(0.0, 4.0),
                k: m(0.0, 0.0),
                ds: m(-6.89, 0.54),
                asa: m(1.84, 0.15),
                asd: m(1.41, 0.17),
                esa: m(0.88, 0.16),
                esd: esd(0.35),
                correlation: correlation_from_pairs(&[
                    (ASA, DS, 0.4),
                    (ASA, SF, -0.4),
                    (DS, SF, -0.7),
                    (ESD, DS, -0.5),
                    (ESD, ASD, 0.5),
                    (ESA, ASD, 0.5),
                    (ESA, ASA, 0.2),
                ]),
                decorrelation: [13.0, 0.0, 10.0, 9.0, 10.0, 10.0, 10.0],
                spread_caps: caps,
            };
            let o2i = LspDistributionSpec {
                sf: m(0.0, 7.0),
                k: m(0.0, 0.0),
                ds: m(-6.62, 0.32),
                asa: m(1.76, 0.16),
                asd: m(1.25, 0.42),
                esa: m(1.01, 0.43),
                esd: esd(0.35),
                correlation: correlation_from_pairs(&[
                    (ASD, DS, 0.4),
                    (ASA, DS, 0.4),
                    (ASA, SF, 0.2),
                    (ASD, SF, 0.2),
                    (DS, SF, -0.5),
                    (ESD, DS, -0.6),
                    (ESD, ASD, -0.2),
                    (ESD, ASA, -0.4),
                    (ESA, ASA, 0.5),
                    (ESD, ESA, 0.5),
                ]),
                decorrelation: [7.0, 0.0, 10.0, 17.0, 11.0, 25.0, 25.0],
                spread_caps: caps,
            };
            [los, nlos, o2i]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn uma() -> PathlossParams {
        PathlossParams::default_for(Scenario::Uma)
    }

    #[test]
    fn doubling_distance_adds_exponent() {
        let p = uma();
        let h_bs = 25.0;
        let a = LinkGeometry {
            d_2d: 0.0,
            d_3d: 200.0,
            h_bs,
            h_ue: 1.5,
            indoor: false,
            los: false,
        };
        let b = LinkGeometry { d_3d: 400.0, ..a };
        let pa = pathloss_db(&p, &a, 2e9).unwrap();
        let pb = pathloss_db(&p, &b, 2e9).unwrap();
        let expect = 10.0 * p.nlos_exponent(h_bs) * 2f64.log10();
        assert!((pb - pa - expect).abs() < 1e-9);
    }

    #[test]
    fn reference_height_has_no_correction() {
        let p = uma();
        let g = LinkGeometry {
            d_2d: 150.0,
            d_3d: 150.0,
            h_bs: 25.0,
            h_ue: 1.5,
            indoor: false,
            los: false,
        };
        let mut q = p.clone();
        q.ue_height_coeff = 5.0;
        assert_eq!(
            pathloss_db(&p, &g, 2e9).unwrap(),
            pathloss_db(&q, &g, 2e9).unwrap()
        );
    }

    #[test]
    fn uma_nlos_hand_value() {
        // 161.04 − 7.1·log10(20) + 7.5·log10(20) − (24.37 − 3.7·(20/25)²)·log10(25)
        // + (43.42 − 3.1·log10(25))·(log10(200) − 3) + 20·log10(2)
        // − (3.2·log10(17.625)² − 4.97), evaluated independently: 109.504244 dB
        let g = LinkGeometry {
            d_2d: 0.0,
            d_3d: 200.0,
            h_bs: 25.0,
            h_ue: 1.5,
            indoor: false,
            los: false,
        };
        let pl = pathloss_db(&uma(), &g, 2e9).unwrap();
        assert!((pl - 109.504_243_5).abs() < 1e-6, "{pl}");
    }

    #[test]
    fn indoor_adds_penetration() {
        let p = uma();
        let out = LinkGeometry::new(120.0, 25.0, 7.5, false, false);
        let ind = LinkGeometry {
            indoor: true,
            ..out
        };
        let d = pathloss_db(&p, &ind, 2e9).unwrap() - pathloss_db(&p, &out, 2e9).unwrap();
        assert!((d - 20.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let p = uma();
        let zero = LinkGeometry {
            d_2d: 0.0,
            d_3d: 0.0,
            h_bs: 25.0,
            h_ue: 25.0,
            indoor: false,
            los: true,
        };
        assert!(matches!(
            pathloss_db(&p, &zero, 2e9),
            Err(Error::DegenerateGeometry(_))
        ));
        let ok = LinkGeometry::new(100.0, 25.0, 1.5, false, true);
        assert!(pathloss_db(&p, &ok, 60e9).is_err());
    }

    #[test]
    fn pathloss_continuous_and_monotone() {
        for scenario in [Scenario::Uma, Scenario::Umi] {
            let p = PathlossParams::default_for(scenario);
            for los in [true, false] {
                for h_ue in [1.5, 4.5, 13.5, 22.5] {
                    let mut prev = None::<f64>;
                    let mut d = 10.0;
                    while d < 5000.0 {
                        let g = LinkGeometry {
                            d_2d: d,
                            d_3d: d,
                            h_bs: 25.0,
                            h_ue,
                            indoor: false,
                            los,
                        };
                        let pl = pathloss_db(&p, &g, 2e9).unwrap();
                        if let Some(q) = prev {
                            assert!(pl >= q - 1e-12, "not monotone at {d}");
                            assert!(pl - q < 0.05, "jump at {d}: {q} -> {pl}");
                        }
                        prev = Some(pl);
                        d *= 1.001;
                    }
                }
                // continuity in UE height
                let mut prev = None::<f64>;
                let mut h = 1.5;
                while h <= 22.5 {
                    let g = LinkGeometry {
                        d_2d: 300.0,
                        d_3d: 300.0,
                        h_bs: 25.0,
                        h_ue: h,
                        indoor: false,
                        los,
                    };
                    let pl = pathloss_db(&p, &g, 2e9).unwrap();
                    if let Some(q) = prev {
                        assert!((pl - q).abs() < 0.05, "height jump at {h}");
                    }
                    prev = Some(pl);
                    h += 0.01;
                }
            }
        }
    }

    #[test]
    fn los_probability_shape() {
        let p = LosProbability::default();
        assert_eq!(p.probability(5.0), 1.0);
        assert_eq!(p.probability(18.0), 1.0);
        assert!((p.probability(81.0) - (-1f64).exp()).abs() < 1e-15);
    }

    fn flat_spec() -> LspDistributionSpec {
        let mut s = default_lsp_tables(Scenario::Uma)[1].clone();
        s.correlation = correlation_from_pairs(&[]);
        s
    }

    #[test]
    fn zero_sigma_returns_means() {
        let mut s = flat_spec();
        for m in [
            &mut s.sf, &mut s.k, &mut s.ds, &mut s.asa, &mut s.asd, &mut s.esa, &mut s.esd,
        ] {
            m.sigma = 0.0;
        }
        let p = s.prepare().unwrap();
        let link = LinkGeometry::new(100.0, 25.0, 1.5, false, false);
        let mut rng = substream(1, Stream::Lsp, &[0]);
        let l = draw_lsps(&p, &link, &mut rng);
        assert_eq!(l.sf_db, 0.0);
        assert!((l.ds - 10f64.powf(-6.44)).abs() < 1e-20);
        assert!((l.asa - 10f64.powf(1.87)).abs() < 1e-12);
        assert!((l.esd - 10f64.powf(s.esd.mean_at(100.0, 1.5))).abs() < 1e-12);
    }

    #[test]
    fn perfect_correlation_gives_identical_normals() {
        let mut s = flat_spec();
        s.correlation[DS][ASD] = 1.0;
        s.correlation[ASD][DS] = 1.0;
        s.asd = s.ds.clone();
        let p = s.prepare().unwrap();
        let link = LinkGeometry::new(100.0, 25.0, 1.5, false, false);
        let mut rng = substream(2, Stream::Lsp, &[0]);
        for _ in 0..100 {
            let l = draw_lsps(&p, &link, &mut rng);
            assert!((l.ds.log10() - l.asd.log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn non_psd_rejected() {
        let mut s = flat_spec();
        // ρ(a,b)=ρ(a,c)=0.9 with ρ(b,c)=−0.9 is not PSD
        for (i, j, r) in [(DS, ASD, 0.9), (DS, ASA, 0.9), (ASD, ASA, -0.9)] {
            s.correlation[i][j] = r;
            s.correlation[j][i] = r;
        }
        assert!(matches!(s.prepare(), Err(Error::Config { .. })));
    }

    #[test]
    fn default_tables_are_psd() {
        for sc in [Scenario::Uma, Scenario::Umi] {
            for t in default_lsp_tables(sc) {
                t.prepare().unwrap();
            }
        }
    }

    #[test]
    fn esd_table_reproduces_clamped_line() {
        let m = &default_lsp_tables(Scenario::Uma)[1].esd;
        for d in [0.0, 100.0, 300.0, 595.0, 700.0, 2000.0] {
            let expect = (-2.1 * d / 1000.0 + 0.9f64).max(-0.5);
            assert!((m.mean_at(d, 1.5) - expect).abs() < 1e-12);
        }
        assert!((m.mean_at(100.0, 11.5) - m.mean_at(100.0, 1.5) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn shared_site_draw_is_reproducible() {
        let p = default_lsp_tables(Scenario::Uma)[1].prepare().unwrap();
        let link = LinkGeometry::new(250.0, 25.0, 1.5, false, false);
        let none = [None; N_LSP];
        let a = shared_site_lsps(&p, &link, 9, 4, 2, &none);
        let b = shared_site_lsps(&p, &link, 9, 4, 2, &none);
        assert_eq!(a, b);
        let c = shared_site_lsps(&p, &link, 9, 4, 3, &none);
        assert_ne!(a, c);
        let mut with_field = none;
        with_field[SF] = Some(0.5);
        let d = shared_site_lsps(&p, &link, 9, 4, 2, &with_field);
        assert!((d.sf_db - 6.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn field_has_unit_variance_and_decays() {
        let mut rng = substream(3, Stream::LspField, &[0]);
        let f = SpatialField::generate(&mut rng, (0.0, 0.0), (2000.0, 2000.0), 10.0, 50.0);
        let n = f.values.len() as f64;
        let mean = f.values.iter().sum::<f64>() / n;
        let var = f.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "var {var}");
        // lag-5 correlation along x ≈ exp(−50/50)
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for j in 0..f.ny {
            for i in 0..f.nx - 5 {
                acc += f.values[j * f.nx + i] * f.values[j * f.nx + i + 5];
                cnt += 1.0;
            }
        }
        let rho = acc / cnt;
        assert!((rho - (-1f64).exp()).abs() < 0.08, "rho {rho}");
    }
}
