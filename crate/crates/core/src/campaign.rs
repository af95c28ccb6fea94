//! Batch driver: drops UEs, generates slow fading and (phase 2) fast
//! fading for every UE–cell link, attaches, computes calibration metrics
//! and writes CDF and report files per sweep point.
//!
//! Work that does not depend on the sweep point (drops, LOS states,
//! pathloss, LSPs) is done once. All randomness comes from per-entity
//! substreams, so results do not depend on the worker count.

use std::collections::HashMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::antenna::{Antenna, ArrayGeometry, ElementPattern};
use crate::calib::{self, DropReport, SmallScaleMetrics};
use crate::config::{DropMode, RunConfig, UePattern};
use crate::deploy::{self, Layout, Ue, CELLS_PER_SITE};
use crate::error::{Error, Result};
use crate::geom::{self, AngleVector, Rotation};
use crate::lsp::{
    self, Condition, LargeScaleParams, LinkGeometry, PreparedLsp, SpatialField, N_LSP,
};
use crate::rng::{substream, Stream};
use crate::ssp::{self, ClusterSet};
use crate::synth::{LinkContext, PreparedLink, Space};

/// Sweep-independent state of one UE–site link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteLink {
    pub geometry: LinkGeometry,
    pub pathloss_db: f64,
    pub lsp: LargeScaleParams,
    pub los_departure: AngleVector,
    pub los_arrival: AngleVector,
}

impl SiteLink {
    /// Linear Rice factor; zero unless the link is outdoor LOS.
    pub fn k_linear(&self) -> f64 {
        if self.geometry.condition() == Condition::Los {
            10f64.powf(self.lsp.k_factor_db / 10.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub downtilt_deg: f64,
    pub d_v: f64,
}

impl SweepPoint {
    pub fn tag(&self) -> String {
        format!("tilt{}_dv{}", self.downtilt_deg, self.d_v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub point: SweepPoint,
    pub reports: Vec<DropReport>,
}

impl SweepResult {
    pub fn geometry_factors(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.gf_db).collect()
    }

    pub fn coupling_gains(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.cl_db).collect()
    }
}

/// Sweep-independent part of a run.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub config: RunConfig,
    pub layout: Layout,
    pub ues: Vec<Ue>,
    /// Indexed [ue][site].
    pub links: Vec<Vec<SiteLink>>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

impl Campaign {
    /// Layout, drops and per-link slow fading. `workers = 0` uses all cores.
    pub fn prepare(config: &RunConfig, workers: usize) -> Result<Campaign> {
        config.validate()?;
        let pool = pool(workers)?;
        pool.install(|| Campaign::prepare_inner(config))
    }

    fn prepare_inner(config: &RunConfig) -> Result<Campaign> {
        let lc = &config.layout;
        let mut layout = deploy::hex_layout(lc.n_rings, lc.isd, lc.h_bs, lc.p_tx_dbm)?;
        if lc.wraparound {
            layout = layout.with_wraparound(lc.n_rings)?;
        }
        for site in &mut layout.sites {
            for cell in &mut site.cells {
                cell.mech_tilt_deg = config.antenna.mech_tilt_deg;
            }
        }
        let ues = match config.drop_mode {
            DropMode::ThreeD => deploy::drop_ues(config.n_ue, &layout, &config.drop, config.seed)?,
            DropMode::Legacy2d => {
                deploy::legacy_2d_drop(config.n_ue, &layout, &config.drop, config.seed)?
            }
        };
        let prepared: Vec<PreparedLsp> = Condition::ALL
            .iter()
            .map(|&c| config.lsp.get(c).prepare())
            .collect::<Result<_>>()?;

        // geometry, LOS state and pathloss per (ue, site)
        let n_sites = layout.n_sites();
        let base: Vec<Vec<(LinkGeometry, f64, AngleVector, AngleVector)>> = ues
            .par_iter()
            .map(|ue| {
                (0..n_sites)
                    .map(|s| {
                        let bs = layout.site_position_for(s, ue.position);
                        let d_2d = (bs.x - ue.position.x).hypot(bs.y - ue.position.y);
                        let mut rng =
                            substream(config.seed, Stream::LinkState, &[ue.id as u64, s as u64]);
                        let los = rng.random::<f64>() < config.los_probability.probability(d_2d);
                        let g = LinkGeometry::new(d_2d, lc.h_bs, ue.position.z, ue.indoor, los);
                        let pl = lsp::pathloss_db(&config.pathloss, &g, config.carrier_hz)?;
                        let (dep, arr) = geom::los_angles(bs, ue.position)?;
                        Ok((g, pl, dep, arr))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let fields = if lc.spatial_correlation {
            spatial_field_values(config, &ues, n_sites, &base)
        } else {
            HashMap::new()
        };

        let links = ues
            .par_iter()
            .zip(&base)
            .map(|(ue, row)| {
                row.iter()
                    .enumerate()
                    .map(|(s, &(g, pl, dep, arr))| {
                        let c = g.condition();
                        let mut fv = [None; N_LSP];
                        for (i, v) in fv.iter_mut().enumerate() {
                            *v = fields.get(&(ue.id, s, i)).copied();
                        }
                        let lsp = lsp::shared_site_lsps(
                            &prepared[c.index()],
                            &g,
                            config.seed,
                            ue.id as u64,
                            s as u64,
                            &fv,
                        );
                        SiteLink {
                            geometry: g,
                            pathloss_db: pl,
                            lsp,
                            los_departure: dep,
                            los_arrival: arr,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Campaign {
            config: config.clone(),
            layout,
            ues,
            links,
        })
    }

    /// The three sector antennas of a site at sweep point `point`.
    pub fn bs_antennas(&self, point: SweepPoint) -> Result<[Antenna; CELLS_PER_SITE]> {
        let a = &self.config.antenna;
        let lambda = geom::wavelength(self.config.carrier_hz);
        let geometry = ArrayGeometry::panel(
            a.rows,
            a.cols,
            point.d_v,
            a.d_h,
            a.polarization,
            a.port_mapping,
            lambda,
            (90.0 + point.downtilt_deg).to_radians(),
        )?;
        let cells = &self.layout.sites[0].cells;
        Ok(std::array::from_fn(|i| Antenna {
            geometry: geometry.clone(),
            pattern: ElementPattern::Sector(a.element),
            field_model: a.field_model,
            orientation: Rotation::bearing_downtilt(
                cells[i].bearing_deg.to_radians(),
                cells[i].mech_tilt_deg.to_radians(),
            ),
        }))
    }

    pub fn ue_antenna(&self) -> Result<Antenna> {
        let a = &self.config.antenna;
        let lambda = geom::wavelength(self.config.carrier_hz);
        Ok(Antenna {
            geometry: ArrayGeometry::ue_linear(
                a.ue_antennas,
                a.ue_spacing,
                a.ue_polarization,
                lambda,
            )?,
            pattern: match a.ue_pattern {
                UePattern::Isotropic => ElementPattern::Isotropic,
                UePattern::Element => ElementPattern::Sector(a.element),
            },
            field_model: a.field_model,
            orientation: Rotation::IDENTITY,
        })
    }

    /// Small-scale parameters of the link between `ue` and global cell
    /// `cell`. Independent of the sweep point.
    pub fn cluster_set(&self, ue: usize, cell: usize) -> ClusterSet {
        let site = cell / CELLS_PER_SITE;
        let link = &self.links[ue][site];
        let params = self.config.ssp.get(link.geometry.condition());
        let mut rng = substream(
            self.config.seed,
            Stream::SmallScale,
            &[ue as u64, cell as u64],
        );
        ssp::generate_cluster_set(
            params,
            &link.lsp,
            link.los_departure,
            link.los_arrival,
            &mut rng,
        )
    }

    /// Metrics of every UE at one sweep point.
    pub fn evaluate(&self, point: SweepPoint, workers: usize) -> Result<SweepResult> {
        let pool = pool(workers)?;
        let bs = self.bs_antennas(point)?;
        let ue_ant = self.ue_antenna()?;
        let reports = pool.install(|| {
            self.ues
                .par_iter()
                .map(|ue| match self.config.phase {
                    1 => self.phase1_report(ue, &bs, &ue_ant),
                    _ => self.phase2_report(ue, &bs, &ue_ant),
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(SweepResult { point, reports })
    }

    fn phase1_report(
        &self,
        ue: &Ue,
        bs: &[Antenna; CELLS_PER_SITE],
        ue_ant: &Antenna,
    ) -> Result<DropReport> {
        let f = self.config.carrier_hz;
        let mut rsrp = Vec::with_capacity(self.layout.n_cells());
        for cell in self.layout.cells() {
            let link = &self.links[ue.id][cell.site];
            let g_t = bs[cell.index].port_gain_db(0, f, link.los_departure)?;
            let g_r = ue_ant.port_gain_db(0, f, link.los_arrival)?;
            rsrp.push(calib::rsrp_db(
                cell.p_tx_dbm,
                g_t,
                g_r,
                link.pathloss_db,
                link.lsp.sf_db,
            ));
        }
        self.report(ue, &rsrp, None)
    }

    fn phase2_report(
        &self,
        ue: &Ue,
        bs: &[Antenna; CELLS_PER_SITE],
        ue_ant: &Antenna,
    ) -> Result<DropReport> {
        let f = self.config.carrier_hz;
        let times = &self.config.times_s;
        let mut rsrp = Vec::with_capacity(self.layout.n_cells());
        let mut realizations = Vec::with_capacity(self.layout.n_cells());
        for cell in self.layout.cells() {
            let link = &self.links[ue.id][cell.site];
            let cs = self.cluster_set(ue.id, cell.global_index());
            let ctx = LinkContext {
                tx: &bs[cell.index],
                rx: ue_ant,
                clusters: &cs,
                frequency: f,
                pathloss_db: link.pathloss_db,
                sf_db: link.lsp.sf_db,
                k_factor: link.k_linear(),
                los_departure: link.los_departure,
                los_arrival: link.los_arrival,
                velocity: ue.velocity,
            };
            let r = PreparedLink::new(&ctx, Space::Port)?.synthesize(times)?;
            rsrp.push(calib::rsrp_fast_fading_db(cell.p_tx_dbm, &r));
            realizations.push((cs, r));
        }
        let serving = calib::attach(&rsrp)?;
        let (cs, r) = &realizations[serving];
        let link = &self.links[ue.id][serving / CELLS_PER_SITE];
        let metrics = small_scale_metrics(cs, link)?;
        let (l1, l2) = calib::top_eigenvalues(r)?;
        self.report(ue, &rsrp, Some(SmallScaleMetrics { l1, l2, ..metrics }))
    }

    fn report(
        &self,
        ue: &Ue,
        rsrp: &[f64],
        small_scale: Option<SmallScaleMetrics>,
    ) -> Result<DropReport> {
        let serving = calib::attach(rsrp)?;
        let cell = self.layout.cell(serving);
        Ok(DropReport {
            ue_id: ue.id,
            site: cell.site,
            cell: cell.index,
            cl_db: calib::coupling_gain_db(rsrp[serving], cell.p_tx_dbm),
            gf_db: calib::geometry_factor_db(rsrp, serving),
            small_scale,
        })
    }
}

/// Spreads of a link's rays (sub-paths weighted by 1/(K+1), LOS ray by
/// K/(K+1)); eigenvalues are left at zero for the caller.
pub fn small_scale_metrics(cs: &ClusterSet, link: &SiteLink) -> Result<SmallScaleMetrics> {
    let k = link.k_linear();
    let mut powers = Vec::new();
    let mut rays = Vec::new();
    for c in &cs.clusters {
        for s in &c.subpaths {
            powers.push(s.power / (k + 1.0));
            rays.push((s.angles.departure, s.angles.arrival));
        }
    }
    let mut delays: Vec<f64> = cs.clusters.iter().map(|c| c.delay).collect();
    let mut tap_powers: Vec<f64> = cs.clusters.iter().map(|c| c.power / (k + 1.0)).collect();
    if k > 0.0 {
        powers.push(k / (k + 1.0));
        rays.push((link.los_departure, link.los_arrival));
        tap_powers[0] += k / (k + 1.0);
    }
    if delays.is_empty() {
        return Err(Error::invalid("link has no clusters"));
    }
    delays.truncate(tap_powers.len());
    let spread = |f: &dyn Fn(&(AngleVector, AngleVector)) -> f64| {
        let a: Vec<f64> = rays.iter().map(f).collect();
        calib::angular_spread_deg(&a, &powers)
    };
    Ok(SmallScaleMetrics {
        asd: spread(&|r| r.0.azimuth),
        asa: spread(&|r| r.1.azimuth),
        esd: spread(&|r| r.0.zenith),
        esa: spread(&|r| r.1.zenith),
        ds: calib::delay_spread_s(&delays, &tap_powers),
        l1: 0.0,
        l2: 0.0,
    })
}

/// Field values replacing the independent normals of spatially correlated
/// LSPs, keyed by (ue, site, lsp index). One field per (site, condition,
/// LSP) covers the bounding box of all UEs.
fn spatial_field_values(
    config: &RunConfig,
    ues: &[Ue],
    n_sites: usize,
    base: &[Vec<(LinkGeometry, f64, AngleVector, AngleVector)>],
) -> HashMap<(usize, usize, usize), f64> {
    let spacing = config.layout.field_spacing;
    let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
    for ue in ues {
        lo = (lo.0.min(ue.position.x), lo.1.min(ue.position.y));
        hi = (hi.0.max(ue.position.x), hi.1.max(ue.position.y));
    }
    let jobs: Vec<(usize, Condition, usize)> = (0..n_sites)
        .flat_map(|s| {
            Condition::ALL
                .into_iter()
                .flat_map(move |c| (0..N_LSP).map(move |i| (s, c, i)))
        })
        .filter(|&(_, c, i)| config.lsp.get(c).decorrelation[i] > 0.0)
        .collect();
    let parts: Vec<Vec<((usize, usize, usize), f64)>> = jobs
        .par_iter()
        .map(|&(s, c, i)| {
            let members: Vec<&Ue> = ues
                .iter()
                .filter(|ue| base[ue.id][s].0.condition() == c)
                .collect();
            if members.is_empty() {
                return Vec::new();
            }
            let mut rng = substream(
                config.seed,
                Stream::LspField,
                &[s as u64, c.index() as u64, i as u64],
            );
            let d = config.lsp.get(c).decorrelation[i];
            let field = SpatialField::generate(&mut rng, lo, hi, spacing, d);
            members
                .iter()
                .map(|ue| ((ue.id, s, i), field.sample(ue.position.x, ue.position.y)))
                .collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// All sweep points of the configuration, tilts varying fastest.
pub fn sweep_points(config: &RunConfig) -> Vec<SweepPoint> {
    config
        .sweep
        .d_v
        .iter()
        .flat_map(|&d_v| {
            config
                .sweep
                .downtilt_deg
                .iter()
                .map(move |&downtilt_deg| SweepPoint { downtilt_deg, d_v })
        })
        .collect()
}

pub fn run_campaign(config: &RunConfig, workers: usize) -> Result<Vec<SweepResult>> {
    let campaign = Campaign::prepare(config, workers)?;
    sweep_points(config)
        .into_iter()
        .map(|p| {
            log::info!("evaluating {}", p.tag());
            campaign.evaluate(p, workers)
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one CDF file per metric plus a report file per sweep point and
/// returns the written paths.
pub fn write_outputs(
    config: &RunConfig,
    results: &[SweepResult],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let hash = config.hash();
    let mut written = Vec::new();
    for r in results {
        let tag = r.point.tag();
        let mut metrics: Vec<(&str, Vec<f64>)> =
            vec![("cl", r.coupling_gains()), ("gf", r.geometry_factors())];
        if config.phase == 2 {
            let ss: Vec<SmallScaleMetrics> =
                r.reports.iter().filter_map(|x| x.small_scale).collect();
            let col = |f: fn(&SmallScaleMetrics) -> f64| ss.iter().map(f).collect::<Vec<f64>>();
            metrics.extend([
                ("asd", col(|m| m.asd)),
                ("asa", col(|m| m.asa)),
                ("esd", col(|m| m.esd)),
                ("esa", col(|m| m.esa)),
                ("ds", col(|m| m.ds)),
                ("l1", col(|m| m.l1)),
                ("l2", col(|m| m.l2)),
            ]);
        }
        for (name, samples) in metrics {
            let cdf = calib::empirical_cdf(&samples)?;
            let header = vec![
                format!("metric={name}"),
                format!("config_sha256={hash}"),
                format!("seed={}", config.seed),
                format!("scenario={}", crate::config::scenario_name(config.scenario)),
                format!("downtilt_deg={}", r.point.downtilt_deg),
                format!("d_v={}", r.point.d_v),
                format!("drop_mode={}", config.drop_mode.as_str()),
                format!("phase={}", config.phase),
            ];
            let path = dir.join(format!("{name}_{tag}.cdf"));
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            calib::write_cdf(&mut BufWriter::new(file), &header, &cdf).map_err(io_err(&path))?;
            written.push(path);
        }
        let path = dir.join(format!("report_{tag}.csv"));
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        calib::write_reports(&mut BufWriter::new(file), &r.reports).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
