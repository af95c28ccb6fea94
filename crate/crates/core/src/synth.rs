//! Per-tap channel matrices from antennas, large-scale and small-scale
//! parameters.
//!
//! Matrices are indexed (tx element or port, rx antenna). For cluster n,
//!
//! H_n(t) = s·[√(1/(K+1))·Σ_m √P_{n,m} g_Rᵀ α_{n,m} g_T a_R a_Tᵀ e^{j k_r·v t}
//!          + δ(n−1)·√(K/(K+1))·g_Rᵀ α_LOS g_T a_R a_Tᵀ e^{j k_LOS·v t}]
//!
//! with s = √(10^{−(PL+SF)/10}).

use std::io::Write;

use num_complex::Complex64;

use crate::antenna::Antenna;
use crate::error::{Error, Result};
use crate::geom::{self, AngleVector, Vec3};
use crate::linalg::CMatrix;
use crate::ssp::ClusterSet;

/// Everything needed to synthesize one link.
#[derive(Debug, Clone, Copy)]
pub struct LinkContext<'a> {
    pub tx: &'a Antenna,
    pub rx: &'a Antenna,
    pub clusters: &'a ClusterSet,
    pub frequency: f64,
    pub pathloss_db: f64,
    pub sf_db: f64,
    /// Rice factor, linear.
    pub k_factor: f64,
    pub los_departure: AngleVector,
    pub los_arrival: AngleVector,
    pub velocity: Vec3,
}

impl LinkContext<'_> {
    /// √(10^{−(PL+SF)/10}).
    pub fn slow_fading_amplitude(&self) -> f64 {
        10f64.powf(-(self.pathloss_db + self.sf_db) / 20.0)
    }
}

/// Row space of the synthesized matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Element,
    Port,
}

/// One ray with its antenna-side vectors already evaluated: `tx[k]` and
/// `rx[u]` hold the (V, H) field times the array phase.
#[derive(Debug, Clone)]
struct RayTerm {
    amplitude: f64,
    polar: [[Complex64; 2]; 2],
    tx: Vec<[Complex64; 2]>,
    rx: Vec<[Complex64; 2]>,
    /// k·v in rad/s.
    doppler: f64,
}

impl RayTerm {
    fn accumulate(&self, out: &mut CMatrix, scale: f64, t: f64) {
        let c = Complex64::from_polar(scale * self.amplitude, self.doppler * t);
        let a = &self.polar;
        for (k, tk) in self.tx.iter().enumerate() {
            let w0 = a[0][0] * tk[0] + a[0][1] * tk[1];
            let w1 = a[1][0] * tk[0] + a[1][1] * tk[1];
            for (u, ru) in self.rx.iter().enumerate() {
                out.add_at(k, u, c * (ru[0] * w0 + ru[1] * w1));
            }
        }
    }
}

fn side_vectors(
    antenna: &Antenna,
    frequency: f64,
    dir: AngleVector,
    space: Space,
) -> Result<Vec<[Complex64; 2]>> {
    let a = antenna.response(frequency, dir)?;
    let per_element: Vec<[Complex64; 2]> = a
        .iter()
        .enumerate()
        .map(|(k, &ak)| {
            let (gv, gh) = antenna.element_field(k, dir);
            [ak * gv, ak * gh]
        })
        .collect();
    match space {
        Space::Element => Ok(per_element),
        Space::Port => Ok(antenna
            .geometry
            .ports
            .iter()
            .map(|p| {
                let mut v = [Complex64::new(0.0, 0.0); 2];
                for (&e, &w) in p.elements.iter().zip(&p.weights) {
                    v[0] += w * per_element[e][0];
                    v[1] += w * per_element[e][1];
                }
                v
            })
            .collect()),
    }
}

fn doppler_rate(frequency: f64, arrival: AngleVector, velocity: Vec3) -> Result<f64> {
    let k = geom::wave_vector(frequency, arrival)?;
    Ok(geom::doppler_phase(&k, velocity, 1.0))
}

/// A link with all ray terms evaluated once, ready for repeated evaluation
/// at arbitrary times.
#[derive(Debug, Clone)]
pub struct PreparedLink {
    delays: Vec<f64>,
    clusters: Vec<Vec<RayTerm>>,
    los: RayTerm,
    scale: f64,
    k_factor: f64,
    frequency: f64,
    dims: (usize, usize),
}

impl PreparedLink {
    pub fn new(ctx: &LinkContext, space: Space) -> Result<Self> {
        if ctx.clusters.clusters.is_empty() {
            return Err(Error::invalid("link has no clusters"));
        }
        if ctx.tx.geometry.n_elements() == 0 || ctx.rx.geometry.n_elements() == 0 {
            return Err(Error::invalid("antenna without elements"));
        }
        if !(ctx.k_factor >= 0.0) {
            return Err(Error::invalid(format!(
                "Rice factor must be non-negative, got {}",
                ctx.k_factor
            )));
        }
        let convention = ctx.clusters.convention;
        let mut clusters = Vec::with_capacity(ctx.clusters.clusters.len());
        for c in &ctx.clusters.clusters {
            let mut terms = Vec::with_capacity(c.subpaths.len());
            for s in &c.subpaths {
                terms.push(RayTerm {
                    amplitude: s.power.sqrt(),
                    polar: s.polar.matrix(convention),
                    tx: side_vectors(ctx.tx, ctx.frequency, s.angles.departure, space)?,
                    rx: side_vectors(ctx.rx, ctx.frequency, s.angles.arrival, Space::Element)?,
                    doppler: doppler_rate(ctx.frequency, s.angles.arrival, ctx.velocity)?,
                });
            }
            clusters.push(terms);
        }
        let zero = Complex64::new(0.0, 0.0);
        let [vv, hh] = ctx.clusters.los_phases;
        let los = RayTerm {
            amplitude: 1.0,
            polar: [
                [Complex64::from_polar(1.0, vv), zero],
                [zero, Complex64::from_polar(1.0, hh)],
            ],
            tx: side_vectors(ctx.tx, ctx.frequency, ctx.los_departure, space)?,
            rx: side_vectors(ctx.rx, ctx.frequency, ctx.los_arrival, Space::Element)?,
            doppler: doppler_rate(ctx.frequency, ctx.los_arrival, ctx.velocity)?,
        };
        let dims = (los.tx.len(), los.rx.len());
        Ok(PreparedLink {
            delays: ctx.clusters.clusters.iter().map(|c| c.delay).collect(),
            clusters,
            los,
            scale: ctx.slow_fading_amplitude(),
            k_factor: ctx.k_factor,
            frequency: ctx.frequency,
            dims,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    fn check_cluster(&self, n: usize) -> Result<()> {
        if n >= self.clusters.len() {
            return Err(Error::invalid(format!("cluster {n} out of range")));
        }
        Ok(())
    }

    /// Diffuse part of cluster `n` (0-based), without K weighting.
    pub fn cluster_nlos(&self, n: usize, t: f64) -> Result<CMatrix> {
        self.check_cluster(n)?;
        let mut m = CMatrix::zeros(self.dims.0, self.dims.1);
        for term in &self.clusters[n] {
            term.accumulate(&mut m, self.scale, t);
        }
        Ok(m)
    }

    /// Cluster `n` with Rice factor `k`; the LOS ray is added to cluster 0 only.
    pub fn cluster_with_los(&self, n: usize, t: f64, k: f64) -> Result<CMatrix> {
        if !(k >= 0.0) {
            return Err(Error::invalid(format!(
                "Rice factor must be non-negative, got {k}"
            )));
        }
        self.check_cluster(n)?;
        let mut m = CMatrix::zeros(self.dims.0, self.dims.1);
        let diffuse = self.scale * (1.0 / (k + 1.0)).sqrt();
        for term in &self.clusters[n] {
            term.accumulate(&mut m, diffuse, t);
        }
        if n == 0 && k > 0.0 {
            self.los
                .accumulate(&mut m, self.scale * (k / (k + 1.0)).sqrt(), t);
        }
        Ok(m)
    }

    pub fn synthesize(&self, times: &[f64]) -> Result<ChannelRealization> {
        if times.is_empty() {
            return Err(Error::invalid("no time samples requested"));
        }
        let mut taps = Vec::with_capacity(self.clusters.len());
        for (n, &delay) in self.delays.iter().enumerate() {
            let matrices = times
                .iter()
                .map(|&t| self.cluster_with_los(n, t, self.k_factor))
                .collect::<Result<Vec<_>>>()?;
            taps.push(Tap { delay, matrices });
        }
        Ok(ChannelRealization {
            frequency: self.frequency,
            times: times.to_vec(),
            taps,
        })
    }
}

/// Diffuse matrix of cluster `n` in element space.
pub fn cluster_matrix_nlos(ctx: &LinkContext, n: usize, t: f64) -> Result<CMatrix> {
    PreparedLink::new(ctx, Space::Element)?.cluster_nlos(n, t)
}

/// Cluster `n` in element space with an explicit Rice factor (linear).
pub fn cluster_matrix_with_los(ctx: &LinkContext, n: usize, t: f64, k: f64) -> Result<CMatrix> {
    if !(k >= 0.0) {
        return Err(Error::invalid(format!(
            "Rice factor must be non-negative, got {k}"
        )));
    }
    PreparedLink::new(ctx, Space::Element)?.cluster_with_los(n, t, k)
}

/// All taps at all requested times, using the context's Rice factor.
pub fn synthesize(ctx: &LinkContext, times: &[f64], space: Space) -> Result<ChannelRealization> {
    PreparedLink::new(ctx, space)?.synthesize(times)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    pub delay: f64,
    /// One matrix per time sample.
    pub matrices: Vec<CMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub frequency: f64,
    pub times: Vec<f64>,
    pub taps: Vec<Tap>,
}

impl ChannelRealization {
    /// (rows, cols) of every tap matrix.
    pub fn dims(&self) -> (usize, usize) {
        self.taps
            .first()
            .and_then(|t| t.matrices.first())
            .map(|m| (m.rows(), m.cols()))
            .unwrap_or((0, 0))
    }
}

/// Textual dump: a header line with the dimensions, then one line per
/// (time, tap): `time,delay,re,im,re,im,...` with entries row-major.
pub fn write_realization<W: Write>(out: &mut W, r: &ChannelRealization) -> std::io::Result<()> {
    let (rows, cols) = r.dims();
    writeln!(
        out,
        "# rows={rows} cols={cols} taps={} times={} frequency={}",
        r.taps.len(),
        r.times.len(),
        r.frequency
    )?;
    for (i, t) in r.times.iter().enumerate() {
        for tap in &r.taps {
            write!(out, "{t},{}", tap.delay)?;
            for v in tap.matrices[i].as_slice() {
                write!(out, ",{},{}", v.re, v.im)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
