//! Calibration metrics: RSRP, attachment, coupling gain, geometry factor,
//! spreads, eigenvalues and empirical CDFs.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::wrap_angle;
use crate::linalg::{hermitian_eigenvalues, CMatrix};
use crate::synth::ChannelRealization;

/// Slow-fading RSRP in dBm: P_TX + G_T + G_R − PL − σ_SF.
pub fn rsrp_db(p_tx_dbm: f64, g_t_db: f64, g_r_db: f64, pathloss_db: f64, sf_db: f64) -> f64 {
    p_tx_dbm + g_t_db + g_r_db - pathloss_db - sf_db
}

/// Mean received power per (tx port, rx antenna) pair, in linear units
/// relative to the transmit power: Σ_taps ‖H‖²_F averaged over time samples
/// and divided by the number of matrix entries.
pub fn mean_pair_power(realization: &ChannelRealization) -> f64 {
    let n_t = realization.times.len().max(1) as f64;
    let (rows, cols) = realization.dims();
    let total: f64 = realization
        .taps
        .iter()
        .flat_map(|tap| tap.matrices.iter())
        .map(CMatrix::frobenius_sq)
        .sum();
    total / n_t / (rows * cols).max(1) as f64
}

/// Fast-fading RSRP in dBm from a synthesized realization.
pub fn rsrp_fast_fading_db(p_tx_dbm: f64, realization: &ChannelRealization) -> f64 {
    p_tx_dbm + 10.0 * mean_pair_power(realization).log10()
}

/// Index of the strongest cell; ties go to the lowest index.
pub fn attach(rsrp_dbm: &[f64]) -> Result<usize> {
    if rsrp_dbm.is_empty() {
        return Err(Error::invalid("attach needs at least one cell"));
    }
    let mut best = 0;
    for (i, &r) in rsrp_dbm.iter().enumerate().skip(1) {
        if r > rsrp_dbm[best] {
            best = i;
        }
    }
    Ok(best)
}

pub fn coupling_gain_db(serving_rsrp_dbm: f64, p_tx_dbm: f64) -> f64 {
    serving_rsrp_dbm - p_tx_dbm
}

/// Serving power over the linear sum of all other cells' powers, in dB.
/// Returns +∞ when there is no interferer.
pub fn geometry_factor_db(rsrp_dbm: &[f64], serving: usize) -> f64 {
    // shift by the serving level so the sum cannot underflow
    let s = rsrp_dbm[serving];
    let interference: f64 = rsrp_dbm
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != serving)
        .map(|(_, &r)| 10f64.powf((r - s) / 10.0))
        .sum();
    if interference == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * interference.log10()
    }
}

/// Power-weighted circular RMS spread in degrees; `angles` in radians.
pub fn angular_spread_deg(angles: &[f64], powers: &[f64]) -> f64 {
    let total: f64 = powers.iter().sum();
    let mean: Complex64 = angles
        .iter()
        .zip(powers)
        .map(|(&a, &p)| Complex64::from_polar(p, a))
        .sum();
    let mu = mean.arg();
    let var: f64 = angles
        .iter()
        .zip(powers)
        .map(|(&a, &p)| p * wrap_angle(a - mu).powi(2))
        .sum::<f64>()
        / total;
    var.sqrt() * 180.0 / PI
}

/// RMS delay spread in seconds.
pub fn delay_spread_s(delays: &[f64], powers: &[f64]) -> f64 {
    let total: f64 = powers.iter().sum();
    let mean = delays.iter().zip(powers).map(|(t, p)| t * p).sum::<f64>() / total;
    let var = delays
        .iter()
        .zip(powers)
        .map(|(t, p)| p * (t - mean).powi(2))
        .sum::<f64>()
        / total;
    var.sqrt()
}

/// Two largest eigenvalues of Σ_taps H Hᴴ averaged over the time samples,
/// with H the rx × tx channel. Missing eigenvalues (single rx) are 0.
pub fn top_eigenvalues(realization: &ChannelRealization) -> Result<(f64, f64)> {
    if realization.taps.is_empty() || realization.times.is_empty() {
        return Err(Error::invalid("empty realization"));
    }
    let (_, n_rx) = realization.dims();
    let mut cov = CMatrix::zeros(n_rx, n_rx);
    for tap in &realization.taps {
        for m in &tap.matrices {
            // stored (tx, rx): Σ_k conj(M[k,u]) M[k,v] is the conjugate of
            // (H Hᴴ)[u,v] and has the same spectrum
            m.accumulate_gram(&mut cov);
        }
    }
    cov.scale(Complex64::new(1.0 / realization.times.len() as f64, 0.0));
    let eig = hermitian_eigenvalues(&cov);
    let l1 = eig.first().copied().unwrap_or(0.0).max(0.0);
    let l2 = eig.get(1).copied().unwrap_or(0.0).max(0.0);
    Ok((l1, l2))
}

/// Sorted (value, i/n) steps.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Err(Error::invalid("CDF needs at least one finite sample"));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect())
}

/// Value at probability `p` of an empirical CDF (lower quantile).
pub fn quantile(cdf: &[(f64, f64)], p: f64) -> f64 {
    let i = cdf.partition_point(|&(_, q)| q < p);
    cdf[i.min(cdf.len() - 1)].0
}

/// Per-UE calibration record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropReport {
    pub ue_id: usize,
    pub site: usize,
    pub cell: usize,
    pub cl_db: f64,
    pub gf_db: f64,
    pub small_scale: Option<SmallScaleMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallScaleMetrics {
    pub asd: f64,
    pub asa: f64,
    pub esd: f64,
    pub esa: f64,
    pub ds: f64,
    pub l1: f64,
    pub l2: f64,
}

pub const REPORT_HEADER: &str = "ue_id,site,cell,cl_db,gf_db,asd,asa,esd,esa,ds,l1,l2";

pub fn write_reports<W: Write>(out: &mut W, reports: &[DropReport]) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        write!(
            out,
            "{},{},{},{},{}",
            r.ue_id, r.site, r.cell, r.cl_db, r.gf_db
        )?;
        match r.small_scale {
            Some(m) => writeln!(
                out,
                ",{},{},{},{},{},{},{}",
                m.asd, m.asa, m.esd, m.esa, m.ds, m.l1, m.l2
            )?,
            None => writeln!(out, ",,,,,,,")?,
        }
    }
    Ok(())
}

/// Writes a two-column CDF with `#` comment header lines.
pub fn write_cdf<W: Write>(
    out: &mut W,
    header: &[String],
    cdf: &[(f64, f64)],
) -> std::io::Result<()> {
    for h in header {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "value,probability")?;
    for (v, p) in cdf {
        writeln!(out, "{v},{p}")?;
    }
    Ok(())
}
