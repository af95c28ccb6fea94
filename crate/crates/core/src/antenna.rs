//! Element and port radiation patterns, polarization, array responses and
//! port virtualization.
//!
//! Panel-local frame: +x is boresight, +y horizontal, +z vertical. Elements
//! of column `c`, row `m` sit at (0, c·d_h·λ, m·d_v·λ).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, AngleVector, Rotation, Vec3, WaveVector};
use crate::linalg::CMatrix;

/// Parameters of the parabolic sector pattern with min-clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    /// Peak gain (dBi).
    pub g_max: f64,
    /// Front-back ratio (dB).
    pub a_m: f64,
    /// Vertical sidelobe floor (dB).
    pub sla_v: f64,
    pub phi_3db: f64,
    pub theta_3db: f64,
    /// Beam tilt below the horizon (degrees).
    pub theta_tilt: f64,
}

impl PatternSpec {
    /// Single element of the 3D panel: 8 dBi, 65°/65°, 30 dB floors.
    pub const ELEMENT: PatternSpec = PatternSpec {
        g_max: 8.0,
        a_m: 30.0,
        sla_v: 30.0,
        phi_3db: 65.0,
        theta_3db: 65.0,
        theta_tilt: 0.0,
    };

    /// Legacy port pattern approximation: 17 dBi, 70°/15°, 20 dB floor.
    pub fn itu_port(tilt_deg: f64) -> PatternSpec {
        PatternSpec {
            g_max: 17.0,
            a_m: 20.0,
            sla_v: 20.0,
            phi_3db: 70.0,
            theta_3db: 15.0,
            theta_tilt: tilt_deg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.phi_3db > 0.0 && self.theta_3db > 0.0 && self.a_m > 0.0 && self.sla_v > 0.0;
        if !ok || !self.g_max.is_finite() || !self.theta_tilt.is_finite() {
            return Err(Error::invalid(format!("bad pattern spec {self:?}")));
        }
        Ok(())
    }

    fn gain_db(&self, local: AngleVector, vertical_floor: f64) -> f64 {
        let phi = local.azimuth.to_degrees();
        // elevation offset below the horizon
        let theta = local.zenith.to_degrees() - 90.0;
        let a_h = -(12.0 * (phi / self.phi_3db).powi(2)).min(self.a_m);
        let a_v =
            -(12.0 * ((theta - self.theta_tilt) / self.theta_3db).powi(2)).min(vertical_floor);
        self.g_max - (-(a_h + a_v)).min(self.a_m)
    }
}

/// Element gain in dBi at panel-local `local` angles.
pub fn element_gain_db(spec: &PatternSpec, local: AngleVector) -> f64 {
    spec.gain_db(local, spec.sla_v)
}

/// Legacy port gain in dBi; A_m doubles as the vertical floor.
pub fn port_gain_itu_db(spec: &PatternSpec, local: AngleVector) -> f64 {
    spec.gain_db(local, spec.a_m)
}

/// Angle-independent slant decomposition: (√A cos α, √A sin α).
pub fn slant_fields_36814(gain_linear: f64, alpha: f64) -> (f64, f64) {
    let amp = gain_linear.max(0.0).sqrt();
    (amp * alpha.cos(), amp * alpha.sin())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Unit-power phase taper steering a vertical column to zenith `theta_tilt`.
pub fn downtilt_weights(m: usize, d_v: f64, theta_tilt: f64) -> Vec<Complex64> {
    let norm = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|i| Complex64::from_polar(norm, -2.0 * PI * d_v * i as f64 * theta_tilt.cos()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Element {
    /// Local position in meters.
    pub position: Vec3,
    /// Slant angle in radians (0 = vertical).
    pub slant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub elements: Vec<usize>,
    pub weights: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// One vertical element per position.
    Single,
    /// Two co-located elements slanted ±45°.
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortMapping {
    /// K = M: one port per column and polarization.
    Column,
    /// K = 1: one port per element.
    Element,
}

/// Element layout plus port map.
///
/// Element index order is column-major over (column, row, polarization):
/// `index = (col·M + row)·P + pol`. With [`PortMapping::Column`] port
/// `col·P + pol` collects the M elements of that column and polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Vertical spacing in wavelengths.
    pub d_v: f64,
    /// Horizontal spacing in wavelengths.
    pub d_h: f64,
    pub elements: Vec<Element>,
    pub ports: Vec<Port>,
}

impl ArrayGeometry {
    pub fn new(
        rows: usize,
        cols: usize,
        d_v: f64,
        d_h: f64,
        elements: Vec<Element>,
        ports: Vec<Port>,
    ) -> Result<Self> {
        let g = ArrayGeometry {
            rows,
            cols,
            d_v,
            d_h,
            elements,
            ports,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.elements.is_empty() || self.ports.is_empty() {
            return Err(Error::invalid("array needs elements and ports"));
        }
        let mut owner = vec![0usize; self.elements.len()];
        for (p, port) in self.ports.iter().enumerate() {
            if port.elements.len() != port.weights.len() || port.elements.is_empty() {
                return Err(Error::invalid(format!("port {p}: element/weight mismatch")));
            }
            let power: f64 = port.weights.iter().map(|w| w.norm_sqr()).sum();
            if (power - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "port {p}: weight power {power} != 1"
                )));
            }
            for &e in &port.elements {
                let slot = owner
                    .get_mut(e)
                    .ok_or_else(|| Error::invalid(format!("port {p}: unknown element {e}")))?;
                *slot += 1;
            }
        }
        if let Some(e) = owner.iter().position(|&n| n != 1) {
            return Err(Error::invalid(format!(
                "element {e} belongs to {} ports, expected exactly one",
                owner[e]
            )));
        }
        Ok(())
    }

    /// Uniform rectangular panel. `tilt_zenith` (radians) steers K = M ports;
    /// it is ignored for K = 1.
    pub fn panel(
        rows: usize,
        cols: usize,
        d_v: f64,
        d_h: f64,
        polarization: Polarization,
        mapping: PortMapping,
        wavelength: f64,
        tilt_zenith: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("panel needs at least one row and column"));
        }
        if !(d_v > 0.0) || !(d_h > 0.0) {
            return Err(Error::invalid("element spacing must be positive"));
        }
        let slants: &[f64] = match polarization {
            Polarization::Single => &[0.0],
            Polarization::Cross => &[PI / 4.0, -PI / 4.0],
        };
        let npol = slants.len();
        let mut elements = Vec::with_capacity(rows * cols * npol);
        for c in 0..cols {
            for m in 0..rows {
                for &slant in slants {
                    elements.push(Element {
                        position: Vec3::new(
                            0.0,
                            c as f64 * d_h * wavelength,
                            m as f64 * d_v * wavelength,
                        ),
                        slant,
                    });
                }
            }
        }
        let ports = match mapping {
            PortMapping::Column => {
                let w = downtilt_weights(rows, d_v, tilt_zenith);
                let mut ports = Vec::with_capacity(cols * npol);
                for c in 0..cols {
                    for p in 0..npol {
                        ports.push(Port {
                            elements: (0..rows).map(|m| (c * rows + m) * npol + p).collect(),
                            weights: w.clone(),
                        });
                    }
                }
                ports
            }
            PortMapping::Element => (0..elements.len())
                .map(|e| Port {
                    elements: vec![e],
                    weights: vec![Complex64::new(1.0, 0.0)],
                })
                .collect(),
        };
        ArrayGeometry::new(rows, cols, d_v, d_h, elements, ports)
    }

    /// Linear array of `n` isotropic-position elements along local y, used
    /// for the UE side. Cross polarization pairs 0° and 90° elements.
    pub fn ue_linear(
        n: usize,
        spacing: f64,
        polarization: Polarization,
        wavelength: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("UE needs at least one antenna"));
        }
        let slants: &[f64] = match polarization {
            Polarization::Single => &[0.0],
            Polarization::Cross => &[0.0, PI / 2.0],
        };
        let mut elements = Vec::new();
        for i in 0..n {
            for &slant in slants {
                elements.push(Element {
                    position: Vec3::new(0.0, i as f64 * spacing * wavelength, 0.0),
                    slant,
                });
            }
        }
        let ports = (0..elements.len())
            .map(|e| Port {
                elements: vec![e],
                weights: vec![Complex64::new(1.0, 0.0)],
            })
            .collect();
        ArrayGeometry::new(1, n, spacing, spacing, elements, ports)
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_ports(&self) -> usize {
        self.ports.len()
    }
}

/// exp(j k·x_i) per element; `k` must be expressed in the array frame.
pub fn array_response(geometry: &ArrayGeometry, k: &WaveVector) -> Vec<Complex64> {
    geometry
        .elements
        .iter()
        .map(|e| Complex64::from_polar(1.0, k.phase_at(e.position)))
        .collect()
}

/// Port-level channel: Σ_k ω_k H[k, u] for every column `u`.
/// `per_element` is indexed (element, rx antenna).
pub fn virtualize_port(
    per_element: &CMatrix,
    geometry: &ArrayGeometry,
    port: usize,
) -> Result<Vec<Complex64>> {
    let p = geometry
        .ports
        .get(port)
        .ok_or_else(|| Error::invalid(format!("unknown port {port}")))?;
    if per_element.rows() != geometry.n_elements() {
        return Err(Error::invalid(format!(
            "channel has {} element rows, geometry has {} elements",
            per_element.rows(),
            geometry.n_elements()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); per_element.cols()];
    for (&e, &w) in p.elements.iter().zip(&p.weights) {
        for (o, h) in out.iter_mut().zip(per_element.row(e)) {
            *o += w * h;
        }
    }
    Ok(out)
}

/// Virtualizes every port: (element, rx) → (port, rx).
pub fn virtualize_all(per_element: &CMatrix, geometry: &ArrayGeometry) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(geometry.n_ports(), per_element.cols());
    for p in 0..geometry.n_ports() {
        for (u, v) in virtualize_port(per_element, geometry, p)?
            .into_iter()
            .enumerate()
        {
            out.set(p, u, v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ElementPattern {
    Isotropic,
    Sector(PatternSpec),
}

impl ElementPattern {
    pub fn gain_db(&self, local: AngleVector) -> f64 {
        match self {
            ElementPattern::Isotropic => 0.0,
            ElementPattern::Sector(spec) => element_gain_db(spec, local),
        }
    }
}

/// How per-element (V, H) field patterns are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldModel {
    /// Angle-independent slant split of the power pattern.
    Slant,
    /// Element physically rotated by its slant about boresight; the local
    /// vertical field is carried into the global basis exactly.
    RotatedElement,
}

/// A placed antenna: geometry, element pattern, field model and orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Antenna {
    pub geometry: ArrayGeometry,
    pub pattern: ElementPattern,
    pub field_model: FieldModel,
    pub orientation: Rotation,
}

impl Antenna {
    /// Global (g_V, g_H) field of element `k` towards global direction `dir`.
    pub fn element_field(&self, k: usize, dir: AngleVector) -> (f64, f64) {
        let slant = self.geometry.elements[k].slant;
        match self.field_model {
            FieldModel::Slant => {
                let local = self.orientation.to_local(dir);
                slant_fields_36814(db_to_linear(self.pattern.gain_db(local)), slant)
            }
            FieldModel::RotatedElement => {
                let frame = self.orientation.then(&Rotation::about_x(slant));
                let local = frame.to_local(dir);
                let amp = db_to_linear(self.pattern.gain_db(local)).sqrt();
                geom::field_lcs_to_gcs(amp, 0.0, &frame, dir)
            }
        }
    }

    /// Array response towards global direction `dir`.
    pub fn response(&self, frequency: f64, dir: AngleVector) -> Result<Vec<Complex64>> {
        let local = self.orientation.to_local(dir);
        let k = geom::wave_vector(frequency, local)?;
        Ok(array_response(&self.geometry, &k))
    }

    /// Composite gain (dBi) of `port` towards `dir`: |Σ ω_k a_k g_k|² summed
    /// over both polarization components.
    pub fn port_gain_db(&self, port: usize, frequency: f64, dir: AngleVector) -> Result<f64> {
        let p = self
            .geometry
            .ports
            .get(port)
            .ok_or_else(|| Error::invalid(format!("unknown port {port}")))?;
        let a = self.response(frequency, dir)?;
        let mut v = Complex64::new(0.0, 0.0);
        let mut h = Complex64::new(0.0, 0.0);
        for (&e, &w) in p.elements.iter().zip(&p.weights) {
            let (gv, gh) = self.element_field(e, dir);
            v += w * a[e] * gv;
            h += w * a[e] * gh;
        }
        Ok(10.0 * (v.norm_sqr() + h.norm_sqr()).log10())
    }
}
