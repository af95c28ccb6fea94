//! Coordinate systems, wave vectors, LOS geometry and local/global field
//! transforms.
//!
//! Conventions: right-handed global frame with +z up. Azimuth is measured
//! from +x towards +y, zenith from +z, so a horizontal ray has zenith π/2 and
//! a downtilted beam has zenith > π/2.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Reduce an angle into [−π, π).
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU for tiny negative inputs
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Spatial direction: azimuth in [−π, π), zenith in [0, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleVector {
    pub azimuth: f64,
    pub zenith: f64,
}

impl AngleVector {
    /// Builds a canonical angle pair. Azimuth is wrapped; zenith must already
    /// lie in [0, π].
    pub fn new(azimuth: f64, zenith: f64) -> Result<Self> {
        if !azimuth.is_finite() || !zenith.is_finite() {
            return Err(Error::invalid("angles must be finite"));
        }
        if !(0.0..=PI).contains(&zenith) {
            return Err(Error::invalid(format!("zenith {zenith} outside [0, pi]")));
        }
        Ok(AngleVector {
            azimuth: wrap_angle(azimuth),
            zenith,
        })
    }

    /// Like [`AngleVector::new`] but folds any zenith back into [0, π] by
    /// reflection at the poles (the azimuth flips by π on each reflection).
    pub fn reflected(azimuth: f64, zenith: f64) -> Self {
        let mut az = azimuth;
        let mut z = zenith.rem_euclid(TAU);
        if z > PI {
            z = TAU - z;
            az += PI;
        }
        AngleVector {
            azimuth: wrap_angle(az),
            zenith: z,
        }
    }

    pub fn from_degrees(azimuth_deg: f64, zenith_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), zenith_deg.to_radians())
    }

    /// Direction of an arbitrary non-zero vector.
    pub fn of(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) {
            return Err(Error::DegenerateGeometry("zero-length direction".into()));
        }
        let zenith = (v.z / n).clamp(-1.0, 1.0).acos();
        let azimuth = if v.horizontal_norm() == 0.0 {
            0.0
        } else {
            v.y.atan2(v.x)
        };
        Ok(AngleVector {
            azimuth: wrap_angle(azimuth),
            zenith,
        })
    }

    pub fn reversed(self) -> Self {
        AngleVector {
            azimuth: wrap_angle(self.azimuth + PI),
            zenith: PI - self.zenith,
        }
    }
}

/// (sin θ cos φ, sin θ sin φ, cos θ).
pub fn unit_vector(angles: AngleVector) -> Vec3 {
    let (st, ct) = angles.zenith.sin_cos();
    let (sp, cp) = angles.azimuth.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// Unit vectors (ê_θ, ê_φ) of the spherical basis at `angles`.
pub fn spherical_basis(angles: AngleVector) -> (Vec3, Vec3) {
    let (st, ct) = angles.zenith.sin_cos();
    let (sp, cp) = angles.azimuth.sin_cos();
    (Vec3::new(ct * cp, ct * sp, -st), Vec3::new(-sp, cp, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVector {
    pub direction: Vec3,
    /// rad/m
    pub magnitude: f64,
}

impl WaveVector {
    pub fn vector(&self) -> Vec3 {
        self.direction * self.magnitude
    }

    /// Phase k·x accumulated at position `x`.
    pub fn phase_at(&self, x: Vec3) -> f64 {
        self.magnitude * self.direction.dot(x)
    }
}

pub fn wavelength(frequency: f64) -> f64 {
    SPEED_OF_LIGHT / frequency
}

pub fn wave_vector(frequency: f64, angles: AngleVector) -> Result<WaveVector> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::invalid(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    Ok(WaveVector {
        direction: unit_vector(angles),
        magnitude: TAU * frequency / SPEED_OF_LIGHT,
    })
}

/// Doppler phase argument (k·v)·t in radians.
pub fn doppler_phase(k: &WaveVector, velocity: Vec3, t: f64) -> f64 {
    k.vector().dot(velocity) * t
}

/// Departure angles of the tx→rx ray and arrival angles at rx (pointing back
/// towards tx).
pub fn los_angles(tx_pos: Vec3, rx_pos: Vec3) -> Result<(AngleVector, AngleVector)> {
    let d = rx_pos - tx_pos;
    if d.norm() == 0.0 {
        return Err(Error::DegenerateGeometry(
            "transmitter and receiver coincide".into(),
        ));
    }
    // both ends from the same difference vector so swapping tx and rx swaps
    // the results bit for bit
    Ok((AngleVector::of(d)?, AngleVector::of(-d)?))
}

/// Proper rotation matrix mapping local coordinates to global ones:
/// `global = R · local`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Validates orthonormality and det = +1 to 1e-9.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("rotation has non-finite entries"));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-9 {
                    return Err(Error::invalid("rotation matrix is not orthonormal"));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("rotation determinant {det} != +1")));
        }
        Ok(Rotation { m })
    }

    pub fn about_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation {
            m: [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        }
    }

    pub fn about_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation {
            m: [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        }
    }

    pub fn about_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Orientation of a panel whose boresight points at `bearing` (azimuth)
    /// and is mechanically tilted down by `downtilt` (both radians).
    pub fn bearing_downtilt(bearing: f64, downtilt: f64) -> Self {
        Rotation::about_z(bearing).then(&Rotation::about_y(downtilt))
    }

    /// `self · inner`: apply `inner` first, then `self`.
    pub fn then(&self, inner: &Rotation) -> Rotation {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * inner.m[k][j]).sum();
            }
        }
        Rotation { m: out }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn apply_inverse(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    /// Global direction expressed in the local frame.
    pub fn to_local(&self, global: AngleVector) -> AngleVector {
        // unit vectors always have non-zero norm
        AngleVector::of(self.apply_inverse(unit_vector(global))).expect("unit vector")
    }
}

/// Rotates local field components (F_θ', F_φ') of an element whose frame is
/// given by `orientation` into global (vertical, horizontal) components at
/// the global `direction`. The field norm is preserved.
pub fn field_lcs_to_gcs(
    pattern_vertical: f64,
    pattern_horizontal: f64,
    orientation: &Rotation,
    direction: AngleVector,
) -> (f64, f64) {
    let local = orientation.to_local(direction);
    let (lt, lp) = spherical_basis(local);
    let field = orientation.apply(lt * pattern_vertical + lp * pattern_horizontal);
    let (gt, gp) = spherical_basis(direction);
    (field.dot(gt), field.dot(gp))
}

/// Same as [`field_lcs_to_gcs`] but accepts a raw matrix and validates it.
pub fn field_lcs_to_gcs_checked(
    pattern_vertical: f64,
    pattern_horizontal: f64,
    orientation: [[f64; 3]; 3],
    direction: AngleVector,
) -> Result<(f64, f64)> {
    let r = Rotation::from_matrix(orientation)?;
    Ok(field_lcs_to_gcs(
        pattern_vertical,
        pattern_horizontal,
        &r,
        direction,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn unit_vector_examples() {
        let h = unit_vector(AngleVector::new(0.0, FRAC_PI_2).unwrap());
        assert!(close(h, Vec3::new(1.0, 0.0, 0.0), 1e-15));
        let z = unit_vector(AngleVector::new(1.234, 0.0).unwrap());
        assert!(close(z, Vec3::new(0.0, 0.0, 1.0), 1e-15));
        let s = 2f64.sqrt() / 2.0;
        let d = unit_vector(AngleVector::new(FRAC_PI_2, PI / 4.0).unwrap());
        assert!(close(d, Vec3::new(0.0, s, s), 1e-15));
    }

    #[test]
    fn wave_vector_at_two_ghz() {
        let dir = AngleVector::new(0.0, FRAC_PI_2).unwrap();
        let k = wave_vector(2e9, dir).unwrap();
        // 2π·2e9/299792458 evaluated by hand
        assert!((k.magnitude - 41.916_900_439_033_63).abs() < 1e-9);
        let k2 = wave_vector(4e9, dir).unwrap();
        assert!((k2.magnitude - 2.0 * k.magnitude).abs() < 1e-12);
        assert!(close(k.direction, Vec3::new(1.0, 0.0, 0.0), 1e-15));
        assert!(wave_vector(0.0, dir).is_err());
        assert!(wave_vector(-1.0, dir).is_err());
    }

    #[test]
    fn doppler_examples() {
        let dir = AngleVector::new(0.3, 1.1).unwrap();
        let k = wave_vector(2e9, dir).unwrap();
        assert_eq!(doppler_phase(&k, Vec3::ZERO, 5.0), 0.0);
        let perp = k.direction.cross(Vec3::new(0.0, 0.0, 1.0)).normalized();
        assert!(doppler_phase(&k, perp * 10.0, 3.0).abs() < 1e-12);

        let speed = 3.0 / 3.6;
        let v = k.direction * speed;
        let fd = doppler_phase(&k, v, 1.0) / TAU;
        let oracle = speed * 2e9 / SPEED_OF_LIGHT;
        assert!((fd - oracle).abs() < 1e-12);
        assert!((fd - 5.56).abs() < 0.01);
    }

    #[test]
    fn los_angle_examples() {
        let tx = Vec3::new(0.0, 0.0, 25.0);
        let (dep, arr) = los_angles(tx, Vec3::new(100.0, 0.0, 25.0)).unwrap();
        assert!(dep.azimuth.abs() < 1e-15 && (dep.zenith - FRAC_PI_2).abs() < 1e-15);
        assert!((arr.azimuth + PI).abs() < 1e-15 && (arr.zenith - FRAC_PI_2).abs() < 1e-15);

        let (dep, _) = los_angles(tx, Vec3::new(0.0, 0.0, 1.5)).unwrap();
        assert!((dep.zenith - PI).abs() < 1e-15);

        let (dep, _) = los_angles(tx, Vec3::new(10.0, 0.0, 15.0)).unwrap();
        assert!((dep.zenith - 3.0 * PI / 4.0).abs() < 1e-12);

        assert!(matches!(
            los_angles(tx, tx),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn los_reciprocity() {
        let a = Vec3::new(3.0, -40.0, 25.0);
        let b = Vec3::new(-120.0, 75.0, 7.5);
        let (d1, a1) = los_angles(a, b).unwrap();
        let (d2, a2) = los_angles(b, a).unwrap();
        assert!((d1.azimuth - a2.azimuth).abs() < 1e-12);
        assert!((d1.zenith - a2.zenith).abs() < 1e-12);
        assert!((a1.azimuth - d2.azimuth).abs() < 1e-12);
        assert!((a1.zenith - d2.zenith).abs() < 1e-12);
    }

    #[test]
    fn wrap_range() {
        for a in [-10.0, -PI, -1e-18, 0.0, PI, 3.5, 100.0] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
        }
    }

    #[test]
    fn reflected_zenith_stays_in_range() {
        let a = AngleVector::reflected(0.2, -0.1);
        assert!((a.zenith - 0.1).abs() < 1e-15);
        assert!((a.azimuth - (0.2 + PI - TAU)).abs() < 1e-12);
        let b = AngleVector::reflected(0.2, PI + 0.3);
        assert!((b.zenith - (PI - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn field_identity_rotation_is_noop() {
        let dir = AngleVector::new(0.7, 1.2).unwrap();
        let (v, h) = field_lcs_to_gcs(0.8, -0.3, &Rotation::IDENTITY, dir);
        assert!((v - 0.8).abs() < 1e-12 && (h + 0.3).abs() < 1e-12);
    }

    #[test]
    fn field_rotated_about_boresight_becomes_horizontal() {
        let boresight = AngleVector::new(0.0, FRAC_PI_2).unwrap();
        let r = Rotation::about_x(FRAC_PI_2);
        let (v, h) = field_lcs_to_gcs(1.0, 0.0, &r, boresight);

        // oracle: project the rotated local θ-vector on the global basis
        let (lt, _) = spherical_basis(boresight);
        let rotated = r.apply(lt);
        let (gt, gp) = spherical_basis(boresight);
        assert!((v - rotated.dot(gt)).abs() < 1e-12);
        assert!((h - rotated.dot(gp)).abs() < 1e-12);
        assert!(v.abs() < 1e-12);
        assert!((h.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn improper_rotation_rejected() {
        let mirror = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        let dir = AngleVector::new(0.0, 1.0).unwrap();
        assert!(field_lcs_to_gcs_checked(1.0, 0.0, mirror, dir).is_err());
        let skew = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(field_lcs_to_gcs_checked(1.0, 0.0, skew, dir).is_err());
    }
}
