//! Run configuration: TOML parsing over scenario defaults, validation,
//! canonical emission and hashing.
//!
//! A user file only needs the keys it changes. Parsing overlays the file on
//! the full default tree of its scenario, so every key in the file must
//! exist in that tree (unknown keys are rejected with their dotted path) and
//! must have the same type (integers are accepted where a float is
//! expected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use crate::antenna::{FieldModel, PatternSpec, Polarization, PortMapping};
use crate::deploy::DropParams;
use crate::error::{Error, Result};
use crate::lsp::{
    default_lsp_tables, Condition, LosProbability, LspDistributionSpec, PathlossParams, Scenario,
};
use crate::ssp::SspParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropMode {
    #[serde(rename = "3d")]
    ThreeD,
    #[serde(rename = "legacy2d")]
    Legacy2d,
}

impl DropMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DropMode::ThreeD => "3d",
            DropMode::Legacy2d => "legacy2d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UePattern {
    Isotropic,
    /// Same sector element pattern as the base station.
    Element,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub n_rings: usize,
    pub isd: f64,
    pub h_bs: f64,
    pub p_tx_dbm: f64,
    pub wraparound: bool,
    /// Spatially correlate LSPs across UEs of the same site.
    pub spatial_correlation: bool,
    /// Grid spacing of the correlation fields (m).
    pub field_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaConfig {
    /// Vertical elements per column (M).
    pub rows: usize,
    /// Columns (N).
    pub cols: usize,
    /// Horizontal spacing in wavelengths.
    pub d_h: f64,
    pub polarization: Polarization,
    pub port_mapping: PortMapping,
    pub field_model: FieldModel,
    pub mech_tilt_deg: f64,
    pub element: PatternSpec,
    pub ue_antennas: usize,
    pub ue_polarization: Polarization,
    pub ue_spacing: f64,
    pub ue_pattern: UePattern,
}

/// Sweep points; every (downtilt, d_v) combination is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Electrical downtilt below the horizon (degrees).
    pub downtilt_deg: Vec<f64>,
    /// Vertical element spacing (wavelengths).
    pub d_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerCondition<T> {
    pub los: T,
    pub nlos: T,
    pub o2i: T,
}

impl<T> PerCondition<T> {
    pub fn get(&self, c: Condition) -> &T {
        match c {
            Condition::Los => &self.los,
            Condition::Nlos => &self.nlos,
            Condition::O2i => &self.o2i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub n_ue: usize,
    pub seed: u64,
    pub carrier_hz: f64,
    /// 1: slow-fading metrics only; 2: adds fast fading, spreads, eigenvalues.
    pub phase: u8,
    pub drop_mode: DropMode,
    pub output_dir: PathBuf,
    /// Time samples (s) at which phase-2 channels are evaluated.
    pub times_s: Vec<f64>,
    pub layout: LayoutConfig,
    pub drop: DropParams,
    pub antenna: AntennaConfig,
    pub sweep: SweepConfig,
    pub pathloss: PathlossParams,
    pub los_probability: LosProbability,
    pub lsp: PerCondition<LspDistributionSpec>,
    pub ssp: PerCondition<SspParams>,
}

impl RunConfig {
    pub fn default_for(scenario: Scenario) -> RunConfig {
        let [los, nlos, o2i] = default_lsp_tables(scenario);
        let (isd, h_bs, min_distance) = match scenario {
            Scenario::Uma => (500.0, 25.0, 35.0),
            Scenario::Umi => (200.0, 10.0, 10.0),
        };
        RunConfig {
            scenario,
            n_ue: 570,
            seed: 1,
            carrier_hz: 2e9,
            phase: 1,
            drop_mode: DropMode::ThreeD,
            output_dir: PathBuf::from("out"),
            times_s: vec![0.0],
            layout: LayoutConfig {
                n_rings: 2,
                isd,
                h_bs,
                p_tx_dbm: 46.0,
                wraparound: false,
                spatial_correlation: true,
                field_spacing: 5.0,
            },
            drop: DropParams {
                min_distance,
                ..DropParams::default()
            },
            antenna: AntennaConfig {
                rows: 10,
                cols: 1,
                d_h: 0.5,
                polarization: Polarization::Single,
                port_mapping: PortMapping::Column,
                field_model: FieldModel::Slant,
                mech_tilt_deg: 0.0,
                element: PatternSpec::ELEMENT,
                ue_antennas: 1,
                ue_polarization: Polarization::Single,
                ue_spacing: 0.5,
                ue_pattern: UePattern::Isotropic,
            },
            sweep: SweepConfig {
                downtilt_deg: vec![12.0],
                d_v: vec![0.5],
            },
            pathloss: PathlossParams::default_for(scenario),
            los_probability: LosProbability::default(),
            lsp: PerCondition { los, nlos, o2i },
            ssp: PerCondition {
                los: SspParams::default_for(Condition::Los),
                nlos: SspParams::default_for(Condition::Nlos),
                o2i: SspParams::default_for(Condition::O2i),
            },
        }
    }

    /// Parses TOML text over the defaults of its `scenario` (UMa when
    /// absent) and validates the result.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        let scenario = match user.get("scenario") {
            None => Scenario::Uma,
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|_| Error::config("scenario", "expected \"uma\" or \"umi\""))?,
        };
        let mut tree = Value::try_from(RunConfig::default_for(scenario))
            .map_err(|e| Error::config("<defaults>", e.to_string()))?;
        overlay(&mut tree, Value::Table(user), "")?;
        let cfg: RunConfig = tree
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml_str(&text)
    }

    /// Canonical, fully expanded TOML form.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    /// SHA-256 of the canonical form, hex encoded. The output directory is
    /// left out since it does not affect results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        if self.n_ue == 0 {
            return Err(Error::config("n_ue", "must be at least 1"));
        }
        positive("carrier_hz", self.carrier_hz)?;
        let [lo, hi] = self.pathloss.frequency_range_ghz;
        let f_ghz = self.carrier_hz / 1e9;
        if !(lo..=hi).contains(&f_ghz) {
            return Err(Error::config(
                "carrier_hz",
                format!("{f_ghz} GHz outside pathloss.frequency_range_ghz"),
            ));
        }
        if self.pathloss.scenario != self.scenario {
            return Err(Error::config(
                "pathloss.scenario",
                "must match the top-level scenario",
            ));
        }
        if !matches!(self.phase, 1 | 2) {
            return Err(Error::config(
                "phase",
                format!("must be 1 or 2, got {}", self.phase),
            ));
        }
        if self.times_s.is_empty() || self.times_s.iter().any(|t| !t.is_finite()) {
            return Err(Error::config(
                "times_s",
                "need at least one finite time sample",
            ));
        }
        positive("layout.isd", self.layout.isd)?;
        positive("layout.h_bs", self.layout.h_bs)?;
        positive("layout.field_spacing", self.layout.field_spacing)?;
        if self.layout.wraparound && self.layout.n_rings == 0 {
            return Err(Error::config(
                "layout.wraparound",
                "needs at least one ring",
            ));
        }
        let d = &self.drop;
        if !(0.0..=1.0).contains(&d.indoor_fraction) {
            return Err(Error::config("drop.indoor_fraction", "must lie in [0, 1]"));
        }
        if d.min_floors == 0 || d.max_floors < d.min_floors {
            return Err(Error::config(
                "drop.min_floors",
                "need 1 <= min_floors <= max_floors",
            ));
        }
        if !(d.min_distance >= 0.0) || d.min_distance >= self.layout.isd / 3.0 {
            return Err(Error::config("drop.min_distance", "must lie in [0, isd/3)"));
        }
        if !(d.speed_kmh >= 0.0) {
            return Err(Error::config("drop.speed_kmh", "must be >= 0"));
        }
        let a = &self.antenna;
        if a.rows == 0 {
            return Err(Error::config("antenna.rows", "must be at least 1"));
        }
        if a.cols == 0 {
            return Err(Error::config("antenna.cols", "must be at least 1"));
        }
        positive("antenna.d_h", a.d_h)?;
        if a.ue_antennas == 0 {
            return Err(Error::config("antenna.ue_antennas", "must be at least 1"));
        }
        positive("antenna.ue_spacing", a.ue_spacing)?;
        a.element
            .validate()
            .map_err(|e| Error::config("antenna.element", e.to_string()))?;
        if self.sweep.downtilt_deg.is_empty()
            || self
                .sweep
                .downtilt_deg
                .iter()
                .any(|t| !(-90.0..=90.0).contains(t))
        {
            return Err(Error::config(
                "sweep.downtilt_deg",
                "need at least one tilt in [-90, 90]",
            ));
        }
        if self.sweep.d_v.is_empty() {
            return Err(Error::config("sweep.d_v", "need at least one spacing"));
        }
        for v in &self.sweep.d_v {
            positive("sweep.d_v", *v)?;
        }
        positive("los_probability.decay", self.los_probability.decay)?;
        for c in Condition::ALL {
            let name = condition_name(c);
            self.lsp.get(c).prepare().map_err(|e| match e {
                Error::Config { field, message } => {
                    Error::config(format!("lsp.{name}.{field}"), message)
                }
                other => Error::config(format!("lsp.{name}"), other.to_string()),
            })?;
            self.ssp
                .get(c)
                .validate()
                .map_err(|e| Error::config(format!("ssp.{name}"), e.to_string()))?;
        }
        Ok(())
    }
}

pub fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::Uma => "uma",
        Scenario::Umi => "umi",
    }
}

pub fn condition_name(c: Condition) -> &'static str {
    match c {
        Condition::Los => "los",
        Condition::Nlos => "nlos",
        Condition::O2i => "o2i",
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Checks `user` against the shape of `default` (the first element of a
/// default array gives the element shape) and converts integers to floats
/// where the default is a float.
fn conform(default: &Value, user: Value, path: &str) -> Result<Value> {
    match (default, user) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Table(_), user @ Value::Table(_)) => {
            let mut d = default.clone();
            overlay(&mut d, user, path)?;
            Ok(d)
        }
        (Value::Array(da), Value::Array(ua)) => match da.first() {
            Some(shape) => ua
                .into_iter()
                .enumerate()
                .map(|(i, u)| conform(shape, u, &format!("{path}[{i}]")))
                .collect::<Result<Vec<_>>>()
                .map(Value::Array),
            None => Ok(Value::Array(ua)),
        },
        (d, u) if std::mem::discriminant(d) == std::mem::discriminant(&u) => Ok(u),
        (d, u) => Err(Error::config(
            path,
            format!("expected {}, found {}", type_name(d), type_name(&u)),
        )),
    }
}

fn overlay(base: &mut Value, user: Value, path: &str) -> Result<()> {
    let (Value::Table(bt), Value::Table(ut)) = (&mut *base, user) else {
        return Err(Error::config(path, "expected a table"));
    };
    for (key, uv) in ut {
        let p = join(path, &key);
        let Some(bv) = bt.get_mut(&key) else {
            return Err(Error::config(p, "unknown key"));
        };
        *bv = conform(bv, uv, &p)?;
    }
    Ok(())
}

/// Annotated reference file listing every key with its default value.
pub fn reference_config(scenario: Scenario) -> String {
    let cfg = RunConfig::default_for(scenario);
    let mut out = String::new();
    out.push_str("# Reference run configuration with every key at its default value.\n");
    out.push_str("# A run file only needs the keys it overrides.\n");
    out.push_str("#\n");
    out.push_str("# scenario: uma | umi (selects all scenario-dependent defaults)\n");
    out.push_str("# phase: 1 = slow fading metrics, 2 = adds fast fading, spreads, eigenvalues\n");
    out.push_str("# drop_mode: 3d | legacy2d\n");
    out.push_str(
        "# carrier_hz in Hz, times_s in seconds, distances in meters, angles in degrees\n",
    );
    out.push_str("# lsp.*: marginals are (mu, sigma) in dB for sf/k and log10 units for ds (s)\n");
    out.push_str("#   and spreads (deg); correlation order is sf, k, ds, asa, asd, esa, esd;\n");
    out.push_str("#   decorrelation in m (0 disables); spread_caps for asa, asd, esa, esd\n");
    out.push_str("# ssp.*.xpr_convention: as-displayed (sqrt(kappa) off-diagonal) | inverse\n");
    out.push_str("# antenna.field_model: slant | rotated-element\n");
    out.push_str("# antenna.port_mapping: column (K = M) | element (K = 1)\n\n");
    out.push_str(&cfg.to_toml());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default_for(Scenario::Uma));
        let c = RunConfig::from_toml_str("scenario = \"umi\"\nn_ue = 57\n").unwrap();
        assert_eq!(c.layout.isd, 200.0);
        assert_eq!(c.n_ue, 57);
    }

    #[test]
    fn negative_isd_names_field() {
        let e = RunConfig::from_toml_str("[layout]\nisd = -500\n").unwrap_err();
        match e {
            Error::Config { field, .. } => assert_eq!(field, "layout.isd"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        let e = RunConfig::from_toml_str("[layout]\nisdd = 500\n").unwrap_err();
        assert!(
            matches!(e, Error::Config { ref field, .. } if field == "layout.isdd"),
            "{e}"
        );
        let e = RunConfig::from_toml_str("n_ue = \"many\"\n").unwrap_err();
        assert!(
            matches!(e, Error::Config { ref field, .. } if field == "n_ue"),
            "{e}"
        );
        let e = RunConfig::from_toml_str("[sweep]\nd_v = [0.5, \"x\"]\n").unwrap_err();
        assert!(
            matches!(e, Error::Config { ref field, .. } if field == "sweep.d_v[1]"),
            "{e}"
        );
    }

    #[test]
    fn integers_widen_to_floats() {
        let c = RunConfig::from_toml_str(
            "carrier_hz = 2000000000\n[sweep]\ndowntilt_deg = [6, 9, 12]\n",
        )
        .unwrap();
        assert_eq!(c.sweep.downtilt_deg, vec![6.0, 9.0, 12.0]);
    }

    #[test]
    fn non_psd_correlation_rejected() {
        let mut rows = vec![vec![0.0; 7]; 7];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        rows[2][3] = 0.9;
        rows[3][2] = 0.9;
        rows[2][4] = 0.9;
        rows[4][2] = 0.9;
        rows[3][4] = -0.9;
        rows[4][3] = -0.9;
        let text = format!("[lsp.nlos]\ncorrelation = {rows:?}\n");
        let e = RunConfig::from_toml_str(&text).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref field, .. } if field == "lsp.nlos.correlation"),
            "{e}"
        );
    }

    #[test]
    fn round_trip() {
        for s in [Scenario::Uma, Scenario::Umi] {
            let mut c = RunConfig::default_for(s);
            c.sweep.downtilt_deg = vec![6.0, 9.0, 12.0];
            c.seed = 12345;
            c.drop_mode = DropMode::Legacy2d;
            let text = c.to_toml();
            assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
            assert_eq!(
                RunConfig::from_toml_str(&reference_config(s)).unwrap(),
                RunConfig::default_for(s)
            );
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default_for(Scenario::Uma);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
