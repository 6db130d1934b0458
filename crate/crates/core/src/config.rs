// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration as flat `dotted.key = value` text.
//!
//! Frequencies enter as `*_hz` keys and are converted to angular units only in
//! [`RunConfig::trap`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::chain::TrapSpec;
use crate::dicke::{FockSpec, Frame, DEFAULT_DIM_CAP, DEFAULT_N_MAX};
use crate::error::{Error, Result};
use crate::evolve::SpinTier;
use crate::protocol::{double_well_protocol, flux_protocol, DriveProtocol, DriveScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Flux,
    DoubleWell,
}

impl ProtocolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Flux => "flux",
            ProtocolKind::DoubleWell => "double-well",
        }
    }
}

impl FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "flux" => Ok(ProtocolKind::Flux),
            "double-well" | "double_well" => Ok(ProtocolKind::DoubleWell),
            o => Err(format!("unknown protocol `{o}` (expected flux or double-well)")),
        }
    }
}

/// A model tier selectable from the command line or a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Spin(SpinTier),
    Dicke,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Spin(t) => t.as_str(),
            Tier::Dicke => "dicke",
        }
    }
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "dicke" => Ok(Tier::Dicke),
            o => o.parse::<SpinTier>().map(Tier::Spin).map_err(|e| e.to_string()),
        }
    }
}

pub fn parse_tiers(s: &str) -> std::result::Result<Vec<Tier>, String> {
    let tiers: Vec<Tier> = s.split(',').filter(|x| !x.trim().is_empty()).map(str::parse).collect::<std::result::Result<_, _>>()?;
    if tiers.is_empty() {
        return Err("tier list is empty".into());
    }
    Ok(tiers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_ions: usize,
    pub mass_amu: f64,
    pub omega_xy_hz: f64,
    pub omega_z_hz: f64,
    pub rabi_hz: f64,
    pub omega_rec_hz: f64,
    pub delta_com_hz: f64,
    pub protocol: ProtocolKind,
    pub tau_over_delta: f64,
    pub mu0_over_jrms: f64,
    pub b0_over_jrms: f64,
    pub tiers: Vec<Tier>,
    pub frame: Frame,
    pub n_max: usize,
    pub dim_cap: usize,
    /// Evolution window in units of `1/J_rms`.
    pub window_jrms: f64,
    pub samples_per_period: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_ions: 3,
            mass_amu: 171.0,
            omega_xy_hz: 5.0e6,
            omega_z_hz: 0.9e6,
            rabi_hz: 200.0e3,
            omega_rec_hz: 26.0e3,
            delta_com_hz: 80.0e3,
            protocol: ProtocolKind::Flux,
            tau_over_delta: 0.25,
            mu0_over_jrms: 20.0,
            b0_over_jrms: 1.0,
            tiers: vec![Tier::Spin(SpinTier::Ising), Tier::Spin(SpinTier::Xx)],
            frame: Frame::Rotating,
            n_max: DEFAULT_N_MAX,
            dim_cap: DEFAULT_DIM_CAP,
            window_jrms: 15.0,
            samples_per_period: 4,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Every recognised key, in echo order.
pub const KEYS: &[&str] = &[
    "trap.n_ions",
    "trap.mass_amu",
    "trap.omega_xy_hz",
    "trap.omega_z_hz",
    "trap.rabi_hz",
    "trap.omega_rec_hz",
    "trap.delta_com_hz",
    "protocol.kind",
    "protocol.tau_over_delta",
    "protocol.mu0_over_jrms",
    "protocol.b0_over_jrms",
    "run.tiers",
    "run.window_jrms",
    "run.samples_per_period",
    "run.out_dir",
    "run.seed",
    "fock.frame",
    "fock.n_max",
    "fock.dim_cap",
];

/// Accepts plain numbers and simple fractions such as `1/3`.
fn parse_number(path: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim().parse().map_err(|_| Error::config(path, format!("not a number: `{v}`")))?,
                b.trim().parse().map_err(|_| Error::config(path, format!("not a number: `{v}`")))?,
            );
            a / b
        }
        None => v.parse().map_err(|_| Error::config(path, format!("not a number: `{v}`")))?,
    };
    if !x.is_finite() {
        return Err(Error::config(path, format!("value must be finite, got `{v}`")));
    }
    Ok(x)
}

fn parse_count(path: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::config(path, format!("expected a non-negative integer, got `{v}`")))
}

/// Flatten nested TOML tables into `a.b.c` keys.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn value_text(path: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => {
            items.iter().map(|x| value_text(path, x)).collect::<Result<Vec<_>>>()?.join(",")
        }
        _ => return Err(Error::config(path, "unsupported value type")),
    })
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1)),
            msg: e.message().to_string(),
        })?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut cfg = Self::default();
        for (key, value) in &entries {
            cfg.set(key, &value_text(key, value)?)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Set one dotted key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "trap.n_ions" => self.n_ions = parse_count(key, v)?,
            "trap.mass_amu" => self.mass_amu = parse_number(key, v)?,
            "trap.omega_xy_hz" => self.omega_xy_hz = parse_number(key, v)?,
            "trap.omega_z_hz" => self.omega_z_hz = parse_number(key, v)?,
            "trap.rabi_hz" => self.rabi_hz = parse_number(key, v)?,
            "trap.omega_rec_hz" => self.omega_rec_hz = parse_number(key, v)?,
            "trap.delta_com_hz" => self.delta_com_hz = parse_number(key, v)?,
            "protocol.kind" => self.protocol = v.parse().map_err(|e: String| Error::config(key, e))?,
            "protocol.tau_over_delta" => self.tau_over_delta = parse_number(key, v)?,
            "protocol.mu0_over_jrms" => self.mu0_over_jrms = parse_number(key, v)?,
            "protocol.b0_over_jrms" => self.b0_over_jrms = parse_number(key, v)?,
            "run.tiers" => self.tiers = parse_tiers(v).map_err(|e| Error::config(key, e))?,
            "run.window_jrms" => self.window_jrms = parse_number(key, v)?,
            "run.samples_per_period" => self.samples_per_period = parse_count(key, v)?,
            "run.out_dir" => self.out_dir = PathBuf::from(v),
            "run.seed" => self.seed = v.parse().map_err(|_| Error::config(key, format!("bad seed `{v}`")))?,
            "fock.frame" => self.frame = v.parse().map_err(|e: String| Error::config(key, e))?,
            "fock.n_max" => self.n_max = parse_count(key, v)?,
            "fock.dim_cap" => self.dim_cap = parse_count(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {x}")))
            }
        };
        if self.n_ions < 2 {
            return Err(Error::config("trap.n_ions", "need at least two ions"));
        }
        positive("trap.mass_amu", self.mass_amu)?;
        positive("trap.omega_z_hz", self.omega_z_hz)?;
        if self.omega_xy_hz <= self.omega_z_hz {
            return Err(Error::config("trap.omega_xy_hz", "must exceed trap.omega_z_hz"));
        }
        if self.rabi_hz < 0.0 || self.omega_rec_hz < 0.0 {
            return Err(Error::config("trap.rabi_hz", "Rabi and recoil frequencies must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.tau_over_delta) {
            return Err(Error::config("protocol.tau_over_delta", "must lie in [0, 1)"));
        }
        positive("protocol.mu0_over_jrms", self.mu0_over_jrms)?;
        positive("run.window_jrms", self.window_jrms)?;
        if self.samples_per_period == 0 {
            return Err(Error::config("run.samples_per_period", "must be at least 1"));
        }
        if self.n_max == 0 {
            return Err(Error::config("fock.n_max", "must be at least 1"));
        }
        if self.n_ions != 3 {
            return Err(Error::config("trap.n_ions", "the drive protocols are defined for three ions"));
        }
        Ok(())
    }

    /// Physical trap in angular units.
    pub fn trap(&self) -> TrapSpec {
        TrapSpec::uniform(
            self.n_ions,
            self.mass_amu,
            self.omega_xy_hz,
            self.omega_z_hz,
            self.rabi_hz,
            self.omega_rec_hz,
            self.delta_com_hz,
        )
    }

    pub fn fock(&self) -> FockSpec {
        FockSpec { n_max: self.n_max, dim_cap: self.dim_cap }
    }

    pub fn scale(&self, j_rms: f64) -> DriveScale {
        DriveScale::new(j_rms, self.mu0_over_jrms, self.b0_over_jrms)
    }

    pub fn build_protocol(&self, j_rms: f64) -> Result<DriveProtocol> {
        let s = self.scale(j_rms);
        match self.protocol {
            ProtocolKind::Flux => flux_protocol(self.tau_over_delta, &s),
            ProtocolKind::DoubleWell => double_well_protocol(self.tau_over_delta, &s),
        }
    }

    /// Text form of one key, as accepted by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "trap.n_ions" => self.n_ions.to_string(),
            "trap.mass_amu" => format!("{:?}", self.mass_amu),
            "trap.omega_xy_hz" => format!("{:?}", self.omega_xy_hz),
            "trap.omega_z_hz" => format!("{:?}", self.omega_z_hz),
            "trap.rabi_hz" => format!("{:?}", self.rabi_hz),
            "trap.omega_rec_hz" => format!("{:?}", self.omega_rec_hz),
            "trap.delta_com_hz" => format!("{:?}", self.delta_com_hz),
            "protocol.kind" => self.protocol.as_str().into(),
            "protocol.tau_over_delta" => format!("{:?}", self.tau_over_delta),
            "protocol.mu0_over_jrms" => format!("{:?}", self.mu0_over_jrms),
            "protocol.b0_over_jrms" => format!("{:?}", self.b0_over_jrms),
            "run.tiers" => self.tiers.iter().map(Tier::as_str).collect::<Vec<_>>().join(","),
            "run.window_jrms" => format!("{:?}", self.window_jrms),
            "run.samples_per_period" => self.samples_per_period.to_string(),
            "run.out_dir" => self.out_dir.display().to_string(),
            "run.seed" => self.seed.to_string(),
            "fock.frame" => self.frame.as_str().into(),
            "fock.n_max" => self.n_max.to_string(),
            "fock.dim_cap" => self.dim_cap.to_string(),
            _ => return None,
        })
    }

    /// Every key with its current value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let v = self.get(key).expect("listed key");
            let numeric = !matches!(*key, "protocol.kind" | "run.tiers" | "run.out_dir" | "fock.frame");
            if numeric {
                let _ = writeln!(s, "{key} = {v}");
            } else {
                let _ = writeln!(s, "{key} = \"{}\"", v.replace('\\', "\\\\").replace('"', "\\\""));
            }
        }
        s
    }

    /// SHA-256 of the physics-relevant keys (the output directory is left out).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for key in KEYS.iter().filter(|k| **k != "run.out_dir") {
            h.update(key.as_bytes());
            h.update(b"=");
            h.update(self.get(key).expect("listed key").as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn is_known_key(key: &str) -> bool {
        KEYS.contains(&key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_trap() {
        let c = RunConfig::default();
        assert_eq!(c.trap(), TrapSpec::reference());
        assert_eq!(c.mu0_over_jrms, 20.0);
        assert_eq!(c.b0_over_jrms, 1.0);
        assert_eq!(c.n_max, 4);
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.set("protocol.tau_over_delta", "1/3").unwrap();
        c.set("run.tiers", "ising,dicke").unwrap();
        c.set("fock.frame", "lab").unwrap();
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn nested_tables_and_arrays() {
        let text = "[trap]\nomega_z_hz = 1.0e6\n[run]\ntiers = [\"xx\", \"h_eff\"]\n";
        let c = RunConfig::from_text(text).unwrap();
        assert_eq!(c.omega_z_hz, 1.0e6);
        assert_eq!(c.tiers, vec![Tier::Spin(SpinTier::Xx), Tier::Spin(SpinTier::HEff)]);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::from_text("protocol.tau_over_delta = 1.5\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "protocol.tau_over_delta"));
        let e = RunConfig::from_text("trap.bogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "trap.bogus"));
        let e = RunConfig::from_text("run.tiers = \"ising,nope\"\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "run.tiers"));
        assert!(matches!(RunConfig::from_text("a = = 1"), Err(Error::Parse { .. })));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.tau_over_delta = 0.1;
        assert_ne!(a.hash(), b.hash());
    }
}
