//! Flat `key = value` configuration with optional `[section]` headers.
//!
//! Keys before the first header apply to every subcommand; keys inside
//! `[name]` apply only to the subcommand `name` and override the shared ones.
//! Lists are comma separated and temperatures accept `inf`.

use std::collections::BTreeMap;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::coherent::Protocol;
use crate::error::{CoolError, Result};
use crate::spectra::{Hamiltonian, InverseTemperature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    CoolCoherent,
    CoolIncoherent,
    Bound,
    SweepFigure,
    Correlate,
    Stu,
    Oracle,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::CoolCoherent,
        Scenario::CoolIncoherent,
        Scenario::Bound,
        Scenario::SweepFigure,
        Scenario::Correlate,
        Scenario::Stu,
        Scenario::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CoolCoherent => "cool-coherent",
            Scenario::CoolIncoherent => "cool-incoherent",
            Scenario::Bound => "bound",
            Scenario::SweepFigure => "sweep-figure",
            Scenario::Correlate => "correlate",
            Scenario::Stu => "stu",
            Scenario::Oracle => "oracle",
        }
    }
}

impl FromStr for Scenario {
    type Err = CoolError;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CoolError::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// Inclusive linear grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64)
            .collect()
    }
}

const KEYS: &[&str] = &[
    "scenario",
    "system_energies",
    "machine_energies",
    "machine_gaps",
    "beta_r",
    "t_r",
    "beta_h",
    "t_h",
    "beta_prime",
    "targets",
    "budgets",
    "seed",
    "output_path",
    "json_path",
    "oracle_samples",
    "workers",
    "protocol",
    "mode",
    "approach",
    "cycles",
    "max_steps",
    "tol",
    "t_h_max",
];

/// Validated settings for one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub system_energies: Option<Vec<f64>>,
    pub machine_energies: Option<Vec<f64>>,
    /// Two-qubit machine gaps `M1, M2`.
    pub machine_gaps: Option<(f64, f64)>,
    pub beta_r: InverseTemperature,
    pub beta_h: Option<InverseTemperature>,
    pub beta_prime: Option<InverseTemperature>,
    pub targets: Option<Grid>,
    pub budgets: Option<Grid>,
    pub seed: u64,
    pub output_path: Option<String>,
    pub json_path: Option<String>,
    pub oracle_samples: usize,
    pub workers: usize,
    pub protocol: Protocol,
    pub mode: Option<String>,
    pub approach: Option<String>,
    pub cycles: usize,
    pub max_steps: usize,
    pub tol: f64,
    /// Largest `T_H / T_R` on the finite part of the sweep grid.
    pub t_h_max: f64,
    /// Effective key-value pairs, used for the config hash.
    pub entries: BTreeMap<String, String>,
}

/// Parses the raw text into shared and per-section maps.
pub fn parse_sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut section = String::new();
    out.insert(section.clone(), BTreeMap::new());
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            out.entry(section.clone()).or_default();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CoolError::InvalidArgument(format!("line {}: expected key = value", n + 1)))?;
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(CoolError::InvalidArgument(format!("line {}: unknown key '{k}'", n + 1)));
        }
        out.get_mut(&section).expect("inserted").insert(k, v.trim().to_string());
    }
    Ok(out)
}

fn num(key: &str, v: &str) -> Result<f64> {
    let x = match v.trim() {
        "inf" | "+inf" | "infinity" => f64::INFINITY,
        t => t
            .parse::<f64>()
            .map_err(|_| CoolError::InvalidArgument(format!("{key}: cannot parse '{t}' as a number")))?,
    };
    if x.is_nan() {
        return Err(CoolError::InvalidArgument(format!("{key}: NaN is not allowed")));
    }
    Ok(x)
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    let xs = v.split(',').map(|t| num(key, t)).collect::<Result<Vec<_>>>()?;
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(CoolError::InvalidArgument(format!("{key}: entries must be finite")));
    }
    Ok(xs)
}

fn int<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| CoolError::InvalidArgument(format!("{key}: cannot parse '{v}' as an integer")))
}

fn grid(key: &str, v: &str) -> Result<Grid> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 3 {
        return Err(CoolError::InvalidArgument(format!("{key}: expected 'count, lo, hi'")));
    }
    let count: usize = int(key, parts[0])?;
    if count == 0 {
        return Err(CoolError::InvalidArgument(format!("{key}: grid must be non-empty")));
    }
    let (lo, hi) = (num(key, parts[1])?, num(key, parts[2])?);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(CoolError::InvalidArgument(format!("{key}: bounds must be finite")));
    }
    Ok(Grid { count, lo, hi })
}

fn temperature(entries: &BTreeMap<String, String>, beta_key: &str, t_key: &str) -> Result<Option<InverseTemperature>> {
    match (entries.get(beta_key), entries.get(t_key)) {
        (Some(_), Some(_)) => Err(CoolError::InvalidArgument(format!("give only one of {beta_key} and {t_key}"))),
        (Some(b), None) => Ok(Some(InverseTemperature::new(num(beta_key, b)?)?)),
        (None, Some(t)) => Ok(Some(InverseTemperature::from_temperature(num(t_key, t)?)?)),
        (None, None) => Ok(None),
    }
}

impl ExperimentConfig {
    /// Effective configuration of `scenario` from config text plus command
    /// line overrides.
    pub fn from_text(text: &str, scenario: Scenario, overrides: &[(&str, String)]) -> Result<Self> {
        let sections = parse_sections(text)?;
        let mut entries = sections.get("").cloned().unwrap_or_default();
        if let Some(sec) = sections.get(scenario.name()) {
            entries.extend(sec.clone());
        }
        for (k, v) in overrides {
            entries.insert(k.to_string(), v.clone());
        }
        if let Some(s) = entries.get("scenario") {
            let s: Scenario = s.parse()?;
            if s != scenario {
                return Err(CoolError::InvalidArgument(format!(
                    "config is for scenario '{}' but '{}' was requested",
                    s.name(),
                    scenario.name()
                )));
            }
        }
        entries.insert("scenario".into(), scenario.name().into());
        Self::from_entries(scenario, entries)
    }

    fn from_entries(scenario: Scenario, entries: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| entries.get(k).map(String::as_str);
        let machine_gaps = match get("machine_gaps") {
            None => None,
            Some(v) => {
                let g = list("machine_gaps", v)?;
                if g.len() != 2 {
                    return Err(CoolError::InvalidArgument("machine_gaps: expected 'M1, M2'".into()));
                }
                Some((g[0], g[1]))
            }
        };
        let beta_r = temperature(&entries, "beta_r", "t_r")?.unwrap_or(InverseTemperature::new(1.0)?);
        let beta_h = temperature(&entries, "beta_h", "t_h")?;
        if let Some(bh) = beta_h {
            if bh.beta() > beta_r.beta() {
                return Err(CoolError::InvalidArgument("T_H must be at least T_R".into()));
            }
        }
        let beta_prime = match get("beta_prime") {
            Some(v) => Some(InverseTemperature::new(num("beta_prime", v)?)?),
            None => None,
        };
        let protocol = match get("protocol").unwrap_or("A") {
            "A" | "a" => Protocol::A,
            "B" | "b" => Protocol::B,
            other => return Err(CoolError::InvalidArgument(format!("protocol: unknown '{other}'"))),
        };
        let tol = get("tol").map(|v| num("tol", v)).transpose()?.unwrap_or(crate::coherent::DEFAULT_TOL);
        if !(tol > 0.0) {
            return Err(CoolError::InvalidArgument("tol must be positive".into()));
        }
        let t_h_max = get("t_h_max").map(|v| num("t_h_max", v)).transpose()?.unwrap_or(1e3);
        if !(t_h_max > 1.0) || !t_h_max.is_finite() {
            return Err(CoolError::InvalidArgument("t_h_max must be a finite ratio above 1".into()));
        }
        Ok(Self {
            scenario,
            system_energies: get("system_energies").map(|v| list("system_energies", v)).transpose()?,
            machine_energies: get("machine_energies").map(|v| list("machine_energies", v)).transpose()?,
            machine_gaps,
            beta_r,
            beta_h,
            beta_prime,
            targets: get("targets").map(|v| grid("targets", v)).transpose()?,
            budgets: get("budgets").map(|v| grid("budgets", v)).transpose()?,
            seed: get("seed").map(|v| int("seed", v)).transpose()?.unwrap_or(0),
            output_path: get("output_path").map(str::to_string),
            json_path: get("json_path").map(str::to_string),
            oracle_samples: get("oracle_samples").map(|v| int("oracle_samples", v)).transpose()?.unwrap_or(0),
            workers: get("workers").map(|v| int("workers", v)).transpose()?.unwrap_or(1).max(1),
            protocol,
            mode: get("mode").map(str::to_string),
            approach: get("approach").map(str::to_string),
            cycles: get("cycles").map(|v| int("cycles", v)).transpose()?.unwrap_or(20),
            max_steps: get("max_steps")
                .map(|v| int("max_steps", v))
                .transpose()?
                .unwrap_or(crate::coherent::DEFAULT_MAX_STEPS),
            tol,
            t_h_max,
            entries,
        })
    }

    /// SHA-256 of the effective `key=value` lines in key order, leaving out
    /// the output destinations.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries.iter().filter(|(k, _)| !k.ends_with("_path")) {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn system(&self) -> Result<Hamiltonian> {
        let e = self
            .system_energies
            .clone()
            .ok_or_else(|| CoolError::InvalidArgument("system_energies is required".into()))?;
        Hamiltonian::new(e)
    }

    pub fn machine(&self) -> Result<Hamiltonian> {
        let e = self
            .machine_energies
            .clone()
            .ok_or_else(|| CoolError::InvalidArgument("machine_energies is required".into()))?;
        Hamiltonian::new(e)
    }

    pub fn require_beta_h(&self) -> Result<InverseTemperature> {
        self.beta_h.ok_or_else(|| CoolError::InvalidArgument("beta_h or t_h is required".into()))
    }

    pub fn require_targets(&self) -> Result<Grid> {
        self.targets.ok_or_else(|| CoolError::InvalidArgument("targets grid is required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# shared\nbeta_r = 1\nseed = 4\n[correlate]\nsystem_energies = 0, 0.5, 1.2\ntargets = 3, 0, 1\n[oracle]\nt_r = inf\n";

    #[test]
    fn sections_override_shared_keys() {
        let c = ExperimentConfig::from_text(TEXT, Scenario::Correlate, &[]).unwrap();
        assert_eq!(c.beta_r.beta(), 1.0);
        assert_eq!(c.seed, 4);
        assert_eq!(c.system_energies, Some(vec![0.0, 0.5, 1.2]));
        assert_eq!(c.targets.unwrap().points(), vec![0.0, 0.5, 1.0]);
        let o = ExperimentConfig::from_text(TEXT, Scenario::Oracle, &[]);
        assert!(o.is_err(), "beta_r and t_r together");
    }

    #[test]
    fn temperatures_accept_inf() {
        let c = ExperimentConfig::from_text("t_r = 1\nt_h = inf\n", Scenario::CoolIncoherent, &[]).unwrap();
        assert_eq!(c.beta_h.unwrap().beta(), 0.0);
        let c = ExperimentConfig::from_text("t_r = 0\n", Scenario::Bound, &[]).unwrap();
        assert!(c.beta_r.is_infinite());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_text("bogus = 1\n", Scenario::Bound, &[]).is_err());
        assert!(ExperimentConfig::from_text("targets = 0, 0, 1\n", Scenario::Bound, &[]).is_err());
        assert!(ExperimentConfig::from_text("t_r = 2\nt_h = 1\n", Scenario::Bound, &[]).is_err());
        assert!(ExperimentConfig::from_text("scenario = stu\n", Scenario::Bound, &[]).is_err());
        assert!(ExperimentConfig::from_text("no equals sign\n", Scenario::Bound, &[]).is_err());
    }

    #[test]
    fn hash_tracks_effective_entries() {
        let a = ExperimentConfig::from_text(TEXT, Scenario::Correlate, &[]).unwrap();
        let b = ExperimentConfig::from_text(TEXT, Scenario::Correlate, &[("seed", "5".into())]).unwrap();
        let c = ExperimentConfig::from_text(&format!("{TEXT}\n# trailing comment\n"), Scenario::Correlate, &[]).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
