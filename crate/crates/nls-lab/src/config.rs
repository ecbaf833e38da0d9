//! Scenario configuration: a flat `key = value` text format, fully
//! round-trippable, with a stable FNV-64 hash embedded in every artifact.
//!
//! Unknown keys, malformed values and out-of-range physics are reported as
//! a list of precise field errors, never silently defaulted.

use crate::error::{Error, Result};
use crate::params::{PhysParams, A_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Spectrum,
    Orbit,
    Classify,
    LpSweep,
    VirialCheck,
    Evolve,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Spectrum => "spectrum",
            ScenarioKind::Orbit => "orbit",
            ScenarioKind::Classify => "classify",
            ScenarioKind::LpSweep => "lp-sweep",
            ScenarioKind::VirialCheck => "virial-check",
            ScenarioKind::Evolve => "evolve",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spectrum" => Some(ScenarioKind::Spectrum),
            "orbit" => Some(ScenarioKind::Orbit),
            "classify" => Some(ScenarioKind::Classify),
            "lp-sweep" => Some(ScenarioKind::LpSweep),
            "virial-check" => Some(ScenarioKind::VirialCheck),
            "evolve" => Some(ScenarioKind::Evolve),
            _ => None,
        }
    }
}

/// How a classification / evolution datum is built.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    /// g_{θ,μ} W
    SymmetryW { theta: f64, mu: f64 },
    /// c · W
    ScaledW { c: f64 },
    /// tuned truncated super-threshold profile with truncation radius r0
    SuperThreshold { r0: f64 },
}

impl DatumSpec {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |m: &str| Err(format!("datum '{s}': {m}"));
        match parts.as_slice() {
            ["g-w", theta, mu] => match (theta.parse(), mu.parse()) {
                (Ok(theta), Ok(mu)) => {
                    if !(mu > 0.0) {
                        return bad("scale must be positive");
                    }
                    Ok(DatumSpec::SymmetryW { theta, mu })
                }
                _ => bad("expected g-w:<theta>:<mu> with numeric fields"),
            },
            ["scaled-w", c] => match c.parse() {
                Ok(c) => Ok(DatumSpec::ScaledW { c }),
                _ => bad("expected scaled-w:<c> with numeric c"),
            },
            ["super", r0] => match r0.parse() {
                Ok(r0) => Ok(DatumSpec::SuperThreshold { r0 }),
                _ => bad("expected super:<r0> with numeric r0"),
            },
            _ => bad("expected one of g-w:<theta>:<mu>, scaled-w:<c>, super:<r0>"),
        }
    }

    fn serialize(&self) -> String {
        match self {
            DatumSpec::SymmetryW { theta, mu } => format!("g-w:{theta}:{mu}"),
            DatumSpec::ScaledW { c } => format!("scaled-w:{c}"),
            DatumSpec::SuperThreshold { r0 } => format!("super:{r0}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub a: f64,
    pub grid_n: usize,
    pub grid_r_min: f64,
    pub grid_r_max: f64,
    pub seed: u64,
    /// branch seed amplitude / perturbation size
    pub eps: f64,
    /// "plus" or "minus"
    pub branch_plus: bool,
    pub r_cut: f64,
    pub t_end: f64,
    pub dt_max: f64,
    pub absorbing: bool,
    pub datum: DatumSpec,
    pub out: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::Spectrum,
            a: -0.04,
            grid_n: 1024,
            grid_r_min: 1e-4,
            grid_r_max: 200.0,
            seed: 1,
            eps: 5e-3,
            branch_plus: false,
            r_cut: 5.0,
            t_end: 25.0,
            dt_max: 5e-4,
            absorbing: false,
            datum: DatumSpec::ScaledW { c: 0.9 },
            out: None,
        }
    }
}

impl ScenarioConfig {
    pub fn params(&self) -> Result<PhysParams> {
        PhysParams::new(self.a)
    }

    /// Canonical serialization; parse(serialize(c)) == c.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("scenario = {}\n", self.scenario.as_str()));
        s.push_str(&format!("a = {}\n", self.a));
        s.push_str(&format!("grid.n = {}\n", self.grid_n));
        s.push_str(&format!("grid.r_min = {}\n", self.grid_r_min));
        s.push_str(&format!("grid.r_max = {}\n", self.grid_r_max));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("eps = {}\n", self.eps));
        s.push_str(&format!(
            "branch = {}\n",
            if self.branch_plus { "plus" } else { "minus" }
        ));
        s.push_str(&format!("r_cut = {}\n", self.r_cut));
        s.push_str(&format!("t_end = {}\n", self.t_end));
        s.push_str(&format!("dt_max = {}\n", self.dt_max));
        s.push_str(&format!("absorbing = {}\n", self.absorbing));
        s.push_str(&format!("datum = {}\n", self.datum.serialize()));
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {out}\n"));
        }
        s
    }

    /// FNV-1a over the canonical serialization.
    pub fn hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in self.serialize().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Parse a configuration, collecting every field error before failing.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut errors: Vec<String> = Vec::new();
    let mut saw_scenario = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value'", lineno + 1));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let num = |errors: &mut Vec<String>| -> Option<f64> {
            match value.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    errors.push(format!("line {}: '{key}' needs a finite number", lineno + 1));
                    None
                }
            }
        };
        match key {
            "scenario" => match ScenarioKind::parse(value) {
                Some(k) => {
                    cfg.scenario = k;
                    saw_scenario = true;
                }
                None => errors.push(format!(
                    "line {}: unknown scenario '{value}' (spectrum, orbit, classify, lp-sweep, virial-check, evolve)",
                    lineno + 1
                )),
            },
            "a" => {
                if let Some(v) = num(&mut errors) {
                    if v <= A_MIN || v >= 0.0 {
                        errors.push(format!(
                            "line {}: coupling a = {v} outside the admissible interval ({A_MIN}, 0) = (-1/4+4/25, 0)",
                            lineno + 1
                        ));
                    } else {
                        cfg.a = v;
                    }
                }
            }
            "grid.n" => match value.parse::<usize>() {
                Ok(v) if v >= 16 && v <= 65536 => cfg.grid_n = v,
                _ => errors.push(format!(
                    "line {}: grid.n must be an integer in [16, 65536]",
                    lineno + 1
                )),
            },
            "grid.r_min" => {
                if let Some(v) = num(&mut errors) {
                    if v > 0.0 {
                        cfg.grid_r_min = v;
                    } else {
                        errors.push(format!("line {}: grid.r_min must be positive", lineno + 1));
                    }
                }
            }
            "grid.r_max" => {
                if let Some(v) = num(&mut errors) {
                    if v > 1.0 {
                        cfg.grid_r_max = v;
                    } else {
                        errors.push(format!("line {}: grid.r_max must exceed 1", lineno + 1));
                    }
                }
            }
            "seed" => match value.parse::<u64>() {
                Ok(v) => cfg.seed = v,
                _ => errors.push(format!("line {}: seed must be a u64", lineno + 1)),
            },
            "eps" => {
                if let Some(v) = num(&mut errors) {
                    cfg.eps = v;
                }
            }
            "branch" => match value {
                "plus" => cfg.branch_plus = true,
                "minus" => cfg.branch_plus = false,
                _ => errors.push(format!(
                    "line {}: branch must be 'plus' or 'minus'",
                    lineno + 1
                )),
            },
            "r_cut" => {
                if let Some(v) = num(&mut errors) {
                    if v > 0.0 {
                        cfg.r_cut = v;
                    } else {
                        errors.push(format!("line {}: r_cut must be positive", lineno + 1));
                    }
                }
            }
            "t_end" => {
                if let Some(v) = num(&mut errors) {
                    cfg.t_end = v;
                }
            }
            "dt_max" => {
                if let Some(v) = num(&mut errors) {
                    if v > 0.0 {
                        cfg.dt_max = v;
                    } else {
                        errors.push(format!("line {}: dt_max must be positive", lineno + 1));
                    }
                }
            }
            "absorbing" => match value {
                "true" => cfg.absorbing = true,
                "false" => cfg.absorbing = false,
                _ => errors.push(format!(
                    "line {}: absorbing must be 'true' or 'false'",
                    lineno + 1
                )),
            },
            "datum" => match DatumSpec::parse(value) {
                Ok(d) => cfg.datum = d,
                Err(e) => errors.push(format!("line {}: {e}", lineno + 1)),
            },
            "out" => cfg.out = Some(value.to_string()),
            _ => errors.push(format!("line {}: unknown key '{key}'", lineno + 1)),
        }
    }
    if cfg.grid_r_min >= cfg.grid_r_max / 16.0 {
        errors.push("grid.r_min must be well below grid.r_max".to_string());
    }
    let _ = saw_scenario;
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::config(errors.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults_with_stable_hash() {
        let c1 = parse_config("scenario = spectrum\n").unwrap();
        let c2 = parse_config("scenario = spectrum\n").unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.hash(), c2.hash());
        assert_eq!(c1.grid_n, 1024);
    }

    #[test]
    fn out_of_range_coupling_names_the_interval() {
        let err = parse_config("a = -0.3\n").unwrap_err().to_string();
        assert!(err.contains("-1/4+4/25"), "{err}");
        assert!(parse_config("a = 0.1\n").is_err());
    }

    #[test]
    fn roundtrip_identity() {
        let mut c = ScenarioConfig::default();
        c.scenario = ScenarioKind::Classify;
        c.a = -0.055;
        c.grid_n = 512;
        c.datum = DatumSpec::SymmetryW {
            theta: 0.7,
            mu: 1.5,
        };
        c.out = Some("./artifacts".to_string());
        let text = c.serialize();
        let back = parse_config(&text).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn error_list_collects_multiple_fields() {
        let err = parse_config("a = banana\ngrid.n = 3\nfoo = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("'a'"));
        assert!(err.contains("grid.n"));
        assert!(err.contains("unknown key"));
    }

    #[test]
    fn datum_specs_parse() {
        assert!(matches!(
            DatumSpec::parse("g-w:0.7:1.5"),
            Ok(DatumSpec::SymmetryW { .. })
        ));
        assert!(matches!(
            DatumSpec::parse("scaled-w:0.9"),
            Ok(DatumSpec::ScaledW { .. })
        ));
        assert!(matches!(
            DatumSpec::parse("super:15"),
            Ok(DatumSpec::SuperThreshold { .. })
        ));
        assert!(DatumSpec::parse("g-w:1.0:-2").is_err());
        assert!(DatumSpec::parse("nonsense").is_err());
    }

    #[test]
    fn parser_never_panics_on_garbage() {
        let mut rng = crate::rng::SplitMix64::new(99);
        for _ in 0..200 {
            let len = (rng.next_u64() % 64) as usize;
            let bytes: Vec<u8> = (0..len).map(|_| (rng.next_u64() % 256) as u8).collect();
            let text = String::from_utf8_lossy(&bytes).to_string();
            let _ = parse_config(&text);
        }
    }
}
