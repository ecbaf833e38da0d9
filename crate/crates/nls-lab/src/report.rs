//! Artifact writers: the orbit CSV and small JSON reports.
//!
//! Determinism contract: identical config (including seed) produces
//! byte-identical CSV bodies. Volatile metadata (timestamps) lives in `#`
//! comment lines above the header, never in the body.

use crate::evolution::{OrbitRecord, OrbitSample};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

pub const ORBIT_CSV_HEADER: &str =
    "t,d_u,kinetic,E,mass,L6,Linf,S_cum,theta,mu,alpha,VR,dtVR,dttVR";

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn orbit_csv_body(record: &OrbitRecord) -> String {
    let mut s = String::new();
    s.push_str(ORBIT_CSV_HEADER);
    s.push('\n');
    for row in &record.samples {
        let OrbitSample {
            t,
            d_u,
            kinetic,
            energy,
            mass,
            l6,
            linf,
            s_cum,
            theta,
            mu,
            alpha,
            vr,
            dt_vr,
            dtt_vr,
        } = row;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f(*t),
            fmt_f(*d_u),
            fmt_f(*kinetic),
            fmt_f(*energy),
            fmt_f(*mass),
            fmt_f(*l6),
            fmt_f(*linf),
            fmt_f(*s_cum),
            fmt_opt(*theta),
            fmt_opt(*mu),
            fmt_opt(*alpha),
            fmt_opt(*vr),
            fmt_opt(*dt_vr),
            fmt_opt(*dtt_vr),
        );
    }
    s
}

/// Comment preamble carrying provenance; excluded from the determinism
/// contract on purpose.
pub fn provenance_comment(config_hash: u64, grid_fingerprint: u64) -> String {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!(
        "# config_hash = {config_hash:016x}\n# grid_fingerprint = {grid_fingerprint:016x}\n# generated_unix = {stamp}\n"
    )
}

pub fn write_orbit_csv(
    path: &Path,
    record: &OrbitRecord,
    config_hash: u64,
    grid_fingerprint: u64,
) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(provenance_comment(config_hash, grid_fingerprint).as_bytes())?;
    f.write_all(orbit_csv_body(record).as_bytes())?;
    Ok(())
}

/// Minimal JSON value for the structured reports.
pub enum Json {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_into(&self, s: &mut String) {
        match self {
            Json::Num(v) => {
                if v.is_finite() {
                    let _ = write!(s, "{v:.17e}");
                } else {
                    s.push_str("null");
                }
            }
            Json::Int(v) => {
                let _ = write!(s, "{v}");
            }
            Json::Bool(b) => {
                let _ = write!(s, "{b}");
            }
            Json::Str(t) => {
                s.push('"');
                for c in t.chars() {
                    match c {
                        '"' => s.push_str("\\\""),
                        '\\' => s.push_str("\\\\"),
                        '\n' => s.push_str("\\n"),
                        c if (c as u32) < 0x20 => {
                            let _ = write!(s, "\\u{:04x}", c as u32);
                        }
                        c => s.push(c),
                    }
                }
                s.push('"');
            }
            Json::Arr(items) => {
                s.push('[');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    it.render_into(s);
                }
                s.push(']');
            }
            Json::Obj(pairs) => {
                s.push('{');
                for (i, (k, v)) in pairs.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    Json::Str(k.clone()).render_into(s);
                    s.push(':');
                    v.render_into(s);
                }
                s.push('}');
            }
        }
    }
}

pub fn write_json(path: &Path, value: &Json) -> std::io::Result<()> {
    std::fs::write(path, value.render() + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{OrbitRecord, OrbitSample, StopReason};

    fn record() -> OrbitRecord {
        OrbitRecord {
            samples: vec![
                OrbitSample {
                    t: 0.0,
                    d_u: 1.0,
                    theta: Some(0.5),
                    ..Default::default()
                },
                OrbitSample {
                    t: 0.1,
                    d_u: 0.9,
                    ..Default::default()
                },
            ],
            stop: StopReason::ReachedEnd,
            final_kinetic: 1.0,
            final_dt: 1e-3,
            final_t: 0.1,
        }
    }

    #[test]
    fn csv_body_is_deterministic_and_handles_empty_columns() {
        let r = record();
        let a = orbit_csv_body(&r);
        let b = orbit_csv_body(&r);
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines[0], ORBIT_CSV_HEADER);
        // row 2 has an empty theta column, row 1 a filled one
        assert!(lines[1].contains("5.00000000000000000e-1"));
        assert!(lines[2].contains(",,"));
        assert_eq!(lines[1].matches(',').count(), 13);
    }

    #[test]
    fn json_renders_and_escapes() {
        let j = Json::Obj(vec![
            ("name".into(), Json::Str("a \"b\"\n".into())),
            ("vals".into(), Json::Arr(vec![Json::Num(1.0), Json::Int(2)])),
            ("flag".into(), Json::Bool(true)),
            ("nan".into(), Json::Num(f64::NAN)),
        ]);
        let s = j.render();
        assert!(s.contains("\\\"b\\\"\\n"));
        assert!(s.contains("null"));
        assert!(s.starts_with('{') && s.ends_with('}'));
    }
}
