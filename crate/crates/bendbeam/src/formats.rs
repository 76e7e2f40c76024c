//! Text and binary artifact layouts. Byte-level descriptions are in `docs/FORMATS.md`.
//!
//! Floats are written with `{:e}`, the shortest representation that parses
//! back to the same `f64`.

use std::fmt::Write as _;

use bendbeam_core::fieldmap::{ComparisonMetrics, FieldGrid, TrajectoryProfile, DB_FLOOR};
use bendbeam_core::maxmin::TraceEntry;
use bendbeam_core::tangent::PhaseProfile;
use bendbeam_core::{ArrayGeometry, Beamformer, Scheme, C64};
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn beamformer_csv(w: &Beamformer) -> String {
    let mut out = String::from("index,re,im\n");
    for (i, c) in w.weights().iter().enumerate() {
        writeln!(out, "{i},{:e},{:e}", c.re, c.im).unwrap();
    }
    out
}

/// Parses `index,re,im` rows. Phase-only files load as ABF, anything else of unit norm as DBF.
pub fn parse_beamformer_csv(text: &str) -> Result<Beamformer> {
    let bad = |line: usize, why: &str| CliError::config("--beamformer", format!("line {line}: {why}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "index,re,im" => {}
        _ => return Err(bad(1, "expected header `index,re,im`")),
    }
    let mut weights = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad(i + 1, "expected three columns"));
        }
        let idx: usize = cols[0].trim().parse().map_err(|_| bad(i + 1, "index is not an integer"))?;
        if idx != weights.len() {
            return Err(bad(i + 1, "indices must run 0, 1, 2, ..."));
        }
        let re: f64 = cols[1].trim().parse().map_err(|_| bad(i + 1, "re is not a number"))?;
        let im: f64 = cols[2].trim().parse().map_err(|_| bad(i + 1, "im is not a number"))?;
        weights.push(C64::new(re, im));
    }
    Beamformer::new(weights.clone(), Scheme::Abf)
        .or_else(|_| Beamformer::new(weights, Scheme::Dbf))
        .map_err(|e| CliError::config("--beamformer", e.to_string()))
}

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("iteration,round,rho,t,surrogate,rank_gap\n");
    for e in trace {
        writeln!(out, "{},{},{:e},{:e},{:e},{:e}", e.iteration, e.round, e.rho, e.t, e.surrogate, e.rank_gap).unwrap();
    }
    out
}

pub fn phase_profile_csv(profile: &PhaseProfile, geom: &ArrayGeometry) -> String {
    let mut out = String::from("index,x,phase\n");
    for (i, (p, x)) in profile.phases().iter().zip(geom.antenna_x()).enumerate() {
        writeln!(out, "{i},{x:e},{p:e}").unwrap();
    }
    out
}

/// Two axis rows (`x,...` and `z,...`) followed by one line of `nx` powers per z row.
pub fn field_csv(grid: &FieldGrid) -> String {
    let mut out = String::with_capacity(16 * (grid.nx() + 1) * (grid.nz() + 2));
    let mut axis = |name: &str, v: &[f64]| {
        out.push_str(name);
        for a in v {
            write!(out, ",{a:e}").unwrap();
        }
        out.push('\n');
    };
    axis("x", &grid.x_axis);
    axis("z", &grid.z_axis);
    for iz in 0..grid.nz() {
        let mut first = true;
        for p in grid.row(iz) {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{p:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Binary 8-bit PGM of the map in dB relative to its maximum, clamped at the floor.
/// The first image row is the largest z so the array sits at the bottom.
pub fn field_pgm(grid: &FieldGrid) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", grid.nx(), grid.nz());
    let db = grid.to_db(DB_FLOOR);
    let mut out = Vec::with_capacity(header.len() + db.len());
    out.extend_from_slice(header.as_bytes());
    for iz in (0..grid.nz()).rev() {
        for v in &db[iz * grid.nx()..(iz + 1) * grid.nx()] {
            out.push(gray(*v));
        }
    }
    out
}

fn gray(db: f64) -> u8 {
    let t = ((db - DB_FLOOR) / -DB_FLOOR).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// One row per sample point: `m,z,x` then one power column per profile.
pub fn profiles_csv(profiles: &[TrajectoryProfile]) -> String {
    let mut out = String::from("m,z,x");
    for p in profiles {
        write!(out, ",{}", p.label).unwrap();
    }
    out.push('\n');
    if let Some(first) = profiles.first() {
        for m in 0..first.z.len() {
            write!(out, "{m},{:e},{:e}", first.z[m], first.x[m]).unwrap();
            for p in profiles {
                write!(out, ",{:e}", p.power[m]).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub scheme: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_user: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    /// `null` when `p_min` is zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ripple_db: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MetricsRecord {
    pub fn ok(scheme: &str, status: &str, m: &ComparisonMetrics) -> Self {
        Self {
            scheme: scheme.into(),
            status: status.into(),
            p_min: Some(m.p_min),
            p_user: Some(m.p_user),
            p_max: Some(m.p_max),
            ripple_db: Some(m.ripple_db.is_finite().then_some(m.ripple_db)),
            error: None,
        }
    }

    pub fn failed(scheme: &str, error: String) -> Self {
        Self {
            scheme: scheme.into(),
            status: "failed".into(),
            p_min: None,
            p_user: None,
            p_max: None,
            ripple_db: None,
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsFile {
    /// Powers are linear, in watts per watt of transmit power.
    pub units: &'static str,
    pub schemes: Vec<MetricsRecord>,
}

pub fn metrics_json(records: Vec<MetricsRecord>) -> String {
    let file = MetricsFile { units: "linear", schemes: records };
    serde_json::to_string_pretty(&file).unwrap() + "\n"
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub record: MetricsRecord,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,value,scheme,status,p_min,p_user,p_max,ripple_db\n");
    for r in rows {
        let m = &r.record;
        writeln!(
            out,
            "{},{:e},{},{},{},{},{},{}",
            r.param,
            r.value,
            m.scheme,
            m.status,
            opt(m.p_min),
            opt(m.p_user),
            opt(m.p_max),
            match m.ripple_db {
                Some(None) => "inf".to_string(),
                Some(Some(v)) => format!("{v:e}"),
                None => String::new(),
            }
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use bendbeam_core::fieldmap::GridSpec;

    #[test]
    fn beamformer_roundtrip_is_exact() {
        let w = Beamformer::from_phases(&[0.0, 0.3, -2.0, 1.0e-7]);
        let back = parse_beamformer_csv(&beamformer_csv(&w)).unwrap();
        assert_eq!(back, w);
        let d = Beamformer::dbf_normalized(&[C64::new(1.0, 2.0), C64::new(0.1, 0.0)]).unwrap();
        let back = parse_beamformer_csv(&beamformer_csv(&d)).unwrap();
        assert_eq!(back.weights(), d.weights());
        assert_eq!(back.scheme(), Scheme::Dbf);
    }

    #[test]
    fn beamformer_parse_errors() {
        assert!(parse_beamformer_csv("i,re,im\n0,1,0\n").is_err());
        assert!(parse_beamformer_csv("index,re,im\n1,1,0\n").is_err());
        assert!(parse_beamformer_csv("index,re,im\n0,2,0\n").is_err());
        assert!(parse_beamformer_csv("index,re,im\n").is_err());
    }

    #[test]
    fn pgm_layout() {
        let spec = GridSpec { x_min: 0.0, x_max: 1.0, nx: 3, z_min: 1.0, z_max: 2.0, nz: 2 };
        let grid = FieldGrid::from_rows(&spec, vec![1.0, 1e-9, 0.1, 0.0, 0.5, 1e-4]).unwrap();
        let bytes = field_pgm(&grid);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        // Top image row is the last grid row.
        assert_eq!(&bytes[header.len()..], &[0, gray(10.0 * 0.5f64.log10()), gray(-40.0), 255, 0, gray(-10.0)]);
    }

    #[test]
    fn gray_scale_endpoints() {
        assert_eq!(gray(0.0), 255);
        assert_eq!(gray(DB_FLOOR), 0);
        assert_eq!(gray(-40.0), 128);
    }

    #[test]
    fn field_csv_axes() {
        let spec = GridSpec { x_min: -1.0, x_max: 1.0, nx: 2, z_min: 0.5, z_max: 1.0, nz: 2 };
        let grid = FieldGrid::from_rows(&spec, vec![1.0, 2.0, 3.0, 0.25]).unwrap();
        assert_eq!(field_csv(&grid), "x,-1e0,1e0\nz,5e-1,1e0\n1e0,2e0\n3e0,2.5e-1\n");
    }
}
