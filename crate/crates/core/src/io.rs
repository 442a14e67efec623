//! File formats: binary field files, JSON run reports, CSV traces and
//! curves.
//!
//! A field file is the magic line `HPF1`, one line of JSON header and the
//! payload: three little-endian `f64` per site, sites in row-major order
//! (last axis fastest).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::field::Field;
use crate::geometry::{ManifoldKind, ManifoldSpec};
use crate::optimize::TraceRow;
use crate::scalar::{dot, Real};
use crate::topology::PreimageCurve;

pub const MAGIC: &str = "HPF1";
pub const FORMAT_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const ORDER: &str = "last-axis-fastest";

/// Largest norm defect repaired on load.
const RENORMALIZE_LIMIT: f64 = 1e-6;
const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub version: u32,
    pub manifold: ManifoldKind,
    pub dims: Vec<usize>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
    pub order: String,
}

impl FieldHeader {
    pub fn for_spec<T: Real>(spec: &ManifoldSpec<T>) -> Self {
        FieldHeader {
            version: FORMAT_VERSION,
            manifold: spec.kind,
            dims: spec.dims.clone(),
            radius: spec.radius.map(|l| l.to_f64_lossy()),
            periods: (!spec.periods.is_empty())
                .then(|| spec.periods.iter().map(|p| p.to_f64_lossy()).collect()),
            order: ORDER.into(),
        }
    }

    pub fn spec(&self) -> Result<ManifoldSpec<f64>> {
        if self.version != FORMAT_VERSION {
            return Err(HopfError::Format(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.order != ORDER {
            return Err(HopfError::Format(format!(
                "unsupported site order {:?}",
                self.order
            )));
        }
        let spec = ManifoldSpec {
            kind: self.manifold,
            dims: self.dims.clone(),
            radius: self.radius,
            periods: match (&self.periods, self.manifold.is_torus()) {
                (Some(p), _) => p.clone(),
                (None, true) => vec![1.0; self.manifold.ndim()],
                (None, false) => Vec::new(),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn write_field<T: Real, W: Write>(field: &Field<T>, mut out: W) -> Result<()> {
    let header = serde_json::to_string(&FieldHeader::for_spec(&field.spec))?;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{header}")?;
    let mut buf = Vec::with_capacity(field.len() * 24);
    for v in &field.data {
        for c in v {
            buf.extend_from_slice(&c.to_f64_lossy().to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

/// Reads a field, renormalizing vectors whose norm is off by at most 1e-6.
pub fn read_field<R: Read>(input: R) -> Result<Field<f64>> {
    let mut input = BufReader::new(input);
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(HopfError::Format("missing HPF1 magic".into()));
    }
    line.clear();
    input.read_line(&mut line)?;
    let header: FieldHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| HopfError::Format(format!("bad header: {e}")))?;
    let spec = header.spec()?;
    let n = spec.sites();
    let mut payload = Vec::with_capacity(n * 24);
    input.read_to_end(&mut payload)?;
    if payload.len() != n * 24 {
        return Err(HopfError::Format(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            n * 24
        )));
    }
    let mut data = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for chunk in payload.chunks_exact(24) {
        let c = |k: usize| f64::from_le_bytes(chunk[8 * k..8 * k + 8].try_into().expect("8 bytes"));
        let v = [c(0), c(1), c(2)];
        if !v.iter().all(|x| x.is_finite()) {
            return Err(HopfError::Format("non-finite component".into()));
        }
        worst = worst.max((dot(&v, &v).sqrt() - 1.0).abs());
        data.push(v);
    }
    if worst > RENORMALIZE_LIMIT {
        return Err(HopfError::Format(format!(
            "vectors off unit norm by {worst:e}"
        )));
    }
    if worst > NORM_TOLERANCE {
        warn!("renormalizing field vectors off unit norm by up to {worst:e}");
        return Field::from_vectors(spec, data);
    }
    Field::from_unit_vectors(spec, data)
}

pub fn save_field<T: Real>(field: &Field<T>, path: impl AsRef<Path>) -> Result<()> {
    write_field(field, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field<f64>> {
    read_field(std::fs::File::open(path)?)
}

/// Summary of a relaxation or measurement. Key names are stable; the
/// directional split is `E_x` alone on two-dimensional manifolds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub manifold: ManifoldKind,
    pub dims: Vec<usize>,
    #[serde(rename = "Q")]
    pub q: Option<i64>,
    #[serde(rename = "Q_numeric")]
    pub q_numeric: Option<f64>,
    pub residual: Option<f64>,
    #[serde(rename = "E4")]
    pub e4: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    pub beta_final: f64,
    #[serde(rename = "E_over_bound")]
    pub e_over_bound: Option<f64>,
    #[serde(rename = "E_x")]
    pub e_x: f64,
    #[serde(rename = "E_y")]
    pub e_y: Option<f64>,
    #[serde(rename = "E_z")]
    pub e_z: Option<f64>,
    pub kappa: f64,
    pub converged: bool,
    pub discontinuous: bool,
    pub iterations: usize,
    pub wall_seconds: f64,
}

pub fn write_json<S: Serialize, W: Write>(value: &S, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_trace_csv<T: Real, W: Write>(rows: &[TraceRow<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row.map(|x| x.to_f64_lossy()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    component: usize,
    vertex: usize,
    x: f64,
    y: f64,
    z: f64,
}

/// One row per polyline vertex: component id, vertex index, x, y, z.
pub fn write_curve_csv<T: Real, W: Write>(curve: &PreimageCurve<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (component, c) in curve.components.iter().enumerate() {
        for (vertex, p) in c.points.iter().enumerate() {
            w.serialize(CurveRow {
                component,
                vertex,
                x: p[0].to_f64_lossy(),
                y: p[1].to_f64_lossy(),
                z: p[2].to_f64_lossy(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{init_amn, perturb};

    fn roundtrip(f: &Field<f64>) -> (Vec<u8>, Field<f64>) {
        let mut bytes = Vec::new();
        write_field(f, &mut bytes).unwrap();
        let g = read_field(bytes.as_slice()).unwrap();
        (bytes, g)
    }

    #[test]
    fn payload_round_trips_bit_identically() {
        let spec = ManifoldSpec::<f64>::cubic(ManifoldKind::S3, 6).unwrap();
        let f = perturb(&init_amn(&spec, 2, 1, None).unwrap(), 0.3, 9).unwrap();
        let (bytes, g) = roundtrip(&f);
        assert_eq!(g.spec, f.spec);
        for (a, b) in f.data.iter().zip(&g.data) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
        let mut again = Vec::new();
        write_field(&g, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn header_layout() {
        let spec = ManifoldSpec::s2xs1(&[4, 5, 6], 1.5).unwrap();
        let f = Field::constant(spec, [0.0, 0.0, 1.0]).unwrap();
        let mut bytes = Vec::new();
        write_field(&f, &mut bytes).unwrap();
        let text = String::from_utf8_lossy(&bytes[..bytes.len() - 120 * 24]).to_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("HPF1"));
        let h: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(h["version"], 1);
        assert_eq!(h["manifold"], "s2xs1");
        assert_eq!(h["L"], 1.5);
        assert_eq!(h["order"], "last-axis-fastest");
        assert!(h.get("periods").is_none());
    }

    #[test]
    fn norm_defects() {
        let spec = ManifoldSpec::<f64>::cubic(ManifoldKind::T2, 4).unwrap();
        let mut f = Field::constant(spec, [0.0, 0.0, 1.0]).unwrap();
        f.data[3] = [0.0, 0.0, 1.0 + 5e-7];
        let (_, g) = roundtrip(&f);
        assert_eq!(g.data[3], [0.0, 0.0, 1.0]);
        f.data[3] = [0.0, 0.0, 1.0 + 5e-6];
        let mut bytes = Vec::new();
        write_field(&f, &mut bytes).unwrap();
        assert!(matches!(
            read_field(bytes.as_slice()),
            Err(HopfError::Format(_))
        ));
    }

    #[test]
    fn corrupt_files() {
        assert!(matches!(
            read_field(&b"HPF2\n{}\n"[..]),
            Err(HopfError::Format(_))
        ));
        assert!(matches!(
            read_field(&b"HPF1\nnot json\n"[..]),
            Err(HopfError::Format(_))
        ));
        let spec = ManifoldSpec::<f64>::cubic(ManifoldKind::T2, 4).unwrap();
        let f = Field::constant(spec, [1.0, 0.0, 0.0]).unwrap();
        let mut bytes = Vec::new();
        write_field(&f, &mut bytes).unwrap();
        bytes.pop();
        assert!(matches!(
            read_field(bytes.as_slice()),
            Err(HopfError::Format(_))
        ));
    }
}
