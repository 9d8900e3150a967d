//! Artifact files: CSV fields and JSON reports stamped with the config hash.
//!
//! Every CSV starts with a `# config_hash: <hex>` line; every JSON report
//! carries a `config_hash` field. Floats are written with 17 significant
//! digits so that values round-trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::boundaries::{FreeBoundaries, LowerBoundary, UpperBoundary, EDGE_ALL_STOP};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::LatticeGrid;
use crate::os_solver::OsSurface;
use crate::vi_solver::ValueSurface;

const HASH_PREFIX: &str = "# config_hash: ";

pub const SURFACE_HEADER: [&str; 8] = ["t", "x", "v", "vx", "vt", "vxx", "region", "residual"];
pub const BOUNDARY_HEADER: [&str; 6] = ["t", "a", "b", "a_defined", "b_defined", "edge_flag"];
pub const OS_HEADER: [&str; 4] = ["t", "x", "u", "stop"];

/// Float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn artifact_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Artifact { path: path.display().to_string(), reason: reason.into() }
}

/// JSON formatter that writes every float with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| artifact_err(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| artifact_err(path, e.to_string()))
}

/// Fails unless `found` equals `expected`.
pub fn check_hash(path: &Path, expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(artifact_err(path, format!("config hash mismatch: expected {expected}, found {found}")))
    }
}

fn csv_writer(path: &Path, hash: &str, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{HASH_PREFIX}{hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| artifact_err(path, e.to_string()))?;
    Ok(w)
}

/// A parsed CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub config_hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_csv(path: &Path, header: &[&str]) -> Result<CsvTable> {
    let file = File::open(path).map_err(|e| artifact_err(path, e.to_string()))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let hash = first
        .trim_end()
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| artifact_err(path, "missing config hash line"))?
        .to_string();
    let mut r = csv::Reader::from_reader(reader);
    let found: Vec<String> =
        r.headers().map_err(|e| artifact_err(path, e.to_string()))?.iter().map(str::to_string).collect();
    if found != header {
        return Err(artifact_err(path, format!("unexpected header {found:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| artifact_err(path, e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(CsvTable { config_hash: hash, header: found, rows })
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse().map_err(|_| artifact_err(path, format!("not a number: `{s}`")))
}

pub fn write_surface_csv(path: &Path, s: &ValueSurface, hash: &str) -> Result<()> {
    let mut w = csv_writer(path, hash, &SURFACE_HEADER)?;
    let g = &s.grid;
    for j in 0..=g.nt {
        let t = fmt_f64(g.t(j));
        for i in 0..=g.nx {
            w.write_record([
                t.as_str(),
                &fmt_f64(g.x(i)),
                &fmt_f64(s.v.at(j, i)),
                &fmt_f64(s.vx.at(j, i)),
                &fmt_f64(s.vt.at(j, i)),
                &fmt_f64(s.vxx.at(j, i)),
                s.region_at(j, i).label(),
                &fmt_f64(s.residual.at(j, i)),
            ])
            .map_err(|e| artifact_err(path, e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `v` back onto `grid`, checking every coordinate.
pub fn read_surface_values(path: &Path, grid: &LatticeGrid) -> Result<(String, Field)> {
    let table = read_csv(path, &SURFACE_HEADER)?;
    let (rows, cols) = (grid.nt + 1, grid.nx + 1);
    if table.rows.len() != rows * cols {
        return Err(artifact_err(path, format!("{} data rows, lattice needs {}", table.rows.len(), rows * cols)));
    }
    let mut v = Field::zeros(rows, cols);
    for (k, rec) in table.rows.iter().enumerate() {
        let (j, i) = (k / cols, k % cols);
        let (t, x) = (parse_f64(path, &rec[0])?, parse_f64(path, &rec[1])?);
        if t != grid.t(j) || x != grid.x(i) {
            return Err(artifact_err(path, format!("row {k} at ({t}, {x}) is off the configured lattice")));
        }
        v.set(j, i, parse_f64(path, &rec[2])?);
    }
    Ok((table.config_hash, v))
}

pub fn write_boundaries_csv(path: &Path, fb: &FreeBoundaries, hash: &str) -> Result<()> {
    let mut w = csv_writer(path, hash, &BOUNDARY_HEADER)?;
    for j in 0..fb.t.len() {
        let a = fb.a[j].value();
        let b = fb.b[j].value();
        w.write_record([
            fmt_f64(fb.t[j]),
            a.map(fmt_f64).unwrap_or_default(),
            b.map(fmt_f64).unwrap_or_default(),
            u8::from(a.is_some()).to_string(),
            u8::from(b.is_some()).to_string(),
            fb.edge_flags[j].to_string(),
        ])
        .map_err(|e| artifact_err(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_boundaries_csv(path: &Path, grid: &LatticeGrid) -> Result<(String, FreeBoundaries)> {
    let table = read_csv(path, &BOUNDARY_HEADER)?;
    if table.rows.len() != grid.nt + 1 {
        return Err(artifact_err(path, format!("{} levels, lattice has {}", table.rows.len(), grid.nt + 1)));
    }
    let mut a = Vec::with_capacity(grid.nt + 1);
    let mut b = Vec::with_capacity(grid.nt + 1);
    let mut flags = Vec::with_capacity(grid.nt + 1);
    for (j, rec) in table.rows.iter().enumerate() {
        if parse_f64(path, &rec[0])? != grid.t(j) {
            return Err(artifact_err(path, format!("level {j} is off the configured lattice")));
        }
        let flag: u8 = rec[5].parse().map_err(|_| artifact_err(path, format!("bad edge flag `{}`", rec[5])))?;
        a.push(match rec[3].as_str() {
            "1" => LowerBoundary::Defined(parse_f64(path, &rec[1])?),
            _ if flag & EDGE_ALL_STOP != 0 => LowerBoundary::AllStop,
            _ => LowerBoundary::NoneLow,
        });
        b.push(match rec[4].as_str() {
            "1" => UpperBoundary::Defined(parse_f64(path, &rec[2])?),
            _ => UpperBoundary::NoneHigh,
        });
        flags.push(flag);
    }
    let fb = FreeBoundaries::with_flags(*grid, a, b);
    if fb.edge_flags != flags {
        return Err(artifact_err(path, "edge flags disagree with boundary values"));
    }
    Ok((table.config_hash, fb))
}

pub fn write_os_csv(path: &Path, os: &OsSurface, hash: &str) -> Result<()> {
    let mut w = csv_writer(path, hash, &OS_HEADER)?;
    let g = &os.grid;
    for j in 0..=g.nt {
        let t = fmt_f64(g.t(j));
        for i in 0..=g.nx {
            w.write_record([
                t.as_str(),
                &fmt_f64(g.x(i)),
                &fmt_f64(os.u.at(j, i)),
                if os.is_stop(j, i) { "1" } else { "0" },
            ])
            .map_err(|e| artifact_err(path, e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn json_floats_use_fixed_precision() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: usize,
        }
        let s = to_json_string(&S { a: 0.5, b: 3 }).unwrap();
        assert_eq!(s, "{\"a\":5.0000000000000000e-1,\"b\":3}\n");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.5));
    }
}
