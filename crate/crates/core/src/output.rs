//! On-disk formats: JSON summaries and comma-separated tables.
//!
//! Every float is written with 17 significant digits so values survive a
//! text round trip bit-for-bit.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::circuit::PARAM_NAMES;
use crate::error::Result;
use crate::metrology::{CfiProfile, FringeScan};
use crate::optimizer::TrainingTrace;
use crate::wigner::WignerGrid;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(to_json_string(value)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(f.flush()?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(io::BufReader::new(File::open(path)?))?)
}

pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    Ok(w.flush()?)
}

/// Header and numeric rows of a table written by [`write_table`].
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| crate::Error::InvalidArgument(format!("{path:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn label((a, b): (usize, usize)) -> String {
    format!("{a}_{b}")
}

/// Columns: `phi`, `P_a_b` per pattern, `F_a_b` per pattern.
pub fn write_fringes_csv(path: &Path, scan: &FringeScan, profiles: &[CfiProfile]) -> Result<()> {
    let mut header = vec!["phi".to_string()];
    header.extend(scan.patterns.iter().map(|&p| format!("P_{}", label(p))));
    header.extend(scan.patterns.iter().map(|&p| format!("F_{}", label(p))));
    let rows = (0..scan.phis.len()).map(|k| {
        let mut row = vec![scan.phis[k]];
        row.extend(scan.probs.iter().map(|p| p[k]));
        row.extend(profiles.iter().map(|p| p.f[k]));
        row
    });
    write_table(path, &header, rows)
}

/// Columns: `step`, `loss`, then the eight parameters.
pub fn write_trace_csv(path: &Path, trace: &TrainingTrace) -> Result<()> {
    let mut header = vec!["step".to_string(), "loss".to_string()];
    header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
    let rows = trace.steps.iter().map(|s| {
        let mut row = vec![s.step as f64, s.loss];
        row.extend(s.params.to_array());
        row
    });
    write_table(path, &header, rows)
}

/// Columns: `x`, `p`, `W`, one row per grid point.
pub fn write_wigner_csv(path: &Path, grid: &WignerGrid) -> Result<()> {
    let header = ["x", "p", "W"].map(String::from);
    let np = grid.p.len();
    let rows = grid.values.iter().enumerate().map(|(k, &w)| vec![grid.x[k / np], grid.p[k % np], w]);
    write_table(path, &header, rows)
}
