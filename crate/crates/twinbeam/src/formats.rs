//! On-disk formats.
//!
//! Shot records are CSV with header `shot,m1,m2` (counts) or `shot,v1,v2`
//! (volts); calibration lives in a JSON sidecar next to the data file with the
//! same stem. Probability tables are TSV with probabilities written in
//! scientific notation to 12 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twinbeam_core::{
    DifferenceDistribution, JointCountDistribution, ShotSeries, SimulationConfig, Unit,
};

use crate::error::{CliError, CliResult};

/// Calibration and provenance stored next to a shot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub unit: Unit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default)]
    pub noise_var1: f64,
    #[serde(default)]
    pub noise_var2: f64,
    pub shots: usize,
    /// Shots whose Gaussian excess was clamped at zero counts.
    #[serde(default)]
    pub truncations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SimulationConfig>,
}

impl Sidecar {
    pub fn for_series(series: &ShotSeries, config: Option<SimulationConfig>) -> Self {
        Sidecar {
            unit: series.unit,
            alpha1: series.conv.map(|c| c.0),
            alpha2: series.conv.map(|c| c.1),
            noise_var1: series.noise_var.0,
            noise_var2: series.noise_var.1,
            shots: series.len(),
            truncations: series.truncations,
            config,
        }
    }
}

/// Path of the sidecar belonging to a data file.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

/// Scientific notation with 12 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn header(unit: Unit) -> [&'static str; 3] {
    match unit {
        Unit::Counts => ["shot", "m1", "m2"],
        Unit::Volts => ["shot", "v1", "v2"],
    }
}

fn cell(unit: Unit, v: f64) -> String {
    match unit {
        // counts are whole numbers; `{}` prints them without a fraction
        Unit::Counts => format!("{v}"),
        Unit::Volts => sci(v),
    }
}

/// Write a series to `path` plus its sidecar.
pub fn write_shots(
    path: &Path,
    series: &ShotSeries,
    config: Option<SimulationConfig>,
) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header(series.unit)).map_err(io)?;
    for (k, (a, b)) in series.ch1.iter().zip(&series.ch2).enumerate() {
        w.write_record([k.to_string(), cell(series.unit, *a), cell(series.unit, *b)])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    write_json(&sidecar_path(path), &Sidecar::for_series(series, config))
}

/// Read a shot file and, if present, its sidecar. Without a sidecar the unit
/// is taken from the header and the instrument noise is assumed zero.
pub fn read_shots(path: &Path) -> CliResult<(ShotSeries, Option<Sidecar>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let parse_err = |line: u64, msg: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let head: Vec<String> = r
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let unit = if head == header(Unit::Counts) {
        Unit::Counts
    } else if head == header(Unit::Volts) {
        Unit::Volts
    } else {
        return Err(parse_err(
            1,
            format!("expected header `shot,m1,m2` or `shot,v1,v2`, found `{}`", head.join(",")),
        ));
    };

    let (mut ch1, mut ch2) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        // header is line 1
        let fallback = i as u64 + 2;
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(fallback, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(fallback, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let shot: usize = rec[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad shot index `{}`", &rec[0])))?;
        if shot != ch1.len() {
            return Err(parse_err(
                line,
                format!("shot index {shot} out of sequence, expected {}", ch1.len()),
            ));
        }
        let value = |j: usize| -> CliResult<f64> {
            let v: f64 = rec[j]
                .parse()
                .map_err(|_| parse_err(line, format!("bad value `{}`", &rec[j])))?;
            if !v.is_finite() || (unit == Unit::Counts && (v < 0.0 || v.fract() != 0.0)) {
                return Err(parse_err(line, format!("invalid {} value `{}`", head[j], &rec[j])));
            }
            Ok(v)
        };
        let (a, b) = (value(1)?, value(2)?);
        ch1.push(a);
        ch2.push(b);
    }
    if ch1.is_empty() {
        return Err(CliError::Data(format!("{}: no shot records", path.display())));
    }

    let side_path = sidecar_path(path);
    let sidecar: Option<Sidecar> = if side_path.exists() {
        Some(read_json(&side_path)?)
    } else {
        None
    };
    let (conv, noise) = match &sidecar {
        Some(s) => {
            if s.unit != unit {
                return Err(CliError::Data(format!(
                    "{}: sidecar unit {:?} does not match header",
                    side_path.display(),
                    s.unit
                )));
            }
            let conv = match (s.alpha1, s.alpha2) {
                (Some(a), Some(b)) => Some((a, b)),
                _ => None,
            };
            (conv, (s.noise_var1, s.noise_var2))
        }
        None => (None, (0.0, 0.0)),
    };
    let mut series = ShotSeries::new(unit, ch1, ch2, conv, noise)?;
    if let Some(s) = &sidecar {
        series.truncations = s.truncations;
    }
    Ok((series, sidecar))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Validation(format!("{}:{}: {e}", path.display(), e.line()))
    })
}

/// A rectangular table with a header row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Render with the given field separator.
    pub fn render(&self, sep: char) -> String {
        let mut out = String::new();
        let sep = sep.to_string();
        out.push_str(&self.columns.join(&sep));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(&sep));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, sep: char) -> CliResult<()> {
        let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(self.render(sep).as_bytes())
            .map_err(|e| CliError::io(path, e))
    }
}

/// `d p` table of a difference law.
pub fn diff_table(dist: &DifferenceDistribution) -> Table {
    let mut t = Table::new(&["d", "p"]);
    for (d, p) in dist.iter() {
        t.push(vec![d.to_string(), sci(p)]);
    }
    t
}

/// `n1 n2 p` table of a joint law.
pub fn joint_table(dist: &JointCountDistribution) -> Table {
    let mut t = Table::new(&["n1", "n2", "p"]);
    for (a, b, p) in dist.iter() {
        t.push(vec![a.to_string(), b.to_string(), sci(p)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_has_twelve_digits() {
        assert_eq!(sci(0.25), "2.50000000000e-1");
        assert_eq!(sci(1.0 / 3.0), "3.33333333333e-1");
        let back: f64 = sci(std::f64::consts::PI).parse().unwrap();
        assert!((back - std::f64::consts::PI).abs() < 1e-11);
    }

    #[test]
    fn counts_print_without_fraction() {
        assert_eq!(cell(Unit::Counts, 12.0), "12");
        assert_eq!(cell(Unit::Counts, 0.0), "0");
    }

    #[test]
    fn table_rendering() {
        let t = diff_table(&DifferenceDistribution::delta(0));
        assert_eq!(t.render('\t'), "d\tp\n0\t1.00000000000e0\n");
    }
}
