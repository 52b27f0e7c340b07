use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::run::ResultTable;
use super::temporal::TemporalResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitFormat {
    Csv,
    Json,
    /// Tab-separated `(x, y)` blocks per series, each followed by a
    /// regression-line block when a fit exists.
    Plotdata,
}

impl FromStr for EmitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            "plotdata" => Ok(EmitFormat::Plotdata),
            other => Err(Error::InvalidInput(format!("unknown output format {other:?}"))),
        }
    }
}

/// Anything `emit` can render; saved results are read back as this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Emittable {
    Table(ResultTable),
    Temporal(TemporalResult),
}

impl Emittable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Render after checking internal consistency.
    pub fn render(&self, format: EmitFormat) -> Result<String> {
        match self {
            Emittable::Table(t) => render_table(t, format),
            Emittable::Temporal(t) => render_temporal(t, format),
        }
    }
}

/// Write `item` to `path` in `format`.
pub fn emit(item: &Emittable, format: EmitFormat, path: &Path) -> Result<()> {
    let text = item.render(format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn num<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}

fn json_string<S: Serialize>(item: &S) -> Result<String> {
    let mut text = serde_json::to_string_pretty(item)?;
    text.push('\n');
    Ok(text)
}

pub const TABLE_COLUMNS: [&str; 9] = [
    "kind", "algorithm", "slice", "measure", "value", "p_value", "evaluated", "skipped", "error",
];

pub fn render_table(table: &ResultTable, format: EmitFormat) -> Result<String> {
    table.check()?;
    match format {
        EmitFormat::Json => json_string(table),
        EmitFormat::Csv => {
            let mut rows = vec![TABLE_COLUMNS.iter().map(|s| s.to_string()).collect()];
            for c in &table.cells {
                rows.push(vec![
                    "cell".into(),
                    c.algorithm.clone(),
                    c.slice.clone(),
                    c.measure.clone(),
                    num(c.value),
                    num(c.p_value),
                    num(c.evaluated),
                    num(c.skipped),
                    c.error.clone().unwrap_or_default(),
                ]);
            }
            for d in &table.deltas {
                rows.push(vec![
                    "delta".into(),
                    d.algorithm.clone(),
                    format!("{}|{}", d.conservative, d.liberal),
                    d.measure.clone(),
                    d.value.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
            for v in &table.variances {
                rows.push(vec![
                    "variance".into(),
                    v.algorithms.join("|"),
                    v.slice.clone(),
                    v.measure.clone(),
                    v.value.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
            csv_string(rows)
        }
        EmitFormat::Plotdata => {
            // One series per (algorithm, measure) with a row per slice.
            let mut keys: Vec<(&str, &str)> = Vec::new();
            for c in &table.cells {
                if !keys.contains(&(c.algorithm.as_str(), c.measure.as_str())) {
                    keys.push((&c.algorithm, &c.measure));
                }
            }
            let mut out = String::new();
            for (i, (alg, measure)) in keys.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "# series algorithm={alg} measure={measure}");
                out.push_str("slice\tvalue\n");
                for c in table.cells.iter().filter(|c| c.algorithm == *alg && c.measure == *measure) {
                    match c.value {
                        Some(v) => {
                            let _ = writeln!(out, "{}\t{v}", c.slice);
                        }
                        None => {
                            let _ = writeln!(out, "# missing {}", c.slice);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

pub const TEMPORAL_COLUMNS: [&str; 10] = [
    "kind", "orientation", "measure", "year", "articles", "value", "slope", "intercept", "slope_se", "error",
];

pub fn render_temporal(result: &TemporalResult, format: EmitFormat) -> Result<String> {
    result.check()?;
    match format {
        EmitFormat::Json => json_string(result),
        EmitFormat::Csv => {
            let mut rows = vec![TEMPORAL_COLUMNS.iter().map(|s| s.to_string()).collect()];
            for s in &result.series {
                for p in &s.points {
                    rows.push(vec![
                        "point".into(),
                        s.orientation.to_string(),
                        s.measure.clone(),
                        p.year.to_string(),
                        p.articles.to_string(),
                        num(p.value),
                        String::new(),
                        String::new(),
                        String::new(),
                        p.error.clone().unwrap_or_default(),
                    ]);
                }
                if let Some(f) = &s.fit {
                    rows.push(vec![
                        "fit".into(),
                        s.orientation.to_string(),
                        s.measure.clone(),
                        String::new(),
                        String::new(),
                        String::new(),
                        f.slope.to_string(),
                        f.intercept.to_string(),
                        num(f.slope_se),
                        String::new(),
                    ]);
                }
            }
            csv_string(rows)
        }
        EmitFormat::Plotdata => {
            let mut out = String::new();
            for (i, s) in result.series.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let key = format!("orientation={} measure={}", s.orientation, s.measure);
                let _ = writeln!(out, "# series {key}");
                out.push_str("year\tvalue\n");
                for p in &s.points {
                    match p.value {
                        Some(v) => {
                            let _ = writeln!(out, "{}\t{v}", p.year);
                        }
                        None => {
                            let _ = writeln!(out, "# missing {}", p.year);
                        }
                    }
                }
                if let Some(f) = &s.fit {
                    let _ = writeln!(out, "# fit {key}");
                    out.push_str("slope\tintercept\tslope_se\n");
                    let se = f.slope_se.map_or_else(|| "NA".to_string(), |v| v.to_string());
                    let _ = writeln!(out, "{}\t{}\t{se}", f.slope, f.intercept);
                }
            }
            Ok(out)
        }
    }
}
