use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

/// Reads each sweep CSV (`path` or `path=label`) and pulls `lambda` and
/// column `y` out of every row.
pub fn reshape(inputs: &[String], y: &str) -> anyhow::Result<Vec<PlotRow>> {
    let mut out = Vec::new();
    for input in inputs {
        let (path, label) = match input.split_once('=') {
            Some((p, l)) => (p, l.to_string()),
            None => {
                let stem = Path::new(input).file_stem().and_then(|s| s.to_str()).unwrap_or(input);
                (input.as_str(), stem.to_string())
            }
        };
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {path}"))?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| anyhow!("{path} has no `{name}` column"))
        };
        let (xi, yi) = (col("lambda")?, col(y)?);
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let num = |i: usize| -> anyhow::Result<f64> {
                let field = &record[i];
                match field {
                    "true" => Ok(1.0),
                    "false" => Ok(0.0),
                    _ => field
                        .parse()
                        .with_context(|| format!("{path} row {}: `{field}` is not a number", line + 2)),
                }
            };
            out.push(PlotRow {
                x: num(xi)?,
                y: num(yi)?,
                series: label.clone(),
            });
        }
    }
    Ok(out)
}

pub fn write(rows: &[PlotRow], out: &mut dyn Write) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "series"])?;
    for r in rows {
        w.write_record([r.x.to_string(), r.y.to_string(), r.series.clone()])?;
    }
    w.flush()?;
    Ok(())
}
