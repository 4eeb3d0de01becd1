use std::path::Path;

use hurst_core::PriceSeries;

use crate::error::{CliError, Result};

/// Relative tolerance on each timestamp spacing against the median spacing.
pub const GRID_TOL: f64 = 1e-6;

/// Reads `timestamp,price` rows (header required) into a log-price series.
///
/// Rows are numbered from 1 at the first data row. The second column is
/// taken as a price and logged, unless its header is `x` or `log_price`, in
/// which case it is already a log price (the simulator's output format).
/// Extra columns are ignored.
pub fn ingest_csv(path: &Path) -> Result<PriceSeries> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let data_err = |msg: String| CliError::Data {
        path: name.clone(),
        msg,
    };
    let headers = reader
        .headers()
        .map_err(|e| data_err(format!("cannot read header: {e}")))?
        .clone();
    if headers.len() < 2 {
        return Err(data_err(
            "header must name at least two columns (timestamp, price)".into(),
        ));
    }
    if headers.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err(data_err("missing header row".into()));
    }
    let is_log = matches!(headers.get(1), Some("x" | "log_price"));

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let row = idx + 1;
        let row_err = |msg: String| CliError::DataRow {
            path: name.clone(),
            row,
            msg,
        };
        let rec = rec.map_err(|e| row_err(e.to_string()))?;
        let field = |i: usize, what: &str| -> Result<f64> {
            let s = rec.get(i).ok_or_else(|| row_err(format!("missing {what}")))?;
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(row_err(format!("invalid {what} {s:?}"))),
            }
        };
        let t = field(0, "timestamp")?;
        let p = field(1, "price")?;
        let x = if is_log {
            p
        } else if p > 0.0 {
            p.ln()
        } else {
            return Err(row_err(format!("non-positive price {p}")));
        };
        times.push(t);
        values.push(x);
    }
    if values.len() < 2 {
        return Err(data_err(format!("need at least 2 rows, found {}", values.len())));
    }

    let delta = uniform_spacing(&times).map_err(|(row, msg)| CliError::DataRow {
        path: name.clone(),
        row,
        msg,
    })?;
    Ok(PriceSeries::new(values, delta)?.with_label(name))
}

/// Median spacing, after checking every spacing against it. On failure
/// returns the 1-based row that ends the first bad spacing.
fn uniform_spacing(times: &[f64]) -> std::result::Result<f64, (usize, String)> {
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let delta = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    if !(delta > 0.0) {
        return Err((2, format!("timestamps must increase; median spacing is {delta}")));
    }
    for (i, &g) in gaps.iter().enumerate() {
        if (g - delta).abs() > GRID_TOL * delta {
            return Err((
                i + 2,
                format!("non-uniform grid: spacing {g} differs from median spacing {delta}"),
            ));
        }
    }
    Ok(delta)
}
