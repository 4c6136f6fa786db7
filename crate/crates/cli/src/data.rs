//! Numeric CSV input.

use std::path::Path;

use crate::error::{usage, Result};

/// Rows of a numeric CSV file. A first line that does not parse as numbers
/// is taken as a header and skipped. Errors name the 1-based file line.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(k, f)| f.parse::<f64>().map_err(|_| k))
            .collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(k) => {
                return Err(usage(format!(
                    "{} line {line}: field {} (`{}`) is not a number",
                    path.display(),
                    k + 1,
                    &record[k]
                )))
            }
        };
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(usage(format!(
                "{} line {line}: field {} is not finite",
                path.display(),
                bad + 1
            )));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(usage(format!(
                    "{} line {line}: expected {w} fields, found {}",
                    path.display(),
                    values.len()
                )))
            }
            _ => {}
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(usage(format!("{} holds no data rows", path.display())));
    }
    Ok(rows)
}

/// Splits rows into inputs and a trailing output column.
pub fn split_xy(rows: Vec<Vec<f64>>, path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if rows[0].len() < 2 {
        return Err(usage(format!(
            "{} needs at least one input column and an output column",
            path.display()
        )));
    }
    Ok(rows
        .into_iter()
        .map(|mut r| {
            let y = r.pop().expect("checked width");
            (r, y)
        })
        .unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn header_is_optional() {
        let f = file("x1,x2,y\n0.1,0.2,3\n0.4,0.5,6\n");
        assert_eq!(
            read_rows(f.path()).unwrap(),
            vec![vec![0.1, 0.2, 3.0], vec![0.4, 0.5, 6.0]]
        );
        let f = file("0.1,0.2,3\n");
        assert_eq!(read_rows(f.path()).unwrap().len(), 1);
    }

    #[test]
    fn errors_name_the_line() {
        let f = file("x,y\n0.1,1\n0.2,oops\n");
        let e = read_rows(f.path()).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("oops"), "{e}");
        let f = file("0.1,1\n0.2,1,5\n");
        let e = read_rows(f.path()).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("expected 2"), "{e}");
    }
}
