use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use automodel::Dataset64;

use crate::CliError;

/// Reads a headed, comma-separated numeric table. The last column is the
/// response and any others are covariates.
pub fn read_csv(path: &Path) -> Result<Dataset64, CliError> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(file, &path.display().to_string())
}

pub fn parse_csv<R: Read>(input: R, name: &str) -> Result<Dataset64, CliError> {
    let err = |msg: String| CliError::Runtime(format!("{name}: {msg}"));
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let width = reader.headers().map_err(|e| err(e.to_string()))?.len();
    if width == 0 {
        return Err(err("empty header".into()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(err(format!("line {line}: expected {width} fields, found {}", record.len())));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(format!("line {line}, column {}: `{cell}` is not a finite number", j + 1)))?;
            if j + 1 == width {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(err("no data rows".into()));
    }
    let data = if width == 1 { Dataset64::new(y) } else { Dataset64::from_flat(x, width - 1, y) };
    data.map_err(|e| err(e.to_string()))
}

/// Rounds to 10 significant digits.
pub fn round10(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.9e}").parse().unwrap_or(v)
}

pub fn fmt10(v: f64) -> String {
    round10(v).to_string()
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write output: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset64, CliError> {
        parse_csv(s.as_bytes(), "test")
    }

    #[test]
    fn two_columns() {
        let d = parse("x,y\n1,2\n3,4\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.ncols(), 1);
        assert_eq!(d.y(), &[2.0, 4.0]);
        assert_eq!(d.row(1).unwrap(), &[3.0]);
    }

    #[test]
    fn single_column_is_covariate_free() {
        let d = parse("y\n1\n2\n").unwrap();
        assert_eq!(d.len(), 2);
        assert!(!d.has_covariates());
    }

    #[test]
    fn bad_cell_reports_line() {
        let e = parse("x,y\n1,abc\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = parse("x,y\n1,2\n3\n").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        assert!(parse("x,y\n").is_err());
        assert!(parse("x,y\n1,NaN\n").is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(round10(0.1234567890123), 0.123456789);
        assert_eq!(round10(123456.78901234), 123456.789);
        assert_eq!(fmt10(1.0 / 3.0), "0.3333333333");
        assert_eq!(round10(0.0), 0.0);
    }
}
