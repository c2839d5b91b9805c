//! Plain numeric CSV: a header row, then one record per line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use unigeo_core::Matrix;

/// Formats a float so that parsing it back gives the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `m` with the header `x0,x1,...`.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let header: Vec<String> = (0..m.cols()).map(|j| format!("x{j}")).collect();
    write_table(path, &header, m.iter_rows().map(|r| r.to_vec()))
}

/// Writes a header and numeric rows.
pub fn write_table<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            bail!("row of width {} under a {}-column header", row.len(), header.len());
        }
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.into_inner()
        .map_err(|e| anyhow::anyhow!("{}", e.error()))?
        .flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Reads a numeric CSV with a header row. Errors name the file and line.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    parse_matrix(file).with_context(|| format!("in {}", path.display()))
}

pub fn parse_matrix<R: std::io::Read>(reader: R) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = r.headers().context("unreadable header")?.len();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        if record.len() != width {
            bail!("line {line}: expected {width} fields, found {}", record.len());
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| anyhow::anyhow!("line {line}, column {}: not a number: {field:?}", j + 1))?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        bail!("no data rows");
    }
    Ok(Matrix::new(rows, width, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_exact() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 5e-324, f64::MAX, 2.0f64.sqrt()] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn parse_basic() {
        let m = parse_matrix("x0,x1\n1,2\n3.5,-4e-3\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.data(), &[1.0, 2.0, 3.5, -4e-3]);
    }

    #[test]
    fn empty_and_header_only() {
        for text in ["", "x0,x1\n"] {
            let e = parse_matrix(text.as_bytes()).unwrap_err();
            assert!(format!("{e:#}").contains("no data rows"), "{e:#}");
        }
    }

    #[test]
    fn ragged_row_names_line() {
        let e = parse_matrix("x0,x1\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn junk_names_line_and_column() {
        let e = parse_matrix("x0,x1\n1,2\n3,abc\n".as_bytes()).unwrap_err();
        let s = e.to_string();
        assert!(s.contains("line 3") && s.contains("column 2"), "{s}");
    }
}
