//! Point clouds as CSV: one point per line, comma-separated coordinates,
//! optional `#` header lines. Floats are written in shortest round-trip
//! form, so a save/load cycle is exact.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use mldmae_core::{Matrix, PointCloud};

use crate::error::{CliError, Result};

/// Write `cloud` with a `# x0,x1,...` header.
pub fn write_cloud<W: Write>(cloud: &PointCloud, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    let header: Vec<String> = (0..cloud.dim()).map(|i| format!("x{i}")).collect();
    writeln!(out, "# {}", header.join(","))?;
    let mut line = String::new();
    for row in cloud.points.iter_rows() {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

/// An empty sample file: just the header for `dim` columns.
pub fn write_empty<W: Write>(dim: usize, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    writeln!(out, "# {}", header.join(","))
}

pub fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_cloud(cloud, file).map_err(|e| CliError::io(path, e))
}

/// Parse CSV text; `path` only labels errors.
pub fn parse_cloud<R: Read>(input: R, path: &Path) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} columns, found {len}")
                }
                _ => e.to_string(),
            };
            CliError::Parse {
                path: path.to_path_buf(),
                line,
                message,
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected {c} columns, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        for cell in record.iter() {
            let v: f64 = cell.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{cell}` is not a number"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no data rows".into(),
        });
    };
    Ok(PointCloud::new(Matrix::new(rows, cols, data)?)?)
}

pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_cloud(file, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mldmae_core::synthdata::gen_spiral;

    fn parse(text: &str) -> Result<PointCloud> {
        parse_cloud(text.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn round_trip_is_exact() {
        let cloud = gen_spiral(50, 3).unwrap();
        let mut buf = Vec::new();
        write_cloud(&cloud, &mut buf).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), cloud);
    }

    #[test]
    fn header_and_blank_lines_are_skipped() {
        let c = parse("# a,b\n1,2\n\n3.5, -4e-3\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.point(1), &[3.5, -4e-3]);
    }

    #[test]
    fn wrong_arity_names_the_line() {
        let err = parse("# x0,x1\n1,2\n3,4,5\n").unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_number_names_the_line() {
        let err = parse("1,2\n3,abc\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse(""), Err(CliError::Parse { .. })));
        assert!(matches!(parse("# x0\n"), Err(CliError::Parse { .. })));
    }
}
