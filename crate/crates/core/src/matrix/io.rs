//! Dense-text and MatrixMarket readers and writers.
//!
//! Dense text is `rows cols` on the first line followed by whitespace
//! separated entries in row-major order. MatrixMarket coordinate and array
//! files with `real`, `integer` or `pattern` fields are accepted; `symmetric`
//! coordinate files are mirrored. Everything is densified.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    MatrixMarket,
    DenseText,
}

impl MatrixFormat {
    /// `.mtx` means MatrixMarket, anything else dense text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mtx") => MatrixFormat::MatrixMarket,
            _ => MatrixFormat::DenseText,
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        MatrixFormat::DenseText => parse_dense(&text),
        MatrixFormat::MatrixMarket => parse_matrix_market(&text),
    }
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        MatrixFormat::DenseText => format_dense(m),
        MatrixFormat::MatrixMarket => format_matrix_market(m),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("bad number {tok:?}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(line, format!("bad integer {tok:?}")))
}

pub(crate) fn parse_dense(text: &str) -> Result<Matrix> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(k, l)| l.split_whitespace().map(move |t| (k + 1, t)));
    let (l, t) = tokens.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let rows = parse_usize(t, l)?;
    let (l, t) = tokens.next().ok_or_else(|| parse_err(l, "missing column count"))?;
    let cols = parse_usize(t, l)?;
    let mut data = Vec::with_capacity(rows * cols);
    for (l, t) in tokens {
        if data.len() == rows * cols {
            return Err(parse_err(l, "trailing data"));
        }
        data.push(parse_f64(t, l)?);
    }
    if data.len() != rows * cols {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {} entries, found {}", rows * cols, data.len()),
        ));
    }
    Matrix::new(rows, cols, data)
}

fn format_dense(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[derive(PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

fn parse_matrix_market(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    let layout = match fields[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(1, format!("unsupported layout {other}"))),
    };
    let pattern = match fields[3].as_str() {
        "pattern" => true,
        "real" | "integer" | "double" => false,
        other => return Err(parse_err(1, format!("unsupported field {other}"))),
    };
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry {other}"))),
    };
    if pattern && layout == Layout::Array {
        return Err(parse_err(1, "pattern array files are not valid MatrixMarket"));
    }

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| parse_usize(t, size_line))
        .collect::<Result<_>>()?;

    match layout {
        Layout::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(parse_err(size_line, "expected `rows cols nnz`"));
            };
            if rows == 0 || cols == 0 {
                return Err(parse_err(size_line, "empty dimension"));
            }
            let mut data = vec![0.0; rows * cols];
            let mut seen = 0;
            for (l, line) in body {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let want = if pattern { 2 } else { 3 };
                if toks.len() < want {
                    return Err(parse_err(l, "short entry line"));
                }
                let i = parse_usize(toks[0], l)?;
                let j = parse_usize(toks[1], l)?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(l, format!("index ({i}, {j}) out of range")));
                }
                let v = if pattern { 1.0 } else { parse_f64(toks[2], l)? };
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i - 1,
                        col: j - 1,
                        value: v,
                    });
                }
                data[(i - 1) * cols + (j - 1)] = v;
                if symmetric && i != j {
                    if j > rows || i > cols {
                        return Err(parse_err(l, "symmetric file with non-square shape"));
                    }
                    data[(j - 1) * cols + (i - 1)] = v;
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(size_line, format!("header says {nnz} entries, found {seen}")));
            }
            Matrix::new(rows, cols, data)
        }
        Layout::Array => {
            let [rows, cols] = dims[..] else {
                return Err(parse_err(size_line, "expected `rows cols`"));
            };
            if symmetric && rows != cols {
                return Err(parse_err(size_line, "symmetric file with non-square shape"));
            }
            let mut values = Vec::new();
            for (l, line) in body {
                for t in line.split_whitespace() {
                    values.push(parse_f64(t, l)?);
                }
            }
            // column-major; symmetric files list the lower triangle only
            let mut data = vec![0.0; rows * cols];
            let mut it = values.into_iter();
            for j in 0..cols {
                let start = if symmetric { j } else { 0 };
                for i in start..rows {
                    let v = it.next().ok_or_else(|| parse_err(size_line, "too few array entries"))?;
                    data[i * cols + j] = v;
                    if symmetric {
                        data[j * cols + i] = v;
                    }
                }
            }
            if it.next().is_some() {
                return Err(parse_err(size_line, "too many array entries"));
            }
            Matrix::new(rows, cols, data)
        }
    }
}

fn format_matrix_market(m: &Matrix) -> String {
    let nnz = m.data().iter().filter(|&&v| v != 0.0).count();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.rows(), m.cols(), nnz);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m.get(i, j);
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {v:?}", i + 1, j + 1);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate, InstanceClass, InstanceSpec};

    #[test]
    fn dense_identity() {
        let m = parse_dense("2 2\n1 0\n0 1").unwrap();
        assert_eq!(m, Matrix::identity(2));
    }

    #[test]
    fn dense_negative_entry() {
        assert!(matches!(
            parse_dense("1 2\n1 -1"),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(parse_dense("2 2\n1 0 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_dense("1 1\n1 2"), Err(Error::Parse { .. })));
    }

    #[test]
    fn matrix_market_pattern_identity() {
        let text = "%%MatrixMarket matrix coordinate pattern general\n% comment\n2 2 2\n1 1\n2 2\n";
        assert_eq!(parse_matrix_market(text).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn matrix_market_symmetric_and_array() {
        let sym = "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 0.5\n3 3 2\n";
        let m = parse_matrix_market(sym).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
        assert_eq!(m.get(2, 2), 2.0);

        let arr = "%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n";
        let m = parse_matrix_market(arr).unwrap();
        assert_eq!(m, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
    }

    #[test]
    fn matrix_market_rejects_negative() {
        let text = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 -2\n";
        assert!(matches!(parse_matrix_market(text), Err(Error::NegativeEntry { .. })));
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = std::env::temp_dir().join(format!("deepar-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let m = generate(&InstanceSpec::new(InstanceClass::Uniform, 5, 7)).unwrap();
        for (name, fmt) in [("u.txt", MatrixFormat::DenseText), ("u.mtx", MatrixFormat::MatrixMarket)] {
            let p = dir.join(name);
            save_matrix(&m, &p, fmt).unwrap();
            let back = load_matrix(&p, MatrixFormat::from_path(&p)).unwrap();
            assert_eq!(back.data(), m.data());
        }
        let id = Matrix::identity(4);
        let p = dir.join("id.txt");
        save_matrix(&id, &p, MatrixFormat::DenseText).unwrap();
        assert_eq!(load_matrix(&p, MatrixFormat::DenseText).unwrap(), id);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn unwritable_path_errors() {
        let p = Path::new("/nonexistent-dir/for/sure/m.txt");
        assert!(matches!(
            save_matrix(&Matrix::identity(2), p, MatrixFormat::DenseText),
            Err(Error::Io { .. })
        ));
    }
}
