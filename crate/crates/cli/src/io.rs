//! Matrix files: Matrix Market (coordinate and array) and plain dense text.
//! Writers emit 17 significant digits so every `f64` round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sparsedisc::DenseMatrix;

use crate::CliError;

const BANNER: &str = "%%MatrixMarket";

/// Decimal rendering with 17 significant digits; parses back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parse either format; a Matrix Market banner on the first line selects
/// that reader.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix, CliError> {
    let first = text.lines().next().unwrap_or("");
    if first.starts_with(BANNER) {
        parse_matrix_market(text)
    } else {
        parse_dense(text)
    }
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("line {line}: {msg}"))
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn parse_value(tok: Option<&str>, line: usize) -> Result<f64, CliError> {
    let tok = tok.ok_or_else(|| err(line, "missing value"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(err(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn parse_index(tok: Option<&str>, bound: usize, line: usize) -> Result<usize, CliError> {
    let tok = tok.ok_or_else(|| err(line, "missing index"))?;
    let i: usize = tok
        .parse()
        .map_err(|_| err(line, format!("`{tok}` is not an index")))?;
    if i == 0 || i > bound {
        return Err(err(line, format!("index {i} out of range 1..={bound}")));
    }
    Ok(i - 1)
}

pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix, CliError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if words.len() != 5 || words[0] != BANNER.to_lowercase() || words[1] != "matrix" {
        return Err(err(1, "malformed Matrix Market header"));
    }
    let coordinate = match words[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(err(1, format!("unsupported format `{other}`"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" if coordinate => Field::Pattern,
        other => return Err(err(1, format!("unsupported field `{other}`"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };
    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data.next().ok_or_else(|| err(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(size_line, format!("bad size `{t}`"))))
        .collect::<Result<_, _>>()?;
    let expected = if coordinate { 3 } else { 2 };
    if dims.len() != expected {
        return Err(err(size_line, format!("size line needs {expected} integers")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(err(size_line, "symmetric storage needs a square matrix"));
    }
    let mut m = DMatrix::zeros(rows, cols);
    let place = |m: &mut DenseMatrix, i: usize, j: usize, v: f64, line: usize| {
        match symmetry {
            Symmetry::General => m[(i, j)] += v,
            _ if i < j => return Err(err(line, "entry above the diagonal in symmetric storage")),
            Symmetry::Symmetric => {
                m[(i, j)] += v;
                if i != j {
                    m[(j, i)] += v;
                }
            }
            Symmetry::Skew => {
                if i == j {
                    return Err(err(line, "diagonal entry in skew-symmetric storage"));
                }
                m[(i, j)] += v;
                m[(j, i)] -= v;
            }
        }
        Ok(())
    };
    let mut count = 0;
    if coordinate {
        let nnz = dims[2];
        for (line, l) in data {
            if count == nnz {
                return Err(err(line, format!("more than the declared {nnz} entries")));
            }
            let mut tok = l.split_whitespace();
            let i = parse_index(tok.next(), rows, line)?;
            let j = parse_index(tok.next(), cols, line)?;
            let v = match field {
                Field::Pattern => 1.0,
                _ => parse_value(tok.next(), line)?,
            };
            if field == Field::Integer && v.fract() != 0.0 {
                return Err(err(line, "non-integer value in integer matrix"));
            }
            if tok.next().is_some() {
                return Err(err(line, "trailing tokens"));
            }
            // Duplicates add up.
            place(&mut m, i, j, v, line)?;
            count += 1;
        }
        if count != nnz {
            return Err(err(size_line, format!("declared {nnz} entries, found {count}")));
        }
    } else {
        // Column-major; symmetric storage lists the lower triangle only.
        let slots: Vec<(usize, usize)> = (0..cols)
            .flat_map(|j| {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::Skew => j + 1,
                };
                (start..rows).map(move |i| (i, j))
            })
            .collect();
        let mut last_line = size_line;
        for (line, l) in data {
            last_line = line;
            for tok in l.split_whitespace() {
                let &(i, j) = slots
                    .get(count)
                    .ok_or_else(|| err(line, format!("more than {} values", slots.len())))?;
                let v = parse_value(Some(tok), line)?;
                place(&mut m, i, j, v, line)?;
                count += 1;
            }
        }
        if count != slots.len() {
            return Err(err(last_line, format!("expected {} values, found {count}", slots.len())));
        }
    }
    Ok(m)
}

/// Rows of whitespace-separated reals; `#` starts a comment.
pub fn parse_dense(text: &str) -> Result<DenseMatrix, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let row = content
            .split_whitespace()
            .map(|t| parse_value(Some(t), line))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(err(
                    line,
                    format!("row has {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input("empty matrix file".into()));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Coordinate Matrix Market text listing the nonzero entries.
pub fn matrix_market_string(m: &DenseMatrix) -> String {
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    let mut out = String::new();
    writeln!(out, "{BANNER} matrix coordinate real general").unwrap();
    writeln!(out, "{} {} {nnz}", m.nrows(), m.ncols()).unwrap();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{} {} {}", i + 1, j + 1, fmt_f64(v)).unwrap();
            }
        }
    }
    out
}

pub fn dense_string(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", cells.join(" ")).unwrap();
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &DenseMatrix) -> Result<(), CliError> {
    fs::write(path, matrix_market_string(m)).map_err(|e| CliError::io(path, e))
}
