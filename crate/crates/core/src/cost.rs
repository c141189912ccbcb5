//! Separable ground costs `c(x, y) = sum_k table_k[x_k][y_k]`.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::histogram::GridShape;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("exponent p must be >= 1")]
    InvalidExponent,
    #[error("cost table entries overflow the 64-bit guard")]
    Overflow,
    #[error("point {0:?} is outside the cost grid")]
    IndexOutOfRange(Vec<usize>),
    #[error("axis {axis}: {message}")]
    InvalidTable { axis: usize, message: String },
    #[error("cost-table parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One square table per axis. Entries are nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparableCost {
    dims: Vec<usize>,
    tables: Vec<Vec<i64>>,
}

impl SeparableCost {
    /// `tables[k]` is a row-major `dims[k] x dims[k]` matrix.
    pub fn from_tables(tables: Vec<Vec<Vec<i64>>>) -> Result<Self, CostError> {
        if tables.is_empty() {
            return Err(CostError::InvalidTable {
                axis: 0,
                message: "no axes".into(),
            });
        }
        let mut dims = Vec::with_capacity(tables.len());
        let mut flat = Vec::with_capacity(tables.len());
        let mut max_sum: i64 = 0;
        for (axis, rows) in tables.into_iter().enumerate() {
            let n = rows.len();
            if n == 0 {
                return Err(CostError::InvalidTable {
                    axis,
                    message: "empty table".into(),
                });
            }
            let mut t = Vec::with_capacity(n * n);
            for (r, row) in rows.into_iter().enumerate() {
                if row.len() != n {
                    return Err(CostError::InvalidTable {
                        axis,
                        message: format!("row {r} has {} entries, expected {n}", row.len()),
                    });
                }
                if let Some(&v) = row.iter().find(|&&v| v < 0) {
                    return Err(CostError::InvalidTable {
                        axis,
                        message: format!("negative entry {v} in row {r}"),
                    });
                }
                t.extend(row);
            }
            let m = *t.iter().max().expect("non-empty table");
            max_sum = max_sum.checked_add(m).ok_or(CostError::Overflow)?;
            dims.push(n);
            flat.push(t);
        }
        Ok(Self { dims, tables: flat })
    }

    /// `table_k[a][b] = |a - b|^p` on every axis.
    pub fn power(shape: &GridShape, p: u32) -> Result<Self, CostError> {
        if p == 0 {
            return Err(CostError::InvalidExponent);
        }
        let tables = shape
            .dims()
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| (a.abs_diff(b) as i64).checked_pow(p).ok_or(CostError::Overflow))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_tables(tables)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn matches(&self, shape: &GridShape) -> bool {
        self.dims == shape.dims()
    }

    #[inline]
    pub fn axis(&self, axis: usize, a: usize, b: usize) -> i64 {
        self.tables[axis][a * self.dims[axis] + b]
    }

    pub fn table(&self, axis: usize) -> &[i64] {
        &self.tables[axis]
    }

    pub fn ground_cost(&self, x: &[usize], y: &[usize]) -> Result<i64, CostError> {
        let in_range = |p: &[usize]| p.len() == self.dims.len() && p.iter().zip(&self.dims).all(|(&c, &n)| c < n);
        if !in_range(x) {
            return Err(CostError::IndexOutOfRange(x.to_vec()));
        }
        if !in_range(y) {
            return Err(CostError::IndexOutOfRange(y.to_vec()));
        }
        Ok(self.ground_cost_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn ground_cost_unchecked(&self, x: &[usize], y: &[usize]) -> i64 {
        (0..self.dims.len()).map(|k| self.axis(k, x[k], y[k])).sum()
    }

    /// Largest ground cost between any two grid points.
    pub fn max_ground_cost(&self) -> i64 {
        self.tables
            .iter()
            .map(|t| *t.iter().max().expect("non-empty table"))
            .sum()
    }

    /// Real-valued cost matrix on one axis.
    pub fn axis_matrix_f64(&self, axis: usize) -> Vec<f64> {
        self.tables[axis].iter().map(|&v| v as f64).collect()
    }
}

pub fn load_cost_tables(path: impl AsRef<Path>) -> Result<SeparableCost, CostError> {
    parse_cost_tables(&fs::read_to_string(path)?)
}

/// Parses one or more `# axis: i, size: N` blocks, each followed by `N` rows of
/// `N` integers separated by whitespace or commas. Axes must appear in order.
pub fn parse_cost_tables(text: &str) -> Result<SeparableCost, CostError> {
    let mut tables: Vec<Vec<Vec<i64>>> = Vec::new();
    let mut expected_rows = 0usize;
    let mut size = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if expected_rows != 0 {
                return Err(CostError::Parse {
                    line: lineno,
                    message: format!("table ended early, {expected_rows} rows missing"),
                });
            }
            let (axis, n) = parse_axis_header(header).ok_or_else(|| CostError::Parse {
                line: lineno,
                message: "expected `# axis: i, size: N`".into(),
            })?;
            if axis != tables.len() {
                return Err(CostError::Parse {
                    line: lineno,
                    message: format!("expected axis {}, found {axis}", tables.len()),
                });
            }
            tables.push(Vec::with_capacity(n));
            expected_rows = n;
            size = n;
            continue;
        }
        if expected_rows == 0 {
            return Err(CostError::Parse {
                line: lineno,
                message: "row outside of an axis block".into(),
            });
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse::<i64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CostError::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        if row.len() != size {
            return Err(CostError::Parse {
                line: lineno,
                message: format!("expected {size} entries, found {}", row.len()),
            });
        }
        tables.last_mut().expect("inside a block").push(row);
        expected_rows -= 1;
    }
    if expected_rows != 0 {
        return Err(CostError::Parse {
            line: text.lines().count(),
            message: format!("{expected_rows} rows missing at end of file"),
        });
    }
    SeparableCost::from_tables(tables)
}

fn parse_axis_header(header: &str) -> Option<(usize, usize)> {
    let mut axis = None;
    let mut size = None;
    for part in header.split(',') {
        let (k, v) = part.split_once(':')?;
        let v = v.trim().parse::<usize>().ok()?;
        match k.trim() {
            "axis" => axis = Some(v),
            "size" => size = Some(v),
            _ => return None,
        }
    }
    Some((axis?, size?))
}
