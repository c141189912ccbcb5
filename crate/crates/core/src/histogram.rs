//! Histograms on regular d-dimensional grids.
//!
//! Masses are stored densely in row-major order (last axis fastest). Grid
//! coordinates are 0-based. Exact flow solving needs integral, balanced
//! supplies, which [`Histogram::integerize`] produces by largest-remainder
//! apportionment.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::Path;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{Float, ToPrimitive, Zero};
use thiserror::Error;

/// Default integer total used when histograms are integerized for the flow solver.
pub const DEFAULT_TARGET_TOTAL: i64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Line(usize),
    Byte(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Line(l) => write!(f, "line {l}"),
            Position::Byte(b) => write!(f, "byte {b}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum HistogramError {
    #[error("invalid grid shape: {0}")]
    InvalidShape(String),
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("negative mass {value} at bin {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("non-finite value at bin {index}")]
    NonFinite { index: usize },
    #[error("histogram has zero total mass")]
    ZeroTotal,
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate bounds on axis {axis}: min must be < max")]
    DegenerateBounds { axis: usize },
    #[error("point {index} has {found} coordinates, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("target total must be >= 1, got {0}")]
    InvalidTarget(i64),
    #[error("parse error at {position}: {message}")]
    Parse { position: Position, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(position: Position, message: impl Into<String>) -> HistogramError {
    HistogramError::Parse {
        position,
        message: message.into(),
    }
}

/// Per-axis sizes of a regular grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridShape {
    dims: Vec<usize>,
    len: usize,
}

impl GridShape {
    pub fn new(dims: Vec<usize>) -> Result<Self, HistogramError> {
        if dims.is_empty() {
            return Err(HistogramError::InvalidShape("at least one axis is required".into()));
        }
        if let Some(axis) = dims.iter().position(|&n| n == 0) {
            return Err(HistogramError::InvalidShape(format!("axis {axis} has size 0")));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| HistogramError::InvalidShape("bin count overflows usize".into()))?;
        Ok(Self { dims, len })
    }

    /// `side^d` grid.
    pub fn cubic(side: usize, d: usize) -> Result<Self, HistogramError> {
        Self::new(vec![side; d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of bins.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub fn flat_index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for (&c, &n) in coords.iter().zip(&self.dims) {
            if c >= n {
                return None;
            }
            idx = idx * n + c;
        }
        Some(idx)
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        self.coords_into(flat, &mut out);
        out
    }

    pub fn coords_into(&self, mut flat: usize, out: &mut [usize]) {
        debug_assert!(flat < self.len);
        for k in (0..self.dims.len()).rev() {
            out[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Nonnegative real masses over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    shape: GridShape,
    mass: Vec<f64>,
    total: f64,
}

impl Histogram {
    pub fn from_dense(shape: GridShape, values: Vec<f64>) -> Result<Self, HistogramError> {
        if values.len() != shape.len() {
            return Err(HistogramError::LengthMismatch {
                expected: shape.len(),
                found: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(HistogramError::NonFinite { index });
            }
            if value < 0.0 {
                return Err(HistogramError::NegativeMass { index, value });
            }
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(HistogramError::ZeroTotal);
        }
        Ok(Self {
            shape,
            mass: values,
            total,
        })
    }

    /// Counts points per bin. Bins are half-open except the last one on each
    /// axis, and points outside the bounds clamp to the nearest edge bin.
    pub fn bin_points(
        points: &[Vec<f64>],
        shape: GridShape,
        bounds: &[(f64, f64)],
    ) -> Result<Self, HistogramError> {
        let d = shape.ndim();
        if points.is_empty() {
            return Err(HistogramError::EmptyInput);
        }
        if bounds.len() != d {
            return Err(HistogramError::InvalidShape(format!(
                "{} bounds given for a {d}-dimensional grid",
                bounds.len()
            )));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(HistogramError::DegenerateBounds { axis });
            }
        }
        let mut mass = vec![0.0; shape.len()];
        let mut coords = vec![0usize; d];
        for (index, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(HistogramError::DimensionMismatch {
                    index,
                    expected: d,
                    found: p.len(),
                });
            }
            for k in 0..d {
                let x = p[k];
                if !x.is_finite() {
                    return Err(HistogramError::NonFinite { index });
                }
                let (lo, hi) = bounds[k];
                let n = shape.dims()[k];
                let t = ((x - lo) / (hi - lo) * n as f64).floor();
                coords[k] = if t < 0.0 { 0 } else { (t as usize).min(n - 1) };
            }
            let flat = shape.flat_index(&coords).expect("clamped coordinates are in range");
            mass[flat] += 1.0;
        }
        Self::from_dense(shape, mass)
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Masses divided by the total.
    pub fn normalized(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m / self.total).collect()
    }

    /// Scales masses to integers summing exactly to `target_total` using
    /// largest-remainder apportionment; equal remainders go to the lowest
    /// bin index first.
    ///
    /// The apportionment is computed in exact arithmetic on the binary values
    /// of the masses, so proportional inputs are reproduced exactly.
    pub fn integerize(&self, target_total: i64) -> Result<IntegerHistogram, HistogramError> {
        if target_total < 1 {
            return Err(HistogramError::InvalidTarget(target_total));
        }
        let scaled = exact_mantissas(&self.mass);
        let sum: BigUint = scaled.iter().sum();
        let target = BigUint::from(target_total as u64);

        let mut counts = Vec::with_capacity(scaled.len());
        let mut remainders = Vec::with_capacity(scaled.len());
        let mut assigned: i64 = 0;
        for m in &scaled {
            let (q, r) = (m * &target).div_rem(&sum);
            let q = q.to_i64().expect("quota is bounded by target_total");
            assigned += q;
            counts.push(q);
            remainders.push(r);
        }
        let leftover = (target_total - assigned) as usize;
        if leftover > 0 {
            let mut order: Vec<usize> = (0..scaled.len()).filter(|&i| !remainders[i].is_zero()).collect();
            order.sort_by(|&a, &b| match remainders[b].cmp(&remainders[a]) {
                Ordering::Equal => a.cmp(&b),
                o => o,
            });
            for &i in order.iter().take(leftover) {
                counts[i] += 1;
            }
        }
        Ok(IntegerHistogram {
            shape: self.shape.clone(),
            mass: counts,
            total: target_total,
        })
    }
}

/// Represents every value as an integer multiple of a shared power of two.
fn exact_mantissas(values: &[f64]) -> Vec<BigUint> {
    let decoded: Vec<(u64, i16)> = values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                (0, 0)
            } else {
                let (mantissa, exponent, _) = Float::integer_decode(v);
                (mantissa, exponent)
            }
        })
        .collect();
    let min_exp = decoded
        .iter()
        .filter(|(m, _)| *m != 0)
        .map(|&(_, e)| e)
        .min()
        .unwrap_or(0);
    decoded
        .into_iter()
        .map(|(m, e)| BigUint::from(m) << ((e - min_exp) as usize))
        .collect()
}

/// Nonnegative integer masses over a grid; the carrier for exact flow solves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerHistogram {
    shape: GridShape,
    mass: Vec<i64>,
    total: i64,
}

impl IntegerHistogram {
    pub fn new(shape: GridShape, mass: Vec<i64>) -> Result<Self, HistogramError> {
        if mass.len() != shape.len() {
            return Err(HistogramError::LengthMismatch {
                expected: shape.len(),
                found: mass.len(),
            });
        }
        let mut total: i64 = 0;
        for (index, &m) in mass.iter().enumerate() {
            if m < 0 {
                return Err(HistogramError::NegativeMass { index, value: m as f64 });
            }
            total = total
                .checked_add(m)
                .ok_or_else(|| HistogramError::InvalidShape("total mass overflows i64".into()))?;
        }
        if total == 0 {
            return Err(HistogramError::ZeroTotal);
        }
        Ok(Self { shape, mass, total })
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn mass(&self) -> &[i64] {
        &self.mass
    }

    pub fn total(&self) -> i64 {
        self.total
    }

    pub fn to_histogram(&self) -> Histogram {
        Histogram {
            shape: self.shape.clone(),
            mass: self.mass.iter().map(|&m| m as f64).collect(),
            total: self.total as f64,
        }
    }
}

/// Loads a histogram, choosing the parser from the file extension
/// (`.pgm` for images, anything else is read as histogram CSV).
pub fn load_histogram(path: impl AsRef<Path>) -> Result<Histogram, HistogramError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
        Some(ext) if ext == "pgm" => load_pgm(path),
        _ => load_csv(path),
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Histogram, HistogramError> {
    let bytes = fs::read(path)?;
    parse_pgm(&bytes)
}

/// Parses a P2 (ASCII) or P5 (binary) PGM image into a `height x width` histogram.
pub fn parse_pgm(bytes: &[u8]) -> Result<Histogram, HistogramError> {
    let mut cur = PgmCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(HistogramError::UnsupportedFormat(format!(
                "magic number {:?} is not P2 or P5",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if width == 0 || height == 0 {
        return Err(parse_err(Position::Byte(cur.pos), "image has zero width or height"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(Position::Byte(cur.pos), format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let mut values = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(parse_err(Position::Byte(cur.pos), "missing whitespace before raster"));
        }
        cur.pos += 1;
        let sample = if maxval > 255 { 2 } else { 1 };
        let needed = count * sample;
        let raster = &bytes[cur.pos..];
        if raster.len() < needed {
            return Err(parse_err(
                Position::Byte(bytes.len()),
                format!("truncated raster: expected {needed} bytes, found {}", raster.len()),
            ));
        }
        for i in 0..count {
            let v = if sample == 2 {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
            } else {
                raster[i] as usize
            };
            if v > maxval {
                return Err(parse_err(
                    Position::Byte(cur.pos + i * sample),
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            values.push(v as f64);
        }
    } else {
        for _ in 0..count {
            let at = cur.pos;
            let v = cur.number()?;
            if v > maxval {
                return Err(parse_err(Position::Byte(at), format!("sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64);
        }
    }
    Histogram::from_dense(GridShape::new(vec![height, width])?, values)
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], HistogramError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(Position::Byte(start), "unexpected end of file"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize, HistogramError> {
        let tok = self.token()?;
        let start = self.pos - tok.len();
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                parse_err(
                    Position::Byte(start),
                    format!("expected an unsigned integer, found {:?}", String::from_utf8_lossy(tok)),
                )
            })
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Histogram, HistogramError> {
    parse_csv(&fs::read_to_string(path)?)
}

/// Parses the histogram CSV format: a `# shape: N1,N2,...` header followed by
/// one value per line in row-major order. Blank lines are ignored.
pub fn parse_csv(text: &str) -> Result<Histogram, HistogramError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(HistogramError::EmptyInput)?;
    let dims_text = header
        .strip_prefix('#')
        .map(str::trim_start)
        .and_then(|h| h.strip_prefix("shape:"))
        .ok_or_else(|| parse_err(Position::Line(hline), "expected header `# shape: N1,N2,...`"))?;
    let dims = dims_text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| parse_err(Position::Line(hline), format!("bad shape: {e}")))?;
    let shape = GridShape::new(dims)?;
    let mut values = Vec::with_capacity(shape.len());
    for (lineno, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|e| parse_err(Position::Line(lineno), format!("bad value {line:?}: {e}")))?;
        values.push(v);
    }
    Histogram::from_dense(shape, values)
}

/// Serializes a histogram in the CSV format accepted by [`parse_csv`].
pub fn to_csv(h: &Histogram) -> String {
    let dims: Vec<String> = h.shape().dims().iter().map(|n| n.to_string()).collect();
    let mut out = format!("# shape: {}\n", dims.join(","));
    for v in h.mass() {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn load_points_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>, HistogramError> {
    parse_points_csv(&fs::read_to_string(path)?)
}

/// Parses a point cloud: one point per line, comma-separated reals. Lines
/// starting with `#` are treated as headers/comments.
pub fn parse_points_csv(text: &str) -> Result<Vec<Vec<f64>>, HistogramError> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(Position::Line(i + 1), format!("bad coordinate: {e}")))?;
        if let Some(first) = points.first() {
            if first.len() != p.len() {
                return Err(parse_err(
                    Position::Line(i + 1),
                    format!("expected {} coordinates, found {}", first.len(), p.len()),
                ));
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(HistogramError::EmptyInput);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: &[usize]) -> GridShape {
        GridShape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn from_dense_totals() {
        let h = Histogram::from_dense(shape(&[2, 2]), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(h.total(), 2.0);
        let h = Histogram::from_dense(shape(&[3, 3]), vec![1.0; 9]).unwrap();
        assert_eq!(h.total(), 9.0);
    }

    #[test]
    fn from_dense_rejects_bad_input() {
        assert!(matches!(
            Histogram::from_dense(shape(&[2, 2]), vec![1.0, -1.0, 0.0, 0.0]),
            Err(HistogramError::NegativeMass { index: 1, .. })
        ));
        assert!(matches!(
            Histogram::from_dense(shape(&[2, 2]), vec![0.0; 4]),
            Err(HistogramError::ZeroTotal)
        ));
        assert!(matches!(
            Histogram::from_dense(shape(&[2, 2]), vec![1.0; 3]),
            Err(HistogramError::LengthMismatch { expected: 4, found: 3 })
        ));
        assert!(GridShape::new(vec![]).is_err());
        assert!(GridShape::new(vec![3, 0]).is_err());
    }

    #[test]
    fn coords_roundtrip() {
        let s = shape(&[2, 3, 4]);
        assert_eq!(s.strides(), vec![12, 4, 1]);
        for flat in 0..s.len() {
            assert_eq!(s.flat_index(&s.coords(flat)), Some(flat));
        }
        assert_eq!(s.flat_index(&[1, 3, 0]), None);
    }

    #[test]
    fn bin_points_corners_and_clamp() {
        let bounds = [(0.0, 1.0), (0.0, 1.0)];
        let pts = vec![vec![0.0, 0.0], vec![0.99, 0.99]];
        let h = Histogram::bin_points(&pts, shape(&[2, 2]), &bounds).unwrap();
        assert_eq!(h.mass(), &[1.0, 0.0, 0.0, 1.0]);

        let h = Histogram::bin_points(&[vec![1.0, 1.0]], shape(&[2, 2]), &bounds).unwrap();
        assert_eq!(h.mass(), &[0.0, 0.0, 0.0, 1.0]);

        assert!(matches!(
            Histogram::bin_points(&[], shape(&[2, 2]), &bounds),
            Err(HistogramError::EmptyInput)
        ));
        assert!(matches!(
            Histogram::bin_points(&pts, shape(&[2, 2]), &[(0.0, 1.0), (1.0, 1.0)]),
            Err(HistogramError::DegenerateBounds { axis: 1 })
        ));
    }

    #[test]
    fn integerize_examples() {
        let h = Histogram::from_dense(shape(&[2]), vec![1.0, 1.0]).unwrap();
        assert_eq!(h.integerize(10).unwrap().mass(), &[5, 5]);

        let h = Histogram::from_dense(shape(&[3]), vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(h.integerize(10).unwrap().mass(), &[4, 3, 3]);

        let h = Histogram::from_dense(shape(&[2]), vec![0.7, 0.3]).unwrap();
        assert_eq!(h.integerize(1).unwrap().mass(), &[1, 0]);

        assert!(matches!(h.integerize(0), Err(HistogramError::InvalidTarget(0))));
    }

    #[test]
    fn integerize_is_exact_on_decimal_proportions() {
        // 0.1, 0.2, 0.3, 0.4 are not exact in binary; quotas stay exact anyway
        let h = Histogram::from_dense(shape(&[4]), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let ih = h.integerize(10).unwrap();
        assert_eq!(ih.total(), 10);
        assert_eq!(ih.mass(), &[1, 2, 3, 4]);
    }

    #[test]
    fn pgm_ascii_and_binary() {
        let h = parse_pgm(b"P2\n# comment\n2 2\n255\n1 0\n0 1\n").unwrap();
        assert_eq!(h.shape().dims(), &[2, 2]);
        assert_eq!(h.mass(), &[1.0, 0.0, 0.0, 1.0]);

        let mut raw = b"P5 3 1 255\n".to_vec();
        raw.extend_from_slice(&[7, 0, 9]);
        let h = parse_pgm(&raw).unwrap();
        assert_eq!(h.shape().dims(), &[1, 3]);
        assert_eq!(h.mass(), &[7.0, 0.0, 9.0]);

        let mut raw = b"P5 2 1 65535\n".to_vec();
        raw.extend_from_slice(&[0x01, 0x00, 0x00, 0x02]);
        let h = parse_pgm(&raw).unwrap();
        assert_eq!(h.mass(), &[256.0, 2.0]);
    }

    #[test]
    fn pgm_errors() {
        assert!(matches!(
            parse_pgm(b"P2\n2 2\n255\n1 0 0\n"),
            Err(HistogramError::Parse { .. })
        ));
        let mut raw = b"P5 2 2 255\n".to_vec();
        raw.extend_from_slice(&[1, 2, 3]);
        assert!(matches!(parse_pgm(&raw), Err(HistogramError::Parse { .. })));
        assert!(matches!(parse_pgm(b"P6 1 1 255\n\0\0\0"), Err(HistogramError::UnsupportedFormat(_))));
        assert!(matches!(
            parse_pgm(b"P2 1 1 10\n11\n"),
            Err(HistogramError::Parse { position: Position::Byte(_), .. })
        ));
    }

    #[test]
    fn csv_histogram() {
        let text = "# shape: 2,2,2\n1\n2\n3\n4\n5\n6\n7\n8\n";
        let h = parse_csv(text).unwrap();
        assert_eq!(h.shape().dims(), &[2, 2, 2]);
        assert_eq!(h.total(), 36.0);
        assert_eq!(parse_csv(&to_csv(&h)).unwrap(), h);

        match parse_csv("# shape: 2\n1\nx\n") {
            Err(HistogramError::Parse { position, .. }) => assert_eq!(position, Position::Line(3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_csv("1\n2\n"), Err(HistogramError::Parse { .. })));
    }

    #[test]
    fn points_csv() {
        let pts = parse_points_csv("# x,y\n0.5,0.25\n1,2\n").unwrap();
        assert_eq!(pts, vec![vec![0.5, 0.25], vec![1.0, 2.0]]);
        assert!(parse_points_csv("1,2\n3\n").is_err());
    }
}
