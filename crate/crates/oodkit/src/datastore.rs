//! Load, validate, and persist matrices and label vectors.
//!
//! Two interchange formats are supported:
//!
//! * **CSV** — first line is a header. A column literally named `label` is
//!   split off into a [`LabelVector`] so small datasets can live in one file.
//!   Values are written with 17 significant digits, which round-trips every
//!   finite `f64` exactly.
//! * **Binary container** — a self-describing little-endian format:
//!   magic bytes `OODT`, version (`u32`, currently 1), rows (`u64`),
//!   cols (`u64`), dtype tag (`u32`, 1 = 64-bit float), then the payload
//!   row-major. Round-trips are bit-exact and the declared shape must match
//!   the payload length exactly — loading never silently truncates.
//!
//! Loaded objects are immutable and reject non-finite values, so downstream
//! arithmetic never sees NaN or infinity.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Magic bytes identifying the binary container format.
pub const BINARY_MAGIC: [u8; 4] = *b"OODT";
/// Current binary container version.
pub const BINARY_VERSION: u32 = 1;
/// Dtype tag for 64-bit little-endian floats (the only tag in version 1).
pub const DTYPE_F64_LE: u32 = 1;

/// Interchange format selector for [`load_matrix`] / [`save_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Binary,
    /// Detect by magic bytes: files starting with `OODT` are binary,
    /// everything else is parsed as CSV. Valid for loading only.
    Auto,
}

/// Dense row-major matrix of finite 64-bit floats.
///
/// Houses logit matrices (rows = samples, cols = K classes), feature
/// matrices (cols = embedding dim), and prototype matrices (rows = K).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build a matrix from row-major data, validating shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter {
                name: "shape",
                detail: format!("rows and cols must be >= 1, got {rows} x {cols}"),
            });
        }
        let expected = rows.checked_mul(cols).ok_or(Error::DimensionOverflow {
            rows: rows as u64,
            cols: cols as u64,
        })?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "matrix data length".into(),
                expected,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: format!("matrix entry ({}, {})", i / cols, i % cols),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build a matrix from equal-length rows (test/construction convenience).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::DimensionMismatch {
                    context: format!("row {i} length"),
                    expected: k,
                    found: r.len(),
                });
            }
        }
        Matrix::from_vec(n, k, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major backing slice, length `rows * cols`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Borrow row `i` as a slice of length `cols`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Iterate rows in order.
    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Non-negative integer class indices paired with a matrix's rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Self {
        LabelVector { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// Smallest class count consistent with the labels (max label + 1).
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Check every label against a K-class logit/prototype set.
    pub fn validate_classes(&self, k: usize) -> Result<()> {
        for (index, &label) in self.labels.iter().enumerate() {
            if label >= k {
                return Err(Error::LabelOutOfRange { index, label, k });
            }
        }
        Ok(())
    }
}

/// What a matrix artifact represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Logits,
    Features,
    Prototypes,
}

/// A named matrix with optional labels and a declared role.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub matrix: Matrix,
    pub labels: Option<LabelVector>,
    pub kind: DatasetKind,
    pub name: String,
}

impl DatasetBundle {
    /// Validates that labels (when present) pair with the matrix rows and
    /// that prototype bundles carry no labels (their rows ARE the classes).
    pub fn new(
        matrix: Matrix,
        labels: Option<LabelVector>,
        kind: DatasetKind,
        name: impl Into<String>,
    ) -> Result<Self> {
        if kind == DatasetKind::Prototypes && labels.is_some() {
            return Err(Error::InvalidParameter {
                name: "labels",
                detail: "prototype bundles carry no labels".into(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != matrix.rows() {
                return Err(Error::DimensionMismatch {
                    context: "label count vs matrix rows".into(),
                    expected: matrix.rows(),
                    found: l.len(),
                });
            }
        }
        Ok(DatasetBundle {
            matrix,
            labels,
            kind,
            name: name.into(),
        })
    }
}

/// Load a matrix, discarding any `label` column a CSV may carry.
///
/// Use [`load_matrix_with_labels`] to keep the labels.
pub fn load_matrix(path: impl AsRef<Path>, format: Format) -> Result<Matrix> {
    load_matrix_with_labels(path, format).map(|(m, _)| m)
}

/// Load a matrix together with the labels split off a CSV `label` column.
///
/// Binary containers carry no labels, so the second component is `None`.
pub fn load_matrix_with_labels(
    path: impl AsRef<Path>,
    format: Format,
) -> Result<(Matrix, Option<LabelVector>)> {
    let path = path.as_ref();
    match resolve_format(path, format)? {
        Format::Binary => Ok((read_binary(path)?, None)),
        _ => read_csv_matrix(path),
    }
}

/// Save a matrix as CSV (header `c0,c1,...`, 17 significant digits) or as
/// the binary container (bit-exact).
pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    match format {
        Format::Csv => write_csv(m, path),
        Format::Binary => write_binary(m, path),
        Format::Auto => Err(Error::InvalidParameter {
            name: "format",
            detail: "auto is a load-time detector; pick csv or binary to save".into(),
        }),
    }
}

/// Load a CSV keeping the header names of the numeric columns.
///
/// Returns `(column_names, matrix, labels)` where `column_names` matches the
/// matrix columns after any `label` column has been split off. Useful when a
/// caller needs to locate a column by name (e.g. the `score` column of a
/// score file).
pub fn load_csv_columns(
    path: impl AsRef<Path>,
) -> Result<(Vec<String>, Matrix, Option<LabelVector>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw = parse_raw_csv(path, &text)?;
    let label_col = raw.label_columns().first().copied();
    let names = raw
        .header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_col)
        .map(|(_, h)| h.clone())
        .collect();
    let (matrix, labels) = read_csv_matrix(path)?;
    Ok((names, matrix, labels))
}

/// Load labels from either a plain file (one integer per line, no header)
/// or a CSV with a column named `label`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or("").trim();
    if first.contains(',') || first == "label" {
        let raw = parse_raw_csv(path, &text)?;
        let col = raw
            .label_columns()
            .first()
            .copied()
            .ok_or_else(|| Error::MalformedHeader {
                path: path.to_path_buf(),
                detail: "no column named `label`".into(),
            })?;
        let mut labels = Vec::with_capacity(raw.rows.len());
        for (line, fields) in &raw.rows {
            labels.push(parse_label(path, *line, &fields[col])?);
        }
        Ok(LabelVector::new(labels))
    } else {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            labels.push(parse_label(path, i + 1, t)?);
        }
        Ok(LabelVector::new(labels))
    }
}

fn parse_label(path: &Path, line: usize, field: &str) -> Result<usize> {
    let value: i64 =
        field
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| Error::ParseFailure {
                path: path.to_path_buf(),
                line,
                detail: format!("`{field}` is not an integer label: {e}"),
            })?;
    if value < 0 {
        return Err(Error::NegativeLabel {
            path: path.to_path_buf(),
            line,
            value,
        });
    }
    Ok(value as usize)
}

fn resolve_format(path: &Path, format: Format) -> Result<Format> {
    if format != Format::Auto {
        return Ok(format);
    }
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    match file.read_exact(&mut magic) {
        Ok(()) if magic == BINARY_MAGIC => Ok(Format::Binary),
        // Short files and non-magic prefixes both fall through to CSV,
        // whose parser produces the precise diagnostic.
        _ => Ok(Format::Csv),
    }
}

// ---------------------------------------------------------------------------
// Binary container
// ---------------------------------------------------------------------------

fn read_binary(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let header_err = |detail: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        detail: detail.into(),
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| header_err("file too short for magic bytes"))?;
    if magic != BINARY_MAGIC {
        return Err(header_err("bad magic bytes (expected `OODT`)"));
    }
    let version = read_u32(&mut r).map_err(|_| header_err("truncated version field"))?;
    if version != BINARY_VERSION {
        return Err(header_err(&format!("unsupported version {version}")));
    }
    let rows = read_u64(&mut r).map_err(|_| header_err("truncated rows field"))?;
    let cols = read_u64(&mut r).map_err(|_| header_err("truncated cols field"))?;
    let dtype = read_u32(&mut r).map_err(|_| header_err("truncated dtype field"))?;
    if dtype != DTYPE_F64_LE {
        return Err(header_err(&format!("unsupported dtype tag {dtype}")));
    }
    if rows == 0 || cols == 0 {
        return Err(header_err(&format!(
            "zero dimension in header ({rows} x {cols})"
        )));
    }

    let count = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .and_then(|n| n.checked_mul(8).map(|_| n))
        .ok_or(Error::DimensionOverflow { rows, cols })?;

    let mut data = vec![0f64; count];
    let mut buf = [0u8; 8];
    for (i, slot) in data.iter_mut().enumerate() {
        r.read_exact(&mut buf).map_err(|_| {
            header_err(&format!(
                "payload truncated at element {i} of {count} declared by header"
            ))
        })?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                context: format!("{} element {i}", path.display()),
            });
        }
        *slot = v;
    }
    // The declared shape must account for the whole file.
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(header_err("trailing bytes beyond declared payload"));
    }
    Matrix::from_vec(rows as usize, cols as usize, data)
}

fn write_binary(m: &Matrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&BINARY_MAGIC).map_err(io)?;
    w.write_all(&BINARY_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(m.rows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.cols() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&DTYPE_F64_LE.to_le_bytes()).map_err(io)?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct RawCsv {
    header: Vec<String>,
    /// (1-based source line number, fields) — blank lines are skipped.
    rows: Vec<(usize, Vec<String>)>,
}

impl RawCsv {
    fn label_columns(&self) -> Vec<usize> {
        self.header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.as_str() == "label")
            .map(|(i, _)| i)
            .collect()
    }
}

fn parse_raw_csv(path: &Path, text: &str) -> Result<RawCsv> {
    let mut lines = text.lines().enumerate();
    let header_line = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "empty file".into(),
        })?;
    let header: Vec<String> = header_line
        .1
        .split(',')
        .map(|f| f.trim().to_string())
        .collect();
    if header.iter().any(String::is_empty) {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "empty column name in header".into(),
        });
    }

    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        if fields.len() != header.len() {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                row: i + 1,
                expected: header.len(),
                found: fields.len(),
            });
        }
        rows.push((i + 1, fields));
    }
    Ok(RawCsv { header, rows })
}

fn read_csv_matrix(path: &Path) -> Result<(Matrix, Option<LabelVector>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw = parse_raw_csv(path, &text)?;

    let label_cols = raw.label_columns();
    if label_cols.len() > 1 {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "multiple columns named `label`".into(),
        });
    }
    let label_col = label_cols.first().copied();
    let data_cols: Vec<usize> = (0..raw.header.len())
        .filter(|c| Some(*c) != label_col)
        .collect();
    if data_cols.is_empty() {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "no numeric columns (only a `label` column)".into(),
        });
    }
    if raw.rows.is_empty() {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "no data rows".into(),
        });
    }

    let mut data = Vec::with_capacity(raw.rows.len() * data_cols.len());
    let mut labels = label_col.map(|_| Vec::with_capacity(raw.rows.len()));
    for (line, fields) in &raw.rows {
        for &c in &data_cols {
            let field = fields[c].as_str();
            let v: f64 =
                field
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| Error::ParseFailure {
                        path: path.to_path_buf(),
                        line: *line,
                        detail: format!("`{field}` is not a number: {e}"),
                    })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("{} line {line} column {}", path.display(), c + 1),
                });
            }
            data.push(v);
        }
        if let (Some(ls), Some(c)) = (labels.as_mut(), label_col) {
            ls.push(parse_label(path, *line, &fields[c])?);
        }
    }
    let matrix = Matrix::from_vec(raw.rows.len(), data_cols.len(), data)?;
    Ok((matrix, labels.map(LabelVector::new)))
}

/// Format one value with 17 significant digits — the canonical text form
/// used by every CSV this crate writes. 17 digits round-trip any finite
/// `f64` exactly, so text output loses nothing.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(m: &Matrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<String> = (0..m.cols()).map(|c| format!("c{c}")).collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
