//! Minimal dense f64 arrays: row-major storage, matmul, transpose,
//! reductions, elementwise maps, and the binary interchange format.
//!
//! Deliberately small: no broadcasting beyond scalar-with-array, no views.
//! Summation order in reductions and matmul is fixed left-to-right so a
//! given run configuration is bit-reproducible.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Identity matrix of size n.
    pub fn eye(n: usize) -> Self {
        let mut m = Self::zeros(vec![n, n]);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let f = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != f) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(vec![n, f], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Number of rows when viewed as a matrix (first axis).
    pub fn nrows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of columns when viewed as a matrix (second axis).
    pub fn ncols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(0)
    }

    fn require_2d(&self, what: &str) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(Error::Shape(format!(
                "{what} requires a 2-d array, got shape {:?}",
                self.shape
            )));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.shape[1] + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let f = self.shape[self.shape.len() - 1];
        &self.data[i * f..(i + 1) * f]
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    /// Standard matrix product with fixed left-to-right accumulation.
    pub fn matmul(&self, other: &DenseArray) -> Result<DenseArray> {
        let (n, k) = self.require_2d("matmul lhs")?;
        let (k2, m) = other.require_2d("matmul rhs")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions disagree: {n}x{k} vs {k2}x{m}"
            )));
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let mut acc = 0.0;
                for (p, &a) in a_row.iter().enumerate() {
                    acc += a * other.data[p * m + j];
                }
                out[i * m + j] = acc;
            }
        }
        DenseArray::new(vec![n, m], out)
    }

    pub fn transpose(&self) -> Result<DenseArray> {
        let (n, m) = self.require_2d("transpose")?;
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = self.data[i * m + j];
            }
        }
        DenseArray::new(vec![m, n], out)
    }

    /// Per-row Euclidean norm over the last axis; any leading axes are
    /// flattened into rows.
    pub fn row_norms(&self) -> DenseArray {
        let f = self.shape.last().copied().unwrap_or(0);
        if f == 0 {
            return DenseArray::zeros(vec![0]);
        }
        let n = self.data.len() / f;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            for &v in &self.data[i * f..(i + 1) * f] {
                acc += v * v;
            }
            out.push(acc.sqrt());
        }
        DenseArray {
            shape: vec![n],
            data: out,
        }
    }

    /// Shape-preserving elementwise application.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseArray {
        DenseArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise map that demands finite outputs.
    pub fn try_map(&self, f: impl Fn(f64) -> f64) -> Result<DenseArray> {
        let out = self.map(f);
        if !out.is_finite() {
            return Err(Error::NonFinite("elementwise map produced NaN/Inf".into()));
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> DenseArray {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &DenseArray) -> Result<DenseArray> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "add: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseArray {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &DenseArray) -> Result<DenseArray> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "sub: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseArray {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mean over the first axis of a 2-d array, yielding a length-F vector.
    pub fn mean_rows(&self) -> Result<DenseArray> {
        let (n, f) = self.require_2d("mean_rows")?;
        if n == 0 {
            return Err(Error::Shape("mean_rows over zero rows".into()));
        }
        let mut out = vec![0.0; f];
        for i in 0..n {
            for j in 0..f {
                out[j] += self.data[i * f + j];
            }
        }
        for v in &mut out {
            *v /= n as f64;
        }
        DenseArray::new(vec![f], out)
    }

    // ---- binary interchange format --------------------------------------
    //
    // One UTF-8 JSON header line `{"shape":[...],"dtype":"f64"}`, a newline,
    // then the raw little-endian f64 payload.

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = BinHeader {
            shape: self.shape.clone(),
            dtype: "f64".into(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<DenseArray> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: BinHeader = serde_json::from_str(line.trim_end())?;
        if header.dtype != "f64" {
            return Err(Error::Format(format!(
                "unsupported dtype {:?}",
                header.dtype
            )));
        }
        let n: usize = header.shape.iter().product();
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DenseArray::new(header.shape, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<DenseArray> {
        let f = std::fs::File::open(path)?;
        Self::read_from(f)
    }
}

#[derive(Serialize, Deserialize)]
struct BinHeader {
    shape: Vec<usize>,
    dtype: String,
}

// JSON form used by parameter bundles: {"shape":[...],"data_b64":"..."}
// where data_b64 is the little-endian f64 payload, base64 (standard
// alphabet, padded).
#[derive(Serialize, Deserialize)]
struct JsonArray {
    shape: Vec<usize>,
    data_b64: String,
}

impl Serialize for DenseArray {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use base64::Engine;
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        JsonArray {
            shape: self.shape.clone(),
            data_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseArray {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use base64::Engine;
        use serde::de::Error as DeError;
        let raw = JsonArray::deserialize(d)?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(raw.data_b64)
            .map_err(DeError::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(DeError::custom("payload length not a multiple of 8"));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DenseArray::new(raw.shape, data).map_err(DeError::custom)
    }
}

/// Dot product with fixed accumulation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solve A x = b for square A by Gaussian elimination with partial pivoting.
/// A and b are consumed as flat row-major buffers; b may hold multiple
/// right-hand sides (n x m).
pub fn solve(a: &DenseArray, b: &DenseArray) -> Result<DenseArray> {
    let n = a.nrows();
    if a.ndim() != 2 || a.ncols() != n {
        return Err(Error::Shape("solve requires a square matrix".into()));
    }
    let m = if b.ndim() == 1 { 1 } else { b.ncols() };
    if b.nrows() != n {
        return Err(Error::Shape("solve rhs row count mismatch".into()));
    }
    let mut lu = a.data().to_vec();
    let mut x = b.data().to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = lu[col * n + col].abs();
        for r in col + 1..n {
            let v = lu[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-300 {
            return Err(Error::Conditioning("singular matrix in solve".into()));
        }
        if piv != col {
            for j in 0..n {
                lu.swap(col * n + j, piv * n + j);
            }
            for j in 0..m {
                x.swap(col * m + j, piv * m + j);
            }
        }
        let d = lu[col * n + col];
        for r in col + 1..n {
            let factor = lu[r * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                lu[r * n + j] -= factor * lu[col * n + j];
            }
            for j in 0..m {
                x[r * m + j] -= factor * x[col * m + j];
            }
        }
    }
    for col in (0..n).rev() {
        let d = lu[col * n + col];
        for j in 0..m {
            let mut acc = x[col * m + j];
            for p in col + 1..n {
                acc -= lu[col * n + p] * x[p * m + j];
            }
            x[col * m + j] = acc / d;
        }
    }
    DenseArray::new(b.shape().to_vec(), x)
}
