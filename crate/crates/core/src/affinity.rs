//! Affinity matrices: thresholded spherical-distance construction,
//! normalization, constraint imputation and file I/O.

use std::collections::BTreeSet;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;

use crate::active::CertainSets;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm};

/// Magic bytes opening the binary affinity format.
pub const BINARY_MAGIC: &[u8; 4] = b"SPAF";

/// Symmetric nonnegative `N x N` similarity matrix.
///
/// Pairs written by constraint imputation are tracked (as `(min, max)`
/// index pairs) so the imputed portion of the matrix can be audited.
#[derive(Debug, Clone)]
pub struct Affinity {
    values: Mat<f64>,
    imputed_one: BTreeSet<(usize, usize)>,
    imputed_zero: BTreeSet<(usize, usize)>,
}

impl Affinity {
    /// Wraps a matrix, validating it and symmetrizing by `(A + A^T) / 2`
    /// when needed.
    pub fn from_matrix(mut values: Mat<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::InvalidAffinityEntry {
                row: n,
                col: values.ncols(),
                reason: format!("matrix is {} x {}, not square", n, values.ncols()),
            });
        }
        // row-major scan so the first reported entry matches file order
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidAffinityEntry {
                        row: i,
                        col: j,
                        reason: format!("non-finite value {v}"),
                    });
                }
                if v < 0.0 {
                    return Err(Error::InvalidAffinityEntry {
                        row: i,
                        col: j,
                        reason: format!("negative value {v}"),
                    });
                }
            }
        }
        if !is_symmetric(&values) {
            log::warn!("affinity matrix is not symmetric; replacing with (A + A^T) / 2");
            symmetrize(&mut values);
        }
        Ok(Affinity {
            values,
            imputed_one: BTreeSet::new(),
            imputed_zero: BTreeSet::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> faer::MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn imputed_one(&self) -> &BTreeSet<(usize, usize)> {
        &self.imputed_one
    }

    pub fn imputed_zero(&self) -> &BTreeSet<(usize, usize)> {
        &self.imputed_zero
    }

    pub fn max_value(&self) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.values[(i, j)]);
            }
        }
        m
    }

    /// Rescales so the largest entry is exactly 2.
    pub fn normalize_max2(&self) -> Result<Affinity> {
        let max = self.max_value();
        if !(max > 0.0) {
            return Err(Error::ZeroAffinity);
        }
        let n = self.len();
        // v / max * 2 maps the maximum to exactly 2.0
        let values = Mat::from_fn(n, n, |i, j| self.values[(i, j)] / max * 2.0);
        Ok(Affinity {
            values,
            imputed_one: self.imputed_one.clone(),
            imputed_zero: self.imputed_zero.clone(),
        })
    }

    /// Writes 1 for every pair inside a certain set and 0 for every pair
    /// spanning two sets. Rows and columns of points outside all sets are
    /// left untouched.
    pub fn impute(&self, sets: &CertainSets) -> Result<Affinity> {
        let mut out = self.clone();
        out.impute_in_place(sets)?;
        Ok(out)
    }

    pub fn impute_in_place(&mut self, sets: &CertainSets) -> Result<()> {
        let n = self.len();
        let mut owner = vec![usize::MAX; n];
        for (s, members) in sets.sets().iter().enumerate() {
            for &p in members {
                if p >= n {
                    return Err(Error::InvalidArgument(format!(
                        "certain-set index {p} out of range for {n} points"
                    )));
                }
                if owner[p] != usize::MAX && owner[p] != s {
                    return Err(Error::OverlappingSets { index: p });
                }
                owner[p] = s;
            }
        }
        let members: Vec<usize> = (0..n).filter(|&p| owner[p] != usize::MAX).collect();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                self.set_pair(i, j, owner[i] == owner[j]);
            }
        }
        Ok(())
    }

    /// Imputes a single answered pair: 1 for must-link, 0 for cannot-link.
    pub fn impute_pair(&mut self, i: usize, j: usize, must_link: bool) {
        if i != j {
            self.set_pair(i, j, must_link);
        }
    }

    fn set_pair(&mut self, i: usize, j: usize, must_link: bool) {
        let key = (i.min(j), i.max(j));
        let v = if must_link { 1.0 } else { 0.0 };
        self.values[(i, j)] = v;
        self.values[(j, i)] = v;
        if must_link {
            self.imputed_zero.remove(&key);
            self.imputed_one.insert(key);
        } else {
            self.imputed_one.remove(&key);
            self.imputed_zero.insert(key);
        }
    }

    /// Copy of the matrix with a zero diagonal.
    pub fn without_diagonal(&self) -> Mat<f64> {
        let mut m = self.values.clone();
        for i in 0..self.len() {
            m[(i, i)] = 0.0;
        }
        m
    }

    /// Loads a CSV or `SPAF` binary matrix (detected by the magic bytes).
    pub fn load(path: impl AsRef<Path>) -> Result<Affinity> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(BINARY_MAGIC) {
            Affinity::from_matrix(decode_binary(&bytes, path)?)
        } else {
            Affinity::from_matrix(decode_csv(&bytes, path)?)
        }
    }

    /// Saves as CSV, or as `SPAF` binary when the extension is `.spaf`/`.bin`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let binary = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("spaf") | Some("bin")
        );
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let n = self.len();
        let result = if binary {
            (|| {
                w.write_all(BINARY_MAGIC)?;
                w.write_all(&(n as u64).to_le_bytes())?;
                for i in 0..n {
                    for j in 0..n {
                        w.write_all(&self.values[(i, j)].to_le_bytes())?;
                    }
                }
                w.flush()
            })()
        } else {
            (|| {
                for i in 0..n {
                    for j in 0..n {
                        if j > 0 {
                            w.write_all(b",")?;
                        }
                        // shortest representation that round-trips exactly
                        write!(w, "{:?}", self.values[(i, j)])?;
                    }
                    w.write_all(b"\n")?;
                }
                w.flush()
            })()
        };
        result.map_err(|e| Error::io(path, e))
    }
}

pub fn load_affinity(path: impl AsRef<Path>) -> Result<Affinity> {
    Affinity::load(path)
}

pub fn save_affinity(affinity: &Affinity, path: impl AsRef<Path>) -> Result<()> {
    affinity.save(path)
}

fn decode_binary(bytes: &[u8], path: &Path) -> Result<Mat<f64>> {
    let parse_err = |reason: String| Error::Parse {
        path: path.to_owned(),
        line: 0,
        reason,
    };
    let mut cursor = &bytes[BINARY_MAGIC.len()..];
    let mut len = [0u8; 8];
    cursor
        .read_exact(&mut len)
        .map_err(|_| parse_err("truncated header".into()))?;
    let n = u64::from_le_bytes(len) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| parse_err(format!("matrix size {n} overflows")))?;
    if cursor.len() != expected {
        return Err(parse_err(format!(
            "expected {expected} payload bytes for N = {n}, found {}",
            cursor.len()
        )));
    }
    let mut m = Mat::zeros(n, n);
    for (k, chunk) in cursor.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        m[(k / n, k % n)] = v;
    }
    Ok(m)
}

fn decode_csv(bytes: &[u8], path: &Path) -> Result<Mat<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: rows.len() + 1,
            reason: e.to_string(),
        })?;
        let row_index = rows.len();
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_nan() => Err(Error::InvalidAffinityEntry {
                    row: row_index,
                    col,
                    reason: "NaN".into(),
                }),
                Ok(v) => Ok(v),
                Err(_) => Err(Error::InvalidAffinityEntry {
                    row: row_index,
                    col,
                    reason: format!("'{cell}' is not a number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
        return Err(Error::InvalidAffinityEntry {
            row: r,
            col: row.len(),
            reason: format!("row has {} entries but the matrix has {n} rows", row.len()),
        });
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

fn is_symmetric(m: &Mat<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == m[(j, i)]))
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)]) / 2.0;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Default neighbor count `max(3, ceil(N / (5K)))`.
pub fn default_tsc_q(n: usize, k: usize) -> usize {
    3usize.max(n.div_ceil(5 * k.max(1)))
}

/// Directed thresholded-spherical-distance weights before symmetrization.
///
/// Row `i` keeps the `q` points with the largest `|cos|` to `x_i` (ties to
/// the lower index) with weight `exp(-2 arccos|cos|)`.
pub(crate) fn tsc_directed(data: &DataMatrix, q: usize) -> Result<Mat<f64>> {
    let n = data.len();
    if q >= n || q == 0 {
        return Err(Error::InvalidArgument(format!(
            "neighbor count q = {q} must satisfy 1 <= q < N = {n}"
        )));
    }
    let mut unit: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let x = data.point(i);
        let r = norm(x);
        if !(r > 0.0) {
            return Err(Error::ZeroNormPoint { index: i });
        }
        unit.push(x.iter().map(|v| v / r).collect());
    }
    let mut cos = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let c = dot(&unit[i], &unit[j]).abs().min(1.0);
            cos[(i, j)] = c;
            cos[(j, i)] = c;
        }
    }
    let mut directed = Mat::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| cos[(i, b)].total_cmp(&cos[(i, a)]).then(a.cmp(&b)));
        for &j in &order[..q] {
            directed[(i, j)] = (-2.0 * cos[(i, j)].acos()).exp();
        }
    }
    Ok(directed)
}

/// Thresholded spherical-distance affinity, symmetrized by `(A + A^T) / 2`.
pub fn build_tsc(data: &DataMatrix, q: usize) -> Result<Affinity> {
    let mut m = tsc_directed(data, q)?;
    symmetrize(&mut m);
    Affinity::from_matrix(m)
}
