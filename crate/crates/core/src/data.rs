//! Datasets: the [`DataMatrix`] container, synthetic union-of-subspaces
//! generation, CSV/manifest loading and the named dataset presets.

use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, Subspace};
use crate::rng::{gaussian_matrix, gaussian_vec, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl ImageMeta {
    pub fn pixels(&self) -> usize {
        self.width * self.height * self.channels
    }
}

/// `N` points in `R^D`, stored as the columns of a `D x N` matrix.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    points: Mat<f64>,
    truth: Option<Vec<usize>>,
    image_meta: Option<ImageMeta>,
    name: String,
}

impl DataMatrix {
    pub fn new(points: Mat<f64>, name: impl Into<String>) -> Result<Self> {
        for j in 0..points.ncols() {
            if let Some(i) = points.col_as_slice(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coordinate {i} in point {j}"
                )));
            }
        }
        Ok(DataMatrix {
            points,
            truth: None,
            image_meta: None,
            name: name.into(),
        })
    }

    /// Builds a data matrix from row-major samples (one `Vec` per point).
    pub fn from_rows(rows: &[Vec<f64>], name: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: rows[bad].len(),
            });
        }
        DataMatrix::new(Mat::from_fn(dim, rows.len(), |i, j| rows[j][i]), name)
    }

    pub fn with_truth(mut self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: truth.len(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn with_image_meta(mut self, meta: ImageMeta) -> Result<Self> {
        if meta.pixels() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: meta.pixels(),
            });
        }
        self.image_meta = Some(meta);
        Ok(self)
    }

    pub fn points(&self) -> faer::MatRef<'_, f64> {
        self.points.as_ref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.col_as_slice(i)
    }

    /// Number of points `N`.
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ambient dimension `D`.
    pub fn ambient_dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    pub fn image_meta(&self) -> Option<ImageMeta> {
        self.image_meta
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Scales every nonzero point to unit Euclidean norm.
    pub fn normalize_columns(&mut self) {
        for j in 0..self.len() {
            let col = self.points.col_as_slice_mut(j);
            let n = norm(col);
            if n > 0.0 {
                col.iter_mut().for_each(|v| *v /= n);
            }
        }
    }
}

/// Requested principal-angle structure for generated subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleControl {
    /// Smallest principal angle to the first subspace, radians.
    pub phi1: f64,
    /// Mean of `sin^2` over the principal angles to the first subspace.
    pub avg_sin2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub d: usize,
    pub ambient_dim: usize,
    pub points_per_cluster: usize,
    /// Per-coordinate noise standard deviation.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub min_angle_control: Option<AngleControl>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.points_per_cluster == 0 {
            return Err(Error::InvalidArgument(
                "need at least one cluster and one point per cluster".into(),
            ));
        }
        if self.d == 0 || self.d >= self.ambient_dim {
            return Err(Error::InvalidArgument(format!(
                "subspace dimension {} must satisfy 1 <= d < D = {}",
                self.d, self.ambient_dim
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid sigma {}", self.sigma)));
        }
        Ok(())
    }
}

/// Random `dim`-dimensional subspace with a Gaussian-then-orthonormalized basis.
pub fn random_subspace(rng: &mut impl rand::Rng, ambient: usize, dim: usize) -> Result<Subspace> {
    let g = gaussian_matrix(rng, ambient, dim, 1.0);
    Subspace::from_spanning(g.as_ref())
}

/// `count` subspaces where every subspace after the first has smallest
/// principal angle `phi1` and mean `sin^2` equal to `avg_sin2` relative to
/// the first.
///
/// With `U1 = [u_1..u_d]` and mutually orthogonal complement directions
/// `v_i`, the companion basis is `cos(t_i) u_i + sin(t_i) v_i`, whose
/// principal angles to `U1` are exactly `t_i`. `t_1 = phi1` and the other
/// `d - 1` angles share the value that hits the `sin^2` target.
pub fn controlled_subspaces(
    rng: &mut impl rand::Rng,
    ambient: usize,
    dim: usize,
    count: usize,
    control: AngleControl,
) -> Result<Vec<Subspace>> {
    let rest = companion_sin2(dim, control)?;
    if count < 1 {
        return Err(Error::InvalidArgument("need at least one subspace".into()));
    }
    if ambient < dim * count.max(2) {
        return Err(Error::InfeasibleAngles(format!(
            "need D >= d * max(K, 2) = {}, got D = {ambient}",
            dim * count.max(2)
        )));
    }
    let frame = random_subspace(rng, ambient, dim * count.max(2))?;
    let frame = frame.basis();
    let base = Mat::from_fn(ambient, dim, |i, j| frame[(i, j)]);
    let mut out = vec![Subspace::from_orthonormal(base)?];
    let angles: Vec<f64> = (0..dim)
        .map(|i| if i == 0 { control.phi1 } else { rest.sqrt().asin() })
        .collect();
    for m in 1..count {
        let basis = Mat::from_fn(ambient, dim, |i, j| {
            angles[j].cos() * frame[(i, j)] + angles[j].sin() * frame[(i, m * dim + j)]
        });
        out.push(Subspace::from_orthonormal(basis)?);
    }
    Ok(out)
}

/// `sin^2` of the non-smallest angles needed to reach the `avg_sin2` target.
pub(crate) fn companion_sin2(dim: usize, control: AngleControl) -> Result<f64> {
    let AngleControl { phi1, avg_sin2 } = control;
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&phi1) {
        return Err(Error::InfeasibleAngles(format!("phi1 = {phi1} outside [0, pi/2]")));
    }
    let s1 = phi1.sin().powi(2);
    if avg_sin2 + 1e-15 < s1 {
        return Err(Error::InfeasibleAngles(format!(
            "avg_sin2 = {avg_sin2} is below sin^2(phi1) = {s1}"
        )));
    }
    if dim == 1 {
        if (avg_sin2 - s1).abs() > 1e-12 {
            return Err(Error::InfeasibleAngles(
                "with d = 1 avg_sin2 must equal sin^2(phi1)".into(),
            ));
        }
        return Ok(s1);
    }
    let rest = (dim as f64 * avg_sin2 - s1) / (dim as f64 - 1.0);
    if rest > 1.0 + 1e-15 {
        return Err(Error::InfeasibleAngles(format!(
            "avg_sin2 = {avg_sin2} unreachable with phi1 = {phi1} and d = {dim}"
        )));
    }
    Ok(rest.clamp(s1, 1.0))
}

/// Samples points `U_k w + n` with `w ~ N(0, I_d / d)` and `n ~ N(0, sigma^2 I_D)`.
///
/// Points are stored cluster by cluster; `truth[i]` is the generating
/// subspace index.
pub fn generate_uos(spec: &SyntheticSpec) -> Result<DataMatrix> {
    Ok(generate_uos_with_subspaces(spec)?.0)
}

/// Like [`generate_uos`], also returning the generating subspaces.
pub fn generate_uos_with_subspaces(spec: &SyntheticSpec) -> Result<(DataMatrix, Vec<Subspace>)> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let subspaces = match spec.min_angle_control {
        Some(control) => {
            controlled_subspaces(&mut rng, spec.ambient_dim, spec.d, spec.k, control)?
        }
        None => (0..spec.k)
            .map(|_| random_subspace(&mut rng, spec.ambient_dim, spec.d))
            .collect::<Result<_>>()?,
    };
    let n = spec.k * spec.points_per_cluster;
    let mut points = Mat::zeros(spec.ambient_dim, n);
    let mut truth = Vec::with_capacity(n);
    let w_std = (1.0 / spec.d as f64).sqrt();
    for (k, s) in subspaces.iter().enumerate() {
        for p in 0..spec.points_per_cluster {
            let col = k * spec.points_per_cluster + p;
            let w = gaussian_vec(&mut rng, spec.d, w_std);
            let noise = gaussian_vec(&mut rng, spec.ambient_dim, spec.sigma);
            let basis = s.basis();
            for i in 0..spec.ambient_dim {
                let signal: f64 = (0..spec.d).map(|j| basis[(i, j)] * w[j]).sum();
                points[(i, col)] = signal + noise[i];
            }
            truth.push(k);
        }
    }
    let name = format!(
        "synthetic-K{}-d{}-D{}-n{}",
        spec.k, spec.d, spec.ambient_dim, spec.points_per_cluster
    );
    let data = DataMatrix::new(points, name)?.with_truth(truth)?;
    Ok((data, subspaces))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Scale each sample to unit norm after loading.
    pub normalize: bool,
}

/// Loads a rectangular numeric CSV whose rows are samples.
pub fn load_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<DataMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_owned(),
                        line,
                        reason: format!("column {}: '{cell}' is not a finite number", c + 1),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line,
                    reason: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            reason: "no samples".into(),
        });
    }
    let name = path
        .file_stem()
        .map_or_else(|| "data".to_owned(), |s| s.to_string_lossy().into_owned());
    let mut data = DataMatrix::from_rows(&rows, name)?;
    if options.normalize {
        data.normalize_columns();
    }
    Ok(data)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_owned(),
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Reads one nonnegative integer label per line (blank lines skipped).
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, path)
}

pub(crate) fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value = line.parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            reason: format!("'{line}' is not a nonnegative integer label"),
        })?;
        labels.push(value);
    }
    Ok(labels)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(labels.len() * 3);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// On-disk description of a dataset: CSV samples plus optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub data_path: PathBuf,
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
    #[serde(default)]
    pub image_meta: Option<ImageMeta>,
    #[serde(default)]
    pub normalize: bool,
}

impl DatasetManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        manifest.data_path = base.join(&manifest.data_path);
        manifest.labels_path = manifest.labels_path.map(|p| base.join(p));
        Ok(manifest)
    }

    pub fn load(&self) -> Result<DataMatrix> {
        let mut data = load_csv(
            &self.data_path,
            CsvOptions {
                normalize: self.normalize,
            },
        )?;
        data.name = self.name.clone();
        if let Some(labels) = &self.labels_path {
            data = data.with_truth(load_labels(labels)?)?;
        }
        if let Some(meta) = self.image_meta {
            data = data.with_image_meta(meta)?;
        }
        Ok(data)
    }
}

/// Dataset parameterization for the benchmark collections.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    /// Smallest and largest sample counts used.
    pub n_range: (usize, usize),
    pub k_values: &'static [usize],
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    /// Alternate subspace dimension where sources disagree.
    pub alt_subspace_dim: Option<usize>,
}

pub const PRESET_NAMES: [&str; 6] = ["yale", "mnist", "coil20", "coil100", "usps", "synthetic-small"];

impl Preset {
    pub fn k(&self) -> usize {
        self.k_values[0]
    }

    pub fn d(&self) -> usize {
        self.subspace_dim
    }

    /// Synthetic generator settings, for presets that describe synthetic data.
    pub fn synthetic_spec(&self, seed: u64) -> Option<SyntheticSpec> {
        (self.name == "synthetic-small").then(|| SyntheticSpec {
            k: 3,
            d: 2,
            ambient_dim: 30,
            points_per_cluster: 50,
            sigma: 0.01,
            seed,
            min_angle_control: None,
        })
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "yale" => Preset {
            name: "yale",
            n_range: (320, 2432),
            k_values: &[5, 10, 38],
            ambient_dim: 2016,
            subspace_dim: 9,
            alt_subspace_dim: None,
        },
        "mnist" => Preset {
            name: "mnist",
            n_range: (500, 1000),
            k_values: &[5, 10],
            ambient_dim: 784,
            subspace_dim: 3,
            alt_subspace_dim: None,
        },
        "coil20" => Preset {
            name: "coil20",
            n_range: (1440, 1440),
            k_values: &[20],
            ambient_dim: 1024,
            subspace_dim: 9,
            alt_subspace_dim: None,
        },
        "coil100" => Preset {
            name: "coil100",
            n_range: (7200, 7200),
            k_values: &[100],
            ambient_dim: 1024,
            subspace_dim: 9,
            alt_subspace_dim: None,
        },
        "usps" => Preset {
            name: "usps",
            n_range: (9298, 9298),
            k_values: &[10],
            ambient_dim: 256,
            subspace_dim: 15,
            alt_subspace_dim: Some(9),
        },
        "synthetic-small" => Preset {
            name: "synthetic-small",
            n_range: (150, 150),
            k_values: &[3],
            ambient_dim: 30,
            subspace_dim: 2,
            alt_subspace_dim: None,
        },
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_owned(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(p)
}
