//! Subspaces of `R^D`, PCA fitting and principal angles.
//!
//! A [`Subspace`] is stored as a `D x d` matrix with orthonormal columns.
//! Everything downstream (margins, certain-set ordering, the K-subspaces
//! cost, the theory harness) reduces to [`Subspace::residual`], the distance
//! `||x - U U^T x||_2` from a point to the subspace.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// Residuals at or below this fraction of `||x||` are reported as exactly zero.
const RESIDUAL_SNAP: f64 = 1e-12;

/// Orthonormality tolerance (max absolute deviation of `U^T U` from identity).
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Subspace {
    basis: Mat<f64>,
}

impl Subspace {
    /// Wraps a basis, checking that its columns are orthonormal.
    pub fn from_orthonormal(basis: Mat<f64>) -> Result<Self> {
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::InvalidArgument(format!(
                "basis must be D x d with 1 <= d <= D, got {} x {}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let deviation = orthonormality_deviation(basis.as_ref());
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (deviation {deviation:e})"
            )));
        }
        Ok(Subspace { basis })
    }

    /// Orthonormalizes the columns of `spanning` (thin QR) and wraps the result.
    ///
    /// The columns must be linearly independent.
    pub fn from_spanning(spanning: MatRef<'_, f64>) -> Result<Self> {
        let (ambient, dim) = (spanning.nrows(), spanning.ncols());
        if dim == 0 || dim > ambient {
            return Err(Error::InvalidArgument(format!(
                "spanning set must be D x d with 1 <= d <= D, got {ambient} x {dim}"
            )));
        }
        let qr = spanning.qr();
        let r = qr.R();
        let scale = (0..dim).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..dim).any(|i| r[(i, i)].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::DegenerateCluster(
                "spanning vectors are linearly dependent".into(),
            ));
        }
        let mut basis = qr.compute_thin_Q();
        // make the QR factor's diagonal positive so the basis is a
        // deterministic function of the spanning set
        for j in 0..dim {
            if r[(j, j)] < 0.0 {
                for i in 0..ambient {
                    basis[(i, j)] = -basis[(i, j)];
                }
            }
        }
        Ok(Subspace { basis })
    }

    /// Coordinate axes `e_i` for the given indices.
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Result<Self> {
        let mut basis = Mat::zeros(ambient_dim, axes.len());
        for (j, &axis) in axes.iter().enumerate() {
            if axis >= ambient_dim {
                return Err(Error::InvalidArgument(format!(
                    "axis {axis} out of range for dimension {ambient_dim}"
                )));
            }
            basis[(axis, j)] = 1.0;
        }
        Subspace::from_orthonormal(basis)
    }

    pub fn basis(&self) -> MatRef<'_, f64> {
        self.basis.as_ref()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Coefficients `U^T x`.
    pub fn coefficients(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.coefficients_unchecked(x))
    }

    fn coefficients_unchecked(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| dot(self.basis.col_as_slice(j), x))
            .collect()
    }

    /// Orthogonal projection `U U^T x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let coeffs = self.coefficients_unchecked(x);
        let mut out = vec![0.0; x.len()];
        for (j, c) in coeffs.iter().enumerate() {
            for (o, u) in out.iter_mut().zip(self.basis.col_as_slice(j)) {
                *o += c * u;
            }
        }
        Ok(out)
    }

    /// `||x - U U^T x||_2`.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.residual_unchecked(x))
    }

    pub(crate) fn residual_unchecked(&self, x: &[f64]) -> f64 {
        let coeffs = self.coefficients_unchecked(x);
        let mut diff = x.to_vec();
        for (j, c) in coeffs.iter().enumerate() {
            for (o, u) in diff.iter_mut().zip(self.basis.col_as_slice(j)) {
                *o -= c * u;
            }
        }
        let r = norm(&diff);
        if r <= RESIDUAL_SNAP * norm(x) {
            0.0
        } else {
            r
        }
    }

    /// Orthogonal projector `U U^T` as a dense `D x D` matrix.
    pub fn projector(&self) -> Mat<f64> {
        self.basis.as_ref() * self.basis.as_ref().transpose()
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Principal angles between two subspaces, ascending, in `[0, pi/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngleProfile {
    pub angles: Vec<f64>,
    /// Mean of `sin^2` over `angles`.
    pub avg_sin2: f64,
}

impl PrincipalAngleProfile {
    pub fn smallest(&self) -> f64 {
        self.angles[0]
    }

    pub fn largest(&self) -> f64 {
        *self.angles.last().expect("profile has at least one angle")
    }
}

/// Principal angles from the singular values of `U1^T U2`.
///
/// For subspaces of different dimension the `min(d1, d2)` angles are
/// returned and `avg_sin2` averages over those.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<PrincipalAngleProfile> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            got: b.ambient_dim(),
        });
    }
    let cross = a.basis().transpose() * b.basis();
    let cosines = cross
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let mut cosines: Vec<f64> = cosines.into_iter().map(|c| c.clamp(0.0, 1.0)).collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    let angles: Vec<f64> = cosines.iter().map(|c| c.acos()).collect();
    let avg_sin2 = cosines.iter().map(|c| 1.0 - c * c).sum::<f64>() / cosines.len() as f64;
    Ok(PrincipalAngleProfile { angles, avg_sin2 })
}

/// Fits a subspace to the columns of `points` by SVD.
///
/// Returns the top `min(d, rank)` left singular vectors; a rank-deficient
/// cluster silently yields a lower-dimensional subspace. Each singular vector
/// is signed so that its largest-magnitude entry is positive.
pub fn fit_pca(points: MatRef<'_, f64>, d: usize) -> Result<Subspace> {
    if points.ncols() == 0 {
        return Err(Error::DegenerateCluster("no points to fit".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("subspace dimension must be positive".into()));
    }
    let (ambient, n) = (points.nrows(), points.ncols());
    let svd = points
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let sv = svd.S().column_vector();
    let top = sv[0];
    if !(top > 0.0) {
        return Err(Error::DegenerateCluster("all points are zero".into()));
    }
    let tol = ambient.max(n) as f64 * f64::EPSILON * top;
    let rank = (0..sv.nrows()).take_while(|&i| sv[i] > tol).count();
    let keep = d.min(rank);
    let u = svd.U();
    let mut basis = Mat::zeros(ambient, keep);
    for j in 0..keep {
        let col = u.col(j);
        let mut pivot = 0;
        for i in 1..ambient {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..ambient {
            basis[(i, j)] = sign * col[i];
        }
    }
    Ok(Subspace { basis })
}

/// Fits a subspace to the columns of `data` selected by `indices`.
pub fn fit_pca_indices(data: MatRef<'_, f64>, indices: &[usize], d: usize) -> Result<Subspace> {
    let gathered = Mat::from_fn(data.nrows(), indices.len(), |i, j| data[(i, indices[j])]);
    fit_pca(gathered.as_ref(), d)
}

/// Max absolute entry of `U^T U - I`.
pub fn orthonormality_deviation(basis: MatRef<'_, f64>) -> f64 {
    let gram = basis.transpose() * basis;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
