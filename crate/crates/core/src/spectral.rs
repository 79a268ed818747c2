//! Covariance estimation and the symmetric eigendecomposition that every
//! downstream quantity is computed in.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a covariance is treated as singular.
pub const RANK_EPS: f64 = 1e-10;

/// Observational samples: `x` is n×d (rows are samples), `y` has length n.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::with_names(x, y, None)
    }

    pub fn with_names(
        x: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidData(
                "need at least one predictor column".into(),
            ));
        }
        if y.len() != n {
            return Err(Error::BadDimensions(format!(
                "x has {n} rows but y has {} entries",
                y.len()
            )));
        }
        if let Some(names) = &column_names {
            if names.len() != d {
                return Err(Error::BadDimensions(format!(
                    "{} column names for {d} predictor columns",
                    names.len()
                )));
            }
        }
        if let Some(idx) = x.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::InvalidData(format!(
                "non-finite predictor value at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite target value at row {row}"
            )));
        }
        Ok(Self { x, y, column_names })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Same samples with every predictor multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_names(&self.x * c, self.y.clone(), self.column_names.clone())
    }

    /// Same samples with predictors mapped through `u`: each row x becomes U·x.
    pub fn rotated(&self, u: &DMatrix<f64>) -> Result<Self> {
        if u.nrows() != self.d() || u.ncols() != self.d() {
            return Err(Error::BadDimensions("rotation must be d×d".into()));
        }
        Self::new(&self.x * u.transpose(), self.y.clone())
    }
}

/// Second-order statistics of (X, Y) together with the eigendecomposition of
/// Σ_XX. Eigenvalues are sorted in descending order and are all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    sigma_xx: DMatrix<f64>,
    sigma_xy: DVector<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    n: usize,
}

impl CovarianceModel {
    /// Builds the model from a covariance matrix. The matrix is symmetrized
    /// before decomposition. `n` is the sample count (0 for analytic models).
    pub fn from_sigma(sigma_xx: DMatrix<f64>, sigma_xy: DVector<f64>, n: usize) -> Result<Self> {
        let d = sigma_xx.nrows();
        if d == 0 || sigma_xx.ncols() != d {
            return Err(Error::BadDimensions(format!(
                "covariance must be square and non-empty, got {}×{}",
                sigma_xx.nrows(),
                sigma_xx.ncols()
            )));
        }
        if sigma_xy.len() != d {
            return Err(Error::BadDimensions(format!(
                "cross-covariance has length {} for dimension {d}",
                sigma_xy.len()
            )));
        }
        if sigma_xx
            .iter()
            .chain(sigma_xy.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NumericOverflow("non-finite covariance entry".into()));
        }
        let sym = (&sigma_xx + sigma_xx.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        check_rank(&eigenvalues)?;

        Ok(Self {
            sigma_xx: sym,
            sigma_xy,
            eigenvalues,
            eigenvectors,
            n,
        })
    }

    /// Builds Σ_XX = V·diag(λ)·Vᵀ from a prescribed spectrum and orthogonal
    /// eigenvector matrix.
    pub fn from_spectrum(
        eigenvalues: &[f64],
        eigenvectors: DMatrix<f64>,
        sigma_xy: DVector<f64>,
    ) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 || eigenvectors.shape() != (d, d) || sigma_xy.len() != d {
            return Err(Error::BadDimensions(
                "spectrum, eigenvectors and cross-covariance disagree".into(),
            ));
        }
        let gram = eigenvectors.transpose() * &eigenvectors;
        if (gram - DMatrix::identity(d, d)).amax() > 1e-10 {
            return Err(Error::InvalidArgument(
                "eigenvector matrix is not orthogonal".into(),
            ));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eigenvalues[j].total_cmp(&eigenvalues[i]));
        let vals = DVector::from_iterator(d, order.iter().map(|&i| eigenvalues[i]));
        let vecs = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        check_rank(&vals)?;
        let sigma = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        let sigma_xx = (&sigma + sigma.transpose()) * 0.5;
        Ok(Self {
            sigma_xx,
            sigma_xy,
            eigenvalues: vals,
            eigenvectors: vecs,
            n: 0,
        })
    }

    /// Diagonal Σ_XX with the given entries (eigenvectors are the coordinate axes).
    pub fn diagonal(entries: &[f64], sigma_xy: DVector<f64>) -> Result<Self> {
        let d = entries.len();
        if d == 0 || sigma_xy.len() != d {
            return Err(Error::BadDimensions(
                "spectrum and cross-covariance disagree".into(),
            ));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| entries[j].total_cmp(&entries[i]));
        let vals = DVector::from_iterator(d, order.iter().map(|&i| entries[i]));
        check_rank(&vals)?;
        let mut vecs = DMatrix::zeros(d, d);
        for (k, &i) in order.iter().enumerate() {
            vecs[(i, k)] = 1.0;
        }
        Ok(Self {
            sigma_xx: DMatrix::from_diagonal(&DVector::from_column_slice(entries)),
            sigma_xy,
            eigenvalues: vals,
            eigenvectors: vecs,
            n: 0,
        })
    }

    /// Same Σ_XX and decomposition with a different cross-covariance.
    pub fn with_sigma_xy(&self, sigma_xy: DVector<f64>) -> Result<Self> {
        if sigma_xy.len() != self.d() {
            return Err(Error::BadDimensions(
                "cross-covariance length mismatch".into(),
            ));
        }
        Ok(Self {
            sigma_xy,
            ..self.clone()
        })
    }

    pub fn sigma_xx(&self) -> &DMatrix<f64> {
        &self.sigma_xx
    }

    pub fn sigma_xy(&self) -> &DVector<f64> {
        &self.sigma_xy
    }

    /// Eigenvalues λ_1 ≥ … ≥ λ_d > 0.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthogonal matrix whose columns pair with [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn median_eigenvalue(&self) -> f64 {
        let d = self.d();
        let mut v: Vec<f64> = self.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        if d % 2 == 1 {
            v[d / 2]
        } else {
            0.5 * (v[d / 2 - 1] + v[d / 2])
        }
    }

    /// Coordinates of `v` in the eigenbasis, Vᵀv.
    pub fn to_eigenbasis(&self, v: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(v)
    }

    pub fn from_eigenbasis(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.eigenvectors * w
    }

    /// Applies f(Σ_XX) to `v` through the spectrum.
    pub fn apply_spectral<F: Fn(f64) -> f64>(&self, f: F, v: &DVector<f64>) -> DVector<f64> {
        let mut w = self.to_eigenbasis(v);
        for (wj, &lam) in w.iter_mut().zip(self.eigenvalues.iter()) {
            *wj *= f(lam);
        }
        self.from_eigenbasis(&w)
    }

    /// τ(Σ_XX⁻¹).
    pub fn tau_inverse(&self) -> f64 {
        self.eigenvalues.iter().map(|l| 1.0 / l).sum::<f64>() / self.d() as f64
    }

    /// Relative Frobenius error of V·Λ·Vᵀ against Σ_XX.
    pub fn reconstruction_error(&self) -> f64 {
        let rebuilt = &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose();
        (rebuilt - &self.sigma_xx).norm() / self.sigma_xx.norm()
    }
}

fn check_rank(eigenvalues: &DVector<f64>) -> Result<()> {
    let max = eigenvalues[0];
    let min = eigenvalues[eigenvalues.len() - 1];
    if !(max > 0.0) || min <= RANK_EPS * max {
        return Err(Error::RankDeficient {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok(())
}

/// Unit vector, optionally carrying its coordinates in the eigenbasis of the
/// covariance it was built against.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDirection {
    v: DVector<f64>,
    basis_coords: Option<DVector<f64>>,
}

impl UnitDirection {
    /// Normalizes `v` without attaching eigenbasis coordinates.
    pub fn new(v: DVector<f64>) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() {
            return Err(Error::NumericOverflow(
                "direction has non-finite norm".into(),
            ));
        }
        if norm == 0.0 {
            return Err(Error::ZeroSignal);
        }
        Ok(Self {
            v: v / norm,
            basis_coords: None,
        })
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn basis_coords(&self) -> Option<&DVector<f64>> {
        self.basis_coords.as_ref()
    }

    pub fn d(&self) -> usize {
        self.v.len()
    }

    /// Eigenbasis coordinates with respect to `cov`. Uses the cache when one
    /// is present; the cache is assumed to belong to `cov`.
    pub fn coords<'a>(&'a self, cov: &CovarianceModel) -> Cow<'a, DVector<f64>> {
        match &self.basis_coords {
            Some(w) => Cow::Borrowed(w),
            None => Cow::Owned(cov.to_eigenbasis(&self.v)),
        }
    }
}

/// Σ_XX = XcᵀXc/n and Σ_XY = Xcᵀyc/n on column-centered data.
pub fn empirical_covariance(data: &DataMatrix) -> Result<CovarianceModel> {
    let (n, d) = (data.n(), data.d());
    if n <= d {
        return Err(Error::TooFewSamples { n, d });
    }
    let (xc, yc) = centered(data);
    let inv_n = 1.0 / n as f64;
    let sigma_xx = xc.tr_mul(&xc) * inv_n;
    let sigma_xy = xc.tr_mul(&yc) * inv_n;
    CovarianceModel::from_sigma(sigma_xx, sigma_xy, n)
}

/// Column-mean-centered copies of X and y.
pub fn centered(data: &DataMatrix) -> (DMatrix<f64>, DVector<f64>) {
    let mut xc = data.x().clone();
    for mut col in xc.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let y = data.y();
    let yc = y.add_scalar(-y.mean());
    (xc, yc)
}

/// a′ = Σ_XX⁻¹ Σ_XY through the eigendecomposition.
pub fn regression_vector(cov: &CovarianceModel) -> Result<DVector<f64>> {
    if cov.sigma_xy().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroSignal);
    }
    let a = cov.apply_spectral(|l| 1.0 / l, cov.sigma_xy());
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow(
            "regression vector is not finite".into(),
        ));
    }
    Ok(a)
}

/// v/‖v‖ with eigenbasis coordinates cached against `cov`.
pub fn unit_direction(v: &DVector<f64>, cov: &CovarianceModel) -> Result<UnitDirection> {
    if v.len() != cov.d() {
        return Err(Error::BadDimensions(format!(
            "direction has length {} for dimension {}",
            v.len(),
            cov.d()
        )));
    }
    let mut dir = UnitDirection::new(v.clone())?;
    dir.basis_coords = Some(cov.to_eigenbasis(&dir.v));
    Ok(dir)
}

/// τ(f(Σ_XX)) = (1/d)·Σ_j f(λ_j).
pub fn renormalized_trace<F: Fn(f64) -> f64>(f: F, cov: &CovarianceModel) -> Result<f64> {
    let total: f64 = cov.eigenvalues().iter().map(|&l| f(l)).sum();
    let value = total / cov.d() as f64;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericOverflow(
            "renormalized trace is not finite".into(),
        ))
    }
}
