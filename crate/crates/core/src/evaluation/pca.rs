use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Column means removed before projecting.
    pub mean: Vec<f64>,
    /// `K×k`, orthonormal columns ordered by decreasing variance.
    pub components: DMatrix<f64>,
    /// `n×k`
    pub projected: DMatrix<f64>,
    /// Share of total variance per component; non-increasing.
    pub explained_ratio: Vec<f64>,
}

/// Top-`k` principal components of the rows of `features` (`n×K`) from a
/// full symmetric eigendecomposition of the covariance.
///
/// Each component's sign is fixed so its largest-magnitude entry is positive.
pub fn pca_project(features: &DMatrix<f64>, k: usize) -> Result<PcaResult> {
    let (n, dim) = features.shape();
    if k == 0 || k > dim || n == 0 {
        return Err(Error::Shape(format!("cannot take {k} components of {n}×{dim} features")));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("features must be finite".into()));
    }
    let mean: Vec<f64> = (0..dim).map(|j| features.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, dim, |i, j| features[(i, j)] - mean[j]);
    let cov = (centered.transpose() * &centered) / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();

    let mut components = DMatrix::zeros(dim, k);
    let mut explained_ratio = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v = -v;
        }
        components.set_column(c, &v);
        let l = eig.eigenvalues[idx].max(0.0);
        explained_ratio.push(if total > 0.0 { l / total } else { 0.0 });
    }
    let projected = &centered * &components;
    Ok(PcaResult {
        mean,
        components,
        projected,
        explained_ratio,
    })
}
