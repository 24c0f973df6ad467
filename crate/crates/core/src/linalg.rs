//! Singular value decompositions, computed with faer.

use faer::Mat;
use nalgebra::DMatrix;

/// `m = u diag(s) v'`, singular values non-increasing.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn to_nalgebra(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin decomposition: `u` is `m x r`, `v` is `n x r`, `r = min(m, n)`.
///
/// Panics if the input is not finite.
pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Svd {
    assert!(m.iter().all(|x| x.is_finite()), "SVD input must be finite");
    let svd = to_faer(m).thin_svd().expect("SVD of a finite matrix converges");
    let s = svd.S().column_vector();
    Svd {
        u: to_nalgebra(svd.U()),
        singular_values: (0..s.nrows()).map(|i| s[i]).collect(),
        v: to_nalgebra(svd.V()),
    }
}

/// Singular values and the full `n x n` right basis.
pub(crate) fn right_singular_basis(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    assert!(m.iter().all(|x| x.is_finite()), "SVD input must be finite");
    let svd = to_faer(m).svd().expect("SVD of a finite matrix converges");
    let s = svd.S().column_vector();
    ((0..s.nrows()).map(|i| s[i]).collect(), to_nalgebra(svd.V()))
}
