//! Small shared numeric helpers.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (denominator n).
pub fn variance_pop(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

/// Sample variance (denominator n - 1).
pub fn variance_sample(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Deterministic RNG from a master seed and a stream index, so parallel
/// workers draw identical values regardless of schedule.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Least-squares solution of `X b = y` via SVD, erroring when `X` is
/// numerically rank-deficient.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * 1e-10 * x.nrows().max(x.ncols()) as f64;
    if max_sv == 0.0 || svd.singular_values.min() <= tol {
        return Err(Error::RankDeficient(format!(
            "{}x{} design matrix (min/max singular value {:.3e}/{:.3e})",
            x.nrows(),
            x.ncols(),
            svd.singular_values.min(),
            max_sv
        )));
    }
    svd.solve(y, tol)
        .map_err(|e| Error::RankDeficient(e.to_string()))
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// descending and eigenvectors as matching columns.
pub fn sym_eigen_desc(matrix: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eigen = nalgebra::SymmetricEigen::new(matrix);
    let n = eigen.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eigen.eigenvectors.column(src));
    }
    (values, vectors)
}

/// FNV-1a hash, used to stamp outputs with a configuration fingerprint.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
