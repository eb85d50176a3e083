//! Small dense helpers shared by the solver, bounds and harness.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2(v: &DVector<f64>) -> f64 {
    v.norm()
}

/// `X^T X / n`.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows().max(1) as f64;
    x.tr_mul(x) / n
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigenvector of the smallest eigenvalue of a symmetric matrix.
pub fn bottom_eigenvector(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// `v^T (X^T X / n) v / ||v||^2`, or `None` for the zero vector.
pub fn rayleigh_quotient(x: &DMatrix<f64>, v: &DVector<f64>) -> Option<f64> {
    let vv = v.norm_squared();
    if vv == 0.0 {
        return None;
    }
    let xv = x * v;
    Some(xv.norm_squared() / x.nrows() as f64 / vv)
}

/// SplitMix64 finalizer, used to derive independent stream seeds from one master seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Serializes a vector as a plain sequence.
pub fn serialize_dvector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}
