//! Thin wrappers over nalgebra's dense decompositions, shared by the state
//! and operator types.

use crate::{CMatrix, CVector, C64};

/// Max absolute entry of `m - m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    defect
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// the matching orthonormal eigenvector columns.
///
/// The input is symmetrized as `(m + m†)/2` first so that floating-point
/// asymmetry at the caller's tolerance cannot leak into the solver.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Largest singular value. For Hermitian input this is the largest
/// |eigenvalue|.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    // m†m is Hermitian PSD; its top eigenvalue is σ_max².
    let gram = m.adjoint() * m;
    let (values, _) = hermitian_eigen(&gram);
    values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Outer product |u⟩⟨v|.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    let n = u.len();
    let m = v.len();
    CMatrix::from_fn(n, m, |i, j| u[i] * v[j].conj())
}

/// Sum of |v⟩⟨v| over the given columns: the orthogonal projector onto their
/// span when the columns are orthonormal.
pub fn projector_from_columns(vectors: &CMatrix, cols: std::ops::Range<usize>) -> CMatrix {
    let n = vectors.nrows();
    let mut p = CMatrix::zeros(n, n);
    for c in cols {
        let v = vectors.column(c);
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    p
}

/// Max absolute entry of `m`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Extend the given (assumed orthonormal) seed vectors to a full orthonormal
/// basis of the `dim`-dimensional space, by Gram-Schmidt over the standard
/// basis.
pub fn orthonormal_completion(seeds: &[CVector], dim: usize) -> Vec<CVector> {
    let mut basis: Vec<CVector> = seeds.to_vec();
    let mut e = 0;
    while basis.len() < dim && e < dim {
        let mut candidate = CVector::zeros(dim);
        candidate[e] = crate::C64::new(1.0, 0.0);
        for b in &basis {
            let overlap = b.dotc(&candidate);
            candidate -= b * overlap;
        }
        let norm = candidate.norm();
        if norm > 1e-8 {
            basis.push(candidate.unscale(norm));
        }
        e += 1;
    }
    debug_assert_eq!(
        basis.len(),
        dim,
        "seeds were not linearly independent of the basis"
    );
    basis
}

/// Trace as a complex number.
pub fn trace(m: &CMatrix) -> C64 {
    let mut t = C64::new(0.0, 0.0);
    for i in 0..m.nrows() {
        t += m[(i, i)];
    }
    t
}
