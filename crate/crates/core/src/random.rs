//! Seeded generators for random states, operators, and channels.
//!
//! Used by property sweeps and by the protocol experiments; everything is
//! driven by an explicit RNG so sweeps are reproducible.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hilbert::{DensityOperator, SpaceSpec, StateVector};
use crate::{CMatrix, CVector, C64};

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Haar-like random pure state (normalized complex Gaussian vector).
pub fn random_state<R: Rng + ?Sized>(space: &SpaceSpec, rng: &mut R) -> StateVector {
    let v = CVector::from_fn(space.total_dim(), |_, _| gaussian_complex(rng));
    StateVector::normalized(space.clone(), v).expect("gaussian vector is nonzero")
}

/// Full-rank random density operator GG†/Tr(GG†).
pub fn random_density<R: Rng + ?Sized>(space: &SpaceSpec, rng: &mut R) -> DensityOperator {
    let d = space.total_dim();
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_complex(rng));
    let mut m = &g * g.adjoint();
    let trace: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    m.unscale_mut(trace);
    DensityOperator::new(space.clone(), m).expect("Wishart matrix is a valid density operator")
}

/// Random Hermitian matrix (G + G†)/2 with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    (&g + g.adjoint()).scale(0.5)
}

/// Random isometry: `rows x cols` matrix with orthonormal columns
/// (`rows ≥ cols`), drawn from the QR of a Gaussian matrix.
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    assert!(rows >= cols, "an isometry cannot shrink the dimension");
    let g = CMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the phase ambiguity so columns are deterministic given the input.
    for c in 0..cols {
        let diag = r[(c, c)];
        if diag.norm() > 0.0 {
            let phase = diag / diag.norm();
            let col = q.column(c) * phase.conj();
            q.set_column(c, &col);
        }
    }
    q
}

/// Random unitary on `dim` dimensions.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    random_isometry(dim, dim, rng)
}

/// Random channel with `n_kraus` Kraus operators, built by slicing a random
/// isometry so that completeness holds exactly.
pub fn random_channel<R: Rng + ?Sized>(
    space: &SpaceSpec,
    n_kraus: usize,
    rng: &mut R,
) -> Result<crate::channels::Channel, crate::channels::ChannelError> {
    assert!(n_kraus >= 1);
    let d = space.total_dim();
    let v = random_isometry(d * n_kraus, d, rng);
    let kraus: Vec<CMatrix> = (0..n_kraus)
        .map(|i| CMatrix::from_fn(d, d, |r, c| v[(r * n_kraus + i, c)]))
        .collect();
    crate::channels::Channel::new(space.clone(), kraus)
}
