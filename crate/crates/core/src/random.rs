//! Haar-random unitaries, isometries and states.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;
use crate::tensor::{CMatrix, C64};

fn gaussian(rng: &mut Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) / std::f64::consts::SQRT_2
}

pub fn ginibre(rows: usize, cols: usize, rng: &mut Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar unitary from the QR factorisation of a Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut Rng) -> CMatrix {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let x = r[(j, j)];
        let phase = if x.norm() > 0.0 { x / x.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar isometry from dimension `d_in` into `d_out >= d_in`.
pub fn haar_isometry(d_out: usize, d_in: usize, rng: &mut Rng) -> CMatrix {
    assert!(d_out >= d_in, "isometry needs d_out >= d_in");
    haar_unitary(d_out, rng).columns(0, d_in).into_owned()
}

pub fn random_pure_state(d: usize, rng: &mut Rng) -> nalgebra::DVector<C64> {
    let v = nalgebra::DVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Density matrix `G G^dag / Tr` with `G` a `d x rank` Ginibre matrix.
pub fn random_density(d: usize, rank: usize, rng: &mut Rng) -> CMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = m.trace().re;
    m.unscale(t)
}

/// Random hermitian matrix with Gaussian entries.
pub fn random_hermitian(d: usize, rng: &mut Rng) -> CMatrix {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()).unscale(2.0)
}

/// Kraus operators of a random channel with `rank` operators, cut from a
/// Haar isometry into output (x) environment.
pub fn random_channel_kraus(d_out: usize, d_in: usize, rank: usize, rng: &mut Rng) -> Vec<CMatrix> {
    let v = haar_isometry(d_out * rank, d_in, rng);
    (0..rank)
        .map(|e| CMatrix::from_fn(d_out, d_in, |b, a| v[(b * rank + e, a)]))
        .collect()
}
