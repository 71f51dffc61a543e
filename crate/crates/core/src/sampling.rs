//! Seeded random generation of valid pairs and weights for tests and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    identity, inverse, numerical_rank, schur, CMatrix, Flag, FlagType, Rational, WeightVector,
};
use crate::rep_pair::ParabolicRepPair;
use crate::subspaces::random_matrix;
use crate::surface::Presentation;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random matrix near the identity, invertible with overwhelming probability.
pub fn random_invertible(rng: &mut ChaCha8Rng, r: usize) -> CMatrix {
    loop {
        let m = identity(r) + random_matrix(rng, r, r) * crate::linalg::real(0.6);
        if numerical_rank(&m) == r && m.clone().try_inverse().is_some() {
            return m;
        }
    }
}

/// A random invertible element of the standard block upper-triangular parabolic of type `t`.
pub fn random_standard_parabolic(rng: &mut ChaCha8Rng, t: &FlagType) -> CMatrix {
    let r = t.rank();
    // Block index of each row/column in the order where level ℓ occupies the leading dim V_ℓ coordinates.
    let dims = t.level_dims();
    let block = |k: usize| (0..t.dims().len()).rev().find(|&l| k < dims[l]).unwrap_or(0);
    loop {
        let mut m = random_matrix(rng, r, r) * crate::linalg::real(0.6) + identity(r);
        for i in 0..r {
            for j in 0..r {
                // Entry (i, j) maps e_j into e_i; allowed iff e_i lies in every level containing e_j.
                if block(i) < block(j) {
                    m[(i, j)] = 0.0.into();
                }
            }
        }
        if numerical_rank(&m) == r {
            return m;
        }
    }
}

/// A random element of P_𝓕 for 𝓕 = g·(standard flag).
pub fn random_in_parabolic(rng: &mut ChaCha8Rng, frame: &CMatrix, t: &FlagType) -> Result<CMatrix> {
    let b = random_standard_parabolic(rng, t);
    Ok(frame * b * inverse(frame)?)
}

/// A random valid pair with the given flag types: α, β free, γ₁..γ_{n−1} in
/// random parabolics, γ_n solved from the relator and its flag read off a
/// Schur basis of ρ(γ_n).
pub fn random_pair(
    rng: &mut ChaCha8Rng,
    genus: usize,
    types: &[FlagType],
) -> Result<ParabolicRepPair> {
    let n = types.len();
    let p = Presentation::new(genus, n)?;
    let r = types[0].rank();
    if types.iter().any(|t| t.rank() != r) {
        return Err(Error::InvalidFlag("flag types have different ranks".into()));
    }
    let mut images = Vec::with_capacity(p.generator_count());
    for _ in 0..2 * genus {
        images.push(random_invertible(rng, r));
    }
    let mut flags = Vec::with_capacity(n);
    for t in &types[..n - 1] {
        let frame = random_invertible(rng, r);
        images.push(random_in_parabolic(rng, &frame, t)?);
        flags.push(Flag::from_frame(&frame, t)?);
    }
    let mut prefix = identity(r);
    for j in 0..genus {
        let (a, b) = (&images[j], &images[genus + j]);
        prefix = prefix * a * b * inverse(a)? * inverse(b)?;
    }
    for i in 0..n - 1 {
        prefix *= &images[2 * genus + i];
    }
    let last = inverse(&prefix)?;
    let (q, _) = schur(&last)?;
    flags.push(Flag::from_frame(&q, &types[n - 1])?);
    images.push(last);
    ParabolicRepPair::new(p, images, flags)
}

/// A random pair with full flags at every puncture.
pub fn random_full_flag_pair(rng: &mut ChaCha8Rng, genus: usize, punctures: usize, r: usize) -> Result<ParabolicRepPair> {
    random_pair(rng, genus, &vec![FlagType::full(r); punctures])
}

/// Strictly increasing random integer weights in [−bound, bound].
pub fn random_weights(rng: &mut ChaCha8Rng, len: usize, bound: i64) -> WeightVector {
    loop {
        let mut w: Vec<i64> = (0..len).map(|_| rng.random_range(-bound..=bound)).collect();
        w.sort_unstable();
        w.dedup();
        if w.len() == len {
            return WeightVector::new(w.into_iter().map(Rational::from_integer).collect())
                .expect("strictly increasing");
        }
    }
}
