#![allow(dead_code)]

use prp_core::linalg::{frobenius, identity, inverse, CMatrix, Flag, FlagType, Rational, WeightVector, C64};
use prp_core::rep_pair::{ParabolicRepPair, WeightedPair};
use prp_core::sampling::{random_pair, random_weights};
use prp_core::surface::{Presentation, Word};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn corpus(name: &str) -> String {
    let path = format!("{}/corpus/{name}.json", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn corpus_files() -> Vec<std::path::PathBuf> {
    let dir = format!("{}/corpus", env!("CARGO_MANIFEST_DIR"));
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

pub fn cplx(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_square(rng: &mut ChaCha8Rng, r: usize) -> CMatrix {
    CMatrix::from_fn(r, r, |_, _| cplx(rng))
}

/// A random flag type of rank r.
pub fn random_type(rng: &mut ChaCha8Rng, r: usize) -> FlagType {
    let mut dims = Vec::new();
    let mut left = r;
    while left > 0 {
        let d = rng.random_range(1..=left);
        dims.push(d);
        left -= d;
    }
    FlagType::new(dims).unwrap()
}

/// Random weights for every puncture, shifted on the first puncture so the degree is zero.
pub fn degree_zero_weights(rng: &mut ChaCha8Rng, pair: &ParabolicRepPair) -> Vec<WeightVector> {
    let mut ws: Vec<WeightVector> = pair.flag_types().iter().map(|t| random_weights(rng, t.dims().len(), 3)).collect();
    let deg: Rational = ws.iter().zip(pair.flag_types()).map(|(w, t)| w.pairing(&t)).sum();
    let shift = deg / Rational::from_integer(pair.rank() as i64);
    ws[0] = WeightVector::new(ws[0].weights().iter().map(|w| *w - shift).collect()).unwrap();
    ws
}

pub fn random_weighted(rng: &mut ChaCha8Rng, pair: ParabolicRepPair) -> WeightedPair {
    let ws = pair.flag_types().iter().map(|t| random_weights(rng, t.dims().len(), 3)).collect();
    WeightedPair::new(pair, ws).unwrap()
}

fn commutator_prefix(images: &[CMatrix], genus: usize, r: usize) -> CMatrix {
    let mut prefix = identity(r);
    for j in 0..genus {
        let (a, b) = (&images[j], &images[genus + j]);
        prefix = prefix * a * b * inverse(a).unwrap() * inverse(b).unwrap();
    }
    prefix
}

/// Closes the relator by solving for the last boundary image.
fn close(images: &mut Vec<CMatrix>, genus: usize, r: usize) {
    let mut prefix = commutator_prefix(images, genus, r);
    for m in &images[2 * genus..] {
        prefix *= m;
    }
    images.push(inverse(&prefix).unwrap());
}

/// Upper triangular images with well separated diagonals and standard flags:
/// reducible, generically indecomposable, with the coordinate chain as lattice.
pub fn triangular_pair(rng: &mut ChaCha8Rng, genus: usize, n: usize, r: usize) -> ParabolicRepPair {
    let mut images = Vec::new();
    for _ in 0..2 * genus + n - 1 {
        let mut m = random_square(rng, r);
        for i in 0..r {
            for j in 0..i {
                m[(i, j)] = C64::new(0.0, 0.0);
            }
            m[(i, i)] = C64::from_polar(rng.random_range(0.6..1.6), rng.random_range(0.0..6.28));
        }
        images.push(m);
    }
    close(&mut images, genus, r);
    let flags = (0..n).map(|_| Flag::standard(&random_type(rng, r))).collect();
    ParabolicRepPair::new(Presentation::new(genus, n).unwrap(), images, flags).unwrap()
}

/// Diagonal images with generic entries and coordinate flags in random order: a sum of lines.
pub fn diagonal_pair(rng: &mut ChaCha8Rng, genus: usize, n: usize, r: usize) -> ParabolicRepPair {
    let mut images = Vec::new();
    for _ in 0..2 * genus + n - 1 {
        let d: Vec<C64> = (0..r).map(|_| C64::from_polar(rng.random_range(0.6..1.6), rng.random_range(0.0..6.28))).collect();
        images.push(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)));
    }
    close(&mut images, genus, r);
    let flags = (0..n)
        .map(|_| {
            let mut perm: Vec<usize> = (0..r).collect();
            perm.shuffle(rng);
            let frame = CMatrix::from_fn(r, r, |i, j| if perm[j] == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
            Flag::from_frame(&frame, &random_type(rng, r)).unwrap()
        })
        .collect();
    ParabolicRepPair::new(Presentation::new(genus, n).unwrap(), images, flags).unwrap()
}

pub fn irreducible_pair(rng: &mut ChaCha8Rng, genus: usize, n: usize, r: usize) -> ParabolicRepPair {
    let types: Vec<FlagType> = (0..n).map(|_| random_type(rng, r)).collect();
    random_pair(rng, genus, &types).unwrap()
}

/// A truncated series a₀ + a₁t + a₂t², independent of the crate's own jets.
#[derive(Clone)]
pub struct Series(pub [CMatrix; 3]);

impl Series {
    pub fn constant(m: CMatrix) -> Self {
        let z = CMatrix::zeros(m.nrows(), m.ncols());
        Series([m, z.clone(), z])
    }

    /// exp(a t + b t²) to second order.
    pub fn exp(a: &CMatrix, b: &CMatrix) -> Self {
        let half = C64::new(0.5, 0.0);
        Series([identity(a.nrows()), a.clone(), b + a * a * half])
    }

    pub fn mul(&self, o: &Series) -> Series {
        let (a, b) = (&self.0, &o.0);
        Series([&a[0] * &b[0], &a[0] * &b[1] + &a[1] * &b[0], &a[0] * &b[2] + &a[1] * &b[1] + &a[2] * &b[0]])
    }

    pub fn inv(&self) -> Series {
        let i0 = inverse(&self.0[0]).unwrap();
        let i1 = -(&i0 * &self.0[1] * &i0);
        let i2 = &i0 * &self.0[1] * &i0 * &self.0[1] * &i0 - &i0 * &self.0[2] * &i0;
        Series([i0, i1, i2])
    }

    /// (X, V) with self = exp(X t + V t²)·a₀.
    pub fn log_coefficients(&self) -> (CMatrix, CMatrix) {
        let i0 = inverse(&self.0[0]).unwrap();
        let x = &self.0[1] * &i0;
        let v = &self.0[2] * &i0 - &x * &x * C64::new(0.5, 0.0);
        (x, v)
    }
}

/// An explicit order-2 deformation of a pair: generator series, flag motions
/// exp(Y t + Z t²) per puncture, and the resulting base pair.
pub struct Curve {
    pub pair: ParabolicRepPair,
    pub series: Vec<Series>,
    pub y: Vec<CMatrix>,
    pub z: Vec<CMatrix>,
}

/// Builds a curve with every puncture but the last carrying a random flag;
/// each γᵢ(t) = gᵢ(t)·bᵢ(t)·gᵢ(t)⁻¹ with bᵢ(t) in the fixed parabolic, and the
/// last boundary image is solved from the relator (its flag is trivial).
pub fn random_curve(rng: &mut ChaCha8Rng, genus: usize, n: usize, r: usize) -> Curve {
    let mut series = Vec::new();
    for _ in 0..2 * genus {
        let base = identity(r) + random_square(rng, r) * C64::new(0.5, 0.0);
        series.push(Series::exp(&random_square(rng, r), &random_square(rng, r)).mul(&Series::constant(base)));
    }
    let mut flags = Vec::new();
    let (mut ys, mut zs) = (Vec::new(), Vec::new());
    for _ in 0..n - 1 {
        let t = random_type(rng, r);
        let frame = identity(r) + random_square(rng, r) * C64::new(0.4, 0.0);
        let frame_inv = inverse(&frame).unwrap();
        let p = Flag::standard(&t);
        let in_p = |m: CMatrix| {
            let par = prp_core::linalg::ParabolicAlgebra::of(&p);
            let v = prp_core::linalg::vectorize(&m);
            let proj = &par.basis * (par.basis.adjoint() * v);
            prp_core::linalg::unvectorize(proj.as_slice(), r, r)
        };
        let b0 = identity(r) + in_p(random_square(rng, r)) * C64::new(0.5, 0.0);
        let b = Series([
            &frame * b0 * &frame_inv,
            &frame * in_p(random_square(rng, r)) * &frame_inv,
            &frame * in_p(random_square(rng, r)) * &frame_inv,
        ]);
        let (y, z) = (random_square(rng, r), random_square(rng, r));
        let g = Series::exp(&y, &z);
        series.push(g.mul(&b).mul(&g.inv()));
        flags.push(Flag::from_frame(&frame, &t).unwrap());
        ys.push(y);
        zs.push(z);
    }
    let mut prefix = Series::constant(identity(r));
    for j in 0..genus {
        let (a, b) = (&series[j], &series[genus + j]);
        prefix = prefix.mul(a).mul(b).mul(&a.inv()).mul(&b.inv());
    }
    for s in &series[2 * genus..] {
        prefix = prefix.mul(s);
    }
    series.push(prefix.inv());
    flags.push(Flag::trivial(r));
    ys.push(CMatrix::zeros(r, r));
    zs.push(CMatrix::zeros(r, r));
    let images = series.iter().map(|s| s.0[0].clone()).collect();
    let pair = ParabolicRepPair::new(Presentation::new(genus, n).unwrap(), images, flags).unwrap();
    Curve { pair, series, y: ys, z: zs }
}

/// ‖t¹‖ and ‖t²‖ coefficients of the relator evaluated on the curve.
pub fn curve_relator_coefficients(c: &Curve) -> (f64, f64) {
    let p = c.pair.presentation();
    let r = c.pair.rank();
    let word: Word = p.relator();
    let mut acc = Series::constant(identity(r));
    for letter in &word.letters {
        let s = &c.series[p.index_of(letter.gen).unwrap()];
        acc = if letter.exp > 0 { acc.mul(s) } else { acc.mul(&s.inv()) };
    }
    (frobenius(&acc.0[1]), frobenius(&acc.0[2]))
}
