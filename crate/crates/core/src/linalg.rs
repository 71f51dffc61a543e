//! Dense complex linear algebra, flags and parabolic subalgebras, Hermitian
//! metrics and exact rational weights.
//!
//! Every rank decision in the crate goes through [`numerical_rank`], which
//! treats a singular value as zero when it falls below
//! [`RANK_RTOL`] times the largest singular value of the same matrix.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use ndarray::Array2;
use ndarray_linalg::SVD;
use num_complex::Complex;
use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
/// Exact rational used for weights, degrees and slopes.
pub type Rational = Ratio<i64>;

/// Relative singular-value cutoff for all rank decisions.
pub const RANK_RTOL: f64 = 1e-9;
/// Relative residual below which a subspace counts as mapped into another.
pub const CONTAINMENT_TOL: f64 = 1e-8;
/// Tolerance for Hermitian symmetry checks on Gram matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Builds a complex matrix from real row-major rows.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(nrows, ncols, |i, j| real(rows[i][j]))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Column-major vectorisation, matching nalgebra's storage order.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &[C64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v)
}

pub fn kronecker(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Full singular value decomposition m = U·diag(s)·Vᴴ, computed by LAPACK.
/// (nalgebra's complex SVD is not used: it returns inconsistent factors for
/// some rank-deficient inputs.)
#[derive(Clone, Debug)]
pub struct Svd {
    /// m × m unitary.
    pub u: CMatrix,
    /// min(m, n) singular values, descending.
    pub s: Vec<f64>,
    /// n × n unitary Vᴴ.
    pub v_h: CMatrix,
}

pub fn svd(m: &CMatrix) -> Svd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Svd { u: identity(rows), s: Vec::new(), v_h: identity(cols) };
    }
    let a = Array2::from_shape_fn((rows, cols), |(i, j)| m[(i, j)]);
    let (u, s, vt) = a.svd(true, true).expect("LAPACK SVD did not converge");
    let (u, vt) = (u.expect("requested U"), vt.expect("requested V^H"));
    Svd {
        u: CMatrix::from_fn(rows, rows, |i, j| u[(i, j)]),
        s: s.to_vec(),
        v_h: CMatrix::from_fn(cols, cols, |i, j| vt[(i, j)]),
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let a = Array2::from_shape_fn(m.shape(), |(i, j)| m[(i, j)]);
    let (_, s, _) = a.svd(false, false).expect("LAPACK SVD did not converge");
    s.to_vec()
}

fn cutoff(svals: &[f64]) -> f64 {
    svals.first().copied().unwrap_or(0.0) * RANK_RTOL
}

pub fn numerical_rank(m: &CMatrix) -> usize {
    let s = singular_values(m);
    let tol = cutoff(&s);
    if s.first().copied().unwrap_or(0.0) <= f64::MIN_POSITIVE {
        return 0;
    }
    s.iter().filter(|&&x| x > tol).count()
}

/// Orthonormal basis of the column space.
pub fn column_space(m: &CMatrix) -> CMatrix {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let d = svd(m);
    if d.s[0] <= f64::MIN_POSITIVE {
        return CMatrix::zeros(rows, 0);
    }
    let tol = cutoff(&d.s);
    let k = d.s.iter().filter(|&&x| x > tol).count();
    d.u.columns(0, k).into_owned()
}

/// Orthonormal basis of the kernel.
pub fn null_space(m: &CMatrix) -> CMatrix {
    null_space_with(m, None)
}

/// Kernel with an absolute singular-value cutoff, for matrices that are
/// legitimately zero up to rounding (powers of nilpotent parts).
pub fn null_space_abs(m: &CMatrix, abs_tol: f64) -> CMatrix {
    null_space_with(m, Some(abs_tol))
}

/// Kernel with cutoff RANK_RTOL · max(σ_max, floor); `floor` is the natural
/// scale of a system whose blocks are built from orthonormal data, so that a
/// system that vanishes up to rounding is not ranked by its noise.
pub fn null_space_floor(m: &CMatrix, floor: f64) -> CMatrix {
    let s0 = singular_values(m).first().copied().unwrap_or(0.0);
    null_space_with(m, Some(RANK_RTOL * s0.max(floor)))
}

fn null_space_with(m: &CMatrix, abs_tol: Option<f64>) -> CMatrix {
    let n = m.ncols();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(n);
    }
    let d = svd(m);
    let tol = abs_tol.unwrap_or_else(|| cutoff(&d.s));
    if d.s[0] <= f64::MIN_POSITIVE || d.s[0] <= tol {
        return identity(n);
    }
    let rank = d.s.iter().filter(|&&x| x > tol).count();
    d.v_h.rows(rank, n - rank).adjoint()
}

/// Least-squares solution with the crate-wide relative cutoff; returns the
/// minimum-norm solution and the residual norm.
pub fn least_squares(a: &CMatrix, b: &CVector) -> (CVector, f64) {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return (CVector::zeros(n), b.norm());
    }
    let d = svd(a);
    let tol = d.s[0] * RANK_RTOL;
    let mut x = CVector::zeros(n);
    if d.s[0] > f64::MIN_POSITIVE {
        for (k, &sk) in d.s.iter().enumerate() {
            if sk > tol {
                let coeff = d.u.column(k).dotc(b) / sk;
                x += d.v_h.row(k).adjoint() * coeff;
            }
        }
    }
    let resid = (a * &x - b).norm();
    (x, resid)
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    if numerical_rank(m) < m.nrows() {
        return Err(Error::Singular("matrix is numerically singular".into()));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("LU inversion failed".into()))
}

/// Pseudo-inverse of a full-column-rank basis: coordinates of vectors in its span.
pub fn left_inverse(basis: &CMatrix) -> Result<CMatrix> {
    let gram = basis.adjoint() * basis;
    Ok(inverse(&gram)? * basis.adjoint())
}

/// Matrix of X ↦ g X g⁻¹ acting on column-major vectorisations.
pub fn adjoint_action(g: &CMatrix) -> Result<CMatrix> {
    let g_inv = inverse(g)?;
    Ok(kronecker(&g_inv.transpose(), g))
}

/// ‖(I − QQ*) M Q‖ for an orthonormal Q, relative to max(1, ‖M‖).
pub fn invariance_residual(m: &CMatrix, q: &CMatrix) -> f64 {
    if q.ncols() == 0 {
        return 0.0;
    }
    let mq = m * q;
    let resid = &mq - q * (q.adjoint() * &mq);
    resid.norm() / frobenius(m).max(1.0)
}

pub fn is_invariant(m: &CMatrix, q: &CMatrix) -> bool {
    invariance_residual(m, q) < CONTAINMENT_TOL
}

/// Orthonormal basis of the intersection of two column spans.
pub fn intersect(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let qa = column_space(a);
    let qb = column_space(b);
    let (ka, kb) = (qa.ncols(), qb.ncols());
    if ka == 0 || kb == 0 {
        return CMatrix::zeros(a.nrows(), 0);
    }
    let mut stacked = CMatrix::zeros(qa.nrows(), ka + kb);
    stacked.columns_mut(0, ka).copy_from(&qa);
    stacked.columns_mut(ka, kb).copy_from(&(-&qb));
    let kernel = null_space(&stacked);
    if kernel.ncols() == 0 {
        return CMatrix::zeros(a.nrows(), 0);
    }
    let top = kernel.rows(0, ka).into_owned();
    column_space(&(qa * top))
}

pub fn span_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut joined = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    joined.columns_mut(0, a.ncols()).copy_from(a);
    joined.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    column_space(&joined)
}

/// Orthonormal basis of the orthogonal complement (standard inner product).
pub fn orthogonal_complement(q: &CMatrix) -> CMatrix {
    if q.ncols() == 0 {
        return identity(q.nrows());
    }
    null_space(&q.adjoint())
}

/// Distance between the orthogonal projectors of two column spans.
pub fn subspace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let qa = column_space(a);
    let qb = column_space(b);
    (&qa * qa.adjoint() - &qb * qb.adjoint()).norm()
}

pub fn hconcat(blocks: &[&CMatrix]) -> CMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn vconcat(blocks: &[&CMatrix]) -> CMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.rows_mut(at, b.nrows()).copy_from(*b);
        at += b.nrows();
    }
    out
}

/// Complex eigenvalues via the Schur form.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Schur decomposition m = Q T Q*; the leading columns of Q span invariant subspaces.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    Ok(schur.unpack())
}

/// Groups eigenvalues whose mutual distance is below `rtol · max(1, |λ|)`,
/// returning (cluster mean, multiplicity).
pub fn cluster_eigenvalues(eigs: &[C64], rtol: f64) -> Vec<(C64, usize)> {
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for &e in eigs {
        let scale = e.norm().max(1.0);
        match clusters
            .iter_mut()
            .find(|cl| cl.iter().any(|&x| (x - e).norm() < rtol * scale))
        {
            Some(cl) => cl.push(e),
            None => clusters.push(vec![e]),
        }
    }
    // Merge clusters that became close through chaining.
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let close = clusters[i].iter().any(|&x| {
                    clusters[j]
                        .iter()
                        .any(|&y| (x - y).norm() < rtol * x.norm().max(1.0))
                });
                if close {
                    let moved = clusters.remove(j);
                    clusters[i].extend(moved);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    clusters
        .into_iter()
        .map(|cl| {
            let n = cl.len();
            let sum: C64 = cl.iter().sum();
            (sum / n as f64, n)
        })
        .collect()
}

/// Hermitian part (A + A*)/2.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * real(0.5)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let vals = eig.eigenvalues.map(|x| real(f(x)));
    &eig.eigenvectors * CMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Graded dimensions (d₀, …, d_s) of a flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagType {
    dims: Vec<usize>,
}

impl FlagType {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidFlag(format!(
                "flag type {dims:?} must be a non-empty list of positive dimensions"
            )));
        }
        Ok(Self { dims })
    }

    pub fn trivial(rank: usize) -> Self {
        Self { dims: vec![rank] }
    }

    pub fn full(rank: usize) -> Self {
        Self { dims: vec![1; rank] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Number of proper subspaces s.
    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    /// dim V_ℓ = Σ_{j ≥ ℓ} d_j for ℓ = 0..=s+1.
    pub fn level_dims(&self) -> Vec<usize> {
        let mut out = vec![0; self.dims.len() + 1];
        for l in (0..self.dims.len()).rev() {
            out[l] = out[l + 1] + self.dims[l];
        }
        out
    }

    /// Dimension of the parabolic subalgebra: Σ_{i ≤ j} dᵢ dⱼ.
    pub fn parabolic_dimension(&self) -> usize {
        let mut total = 0;
        for i in 0..self.dims.len() {
            for j in i..self.dims.len() {
                total += self.dims[i] * self.dims[j];
            }
        }
        total
    }

    /// Dimension of the nilradical complement: Σ_{i < j} dᵢ dⱼ.
    pub fn nilradical_dimension(&self) -> usize {
        let mut total = 0;
        for i in 0..self.dims.len() {
            for j in (i + 1)..self.dims.len() {
                total += self.dims[i] * self.dims[j];
            }
        }
        total
    }
}

/// Strictly decreasing chain V₁ ⊋ … ⊋ V_s of proper nonzero subspaces of ℂʳ.
#[derive(Clone, Debug)]
pub struct Flag {
    ambient: usize,
    subspaces: Vec<CMatrix>,
}

impl Flag {
    pub fn new(ambient: usize, subspaces: Vec<CMatrix>) -> Result<Self> {
        let mut prev_dim = ambient;
        let mut prev: Option<&CMatrix> = None;
        for (idx, basis) in subspaces.iter().enumerate() {
            let level = idx + 1;
            if basis.nrows() != ambient {
                return Err(Error::DimensionMismatch(format!(
                    "flag level {level} has {} rows, expected {ambient}",
                    basis.nrows()
                )));
            }
            let k = basis.ncols();
            if k == 0 || numerical_rank(basis) < k {
                return Err(Error::InvalidFlag(format!(
                    "flag level {level} basis is rank deficient"
                )));
            }
            if k >= prev_dim {
                return Err(Error::InvalidFlag(format!(
                    "flag level {level} has dimension {k}, not below {prev_dim}"
                )));
            }
            if let Some(p) = prev {
                let q = column_space(p);
                let resid = (basis - &q * (q.adjoint() * basis)).norm() / basis.norm().max(1.0);
                if resid > CONTAINMENT_TOL {
                    return Err(Error::InvalidFlag(format!(
                        "flag level {level} is not contained in level {}",
                        level - 1
                    )));
                }
            }
            prev_dim = k;
            prev = Some(basis);
        }
        Ok(Self { ambient, subspaces })
    }

    pub fn trivial(ambient: usize) -> Self {
        Self { ambient, subspaces: Vec::new() }
    }

    /// Flag of the given type spanned by leading standard basis vectors, so
    /// its parabolic consists of block upper-triangular matrices.
    pub fn standard(flag_type: &FlagType) -> Self {
        let r = flag_type.rank();
        let dims = flag_type.level_dims();
        let subspaces = (1..dims.len() - 1)
            .map(|l| CMatrix::identity(r, dims[l]))
            .collect();
        Self { ambient: r, subspaces }
    }

    /// Flag spanned by leading columns of an invertible frame.
    pub fn from_frame(frame: &CMatrix, flag_type: &FlagType) -> Result<Self> {
        let dims = flag_type.level_dims();
        let subspaces = (1..dims.len() - 1)
            .map(|l| frame.columns(0, dims[l]).into_owned())
            .collect();
        Self::new(frame.nrows(), subspaces)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn depth(&self) -> usize {
        self.subspaces.len()
    }

    pub fn subspaces(&self) -> &[CMatrix] {
        &self.subspaces
    }

    pub fn flag_type(&self) -> FlagType {
        let mut dims = Vec::with_capacity(self.subspaces.len() + 1);
        let mut prev = self.ambient;
        for b in &self.subspaces {
            dims.push(prev - b.ncols());
            prev = b.ncols();
        }
        dims.push(prev);
        FlagType { dims }
    }

    /// Basis of V_ℓ for ℓ = 0..=s+1 (V₀ = ℂʳ, V_{s+1} = 0).
    pub fn level(&self, l: usize) -> CMatrix {
        if l == 0 {
            identity(self.ambient)
        } else if l <= self.subspaces.len() {
            self.subspaces[l - 1].clone()
        } else {
            CMatrix::zeros(self.ambient, 0)
        }
    }

    pub fn orthonormal_level(&self, l: usize) -> CMatrix {
        if l == 0 {
            identity(self.ambient)
        } else {
            column_space(&self.level(l))
        }
    }

    /// Image g·𝓕 under an invertible g.
    pub fn transformed(&self, g: &CMatrix) -> Self {
        Self {
            ambient: self.ambient,
            subspaces: self.subspaces.iter().map(|b| g * b).collect(),
        }
    }

    /// Largest projector distance between corresponding levels.
    pub fn distance(&self, other: &Flag) -> f64 {
        if self.depth() != other.depth() {
            return f64::INFINITY;
        }
        self.subspaces
            .iter()
            .zip(&other.subspaces)
            .map(|(a, b)| subspace_distance(a, b))
            .fold(0.0, f64::max)
    }
}

/// True iff m·V_ℓ ⊆ V_ℓ for every level of the flag.
pub fn parabolic_membership(m: &CMatrix, flag: &Flag) -> Result<bool> {
    if m.nrows() != flag.ambient() || m.ncols() != flag.ambient() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but flag lives in dimension {}",
            m.nrows(),
            m.ncols(),
            flag.ambient()
        )));
    }
    Ok((1..=flag.depth()).all(|l| is_invariant(m, &flag.orthonormal_level(l))))
}

pub fn parabolic_dimension(t: &FlagType) -> usize {
    t.parabolic_dimension()
}

/// The parabolic subalgebra 𝔭_𝓕 ⊆ 𝔤𝔩(r) in vectorised coordinates.
#[derive(Clone, Debug)]
pub struct ParabolicAlgebra {
    /// Orthonormal basis of vec(𝔭), r² × dim 𝔭.
    pub basis: CMatrix,
    /// Orthonormal basis of the Frobenius-orthogonal complement, r² × codim.
    pub complement: CMatrix,
}

impl ParabolicAlgebra {
    pub fn of(flag: &Flag) -> Self {
        let r = flag.ambient();
        let mut blocks = Vec::new();
        for l in 1..=flag.depth() {
            let q = flag.orthonormal_level(l);
            let out = identity(r) - &q * q.adjoint();
            blocks.push(kronecker(&q.transpose(), &out));
        }
        if blocks.is_empty() {
            return Self { basis: identity(r * r), complement: CMatrix::zeros(r * r, 0) };
        }
        let refs: Vec<&CMatrix> = blocks.iter().collect();
        let constraints = vconcat(&refs);
        Self {
            basis: null_space(&constraints),
            complement: column_space(&constraints.adjoint()),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn codim(&self) -> usize {
        self.complement.ncols()
    }

    /// Coordinates of vec(X) in 𝔤/𝔭 (zero iff X ∈ 𝔭).
    pub fn quotient_coords(&self, x: &CVector) -> CVector {
        self.complement.adjoint() * x
    }

    pub fn contains(&self, x: &CMatrix) -> bool {
        let v = vectorize(x);
        self.quotient_coords(&v).norm() <= CONTAINMENT_TOL * v.norm().max(1.0)
    }
}

/// Strictly increasing weights (w₀ < … < w_s), one per graded piece.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    weights: Vec<Rational>,
}

impl WeightVector {
    pub fn new(weights: Vec<Rational>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("weight vector is empty".into()));
        }
        if weights.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidWeights(format!(
                "weights {} are not strictly increasing",
                weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(Self { weights })
    }

    pub fn from_integers(ws: &[i64]) -> Result<Self> {
        Self::new(ws.iter().map(|&w| Rational::from_integer(w)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        // Only valid as a weight vector for a single graded piece; callers
        // with deeper flags get the monotonicity error from `new`.
        Self { weights: vec![Rational::zero(); len] }
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// d⃗ · w⃗ for a matching flag type.
    pub fn pairing(&self, t: &FlagType) -> Rational {
        self.weights
            .iter()
            .zip(t.dims())
            .map(|(w, &d)| *w * Rational::from_integer(d as i64))
            .sum()
    }
}

/// Result of restricting a weighted flag to a subspace.
#[derive(Clone, Debug)]
pub struct InducedFlag {
    /// Flag on ℂ^{r′} in the coordinates of the given subspace basis.
    pub flag: Flag,
    pub weights: WeightVector,
    /// ℓ′ ↦ max S(ℓ′): the original level whose weight each new level inherits.
    pub level_map: Vec<usize>,
    /// dim(V_ℓ ∩ V′) for ℓ = 0..=s.
    pub intersection_dims: Vec<usize>,
}

/// Flag {V_ℓ ∩ V′} with duplicates removed, weighted by the max-of-S rule.
pub fn induced_flag(flag: &Flag, sub: &CMatrix, w: &WeightVector) -> Result<InducedFlag> {
    if sub.nrows() != flag.ambient() {
        return Err(Error::DimensionMismatch(format!(
            "subspace lives in dimension {} but flag in {}",
            sub.nrows(),
            flag.ambient()
        )));
    }
    let k = sub.ncols();
    if k == 0 || numerical_rank(sub) < k {
        return Err(Error::InvalidFlag("subspace basis is rank deficient".into()));
    }
    if w.len() != flag.depth() + 1 {
        return Err(Error::InvalidWeights(format!(
            "{} weights for a flag with {} graded pieces",
            w.len(),
            flag.depth() + 1
        )));
    }
    let coords = left_inverse(sub)?;
    let mut intersections = Vec::with_capacity(flag.depth() + 1);
    intersections.push(identity(k));
    for l in 1..=flag.depth() {
        let inter = intersect(&flag.level(l), sub);
        intersections.push(column_space(&(&coords * inter)));
    }
    let dims: Vec<usize> = intersections.iter().map(|b| b.ncols()).collect();

    // Group consecutive levels with equal intersection; zero intersections drop out.
    let mut level_map = Vec::new();
    let mut levels = Vec::new();
    let mut l = 0;
    while l < dims.len() && dims[l] > 0 {
        let mut last = l;
        while last + 1 < dims.len() && dims[last + 1] == dims[l] {
            last += 1;
        }
        level_map.push(last);
        levels.push(intersections[l].clone());
        l = last + 1;
    }
    let new_weights = level_map.iter().map(|&l| w.weights()[l]).collect();
    Ok(InducedFlag {
        flag: Flag::new(k, levels.into_iter().skip(1).collect())?,
        weights: WeightVector::new(new_weights)?,
        level_map,
        intersection_dims: dims,
    })
}

/// Positive-definite Hermitian Gram matrix.
#[derive(Clone, Debug)]
pub struct HermitianMetric {
    gram: CMatrix,
}

impl HermitianMetric {
    pub fn new(gram: CMatrix) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::DimensionMismatch("Gram matrix must be square".into()));
        }
        let asym = (&gram - gram.adjoint()).norm();
        if asym > HERMITIAN_TOL * gram.norm().max(1.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "Gram matrix is not Hermitian (asymmetry {asym:.3e})"
            )));
        }
        let gram = hermitian_part(&gram);
        let eigs = hermitian_eigenvalues(&gram);
        if eigs.first().is_some_and(|&e| e <= 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {:.3e} is not positive",
                eigs[0]
            )));
        }
        Ok(Self { gram })
    }

    pub fn identity(n: usize) -> Self {
        Self { gram: identity(n) }
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn condition_number(&self) -> f64 {
        let e = hermitian_eigenvalues(&self.gram);
        match (e.first(), e.last()) {
            (Some(&lo), Some(&hi)) => hi / lo,
            _ => 1.0,
        }
    }

    /// h-adjoint h⁻¹ M* h.
    pub fn adjoint_of(&self, m: &CMatrix) -> CMatrix {
        let h_inv = self.inverse_gram();
        h_inv * m.adjoint() * &self.gram
    }

    pub fn inverse_gram(&self) -> CMatrix {
        hermitian_function(&self.gram, |x| 1.0 / x)
    }

    pub fn sqrt(&self) -> CMatrix {
        hermitian_function(&self.gram, f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> CMatrix {
        hermitian_function(&self.gram, |x| 1.0 / x.sqrt())
    }

    /// Metric restricted to the span of `basis`, in its coordinates.
    pub fn restrict(&self, basis: &CMatrix) -> Result<Self> {
        Self::new(basis.adjoint() * &self.gram * basis)
    }

    /// The metric (u, v) ↦ h(g u, g v).
    pub fn pullback(&self, g: &CMatrix) -> Result<Self> {
        Self::new(g.adjoint() * &self.gram * g)
    }
}

/// h-orthogonal projector P = B (B* h B)⁻¹ B* h onto the span of `sub`.
pub fn orth_projection(h: &HermitianMetric, sub: &CMatrix) -> Result<CMatrix> {
    if sub.nrows() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspace in dimension {} but metric in {}",
            sub.nrows(),
            h.dim()
        )));
    }
    if sub.ncols() == 0 {
        return Ok(CMatrix::zeros(h.dim(), h.dim()));
    }
    if numerical_rank(sub) < sub.ncols() {
        return Err(Error::InvalidFlag("degenerate subspace basis".into()));
    }
    let inner = sub.adjoint() * h.gram() * sub;
    Ok(sub * inverse(&inner)? * sub.adjoint() * h.gram())
}
