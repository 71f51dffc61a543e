//! Invariant subspaces of a finite family of square matrices.
//!
//! The lattice of common invariant subspaces is enumerated exactly when the
//! generated algebra is all of 𝔤𝔩(r) (no proper subspaces) or contains a
//! nonderogatory element, whose invariant subspaces are the finitely many
//! sums of partial generalized eigenspaces. Otherwise the lattice may be a
//! continuum and the search falls back to seeded sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{
    cluster_eigenvalues, column_space, eigenvalues, hconcat, identity, intersect, is_invariant,
    frobenius, null_space_abs, null_space_floor, numerical_rank, orthogonal_complement, span_sum, subspace_distance, unvectorize,
    vconcat, vectorize, C64, CMatrix, RANK_RTOL,
};

/// Eigenvalues closer than this (relative) are treated as one cluster.
const EIG_CLUSTER_RTOL: f64 = 1e-4;
/// Projector distance below which two subspaces are identified.
const SAME_SUBSPACE_TOL: f64 = 1e-6;
const MAX_ENUMERATION: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeStatus {
    Complete,
    Sampled,
}

#[derive(Clone, Debug)]
pub struct SearchBudget {
    pub seed: u64,
    /// Random vectors spun into cyclic submodules in sampled mode.
    pub random_spins: usize,
    /// Random algebra elements tried when looking for a nonderogatory one.
    pub regular_attempts: usize,
    /// Upper bound on retained subspaces in sampled mode.
    pub max_subspaces: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { seed: 0, random_spins: 16, regular_attempts: 8, max_subspaces: 256 }
    }
}

impl SearchBudget {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SubspaceLattice {
    /// Orthonormal bases of proper nonzero invariant subspaces, sorted by dimension.
    pub subspaces: Vec<CMatrix>,
    pub status: LatticeStatus,
    pub algebra_dim: usize,
}

pub(crate) fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

/// Orthonormal basis (columns are vectorised matrices) of the unital algebra
/// generated by `mats`.
pub fn algebra_closure(mats: &[CMatrix], r: usize) -> CMatrix {
    let mut cols = vec![vectorize(&identity(r))];
    cols.extend(mats.iter().map(vectorize));
    let refs: Vec<CMatrix> = cols.into_iter().map(|c| CMatrix::from_column_slice(r * r, 1, c.as_slice())).collect();
    let mut basis = column_space(&hconcat(&refs.iter().collect::<Vec<_>>()));
    let cap = r.pow(4).max(1);
    for _ in 0..cap {
        if basis.ncols() == r * r {
            break;
        }
        let mut products = vec![basis.clone()];
        for k in 0..basis.ncols() {
            let b = unvectorize(basis.column(k).as_slice(), r, r);
            for m in mats {
                let p = m * &b;
                products.push(CMatrix::from_column_slice(r * r, 1, p.as_slice()));
            }
        }
        let next = column_space(&hconcat(&products.iter().collect::<Vec<_>>()));
        if next.ncols() == basis.ncols() {
            break;
        }
        basis = next;
    }
    basis
}

/// Orthonormal vec-basis of {X : XM = MX for all M}.
pub fn commutant(mats: &[CMatrix], r: usize) -> CMatrix {
    if mats.is_empty() {
        return identity(r * r);
    }
    let id = identity(r);
    let blocks: Vec<CMatrix> = mats
        .iter()
        .map(|m| id.kronecker(m) - m.transpose().kronecker(&id))
        .collect();
    let scale = mats.iter().map(frobenius).fold(1.0, f64::max);
    null_space_floor(&vconcat(&blocks.iter().collect::<Vec<_>>()), scale)
}

fn push_unique(list: &mut Vec<CMatrix>, cand: CMatrix) -> bool {
    let q = column_space(&cand);
    let k = q.ncols();
    if k == 0 || k == q.nrows() {
        return false;
    }
    if list
        .iter()
        .any(|s| s.ncols() == k && subspace_distance(s, &q) < SAME_SUBSPACE_TOL)
    {
        return false;
    }
    list.push(q);
    true
}

fn invariant_under_all(mats: &[CMatrix], q: &CMatrix) -> bool {
    mats.iter().all(|m| is_invariant(m, q))
}

/// Smallest invariant subspace containing the columns of `seed`.
pub fn spin(mats: &[CMatrix], seed: &CMatrix) -> CMatrix {
    let mut q = column_space(seed);
    loop {
        if q.ncols() == 0 || q.ncols() == q.nrows() {
            return q;
        }
        let mut parts = vec![q.clone()];
        parts.extend(mats.iter().map(|m| m * &q));
        let next = column_space(&hconcat(&parts.iter().collect::<Vec<_>>()));
        if next.ncols() == q.ncols() {
            return q;
        }
        q = next;
    }
}

/// Largest M-invariant subspace of span(k) (for invertible or singular M).
fn largest_invariant_inside(m: &CMatrix, k: &CMatrix) -> CMatrix {
    let mut q = column_space(k);
    loop {
        if q.ncols() == 0 {
            return q;
        }
        let outside = identity(q.nrows()) - &q * q.adjoint();
        let preimage = null_space_floor(&(outside * m), frobenius(m));
        let next = intersect(&q, &preimage);
        if next.ncols() == q.ncols() {
            return q;
        }
        q = next;
    }
}

/// Maximal subspaces on which every matrix acts as a scalar.
pub fn common_eigenspaces(mats: &[CMatrix], r: usize) -> Vec<CMatrix> {
    fn recurse(mats: &[CMatrix], space: CMatrix, out: &mut Vec<CMatrix>) {
        let Some((m, rest)) = mats.split_first() else {
            out.push(space);
            return;
        };
        let inv = largest_invariant_inside(m, &space);
        if inv.ncols() == 0 {
            return;
        }
        let restricted = inv.adjoint() * m * &inv;
        let Ok(eigs) = eigenvalues(&restricted) else { return };
        for (lambda, _) in cluster_eigenvalues(&eigs, EIG_CLUSTER_RTOL) {
            let shifted = &restricted - identity(inv.ncols()) * lambda;
            let ker = null_space_floor(&shifted, frobenius(&restricted));
            if ker.ncols() > 0 {
                recurse(rest, &inv * ker, out);
            }
        }
    }
    let mut out = Vec::new();
    recurse(mats, identity(r), &mut out);
    out
}

/// Tries to enumerate the lattice through a nonderogatory element of the algebra.
fn enumerate_via_regular(
    mats: &[CMatrix],
    algebra: &CMatrix,
    r: usize,
    rng: &mut ChaCha8Rng,
    attempts: usize,
) -> Option<Vec<CMatrix>> {
    for _ in 0..attempts {
        let coeffs: Vec<C64> = (0..algebra.ncols()).map(|_| random_complex(rng)).collect();
        let mut v = algebra.column(0) * coeffs[0];
        for (k, c) in coeffs.iter().enumerate().skip(1) {
            v += algebra.column(k) * *c;
        }
        let a = unvectorize(v.as_slice(), r, r);
        let Ok(eigs) = eigenvalues(&a) else { continue };
        let clusters = cluster_eigenvalues(&eigs, EIG_CLUSTER_RTOL);
        // chains[k][j] = ker (a − λ_k)^j, j = 0..=m_k, each of dimension j.
        let mut chains: Vec<Vec<CMatrix>> = Vec::new();
        let mut regular = true;
        for &(lambda, mult) in &clusters {
            let shifted = &a - identity(r) * lambda;
            let scale = shifted.norm().max(f64::MIN_POSITIVE);
            let mut power = identity(r);
            let mut chain = vec![CMatrix::zeros(r, 0)];
            for j in 1..=mult {
                power = &power * &shifted;
                let ker = null_space_abs(&power, RANK_RTOL * scale.powi(j as i32));
                if ker.ncols() != j {
                    regular = false;
                    break;
                }
                chain.push(ker);
            }
            if !regular {
                break;
            }
            chains.push(chain);
        }
        if !regular {
            continue;
        }
        let total: usize = chains.iter().map(|c| c.len()).product();
        if total > MAX_ENUMERATION {
            return None;
        }
        let mut found = Vec::new();
        let mut idx = vec![0usize; chains.len()];
        for _ in 0..total {
            let parts: Vec<&CMatrix> = chains.iter().zip(&idx).map(|(c, &j)| &c[j]).collect();
            let cand = hconcat(&parts);
            let dim = cand.ncols();
            if dim > 0 && dim < r {
                let q = column_space(&cand);
                if q.ncols() == dim && invariant_under_all(mats, &q) {
                    push_unique(&mut found, q);
                }
            }
            for (k, chain) in chains.iter().enumerate() {
                idx[k] += 1;
                if idx[k] < chain.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        return Some(found);
    }
    None
}

/// Common invariant subspaces of `mats` acting on ℂʳ.
///
/// `seeds` are subspaces (typically flag levels) whose intersections with
/// continuum families are worth sampling; they are ignored when the lattice
/// can be enumerated.
pub fn invariant_subspaces(
    mats: &[CMatrix],
    r: usize,
    seeds: &[CMatrix],
    budget: &SearchBudget,
) -> SubspaceLattice {
    if r <= 1 {
        return SubspaceLattice { subspaces: Vec::new(), status: LatticeStatus::Complete, algebra_dim: r * r };
    }
    let algebra = algebra_closure(mats, r);
    let algebra_dim = algebra.ncols();
    if algebra_dim == r * r {
        return SubspaceLattice { subspaces: Vec::new(), status: LatticeStatus::Complete, algebra_dim };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    if let Some(mut found) = enumerate_via_regular(mats, &algebra, r, &mut rng, budget.regular_attempts) {
        sort_by_dim(&mut found);
        return SubspaceLattice { subspaces: found, status: LatticeStatus::Complete, algebra_dim };
    }

    let mut found: Vec<CMatrix> = Vec::new();
    let cap = budget.max_subspaces;
    let joint = common_eigenspaces(mats, r);
    let adjoints: Vec<CMatrix> = mats.iter().map(|m| m.adjoint()).collect();
    let co_joint = common_eigenspaces(&adjoints, r);

    for e in &joint {
        push_unique(&mut found, e.clone());
        for k in 0..e.ncols() {
            push_unique(&mut found, e.columns(k, 1).into_owned());
        }
    }
    for e in &co_joint {
        // The annihilator of a co-invariant subspace is invariant.
        push_unique(&mut found, orthogonal_complement(e));
        for k in 0..e.ncols() {
            push_unique(&mut found, orthogonal_complement(&e.columns(k, 1).into_owned()));
        }
    }

    // Seeds: flag levels, their pairwise intersections, and their meets with joint eigenspaces.
    let mut seed_spaces: Vec<CMatrix> = seeds.iter().map(column_space).filter(|q| q.ncols() > 0).collect();
    let base = seed_spaces.clone();
    for i in 0..base.len() {
        for j in (i + 1)..base.len() {
            let m = intersect(&base[i], &base[j]);
            if m.ncols() > 0 {
                seed_spaces.push(m);
            }
        }
    }
    for e in joint.iter().filter(|e| e.ncols() > 1) {
        for s in &base {
            let m = intersect(e, s);
            if m.ncols() > 0 && m.ncols() < e.ncols() {
                push_unique(&mut found, m.clone());
                seed_spaces.push(m);
            }
        }
        for e2 in co_joint.iter() {
            let comp = orthogonal_complement(e2);
            let m = intersect(e, &comp);
            if m.ncols() > 0 {
                push_unique(&mut found, m);
            }
        }
    }
    for s in &seed_spaces {
        push_unique(&mut found, spin(mats, s));
        for k in 0..s.ncols() {
            push_unique(&mut found, spin(mats, &s.columns(k, 1).into_owned()));
        }
    }
    for _ in 0..budget.random_spins {
        let v = random_matrix(&mut rng, r, 1);
        push_unique(&mut found, spin(mats, &v));
        if let Some(e) = joint.iter().filter(|e| e.ncols() > 1).nth(0) {
            let w = e * random_matrix(&mut rng, e.ncols(), 1);
            push_unique(&mut found, w);
        }
    }
    found.retain(|q| invariant_under_all(mats, q));

    // One round of lattice operations on what was found.
    let snapshot = found.clone();
    'outer: for i in 0..snapshot.len() {
        for j in (i + 1)..snapshot.len() {
            if found.len() >= cap {
                break 'outer;
            }
            let s = span_sum(&snapshot[i], &snapshot[j]);
            if s.ncols() < r && invariant_under_all(mats, &s) {
                push_unique(&mut found, s);
            }
            let m = intersect(&snapshot[i], &snapshot[j]);
            if m.ncols() > 0 && invariant_under_all(mats, &m) {
                push_unique(&mut found, m);
            }
        }
    }
    found.truncate(cap);
    sort_by_dim(&mut found);
    SubspaceLattice { subspaces: found, status: LatticeStatus::Sampled, algebra_dim }
}

fn sort_by_dim(list: &mut [CMatrix]) {
    list.sort_by_key(|q| q.ncols());
}

/// Rank of the commutator set [C_i, C_j] among commutant basis elements.
pub fn commutant_is_commutative(basis: &CMatrix, r: usize) -> bool {
    let mats: Vec<CMatrix> = (0..basis.ncols())
        .map(|k| unvectorize(basis.column(k).as_slice(), r, r))
        .collect();
    for i in 0..mats.len() {
        for j in (i + 1)..mats.len() {
            let c = &mats[i] * &mats[j] - &mats[j] * &mats[i];
            if numerical_rank(&c) > 0 && c.norm() > 1e-9 {
                return false;
            }
        }
    }
    true
}
