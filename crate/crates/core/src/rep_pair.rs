//! Parabolic representation pairs and weighted pairs.

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    column_space, frobenius, identity, induced_flag, inverse, invariance_residual, numerical_rank,
    parabolic_membership, CMatrix, Flag, FlagType, Rational, WeightVector, CONTAINMENT_TOL,
};
use crate::subspaces::{self, LatticeStatus, SearchBudget};
use crate::surface::{evaluate, Assignment, Generator, Presentation, Word};

/// Relator residual below which a pair counts as a homomorphism.
pub const RELATOR_TOL: f64 = 1e-8;

/// Images of the standard generators together with one flag per puncture.
#[derive(Clone, Debug)]
pub struct ParabolicRepPair {
    presentation: Presentation,
    images: Vec<CMatrix>,
    flags: Vec<Flag>,
}

impl ParabolicRepPair {
    /// Checks shapes only; call [`validate`] for the relator and memberships.
    pub fn new(presentation: Presentation, images: Vec<CMatrix>, flags: Vec<Flag>) -> Result<Self> {
        if images.len() != presentation.generator_count() {
            return Err(Error::InvalidPair(format!(
                "expected {} generator images, got {}",
                presentation.generator_count(),
                images.len()
            )));
        }
        if flags.len() != presentation.punctures {
            return Err(Error::InvalidPair(format!(
                "expected {} flags, got {}",
                presentation.punctures,
                flags.len()
            )));
        }
        let r = images[0].nrows();
        if r == 0 {
            return Err(Error::InvalidPair("rank must be positive".into()));
        }
        for (k, m) in images.iter().enumerate() {
            if m.nrows() != r || m.ncols() != r {
                return Err(Error::DimensionMismatch(format!(
                    "image {} is {}x{}, expected {r}x{r}",
                    presentation.generators()[k],
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidPair(format!(
                    "image {} has non-finite entries",
                    presentation.generators()[k]
                )));
            }
            if numerical_rank(m) < r {
                return Err(Error::Singular(format!(
                    "image {} is not invertible",
                    presentation.generators()[k]
                )));
            }
        }
        for (i, f) in flags.iter().enumerate() {
            if f.ambient() != r {
                return Err(Error::DimensionMismatch(format!(
                    "flag {} lives in dimension {}, expected {r}",
                    i + 1,
                    f.ambient()
                )));
            }
        }
        Ok(Self { presentation, images, flags })
    }

    /// The trivial representation with the given flags.
    pub fn trivial(presentation: Presentation, rank: usize, flags: Vec<Flag>) -> Result<Self> {
        Self::new(presentation, vec![identity(rank); presentation.generator_count()], flags)
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn rank(&self) -> usize {
        self.images[0].nrows()
    }

    pub fn images(&self) -> &[CMatrix] {
        &self.images
    }

    pub fn flags(&self) -> &[Flag] {
        &self.flags
    }

    pub fn image(&self, gen: Generator) -> Result<&CMatrix> {
        Ok(&self.images[self.presentation.index_of(gen)?])
    }

    /// ρ(γ_{i+1}) for a zero-based puncture index.
    pub fn gamma(&self, i: usize) -> &CMatrix {
        &self.images[self.presentation.gamma_index(i)]
    }

    pub fn flag_types(&self) -> Vec<FlagType> {
        self.flags.iter().map(Flag::flag_type).collect()
    }

    pub fn evaluate(&self, w: &Word) -> Result<CMatrix> {
        evaluate(&Assignment::new(&self.presentation, &self.images)?, w)
    }

    pub fn relator_residual(&self) -> f64 {
        self.evaluate(&self.presentation.relator())
            .map(|m| frobenius(&(m - identity(self.rank()))))
            .unwrap_or(f64::INFINITY)
    }

    /// The equivalent pair g·ρ·g⁻¹ with flags g·𝓕.
    pub fn conjugate(&self, g: &CMatrix) -> Result<Self> {
        let g_inv = inverse(g)?;
        Ok(Self {
            presentation: self.presentation,
            images: self.images.iter().map(|m| g * m * &g_inv).collect(),
            flags: self.flags.iter().map(|f| f.transformed(g)).collect(),
        })
    }

    /// Flag level bases of every puncture, used to seed subspace searches.
    pub fn flag_levels(&self) -> Vec<CMatrix> {
        self.flags.iter().flat_map(|f| f.subspaces().iter().cloned()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub relator_residual: f64,
    pub memberships: Vec<bool>,
    pub valid: bool,
}

pub fn validate(p: &ParabolicRepPair) -> ValidationReport {
    let relator_residual = p.relator_residual();
    let memberships: Vec<bool> = (0..p.presentation.punctures)
        .map(|i| parabolic_membership(p.gamma(i), &p.flags[i]).unwrap_or(false))
        .collect();
    let valid = relator_residual < RELATOR_TOL && memberships.iter().all(|&b| b);
    ValidationReport { relator_residual, memberships, valid }
}

/// A pair with one weight vector per puncture.
#[derive(Clone, Debug)]
pub struct WeightedPair {
    pub pair: ParabolicRepPair,
    pub weights: Vec<WeightVector>,
}

impl WeightedPair {
    pub fn new(pair: ParabolicRepPair, weights: Vec<WeightVector>) -> Result<Self> {
        if weights.len() != pair.flags.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weight vectors for {} punctures",
                weights.len(),
                pair.flags.len()
            )));
        }
        for (i, (w, f)) in weights.iter().zip(&pair.flags).enumerate() {
            if w.len() != f.depth() + 1 {
                return Err(Error::InvalidWeights(format!(
                    "puncture {} has {} weights but {} graded pieces",
                    i + 1,
                    w.len(),
                    f.depth() + 1
                )));
            }
        }
        Ok(Self { pair, weights })
    }

    pub fn rank(&self) -> usize {
        self.pair.rank()
    }

    pub fn degree(&self) -> Rational {
        self.weights
            .iter()
            .zip(self.pair.flag_types())
            .map(|(w, t)| w.pairing(&t))
            .sum()
    }

    pub fn slope(&self) -> Rational {
        self.degree() / Rational::from_integer(self.rank() as i64)
    }

    /// Weighted degree of the sub-pair induced on an invariant subspace,
    /// computed from intersection dimensions without building the sub-pair.
    pub fn subspace_degree(&self, sub: &CMatrix) -> Result<Rational> {
        let mut total = Rational::zero();
        for (w, f) in self.weights.iter().zip(&self.pair.flags) {
            let ind = induced_flag(f, sub, w)?;
            total += ind.weights.pairing(&ind.flag.flag_type());
        }
        Ok(total)
    }

    pub fn subspace_slope(&self, sub: &CMatrix) -> Result<Rational> {
        let k = column_space(sub).ncols();
        Ok(self.subspace_degree(sub)? / Rational::from_integer(k as i64))
    }

    pub fn conjugate(&self, g: &CMatrix) -> Result<Self> {
        Ok(Self { pair: self.pair.conjugate(g)?, weights: self.weights.clone() })
    }
}

pub fn degree_slope(wp: &WeightedPair) -> (Rational, Rational) {
    (wp.degree(), wp.slope())
}

#[derive(Clone, Debug)]
pub struct InvariantSubspaceReport {
    /// Orthonormal bases of the proper nonzero ρ-invariant subspaces found.
    pub subspaces: Vec<CMatrix>,
    pub lattice_status: LatticeStatus,
    pub algebra_dim: usize,
}

pub fn invariant_subspaces(p: &ParabolicRepPair, budget: &SearchBudget) -> InvariantSubspaceReport {
    let lat = subspaces::invariant_subspaces(&p.images, p.rank(), &p.flag_levels(), budget);
    InvariantSubspaceReport {
        subspaces: lat.subspaces,
        lattice_status: lat.status,
        algebra_dim: lat.algebra_dim,
    }
}

/// Largest invariance residual of `sub` over all generator images.
pub fn invariance_defect(p: &ParabolicRepPair, sub: &CMatrix) -> f64 {
    let q = column_space(sub);
    p.images.iter().map(|m| invariance_residual(m, &q)).fold(0.0, f64::max)
}

/// The weighted pair induced on a ρ-invariant subspace, in an orthonormal basis of it.
pub fn induced_subpair(wp: &WeightedPair, sub: &CMatrix) -> Result<WeightedPair> {
    let q = column_space(sub);
    if q.ncols() != sub.ncols() || q.ncols() == 0 {
        return Err(Error::InvalidFlag("subspace basis is rank deficient".into()));
    }
    let defect = invariance_defect(&wp.pair, &q);
    if defect > CONTAINMENT_TOL {
        return Err(Error::NotInvariant(defect));
    }
    let images = wp.pair.images.iter().map(|m| q.adjoint() * m * &q).collect();
    let mut flags = Vec::with_capacity(wp.weights.len());
    let mut weights = Vec::with_capacity(wp.weights.len());
    for (f, w) in wp.pair.flags.iter().zip(&wp.weights) {
        let ind = induced_flag(f, &q, w)?;
        flags.push(ind.flag);
        weights.push(ind.weights);
    }
    WeightedPair::new(ParabolicRepPair::new(wp.pair.presentation, images, flags)?, weights)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeligneSimpsonCertificate {
    pub memberships: Vec<bool>,
    pub product_residual: f64,
    pub lattice_status: LatticeStatus,
    /// Dimensions of the common invariant subspaces found.
    pub invariant_dims: Vec<usize>,
    pub irreducible: bool,
    pub solution: bool,
    /// Zero-based punctures whose matrix leaves its flag.
    pub failed_memberships: Vec<usize>,
}

/// Checks a proposed solution A₁⋯A_n = Id, Aᵢ ∈ P_{𝓕ᵢ}, with no common invariant subspace.
pub fn deligne_simpson_certificate(
    matrices: &[CMatrix],
    flags: &[Flag],
    budget: &SearchBudget,
) -> Result<DeligneSimpsonCertificate> {
    if matrices.is_empty() || matrices.len() != flags.len() {
        return Err(Error::InvalidPair(format!(
            "{} matrices and {} flags",
            matrices.len(),
            flags.len()
        )));
    }
    let r = matrices[0].nrows();
    let mut memberships = Vec::with_capacity(matrices.len());
    for (m, f) in matrices.iter().zip(flags) {
        memberships.push(parabolic_membership(m, f)?);
    }
    let mut prod = identity(r);
    for m in matrices {
        prod *= m;
    }
    let product_residual = frobenius(&(prod - identity(r)));
    let levels: Vec<CMatrix> = flags.iter().flat_map(|f| f.subspaces().iter().cloned()).collect();
    let lat = subspaces::invariant_subspaces(matrices, r, &levels, budget);
    let irreducible = lat.subspaces.is_empty() && lat.status == LatticeStatus::Complete;
    let failed_memberships: Vec<usize> =
        memberships.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect();
    let solution = failed_memberships.is_empty() && product_residual < RELATOR_TOL && irreducible;
    Ok(DeligneSimpsonCertificate {
        memberships,
        product_residual,
        lattice_status: lat.status,
        invariant_dims: lat.subspaces.iter().map(|q| q.ncols()).collect(),
        irreducible,
        solution,
        failed_memberships,
    })
}
