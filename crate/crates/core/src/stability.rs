//! Slope stability of weighted parabolic pairs and the Mumford weight of
//! one-parameter subgroups.

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    column_space, hconcat, intersect, numerical_rank, unvectorize, CMatrix, ParabolicAlgebra, Rational,
    CONTAINMENT_TOL,
};
use crate::rep_pair::{induced_subpair, invariance_defect, invariant_subspaces, WeightedPair};
use crate::subspaces::{commutant, random_complex, LatticeStatus, SearchBudget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityStatus {
    Stable,
    SemistableNotStable,
    Unstable,
    Polystable,
    Undecided,
}

impl StabilityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::SemistableNotStable => "semistable_not_stable",
            Self::Unstable => "unstable",
            Self::Polystable => "polystable",
            Self::Undecided => "undecided",
        }
    }

    pub fn is_semistable(self) -> Option<bool> {
        match self {
            Self::Stable | Self::SemistableNotStable | Self::Polystable => Some(true),
            Self::Unstable => Some(false),
            Self::Undecided => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    /// Invariant subspace of maximal slope: destabilizing when unstable, of equal slope when strictly semistable.
    pub witness: Option<CMatrix>,
    pub witness_slope: Option<Rational>,
    pub slope: Rational,
    pub lattice_status: LatticeStatus,
    pub subspaces_checked: usize,
}

pub fn semistable(wp: &WeightedPair, budget: &SearchBudget) -> Result<StabilityVerdict> {
    let slope = wp.slope();
    let report = invariant_subspaces(&wp.pair, budget);
    let mut best: Option<(Rational, CMatrix)> = None;
    for sub in &report.subspaces {
        let mu = wp.subspace_slope(sub)?;
        if best.as_ref().is_none_or(|(b, _)| mu > *b) {
            best = Some((mu, sub.clone()));
        }
    }
    let complete = report.lattice_status == LatticeStatus::Complete;
    let status = match &best {
        Some((mu, _)) if *mu > slope => StabilityStatus::Unstable,
        _ if !complete => StabilityStatus::Undecided,
        Some((mu, _)) if *mu == slope => StabilityStatus::SemistableNotStable,
        _ => StabilityStatus::Stable,
    };
    let (witness_slope, witness) = match best {
        Some((mu, q)) if mu >= slope => (Some(mu), Some(q)),
        _ => (None, None),
    };
    Ok(StabilityVerdict {
        status,
        witness,
        witness_slope,
        slope,
        lattice_status: report.lattice_status,
        subspaces_checked: report.subspaces.len(),
    })
}

#[derive(Clone, Debug)]
pub struct PolystableReport {
    /// Stable, Polystable, SemistableNotStable (indecomposable or with a non-polystable summand), Unstable or Undecided.
    pub status: StabilityStatus,
    pub polystable: Option<bool>,
    /// Orthonormal bases of the stable summands when polystable.
    pub summands: Vec<CMatrix>,
}

/// Vectorized basis of End(pair) = commutant of ρ ∩ ⋂ᵢ 𝔭ᵢ.
pub fn endomorphism_basis(wp: &WeightedPair) -> CMatrix {
    let r = wp.rank();
    let mut basis = commutant(wp.pair.images(), r);
    for f in wp.pair.flags() {
        if basis.ncols() == 0 {
            break;
        }
        basis = intersect(&basis, &ParabolicAlgebra::of(f).basis);
    }
    basis
}

/// Splits ℂʳ by the generalized eigenspaces of a random endomorphism of the pair.
fn split_by_endomorphism(wp: &WeightedPair, seed: u64) -> Result<Option<Vec<CMatrix>>> {
    let r = wp.rank();
    let basis = endomorphism_basis(wp);
    if basis.ncols() <= 1 {
        return Ok(None);
    }
    let mut rng = crate::sampling::rng(seed);
    let coeffs: Vec<_> = (0..basis.ncols()).map(|_| random_complex(&mut rng)).collect();
    let v = &basis * crate::linalg::CVector::from_vec(coeffs);
    let x = unvectorize(v.as_slice(), r, r);
    let eigs = crate::linalg::eigenvalues(&x)?;
    let clusters = crate::linalg::cluster_eigenvalues(&eigs, 1e-6);
    if clusters.len() <= 1 {
        return Ok(None);
    }
    let scale = crate::linalg::frobenius(&x).max(1.0);
    let mut parts = Vec::with_capacity(clusters.len());
    for (lambda, mult) in clusters {
        let shifted = &x - CMatrix::identity(r, r) * lambda;
        let mut power = CMatrix::identity(r, r);
        for _ in 0..mult {
            power *= &shifted;
        }
        let tol = 1e-9 * scale.powi(mult as i32);
        let w = crate::linalg::null_space_abs(&power, tol);
        if w.ncols() != mult {
            return Ok(None);
        }
        parts.push(w);
    }
    if numerical_rank(&hconcat(&parts.iter().collect::<Vec<_>>())) != r {
        return Ok(None);
    }
    Ok(Some(parts))
}

/// Polystability by recursive splitting along End(pair).
pub fn polystable(wp: &WeightedPair, budget: &SearchBudget) -> Result<PolystableReport> {
    let verdict = semistable(wp, budget)?;
    match verdict.status {
        StabilityStatus::Stable => {
            return Ok(PolystableReport {
                status: StabilityStatus::Stable,
                polystable: Some(true),
                summands: vec![CMatrix::identity(wp.rank(), wp.rank())],
            })
        }
        StabilityStatus::Unstable => {
            return Ok(PolystableReport { status: StabilityStatus::Unstable, polystable: Some(false), summands: vec![] })
        }
        StabilityStatus::Undecided => {
            return Ok(PolystableReport { status: StabilityStatus::Undecided, polystable: None, summands: vec![] })
        }
        _ => {}
    }
    let not_polystable =
        || PolystableReport { status: StabilityStatus::SemistableNotStable, polystable: Some(false), summands: vec![] };
    let Some(parts) = split_by_endomorphism(wp, budget.seed)? else {
        return Ok(not_polystable());
    };
    let mut summands = Vec::new();
    for part in parts {
        let q = column_space(&part);
        let sub = induced_subpair(wp, &q)?;
        let inner = polystable(&sub, budget)?;
        match inner.polystable {
            Some(true) => summands.extend(inner.summands.iter().map(|s| &q * s)),
            Some(false) => return Ok(not_polystable()),
            None => {
                return Ok(PolystableReport { status: StabilityStatus::Undecided, polystable: None, summands: vec![] })
            }
        }
    }
    Ok(PolystableReport { status: StabilityStatus::Polystable, polystable: Some(true), summands })
}

/// λ(t) acting by t^N on the weight space E_N; the filtration is V^N = ⊕_{M ≥ N} E_M.
#[derive(Clone, Debug)]
pub struct OneParamSubgroup {
    pub weight_spaces: Vec<(i64, CMatrix)>,
}

impl OneParamSubgroup {
    pub fn new(mut weight_spaces: Vec<(i64, CMatrix)>) -> Result<Self> {
        if let Some((n, _)) = weight_spaces.iter().find(|(n, _)| *n < 0) {
            return Err(Error::Precondition(format!("negative exponent {n}")));
        }
        weight_spaces.sort_by_key(|(n, _)| *n);
        if let Some(w) = weight_spaces.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Precondition(format!("exponent {} repeated", w[0].0)));
        }
        let r = weight_spaces.first().map(|(_, b)| b.nrows()).unwrap_or(0);
        let total: usize = weight_spaces.iter().map(|(_, b)| b.ncols()).sum();
        let all = hconcat(&weight_spaces.iter().map(|(_, b)| b).collect::<Vec<_>>());
        if r == 0 || total != r || numerical_rank(&all) != r {
            return Err(Error::Precondition("weight spaces do not decompose the ambient space".into()));
        }
        Ok(Self { weight_spaces })
    }

    /// λ with exponent 1 on `sub` and 0 on its orthogonal complement.
    pub fn from_subspace(sub: &CMatrix) -> Result<Self> {
        let q = column_space(sub);
        let comp = crate::linalg::orthogonal_complement(&q);
        let mut spaces = vec![(1, q)];
        if comp.ncols() > 0 {
            spaces.push((0, comp));
        }
        Self::new(spaces)
    }

    pub fn rank(&self) -> usize {
        self.weight_spaces[0].1.nrows()
    }

    /// V^N for every distinct exponent N, in increasing order.
    pub fn filtration(&self) -> Vec<(i64, CMatrix)> {
        (0..self.weight_spaces.len())
            .map(|k| {
                let blocks: Vec<&CMatrix> = self.weight_spaces[k..].iter().map(|(_, b)| b).collect();
                (self.weight_spaces[k].0, column_space(&hconcat(&blocks)))
            })
            .collect()
    }
}

/// −Σ_N N Σᵢ Σ_ℓ w_ℓ dim((V_ℓ ∩ V^N)/(V_{ℓ+1} ∩ V^N)), for a ρ-invariant filtration.
pub fn mumford_weight(wp: &WeightedPair, lambda: &OneParamSubgroup) -> Result<Rational> {
    if lambda.rank() != wp.rank() {
        return Err(Error::DimensionMismatch(format!(
            "subgroup acts on dimension {} but the pair has rank {}",
            lambda.rank(),
            wp.rank()
        )));
    }
    let filtration = lambda.filtration();
    for (_, v) in &filtration {
        let defect = invariance_defect(&wp.pair, v);
        if defect > CONTAINMENT_TOL {
            return Err(Error::NotInvariant(defect));
        }
    }
    let mut total = Rational::zero();
    for (n, v) in &filtration {
        if *n == 0 {
            continue;
        }
        let mut inner = Rational::zero();
        for (f, w) in wp.pair.flags().iter().zip(&wp.weights) {
            let dims: Vec<usize> = (0..=f.depth() + 1).map(|l| intersect(&f.level(l), v).ncols()).collect();
            for (l, wl) in w.weights().iter().enumerate() {
                inner += *wl * Rational::from_integer((dims[l] - dims[l + 1]) as i64);
            }
        }
        total -= Rational::from_integer(*n) * inner;
    }
    Ok(total)
}

/// λ splitting off the destabilizing witness of an unstable verdict.
pub fn witness_subgroup(verdict: &StabilityVerdict) -> Result<Option<OneParamSubgroup>> {
    match (&verdict.status, &verdict.witness) {
        (StabilityStatus::Unstable, Some(w)) => Ok(Some(OneParamSubgroup::from_subspace(w)?)),
        _ => Ok(None),
    }
}

pub fn endomorphism_dimension(wp: &WeightedPair) -> usize {
    endomorphism_basis(wp).ncols()
}
