//! The star-shaped quiver with loops attached to a surface with flagged punctures.
//!
//! The central vertex u carries loops a_j, b_j (handles) and c⁽ⁱ⁾ (punctures).
//! Puncture i contributes an arm u⁽ⁱ⁾_{s_i} → … → u⁽ⁱ⁾_1 → u of injective
//! maps e⁽ⁱ⁾_ℓ, with a loop c⁽ⁱ⁾_ℓ at every arm vertex.

use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::json::{matrix_to_json, rational_to_json};
use crate::linalg::{
    column_space, frobenius, identity, null_space_floor, numerical_rank, CMatrix, Flag, FlagType, Rational,
    WeightVector, CONTAINMENT_TOL,
};
use crate::rep_pair::{ParabolicRepPair, RELATOR_TOL};
use crate::subspaces::{self, LatticeStatus, SearchBudget};
use crate::surface::Presentation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vertex {
    Center,
    /// Arm vertex at zero-based puncture `puncture`, level `level ≥ 1`.
    Arm { puncture: usize, level: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrowKind {
    A(usize),
    B(usize),
    /// Boundary loop c⁽ⁱ⁾ at u.
    C(usize),
    /// e⁽ⁱ⁾_ℓ: u⁽ⁱ⁾_ℓ → u⁽ⁱ⁾_{ℓ−1}.
    E { puncture: usize, level: usize },
    /// Loop c⁽ⁱ⁾_ℓ at u⁽ⁱ⁾_ℓ.
    CL { puncture: usize, level: usize },
}

#[derive(Clone, Debug)]
pub struct Arrow {
    pub name: String,
    pub kind: ArrowKind,
    pub src: usize,
    pub tgt: usize,
}

#[derive(Clone, Debug)]
pub struct StarQuiver {
    pub genus: usize,
    pub punctures: usize,
    pub vertices: Vec<Vertex>,
    pub arrows: Vec<Arrow>,
    /// s_i per puncture.
    pub depths: Vec<usize>,
}

impl StarQuiver {
    pub fn vertex_name(&self, v: usize) -> String {
        match self.vertices[v] {
            Vertex::Center => "u".into(),
            Vertex::Arm { puncture, level } => format!("u{}.{}", puncture + 1, level),
        }
    }

    pub fn vertex_index(&self, v: Vertex) -> usize {
        match v {
            Vertex::Center => 0,
            Vertex::Arm { puncture, level } => {
                1 + self.depths[..puncture].iter().sum::<usize>() + level - 1
            }
        }
    }

    /// Arm vertex index, with level 0 meaning the centre.
    fn arm_vertex(&self, puncture: usize, level: usize) -> usize {
        if level == 0 {
            0
        } else {
            self.vertex_index(Vertex::Arm { puncture, level })
        }
    }

    pub fn arrow_index(&self, kind: ArrowKind) -> usize {
        self.arrows.iter().position(|a| a.kind == kind).expect("arrow exists")
    }
}

/// Dimension per vertex, in vertex order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimVector(pub Vec<usize>);

pub fn build_star_quiver(genus: usize, punctures: usize, types: &[FlagType]) -> Result<(StarQuiver, DimVector)> {
    if types.len() != punctures || punctures == 0 {
        return Err(Error::InvalidFlag(format!("{} flag types for {punctures} punctures", types.len())));
    }
    let r = types[0].rank();
    if let Some(bad) = types.iter().position(|t| t.rank() != r) {
        return Err(Error::InvalidFlag(format!(
            "flag type at puncture {} has rank {}, expected {r}",
            bad + 1,
            types[bad].rank()
        )));
    }
    let mut vertices = vec![Vertex::Center];
    let mut dims = vec![r];
    for (i, t) in types.iter().enumerate() {
        let level_dims = t.level_dims();
        for level in 1..=t.depth() {
            vertices.push(Vertex::Arm { puncture: i, level });
            dims.push(level_dims[level]);
        }
    }
    let depths: Vec<usize> = types.iter().map(FlagType::depth).collect();
    let mut q = StarQuiver { genus, punctures, vertices, arrows: Vec::new(), depths };
    let mut arrows = Vec::new();
    for j in 1..=genus {
        arrows.push(Arrow { name: format!("a{j}"), kind: ArrowKind::A(j), src: 0, tgt: 0 });
    }
    for j in 1..=genus {
        arrows.push(Arrow { name: format!("b{j}"), kind: ArrowKind::B(j), src: 0, tgt: 0 });
    }
    for i in 0..punctures {
        arrows.push(Arrow { name: format!("c{}", i + 1), kind: ArrowKind::C(i), src: 0, tgt: 0 });
    }
    for i in 0..punctures {
        for level in 1..=q.depths[i] {
            let src = q.arm_vertex(i, level);
            let tgt = q.arm_vertex(i, level - 1);
            arrows.push(Arrow { name: format!("e{}.{level}", i + 1), kind: ArrowKind::E { puncture: i, level }, src, tgt });
        }
        for level in 1..=q.depths[i] {
            let v = q.arm_vertex(i, level);
            arrows.push(Arrow { name: format!("c{}.{level}", i + 1), kind: ArrowKind::CL { puncture: i, level }, src: v, tgt: v });
        }
    }
    q.arrows = arrows;
    Ok((q, DimVector(dims)))
}

/// Rational weight per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuiverWeight(pub Vec<Rational>);

impl QuiverWeight {
    pub fn pairing(&self, d: &[usize]) -> Rational {
        self.0.iter().zip(d).map(|(w, &k)| *w * Rational::from_integer(k as i64)).sum()
    }

    /// The weights scaled by the least common denominator.
    pub fn integral(&self) -> (Vec<i64>, i64) {
        let lcm = self.0.iter().fold(1i64, |acc, w| acc.lcm(w.denom()));
        (self.0.iter().map(|w| (*w * Rational::from_integer(lcm)).to_integer()).collect(), lcm)
    }
}

/// w_u = −(1/r) Σᵢ Σ_ℓ w_ℓ d_ℓ + Σᵢ w₀ and w_{u⁽ⁱ⁾_ℓ} = w_ℓ − w_{ℓ−1}.
pub fn induced_weight(weights: &[WeightVector], types: &[FlagType]) -> Result<QuiverWeight> {
    if weights.len() != types.len() || types.is_empty() {
        return Err(Error::InvalidWeights(format!("{} weight vectors for {} punctures", weights.len(), types.len())));
    }
    let r = Rational::from_integer(types[0].rank() as i64);
    let mut degree = Rational::zero();
    let mut base = Rational::zero();
    for (w, t) in weights.iter().zip(types) {
        if w.len() != t.dims().len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for a flag with {} graded pieces",
                w.len(),
                t.dims().len()
            )));
        }
        degree += w.pairing(t);
        base += w.weights()[0];
    }
    let mut out = vec![-degree / r + base];
    for w in weights {
        for pair in w.weights().windows(2) {
            out.push(pair[1] - pair[0]);
        }
    }
    Ok(QuiverWeight(out))
}

/// Linear maps on the arrows of a star quiver.
#[derive(Clone, Debug)]
pub struct QuiverRep {
    pub quiver: StarQuiver,
    pub dims: DimVector,
    pub maps: Vec<CMatrix>,
}

impl QuiverRep {
    pub fn new(quiver: StarQuiver, dims: DimVector, maps: Vec<CMatrix>) -> Result<Self> {
        if maps.len() != quiver.arrows.len() {
            return Err(Error::DimensionMismatch(format!("{} maps for {} arrows", maps.len(), quiver.arrows.len())));
        }
        for (a, m) in quiver.arrows.iter().zip(&maps) {
            let want = (dims.0[a.tgt], dims.0[a.src]);
            if m.shape() != want {
                return Err(Error::DimensionMismatch(format!(
                    "map on {} is {}x{}, expected {}x{}",
                    a.name,
                    m.nrows(),
                    m.ncols(),
                    want.0,
                    want.1
                )));
            }
        }
        Ok(Self { quiver, dims, maps })
    }

    pub fn map(&self, kind: ArrowKind) -> &CMatrix {
        &self.maps[self.quiver.arrow_index(kind)]
    }

    pub fn rank(&self) -> usize {
        self.dims.0[0]
    }

    /// Loops at u in generator order a, b, c.
    pub fn center_loops(&self) -> Vec<CMatrix> {
        self.quiver
            .arrows
            .iter()
            .zip(&self.maps)
            .filter(|(a, _)| matches!(a.kind, ArrowKind::A(_) | ArrowKind::B(_) | ArrowKind::C(_)))
            .map(|(_, m)| m.clone())
            .collect()
    }

    /// x_{e_1} ∘ ⋯ ∘ x_{e_ℓ}: the arm space at level ℓ inside ℂʳ.
    pub fn arm_image(&self, puncture: usize, level: usize) -> CMatrix {
        let mut acc = identity(self.rank());
        for l in 1..=level {
            acc = acc * self.map(ArrowKind::E { puncture, level: l });
        }
        acc
    }
}

/// Central loops for the pair: [ρ(α), ρ(β), ρ(γ)] in generator order.
pub fn encode(p: &ParabolicRepPair) -> Result<QuiverRep> {
    let pres = p.presentation();
    let (q, dims) = build_star_quiver(pres.genus, pres.punctures, &p.flag_types())?;
    let mut maps = Vec::with_capacity(q.arrows.len());
    for a in &q.arrows {
        let m = match a.kind {
            ArrowKind::A(j) => p.images()[j - 1].clone(),
            ArrowKind::B(j) => p.images()[pres.genus + j - 1].clone(),
            ArrowKind::C(i) => p.gamma(i).clone(),
            ArrowKind::E { puncture, level } => {
                let f = &p.flags()[puncture];
                let lower = orthonormal_level(f, level)?;
                let upper = orthonormal_level(f, level - 1)?;
                upper.adjoint() * lower
            }
            ArrowKind::CL { puncture, level } => {
                let qb = orthonormal_level(&p.flags()[puncture], level)?;
                qb.adjoint() * p.gamma(puncture) * &qb
            }
        };
        maps.push(m);
    }
    QuiverRep::new(q, dims, maps)
}

fn orthonormal_level(f: &Flag, level: usize) -> Result<CMatrix> {
    let q = f.orthonormal_level(level);
    if level > 0 && q.ncols() != f.level(level).ncols() {
        return Err(Error::InvalidFlag(format!("flag level {level} basis is rank deficient")));
    }
    Ok(q)
}

/// Checks injectivity, arm commutation and the relator, naming the first failure.
pub fn check_locus(x: &QuiverRep) -> Result<()> {
    for (a, m) in x.quiver.arrows.iter().zip(&x.maps) {
        if numerical_rank(m) < m.ncols() {
            return Err(Error::Locus { invariant: "injectivity", detail: format!("map on {} is not injective", a.name) });
        }
    }
    for i in 0..x.quiver.punctures {
        for level in 1..=x.quiver.depths[i] {
            let upper_loop = if level == 1 { x.map(ArrowKind::C(i)) } else { x.map(ArrowKind::CL { puncture: i, level: level - 1 }) };
            let e = x.map(ArrowKind::E { puncture: i, level });
            let lower_loop = x.map(ArrowKind::CL { puncture: i, level });
            let defect = frobenius(&(upper_loop * e - e * lower_loop));
            if defect > CONTAINMENT_TOL * (frobenius(upper_loop) + 1.0) {
                return Err(Error::Locus {
                    invariant: "commutation",
                    detail: format!("arm {} level {level} commutation defect {defect:.3e}", i + 1),
                });
            }
        }
    }
    let r = x.rank();
    let g = x.quiver.genus;
    let mut prod = identity(r);
    for j in 1..=g {
        let a = x.map(ArrowKind::A(j));
        let b = x.map(ArrowKind::B(j));
        let (ai, bi) = (crate::linalg::inverse(a)?, crate::linalg::inverse(b)?);
        prod = prod * a * b * ai * bi;
    }
    for i in 0..x.quiver.punctures {
        prod *= x.map(ArrowKind::C(i));
    }
    let residual = frobenius(&(prod - identity(r)));
    if residual >= RELATOR_TOL {
        return Err(Error::Locus { invariant: "relator", detail: format!("relator residual {residual:.3e}") });
    }
    Ok(())
}

/// The pair with ρ from the loops at u and flags from composed arm inclusions.
pub fn decode(x: &QuiverRep) -> Result<ParabolicRepPair> {
    check_locus(x)?;
    let pres = Presentation::new(x.quiver.genus, x.quiver.punctures)?;
    let images = x.center_loops();
    let flags = (0..x.quiver.punctures)
        .map(|i| Flag::new(x.rank(), (1..=x.quiver.depths[i]).map(|l| x.arm_image(i, l)).collect()))
        .collect::<Result<Vec<_>>>()?;
    ParabolicRepPair::new(pres, images, flags)
}

/// A subrepresentation: one orthonormal basis per vertex.
#[derive(Clone, Debug)]
pub struct Subrepresentation {
    pub spaces: Vec<CMatrix>,
}

impl Subrepresentation {
    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.ncols()).collect()
    }
}

/// The subrepresentation with centre `center` and maximal arm spaces
/// V′_ℓ = x_{e_ℓ}⁻¹(V′_{ℓ−1}).
pub fn maximal_subrepresentation(x: &QuiverRep, center: &CMatrix) -> Subrepresentation {
    let mut spaces = vec![CMatrix::zeros(0, 0); x.quiver.vertices.len()];
    spaces[0] = column_space(center);
    for i in 0..x.quiver.punctures {
        let mut above = spaces[0].clone();
        for level in 1..=x.quiver.depths[i] {
            let e = x.map(ArrowKind::E { puncture: i, level });
            let out = identity(above.nrows()) - &above * above.adjoint();
            let pre = if above.ncols() == 0 { CMatrix::zeros(e.ncols(), 0) } else { null_space_floor(&(out * e), 1.0) };
            let v = x.quiver.arm_vertex(i, level);
            spaces[v] = pre.clone();
            above = pre;
        }
    }
    Subrepresentation { spaces }
}

/// Largest relative residual of the subrepresentation closure conditions.
pub fn subrepresentation_defect(x: &QuiverRep, s: &Subrepresentation) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, m) in x.quiver.arrows.iter().zip(&x.maps) {
        let src = &s.spaces[a.src];
        let tgt = &s.spaces[a.tgt];
        if src.ncols() == 0 {
            continue;
        }
        let img = m * src;
        let resid = &img - tgt * (tgt.adjoint() * &img);
        worst = worst.max(frobenius(&resid) / frobenius(m).max(1.0));
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KingStatus {
    Stable,
    Semistable,
    Unstable,
    Undecided,
}

impl KingStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Semistable => "semistable",
            Self::Unstable => "unstable",
            Self::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Debug)]
pub struct KingVerdict {
    pub status: KingStatus,
    /// Subrepresentation of largest pairing found (positive when unstable, zero when strictly semistable).
    pub witness: Option<Subrepresentation>,
    pub witness_pairing: Option<Rational>,
    pub lattice_status: LatticeStatus,
    /// Σ w_v d_v over the whole representation; nonzero values are a warning.
    pub total_pairing: Rational,
    pub subrepresentations_checked: usize,
}

impl KingVerdict {
    pub fn is_semistable(&self) -> Option<bool> {
        match self.status {
            KingStatus::Stable | KingStatus::Semistable => Some(true),
            KingStatus::Unstable => Some(false),
            KingStatus::Undecided => None,
        }
    }
}

/// King (semi)stability through subrepresentations generated at the centre.
///
/// Every proper subrepresentation with centre V′ ⊊ ℂʳ pairs no higher than
/// the one with maximal arms, and subrepresentations with centre ℂʳ and
/// smaller arms pair strictly below the total, so the search reduces to
/// invariant subspaces of the central loops when every arm weight is positive.
pub fn king_semistable(x: &QuiverRep, w: &QuiverWeight, budget: &SearchBudget) -> Result<KingVerdict> {
    if w.0.len() != x.quiver.vertices.len() {
        return Err(Error::InvalidWeights(format!("{} vertex weights for {} vertices", w.0.len(), x.quiver.vertices.len())));
    }
    let total_pairing = w.pairing(&x.dims.0);
    let arms_positive = w.0.iter().skip(1).all(|v| v.is_positive());
    let r = x.rank();
    let seeds: Vec<CMatrix> = (0..x.quiver.punctures)
        .flat_map(|i| (1..=x.quiver.depths[i]).map(move |l| (i, l)))
        .map(|(i, l)| x.arm_image(i, l))
        .collect();
    let lattice = subspaces::invariant_subspaces(&x.center_loops(), r, &seeds, budget);
    let mut best: Option<(Rational, Subrepresentation)> = None;
    let mut checked = 0;
    for center in &lattice.subspaces {
        let sub = maximal_subrepresentation(x, center);
        if subrepresentation_defect(x, &sub) > CONTAINMENT_TOL {
            continue;
        }
        checked += 1;
        let theta = w.pairing(&sub.dims());
        if best.as_ref().is_none_or(|(b, _)| theta > *b) {
            best = Some((theta, sub));
        }
    }
    let complete = lattice.status == LatticeStatus::Complete && arms_positive;
    let status = match &best {
        Some((theta, _)) if theta.is_positive() => KingStatus::Unstable,
        _ if !complete => KingStatus::Undecided,
        Some((theta, _)) if theta.is_zero() => KingStatus::Semistable,
        _ => KingStatus::Stable,
    };
    let (witness_pairing, witness) = match best {
        Some((t, s)) if status != KingStatus::Stable && !t.is_negative() => (Some(t), Some(s)),
        _ => (None, None),
    };
    Ok(KingVerdict {
        status,
        witness,
        witness_pairing,
        lattice_status: if complete { LatticeStatus::Complete } else { LatticeStatus::Sampled },
        total_pairing,
        subrepresentations_checked: checked,
    })
}

/// JSON export of the quiver, dimension vector, weights and maps.
pub fn export_json(x: &QuiverRep, w: Option<&QuiverWeight>) -> Value {
    let q = &x.quiver;
    let vertices: Vec<Value> = (0..q.vertices.len()).map(|v| json!(q.vertex_name(v))).collect();
    let arrows: Vec<Value> = q
        .arrows
        .iter()
        .map(|a| json!({"name": a.name, "src": q.vertex_name(a.src), "tgt": q.vertex_name(a.tgt)}))
        .collect();
    let mut dims = Map::new();
    for (v, d) in x.dims.0.iter().enumerate() {
        dims.insert(q.vertex_name(v), json!(d));
    }
    let mut maps = Map::new();
    for (a, m) in q.arrows.iter().zip(&x.maps) {
        maps.insert(a.name.clone(), matrix_to_json(m));
    }
    let mut out = json!({"vertices": vertices, "arrows": arrows, "dims": dims, "maps": maps});
    if let Some(w) = w {
        let mut ws = Map::new();
        for (v, wv) in w.0.iter().enumerate() {
            ws.insert(q.vertex_name(v), rational_to_json(wv));
        }
        let (ints, scale) = w.integral();
        out["weights"] = Value::Object(ws);
        out["integral_weights"] = json!({"scale": scale, "weights": ints});
        out["total_pairing"] = rational_to_json(&w.pairing(&x.dims.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, subspace_distance};
    use crate::rep_pair::validate;
    use crate::sampling::{random_full_flag_pair, rng};

    fn q(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn quiver_shapes() {
        let (qv, d) = build_star_quiver(1, 1, &[FlagType::full(2)]).unwrap();
        assert_eq!(qv.vertices.len(), 2);
        let names: Vec<&str> = qv.arrows.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, vec!["a1", "b1", "c1", "e1.1", "c1.1"]);
        assert_eq!(d.0, vec![2, 1]);

        let (qv, d) = build_star_quiver(2, 1, &[FlagType::trivial(3)]).unwrap();
        assert_eq!(qv.vertices.len(), 1);
        assert_eq!(qv.arrows.len(), 5);
        assert_eq!(d.0, vec![3]);

        let (qv, d) = build_star_quiver(0, 3, &vec![FlagType::full(2); 3]).unwrap();
        assert_eq!(qv.vertices.len(), 4);
        assert_eq!(qv.arrows.len(), 9);
        assert_eq!(d.0, vec![2, 1, 1, 1]);

        assert!(build_star_quiver(0, 2, &[FlagType::full(2), FlagType::full(3)]).is_err());
    }

    #[test]
    fn weight_examples() {
        let w = induced_weight(&[WeightVector::new(vec![q(-1), q(1)]).unwrap()], &[FlagType::full(2)]).unwrap();
        assert_eq!(w.0, vec![q(-1), q(2)]);
        assert_eq!(w.pairing(&[2, 1]), q(0));

        let w = induced_weight(&[WeightVector::new(vec![q(0)]).unwrap()], &[FlagType::trivial(2)]).unwrap();
        assert_eq!(w.0, vec![q(0)]);

        let wv = WeightVector::new(vec![q(0), q(1)]).unwrap();
        let w = induced_weight(&[wv.clone(), wv], &[FlagType::full(2), FlagType::full(2)]).unwrap();
        assert_eq!(w.0, vec![q(-1), q(1), q(1)]);
        assert_eq!(w.pairing(&[2, 1, 1]), q(0));

        let w = QuiverWeight(vec![Rational::new(-1, 2), Rational::new(1, 3)]);
        assert_eq!(w.integral(), (vec![-3, 2], 6));
    }

    #[test]
    fn encode_trivial_pair() {
        let p = Presentation::new(1, 1).unwrap();
        let pair = ParabolicRepPair::trivial(p, 2, vec![Flag::standard(&FlagType::full(2))]).unwrap();
        let x = encode(&pair).unwrap();
        assert_eq!(x.map(ArrowKind::CL { puncture: 0, level: 1 }), &identity(1));
        assert_eq!(x.map(ArrowKind::E { puncture: 0, level: 1 }), &from_real_rows(&[&[1.0], &[0.0]]));
        check_locus(&x).unwrap();
        let back = decode(&x).unwrap();
        assert!(back.flags()[0].distance(&pair.flags()[0]) < 1e-12);
    }

    #[test]
    fn round_trip_random_pairs() {
        let mut g = rng(21);
        for _ in 0..5 {
            let pair = random_full_flag_pair(&mut g, 1, 2, 3).unwrap();
            let x = encode(&pair).unwrap();
            let back = decode(&x).unwrap();
            assert!(validate(&back).valid);
            for (a, b) in back.flags().iter().zip(pair.flags()) {
                assert!(a.distance(b) < 1e-9);
            }
            for (a, b) in back.images().iter().zip(pair.images()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_reports_violations() {
        let pair = random_full_flag_pair(&mut rng(2), 1, 1, 2).unwrap();
        let mut x = encode(&pair).unwrap();
        let e = x.quiver.arrow_index(ArrowKind::E { puncture: 0, level: 1 });
        let saved = x.maps[e].clone();
        x.maps[e] = CMatrix::zeros(2, 1);
        assert!(matches!(decode(&x), Err(Error::Locus { invariant: "injectivity", .. })));
        x.maps[e] = saved;
        let c = x.quiver.arrow_index(ArrowKind::A(1));
        x.maps[c][(0, 0)] += crate::linalg::real(1e-3);
        assert!(matches!(decode(&x), Err(Error::Locus { invariant: "relator", .. })));
    }

    #[test]
    fn king_on_diagonal_sum() {
        let p = Presentation::new(1, 1).unwrap();
        let images = vec![from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]]), identity(2), identity(2)];
        let e1 = from_real_rows(&[&[1.0], &[0.0]]);
        let pair = ParabolicRepPair::new(p, images, vec![Flag::new(2, vec![e1.clone()]).unwrap()]).unwrap();
        let w = induced_weight(&[WeightVector::new(vec![q(-1), q(1)]).unwrap()], &pair.flag_types()).unwrap();
        let v = king_semistable(&encode(&pair).unwrap(), &w, &SearchBudget::default()).unwrap();
        assert_eq!(v.status, KingStatus::Unstable);
        let wit = v.witness.unwrap();
        assert!(subspace_distance(&wit.spaces[0], &e1) < 1e-9);
        assert_eq!(v.witness_pairing, Some(q(1)));
    }

    #[test]
    fn king_rank_one_is_semistable() {
        let p = Presentation::new(0, 3).unwrap();
        let m = |x: f64| CMatrix::from_element(1, 1, x.into());
        let pair = ParabolicRepPair::new(p, vec![m(2.0), m(0.5), m(1.0)], vec![Flag::trivial(1); 3]).unwrap();
        let w = induced_weight(&vec![WeightVector::new(vec![q(0)]).unwrap(); 3], &pair.flag_types()).unwrap();
        let v = king_semistable(&encode(&pair).unwrap(), &w, &SearchBudget::default()).unwrap();
        assert_eq!(v.is_semistable(), Some(true));
    }
}
