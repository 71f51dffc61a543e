//! First- and second-order deformations of a pair through group cohomology.
//!
//! Γ is free on every standard generator except γ_n, so a 1-cocycle is fixed
//! by its values on the other generators and a 1-cochain solving
//! δV = [X, X] is fixed by its free values plus an affine solve for V(γ_n).
//!
//! Second-order data follow the curve convention: a cone vector (X, V)
//! corresponds to ρ_t(s) = exp(X(s)t + V(s)t²)ρ(s) on generators, and then
//! V(ω₁ω₂) = V(ω₁) + Ad V(ω₂) + ½[X(ω₁), Ad X(ω₂)].

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    adjoint_action, column_space, commutator, hconcat, identity, inverse, least_squares, null_space_floor,
    real, unvectorize, vconcat, vectorize, CMatrix, CVector, ParabolicAlgebra, Rational,
};
use crate::rep_pair::ParabolicRepPair;
use crate::surface::Word;

/// Feasibility threshold relative to ‖b‖ + 1.
pub const FEASIBILITY_RTOL: f64 = 1e-7;
/// Tolerance for the tangent preconditions of a supplied vector.
pub const TANGENT_TOL: f64 = 1e-7;

/// Values of a 1-cochain on the standard generators.
#[derive(Clone, Debug, PartialEq)]
pub struct Cocycle1 {
    pub values: Vec<CMatrix>,
}

impl Cocycle1 {
    pub fn zero(generators: usize, r: usize) -> Self {
        Self { values: vec![CMatrix::zeros(r, r); generators] }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { values: self.values.iter().map(|m| m * real(t)).collect() }
    }

    pub fn to_vector(&self) -> CVector {
        let r2 = self.values.first().map_or(0, |m| m.len());
        let mut v = CVector::zeros(r2 * self.values.len());
        for (k, m) in self.values.iter().enumerate() {
            v.rows_mut(k * r2, r2).copy_from(&vectorize(m));
        }
        v
    }

    pub fn from_vector(v: &[crate::linalg::C64], generators: usize, r: usize) -> Self {
        let r2 = r * r;
        Self {
            values: (0..generators).map(|k| unvectorize(&v[k * r2..(k + 1) * r2], r, r)).collect(),
        }
    }
}

/// A first-order deformation of the pair: a cocycle and lifted flag displacements Ỹᵢ.
#[derive(Clone, Debug)]
pub struct TangentVectorPRP {
    pub cocycle: Cocycle1,
    pub flag_displacements: Vec<CMatrix>,
}

impl TangentVectorPRP {
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            cocycle: self.cocycle.scaled(t),
            flag_displacements: self.flag_displacements.iter().map(|y| y * real(t)).collect(),
        }
    }
}

/// A pair together with cached adjoint data.
#[derive(Clone, Debug)]
pub struct DeformationContext {
    pair: ParabolicRepPair,
    r: usize,
    /// Ad_{ρ(s)} per generator, r² × r².
    adjoint: Vec<CMatrix>,
    /// L_s with X(relator) = Σ_s L_s X(s).
    relator_coeffs: Vec<CMatrix>,
    parabolics: Vec<ParabolicAlgebra>,
}

impl DeformationContext {
    pub fn new(pair: &ParabolicRepPair) -> Result<Self> {
        let r = pair.rank();
        let adjoint = pair.images().iter().map(adjoint_action).collect::<Result<Vec<_>>>()?;
        let p = pair.presentation();
        let mut coeffs = vec![CMatrix::zeros(r * r, r * r); p.generator_count()];
        let mut prefix = identity(r);
        for letter in &p.relator().letters {
            let k = p.index_of(letter.gen)?;
            let m = &pair.images()[k];
            if letter.exp > 0 {
                coeffs[k] += adjoint_action(&prefix)?;
                prefix *= m;
            } else {
                prefix *= inverse(m)?;
                coeffs[k] -= adjoint_action(&prefix)?;
            }
        }
        let parabolics = pair.flags().iter().map(ParabolicAlgebra::of).collect();
        Ok(Self { pair: pair.clone(), r, adjoint, relator_coeffs: coeffs, parabolics })
    }

    pub fn pair(&self) -> &ParabolicRepPair {
        &self.pair
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn generator_count(&self) -> usize {
        self.adjoint.len()
    }

    pub fn punctures(&self) -> usize {
        self.parabolics.len()
    }

    pub fn parabolic(&self, i: usize) -> &ParabolicAlgebra {
        &self.parabolics[i]
    }

    pub fn adjoint(&self, k: usize) -> &CMatrix {
        &self.adjoint[k]
    }

    fn gamma_index(&self, i: usize) -> usize {
        self.pair.presentation().gamma_index(i)
    }

    fn last_index(&self) -> usize {
        self.generator_count() - 1
    }

    /// [L_1 | … | L_m]: the linear map X ↦ X(relator).
    pub fn relator_operator(&self) -> CMatrix {
        hconcat(&self.relator_coeffs.iter().collect::<Vec<_>>())
    }

    /// Cocycle extension of generator values to a word.
    pub fn evaluate_cocycle(&self, x: &Cocycle1, w: &Word) -> Result<CMatrix> {
        let p = self.pair.presentation();
        let mut prefix = identity(self.r);
        let mut acc = CMatrix::zeros(self.r, self.r);
        for letter in &w.letters {
            let k = p.index_of(letter.gen)?;
            let m = &self.pair.images()[k];
            if letter.exp > 0 {
                acc += &prefix * &x.values[k] * inverse(&prefix)?;
                prefix *= m;
            } else {
                prefix *= inverse(m)?;
                acc -= &prefix * &x.values[k] * inverse(&prefix)?;
            }
        }
        Ok(acc)
    }

    pub fn relator_defect(&self, x: &Cocycle1) -> f64 {
        (self.relator_operator() * x.to_vector()).norm()
    }

    /// V(relator) for a cochain V under the curve-convention Leibniz rule.
    pub fn evaluate_second_order(&self, x: &Cocycle1, v: &Cocycle1, w: &Word) -> Result<CMatrix> {
        let p = self.pair.presentation();
        let r = self.r;
        let (mut xa, mut va, mut g) = (CMatrix::zeros(r, r), CMatrix::zeros(r, r), identity(r));
        for letter in &w.letters {
            let k = p.index_of(letter.gen)?;
            let m = &self.pair.images()[k];
            let (xs, vs, gs) = if letter.exp > 0 {
                (x.values[k].clone(), v.values[k].clone(), m.clone())
            } else {
                let mi = inverse(m)?;
                let ad = |z: &CMatrix| &mi * z * m;
                (-ad(&x.values[k]), -ad(&v.values[k]), mi)
            };
            let g_inv = inverse(&g)?;
            let ad_x = &g * &xs * &g_inv;
            let ad_v = &g * &vs * &g_inv;
            va = va + ad_v + commutator(&xa, &ad_x) * real(0.5);
            xa += ad_x;
            g *= gs;
        }
        Ok(va)
    }
}

/// Orthonormal basis of Z¹(Γ, 𝔤) as the kernel of X ↦ X(relator), as cocycles.
pub fn z1_basis(ctx: &DeformationContext) -> Vec<Cocycle1> {
    let kernel = null_space_floor(&ctx.relator_operator(), 1.0);
    (0..kernel.ncols())
        .map(|k| Cocycle1::from_vector(kernel.column(k).as_slice(), ctx.generator_count(), ctx.r))
        .collect()
}

fn z1_matrix(ctx: &DeformationContext) -> CMatrix {
    null_space_floor(&ctx.relator_operator(), 1.0)
}

/// Rows selecting the γᵢ block of a stacked cochain vector.
fn gamma_block(ctx: &DeformationContext, basis: &CMatrix, i: usize) -> CMatrix {
    let r2 = ctx.r * ctx.r;
    basis.rows(ctx.gamma_index(i) * r2, r2).into_owned()
}

/// Predicted dimension r²(2g+n−1).
pub fn predicted_tangent_dimension(ctx: &DeformationContext) -> usize {
    let p = ctx.pair.presentation();
    ctx.r * ctx.r * (2 * p.genus + p.punctures - 1)
}

#[derive(Clone, Debug)]
pub struct TangentSpace {
    pub dimension: usize,
    pub predicted: usize,
    pub matches_formula: bool,
    pub basis: Vec<TangentVectorPRP>,
}

/// Solves X(γᵢ) − (Id − Ad_{ρ(γᵢ)})Ỹᵢ ∈ 𝔭ᵢ jointly for X ∈ Z¹ and Ỹᵢ ∈ 𝔭ᵢ^⊥.
pub fn tangent_prp_space(ctx: &DeformationContext) -> TangentSpace {
    let r = ctx.r;
    let r2 = r * r;
    let z1 = z1_matrix(ctx);
    let codims: Vec<usize> = ctx.parabolics.iter().map(|p| p.codim()).collect();
    let y_total: usize = codims.iter().sum();
    let unknowns = z1.ncols() + y_total;
    let mut rows = Vec::new();
    let mut y_at = z1.ncols();
    for (i, par) in ctx.parabolics.iter().enumerate() {
        let k = &par.complement;
        let mut block = CMatrix::zeros(k.ncols(), unknowns);
        block.columns_mut(0, z1.ncols()).copy_from(&(k.adjoint() * gamma_block(ctx, &z1, i)));
        let delta = identity(r2) - ctx.adjoint(ctx.gamma_index(i));
        block.columns_mut(y_at, k.ncols()).copy_from(&(-(k.adjoint() * delta * k)));
        rows.push(block);
        y_at += k.ncols();
    }
    let system = if rows.is_empty() { CMatrix::zeros(0, unknowns) } else { vconcat(&rows.iter().collect::<Vec<_>>()) };
    let kernel = if system.nrows() == 0 { identity(unknowns) } else { null_space_floor(&system, 1.0) };
    let basis = (0..kernel.ncols())
        .map(|c| {
            let col = kernel.column(c);
            let x = &z1 * col.rows(0, z1.ncols());
            let mut at = z1.ncols();
            let flag_displacements = ctx
                .parabolics
                .iter()
                .map(|par| {
                    let k = &par.complement;
                    let y = k * col.rows(at, k.ncols());
                    at += k.ncols();
                    unvectorize(y.as_slice(), r, r)
                })
                .collect();
            TangentVectorPRP {
                cocycle: Cocycle1::from_vector(x.as_slice(), ctx.generator_count(), r),
                flag_displacements,
            }
        })
        .collect();
    let predicted = predicted_tangent_dimension(ctx);
    let dimension = kernel.ncols();
    TangentSpace { dimension, predicted, matches_formula: dimension == predicted, basis }
}

/// Like [`tangent_prp_space`], but a dimension differing from r²(2g+n−1) is an error.
pub fn tangent_prp(ctx: &DeformationContext) -> Result<TangentSpace> {
    let t = tangent_prp_space(ctx);
    if t.matches_formula {
        Ok(t)
    } else {
        Err(Error::FormulaViolation { computed: t.dimension, predicted: t.predicted })
    }
}

#[derive(Clone, Debug)]
pub struct RelativeTangentSummary {
    pub dimension: usize,
    /// r²(2g−1) + Σ dim 𝔭ᵢ.
    pub predicted: usize,
    /// Per puncture ½(r² + Σ_{ℓ≥1} d_ℓ), read literally.
    pub literal_f: Vec<Rational>,
    /// r²(2g−1) + Σ literal fᵢ.
    pub literal_prediction: Rational,
    pub literal_is_integral: bool,
    /// Computed dimension equals `predicted`.
    pub generic: bool,
}

#[derive(Clone, Debug)]
pub struct RelativeTangent {
    pub summary: RelativeTangentSummary,
    pub basis: Vec<Cocycle1>,
}

/// {X ∈ Z¹ : X(γᵢ) ∈ 𝔭ᵢ for all i}.
pub fn tangent_relative(ctx: &DeformationContext) -> RelativeTangent {
    let r = ctx.r;
    let z1 = z1_matrix(ctx);
    let rows: Vec<CMatrix> = ctx
        .parabolics
        .iter()
        .enumerate()
        .map(|(i, par)| par.complement.adjoint() * gamma_block(ctx, &z1, i))
        .collect();
    let system = vconcat(&rows.iter().collect::<Vec<_>>());
    let kernel = if system.nrows() == 0 { identity(z1.ncols()) } else { null_space_floor(&system, 1.0) };
    let coords = &z1 * kernel;
    let basis = (0..coords.ncols())
        .map(|c| Cocycle1::from_vector(coords.column(c).as_slice(), ctx.generator_count(), r))
        .collect();

    let p = ctx.pair.presentation();
    let r2 = (r * r) as i64;
    let base = r2 * (2 * p.genus as i64 - 1);
    let types = ctx.pair.flag_types();
    let predicted = base + types.iter().map(|t| t.parabolic_dimension() as i64).sum::<i64>();
    let literal_f: Vec<Rational> = types
        .iter()
        .map(|t| {
            let tail: usize = t.dims().iter().skip(1).sum();
            Rational::new(r2 + tail as i64, 2)
        })
        .collect();
    let literal_prediction = Rational::from_integer(base) + literal_f.iter().copied().sum::<Rational>();
    let dimension = coords.ncols();
    RelativeTangent {
        summary: RelativeTangentSummary {
            dimension,
            predicted: predicted.max(0) as usize,
            literal_is_integral: literal_prediction.is_integer(),
            literal_f,
            literal_prediction,
            generic: dimension as i64 == predicted,
        },
        basis,
    }
}

/// Witness of second-order extendability.
#[derive(Clone, Debug)]
pub struct ConeCertificate {
    pub feasible: bool,
    pub residual: f64,
    pub rhs_norm: f64,
    /// V on every generator (curve convention).
    pub v: Cocycle1,
    /// Second-order flag displacements Zᵢ (empty for the relative problem).
    pub z: Vec<CMatrix>,
}

fn check_cocycle(ctx: &DeformationContext, x: &Cocycle1) -> Result<()> {
    if x.values.len() != ctx.generator_count() || x.values.iter().any(|m| m.shape() != (ctx.r, ctx.r)) {
        return Err(Error::Precondition("cocycle has the wrong shape".into()));
    }
    let scale = x.to_vector().norm() + 1.0;
    let defect = ctx.relator_defect(x);
    if defect > TANGENT_TOL * scale {
        return Err(Error::Precondition(format!("X is not a cocycle (relator defect {defect:.3e})")));
    }
    Ok(())
}

/// The affine map (free V values) ↦ V(γ_n): V(γ_n) = T·v_free + t₀.
fn last_value_map(ctx: &DeformationContext, x: &Cocycle1) -> Result<(CMatrix, CVector)> {
    let r2 = ctx.r * ctx.r;
    let last = ctx.last_index();
    let l_last_inv = inverse(&ctx.relator_coeffs[last])?;
    let free = ctx.generator_count() - 1;
    let mut t = CMatrix::zeros(r2, r2 * free);
    for k in 0..free {
        t.columns_mut(k * r2, r2).copy_from(&(-(&l_last_inv * &ctx.relator_coeffs[k])));
    }
    let zero = Cocycle1::zero(ctx.generator_count(), ctx.r);
    let q = ctx.evaluate_second_order(x, &zero, &ctx.pair.presentation().relator())?;
    let t0 = -(l_last_inv * vectorize(&q));
    Ok((t, t0))
}

/// Rows expressing vec V(γᵢ) affinely in the free V values: (map, offset).
fn gamma_value_map(ctx: &DeformationContext, i: usize, t: &CMatrix, t0: &CVector) -> (CMatrix, CVector) {
    let r2 = ctx.r * ctx.r;
    let k = ctx.gamma_index(i);
    if k == ctx.last_index() {
        (t.clone(), t0.clone())
    } else {
        let mut sel = CMatrix::zeros(r2, t.ncols());
        sel.view_mut((0, k * r2), (r2, r2)).copy_from(&identity(r2));
        (sel, CVector::zeros(r2))
    }
}

fn assemble_v(ctx: &DeformationContext, sol: &CVector, t: &CMatrix, t0: &CVector) -> Cocycle1 {
    let r2 = ctx.r * ctx.r;
    let free = ctx.generator_count() - 1;
    let v_free = sol.rows(0, r2 * free).into_owned();
    let last = t * &v_free + t0;
    let mut all = v_free.as_slice().to_vec();
    all.extend_from_slice(last.as_slice());
    Cocycle1::from_vector(&all, ctx.generator_count(), ctx.r)
}

/// Decides whether a relative tangent vector extends to second order with fixed flags.
pub fn cone_relative_certificate(ctx: &DeformationContext, x: &Cocycle1) -> Result<ConeCertificate> {
    check_cocycle(ctx, x)?;
    let scale = x.to_vector().norm() + 1.0;
    for (i, par) in ctx.parabolics.iter().enumerate() {
        let xi = &x.values[ctx.gamma_index(i)];
        if par.quotient_coords(&vectorize(xi)).norm() > TANGENT_TOL * scale {
            return Err(Error::Precondition(format!("X(γ{}) is not in the parabolic", i + 1)));
        }
    }
    let (t, t0) = last_value_map(ctx, x)?;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, par) in ctx.parabolics.iter().enumerate() {
        let (map, off) = gamma_value_map(ctx, i, &t, &t0);
        let kh = par.complement.adjoint();
        rows.push(&kh * map);
        rhs.push(-(kh * off));
    }
    solve_stacked(ctx, rows, rhs, 0, &t, &t0)
}

fn solve_stacked(
    ctx: &DeformationContext,
    rows: Vec<CMatrix>,
    rhs: Vec<CVector>,
    extra_unknowns: usize,
    t: &CMatrix,
    t0: &CVector,
) -> Result<ConeCertificate> {
    let r2 = ctx.r * ctx.r;
    let n_free = r2 * (ctx.generator_count() - 1);
    let a = vconcat(&rows.iter().collect::<Vec<_>>());
    let total: usize = rhs.iter().map(|b| b.len()).sum();
    let mut b = CVector::zeros(total);
    let mut at = 0;
    for part in &rhs {
        b.rows_mut(at, part.len()).copy_from(part);
        at += part.len();
    }
    let (sol, residual) = if a.nrows() == 0 {
        (CVector::zeros(n_free + extra_unknowns), 0.0)
    } else {
        least_squares(&a, &b)
    };
    let rhs_norm = b.norm();
    let feasible = residual < FEASIBILITY_RTOL * (rhs_norm + 1.0);
    let v = assemble_v(ctx, &sol, t, t0);
    let z = (0..extra_unknowns / r2.max(1))
        .map(|i| unvectorize(&sol.as_slice()[n_free + i * r2..n_free + (i + 1) * r2], ctx.r, ctx.r))
        .collect();
    Ok(ConeCertificate { feasible, residual, rhs_norm, v, z })
}

pub fn cone_membership_relative(x: &Cocycle1, ctx: &DeformationContext) -> Result<bool> {
    Ok(cone_relative_certificate(ctx, x)?.feasible)
}

/// Checks the tangent conditions of a supplied vector.
pub fn check_tangent(ctx: &DeformationContext, v: &TangentVectorPRP) -> Result<()> {
    check_cocycle(ctx, &v.cocycle)?;
    if v.flag_displacements.len() != ctx.punctures() {
        return Err(Error::Precondition("one flag displacement per puncture is required".into()));
    }
    let scale = v.cocycle.to_vector().norm() + 1.0;
    for (i, par) in ctx.parabolics.iter().enumerate() {
        let k = ctx.gamma_index(i);
        let y = &v.flag_displacements[i];
        let p = &v.cocycle.values[k] - (y - ctx.pair.gamma(i) * y * inverse(ctx.pair.gamma(i))?);
        if par.quotient_coords(&vectorize(&p)).norm() > TANGENT_TOL * scale {
            return Err(Error::Precondition(format!(
                "X(γ{0}) − (Id − Ad)Ỹ{0} is not in the parabolic",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Decides whether a tangent vector extends to an order-2 deformation of the pair.
///
/// Per puncture the second-order condition is
/// V(γᵢ) − (Id − Ad)Zᵢ + ½([Ỹ, AdỸ] + [p, AdỸ] + [p, Ỹ]) ∈ 𝔭ᵢ,
/// with p = X(γᵢ) − (Id − Ad)Ỹ and Zᵢ ranging over 𝔤.
pub fn cone_prp_certificate(ctx: &DeformationContext, v: &TangentVectorPRP) -> Result<ConeCertificate> {
    check_tangent(ctx, v)?;
    let r = ctx.r;
    let r2 = r * r;
    let n = ctx.punctures();
    let n_free = r2 * (ctx.generator_count() - 1);
    let unknowns = n_free + n * r2;
    let (t, t0) = last_value_map(ctx, &v.cocycle)?;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, par) in ctx.parabolics.iter().enumerate() {
        let m = ctx.pair.gamma(i);
        let m_inv = inverse(m)?;
        let y = &v.flag_displacements[i];
        let ad_y = m * y * &m_inv;
        let p = &v.cocycle.values[ctx.gamma_index(i)] - (y - &ad_y);
        let c = (commutator(y, &ad_y) + commutator(&p, &ad_y) + commutator(&p, y)) * real(0.5);
        let (map, off) = gamma_value_map(ctx, i, &t, &t0);
        let kh = par.complement.adjoint();
        let mut block = CMatrix::zeros(kh.nrows(), unknowns);
        block.columns_mut(0, n_free).copy_from(&(&kh * map));
        let delta = identity(r2) - ctx.adjoint(ctx.gamma_index(i));
        block.columns_mut(n_free + i * r2, r2).copy_from(&(-(&kh * delta)));
        rows.push(block);
        rhs.push(-(&kh * (off + vectorize(&c))));
    }
    solve_stacked(ctx, rows, rhs, n * r2, &t, &t0)
}

pub fn cone_membership_prp(v: &TangentVectorPRP, ctx: &DeformationContext) -> Result<bool> {
    Ok(cone_prp_certificate(ctx, v)?.feasible)
}

/// Truncated power series c0 + c1 t + c2 t² with matrix coefficients.
#[derive(Clone, Debug)]
pub struct Jet2 {
    pub c: [CMatrix; 3],
}

impl Jet2 {
    pub fn constant(m: CMatrix) -> Self {
        let z = CMatrix::zeros(m.nrows(), m.ncols());
        Self { c: [m, z.clone(), z] }
    }

    pub fn new(c0: CMatrix, c1: CMatrix, c2: CMatrix) -> Self {
        Self { c: [c0, c1, c2] }
    }

    /// exp(a t + b t²) truncated: I + a t + (b + a²/2) t².
    pub fn exp(a: &CMatrix, b: &CMatrix) -> Self {
        Self::new(identity(a.nrows()), a.clone(), b + a * a * real(0.5))
    }

    pub fn mul(&self, o: &Jet2) -> Jet2 {
        Jet2::new(
            &self.c[0] * &o.c[0],
            &self.c[0] * &o.c[1] + &self.c[1] * &o.c[0],
            &self.c[0] * &o.c[2] + &self.c[1] * &o.c[1] + &self.c[2] * &o.c[0],
        )
    }

    pub fn inverse(&self) -> Result<Jet2> {
        let i0 = inverse(&self.c[0])?;
        let i1 = -(&i0 * &self.c[1] * &i0);
        let i2 = -(&i0 * (&self.c[1] * &i1 + &self.c[2] * &i0));
        Ok(Jet2::new(i0, i1, i2))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveCheck {
    /// ‖t¹ coefficient‖ and ‖t² coefficient‖ of ρ_t(relator) − Id.
    pub relator_t1: f64,
    pub relator_t2: f64,
    /// Largest distance of a flag-conjugated boundary coefficient from 𝔭ᵢ.
    pub flag_defect: f64,
}

/// Evaluates the order-2 curve defined by (X, V) and flag motion
/// g_t = exp(Ỹt + Zt²) on the relator and the moving parabolics.
pub fn check_curve(
    ctx: &DeformationContext,
    x: &Cocycle1,
    v: &Cocycle1,
    y: &[CMatrix],
    z: &[CMatrix],
) -> Result<CurveCheck> {
    let r = ctx.r;
    let p = ctx.pair.presentation();
    let jets: Vec<Jet2> = ctx
        .pair
        .images()
        .iter()
        .enumerate()
        .map(|(k, m)| Jet2::exp(&x.values[k], &v.values[k]).mul(&Jet2::constant(m.clone())))
        .collect();
    let mut acc = Jet2::constant(identity(r));
    for letter in &p.relator().letters {
        let j = &jets[p.index_of(letter.gen)?];
        acc = if letter.exp > 0 { acc.mul(j) } else { acc.mul(&j.inverse()?) };
    }
    let mut flag_defect: f64 = 0.0;
    for (i, par) in ctx.parabolics.iter().enumerate() {
        let zero = CMatrix::zeros(r, r);
        let g = Jet2::exp(y.get(i).unwrap_or(&zero), z.get(i).unwrap_or(&zero));
        let conj = g.inverse()?.mul(&jets[ctx.gamma_index(i)]).mul(&g);
        for c in &conj.c {
            flag_defect = flag_defect.max(par.quotient_coords(&vectorize(c)).norm());
        }
    }
    Ok(CurveCheck { relator_t1: acc.c[1].norm(), relator_t2: acc.c[2].norm(), flag_defect })
}

/// Dimension of the span of the given cocycles.
pub fn span_dimension(cocycles: &[Cocycle1]) -> usize {
    if cocycles.is_empty() {
        return 0;
    }
    let cols: Vec<CMatrix> = cocycles
        .iter()
        .map(|c| {
            let v = c.to_vector();
            CMatrix::from_column_slice(v.len(), 1, v.as_slice())
        })
        .collect();
    column_space(&hconcat(&cols.iter().collect::<Vec<_>>())).ncols()
}

/// True when every coefficient list entry is zero.
pub fn is_zero_cocycle(x: &Cocycle1) -> bool {
    x.values.iter().all(|m| m.iter().all(|z| z.is_zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Flag, FlagType};
    use crate::sampling::{random_full_flag_pair, random_pair, rng};
    use crate::surface::Presentation;

    fn trivial(genus: usize, n: usize, r: usize, full: bool) -> DeformationContext {
        let flag = if full { Flag::standard(&FlagType::full(r)) } else { Flag::trivial(r) };
        let pair = ParabolicRepPair::trivial(Presentation::new(genus, n).unwrap(), r, vec![flag; n]).unwrap();
        DeformationContext::new(&pair).unwrap()
    }

    #[test]
    fn z1_dimensions() {
        assert_eq!(z1_basis(&trivial(1, 1, 2, false)).len(), 8);
        assert_eq!(z1_basis(&trivial(0, 3, 2, false)).len(), 8);
        assert_eq!(z1_basis(&trivial(1, 1, 1, false)).len(), 2);
        let ctx = DeformationContext::new(&random_full_flag_pair(&mut rng(3), 1, 2, 2).unwrap()).unwrap();
        let basis = z1_basis(&ctx);
        assert_eq!(basis.len(), 4 * 3);
        for x in &basis {
            let rel = ctx.evaluate_cocycle(x, &ctx.pair().presentation().relator()).unwrap();
            assert!(rel.norm() < 1e-9);
        }
    }

    #[test]
    fn tangent_at_trivial_pair_with_trivial_flag() {
        let t = tangent_prp(&trivial(1, 1, 2, false)).unwrap();
        assert_eq!(t.dimension, 8);
    }

    #[test]
    fn tangent_at_trivial_pair_with_full_flag_exceeds_formula() {
        let err = tangent_prp(&trivial(1, 1, 2, true)).unwrap_err();
        assert!(matches!(err, Error::FormulaViolation { computed: 9, predicted: 8 }));
    }

    #[test]
    fn tangent_random_pair() {
        let pair = random_full_flag_pair(&mut rng(11), 1, 2, 3).unwrap();
        let t = tangent_prp(&DeformationContext::new(&pair).unwrap()).unwrap();
        assert_eq!(t.dimension, 27);
    }

    #[test]
    fn relative_tangent_examples() {
        assert_eq!(tangent_relative(&trivial(1, 1, 2, false)).summary.dimension, 8);
        let pair = random_full_flag_pair(&mut rng(5), 1, 1, 2).unwrap();
        let rel = tangent_relative(&DeformationContext::new(&pair).unwrap());
        assert_eq!(rel.summary.dimension, 7);
        assert!(rel.summary.generic);
        assert_eq!(rel.summary.literal_f, vec![Rational::new(5, 2)]);
        assert!(!rel.summary.literal_is_integral);
        let pair = random_full_flag_pair(&mut rng(6), 0, 3, 2).unwrap();
        assert_eq!(tangent_relative(&DeformationContext::new(&pair).unwrap()).summary.dimension, 5);
    }

    #[test]
    fn zero_vectors_are_in_the_cones() {
        let pair = random_full_flag_pair(&mut rng(2), 1, 1, 2).unwrap();
        let ctx = DeformationContext::new(&pair).unwrap();
        let zero = TangentVectorPRP {
            cocycle: Cocycle1::zero(3, 2),
            flag_displacements: vec![CMatrix::zeros(2, 2)],
        };
        assert!(cone_membership_prp(&zero, &ctx).unwrap());
        assert!(cone_membership_relative(&Cocycle1::zero(3, 2), &ctx).unwrap());
    }

    #[test]
    fn rank_one_cones_are_everything() {
        let types = vec![FlagType::trivial(1); 3];
        let pair = random_pair(&mut rng(4), 0, &types).unwrap();
        let ctx = DeformationContext::new(&pair).unwrap();
        for v in tangent_prp(&ctx).unwrap().basis {
            assert!(cone_membership_prp(&v, &ctx).unwrap());
        }
    }

    #[test]
    fn cone_certificates_give_order_two_curves() {
        let pair = random_full_flag_pair(&mut rng(9), 1, 1, 2).unwrap();
        let ctx = DeformationContext::new(&pair).unwrap();
        let rel = tangent_relative(&ctx);
        for x in rel.basis.iter().take(3) {
            let cert = cone_relative_certificate(&ctx, x).unwrap();
            assert!(cert.feasible);
            let check = check_curve(&ctx, x, &cert.v, &[], &[]).unwrap();
            assert!(check.relator_t1 < 1e-8 && check.relator_t2 < 1e-8, "{check:?}");
            assert!(check.flag_defect < 1e-8, "{check:?}");
        }
        let t = tangent_prp(&ctx).unwrap();
        for v in t.basis.iter().take(3) {
            let cert = cone_prp_certificate(&ctx, v).unwrap();
            let check = check_curve(&ctx, &v.cocycle, &cert.v, &v.flag_displacements, &cert.z).unwrap();
            if cert.feasible {
                assert!(check.relator_t2 < 1e-8 && check.flag_defect < 1e-8, "{check:?}");
            }
        }
    }

    #[test]
    fn non_tangent_vectors_are_rejected() {
        let pair = random_full_flag_pair(&mut rng(1), 1, 1, 2).unwrap();
        let ctx = DeformationContext::new(&pair).unwrap();
        let mut bad = Cocycle1::zero(3, 2);
        bad.values[0] = identity(2);
        bad.values[1][(0, 1)] = 1.0.into();
        assert!(cone_membership_relative(&bad, &ctx).is_err());
    }
}
