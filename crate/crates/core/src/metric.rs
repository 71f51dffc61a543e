//! Moment-map equations for Hermitian metrics on a weighted pair, a gauge
//! flow that solves them on polystable inputs, and gauge comparison of two
//! solutions.
//!
//! Residuals are those of the King moment map on the star quiver,
//! μ_v = Σ_{t(a)=v} x_a x_a* − Σ_{s(a)=v} x_a* x_a, against λ_v = −θ_v where
//! θ is the induced vertex weight. Every vertex carries its own metric; arm
//! coordinates are orthonormal bases of the flag levels.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::json::rational_to_f64;
use crate::linalg::{
    frobenius, hermitian_eigenvalues, hermitian_function, hermitian_part, identity, inverse, parabolic_membership,
    CMatrix, HermitianMetric, C64,
};
use crate::quiver::{encode, induced_weight, QuiverRep};
use crate::rep_pair::{ParabolicRepPair, WeightedPair};
use crate::subspaces::random_matrix;

/// Maximum allowed |Σ tr| of the residuals at an accepted step.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub condition_limit: f64,
    /// Accepted steps over which less than `stall_rtol` relative progress counts as a stall.
    pub stall_window: usize,
    pub stall_rtol: f64,
    pub initial_metric: Option<HermitianMetric>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_steps: 100_000,
            initial_step: 1e-2,
            max_step: 1.0,
            condition_limit: 1e12,
            stall_window: 5_000,
            stall_rtol: 1e-9,
            initial_metric: None,
        }
    }
}

/// Metric at every quiver vertex: the central metric on ℂʳ and one per arm level.
#[derive(Clone, Debug)]
pub struct VertexMetrics {
    pub central: HermitianMetric,
    /// arms[i][ℓ−1] on V⁽ⁱ⁾_ℓ, in orthonormal coordinates of that level.
    pub arms: Vec<Vec<HermitianMetric>>,
}

#[derive(Clone, Debug)]
pub struct MomentResiduals {
    /// h-self-adjoint central residual on ℂʳ.
    pub central: CMatrix,
    pub arm: Vec<Vec<CMatrix>>,
    pub total_norm: f64,
    /// tr(central) + Σ tr(arm).
    pub trace: f64,
}

struct Flow {
    x: QuiverRep,
    /// Target λ_v per vertex.
    lambda: Vec<f64>,
    /// Vertex index of (puncture, level) pairs, in arm order.
    arm_vertices: Vec<Vec<usize>>,
}

struct Evaluation {
    /// μ_v(g·x) − λ_v, Hermitian in the standard metric.
    s: Vec<CMatrix>,
    norm: f64,
    trace: f64,
}

impl Flow {
    fn new(wp: &WeightedPair) -> Result<Self> {
        let x = encode(&wp.pair)?;
        let w = induced_weight(&wp.weights, &wp.pair.flag_types())?;
        let lambda = w.0.iter().map(|t| -rational_to_f64(t)).collect();
        let arm_vertices = (0..x.quiver.punctures)
            .map(|i| {
                (1..=x.quiver.depths[i])
                    .map(|level| x.quiver.vertex_index(crate::quiver::Vertex::Arm { puncture: i, level }))
                    .collect()
            })
            .collect();
        Ok(Self { x, lambda, arm_vertices })
    }

    fn evaluate(&self, g: &[CMatrix]) -> Result<Evaluation> {
        let g_inv = g.iter().map(inverse).collect::<Result<Vec<_>>>()?;
        let mut s: Vec<CMatrix> = self.x.dims.0.iter().enumerate().map(|(v, &d)| identity(d) * C64::from(-self.lambda[v])).collect();
        for (a, m) in self.x.quiver.arrows.iter().zip(&self.x.maps) {
            let y = &g[a.tgt] * m * &g_inv[a.src];
            s[a.tgt] += &y * y.adjoint();
            s[a.src] -= y.adjoint() * &y;
        }
        for m in &mut s {
            *m = hermitian_part(m);
        }
        let norm = s.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let trace = s.iter().map(|m| m.trace().re).sum();
        Ok(Evaluation { s, norm, trace })
    }

    /// Residuals pulled back to the original coordinates, R_v = g_v⁻¹ S_v g_v.
    fn residuals(&self, g: &[CMatrix]) -> Result<MomentResiduals> {
        let e = self.evaluate(g)?;
        let pull = |v: usize| -> Result<CMatrix> { Ok(inverse(&g[v])? * &e.s[v] * &g[v]) };
        Ok(MomentResiduals {
            central: pull(0)?,
            arm: self.arm_vertices.iter().map(|vs| vs.iter().map(|&v| pull(v)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?,
            total_norm: e.norm,
            trace: e.trace,
        })
    }

    fn gauges(&self, m: &VertexMetrics) -> Result<Vec<CMatrix>> {
        let mut g = vec![m.central.sqrt()];
        for (i, arm) in m.arms.iter().enumerate() {
            if arm.len() != self.arm_vertices[i].len() {
                return Err(Error::DimensionMismatch(format!("puncture {} has {} arm metrics", i + 1, arm.len())));
            }
            g.extend(arm.iter().map(HermitianMetric::sqrt));
        }
        for (v, gv) in g.iter().enumerate() {
            if gv.nrows() != self.x.dims.0[v] {
                return Err(Error::DimensionMismatch(format!("metric at {} has size {}", self.x.quiver.vertex_name(v), gv.nrows())));
            }
        }
        Ok(g)
    }

    fn metrics(&self, g: &[CMatrix]) -> Result<VertexMetrics> {
        let h = |m: &CMatrix| HermitianMetric::new(hermitian_part(&(m.adjoint() * m)));
        Ok(VertexMetrics {
            central: h(&g[0])?,
            arms: self.arm_vertices.iter().map(|vs| vs.iter().map(|&v| h(&g[v])).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?,
        })
    }

    /// Arm metrics restricted from a central metric.
    fn restricted(&self, h: &HermitianMetric) -> Result<VertexMetrics> {
        let mut arms = Vec::with_capacity(self.arm_vertices.len());
        for i in 0..self.arm_vertices.len() {
            let mut levels = Vec::new();
            for level in 1..=self.arm_vertices[i].len() {
                let q = self.x.arm_image(i, level);
                levels.push(h.restrict(&q)?);
            }
            arms.push(levels);
        }
        Ok(VertexMetrics { central: h.clone(), arms })
    }
}

fn condition(g: &CMatrix) -> f64 {
    let e = hermitian_eigenvalues(&(g.adjoint() * g));
    match (e.first(), e.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Residuals with every arm metric restricted from `h`, so that each embedding
/// is isometric and the arm equation reads [c, c*] + P_{V_{ℓ+1}} = (w_{ℓ−1} − w_ℓ + 1)·Id.
pub fn residuals(wp: &WeightedPair, h: &HermitianMetric) -> Result<MomentResiduals> {
    if h.dim() != wp.rank() {
        return Err(Error::DimensionMismatch(format!("metric on dimension {} for rank {}", h.dim(), wp.rank())));
    }
    let flow = Flow::new(wp)?;
    let m = flow.restricted(h)?;
    flow.residuals(&flow.gauges(&m)?)
}

/// Residuals for independent metrics at every vertex.
pub fn vertex_residuals(wp: &WeightedPair, m: &VertexMetrics) -> Result<MomentResiduals> {
    let flow = Flow::new(wp)?;
    flow.residuals(&flow.gauges(m)?)
}

#[derive(Clone, Debug)]
pub struct MetricState {
    pub h: HermitianMetric,
    pub metrics: VertexMetrics,
    pub step_count: usize,
    pub residual_history: Vec<f64>,
    pub total_norm: f64,
    /// Residual norm with the arm metrics replaced by restrictions of h.
    pub restricted_norm: f64,
    pub max_trace_defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceReason {
    ConditionNumber,
    Stalled,
    MaxSteps,
    TraceViolation,
}

#[derive(Clone, Debug)]
pub struct DivergenceCertificate {
    pub reason: DivergenceReason,
    pub condition_number: f64,
    pub best_norm: f64,
    pub best: VertexMetrics,
    pub step_count: usize,
    pub residual_history: Vec<f64>,
    pub max_trace_defect: f64,
}

#[derive(Clone, Debug)]
pub enum SolveOutcome {
    Converged(MetricState),
    Diverged(DivergenceCertificate),
}

impl SolveOutcome {
    pub fn converged(&self) -> Option<&MetricState> {
        match self {
            Self::Converged(s) => Some(s),
            Self::Diverged(_) => None,
        }
    }

    pub fn diverged(&self) -> Option<&DivergenceCertificate> {
        match self {
            Self::Diverged(c) => Some(c),
            Self::Converged(_) => None,
        }
    }
}

/// Gauge flow g_v ← exp(−η S_v) g_v, i.e. h_v ← exp(−η s_v)ᴴ h_v exp(−η s_v),
/// with backtracking on the total residual norm.
pub fn solve_metric(wp: &WeightedPair, opts: &SolverOptions) -> Result<SolveOutcome> {
    let flow = Flow::new(wp)?;
    let start = match &opts.initial_metric {
        Some(h) => flow.restricted(h)?,
        None => flow.restricted(&HermitianMetric::identity(wp.rank()))?,
    };
    let mut g = flow.gauges(&start)?;
    let mut cur = flow.evaluate(&g)?;
    let mut history = vec![cur.norm];
    let mut max_trace = cur.trace.abs();
    let mut eta = opts.initial_step;
    let mut steps = 0;
    let diverge = |reason, g: &[CMatrix], history: Vec<f64>, max_trace, steps| -> Result<SolveOutcome> {
        Ok(SolveOutcome::Diverged(DivergenceCertificate {
            reason,
            condition_number: g.iter().map(condition).fold(1.0, f64::max),
            best_norm: history.iter().copied().fold(f64::INFINITY, f64::min),
            best: flow.metrics(g)?,
            step_count: steps,
            residual_history: history,
            max_trace_defect: max_trace,
        }))
    };
    while cur.norm >= opts.tol {
        if steps >= opts.max_steps {
            return diverge(DivergenceReason::MaxSteps, &g, history, max_trace, steps);
        }
        let mut accepted = None;
        while eta > 1e-16 {
            let trial: Vec<CMatrix> =
                g.iter().zip(&cur.s).map(|(gv, sv)| hermitian_function(sv, |t| (-eta * t).exp()) * gv).collect();
            let e = flow.evaluate(&trial)?;
            if e.norm < cur.norm {
                accepted = Some((trial, e));
                break;
            }
            eta *= 0.5;
        }
        let Some((trial, e)) = accepted else {
            return diverge(DivergenceReason::Stalled, &g, history, max_trace, steps);
        };
        g = trial;
        cur = e;
        steps += 1;
        history.push(cur.norm);
        max_trace = max_trace.max(cur.trace.abs());
        eta = (eta * 2.0).min(opts.max_step);
        if cur.trace.abs() > TRACE_TOL {
            return diverge(DivergenceReason::TraceViolation, &g, history, max_trace, steps);
        }
        if g.iter().any(|gv| condition(gv) > opts.condition_limit) {
            return diverge(DivergenceReason::ConditionNumber, &g, history, max_trace, steps);
        }
        if steps >= opts.stall_window {
            let then = history[steps - opts.stall_window];
            if then - cur.norm <= opts.stall_rtol * then {
                return diverge(DivergenceReason::Stalled, &g, history, max_trace, steps);
            }
        }
    }
    let metrics = flow.metrics(&g)?;
    let restricted = flow.restricted(&metrics.central)?;
    let restricted_norm = flow.evaluate(&flow.gauges(&restricted)?)?.norm;
    Ok(SolveOutcome::Converged(MetricState {
        h: metrics.central.clone(),
        metrics,
        step_count: steps,
        residual_history: history,
        total_norm: cur.norm,
        restricted_norm,
        max_trace_defect: max_trace,
    }))
}

#[derive(Clone, Debug)]
pub struct GaugeComparison {
    pub g: Option<CMatrix>,
    /// ‖g* h₂ g − h‖ for the best candidate found.
    pub residual: f64,
    pub candidates_tried: usize,
}

/// Vectorized basis of ⋂ᵢ 𝔭ᵢ as matrices.
fn intersection_basis(pair: &ParabolicRepPair) -> Vec<CMatrix> {
    let r = pair.rank();
    let mut basis = identity(r * r);
    for f in pair.flags() {
        basis = crate::linalg::intersect(&basis, &crate::linalg::ParabolicAlgebra::of(f).basis);
    }
    (0..basis.ncols()).map(|k| crate::linalg::unvectorize(basis.column(k).as_slice(), r, r)).collect()
}

/// Levenberg–Marquardt on g = Σ c_k B_k for g* h₂ g = h.
fn refine(basis: &[CMatrix], h: &CMatrix, h2: &CMatrix, start: &[C64]) -> (Vec<C64>, f64) {
    let r = h.nrows();
    let m = basis.len();
    let assemble = |c: &[C64]| basis.iter().zip(c).fold(CMatrix::zeros(r, r), |acc, (b, ck)| acc + b * *ck);
    let resid = |g: &CMatrix| g.adjoint() * h2 * g - h;
    let to_real = |f: &CMatrix| DVector::from_iterator(2 * r * r, f.iter().map(|z| z.re).chain(f.iter().map(|z| z.im)));
    let mut c = start.to_vec();
    let mut f = resid(&assemble(&c));
    let mut norm = frobenius(&f);
    let mut damping = 1e-3;
    for _ in 0..200 {
        if norm < 1e-13 * frobenius(h).max(1.0) {
            break;
        }
        let g = assemble(&c);
        let mut jac = DMatrix::<f64>::zeros(2 * r * r, 2 * m);
        for (k, b) in basis.iter().enumerate() {
            let d_re = b.adjoint() * h2 * &g + g.adjoint() * h2 * b;
            let d_im = (g.adjoint() * h2 * b - b.adjoint() * h2 * &g) * C64::i();
            jac.set_column(2 * k, &to_real(&d_re));
            jac.set_column(2 * k + 1, &to_real(&d_im));
        }
        let rhs = -(jac.transpose() * to_real(&f));
        let jtj = jac.transpose() * &jac;
        let mut improved = false;
        for _ in 0..30 {
            let lhs = &jtj + DMatrix::<f64>::identity(2 * m, 2 * m) * damping;
            let Some(delta) = lhs.lu().solve(&rhs) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<C64> = c.iter().enumerate().map(|(k, ck)| ck + C64::new(delta[2 * k], delta[2 * k + 1])).collect();
            let tf = resid(&assemble(&trial));
            let tn = frobenius(&tf);
            if tn < norm {
                c = trial;
                f = tf;
                norm = tn;
                damping = (damping * 0.3).max(1e-15);
                improved = true;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (c, norm)
}

/// Searches for g ∈ ⋂P with g* h₂ g = h, starting from the identity and from
/// h₂^{−1/2} U h^{1/2} projected onto ⋂𝔭 for U = Id and random unitaries.
pub fn gauge_compare(h: &HermitianMetric, h2: &HermitianMetric, pair: &ParabolicRepPair) -> Result<GaugeComparison> {
    let r = pair.rank();
    if h.dim() != r || h2.dim() != r {
        return Err(Error::DimensionMismatch(format!("metrics on {} and {} for rank {r}", h.dim(), h2.dim())));
    }
    let basis = intersection_basis(pair);
    let stacked = CMatrix::from_fn(r * r, basis.len(), |i, k| basis[k][(i % r, i / r)]);
    let coords = |g: &CMatrix| -> Vec<C64> {
        let (c, _) = crate::linalg::least_squares(&stacked, &crate::linalg::vectorize(g));
        c.iter().copied().collect()
    };
    let tol = 1e-9 * frobenius(h.gram()).max(1.0);
    let root = h.sqrt();
    let inv_root2 = h2.inv_sqrt();
    let mut rng = crate::sampling::rng(0);
    let mut starts = vec![coords(&identity(r)), coords(&(&inv_root2 * &root))];
    for _ in 0..8 {
        let q = random_matrix(&mut rng, r, r).qr().q();
        starts.push(coords(&(&inv_root2 * q * &root)));
    }
    let mut best = f64::INFINITY;
    for (tried, start) in starts.iter().enumerate() {
        let (c, norm) = refine(&basis, h.gram(), h2.gram(), start);
        best = best.min(norm);
        if norm < tol {
            let g = basis.iter().zip(&c).fold(CMatrix::zeros(r, r), |acc, (b, ck)| acc + b * *ck);
            let inside = pair.flags().iter().map(|f| parabolic_membership(&g, f)).collect::<Result<Vec<_>>>()?;
            if inside.iter().all(|&b| b) && inverse(&g).is_ok() {
                return Ok(GaugeComparison { g: Some(g), residual: norm, candidates_tried: tried + 1 });
            }
        }
    }
    Ok(GaugeComparison { g: None, residual: best, candidates_tried: starts.len() })
}

/// Gauge comparison of two solver outputs, after re-checking that both solve the equations.
pub fn gauge_compare_solutions(wp: &WeightedPair, a: &MetricState, b: &MetricState, tol: f64) -> Result<GaugeComparison> {
    for (name, s) in [("first", a), ("second", b)] {
        let res = vertex_residuals(wp, &s.metrics)?;
        if res.total_norm >= tol {
            return Err(Error::Precondition(format!("{name} metric has residual {:.3e}", res.total_norm)));
        }
    }
    gauge_compare(&a.h, &b.h, &wp.pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, Flag, FlagType, WeightVector};
    use crate::sampling::{random_in_parabolic, rng};
    use crate::surface::Presentation;

    fn rank_one(weights: &[i64]) -> WeightedPair {
        let p = Presentation::new(0, 3).unwrap();
        let m = |x: f64| CMatrix::from_element(1, 1, x.into());
        let pair = ParabolicRepPair::new(p, vec![m(2.0), m(0.5), m(1.0)], vec![Flag::trivial(1); 3]).unwrap();
        let w = weights.iter().map(|&k| WeightVector::from_integers(&[k]).unwrap()).collect();
        WeightedPair::new(pair, w).unwrap()
    }

    fn rotation(t: f64) -> CMatrix {
        from_real_rows(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]])
    }

    #[test]
    fn rank_one_residual_vanishes() {
        let wp = rank_one(&[0, 1, -2]);
        let res = residuals(&wp, &HermitianMetric::identity(1)).unwrap();
        assert!(res.total_norm < 1e-14);
        let out = solve_metric(&wp, &SolverOptions::default()).unwrap();
        assert_eq!(out.converged().unwrap().step_count, 0);
    }

    #[test]
    fn unitary_pair_converges_immediately() {
        let p = Presentation::new(1, 1).unwrap();
        let (a, b) = (rotation(0.3), from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let gamma = (&a * &b * a.transpose() * b.transpose()).transpose();
        let pair = ParabolicRepPair::new(p, vec![a, b, gamma], vec![Flag::trivial(2)]).unwrap();
        let wp = WeightedPair::new(pair, vec![WeightVector::zeros(1)]).unwrap();
        assert!(residuals(&wp, &HermitianMetric::identity(2)).unwrap().total_norm < 1e-12);
        let out = solve_metric(&wp, &SolverOptions::default()).unwrap();
        let st = out.converged().unwrap();
        assert_eq!(st.step_count, 0);
        assert!((st.h.gram() - identity(2)).norm() < 1e-14);
    }

    #[test]
    fn residuals_are_self_adjoint_with_zero_trace() {
        let mut g = rng(5);
        let pair = crate::sampling::random_full_flag_pair(&mut g, 1, 1, 2).unwrap();
        let wp = WeightedPair::new(pair, vec![WeightVector::from_integers(&[-1, 2]).unwrap()]).unwrap();
        let hm = HermitianMetric::new(from_real_rows(&[&[2.0, 0.5], &[0.5, 1.0]])).unwrap();
        let res = residuals(&wp, &hm).unwrap();
        assert!(res.trace.abs() < 1e-10);
        let adj = hm.adjoint_of(&res.central);
        assert!((adj - &res.central).norm() < 1e-10);
    }

    #[test]
    fn diagonal_unstable_pair_diverges() {
        let p = Presentation::new(1, 1).unwrap();
        let images = vec![from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]]), identity(2), identity(2)];
        let e1 = from_real_rows(&[&[1.0], &[0.0]]);
        let pair = ParabolicRepPair::new(p, images, vec![Flag::new(2, vec![e1]).unwrap()]).unwrap();
        let wp = WeightedPair::new(pair, vec![WeightVector::from_integers(&[-1, 1]).unwrap()]).unwrap();
        let out = solve_metric(&wp, &SolverOptions::default()).unwrap();
        let cert = out.diverged().expect("diverges");
        assert!(cert.max_trace_defect < TRACE_TOL);
        assert!(cert.best_norm > 1e-3);
    }

    #[test]
    fn gauge_identity_and_pullback() {
        let mut g = rng(9);
        let t = FlagType::full(2);
        let pair = crate::sampling::random_pair(&mut g, 0, &[t.clone(), t.clone(), t]).unwrap();
        let h = HermitianMetric::new(from_real_rows(&[&[2.0, 0.3], &[0.3, 1.0]])).unwrap();
        let same = gauge_compare(&h, &h, &pair).unwrap();
        assert!((same.g.unwrap() - identity(2)).norm() < 1e-12);

        let single = ParabolicRepPair::new(
            Presentation::new(1, 1).unwrap(),
            vec![identity(2), identity(2), identity(2)],
            vec![pair.flags()[0].clone()],
        )
        .unwrap();
        let frame = crate::linalg::hconcat(&[pair.flags()[0].subspaces()[0].clone(), from_real_rows(&[&[0.3], &[1.0]])].iter().collect::<Vec<_>>());
        let k = random_in_parabolic(&mut g, &frame, &FlagType::full(2)).unwrap();
        // h = k* h2 k
        let h2 = h.pullback(&inverse(&k).unwrap()).unwrap();
        let found = gauge_compare(&h, &h2, &single).unwrap().g.expect("gauge found");
        assert!((found.adjoint() * h2.gram() * &found - h.gram()).norm() < 1e-8);
        assert!(parabolic_membership(&found, &single.flags()[0]).unwrap());

        let other = HermitianMetric::new(from_real_rows(&[&[1.0, -0.4], &[-0.4, 3.0]])).unwrap();
        assert!(gauge_compare(&h, &other, &pair).unwrap().g.is_none());
    }
}
