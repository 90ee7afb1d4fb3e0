//! Cell bodies around lifted manifold points, the good set `G_f`, and the
//! detection of rational points near good parameters.

use crate::error::{Error, Result};
use crate::frames::{component_sizes, epsilon0, frame_at, k_constant, Frame, FrameContext, SupBall};
use crate::lattice::{enumerate_box, enumerate_ellipsoid, primitive};
use crate::linalg::{self, Matrix};
use crate::manifold::{grid_points, Manifold};
use crate::multivector::{project, MultiVector};
use crate::pbox::{ParallelepipedFamily, WeightProfile, ENUMERATION_BUDGET};
use crate::rats::{enumerate_where, point_residual, BallUnion, RationalPoint};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::ops::ControlFlow;

/// Volume of a `j`-ball of diameter 1: `π^{j/2} / (2^j Γ(j/2 + 1))`.
pub fn unit_diameter_ball_volume(j: usize) -> f64 {
    let h = j as f64 / 2.0;
    std::f64::consts::PI.powf(h) / (2f64.powi(j as i32) * gamma(h + 1.0))
}

/// `κ_0 = (v_d v_m)^{-1}`.
pub fn kappa0(d: usize, m: usize) -> Result<f64> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidArgument("need d, m >= 1".into()));
    }
    Ok(1.0 / (unit_diameter_ball_volume(d) * unit_diameter_ball_volume(m)))
}

/// Lower bound imposed on `Q_*` relative to `c_0` and `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SizeCondition {
    /// `Q_* >= max{c_0/κ², c_0²/(κ⁴ r_B)}`.
    Ball,
    /// `Q_* >= 4 c_0² κ^{-4}`.
    Uniform,
    /// No lower bound and any `κ > 0` (Minkowski search only).
    Unchecked,
}

/// Parameters `(Q_*, ψ_*, κ, c_0)` of a cell system and the derived detection constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellParams {
    pub d: usize,
    pub m: usize,
    pub q_star: f64,
    pub psi_star: f64,
    pub kappa: f64,
    pub c0: f64,
    /// Derivative bound `C` of the frame context.
    pub c_bound: f64,
    pub ball_radius: f64,
    pub size: SizeCondition,
}

impl CellParams {
    /// Validates the parameters; `c0 = None` selects [`CellParams::default_c0`].
    pub fn new(
        m: &Manifold,
        ctx: &FrameContext,
        q_star: f64,
        psi_star: f64,
        kappa: f64,
        c0: Option<f64>,
        size: SizeCondition,
    ) -> Result<Self> {
        let (d, mm) = (m.d(), m.m());
        let c0 = match c0 {
            Some(c) => c,
            None => Self::default_c0(d, mm, ctx.c_bound, ctx.ball.radius)?,
        };
        let p = Self {
            d,
            m: mm,
            q_star,
            psi_star,
            kappa,
            c0,
            c_bound: ctx.c_bound,
            ball_radius: ctx.ball.radius,
            size,
        };
        if !(q_star > 0.0 && psi_star > 0.0 && c0 > 1.0) {
            return Err(Error::InvalidArgument("need Q* > 0, ψ* > 0 and c0 > 1".into()));
        }
        if !(kappa > 0.0) || (size != SizeCondition::Unchecked && kappa >= 1.0) {
            return Err(Error::InvalidArgument(format!("κ = {kappa} outside (0, 1)")));
        }
        if size != SizeCondition::Unchecked {
            if !p.window_holds() {
                return Err(Error::Precondition(format!(
                    "ψ* = {psi_star} outside [{}, 1]",
                    p.psi_star_floor()
                )));
            }
            if !p.size_holds() {
                return Err(Error::Precondition(format!(
                    "Q* = {q_star} below the size bound {}",
                    p.q_star_floor()
                )));
            }
        }
        Ok(p)
    }

    /// `max{ε_0^{-2}, κ_0 + 1, 16C²(n+1)⁴, 6K(κ_0+1)(n+1)²C²}`.
    pub fn default_c0(d: usize, m: usize, c: f64, radius: f64) -> Result<f64> {
        let n = d + m;
        let k0 = kappa0(d, m)?;
        let n1 = n as f64 + 1.0;
        let e0 = epsilon0(d, n, c, radius);
        let k = k_constant(d, n, c);
        Ok((e0.powi(-2))
            .max(k0 + 1.0)
            .max(16.0 * c * c * n1.powi(4))
            .max(6.0 * k * (k0 + 1.0) * n1 * n1 * c * c))
    }

    pub fn n(&self) -> usize {
        self.d + self.m
    }
    pub fn kappa0(&self) -> f64 {
        kappa0(self.d, self.m).expect("validated dimensions")
    }

    /// `κ^{-d/(2n-d)} Q_*^{-(d+2)/(2n-d)}`.
    pub fn psi_star_floor(&self) -> f64 {
        let e = (2 * self.n() - self.d) as f64;
        self.kappa.powf(-(self.d as f64) / e) * self.q_star.powf(-(self.d as f64 + 2.0) / e)
    }

    pub fn window_holds(&self) -> bool {
        self.psi_star_floor() <= self.psi_star && self.psi_star <= 1.0
    }

    pub fn q_star_floor(&self) -> f64 {
        let (c0, k) = (self.c0, self.kappa);
        match self.size {
            SizeCondition::Ball => (c0 / (k * k)).max(c0 * c0 / (k.powi(4) * self.ball_radius)),
            SizeCondition::Uniform => 4.0 * c0 * c0 / k.powi(4),
            SizeCondition::Unchecked => 0.0,
        }
    }

    pub fn size_holds(&self) -> bool {
        self.q_star >= self.q_star_floor()
    }

    /// `δ_0 = κ / c_0²`.
    pub fn delta0(&self) -> f64 {
        self.kappa / (self.c0 * self.c0)
    }
    /// `Q = c_0 Q_*`.
    pub fn big_q(&self) -> f64 {
        self.c0 * self.q_star
    }
    /// `ψ = c_0 κ^{-2} ψ_*`.
    pub fn big_psi(&self) -> f64 {
        self.c0 * self.psi_star / (self.kappa * self.kappa)
    }
    /// `ρ = c_0 κ^{-2} (ψ_*^m Q_*^{d+1})^{-1/d}`.
    pub fn rho(&self) -> f64 {
        let inner = self.psi_star.powi(self.m as i32) * self.q_star.powi(self.d as i32 + 1);
        self.c0 / (self.kappa * self.kappa) * inner.powf(-1.0 / self.d as f64)
    }

    /// Cell body for the given `κ`.
    pub fn body(&self, kappa: f64) -> CellBody {
        CellBody {
            theta_g: self.psi_star,
            theta_u: (self.psi_star.powi(self.m as i32) * self.q_star).powf(-1.0 / self.d as f64),
            theta_y: kappa * self.q_star,
        }
    }

    /// `κQ_* <= |r| <= (κ_0+1)Q_*` and `|r_0| >= κQ_*/(2(n+1)C)` for a detected `r`.
    pub fn solution_bounds_hold(&self, r: &[i64]) -> bool {
        let norm = r.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
        let lower = self.kappa * self.q_star;
        let upper = (self.kappa0() + 1.0) * self.q_star;
        let r0 = (r[0] as f64).abs();
        norm >= lower && norm <= upper && r0 >= lower / (2.0 * (self.n() as f64 + 1.0) * self.c_bound)
    }
}

/// `0.5 min(1, κ_0)`.
pub fn default_kappa(d: usize, m: usize) -> Result<f64> {
    Ok(0.5 * kappa0(d, m)?.min(1.0))
}

/// `2^m ψ^m · 2^d (ψ^m Q)^{-1} · 2κQ`, the volume of the cell body divided by `v_m v_d`.
///
/// Equals `2^{n+1} κ` identically; exact in rational mode.
pub fn body_volume_factor<S: Scalar>(psi: &S, q: &S, kappa: &S, d: usize, m: usize) -> S {
    let two = S::from_i64(2);
    let pm = psi.powi(m as u32);
    let vg = two.powi(m as u32) * pm.clone();
    let vu = two.powi(d as u32) / (pm * q.clone());
    let vy = two * kappa.clone() * q.clone();
    vg * vu * vy
}

/// Thresholds of the three forms `|g·r|/|g| < θ_g`, `|u·r|/|u| < θ_u`, `|y·r|/|y| <= θ_y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellBody {
    pub theta_g: f64,
    pub theta_u: f64,
    pub theta_y: f64,
}

impl CellBody {
    pub fn contains(&self, f: &Frame<f64>, r: &[f64]) -> Result<bool> {
        let (cg, cu, cy) = component_sizes(f, r)?;
        Ok(cg < self.theta_g && cu < self.theta_u && cy <= self.theta_y)
    }

    /// Quadratic form `Σ P_w / θ_w²` over the three orthogonal blocks.
    fn quadratic_form(&self, f: &Frame<f64>) -> Result<Matrix<f64>> {
        let k = f.n() + 1;
        let subs = f.subspaces()?;
        let mut a = vec![vec![0.0; k]; k];
        for (s, t) in subs.iter().zip([self.theta_g, self.theta_u, self.theta_y]) {
            for e in linalg::orthonormalize(s.basis()) {
                for i in 0..k {
                    for j in 0..k {
                        a[i][j] += e[i] * e[j] / (t * t);
                    }
                }
            }
        }
        Ok(a)
    }
}

/// Shortest, then lexicographically least, non-zero integer `r` in the body,
/// normalised so that its first non-zero entry is positive.
pub fn body_point(f: &Frame<f64>, body: &CellBody) -> Result<Option<Vec<i64>>> {
    let a = body.quadratic_form(f)?;
    let mut best: Option<(i128, Vec<i64>)> = None;
    let mut err = None;
    enumerate_ellipsoid(&a, 3.0, ENUMERATION_BUDGET, |z| {
        if z.iter().all(|&v| v == 0) {
            return ControlFlow::Continue(());
        }
        let r = primitive(z);
        if r != z {
            // z is a multiple of a shorter point, which is visited separately
            return ControlFlow::Continue(());
        }
        let rf: Vec<f64> = r.iter().map(|v| *v as f64).collect();
        match body.contains(f, &rf) {
            Ok(true) => {
                let norm: i128 = r.iter().map(|v| (*v as i128) * (*v as i128)).sum();
                if best.as_ref().is_none_or(|(bn, br)| (norm, &r) < (*bn, br)) {
                    best = Some((norm, r));
                }
            }
            Ok(false) => {}
            Err(e) => {
                err = Some(e);
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(best.map(|(_, r)| r))
}

/// Same search by scanning the box `|r|_∞ <= sqrt(θ_g² + θ_u² + θ_y²)`.
pub fn body_point_box(f: &Frame<f64>, body: &CellBody) -> Result<Option<Vec<i64>>> {
    let k = f.n() + 1;
    let bound = (body.theta_g.powi(2) + body.theta_u.powi(2) + body.theta_y.powi(2)).sqrt().floor() as i64;
    if ((2 * bound + 1) as f64).powi(k as i32) > 5e7 {
        return Err(Error::InvalidArgument(format!("box scan of radius {bound} is too large")));
    }
    let mut best: Option<(i128, Vec<i64>)> = None;
    let mut err = None;
    enumerate_box(&vec![bound; k], |z| {
        if z.iter().all(|&v| v == 0) {
            return ControlFlow::Continue(());
        }
        let rf: Vec<f64> = z.iter().map(|v| *v as f64).collect();
        match body.contains(f, &rf) {
            Ok(true) => {
                let r = primitive(z);
                let norm: i128 = r.iter().map(|v| (*v as i128) * (*v as i128)).sum();
                if best.as_ref().is_none_or(|(bn, br)| (norm, &r) < (*bn, br)) {
                    best = Some((norm, r));
                }
            }
            Ok(false) => {}
            Err(e) => {
                err = Some(e);
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(best.map(|(_, r)| r))
}

/// A non-zero integer solution of the cell system at `κ = P.kappa`, if any.
pub fn find_integer_point(f: &Frame<f64>, p: &CellParams) -> Result<Option<Vec<i64>>> {
    body_point(f, &p.body(p.kappa))
}

/// Whether the frame point lies in `G_f(Q_*, ψ_*, κ)`.
pub fn good_set_member(f: &Frame<f64>, p: &CellParams) -> Result<bool> {
    Ok(find_integer_point(f, p)?.is_none())
}

/// Outcome of [`minkowski_trials`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinkowskiReport {
    pub trials: usize,
    pub failures: usize,
}

/// Searches the `κ_0`-body at `trials` random configurations: `x` uniform in the
/// ball, `Q_*` log-uniform in `[10, 10^4]`, `ψ_*` log-uniform in the window
/// `[κ_0^{-d/(2n-d)} Q_*^{-(d+2)/(2n-d)}, 1]`.
pub fn minkowski_trials(m: &Manifold, ctx: &FrameContext, trials: usize, seed: u64) -> Result<MinkowskiReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = kappa0(m.d(), m.m())?;
    let configs: Vec<(Vec<f64>, f64, f64)> = (0..trials)
        .map(|_| {
            let x: Vec<f64> = ctx.ball.lo().iter().zip(ctx.ball.hi()).map(|(a, b)| rng.gen_range(*a..=b)).collect();
            let q_star = 10f64.powf(rng.gen_range(1.0..4.0));
            let e = (2 * m.n() - m.d()) as f64;
            let floor = k0.powf(-(m.d() as f64) / e) * q_star.powf(-(m.d() as f64 + 2.0) / e);
            let psi_star = floor.min(1.0).powf(rng.gen_range(0.0..1.0));
            (x, q_star, psi_star)
        })
        .collect();
    let failures: Vec<Result<bool>> = configs
        .par_iter()
        .map(|(x, q_star, psi_star)| {
            let p = CellParams::new(m, ctx, *q_star, *psi_star, k0, Some(2.0), SizeCondition::Unchecked)?;
            let f = frame_at(m, x, ctx)?;
            Ok(find_integer_point(&f, &p)?.is_none())
        })
        .collect();
    let mut report = MinkowskiReport { trials, failures: 0 };
    for f in failures {
        report.failures += usize::from(f?);
    }
    Ok(report)
}

/// Output of [`detect`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detection {
    pub point: RationalPoint,
    pub rho: f64,
    /// The `κ_0`-body solution the point was read from.
    pub r: Vec<i64>,
}

/// Reads a rational point `(q, a, b)` off the `κ_0`-body at a good parameter.
///
/// Guarantees `δ_0 Q <= q <= Q`, `|x − a/q|_∞ < ρ` and `|q f(a/q) − b|_∞ < ψ`;
/// a breach is reported as [`Error::InvariantViolation`].
pub fn detect(m: &Manifold, f: &Frame<f64>, p: &CellParams) -> Result<Detection> {
    if p.size == SizeCondition::Unchecked {
        return Err(Error::Precondition("detection needs a size condition".into()));
    }
    if !f.ball.contains(&f.x) {
        return Err(Error::Precondition("x outside B".into()));
    }
    if !good_set_member(f, p)? {
        return Err(Error::Precondition("x is not in the good set".into()));
    }
    let r = body_point(f, &p.body(p.kappa0()))?
        .ok_or_else(|| Error::InvariantViolation("no integer point in the κ0-body".into()))?;
    let r = if r[0] < 0 { r.iter().map(|v| -v).collect() } else { r };
    let (d, q) = (p.d, r[0]);
    if q == 0 {
        return Err(Error::InvariantViolation(format!("κ0-body solution {r:?} has r0 = 0")));
    }
    let a = r[1..=d].to_vec();
    let b = r[d + 1..].to_vec();
    let (residual, residual_exact) = point_residual(m, q, &a, &b)?;
    let point = RationalPoint {
        q,
        a,
        b,
        residual,
        residual_exact,
    };
    let rho = p.rho();
    let qf = q as f64;
    if !(p.delta0() * p.big_q() <= qf && qf <= p.big_q()) {
        return Err(Error::InvariantViolation(format!(
            "q = {q} outside [{}, {}]",
            p.delta0() * p.big_q(),
            p.big_q()
        )));
    }
    let gap = point.x().iter().zip(&f.x).map(|(a, x)| (a - x).abs()).fold(0.0, f64::max);
    if !(gap < rho) {
        return Err(Error::InvariantViolation(format!("|x − a/q| = {gap} not below ρ = {rho}")));
    }
    if !(residual < p.big_psi()) {
        return Err(Error::InvariantViolation(format!("residual {residual} not below ψ = {}", p.big_psi())));
    }
    Ok(Detection { point, rho, r })
}

/// Orthonormal bases of `V(g)`, `V(u)`, `V(y)` at a frame, scaled to length ½.
pub fn seed_basis(f: &Frame<f64>) -> Result<Vec<Vec<f64>>> {
    let subs = f.subspaces()?;
    let mut out = Vec::new();
    for (s, want) in subs.iter().zip([f.m(), f.d(), 1]) {
        let basis = linalg::orthonormalize(s.basis());
        if basis.len() != want {
            return Err(Error::Degenerate("frame subspace has the wrong dimension".into()));
        }
        out.extend(basis.into_iter().map(|v| v.into_iter().map(|c| 0.5 * c).collect::<Vec<f64>>()));
    }
    Ok(out)
}

/// Rows `g_i(x)`: the seed vectors projected onto `V(g(x))`, `V(u(x))` and `V(y(x))`.
pub fn adapted_matrix(f: &Frame<f64>, seed: &[Vec<f64>]) -> Result<Matrix<f64>> {
    let (m, n) = (f.m(), f.n());
    if seed.len() != n + 1 || seed.iter().any(|v| v.len() != n + 1) {
        return Err(Error::DimensionMismatch(format!("seed must be {0}×{0}", n + 1)));
    }
    if linalg::det(&seed.to_vec()).abs() < 1e-12 {
        return Err(Error::Degenerate("seed basis is singular".into()));
    }
    let yv = MultiVector::vector(&f.y)?;
    seed.iter()
        .enumerate()
        .map(|(i, s)| {
            let w = if i < m {
                &f.g
            } else if i < n {
                &f.u
            } else {
                &yv
            };
            project(w, s)
        })
        .collect()
}

/// The family `x ↦ G(x)` of adapted matrices seeded at `x_0`, over the sup-ball of
/// the given radius around `x_0`.
pub fn adapted_family(m: &Manifold, ctx: &FrameContext, x0: &[f64], radius: f64) -> Result<ParallelepipedFamily> {
    let seed = seed_basis(&frame_at(m, x0, ctx)?)?;
    let k = m.n() + 1;
    let manifold = m.clone();
    let ctx = ctx.clone();
    let ball = SupBall::new(x0.to_vec(), radius)?;
    ParallelepipedFamily::new(k, ball.lo(), ball.hi(), move |x: &[f64]| {
        frame_at(&manifold, x, &ctx)
            .and_then(|f| adapted_matrix(&f, &seed))
            .unwrap_or_else(|_| vec![vec![0.0; k]; k])
    })
}

/// `θ̄ = (ψ_*,…,ψ_*, (ψ_*^m Q_*)^{-1/d},…, κQ_*)`, requiring
/// `C_* Q_*^{-1/m} <= ψ_* <= 1/C_*` with `C_* > 1`.
pub fn theta_profile(p: &CellParams, c_star: f64) -> Result<WeightProfile<f64>> {
    if !(c_star > 1.0) {
        return Err(Error::InvalidArgument("C* must exceed 1".into()));
    }
    let lo = c_star * p.q_star.powf(-1.0 / p.m as f64);
    if !(lo <= p.psi_star && p.psi_star <= 1.0 / c_star) {
        return Err(Error::Precondition(format!("ψ* = {} outside [{lo}, {}]", p.psi_star, 1.0 / c_star)));
    }
    let body = p.body(p.kappa);
    let mut t = vec![body.theta_g; p.m];
    t.extend(vec![body.theta_u; p.d]);
    t.push(body.theta_y);
    WeightProfile::new(t)
}

/// Outcome of checking `½B ∩ G_f ⊂ Δ^{δ_0}(Q, ψ, B, ρ)` on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub q_star: f64,
    pub psi_star: f64,
    pub kappa: f64,
    pub c0: f64,
    pub rho: f64,
    pub grid_points: usize,
    pub good_points: usize,
    pub uncovered: usize,
    /// Points where [`detect`] failed or returned a point missing from the enumeration.
    pub detection_failures: usize,
    /// Size of the independently enumerated `R^{δ_0}(Q, ψ, B)`.
    pub rational_points: usize,
}

/// Checks the inclusion on `per_axis` grid points per coordinate of `½B`,
/// enumerating `R^{δ_0}(Q, ψ, B)` independently of the detection.
pub fn inclusion_check(m: &Manifold, ctx: &FrameContext, p: &CellParams, per_axis: usize) -> Result<InclusionReport> {
    let ball = &ctx.ball;
    let q_max = p.big_q().floor() as i64;
    let q_min = (p.delta0() * p.big_q()).ceil() as i64;
    let psi = p.big_psi();
    let pts = enumerate_where(m, q_min, q_max, |_| psi, &ball.lo(), &ball.hi(), true)?;
    let rho = p.rho();
    let union = BallUnion::new(pts.iter().map(|r| r.x()).collect(), rho)?;
    let half = ball.scaled(0.5);
    let grid = grid_points(&half.lo(), &half.hi(), per_axis);
    let outcomes: Vec<Result<(bool, bool, bool)>> = grid
        .par_iter()
        .map(|x| {
            let f = frame_at(m, x, ctx)?;
            if !good_set_member(&f, p)? {
                return Ok((false, false, false));
            }
            let covered = union.covers(x);
            let detected_ok = match detect(m, &f, p) {
                Ok(det) => pts.binary_search_by(|r| (r.q, &r.a, &r.b).cmp(&(det.point.q, &det.point.a, &det.point.b))).is_ok(),
                Err(_) => false,
            };
            Ok((true, covered, detected_ok))
        })
        .collect();
    let mut report = InclusionReport {
        q_star: p.q_star,
        psi_star: p.psi_star,
        kappa: p.kappa,
        c0: p.c0,
        rho,
        grid_points: grid.len(),
        good_points: 0,
        uncovered: 0,
        detection_failures: 0,
        rational_points: pts.len(),
    };
    for o in outcomes {
        let (good, covered, det) = o?;
        if good {
            report.good_points += 1;
            report.uncovered += usize::from(!covered);
            report.detection_failures += usize::from(!det);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multivector::span_membership;
    use crate::scalar::rat;

    fn parabola_ctx() -> (Manifold, FrameContext) {
        let m = Manifold::parabola();
        let ctx = FrameContext::new(&m, SupBall::new(vec![0.0], 0.5).unwrap()).unwrap();
        (m, ctx)
    }

    #[test]
    fn kappa0_values() {
        assert!((kappa0(1, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((kappa0(1, 2).unwrap() - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((kappa0(2, 2).unwrap() - 16.0 / pi2).abs() < 1e-12);
    }

    #[test]
    fn volume_identity_exact() {
        for (psi, q, k) in [(rat(1, 3), rat(50, 1), rat(3, 5)), (rat(2, 7), rat(123, 4), rat(1, 9))] {
            for (d, m) in [(1, 1), (1, 2), (2, 1), (2, 3)] {
                let v = body_volume_factor(&psi, &q, &k, d, m);
                assert_eq!(v, rat(2, 1).powi((d + m + 1) as u32) * k.clone());
            }
        }
    }

    #[test]
    fn minkowski_example_matches_box_scan() {
        let (m, ctx) = parabola_ctx();
        let p = CellParams::new(&m, &ctx, 10.0, 0.5, 0.9, Some(2.0), SizeCondition::Unchecked).unwrap();
        let f = frame_at(&m, &[0.5], &ctx).unwrap();
        let body = p.body(p.kappa0());
        let r = body_point(&f, &body).unwrap().expect("Minkowski guarantees a point");
        assert_eq!(Some(r.clone()), body_point_box(&f, &body).unwrap());
        let rf: Vec<f64> = r.iter().map(|v| *v as f64).collect();
        assert!(body.contains(&f, &rf).unwrap());
    }

    #[test]
    fn search_agrees_with_box_scan() {
        let (m, ctx) = parabola_ctx();
        for (i, x) in [-0.45, -0.2, 0.013, 0.31, 0.47].iter().enumerate() {
            let f = frame_at(&m, &[*x], &ctx).unwrap();
            for kappa in [0.2, 0.6, 0.95] {
                let p = CellParams::new(&m, &ctx, 12.0 + i as f64, 0.3, kappa, Some(2.0), SizeCondition::Unchecked).unwrap();
                let body = p.body(kappa);
                assert_eq!(body_point(&f, &body).unwrap(), body_point_box(&f, &body).unwrap());
            }
        }
    }

    #[test]
    fn rational_point_is_never_good() {
        let (m, ctx) = parabola_ctx();
        let f = frame_at(&m, &[0.5], &ctx).unwrap();
        let p = CellParams::new(&m, &ctx, 30.0, 0.2, 0.3, Some(2.0), SizeCondition::Unchecked).unwrap();
        assert!(!good_set_member(&f, &p).unwrap());
    }

    #[test]
    fn detection_satisfies_bounds() {
        let (m, ctx) = parabola_ctx();
        let q_star = 200.0;
        let p = CellParams::new(&m, &ctx, q_star, q_star.powf(-0.5), 0.6, Some(2.0), SizeCondition::Uniform).unwrap();
        let mut good = 0;
        for i in 0..200 {
            let x = -0.25 + 0.5 * (i as f64 + 0.5) / 200.0;
            let f = frame_at(&m, &[x], &ctx).unwrap();
            if good_set_member(&f, &p).unwrap() {
                good += 1;
                let det = detect(&m, &f, &p).unwrap();
                assert!(p.solution_bounds_hold(&det.r));
                assert!(det.point.is_primitive());
            }
        }
        assert!(good > 0);
    }

    #[test]
    fn adapted_rows_in_subspaces() {
        let m = Manifold::veronese(3).unwrap();
        let ctx = FrameContext::for_domain(&m).unwrap();
        let f0 = frame_at(&m, &[0.2], &ctx).unwrap();
        let seed = seed_basis(&f0).unwrap();
        let g0 = adapted_matrix(&f0, &seed).unwrap();
        for (a, b) in g0.iter().zip(&seed) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        let f = frame_at(&m, &[0.23], &ctx).unwrap();
        let g = adapted_matrix(&f, &seed).unwrap();
        let yv = MultiVector::vector(&f.y).unwrap();
        for (i, row) in g.iter().enumerate() {
            let w = if i < 2 { &f.g } else if i < 3 { &f.u } else { &yv };
            assert!(span_membership(w, row).unwrap());
            assert!(linalg::norm_f64(row) <= 1.0);
        }
        assert!(linalg::det(&g).abs() > 1e-6);
    }

    #[test]
    fn theta_profile_curve() {
        let (m, ctx) = parabola_ctx();
        let p = CellParams::new(&m, &ctx, 400.0, 0.1, 0.5, Some(2.0), SizeCondition::Unchecked).unwrap();
        let t = theta_profile(&p, 2.0).unwrap();
        let th = t.thetas();
        assert!((th[0] - 0.1).abs() < 1e-15);
        assert!((th[1] - 1.0 / 40.0).abs() < 1e-15);
        assert!((th[2] - 200.0).abs() < 1e-12);
        assert!((t.theta().powi(3) - 0.5).abs() < 1e-12);
        assert!(theta_profile(&p, 20.0).is_err());
    }

    #[test]
    fn minkowski_guarantee_holds() {
        let (m, ctx) = parabola_ctx();
        let rep = minkowski_trials(&m, &ctx, 40, 11).unwrap();
        assert_eq!(rep.failures, 0);
        let v3 = Manifold::veronese(3).unwrap();
        let ctx3 = FrameContext::for_domain(&v3).unwrap();
        assert_eq!(minkowski_trials(&v3, &ctx3, 40, 12).unwrap().failures, 0);
    }
}
