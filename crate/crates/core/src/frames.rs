//! Moving frames along a manifold.
//!
//! At `x` the lift `y = (1, x, f(x))` and its partials span the projective
//! tangent space. `g = (y ∧ ∂_1 y ∧ … ∧ ∂_d y)^⊥` has grade `m` and spans its
//! orthogonal complement; `u = (y ∧ g)^⊥` has grade `d`. The three spaces
//! `V(g)`, `V(u)` and `V(y)` split `R^{n+1}` orthogonally.

use crate::error::{Error, Result};
use crate::linalg::{self, dot_f64, norm_f64};
use crate::manifold::Manifold;
use crate::multivector::{self, hodge, interior, wedge, MultiVector, Subspace};
use crate::scalar::Scalar;

/// Grid points per axis used when bounding derivatives.
pub const DERIVATIVE_GRID: usize = 64;
/// Inflation applied to sampled derivative suprema.
pub const DERIVATIVE_INFLATION: f64 = 1.25;

/// Sup-norm ball `{x : |x - center|_∞ <= radius}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl SupBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("ball needs finite center and positive radius".into()));
        }
        Ok(Self { center, radius })
    }

    /// Ball with the same center and `factor` times the radius.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }

    pub fn lo(&self) -> Vec<f64> {
        self.center.iter().map(|c| c - self.radius).collect()
    }
    pub fn hi(&self) -> Vec<f64> {
        self.center.iter().map(|c| c + self.radius).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= self.radius)
    }
}

/// Ball and derivative bound `C` shared by all frames over one region.
///
/// `C > 1` dominates `|f|`, `|∂f|`, `|∂²f|` on `2B_0` and `2B_0 ⊂ [-C, C]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameContext {
    pub ball: SupBall,
    pub c_bound: f64,
}

impl FrameContext {
    pub fn new(m: &Manifold, ball: SupBall) -> Result<Self> {
        if ball.center.len() != m.d() {
            return Err(Error::DimensionMismatch("ball center dimension".into()));
        }
        let big = ball.scaled(2.0);
        let sup = m.derivative_sup(&big.lo(), &big.hi(), DERIVATIVE_GRID);
        let reach = big
            .lo()
            .iter()
            .chain(big.hi().iter())
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        let c_bound = (DERIVATIVE_INFLATION * sup).max(reach).max(1.0 + 1e-12);
        Ok(Self { ball, c_bound })
    }

    /// Context over the whole domain box.
    pub fn for_domain(m: &Manifold) -> Result<Self> {
        let center: Vec<f64> = m.lo().iter().zip(m.hi()).map(|(a, b)| 0.5 * (a + b)).collect();
        let radius = m
            .lo()
            .iter()
            .zip(m.hi())
            .map(|(a, b)| 0.5 * (b - a))
            .fold(0.0, f64::max);
        Self::new(m, SupBall::new(center, radius)?)
    }
}

/// Frame `(y, ∂y, g, u)` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<S = f64> {
    pub x: Vec<S>,
    pub y: Vec<S>,
    /// `∂_i y` for `i = 1..d`.
    pub dy: Vec<Vec<S>>,
    pub g: MultiVector<S>,
    pub u: MultiVector<S>,
    pub c_bound: f64,
    pub ball: SupBall,
}

/// Frame at `x` using a precomputed context.
pub fn frame_at<S: Scalar>(m: &Manifold, x: &[S], ctx: &FrameContext) -> Result<Frame<S>> {
    let d = m.d();
    let n = m.n();
    let jet = m.jet(x, 1)?;
    let mut y = multivector::lift(x);
    y.extend(jet.value().iter().cloned());
    let dy: Vec<Vec<S>> = (0..d)
        .map(|i| {
            let mut v = vec![S::zero(); n + 1];
            v[i + 1] = S::one();
            for (l, val) in jet.first(i).iter().enumerate() {
                v[d + 1 + l] = val.clone();
            }
            v
        })
        .collect();
    let mut vecs = vec![y.clone()];
    vecs.extend(dy.iter().cloned());
    let tangent = MultiVector::wedge_vectors(n + 1, &vecs)?;
    if tangent.is_negligible(0.0) {
        return Err(Error::Degenerate("y ∧ ∂y vanishes".into()));
    }
    let g = hodge(&tangent)?;
    let u = hodge(&wedge(&MultiVector::vector(&y)?, &g)?)?;
    Ok(Frame {
        x: x.to_vec(),
        y,
        dy,
        g,
        u,
        c_bound: ctx.c_bound,
        ball: ctx.ball.clone(),
    })
}

impl<S: Scalar> Frame<S> {
    pub fn to_f64(&self) -> Frame<f64> {
        let conv = |v: &[S]| v.iter().map(|c| c.to_f64()).collect::<Vec<f64>>();
        Frame {
            x: conv(&self.x),
            y: conv(&self.y),
            dy: self.dy.iter().map(|v| conv(v)).collect(),
            g: self.g.to_f64(),
            u: self.u.to_f64(),
            c_bound: self.c_bound,
            ball: self.ball.clone(),
        }
    }

    pub fn d(&self) -> usize {
        self.dy.len()
    }
    pub fn n(&self) -> usize {
        self.y.len() - 1
    }
    pub fn m(&self) -> usize {
        self.n() - self.d()
    }

    /// Bases of `V(g)`, `V(u)` and `V(y)`.
    pub fn subspaces(&self) -> Result<[Subspace<S>; 3]> {
        Ok([
            Subspace::of_blade(&self.g)?,
            Subspace::of_blade(&self.u)?,
            Subspace::span(self.y.len(), std::slice::from_ref(&self.y))?,
        ])
    }
}

/// Distances of `r` from the three frame directions:
/// `(|g·r|/|g|, |u·r|/|u|, |y∧r|/|y|)`.
pub fn distance_split<S: Scalar>(f: &Frame<S>, r: &[S]) -> Result<(f64, f64, f64)> {
    let rv = MultiVector::vector(r)?;
    let dg = interior(&f.g, &rv)?.norm() / f.g.norm();
    let du = interior(&f.u, &rv)?.norm() / f.u.norm();
    let yv = MultiVector::vector(&f.y)?;
    let dy = wedge(&yv, &rv)?.norm() / yv.norm();
    Ok((dg, du, dy))
}

/// `(|g·r|, |u·r|, |y·r|)` divided by the norms of `g`, `u`, `y`: the sizes of
/// the components of `r` in `V(g)`, `V(u)`, `V(y)`.
pub fn component_sizes<S: Scalar>(f: &Frame<S>, r: &[S]) -> Result<(f64, f64, f64)> {
    let rv = MultiVector::vector(r)?;
    let cg = interior(&f.g, &rv)?.norm() / f.g.norm();
    let cu = interior(&f.u, &rv)?.norm() / f.u.norm();
    let yy = linalg::dot(&f.y, &f.y).to_f64().sqrt();
    let cy = linalg::dot(&f.y, r).to_f64().abs() / yy;
    Ok((cg, cu, cy))
}

/// Orthogonality and dimension diagnostics of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameCheck {
    /// Largest `|cos|` between unit vectors of different blocks.
    pub orthogonality_residual: f64,
    pub dims: [usize; 3],
}

impl FrameCheck {
    pub fn dim_sum(&self) -> usize {
        self.dims.iter().sum()
    }
}

pub fn check_frame<S: Scalar>(f: &Frame<S>) -> Result<FrameCheck> {
    let subs = f.subspaces()?;
    let bases: Vec<Vec<Vec<f64>>> = subs
        .iter()
        .map(|s| {
            let raw: Vec<Vec<f64>> = s.basis().iter().map(|v| v.iter().map(|c| c.to_f64()).collect()).collect();
            linalg::orthonormalize(&raw)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..3 {
        for b in a + 1..3 {
            for u in &bases[a] {
                for v in &bases[b] {
                    worst = worst.max(dot_f64(u, v).abs());
                }
            }
        }
    }
    Ok(FrameCheck {
        orthogonality_residual: worst,
        dims: [subs[0].dim(), subs[1].dim(), subs[2].dim()],
    })
}

/// `ε_0 = min{1, r_B0} / (2d(n+1)(C+1)²)`.
pub fn epsilon0(d: usize, n: usize, c_bound: f64, ball_radius: f64) -> f64 {
    ball_radius.min(1.0) / (2.0 * d as f64 * (n as f64 + 1.0) * (c_bound + 1.0).powi(2))
}

/// `K = 14(n+1)³(C+1)⁵d²`.
pub fn k_constant(d: usize, n: usize, c_bound: f64) -> f64 {
    14.0 * (n as f64 + 1.0).powi(3) * (c_bound + 1.0).powi(5) * (d as f64).powi(2)
}

/// Result of [`nearest_parameter`].
#[derive(Clone, Debug, PartialEq)]
pub struct NearestParameter {
    pub x_new: Vec<f64>,
    /// `d_p(ŷ(x'), r)` achieved.
    pub distance: f64,
    /// Guaranteed bound `Kδ`.
    pub bound: f64,
    pub k_constant: f64,
}

/// Moves from the frame point to a parameter `x'` whose lift is projectively
/// close to `r`.
///
/// Requires `|g·r|/(|g||r|) < δ`, `|u·r|/(|u||r|) < ε` and
/// `ε² <= δ <= ε <= ε_0`. On success `d_p(ŷ(x'), r) <= Kδ` and `x' ∈ 2B_0`.
pub fn nearest_parameter(m: &Manifold, f: &Frame<f64>, r: &[f64], delta: f64, eps: f64) -> Result<NearestParameter> {
    let d = f.d();
    let n = f.n();
    if r.len() != n + 1 {
        return Err(Error::DimensionMismatch(format!("r needs {} coordinates", n + 1)));
    }
    let rn = norm_f64(r);
    if rn == 0.0 {
        return Err(Error::InvalidArgument("r = 0".into()));
    }
    let r: Vec<f64> = r.iter().map(|v| v / rn).collect();
    let c = f.c_bound;
    let e0 = epsilon0(d, n, c, f.ball.radius);
    if !(eps * eps <= delta && delta <= eps && eps <= e0) {
        return Err(Error::Precondition(format!(
            "need ε² <= δ <= ε <= ε0 (δ = {delta}, ε = {eps}, ε0 = {e0})"
        )));
    }
    let (dg, du, _) = distance_split(f, &r)?;
    if !(dg < delta && du < eps) {
        return Err(Error::Precondition(format!(
            "r too far from the frame: |g·r|/|g| = {dg}, |u·r|/|u| = {du}"
        )));
    }
    let r_u = multivector::project(&f.u, &r)?;
    let yr = dot_f64(&f.y, &r);
    let eta = if yr < 0.0 { -1.0 } else { 1.0 };
    let ynorm = norm_f64(&f.y);
    // r_u = λ0 y + Σ λ_i ∂_i y, read off from the first d+1 coordinates.
    let lambda0 = r_u[0];
    let lambdas: Vec<f64> = (0..d).map(|i| r_u[i + 1] - f.x[i] * lambda0).collect();
    let l0_star = eta / ynorm + lambda0;
    let limit = 2.0 * (n as f64 + 1.0) * c;
    if !(l0_star.abs() * limit >= 1.0) {
        return Err(Error::InvariantViolation(format!(
            "|λ0*|^-1 = {} exceeds 2(n+1)C = {limit}",
            1.0 / l0_star.abs()
        )));
    }
    let x_new: Vec<f64> = f.x.iter().zip(&lambdas).map(|(x, l)| x + l / l0_star).collect();
    let big = f.ball.scaled(2.0);
    if !big.contains(&x_new) {
        return Err(Error::InvariantViolation("x' left 2B0".into()));
    }
    let y_new = m.lifted(&x_new)?;
    let dist = {
        let num = multivector::wedge_norm_sq(&y_new, &r).sqrt();
        num / norm_f64(&y_new)
    };
    let k = k_constant(d, n, c);
    let bound = k * delta;
    if dist > bound {
        return Err(Error::InvariantViolation(format!("d_p = {dist} exceeds Kδ = {bound}")));
    }
    Ok(NearestParameter {
        x_new,
        distance: dist,
        bound,
        k_constant: k,
    })
}
