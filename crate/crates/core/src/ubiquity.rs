//! Finite-scale surrogates for ubiquity: the resonant system `J(t)`, covered
//! fractions of its `ρ`-neighbourhoods, and box-counting dimension estimates.

use crate::error::{Error, Result};
use crate::lattice::gcd_i64;
use crate::manifold::{Manifold, Model};
use crate::rats::{covered_fraction, enumerate_where, exponent_fit, BallUnion, PsiRule, RationalPoint};
use crate::scalar::Scalar;
use num::One;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;

/// Minimum regression quality for emitting a dimension estimate.
pub const MIN_R_SQUARED: f64 = 0.95;
/// Maximum spread of the last three prefix slopes for a stabilized estimate.
pub const SLOPE_STABILITY: f64 = 0.05;

/// Resonant points `a/q` with `max_l ‖q f_l(a/q)‖ <= ½ψ(q)`, weight `β = q`,
/// and ubiquity function `ρ(q) = ρ_0 (ψ(q)^m q^{d+1})^{-1/d}`.
#[derive(Clone, Debug)]
pub struct ResonantSystem<'a> {
    m: &'a Manifold,
    psi: PsiRule,
    rho0: f64,
}

impl<'a> ResonantSystem<'a> {
    pub fn new(m: &'a Manifold, psi: PsiRule, rho0: f64) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(Error::InvalidArgument("ρ0 must be positive".into()));
        }
        Ok(Self { m, psi, rho0 })
    }

    pub fn rho(&self, q: f64) -> f64 {
        let (d, m) = (self.m.d() as i32, self.m.m() as i32);
        self.rho0 * (self.psi.eval(q).powi(m) * q.powi(d + 1)).powf(-1.0 / d as f64)
    }

    /// `J(t)` restricted to `a/q ∈ [lo, hi]`, one entry per `(q, a)`.
    pub fn j(&self, t: u32, lo: &[f64], hi: &[f64]) -> Result<Vec<RationalPoint>> {
        let q_max = 1i64 << t;
        let mut pts = enumerate_where(self.m, 1, q_max, |q| 0.5 * self.psi.eval(q as f64), lo, hi, false)?;
        pts.dedup_by(|a, b| a.q == b.q && a.a == b.a);
        Ok(pts)
    }

    /// `|J(t)|` over the domain for `t = 0..=t_max`.
    pub fn j_counts(&self, t_max: u32) -> Result<Vec<usize>> {
        let pts = self.j(t_max, self.m.lo(), self.m.hi())?;
        Ok((0..=t_max).map(|t| pts.iter().filter(|p| p.q <= 1i64 << t).count()).collect())
    }
}

/// Covered fractions of a box `B` at level `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UbiquityReport {
    pub t: u32,
    pub q_max: i64,
    pub rho: f64,
    pub resonant_points: usize,
    /// Fraction of `B` covered by `∪_{J(t)} B(a/q, ρ(2^t))`.
    pub fraction: f64,
    /// Fraction covered by `Δ^{δ_0}(Q, ½ψ(Q), B, ρ(Q))`, which the union above contains.
    pub delta_fraction: f64,
}

/// Grid measure of `∪_{α ∈ J(t)} B(R_α, ρ(2^t)) ∩ B` relative to `μ_d(B)`,
/// alongside the `Δ^{δ_0}` lower bound.
pub fn ubiquity_fraction(
    m: &Manifold,
    psi: &PsiRule,
    t: u32,
    lo: &[f64],
    hi: &[f64],
    rho0: f64,
    delta0: f64,
    grid_h: f64,
) -> Result<UbiquityReport> {
    if t < 1 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&delta0) {
        return Err(Error::InvalidArgument("δ0 must lie in [0, 1)".into()));
    }
    let sys = ResonantSystem::new(m, psi.clone(), rho0)?;
    let q_max = 1i64 << t;
    let rho = sys.rho(q_max as f64);
    if !(grid_h > 0.0) || grid_h > rho / 10.0 {
        return Err(Error::ResolutionTooCoarse(format!("grid step {grid_h} exceeds ρ/10 = {}", rho / 10.0)));
    }
    // centres within ρ of B can still reach it
    let elo: Vec<f64> = lo.iter().zip(m.lo()).map(|(a, b)| (a - rho).max(*b)).collect();
    let ehi: Vec<f64> = hi.iter().zip(m.hi()).map(|(a, b)| (a + rho).min(*b)).collect();
    let pts = sys.j(t, &elo, &ehi)?;
    let union = BallUnion::new(pts.iter().map(|p| p.x()).collect(), rho)?;
    let fraction = covered_fraction(&union, lo, hi, grid_h);
    let half_psi = 0.5 * psi.eval(q_max as f64);
    let q_min = (delta0 * q_max as f64).floor() as i64 + 1;
    let inner = enumerate_where(m, q_min, q_max, |_| half_psi, lo, hi, true)?;
    let inner_union = BallUnion::new(inner.iter().map(|p| p.x()).collect(), rho)?;
    let delta_fraction = covered_fraction(&inner_union, lo, hi, grid_h);
    Ok(UbiquityReport {
        t,
        q_max,
        rho,
        resonant_points: pts.len(),
        fraction,
        delta_fraction,
    })
}

/// Checks on `samples` points around every resonant `a/q ∈ J(t)` that
/// `|x − a/q| < Ψ(q) = ψ(q)/(2c_1q)` gives `‖q(x, f(x))‖ <= ψ(q)`.
///
/// Returns the number of checked samples.
pub fn lambda_inclusion_check(m: &Manifold, psi: &PsiRule, t: u32, samples: usize) -> Result<usize> {
    let sys = ResonantSystem::new(m, psi.clone(), 1.0)?;
    let c1 = m.lipschitz().max(1.0);
    let mut checked = 0;
    let dist = |v: f64| (v - v.round()).abs();
    for p in sys.j(t, m.lo(), m.hi())? {
        let q = p.q as f64;
        let psi_q = psi.eval(q);
        let big_psi = psi_q / (2.0 * c1 * q);
        let centre = p.x();
        for s in 0..samples {
            let frac = 0.999 * (2.0 * (s as f64 + 0.5) / samples as f64 - 1.0);
            let x: Vec<f64> = centre.iter().map(|c| c + frac * big_psi).collect();
            if !m.contains(&x) {
                continue;
            }
            let y = m.eval_f64(&x);
            let worst = x.iter().chain(&y).map(|v| dist(q * v)).fold(0.0, f64::max);
            if worst > psi_q * (1.0 + 1e-9) {
                return Err(Error::InvariantViolation(format!(
                    "x = {x:?} near {}/{} has ‖q(x, f(x))‖ = {worst} > ψ(q) = {psi_q}",
                    p.a[0], p.q
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Points of the unit circle `a² + b² = q²` with `b > 0`, `gcd(q, a, b) = 1`,
/// `q <= q_max` and `a/q ∈ [lo, hi]`, from `(s² − t², 2st, s² + t²)`.
pub fn pythagorean_points(q_max: i64, lo: f64, hi: f64) -> Vec<RationalPoint> {
    let mut out = Vec::new();
    let mut push = |q: i64, a: i64, b: i64| {
        let x = a as f64 / q as f64;
        if lo <= x && x <= hi {
            out.push(RationalPoint {
                q,
                a: vec![a],
                b: vec![b],
                residual: 0.0,
                residual_exact: Some(crate::scalar::Rat::from_i64(0)),
            });
        }
    };
    if q_max >= 1 {
        push(1, 0, 1);
    }
    let mut s = 2i64;
    while s * s < q_max {
        for t in 1..s {
            let q = s * s + t * t;
            if q > q_max {
                break;
            }
            if (s - t) % 2 == 0 || gcd_i64(s, t) != 1 {
                continue;
            }
            let (u, v) = (s * s - t * t, 2 * s * t);
            for (a, b) in [(u, v), (-u, v), (v, u), (-v, u)] {
                push(q, a, b);
            }
        }
        s += 1;
    }
    out.sort_by(|a, b| (a.q, &a.a).cmp(&(b.q, &b.a)));
    out
}

/// Box-counting dimension estimate of the `ψ_τ`-hit set at finite scales.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimEstimate {
    pub tau: f64,
    pub qs: Vec<i64>,
    /// Box side `ψ_τ(Q)/Q` at each `Q`.
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub r_squared: f64,
    pub ci_half_width: f64,
    /// Slopes of the fits ending at each of the last three `Q`.
    pub tail_slopes: Vec<f64>,
    pub stabilized: bool,
    /// The slope clamped to `[0, d]`; `None` unless the fit has `R² >= 0.95`
    /// and is stabilized. A finite-scale surrogate, not a Hausdorff dimension.
    pub dimension: Option<f64>,
}

fn is_unit_circle(m: &Manifold) -> bool {
    matches!(m.model(), Model::Circle { r } if r.is_one())
}

/// Parameters `a/q` with `q <= q_max` and `‖q(a/q, f(a/q))‖ <= q^{-τ}`.
///
/// On the unit circle with `τ > 1`, hits with `q > 3^{1/(τ-1)}` must lie on the
/// circle, since `|q² − a² − b²| < 3q^{1−τ} < 1`; those come from Pythagorean triples.
pub fn hit_points(m: &Manifold, tau: f64, q_max: i64) -> Result<Vec<RationalPoint>> {
    let psi = PsiRule::power(tau);
    let (lo, hi) = (m.lo(), m.hi());
    if is_unit_circle(m) && tau > 1.0 {
        let q0 = 3f64.powf(1.0 / (tau - 1.0)).ceil() as i64;
        if q0 < q_max {
            let mut pts = enumerate_where(m, 1, q0, |q| psi.eval(q as f64), lo, hi, true)?;
            pts.extend(pythagorean_points(q_max, lo[0], hi[0]).into_iter().filter(|p| p.q > q0));
            return Ok(pts);
        }
    }
    enumerate_where(m, 1, q_max, |q| psi.eval(q as f64), lo, hi, true)
}

fn box_count(points: &[Vec<f64>], side: f64) -> usize {
    let mut boxes: HashSet<Vec<i64>> = HashSet::new();
    for x in points {
        let ranges: Vec<(i64, i64)> = x
            .iter()
            .map(|v| (((v - side) / side).floor() as i64, ((v + side) / side).floor() as i64))
            .collect();
        let mut key: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            boxes.insert(key.clone());
            for (k, r) in key.iter_mut().zip(&ranges) {
                if *k < r.1 {
                    *k += 1;
                    continue 'outer;
                }
                *k = r.0;
            }
            break;
        }
    }
    boxes.len()
}

/// Covers the hit set of `q <= Q` by balls of the common radius `r_Q = ψ_τ(Q)/Q`,
/// counts boxes of side `r_Q`, and fits `log count` against `log(1/r_Q)`.
pub fn dim_estimate(m: &Manifold, tau: f64, qs: &[i64]) -> Result<DimEstimate> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("τ must be positive".into()));
    }
    if qs.len() < 4 || qs.windows(2).any(|w| w[0] >= w[1]) || qs[0] < 1 {
        return Err(Error::InvalidArgument("Q sequence must be increasing with at least 4 terms".into()));
    }
    let q_max = *qs.last().expect("non-empty");
    let pts = hit_points(m, tau, q_max)?;
    let scales: Vec<f64> = qs.iter().map(|&q| (q as f64).powf(-tau - 1.0)).collect();
    let counts: Vec<usize> = qs
        .par_iter()
        .zip(&scales)
        .map(|(&q, &side)| {
            let xs: Vec<Vec<f64>> = pts.iter().filter(|p| p.q <= q).map(|p| p.x()).collect();
            box_count(&xs, side)
        })
        .collect();
    let series: Vec<(f64, f64)> = scales
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| (1.0 / s, c as f64))
        .collect();
    if series.is_empty() {
        return Err(Error::Degenerate("hit sets are empty at every scale".into()));
    }
    let fit = exponent_fit(&series)?;
    let tail_slopes: Vec<f64> = (series.len().saturating_sub(2).max(4)..=series.len())
        .map(|k| exponent_fit(&series[..k]).map(|f| f.slope))
        .collect::<Result<_>>()?;
    let spread = tail_slopes.iter().cloned().fold(f64::MIN, f64::max) - tail_slopes.iter().cloned().fold(f64::MAX, f64::min);
    let stabilized = spread <= SLOPE_STABILITY;
    let dimension = (fit.r_squared >= MIN_R_SQUARED && stabilized).then(|| fit.slope.clamp(0.0, m.d() as f64));
    Ok(DimEstimate {
        tau,
        qs: qs.to_vec(),
        scales,
        counts,
        slope: fit.slope,
        r_squared: fit.r_squared,
        ci_half_width: fit.ci_half_width,
        tail_slopes,
        stabilized,
        dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn pythagorean_matches_enumeration() {
        let m = Manifold::circle(rat(1, 1)).unwrap();
        let (lo, hi) = (m.lo()[0], m.hi()[0]);
        let fast = pythagorean_points(300, lo, hi);
        let slow = enumerate_where(&m, 1, 300, |_| 0.0, &[lo], &[hi], true).unwrap();
        let key = |v: &[RationalPoint]| v.iter().map(|p| (p.q, p.a[0], p.b[0])).collect::<Vec<_>>();
        assert_eq!(key(&fast), key(&slow));
    }

    #[test]
    fn unit_circle_hits_match_enumeration() {
        let m = Manifold::circle(rat(1, 1)).unwrap();
        let fast = hit_points(&m, 1.5, 200).unwrap();
        let slow = enumerate_where(&m, 1, 200, |q| (q as f64).powf(-1.5), m.lo(), m.hi(), true).unwrap();
        let mut a: Vec<_> = fast.iter().map(|p| (p.q, p.a[0], p.b[0])).collect();
        let mut b: Vec<_> = slow.iter().map(|p| (p.q, p.a[0], p.b[0])).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn j_counts_monotone() {
        let m = Manifold::parabola();
        let sys = ResonantSystem::new(&m, PsiRule::power(0.8), 1.0).unwrap();
        let c = sys.j_counts(8).unwrap();
        assert!(c.windows(2).all(|w| w[0] <= w[1]), "{c:?}");
        assert!(c[8] > c[0]);
    }

    #[test]
    fn large_psi_saturates() {
        let m = Manifold::parabola();
        let rep = ubiquity_fraction(&m, &PsiRule::Constant(1.0), 3, &[0.0], &[1.0], 10.0, 0.0, 1e-3).unwrap();
        assert_eq!(rep.fraction, 1.0);
        assert!(rep.delta_fraction <= rep.fraction);
    }

    #[test]
    fn coarse_grid_rejected() {
        let m = Manifold::parabola();
        let err = ubiquity_fraction(&m, &PsiRule::power(0.8), 6, &[0.0], &[1.0], 1.0, 0.1, 0.5);
        assert!(matches!(err, Err(Error::ResolutionTooCoarse(_))));
    }

    #[test]
    fn lambda_inclusion() {
        let m = Manifold::parabola();
        assert!(lambda_inclusion_check(&m, &PsiRule::power(0.8), 7, 5).unwrap() > 0);
        let c = Manifold::circle(rat(3, 1)).unwrap();
        assert!(lambda_inclusion_check(&c, &PsiRule::power(0.6), 6, 5).unwrap() > 0);
    }

    #[test]
    fn box_count_two_dims() {
        let pts = vec![vec![0.05, 0.05], vec![0.55, 0.55]];
        assert_eq!(box_count(&pts, 0.1), 18);
    }

    #[test]
    fn dim_rejects_short_sequences() {
        let m = Manifold::parabola();
        assert!(dim_estimate(&m, 0.75, &[8, 16, 32]).is_err());
        assert!(dim_estimate(&m, 0.75, &[8, 16, 16, 32]).is_err());
        assert!(dim_estimate(&m, -1.0, &[8, 16, 32, 64]).is_err());
    }
}
