//! Rational points near a manifold: the sets `R^δ(Q, ψ, B)`, counts `N(Q, ε)`,
//! coverage by balls around them, and power-law fits.

use crate::error::{Error, Result};
use crate::lattice::gcd_i64;
use crate::manifold::{Manifold, Model};
use crate::pbox::cell_centres;
use crate::scalar::{rat, Rat, Scalar};
use num::bigint::BigInt;
use num::{Integer, One, Signed};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::HashMap;
use std::time::Instant;

/// Relative band around `ε` where the numeric distance is not trusted.
pub const AMBIGUOUS_BAND: f64 = 1e-6;

/// A primitive `(q, a, b)` with `a/q` in the query box.
#[derive(Clone, Debug, PartialEq, PartialOrd, Serialize)]
pub struct RationalPoint {
    pub q: i64,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
    /// `|q f(a/q) − b|_∞`.
    pub residual: f64,
    /// The residual as an exact fraction for polynomial models.
    #[serde(skip)]
    pub residual_exact: Option<Rat>,
}

impl RationalPoint {
    /// `a/q`.
    pub fn x(&self) -> Vec<f64> {
        self.a.iter().map(|a| *a as f64 / self.q as f64).collect()
    }

    /// Homogeneous coordinates `(q, a, b)`.
    pub fn coords(&self) -> Vec<i64> {
        let mut r = vec![self.q];
        r.extend(&self.a);
        r.extend(&self.b);
        r
    }

    pub fn is_primitive(&self) -> bool {
        self.coords().into_iter().fold(0, gcd_i64) == 1
    }
}

/// `q f_l(a/q)` in integer-friendly form.
#[derive(Clone, Debug)]
enum Scaled {
    /// `num / den`.
    Frac(i128, i128),
    /// `sqrt(num / den)`.
    SqrtFrac(i128, i128),
    /// Fallback when `i128` overflows.
    Big(Rat),
}

impl Scaled {
    fn to_f64(&self) -> f64 {
        match self {
            Scaled::Frac(n, d) => *n as f64 / *d as f64,
            Scaled::SqrtFrac(n, d) => (*n as f64 / *d as f64).max(0.0).sqrt(),
            Scaled::Big(r) => r.to_f64(),
        }
    }

    /// Exact `|value − b| <= psi`.
    fn within(&self, b: i64, psi: &Rat, psi_f: f64) -> bool {
        match self {
            Scaled::Frac(n, d) => {
                if let Some(diff) = (b as i128).checked_mul(*d).and_then(|bd| n.checked_sub(bd)) {
                    let lhs = (diff as f64).abs();
                    let rhs = psi_f * *d as f64;
                    if lhs < rhs * (1.0 - 1e-12) {
                        return true;
                    }
                    if lhs > rhs * (1.0 + 1e-12) {
                        return false;
                    }
                }
                let v = Rat::new(BigInt::from(*n), BigInt::from(*d)) - rat(b, 1);
                Signed::abs(&v) <= *psi
            }
            Scaled::Big(r) => Signed::abs(&(r - rat(b, 1))) <= *psi,
            Scaled::SqrtFrac(n, d) => {
                let v = self.to_f64();
                let lhs = (v - b as f64).abs();
                let slack = 1e-9 * (1.0 + v.abs());
                if lhs < psi_f - slack {
                    return true;
                }
                if lhs > psi_f + slack {
                    return false;
                }
                let x = Rat::new(BigInt::from(*n), BigInt::from(*d));
                sqrt_within(&x, &rat(b, 1), psi)
            }
        }
    }

    /// Exact `|value − b|` when the value is rational.
    fn residual_exact(&self, b: i64) -> Option<Rat> {
        match self {
            Scaled::Frac(n, d) => Some(Signed::abs(&(Rat::new(BigInt::from(*n), BigInt::from(*d)) - rat(b, 1)))),
            Scaled::Big(r) => Some(Signed::abs(&(r - rat(b, 1)))),
            Scaled::SqrtFrac(..) => None,
        }
    }
}

/// Exact `|sqrt(x) − b| <= psi` for rationals `x >= 0`, `psi >= 0`.
fn sqrt_within(x: &Rat, b: &Rat, psi: &Rat) -> bool {
    let lo = b - psi;
    let hi = b + psi;
    let above_lo = !lo.is_positive() || *x >= &lo * &lo;
    let below_hi = !hi.is_negative() && *x <= &hi * &hi;
    above_lo && below_hi
}

/// Per-component integer form of a polynomial: `L·p` with integer coefficients.
#[derive(Clone, Debug)]
struct IntPoly {
    lcm: i128,
    deg: u32,
    terms: Vec<(Vec<u32>, i128)>,
}

impl IntPoly {
    fn new(p: &crate::poly::Poly) -> Option<Self> {
        let lcm = p.terms().iter().fold(BigInt::one(), |l, (_, c)| l.lcm(c.denom()));
        let terms = p
            .terms()
            .iter()
            .map(|(e, c)| {
                let v = (c * Rat::from_integer(lcm.clone())).to_integer();
                num::ToPrimitive::to_i128(&v).map(|v| (e.clone(), v))
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            lcm: num::ToPrimitive::to_i128(&lcm)?,
            deg: p.degree().max(1),
            terms,
        })
    }

    /// `q p(a/q) = num / (L q^{D-1})`.
    fn scaled(&self, a: &[i64], q: i64) -> Option<(i128, i128)> {
        let mut num: i128 = 0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (&k, &ai) in e.iter().zip(a) {
                t = t.checked_mul((ai as i128).checked_pow(k)?)?;
            }
            let total: u32 = e.iter().sum();
            t = t.checked_mul((q as i128).checked_pow(self.deg - total)?)?;
            num = num.checked_add(t)?;
        }
        Some((num, self.lcm.checked_mul((q as i128).checked_pow(self.deg - 1)?)?))
    }
}

/// Exact evaluator of `q f(a/q)`.
#[derive(Clone, Debug)]
struct Scaler<'a> {
    manifold: &'a Manifold,
    polys: Vec<Option<IntPoly>>,
    circle: Option<(i128, i128)>,
}

impl<'a> Scaler<'a> {
    fn new(m: &'a Manifold) -> Result<Self> {
        match m.model() {
            Model::Polynomial(ps) => Ok(Self {
                manifold: m,
                polys: ps.iter().map(IntPoly::new).collect(),
                circle: None,
            }),
            Model::Circle { r } => {
                let rn = num::ToPrimitive::to_i128(r.numer());
                let rd = num::ToPrimitive::to_i128(r.denom());
                match (rn, rd) {
                    (Some(n), Some(d)) => Ok(Self {
                        manifold: m,
                        polys: vec![],
                        circle: Some((n, d)),
                    }),
                    _ => Err(Error::InvalidArgument("circle radius too large".into())),
                }
            }
        }
    }

    fn eval(&self, a: &[i64], q: i64) -> Vec<Scaled> {
        if let Some((rn, rd)) = self.circle {
            let a0 = a[0] as i128;
            let q = q as i128;
            // q·sqrt(r − (a/q)²) = sqrt((rn q² − rd a²)/rd)
            return vec![match rn
                .checked_mul(q * q)
                .and_then(|t| rd.checked_mul(a0 * a0).and_then(|s| t.checked_sub(s)))
            {
                Some(n) => Scaled::SqrtFrac(n, rd),
                None => Scaled::SqrtFrac(i128::MAX, 1),
            }];
        }
        let Model::Polynomial(ps) = self.manifold.model() else {
            unreachable!()
        };
        ps.iter()
            .zip(&self.polys)
            .map(|(p, ip)| match ip.as_ref().and_then(|ip| ip.scaled(a, q)) {
                Some((n, d)) => Scaled::Frac(n, d),
                None => {
                    let x: Vec<Rat> = a.iter().map(|ai| rat(*ai, q)).collect();
                    Scaled::Big(rat(q, 1) * p.eval(&x))
                }
            })
            .collect()
    }
}

fn check_box(m: &Manifold, lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.len() != m.d() || hi.len() != m.d() {
        return Err(Error::DimensionMismatch("box dimension differs from d".into()));
    }
    let inside = lo
        .iter()
        .zip(hi)
        .zip(m.lo().iter().zip(m.hi()))
        .all(|((a, b), (dl, dh))| a <= b && *dl <= *a && *b <= *dh);
    if !inside {
        return Err(Error::InvalidArgument(format!("box {lo:?}..{hi:?} outside the domain")));
    }
    Ok(())
}

/// Integer vectors `a` with `a/q` in `[lo, hi]`.
fn numerators(q: i64, lo: &[f64], hi: &[f64]) -> Vec<Vec<i64>> {
    let ranges: Vec<(i64, i64)> = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| {
            let mut a = (l * q as f64).ceil() as i64;
            let mut b = (h * q as f64).floor() as i64;
            // rounding guard: keep exactly those with l <= a/q <= h
            while (a - 1) as f64 / q as f64 >= *l {
                a -= 1;
            }
            while (a as f64) / (q as f64) < *l {
                a += 1;
            }
            while (b + 1) as f64 / q as f64 <= *h {
                b += 1;
            }
            while (b as f64) / (q as f64) > *h {
                b -= 1;
            }
            (a, b)
        })
        .collect();
    let mut out = Vec::new();
    if ranges.iter().any(|(a, b)| a > b) {
        return out;
    }
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(cur.clone());
        let mut i = 0;
        while i < cur.len() {
            if cur[i] < ranges[i].1 {
                cur[i] += 1;
                break;
            }
            cur[i] = ranges[i].0;
            i += 1;
        }
        if i == cur.len() {
            return out;
        }
    }
}

fn cartesian(ranges: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for r in ranges {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                r.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Points `(q, a, b)` with `q` in `q_range`, `a/q ∈ [lo, hi]` and
/// `|q f_l(a/q) − b_l| <= ψ(q)` for every `l`.
///
/// Decisions are exact for polynomial and circle models. Output is sorted by `(q, a, b)`.
pub fn enumerate_where<F>(
    m: &Manifold,
    q_min: i64,
    q_max: i64,
    psi: F,
    lo: &[f64],
    hi: &[f64],
    primitive_only: bool,
) -> Result<Vec<RationalPoint>>
where
    F: Fn(i64) -> f64 + Sync,
{
    check_box(m, lo, hi)?;
    let scaler = Scaler::new(m)?;
    let q_min = q_min.max(1);
    let per_q: Vec<Result<Vec<RationalPoint>>> = (q_min..=q_max)
        .into_par_iter()
        .map(|q| {
            let psi_f = psi(q);
            if !(psi_f >= 0.0) || !psi_f.is_finite() {
                return Err(Error::InvalidArgument(format!("ψ({q}) = {psi_f} is not a finite non-negative number")));
            }
            let psi_r = Rat::from_float(psi_f).expect("finite");
            let mut out = Vec::new();
            for a in numerators(q, lo, hi) {
                let vals = scaler.eval(&a, q);
                let cands: Vec<Vec<i64>> = vals
                    .iter()
                    .map(|v| {
                        let c = v.to_f64();
                        let slack = 1e-9 * (1.0 + c.abs());
                        let lo_b = (c - psi_f - slack).ceil() as i64;
                        let hi_b = (c + psi_f + slack).floor() as i64;
                        (lo_b..=hi_b).filter(|b| v.within(*b, &psi_r, psi_f)).collect()
                    })
                    .collect();
                if cands.iter().any(|c| c.is_empty()) {
                    continue;
                }
                for b in cartesian(&cands) {
                    let g = a.iter().chain(&b).fold(q, |acc, v| gcd_i64(acc, *v));
                    if primitive_only && g != 1 {
                        continue;
                    }
                    let residual = vals
                        .iter()
                        .zip(&b)
                        .map(|(v, bl)| (v.to_f64() - *bl as f64).abs())
                        .fold(0.0, f64::max);
                    let residual_exact = vals
                        .iter()
                        .zip(&b)
                        .map(|(v, bl)| v.residual_exact(*bl))
                        .collect::<Option<Vec<Rat>>>()
                        .map(|rs| rs.into_iter().fold(rat(0, 1), |acc, r| if r > acc { r } else { acc }));
                    out.push(RationalPoint {
                        q,
                        a: a.clone(),
                        b,
                        residual: residual_exact.as_ref().map_or(residual, |r| r.to_f64()),
                        residual_exact,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for chunk in per_q {
        all.extend(chunk?);
    }
    Ok(all)
}

/// `|q f(a/q) − b|_∞`, exact for polynomial models.
pub fn point_residual(m: &Manifold, q: i64, a: &[i64], b: &[i64]) -> Result<(f64, Option<Rat>)> {
    if q < 1 || a.len() != m.d() || b.len() != m.m() {
        return Err(Error::DimensionMismatch("point does not match the manifold".into()));
    }
    let vals = Scaler::new(m)?.eval(a, q);
    let approx = vals.iter().zip(b).map(|(v, bl)| (v.to_f64() - *bl as f64).abs()).fold(0.0, f64::max);
    let exact = vals
        .iter()
        .zip(b)
        .map(|(v, bl)| v.residual_exact(*bl))
        .collect::<Option<Vec<Rat>>>()
        .map(|rs| rs.into_iter().fold(rat(0, 1), |acc, r| if r > acc { r } else { acc }));
    Ok((exact.as_ref().map_or(approx, |r| r.to_f64()), exact))
}

/// `R^δ(Q, ψ, B)`: primitive `(q, a, b)` with `δQ < q <= Q`, `a/q ∈ B` and
/// `|q f(a/q) − b|_∞ <= ψ`.
pub fn enumerate_r(m: &Manifold, q_max: i64, psi: f64, delta: f64, lo: &[f64], hi: &[f64]) -> Result<Vec<RationalPoint>> {
    if q_max < 1 || !(psi >= 0.0) || !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument("need Q >= 1, ψ >= 0 and 0 <= δ < 1".into()));
    }
    let q_min = (delta * q_max as f64).floor() as i64 + 1;
    enumerate_where(m, q_min, q_max, |_| psi, lo, hi, true)
}

/// Result of counting rational points within `ε` of a manifold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub q_max: i64,
    pub eps: f64,
    pub count: usize,
    /// Points whose numeric distance fell within the ambiguous band around `ε`; not counted.
    pub ambiguous: usize,
    pub points: Vec<(i64, Vec<i64>)>,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Near {
    Yes,
    No,
    Ambiguous,
}

/// Distance from `p` to the graph of `f` over `[lo, hi]`, by projected
/// Gauss–Newton from the vertical projection.
pub fn graph_distance(m: &Manifold, p: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let d = m.d();
    let clip = |x: &mut Vec<f64>| {
        for i in 0..d {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let objective = |x: &[f64]| -> f64 {
        let fx = m.eval_f64(x);
        (0..d).map(|i| (x[i] - p[i]).powi(2)).sum::<f64>()
            + fx.iter().zip(&p[d..]).map(|(f, t)| (f - t).powi(2)).sum::<f64>()
    };
    let mut x: Vec<f64> = p[..d].to_vec();
    clip(&mut x);
    let mut val = objective(&x);
    for _ in 0..60 {
        let Ok(jet) = m.jet::<f64>(&x, 1) else { break };
        let fx = jet.value().to_vec();
        // residual R = (x − p_x, f(x) − p_y), Jacobian J = [I; Df]
        let mut jtj = vec![vec![0.0; d]; d];
        let mut jtr = vec![0.0; d];
        for i in 0..d {
            jtj[i][i] += 1.0;
            jtr[i] += x[i] - p[i];
        }
        for l in 0..m.m() {
            let rl = fx[l] - p[d + l];
            for i in 0..d {
                let gi = jet.first(i)[l];
                jtr[i] += gi * rl;
                for j in 0..d {
                    jtj[i][j] += gi * jet.first(j)[l];
                }
            }
        }
        let Some(step) = crate::linalg::solve(&jtj, &jtr) else { break };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let mut cand: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - t * si).collect();
            clip(&mut cand);
            let v = objective(&cand);
            if v < val {
                let moved: f64 = cand.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
                x = cand;
                val = v;
                improved = moved > 1e-16;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    val.sqrt()
}

/// Tangent-plane data at the clamped abscissa `xc` of one numerator `a/q`.
///
/// With `T` the tangent plane of the graph at `xc`, `c2` a bound with
/// `|f(x) − f(xc) − J(x − xc)| <= c2 |x − xc|²` and `u` the parameter offset of
/// the foot of `P` on `T`, the distance satisfies
/// `dist(P, T) − c2 R² <= dist <= dist(P, T) + c2 |u|²` whenever the nearest
/// graph point lies within `R` of `xc` and the foot lies in the box.
struct Tangent {
    xc: Vec<f64>,
    fx: Vec<f64>,
    jac: Vec<Vec<f64>>,
    /// `(I + JᵀJ)^{-1}`.
    inv: Vec<Vec<f64>>,
    h: f64,
}

impl Tangent {
    fn new(m: &Manifold, xc: Vec<f64>, px: &[f64]) -> Option<Self> {
        let (d, mm) = (m.d(), m.m());
        let jet = m.jet::<f64>(&xc, 1).ok()?;
        let fx = jet.value().to_vec();
        let jac: Vec<Vec<f64>> = (0..mm).map(|l| (0..d).map(|i| jet.first(i)[l]).collect()).collect();
        let gram: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| f64::from(u8::from(i == j)) + (0..mm).map(|l| jac[l][i] * jac[l][j]).sum::<f64>()).collect())
            .collect();
        let inv = crate::linalg::inverse(&gram)?;
        let h = xc.iter().zip(px).map(|(c, x)| (c - x).powi(2)).sum::<f64>().sqrt();
        Some(Self { xc, fx, jac, inv, h })
    }

    /// f64 verdict for `P = (px, py)`, or `None` inside the undecided band.
    fn verdict(&self, px: &[f64], py: &[f64], eps: f64, c2: f64, lo: &[f64], hi: &[f64]) -> Option<Near> {
        const SLACK: f64 = 1e-12;
        let d = px.len();
        let dy: Vec<f64> = py.iter().zip(&self.fx).map(|(y, f)| y - f).collect();
        let rhs: Vec<f64> = (0..d)
            .map(|i| px[i] - self.xc[i] + self.jac.iter().zip(&dy).map(|(row, v)| row[i] * v).sum::<f64>())
            .collect();
        let u: Vec<f64> = self.inv.iter().map(|row| row.iter().zip(&rhs).map(|(a, b)| a * b).sum()).collect();
        let ex = (0..d).map(|i| (self.xc[i] + u[i] - px[i]).powi(2)).sum::<f64>();
        let ey = self
            .jac
            .iter()
            .zip(&dy)
            .map(|(row, v)| (row.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() - v).powi(2))
            .sum::<f64>();
        let plane = (ex + ey).sqrt();
        let reach = eps * (1.0 + AMBIGUOUS_BAND) + self.h + SLACK;
        if (plane - c2 * reach * reach) * (1.0 - 1e-9) >= eps * (1.0 + AMBIGUOUS_BAND) + SLACK {
            return Some(Near::No);
        }
        let u2: f64 = u.iter().map(|v| v * v).sum();
        let foot_inside = (0..d).all(|i| (lo[i]..=hi[i]).contains(&(self.xc[i] + u[i])));
        if foot_inside && (plane + c2 * u2) * (1.0 + 1e-9) + SLACK <= eps * (1.0 - AMBIGUOUS_BAND) {
            return Some(Near::Yes);
        }
        None
    }
}

fn near_graph(m: &Manifold, q: i64, a: &[i64], b: &[i64], eps: f64, lo: &[f64], hi: &[f64]) -> Near {
    if let Model::Circle { r } = m.model() {
        return near_circle(r, q, a[0], b[0], eps, lo[0], hi[0]);
    }
    let p: Vec<f64> = a.iter().chain(b).map(|v| *v as f64 / q as f64).collect();
    let dist = graph_distance(m, &p, lo, hi);
    if dist <= eps * (1.0 - AMBIGUOUS_BAND) {
        Near::Yes
    } else if dist >= eps * (1.0 + AMBIGUOUS_BAND) {
        Near::No
    } else {
        Near::Ambiguous
    }
}

/// Circle arc `{(x, sqrt(r − x²)) : x ∈ [lo, hi]}`: exact radial distance when the
/// radial projection lands on the arc, endpoint distance otherwise.
fn near_circle(r: &Rat, q: i64, a: i64, b: i64, eps: f64, lo: f64, hi: f64) -> Near {
    let (x, y) = (a as f64 / q as f64, b as f64 / q as f64);
    let rf = r.to_f64().sqrt();
    let norm = x.hypot(y);
    let on_arc = y > 0.0 && {
        let px = x / norm * rf;
        px >= lo && px <= hi
    };
    if on_arc {
        // | |P| − √r | <= ε  ⟺  s + r − ε² <= 2√(s r), with s = |P|²
        let s = rat(a * a + b * b, q * q);
        let e = Rat::from_float(eps).expect("finite ε");
        let lhs = &s + r - &e * &e;
        let inside = !lhs.is_positive() || &lhs * &lhs <= rat(4, 1) * &s * r;
        return if inside { Near::Yes } else { Near::No };
    }
    let end = |t: f64| ((x - t).powi(2) + (y - (r.to_f64() - t * t).max(0.0).sqrt()).powi(2)).sqrt();
    let dist = end(lo).min(end(hi));
    if dist <= eps * (1.0 - AMBIGUOUS_BAND) {
        Near::Yes
    } else if dist >= eps * (1.0 + AMBIGUOUS_BAND) {
        Near::No
    } else {
        Near::Ambiguous
    }
}

/// `N(Q, ε)`: reduced rational points `p/q ∈ Q^n`, `q <= Q`, within euclidean
/// distance `ε` of the graph of `f` over `[lo, hi]`.
pub fn count_n(m: &Manifold, q_max: i64, eps: f64, lo: &[f64], hi: &[f64], keep_points: bool) -> Result<CountReport> {
    if q_max < 1 || !(eps > 0.0) {
        return Err(Error::InvalidArgument("need Q >= 1 and ε > 0".into()));
    }
    check_box(m, lo, hi)?;
    let start = Instant::now();
    let lip = m.lipschitz();
    let d = m.d();
    let lip = lip * (m.m() as f64).sqrt();
    let circle = matches!(m.model(), Model::Circle { .. });
    // any point within ε has |b/q − f(xc)| below this
    let reach = (eps * (1.0 + AMBIGUOUS_BAND) + 1e-12) * (1.0 + lip * lip).sqrt() / (1.0 - 1e-9);
    // sampled second-derivative sup, inflated like the Lipschitz bound
    let c2 = 0.5 * 1.25 * m.derivative_sup(lo, hi, [513, 65, 17][d.min(3) - 1]) * d as f64 * (m.m() as f64).sqrt();
    let per_q: Vec<(usize, usize, Vec<(i64, Vec<i64>)>)> = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let qf = q as f64;
            let mut found = 0;
            let mut amb = 0;
            let mut pts = Vec::new();
            let lo_w: Vec<f64> = lo.iter().map(|v| v - eps).collect();
            let hi_w: Vec<f64> = hi.iter().map(|v| v + eps).collect();
            let mut b = vec![0i64; m.m()];
            let mut py = vec![0.0; m.m()];
            for a in numerators(q, &lo_w, &hi_w) {
                let px: Vec<f64> = a.iter().map(|v| *v as f64 / qf).collect();
                let xc: Vec<f64> = (0..d).map(|i| px[i].clamp(lo[i], hi[i])).collect();
                let tangent = Tangent::new(m, xc.clone(), &px);
                let fx = m.eval_f64(&xc);
                let ranges: Vec<(i64, i64)> = fx
                    .iter()
                    .map(|f| ((qf * (f - reach)).floor() as i64, (qf * (f + reach)).ceil() as i64))
                    .collect();
                let ga = a.iter().fold(q, |acc, v| gcd_i64(acc, *v));
                for (bl, r) in b.iter_mut().zip(&ranges) {
                    *bl = r.0;
                }
                loop {
                    for (y, bl) in py.iter_mut().zip(&b) {
                        *y = *bl as f64 / qf;
                    }
                    let verdict = tangent.as_ref().and_then(|t| t.verdict(&px, &py, eps, c2, lo, hi));
                    if verdict != Some(Near::No) && b.iter().fold(ga, |acc, v| gcd_i64(acc, *v)) == 1 {
                        let verdict = match verdict {
                            Some(Near::Yes) if !circle => Near::Yes,
                            _ => near_graph(m, q, &a, &b, eps, lo, hi),
                        };
                        match verdict {
                            Near::Yes => {
                                found += 1;
                                if keep_points {
                                    let mut p = a.clone();
                                    p.extend(&b);
                                    pts.push((q, p));
                                }
                            }
                            Near::Ambiguous => amb += 1,
                            Near::No => {}
                        }
                    }
                    let mut i = 0;
                    while i < b.len() {
                        if b[i] < ranges[i].1 {
                            b[i] += 1;
                            break;
                        }
                        b[i] = ranges[i].0;
                        i += 1;
                    }
                    if i == b.len() {
                        break;
                    }
                }
            }
            (found, amb, pts)
        })
        .collect();
    let mut report = CountReport {
        q_max,
        eps,
        count: 0,
        ambiguous: 0,
        points: Vec::new(),
        seconds: 0.0,
    };
    for (c, a, p) in per_q {
        report.count += c;
        report.ambiguous += a;
        report.points.extend(p);
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Union of sup-norm balls `B(a/q, ρ)` with a hashed lookup.
#[derive(Clone, Debug)]
pub struct BallUnion {
    rho: f64,
    centres: Vec<Vec<f64>>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl BallUnion {
    pub fn new(centres: Vec<Vec<f64>>, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument("ball radius must be positive".into()));
        }
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, c) in centres.iter().enumerate() {
            cells.entry(Self::key(c, rho)).or_default().push(i);
        }
        Ok(Self { rho, centres, cells })
    }

    fn key(x: &[f64], rho: f64) -> Vec<i64> {
        x.iter().map(|v| (v / rho).floor() as i64).collect()
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }
    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    /// Whether `x` lies within sup-distance `< ρ` of some centre.
    pub fn covers(&self, x: &[f64]) -> bool {
        let base = Self::key(x, self.rho);
        let d = x.len();
        let total = 3usize.pow(d as u32);
        (0..total).any(|mut idx| {
            let key: Vec<i64> = base
                .iter()
                .map(|b| {
                    let off = (idx % 3) as i64 - 1;
                    idx /= 3;
                    b + off
                })
                .collect();
            self.cells.get(&key).is_some_and(|ids| {
                ids.iter().any(|&i| {
                    self.centres[i].iter().zip(x).all(|(c, v)| (c - v).abs() < self.rho)
                })
            })
        })
    }
}

/// Grid fraction of `[lo, hi]` covered by `∪ B(a/q, ρ)` over `R^δ(Q, ψ, B)`.
pub fn coverage_measure(
    m: &Manifold,
    q_max: i64,
    psi: f64,
    delta: f64,
    rho: f64,
    lo: &[f64],
    hi: &[f64],
    grid_h: f64,
) -> Result<f64> {
    if !(grid_h > 0.0) || grid_h > rho / 10.0 {
        return Err(Error::ResolutionTooCoarse(format!("grid step {grid_h} exceeds ρ/10 = {}", rho / 10.0)));
    }
    let pts = enumerate_r(m, q_max, psi, delta, lo, hi)?;
    let union = BallUnion::new(pts.iter().map(|p| p.x()).collect(), rho)?;
    Ok(covered_fraction(&union, lo, hi, grid_h))
}

/// Fraction of grid cell centres of `[lo, hi]` covered by `union`.
pub fn covered_fraction(union: &BallUnion, lo: &[f64], hi: &[f64], grid_h: f64) -> f64 {
    let grid = cell_centres(lo, hi, grid_h);
    let hit = grid.par_iter().filter(|x| union.covers(x)).count();
    hit as f64 / grid.len() as f64
}

/// Approximation function `q ↦ ψ(q)`: a constant or `c·q^{-a}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PsiRule {
    Constant(f64),
    Power { scale: f64, exponent: f64 },
}

impl PsiRule {
    pub fn power(exponent: f64) -> Self {
        PsiRule::Power { scale: 1.0, exponent }
    }

    pub fn eval(&self, q: f64) -> f64 {
        match self {
            PsiRule::Constant(c) => *c,
            PsiRule::Power { scale, exponent } => scale * q.powf(-exponent),
        }
    }

    /// Parses `0.3`, `q^-0.8` or `2*q^-1`.
    pub fn parse(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Manifest(format!("bad ψ rule '{s}'"));
        let rule = match t.split_once("q^") {
            None => PsiRule::Constant(t.parse().map_err(|_| bad())?),
            Some((pre, exp)) => {
                let scale = match pre {
                    "" => 1.0,
                    p => p.strip_suffix('*').ok_or_else(bad)?.parse().map_err(|_| bad())?,
                };
                let e: f64 = exp.trim_start_matches('(').trim_end_matches(')').parse().map_err(|_| bad())?;
                PsiRule::Power { scale, exponent: -e }
            }
        };
        match rule {
            PsiRule::Constant(c) if !(c >= 0.0) || !c.is_finite() => Err(bad()),
            PsiRule::Power { scale, exponent } if !(scale > 0.0) || !exponent.is_finite() || !scale.is_finite() => Err(bad()),
            r => Ok(r),
        }
    }
}

impl std::fmt::Display for PsiRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PsiRule::Constant(c) => write!(f, "{c}"),
            PsiRule::Power { scale, exponent } if *scale == 1.0 => write!(f, "q^{}", -exponent),
            PsiRule::Power { scale, exponent } => write!(f, "{scale}*q^{}", -exponent),
        }
    }
}

/// Least-squares fit of `log y = slope · log x + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub ci_half_width: f64,
    pub points: usize,
}

/// Fits a power law through `(x, y)` pairs; requires at least four points and `x, y > 0`.
pub fn exponent_fit(series: &[(f64, f64)]) -> Result<ExponentFit> {
    if series.len() < 4 {
        return Err(Error::InvalidArgument("exponent fit needs at least 4 points".into()));
    }
    if series.iter().any(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::InvalidArgument("exponent fit needs positive values".into()));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(ExponentFit {
        slope,
        intercept,
        r_squared,
        ci_half_width: t * se,
        points: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_r(m: &Manifold, q_max: i64, psi: &Rat, delta: f64, lo: f64, hi: f64) -> Vec<(i64, i64, i64)> {
        let mut out = Vec::new();
        for q in 1..=q_max {
            if (q as f64) <= delta * q_max as f64 {
                continue;
            }
            for a in -4 * q_max..=4 * q_max {
                let x = rat(a, q);
                if x.to_f64() < lo || x.to_f64() > hi {
                    continue;
                }
                let v = rat(q, 1) * &m.eval(&[x]).unwrap()[0];
                for b in -4 * q_max..=4 * q_max {
                    if Signed::abs(&(&v - rat(b, 1))) <= *psi && gcd_i64(gcd_i64(q, a), b) == 1 {
                        out.push((q, a, b));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn parabola_small_example() {
        let m = Manifold::parabola();
        let pts = enumerate_r(&m, 3, 0.3, 0.0, &[0.0], &[1.0]).unwrap();
        let got: Vec<Vec<i64>> = pts.iter().map(|p| p.coords()).collect();
        assert_eq!(got, vec![vec![1, 0, 0], vec![1, 1, 1]]);
    }

    #[test]
    fn matches_naive_double_loop() {
        let m = Manifold::parabola();
        for (q, psi) in [(12, 0.25), (20, 0.1), (9, 0.5)] {
            let fast: Vec<(i64, i64, i64)> = enumerate_r(&m, q, psi, 0.0, &[-0.5], &[1.0])
                .unwrap()
                .iter()
                .map(|p| (p.q, p.a[0], p.b[0]))
                .collect();
            let mut slow = naive_r(&m, q, &Rat::from_float(psi).unwrap(), 0.0, -0.5, 1.0);
            slow.sort();
            assert_eq!(fast, slow);
        }
    }

    /// Every reduced `(a, b)` with `|b/q| <= 2`, decided by `graph_distance` alone.
    fn naive_count(m: &Manifold, q_max: i64, eps: f64) -> usize {
        let mm = m.m();
        let mut n = 0;
        for q in 1..=q_max {
            let lo_w: Vec<f64> = m.lo().iter().map(|v| v - eps).collect();
            let hi_w: Vec<f64> = m.hi().iter().map(|v| v + eps).collect();
            for a in numerators(q, &lo_w, &hi_w) {
                let range: Vec<i64> = (-2 * q..=2 * q).collect();
                for b in cartesian(&vec![range; mm]) {
                    if a.iter().chain(&b).fold(q, |acc, v| gcd_i64(acc, *v)) != 1 {
                        continue;
                    }
                    let p: Vec<f64> = a.iter().chain(&b).map(|v| *v as f64 / q as f64).collect();
                    if graph_distance(m, &p, m.lo(), m.hi()) <= eps {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn count_matches_unfiltered_scan() {
        let cases = [
            (Manifold::parabola(), 30, 0.047),
            (Manifold::veronese(3).unwrap(), 12, 0.083),
            (Manifold::power_block(2, 1, 1).unwrap(), 8, 0.11),
        ];
        for (m, q, eps) in cases {
            let rep = count_n(&m, q, eps, m.lo(), m.hi(), false).unwrap();
            assert_eq!(rep.ambiguous, 0, "{}", m.name());
            assert_eq!(rep.count, naive_count(&m, q, eps), "{}", m.name());
        }
    }

    #[test]
    fn zero_psi_on_veronese() {
        let m = Manifold::veronese(2).unwrap().restricted(vec![0.0], vec![0.9]).unwrap();
        let pts = enumerate_r(&m, 5, 0.0, 0.0, &[0.0], &[0.9]).unwrap();
        for p in &pts {
            assert_eq!(p.b[0] * p.q, p.a[0] * p.a[0]);
            assert_eq!(p.residual, 0.0);
        }
        assert!(pts.iter().any(|p| p.q == 1 && p.a == vec![0]));
    }

    #[test]
    fn delta_restricts_q() {
        let m = Manifold::parabola();
        let all = enumerate_r(&m, 100, 0.1, 0.0, &[0.0], &[1.0]).unwrap();
        let top = enumerate_r(&m, 100, 0.1, 0.99, &[0.0], &[1.0]).unwrap();
        assert!(top.iter().all(|p| p.q == 100));
        assert!(top.len() <= all.len());
    }

    #[test]
    fn points_lie_near_manifold() {
        let m = Manifold::parabola();
        let (q, psi, delta) = (80, 0.2, 0.3);
        let eps = psi / (delta * q as f64);
        for p in enumerate_r(&m, q, psi, delta, &[-1.0], &[1.0]).unwrap() {
            let pt: Vec<f64> = p.x().into_iter().chain([p.b[0] as f64 / p.q as f64]).collect();
            assert!(graph_distance(&m, &pt, &[-1.0], &[1.0]) <= eps);
        }
    }

    #[test]
    fn circle_has_no_close_points() {
        let m = Manifold::circle(rat(3, 1)).unwrap();
        let rep = count_n(&m, 10, 1e-4, m.lo(), m.hi(), false).unwrap();
        assert_eq!(rep.count, 0);
    }

    #[test]
    fn unit_circle_points_found() {
        let m = Manifold::circle(rat(1, 1)).unwrap();
        let rep = count_n(&m, 5, 1e-9, m.lo(), m.hi(), true).unwrap();
        // 3/5, 4/5 and 0/1 lie on the arc x ∈ [-0.9, 0.9]
        assert!(rep.points.contains(&(5, vec![3, 4])));
        assert!(rep.points.contains(&(1, vec![0, 1])));
    }

    #[test]
    fn coverage_saturates_and_vanishes() {
        let m = Manifold::parabola();
        let full = coverage_measure(&m, 10, 1.0, 0.0, 0.2, &[0.0], &[1.0], 0.01).unwrap();
        assert_eq!(full, 1.0);
        let tiny = coverage_measure(&m, 10, 0.01, 0.0, 1e-5, &[0.0], &[1.0], 1e-6).unwrap();
        assert!(tiny < 0.01);
        assert!(matches!(
            coverage_measure(&m, 10, 1.0, 0.0, 0.2, &[0.0], &[1.0], 0.1),
            Err(Error::ResolutionTooCoarse(_))
        ));
    }

    #[test]
    fn exact_power_law_slope() {
        let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|q: &f64| (*q, 2.0 * q.powi(3))).collect();
        let fit = exponent_fit(&s).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!(fit.r_squared > 0.999_999);
        assert!(exponent_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn psi_rule_parse() {
        assert_eq!(PsiRule::parse("0.3").unwrap(), PsiRule::Constant(0.3));
        assert_eq!(PsiRule::parse("q^-0.8").unwrap(), PsiRule::power(0.8));
        assert_eq!(PsiRule::parse("2 * q^-1").unwrap(), PsiRule::Power { scale: 2.0, exponent: 1.0 });
        assert!(PsiRule::parse("q^x").is_err());
        assert!(PsiRule::parse("-1").is_err());
        let r = PsiRule::parse("q^-2.2").unwrap();
        assert_eq!(PsiRule::parse(&r.to_string()).unwrap(), r);
        assert!((r.eval(10.0) - 10f64.powf(-2.2)).abs() < 1e-15);
    }
}
