//! Families of parallelepipeds `|Σ_j g_ij(x) a_j| <= θ_i` and the measure of
//! the set of `x` where they contain a non-zero integer point.

use crate::error::{Error, Result};
use crate::lattice::{enumerate_box, enumerate_ellipsoid};
use crate::linalg::{self, Matrix};
use crate::manifold::grid_points;
use crate::multivector::{wedge, MultiVector, Subspace};
use crate::scalar::{Rat, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::ops::ControlFlow;
use std::sync::Arc;

/// Node budget for a single lattice enumeration.
pub const ENUMERATION_BUDGET: usize = 50_000_000;

/// Thresholds `θ̄ = (θ_1, …, θ_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightProfile<S = f64> {
    thetas: Vec<S>,
}

impl<S: Scalar> WeightProfile<S> {
    pub fn new(thetas: Vec<S>) -> Result<Self> {
        if thetas.is_empty() || thetas.iter().any(|t| *t <= S::zero()) {
            return Err(Error::InvalidArgument("thresholds must be positive".into()));
        }
        Ok(Self { thetas })
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }
    pub fn thetas(&self) -> &[S] {
        &self.thetas
    }

    /// `θ^k = θ_1⋯θ_k`.
    pub fn product(&self) -> S {
        self.thetas.iter().fold(S::one(), |a, t| a * t.clone())
    }

    /// Geometric mean `θ`.
    pub fn theta(&self) -> f64 {
        let logs: f64 = self.thetas.iter().map(|t| t.to_f64().ln()).sum();
        (logs / self.k() as f64).exp()
    }

    pub fn to_f64(&self) -> WeightProfile<f64> {
        WeightProfile {
            thetas: self.thetas.iter().map(|t| t.to_f64()).collect(),
        }
    }

    /// Every threshold multiplied by `t`.
    pub fn scaled(&self, t: &S) -> Self {
        Self {
            thetas: self.thetas.iter().map(|v| v.clone() * t.clone()).collect(),
        }
    }

    /// Thresholds in increasing order.
    pub fn sorted(&self) -> Self {
        let mut t = self.thetas.clone();
        t.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
        Self { thetas: t }
    }

    /// `(θ_1⋯θ_r)^k / (θ_1⋯θ_k)^r` for `r = 1..k-1`, i.e. the k-th powers of
    /// the ratios whose maximum is `Θ̃`. Exact in rational mode.
    pub fn tilde_terms_pow_k(&self) -> Vec<S> {
        let k = self.k();
        let total = self.product();
        let mut prefix = S::one();
        (1..k)
            .map(|r| {
                prefix = prefix.clone() * self.thetas[r - 1].clone();
                prefix.powi(k as u32) / total.powi(r as u32)
            })
            .collect()
    }

    /// `Θ̃ = max_{1<=r<k} θ_1⋯θ_r / θ^r` (1 when `k = 1`).
    pub fn theta_tilde(&self) -> f64 {
        let th = self.theta().ln();
        let mut best = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for r in 1..self.k() {
            acc += self.thetas[r - 1].to_f64().ln();
            best = best.max(acc - r as f64 * th);
        }
        if best.is_finite() {
            best.exp()
        } else {
            1.0
        }
    }

    /// For increasing thresholds: `Θ̃^k <= θ_{k-1}/θ_k <= 1`, decided exactly in
    /// rational mode.
    pub fn sorted_tilde_bound_holds(&self) -> bool {
        let k = self.k();
        if k < 2 {
            return true;
        }
        let ratio = self.thetas[k - 2].clone() / self.thetas[k - 1].clone();
        self.tilde_terms_pow_k().into_iter().all(|t| t <= ratio) && ratio <= S::one()
    }
}

/// Real analytic functions of one variable used to build Wronski matrices.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticFn {
    /// `Σ c_i x^i`.
    Poly(Vec<Rat>),
    /// `exp(a x)`.
    Exp(f64),
    /// `sin(a x)`.
    Sin(f64),
    /// `cos(a x)`.
    Cos(f64),
}

impl AnalyticFn {
    /// `j`-th derivative at `x`.
    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        match self {
            AnalyticFn::Poly(c) => {
                let mut acc = 0.0;
                for (i, ci) in c.iter().enumerate().skip(j) {
                    let falling: f64 = (0..j).map(|t| (i - t) as f64).product();
                    acc += ci.to_f64() * falling * x.powi((i - j) as i32);
                }
                acc
            }
            AnalyticFn::Exp(a) => f64::powi(*a, j as i32) * (a * x).exp(),
            AnalyticFn::Sin(a) => f64::powi(*a, j as i32) * (a * x + j as f64 * std::f64::consts::FRAC_PI_2).sin(),
            AnalyticFn::Cos(a) => f64::powi(*a, j as i32) * (a * x + j as f64 * std::f64::consts::FRAC_PI_2).cos(),
        }
    }

    /// Parses `poly:c0,c1,...`, `exp:a`, `sin:a` or `cos:a`; bare `exp` means rate 1.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, arg) = s.trim().split_once(':').unwrap_or((s.trim(), "1"));
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number '{t}' in '{s}'")))
        };
        match kind {
            "poly" => arg
                .split(',')
                .map(|c| crate::scalar::parse_rat(c).ok_or_else(|| Error::InvalidArgument(format!("bad coefficient '{c}'"))))
                .collect::<Result<Vec<_>>>()
                .map(AnalyticFn::Poly),
            "exp" => Ok(AnalyticFn::Exp(num(arg)?)),
            "sin" => Ok(AnalyticFn::Sin(num(arg)?)),
            "cos" => Ok(AnalyticFn::Cos(num(arg)?)),
            other => Err(Error::InvalidArgument(format!("unknown function kind '{other}'"))),
        }
    }
}

type MatrixMap = Arc<dyn Fn(&[f64]) -> Matrix<f64> + Send + Sync>;

/// `x ↦ G(x) ∈ GL_k(R)` over a box; the rows of `G` are the vectors `g_i(x)`.
#[derive(Clone)]
pub struct ParallelepipedFamily {
    k: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    map: MatrixMap,
}

impl std::fmt::Debug for ParallelepipedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelepipedFamily")
            .field("k", &self.k)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish()
    }
}

impl ParallelepipedFamily {
    pub fn new<F>(k: usize, lo: Vec<f64>, hi: Vec<f64>, map: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Matrix<f64> + Send + Sync + 'static,
    {
        if k == 0 || lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("family needs k >= 1 and a box".into()));
        }
        Ok(Self {
            k,
            lo,
            hi,
            map: Arc::new(map),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn d(&self) -> usize {
        self.lo.len()
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn matrix(&self, x: &[f64]) -> Matrix<f64> {
        (self.map)(x)
    }
}

/// Wronski matrix `G(x) = (g_j^{(i-1)}(x))` of `k` functions over `[lo, hi]`.
///
/// Fails when the Wronskian vanishes at the midpoint.
pub fn wronski_family(fns: Vec<AnalyticFn>, lo: f64, hi: f64) -> Result<ParallelepipedFamily> {
    let k = fns.len();
    let fam = ParallelepipedFamily::new(k, vec![lo], vec![hi], move |x: &[f64]| {
        (0..k).map(|i| fns.iter().map(|g| g.derivative(i, x[0])).collect()).collect()
    })?;
    let mid = 0.5 * (lo + hi);
    let w = linalg::det(&fam.matrix(&[mid]));
    if w.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("Wronskian vanishes at {mid}")));
    }
    Ok(fam)
}

fn check_profile(p: &ParallelepipedFamily, theta: &WeightProfile<f64>) -> Result<()> {
    if theta.k() != p.k {
        return Err(Error::DimensionMismatch(format!("{} thresholds for k = {}", theta.k(), p.k)));
    }
    Ok(())
}

/// `|(G a)_i| <= θ_i` for all `i`.
pub fn satisfies(g: &Matrix<f64>, theta: &[f64], a: &[i64]) -> bool {
    g.iter().zip(theta).all(|(row, t)| {
        let s: f64 = row.iter().zip(a).map(|(gij, aj)| gij * *aj as f64).sum();
        s.abs() <= *t
    })
}

/// Whether the parallelepiped at `x` contains a non-zero integer point.
///
/// Enumerates integer points of the circumscribed ellipsoid
/// `|diag(θ)^{-1} G a|² <= k` and tests each exactly.
pub fn membership_a(p: &ParallelepipedFamily, theta: &WeightProfile<f64>, x: &[f64]) -> Result<bool> {
    check_profile(p, theta)?;
    let g = p.matrix(x);
    let t = theta.thetas();
    let k = p.k;
    let scaled: Matrix<f64> = g.iter().zip(t).map(|(row, ti)| row.iter().map(|v| v / ti).collect()).collect();
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = (0..k).map(|l| scaled[l][i] * scaled[l][j]).sum();
        }
    }
    let mut found = false;
    enumerate_ellipsoid(&a, k as f64, ENUMERATION_BUDGET, |z| {
        if z.iter().any(|&v| v != 0) && satisfies(&g, t, z) {
            found = true;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    Ok(found)
}

/// Same decision by scanning the box `|a|_∞ <= ⌈‖G^{-1}‖_∞ max θ⌉`.
pub fn membership_a_box(p: &ParallelepipedFamily, theta: &WeightProfile<f64>, x: &[f64]) -> Result<bool> {
    check_profile(p, theta)?;
    let g = p.matrix(x);
    let inv = linalg::inverse(&g).ok_or_else(|| Error::Degenerate("G(x) is singular".into()))?;
    let tmax = theta.thetas().iter().cloned().fold(0.0, f64::max);
    let b = (linalg::norm_inf(&inv) * tmax).ceil() as i64;
    if ((2 * b + 1) as f64).powi(p.k as i32) > 2e8 {
        return Err(Error::InvalidArgument(format!("box scan of radius {b} is too large")));
    }
    let mut found = false;
    enumerate_box(&vec![b; p.k], |z| {
        if z.iter().any(|&v| v != 0) && satisfies(&g, theta.thetas(), z) {
            found = true;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    Ok(found)
}

/// Decision through the lattice `h(x) Z^k`, `h = g_t G` with `t_i = θ/θ_i`:
/// true iff its shortest non-zero vector has sup-norm `<= θ`.
pub fn membership_lattice(p: &ParallelepipedFamily, theta: &WeightProfile<f64>, x: &[f64]) -> Result<bool> {
    check_profile(p, theta)?;
    let g = p.matrix(x);
    let th = theta.theta();
    let h: Matrix<f64> = g
        .iter()
        .zip(theta.thetas())
        .map(|(row, ti)| row.iter().map(|v| v * th / ti).collect())
        .collect();
    let k = p.k;
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = (0..k).map(|l| h[l][i] * h[l][j]).sum();
        }
    }
    let mut found = false;
    enumerate_ellipsoid(&a, k as f64 * th * th, ENUMERATION_BUDGET, |z| {
        if z.iter().any(|&v| v != 0) {
            let sup = h
                .iter()
                .map(|row| row.iter().zip(z).map(|(v, a)| v * *a as f64).sum::<f64>().abs())
                .fold(0.0, f64::max);
            if sup <= th * (1.0 + 1e-12) {
                found = true;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })?;
    Ok(found)
}

/// Largest row norm of `G` over a coarse sample of the box.
pub fn max_row_norm(p: &ParallelepipedFamily, lo: &[f64], hi: &[f64]) -> f64 {
    grid_points(lo, hi, 17)
        .iter()
        .flat_map(|x| p.matrix(x).into_iter().map(|row| linalg::norm_f64(&row)))
        .fold(0.0, f64::max)
}

/// Coarsest admissible grid spacing: `min θ_i / (10 · max row norm)`.
pub fn max_grid_step(p: &ParallelepipedFamily, theta: &WeightProfile<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    let tmin = theta.thetas().iter().cloned().fold(f64::INFINITY, f64::min);
    tmin / (10.0 * max_row_norm(p, lo, hi))
}

/// Cell centres of a grid with spacing close to `h` covering `[lo, hi]`.
pub fn cell_centres(lo: &[f64], hi: &[f64], h: f64) -> Vec<Vec<f64>> {
    let counts: Vec<usize> = lo.iter().zip(hi).map(|(a, b)| ((b - a) / h).ceil().max(1.0) as usize).collect();
    let total: usize = counts.iter().product();
    (0..total)
        .map(|mut idx| {
            (0..lo.len())
                .map(|i| {
                    let c = idx % counts[i];
                    idx /= counts[i];
                    lo[i] + (hi[i] - lo[i]) * (c as f64 + 0.5) / counts[i] as f64
                })
                .collect()
        })
        .collect()
}

/// Fraction of `[lo, hi]` lying in `A(G, θ̄)`, measured on a grid of spacing `h`.
pub fn measure_a(p: &ParallelepipedFamily, theta: &WeightProfile<f64>, lo: &[f64], hi: &[f64], h: f64) -> Result<f64> {
    check_profile(p, theta)?;
    let limit = max_grid_step(p, theta, lo, hi);
    if h > limit {
        return Err(Error::ResolutionTooCoarse(format!("grid step {h} exceeds {limit}")));
    }
    let pts = cell_centres(lo, hi, h);
    let hits = pts
        .par_iter()
        .map(|x| membership_a(p, theta, x).map(usize::from))
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / pts.len() as f64)
}

/// `Θ(x, V)`: the least `θ^{-r} Π_{j∈J} θ_j` over index sets `J` of size
/// `r = codim V` with `V ⊕ span(g_j(x) : j ∈ J) = R^k`.
pub fn theta_weight(p: &ParallelepipedFamily, theta: &WeightProfile<f64>, x: &[f64], v: &Subspace<f64>) -> Result<f64> {
    check_profile(p, theta)?;
    let k = p.k;
    if v.ambient() != k || v.dim() == 0 || v.dim() >= k {
        return Err(Error::InvalidArgument("V must be a proper non-zero subspace of R^k".into()));
    }
    let r = k - v.dim();
    let g = p.matrix(x);
    let vb = v.blade()?;
    let th = theta.theta().ln();
    let mut best = f64::INFINITY;
    for j in subsets(k, r) {
        let rows: Vec<Vec<f64>> = j.iter().map(|&i| g[i].clone()).collect();
        let gj = MultiVector::wedge_vectors(k, &rows)?;
        let top = wedge(&vb, &gj)?;
        if top.is_negligible(vb.norm() * gj.norm()) {
            continue;
        }
        let val: f64 = j.iter().map(|&i| theta.thetas()[i].ln()).sum::<f64>() - r as f64 * th;
        best = best.min(val);
    }
    if best.is_finite() {
        Ok(best.exp())
    } else {
        Err(Error::Degenerate("no complementary index set".into()))
    }
}

/// All `r`-subsets of `0..k` in lexicographic order.
pub fn subsets(k: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(k, r, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, r, 0, &mut Vec::new(), &mut out);
    out
}

/// Sampled estimate of the `θ̄`-weight `Θ̂(x_0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaHatEstimate {
    pub value: f64,
    /// `(radius, estimate)` for each shrinking neighbourhood.
    pub trace: Vec<(f64, f64)>,
    /// Whether the last two radii gave the same value.
    pub stabilized: bool,
}

/// Estimates `sup_V liminf_{x→x_0} Θ(x, V)` by taking, for each radius, the
/// minimum over a grid of the neighbourhood and the maximum over coordinate
/// subspaces plus `random_subspaces` seeded random ones.
pub fn theta_hat(
    p: &ParallelepipedFamily,
    theta: &WeightProfile<f64>,
    x0: &[f64],
    radii: &[f64],
    random_subspaces: usize,
    seed: u64,
) -> Result<ThetaHatEstimate> {
    let k = p.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spaces: Vec<Subspace<f64>> = Vec::new();
    for dim in 1..k {
        for s in subsets(k, dim) {
            let basis: Vec<Vec<f64>> = s
                .iter()
                .map(|&i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            spaces.push(Subspace::span(k, &basis)?);
        }
        for _ in 0..random_subspaces {
            let basis: Vec<Vec<f64>> = (0..dim).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let s = Subspace::span(k, &basis)?;
            if s.dim() == dim {
                spaces.push(s);
            }
        }
    }
    let mut trace = Vec::new();
    for &rad in radii {
        let lo: Vec<f64> = x0.iter().map(|c| c - rad).collect();
        let hi: Vec<f64> = x0.iter().map(|c| c + rad).collect();
        let pts = grid_points(&lo, &hi, if x0.len() == 1 { 33 } else { 9 });
        let mut sup: f64 = 0.0;
        for v in &spaces {
            let mut inf = f64::INFINITY;
            for x in &pts {
                inf = inf.min(theta_weight(p, theta, x, v)?);
            }
            sup = sup.max(inf);
        }
        trace.push((rad, sup));
    }
    let value = trace.last().map_or(f64::NAN, |t| t.1);
    let stabilized = trace.len() >= 2 && {
        let (a, b) = (trace[trace.len() - 2].1, trace[trace.len() - 1].1);
        (a - b).abs() <= 1e-12 * a.abs().max(1.0)
    };
    Ok(ThetaHatEstimate { value, trace, stabilized })
}

/// Fraction of grid points of the family's box where
/// `V ⊕ span(g_1(x), …, g_r(x)) = R^k`, `r = codim V`.
pub fn hierarchic_fraction(p: &ParallelepipedFamily, v: &Subspace<f64>, per_axis: usize) -> Result<f64> {
    let k = p.k;
    let r = k - v.dim();
    let vb = v.blade()?;
    let pts = grid_points(&p.lo, &p.hi, per_axis);
    let mut ok = 0usize;
    for x in &pts {
        let g = p.matrix(x);
        let gj = MultiVector::wedge_vectors(k, &g[..r])?;
        if !wedge(&vb, &gj)?.is_negligible(vb.norm() * gj.norm()) {
            ok += 1;
        }
    }
    Ok(ok as f64 / pts.len() as f64)
}

/// Empirical `(C, α)`-goodness constant of a function on a box.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodnessEstimate {
    pub alpha: f64,
    /// Largest observed `μ{|f| < ε sup|f|} / (ε^α μ(B))`.
    pub c: f64,
    pub worst_center: Vec<f64>,
    pub worst_radius: f64,
    pub worst_eps: f64,
}

/// Estimates the smallest `C` with `μ{x ∈ B' : |f| < ε sup_{B'}|f|} <= C ε^α μ(B')`
/// over sub-boxes `B'` of `[lo, hi]` and dyadic `ε` down to `2^{-6}`.
pub fn good_estimate<F>(f: F, lo: &[f64], hi: &[f64], alpha: f64) -> Result<GoodnessEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = lo.len();
    if d == 0 || hi.len() != d || !(alpha > 0.0) {
        return Err(Error::InvalidArgument("need a box and alpha > 0".into()));
    }
    let cells = if d == 1 { 8000 } else { 160 };
    let half = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min);
    let eps_grid: Vec<f64> = (0..=6).map(|j| 0.5f64.powi(j)).collect();
    let mut balls = Vec::new();
    for level in 0..5 {
        let r = half * 0.5f64.powi(level);
        let steps = 1usize << level;
        let per_axis: Vec<Vec<f64>> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| {
                let span = (b - a) - 2.0 * r;
                (0..=2 * steps).map(|s| a + r + span * s as f64 / (2 * steps) as f64).collect()
            })
            .collect();
        let mut idx = vec![0usize; d];
        loop {
            balls.push(((0..d).map(|i| per_axis[i][idx[i]]).collect::<Vec<f64>>(), r));
            let mut i = 0;
            while i < d {
                idx[i] += 1;
                if idx[i] < per_axis[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == d {
                break;
            }
        }
    }
    let results: Vec<(f64, Vec<f64>, f64, f64)> = balls
        .par_iter()
        .map(|(c, r)| {
            let blo: Vec<f64> = c.iter().map(|v| v - r).collect();
            let bhi: Vec<f64> = c.iter().map(|v| v + r).collect();
            let sup = grid_points(&blo, &bhi, cells + 1)
                .iter()
                .map(|x| f(x).abs())
                .fold(0.0, f64::max);
            let vals: Vec<f64> = cell_centres(&blo, &bhi, 2.0 * r / cells as f64).iter().map(|x| f(x).abs()).collect();
            let mut worst = (0.0, c.clone(), *r, 1.0);
            for &e in &eps_grid {
                let frac = vals.iter().filter(|v| **v < e * sup).count() as f64 / vals.len() as f64;
                let ratio = frac / e.powf(alpha);
                if ratio > worst.0 {
                    worst = (ratio, c.clone(), *r, e);
                }
            }
            worst
        })
        .collect();
    let best = results
        .into_iter()
        .fold((0.0, vec![], 0.0, 1.0), |a, b| if b.0 > a.0 { b } else { a });
    Ok(GoodnessEstimate {
        alpha,
        c: best.0,
        worst_center: best.1,
        worst_radius: best.2,
        worst_eps: best.3,
    })
}

/// Random subspace of dimension `dim` in `R^k`.
pub fn random_subspace(k: usize, dim: usize, rng: &mut impl Rng) -> Result<Subspace<f64>> {
    loop {
        let basis: Vec<Vec<f64>> = (0..dim).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let s = Subspace::span(k, &basis)?;
        if s.dim() == dim {
            return Ok(s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn quadratic_family() -> ParallelepipedFamily {
        wronski_family(
            vec![
                AnalyticFn::Poly(vec![rat(1, 1)]),
                AnalyticFn::Poly(vec![rat(0, 1), rat(1, 1)]),
                AnalyticFn::Poly(vec![rat(0, 1), rat(0, 1), rat(1, 1)]),
            ],
            0.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn wronskian_of_cubic_monomials() {
        let fam = wronski_family(
            (0..4)
                .map(|e| {
                    let mut c = vec![rat(0, 1); e + 1];
                    c[e] = rat(1, 1);
                    AnalyticFn::Poly(c)
                })
                .collect(),
            -1.0,
            1.0,
        )
        .unwrap();
        assert!((linalg::det(&fam.matrix(&[0.37])) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn exp_wronskian() {
        let fam = wronski_family(
            vec![AnalyticFn::Poly(vec![rat(1, 1)]), AnalyticFn::Poly(vec![rat(0, 1), rat(1, 1)]), AnalyticFn::Exp(1.0)],
            -1.0,
            1.0,
        )
        .unwrap();
        for x in [-0.5, 0.0, 0.8] {
            assert!((linalg::det(&fam.matrix(&[x])) - f64::exp(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_family_membership() {
        let fam = ParallelepipedFamily::new(2, vec![0.0], vec![1.0], |_| vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let small = WeightProfile::new(vec![0.5, 0.5]).unwrap();
        let big = WeightProfile::new(vec![1.0, 0.5]).unwrap();
        assert!(!membership_a(&fam, &small, &[0.3]).unwrap());
        assert!(membership_a(&fam, &big, &[0.3]).unwrap());
        assert!(membership_a_box(&fam, &big, &[0.3]).unwrap());
    }

    #[test]
    fn membership_paths_agree() {
        let fam = quadratic_family();
        let theta = WeightProfile::new(vec![0.05, 0.6, 30.0]).unwrap();
        for i in 0..200 {
            let x = [0.0025 + i as f64 * 0.005];
            let a = membership_a(&fam, &theta, &x).unwrap();
            assert_eq!(a, membership_a_box(&fam, &theta, &x).unwrap(), "x = {}", x[0]);
            assert_eq!(a, membership_lattice(&fam, &theta, &x).unwrap(), "x = {}", x[0]);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let fam = quadratic_family();
        let theta = WeightProfile::new(vec![0.05, 0.6, 30.0]).unwrap();
        assert!(matches!(measure_a(&fam, &theta, &[0.0], &[1.0], 0.1), Err(Error::ResolutionTooCoarse(_))));
    }

    #[test]
    fn tilde_bound_exact() {
        let w = WeightProfile::new(vec![rat(1, 7), rat(1, 3), rat(2, 1), rat(5, 1)]).unwrap();
        assert!(w.sorted_tilde_bound_holds());
        assert_eq!(w.product(), rat(10, 21));
    }

    #[test]
    fn theta_weight_coordinate_subspace() {
        let fam = ParallelepipedFamily::new(2, vec![0.0], vec![1.0], |_| vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let theta = WeightProfile::new(vec![0.25, 4.0]).unwrap();
        let v = Subspace::span(2, &[vec![1.0, 0.0]]).unwrap();
        // only g_2 = e_2 complements span(e_1).
        assert!((theta_weight(&fam, &theta, &[0.5], &v).unwrap() - 4.0).abs() < 1e-12);
    }
}
