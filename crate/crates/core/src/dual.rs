//! Dual curves `z = (y ∧ y' ∧ … ∧ y^{(n-1)})^⊥` of lifted curves and their Wronskians.

use crate::cells::CellParams;
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{grid_points, Manifold};
use crate::multivector::{hodge, MultiVector};
use crate::pbox::{ParallelepipedFamily, WeightProfile};
use crate::scalar::Scalar;
use serde::Serialize;

/// Inflation applied to the sampled supremum of `|z^{(i)}|`.
pub const K1_INFLATION: f64 = 1.1;

/// Determinant of the rows `v, v', …, v^{(k-1)}`.
pub fn wronskian<S: Scalar>(rows: &[Vec<S>]) -> S {
    linalg::det(&rows.to_vec())
}

/// Dual map of a curve (`d = 1`) in `R^n`, `n >= 2`.
#[derive(Clone, Debug)]
pub struct DualCurve<'a> {
    m: &'a Manifold,
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

impl<'a> DualCurve<'a> {
    pub fn new(m: &'a Manifold) -> Result<Self> {
        if m.d() != 1 {
            return Err(Error::InvalidArgument("dual curves need d = 1".into()));
        }
        if m.n() < 2 {
            return Err(Error::InvalidArgument("dual curves need n >= 2".into()));
        }
        Ok(Self { m })
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    /// `y, y', …, y^{(order)}` for `y = (1, x, f(x))`.
    pub fn y_derivatives<S: Scalar>(&self, x: &S, order: usize) -> Result<Vec<Vec<S>>> {
        let n = self.n();
        let jet = self.m.jet(std::slice::from_ref(x), order)?;
        Ok((0..=order)
            .map(|i| {
                let mut v = vec![S::zero(); n + 1];
                match i {
                    0 => {
                        v[0] = S::one();
                        v[1] = x.clone();
                    }
                    1 => v[1] = S::one(),
                    _ => {}
                }
                let f = jet.partial(&[i as u32]).expect("within jet order");
                for (l, val) in f.iter().enumerate() {
                    v[2 + l] = val.clone();
                }
                v
            })
            .collect())
    }

    /// `z^{(j)}(x)` for `j = 0..=up_to`, by the Leibniz rule on the wedge.
    pub fn z_derivatives<S: Scalar>(&self, x: &S, up_to: usize) -> Result<Vec<Vec<S>>> {
        let n = self.n();
        let ys = self.y_derivatives(x, (n - 1 + up_to).max(n))?;
        if wronskian(&ys[..=n]).is_negligible(1.0) {
            return Err(Error::Degenerate("W_y vanishes".into()));
        }
        (0..=up_to)
            .map(|j| {
                let mut acc = MultiVector::<S>::zero(n + 1, n)?;
                for k in compositions(j, n) {
                    let coeff = factorial(j) / k.iter().map(|&ki| factorial(ki)).product::<i64>();
                    let rows: Vec<Vec<S>> = k.iter().enumerate().map(|(i, &ki)| ys[i + ki].clone()).collect();
                    let w = MultiVector::wedge_vectors(n + 1, &rows)?;
                    acc = acc.add(&w.scale(&S::from_i64(coeff)))?;
                }
                hodge(&acc)?.as_vector()
            })
            .collect()
    }

    pub fn z<S: Scalar>(&self, x: &S) -> Result<Vec<S>> {
        Ok(self.z_derivatives(x, 0)?.remove(0))
    }

    /// `W_y(x) = det(y, y', …, y^{(n)})`.
    pub fn w_y<S: Scalar>(&self, x: &S) -> Result<S> {
        Ok(wronskian(&self.y_derivatives(x, self.n())?))
    }

    /// `W_z(x) = det(z, z', …, z^{(n)})`.
    pub fn w_z<S: Scalar>(&self, x: &S) -> Result<S> {
        Ok(wronskian(&self.z_derivatives(x, self.n())?))
    }

    /// `|W_z| / |W_y|^n`.
    pub fn wronskian_ratio<S: Scalar>(&self, x: &S) -> Result<S> {
        let wy = self.w_y(x)?;
        if wy.is_zero() {
            return Err(Error::Degenerate("W_y vanishes".into()));
        }
        Ok(self.w_z(x)?.abs() / wy.abs().powi(self.n() as u32))
    }

    /// Largest deviation in `z^{(j)}·y^{(i)} = 0` (`i+j < n`) and
    /// `z^{(j)}·y^{(i)} = (−1)^j W_y` (`i+j = n`), relative to `max(1, |W_y|)`.
    ///
    /// In rational mode the result is exactly zero when the relations hold.
    pub fn relation_defect<S: Scalar>(&self, x: &S) -> Result<S> {
        let n = self.n();
        let ys = self.y_derivatives(x, n)?;
        let zs = self.z_derivatives(x, n)?;
        let wy = wronskian(&ys);
        let mut worst = S::zero();
        for j in 0..=n {
            for i in 0..=(n - j) {
                let v = linalg::dot(&zs[j], &ys[i]);
                let target = if i + j < n {
                    S::zero()
                } else if j % 2 == 0 {
                    wy.clone()
                } else {
                    -wy.clone()
                };
                let dev = (v - target).abs();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        let scale = if wy.abs() > S::one() { wy.abs() } else { S::one() };
        Ok(worst / scale)
    }

    /// `K_1 = 1.1 · max |z^{(i)}(x)|` over `i <= n` and `per_axis` samples of `[lo, hi]`.
    pub fn k1_bound(&self, lo: f64, hi: f64, per_axis: usize) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for x in grid_points(&[lo], &[hi], per_axis) {
            for z in self.z_derivatives(&x[0], self.n())? {
                sup = sup.max(linalg::norm_f64(&z));
            }
        }
        Ok(K1_INFLATION * sup)
    }
}

/// Ratios `|W_z|/|W_y|^n` along sample points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub samples: Vec<(f64, f64)>,
    pub min_ratio: f64,
}

/// Checks `|W_z(x)| >= |W_y(x)|^n` at every sample; a breach beyond rounding
/// is an [`Error::InvariantViolation`].
pub fn wronskian_inequality_check(m: &Manifold, xs: &[f64]) -> Result<InequalityReport> {
    let dc = DualCurve::new(m)?;
    let mut samples = Vec::with_capacity(xs.len());
    let mut min_ratio = f64::INFINITY;
    for &x in xs {
        let ratio = dc.wronskian_ratio(&x)?;
        if ratio < 1.0 - 1e-9 {
            return Err(Error::InvariantViolation(format!("|W_z|/|W_y|^n = {ratio} < 1 at x = {x}")));
        }
        min_ratio = min_ratio.min(ratio);
        samples.push((x, ratio));
    }
    Ok(InequalityReport { samples, min_ratio })
}

/// Wronski matrix family `x ↦ (z^{(i-1)}_j(x))` of the dual map over `[lo, hi]`.
pub fn dual_family(m: &Manifold, lo: f64, hi: f64) -> Result<ParallelepipedFamily> {
    DualCurve::new(m)?;
    let k = m.n() + 1;
    let manifold = m.clone();
    ParallelepipedFamily::new(k, vec![lo], vec![hi], move |x: &[f64]| {
        DualCurve::new(&manifold)
            .and_then(|dc| dc.z_derivatives(&x[0], k - 1))
            .unwrap_or_else(|_| vec![vec![0.0; k]; k])
    })
}

/// `θ̄ = (K_1ψ_*, …, K_1ψ_*, 2K_1(ψ_*^{n-1}Q_*)^{-1}, 2K_1κQ_*)`, requiring
/// `C_0 Q^{-3/(2n-1)} < ψ < Q^{-1/n}` for `Q = c_0Q_*`, `ψ = c_0κ^{-2}ψ_*`.
pub fn curve_theta_profile(p: &CellParams, k1: f64, c_window: f64) -> Result<WeightProfile<f64>> {
    if p.d != 1 {
        return Err(Error::InvalidArgument("curve profile needs d = 1".into()));
    }
    let n = p.n();
    let (q, psi) = (p.big_q(), p.big_psi());
    let lo = c_window * q.powf(-3.0 / (2 * n - 1) as f64);
    let hi = q.powf(-1.0 / n as f64);
    if !(lo < psi && psi < hi) {
        return Err(Error::Precondition(format!("ψ = {psi} outside ({lo}, {hi})")));
    }
    let mut t = vec![k1 * p.psi_star; n - 1];
    t.push(2.0 * k1 / (p.psi_star.powi(n as i32 - 1) * p.q_star));
    t.push(2.0 * k1 * p.kappa * p.q_star);
    WeightProfile::new(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::SizeCondition;
    use crate::frames::FrameContext;
    use crate::scalar::{rat, Rat};

    #[test]
    fn veronese2_dual() {
        let m = Manifold::veronese(2).unwrap();
        let dc = DualCurve::new(&m).unwrap();
        let x = rat(3, 7);
        let z = dc.z(&x).unwrap();
        assert_eq!(z, vec![&x * &x, rat(-2, 1) * &x, rat(1, 1)]);
        let zs = dc.z_derivatives(&x, 2).unwrap();
        let ys = dc.y_derivatives(&x, 2).unwrap();
        assert_eq!(linalg::dot(&zs[1], &ys[1]), rat(-2, 1));
        assert_eq!(dc.w_y(&x).unwrap(), rat(2, 1));
        assert_eq!(dc.w_z(&x).unwrap(), rat(4, 1));
        assert_eq!(dc.wronskian_ratio(&x).unwrap(), rat(1, 1));
    }

    #[test]
    fn monomial_wronskians() {
        let x = rat(5, 3);
        let rows: Vec<Vec<Rat>> = vec![
            vec![rat(1, 1), x.clone(), &x * &x, &x * &x * &x],
            vec![rat(0, 1), rat(1, 1), rat(2, 1) * &x, rat(3, 1) * &x * &x],
            vec![rat(0, 1), rat(0, 1), rat(2, 1), rat(6, 1) * &x],
            vec![rat(0, 1), rat(0, 1), rat(0, 1), rat(6, 1)],
        ];
        assert_eq!(wronskian(&rows), rat(12, 1));
    }

    #[test]
    fn relations_exact_on_veronese3() {
        let m = Manifold::veronese(3).unwrap();
        let dc = DualCurve::new(&m).unwrap();
        for (p, q) in [(1, 3), (-4, 5), (7, 9), (0, 1)] {
            assert_eq!(dc.relation_defect(&rat(p, q)).unwrap(), rat(0, 1));
            assert!(dc.wronskian_ratio(&rat(p, q)).unwrap() >= rat(1, 1));
        }
    }

    #[test]
    fn relations_on_circle() {
        let m = Manifold::circle(rat(3, 1)).unwrap();
        let dc = DualCurve::new(&m).unwrap();
        for x in [-1.2, 0.0, 0.7, 1.5] {
            assert!(dc.relation_defect(&x).unwrap() < 1e-8);
        }
        let xs: Vec<f64> = (0..20).map(|i| -1.5 + 0.15 * i as f64).collect();
        assert!(wronskian_inequality_check(&m, &xs).unwrap().min_ratio >= 1.0 - 1e-9);
    }

    #[test]
    fn perturbed_cubic_inequality() {
        let poly = |c: &[i64]| crate::poly::Poly::univariate(&c.iter().map(|&v| rat(v, 1)).collect::<Vec<_>>());
        let m = Manifold::polynomial("cubic", 1, vec![poly(&[0, 0, 1]), poly(&[0, 1, 0, 1])], vec![-1.0], vec![1.0]).unwrap();
        let xs: Vec<f64> = (0..100).map(|i| -0.9 + 1.8 * i as f64 / 99.0).collect();
        assert!(wronskian_inequality_check(&m, &xs).unwrap().min_ratio >= 1.0);
    }

    #[test]
    fn curve_profile_sorted() {
        let m = Manifold::veronese(3).unwrap();
        let ctx = FrameContext::for_domain(&m).unwrap();
        let q_star: f64 = 20000.0;
        let p = CellParams::new(&m, &ctx, q_star, 0.004, 0.6, Some(2.0), SizeCondition::Unchecked).unwrap();
        let k1 = DualCurve::new(&m).unwrap().k1_bound(-0.9, 0.9, 33).unwrap();
        let t = curve_theta_profile(&p, k1, 1.0).unwrap();
        assert!(t.thetas().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(t.k(), 4);
    }
}
