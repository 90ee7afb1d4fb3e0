//! Multivariate polynomials with rational coefficients and truncated Taylor series.

use crate::scalar::{Rat, Scalar};
use num::bigint::BigInt;
use num::{Integer, One, ToPrimitive};


/// Sparse multivariate polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: Vec<(Vec<u32>, Rat)>,
    coeffs_f64: Vec<f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: Vec::new(),
            coeffs_f64: Vec::new(),
        }
    }

    pub fn monomial(exponents: Vec<u32>, coeff: Rat) -> Self {
        let nvars = exponents.len();
        let mut p = Self::zero(nvars);
        p.push(exponents, coeff);
        p
    }

    /// `c_0 + c_1 x + c_2 x² + …` in one variable.
    pub fn univariate(coeffs: &[Rat]) -> Self {
        let mut p = Self::zero(1);
        for (e, c) in coeffs.iter().enumerate() {
            p.push(vec![e as u32], c.clone());
        }
        p
    }

    fn push(&mut self, exponents: Vec<u32>, coeff: Rat) {
        if Scalar::is_zero(&coeff) {
            return;
        }
        match self.terms.iter_mut().find(|(e, _)| *e == exponents) {
            Some((_, c)) => *c += coeff,
            None => self.terms.push((exponents, coeff)),
        }
        self.terms.retain(|(_, c)| !Scalar::is_zero(c));
        self.coeffs_f64 = self.terms.iter().map(|(_, c)| Scalar::to_f64(c)).collect();
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }
    pub fn terms(&self) -> &[(Vec<u32>, Rat)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    /// Partial derivative along `var`.
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.push(e2, c * Rat::from_integer(BigInt::from(e[var])));
        }
        out
    }

    /// Mixed partial `∂^α`.
    pub fn partial(&self, alpha: &[u32]) -> Self {
        let mut p = self.clone();
        for (var, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                p = p.derivative(var);
            }
        }
        p
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        self.terms.iter().fold(S::zero(), |acc, (e, c)| {
            let mono = e
                .iter()
                .zip(x)
                .fold(S::from_rat(c), |m, (&k, xi)| m * xi.powi(k));
            acc + mono
        })
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.coeffs_f64)
            .fold(0.0, |acc, ((e, _), &c)| {
                acc + e.iter().zip(x).fold(c, |m, (&k, &xi)| m * xi.powi(k as i32))
            })
    }

    /// `q·p(a/q)` as an integer fraction `num/den`, or `None` on overflow.
    ///
    /// Uses `q·p(a/q) = Σ c_α a^α q^{1-|α|}`, homogenised to the common
    /// denominator `L·q^{D-1}` where `L` clears the coefficient denominators.
    pub fn scaled_at(&self, a: &[i64], q: i64) -> Option<(i128, i128)> {
        let deg = self.degree().max(1);
        let lcm = self
            .terms
            .iter()
            .fold(BigInt::one(), |l, (_, c)| l.lcm(c.denom()));
        let lcm = ToPrimitive::to_i128(&lcm)?;
        let mut num: i128 = 0;
        for (e, c) in &self.terms {
            let scaled = c * Rat::from_integer(BigInt::from(lcm));
            let mut t = ToPrimitive::to_i128(&scaled.to_integer())?;
            for (&k, &ai) in e.iter().zip(a) {
                t = t.checked_mul((ai as i128).checked_pow(k)?)?;
            }
            let total: u32 = e.iter().sum();
            t = t.checked_mul((q as i128).checked_pow(deg - total)?)?;
            num = num.checked_add(t)?;
        }
        let den = lcm.checked_mul((q as i128).checked_pow(deg - 1)?)?;
        Some((num, den))
    }
}

/// Taylor coefficients `h_k` with `h(x+t) = Σ h_k t^k` of `sqrt(g)` from those of `g`.
pub fn taylor_sqrt<S: Scalar>(g: &[S]) -> Option<Vec<S>> {
    let h0 = g.first()?.sqrt()?;
    if h0.is_zero() {
        return None;
    }
    let two_h0 = h0.clone() + h0.clone();
    let mut h = vec![h0];
    for k in 1..g.len() {
        let mut acc = g[k].clone();
        for i in 1..k {
            acc = acc - h[i].clone() * h[k - i].clone();
        }
        h.push(acc / two_h0.clone());
    }
    Some(h)
}

/// Taylor coefficients of a univariate polynomial around `x`, up to `order`.
pub fn taylor_poly<S: Scalar>(p: &Poly, x: &S, order: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(order + 1);
    let mut d = p.clone();
    let mut fact = S::one();
    for k in 0..=order {
        if k > 0 {
            d = d.derivative(0);
            fact = fact * S::from_i64(k as i64);
        }
        out.push(d.eval(std::slice::from_ref(x)) / fact.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn derivative_and_eval() {
        let p = Poly::univariate(&[rat(1, 1), rat(0, 1), rat(3, 1)]);
        assert_eq!(p.derivative(0).eval(&[rat(2, 1)]), rat(12, 1));
        assert_eq!(p.eval_f64(&[2.0]), 13.0);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn scaled_value_matches_rational() {
        let p = Poly::univariate(&[rat(0, 1), rat(1, 2), rat(0, 1), rat(1, 1)]);
        let (n, d) = p.scaled_at(&[3], 7).unwrap();
        let expect = rat(7, 1) * p.eval(&[rat(3, 7)]);
        assert_eq!(rat(n as i64, d as i64), expect);
    }

    #[test]
    fn sqrt_series_of_a_square() {
        let g = vec![rat(4, 1), rat(4, 1), rat(1, 1)];
        assert_eq!(taylor_sqrt(&g).unwrap(), vec![rat(2, 1), rat(1, 1), rat(0, 1)]);
    }
}
