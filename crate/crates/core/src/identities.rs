//! Exact checks of the exterior-algebra identities on explicit inputs, plus a
//! seeded driver that runs each on random rational instances.

use crate::error::Result;
use crate::multivector::{hodge, inner, interior, interior_left, wedge, MultiVector};
use crate::scalar::{rat, Rat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Determinant by Laplace expansion along the last row, memoized over
/// column subsets; the oracle for the elimination-based `det`.
fn det_laplace(m: &[Vec<Rat>]) -> Rat {
    let n = m.len();
    // dp[mask]: determinant of rows 0..|mask| restricted to the columns in mask
    let mut dp = vec![rat(0, 1); 1 << n];
    dp[0] = rat(1, 1);
    for mask in 1usize..1 << n {
        let row = &m[mask.count_ones() as usize - 1];
        let mut total = rat(0, 1);
        for c in (0..n).filter(|c| mask & (1 << c) != 0) {
            let rest = mask & !(1 << c);
            if row[c] == rat(0, 1) || dp[rest] == rat(0, 1) {
                continue;
            }
            let term = &row[c] * &dp[rest];
            // sign (−1)^{columns of mask after c}
            if (mask >> (c + 1)).count_ones() % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        dp[mask] = total;
    }
    dp[(1 << n) - 1].clone()
}

/// Wedge coefficients equal the `p × p` minors of the coordinate matrix.
pub fn wedge_minors(k: usize, vectors: &[Vec<Rat>]) -> Result<bool> {
    let w = MultiVector::wedge_vectors(k, vectors)?;
    for (set, c) in w.basis_sets().iter().zip(w.coeffs()) {
        let minor: Vec<Vec<Rat>> = vectors.iter().map(|v| set.iter().map(|&i| v[i].clone()).collect()).collect();
        if det_laplace(&minor) != *c {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(v_1∧…∧v_p)·(u_1∧…∧u_p) = det(v_i·u_j)`.
pub fn laplace(k: usize, vs: &[Vec<Rat>], us: &[Vec<Rat>]) -> Result<bool> {
    let lhs = inner(&MultiVector::wedge_vectors(k, vs)?, &MultiVector::wedge_vectors(k, us)?)?;
    let gram: Vec<Vec<Rat>> = vs
        .iter()
        .map(|v| us.iter().map(|u| v.iter().zip(u).map(|(a, b)| a * b).sum()).collect())
        .collect();
    Ok(lhs == det_laplace(&gram))
}

/// `|u∧v|² <= |u|²|v|²` for decomposable `u`.
pub fn wedge_norm_bound(u: &MultiVector<Rat>, v: &MultiVector<Rat>) -> Result<bool> {
    let w = wedge(u, v)?;
    Ok(w.norm_sq() <= u.norm_sq() * v.norm_sq())
}

/// `a·(b∧c) = (a·b)·c` and `(c∧b)·a = c·(b·a)`.
pub fn interior_associativity(a: &MultiVector<Rat>, b: &MultiVector<Rat>, c: &MultiVector<Rat>) -> Result<bool> {
    let right = interior(a, &wedge(b, c)?)? == interior(&interior(a, b)?, c)?;
    let left = interior_left(&wedge(c, b)?, a)? == interior_left(c, &interior_left(b, a)?)?;
    Ok(right && left)
}

/// `(v^⊥)^⊥ = (−1)^{(k−p)p} v`.
pub fn double_hodge(v: &MultiVector<Rat>) -> Result<bool> {
    let (k, p) = (v.dim(), v.grade());
    let twice = hodge(&hodge(v)?)?;
    let expected = if ((k - p) * p) % 2 == 0 { v.clone() } else { v.neg() };
    Ok(twice == expected)
}

/// `v^⊥·u = (v∧u)^⊥` and `|v^⊥·u| = |v∧u|` when `p + q <= k`.
pub fn hodge_wedge(v: &MultiVector<Rat>, u: &MultiVector<Rat>) -> Result<bool> {
    let lhs = interior(&hodge(v)?, u)?;
    let w = wedge(v, u)?;
    Ok(lhs == hodge(&w)? && lhs.norm_sq() == w.norm_sq())
}

/// Small random rational: an integer in `[-6, 6]` or such a numerator over `2..=5`.
pub fn random_rat(rng: &mut impl Rng) -> Rat {
    let num = rng.gen_range(-6..=6);
    if rng.gen_bool(0.7) {
        rat(num, 1)
    } else {
        rat(num, rng.gen_range(2..=5))
    }
}

pub fn random_vectors(k: usize, count: usize, rng: &mut impl Rng) -> Vec<Vec<Rat>> {
    (0..count).map(|_| (0..k).map(|_| random_rat(rng)).collect()).collect()
}

/// A general (usually indecomposable) element of grade `p`.
pub fn random_multivector(k: usize, p: usize, rng: &mut impl Rng) -> Result<MultiVector<Rat>> {
    let n = MultiVector::<Rat>::zero(k, p)?.coeffs().len();
    MultiVector::from_coeffs(k, p, (0..n).map(|_| random_rat(rng)).collect())
}

pub fn random_blade(k: usize, p: usize, rng: &mut impl Rng) -> Result<MultiVector<Rat>> {
    MultiVector::wedge_vectors(k, &random_vectors(k, p, rng))
}

/// Outcome of one identity over many instances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.instances > 0
    }
}

/// Names of the identities covered by [`run_identities`].
pub const IDENTITY_NAMES: [&str; 6] = [
    "wedge-minors",
    "laplace",
    "wedge-norm-bound",
    "interior-associativity",
    "double-hodge",
    "hodge-wedge",
];

fn one_instance(name: &str, k: usize, rng: &mut ChaCha8Rng) -> Result<bool> {
    match name {
        "wedge-minors" => {
            let p = rng.gen_range(1..=k);
            wedge_minors(k, &random_vectors(k, p, rng))
        }
        "laplace" => {
            let p = rng.gen_range(1..=k);
            laplace(k, &random_vectors(k, p, rng), &random_vectors(k, p, rng))
        }
        "wedge-norm-bound" => {
            let p = rng.gen_range(0..=k);
            let q = rng.gen_range(0..=k - p);
            wedge_norm_bound(&random_blade(k, p, rng)?, &random_multivector(k, q, rng)?)
        }
        "interior-associativity" => {
            let p = rng.gen_range(0..=k);
            let q = rng.gen_range(0..=p);
            let r = rng.gen_range(0..=p - q);
            interior_associativity(
                &random_multivector(k, p, rng)?,
                &random_multivector(k, q, rng)?,
                &random_multivector(k, r, rng)?,
            )
        }
        "double-hodge" => {
            let p = rng.gen_range(0..=k);
            double_hodge(&random_multivector(k, p, rng)?)
        }
        "hodge-wedge" => {
            let q = rng.gen_range(0..=k);
            let p = rng.gen_range(0..=k - q);
            hodge_wedge(&random_multivector(k, q, rng)?, &random_multivector(k, p, rng)?)
        }
        other => unreachable!("unknown identity {other}"),
    }
}

/// Runs every identity on `instances` random cases with `2 <= k <= max_k`.
///
/// Runs on the calling thread so that thread-local test hooks apply.
pub fn run_identities(instances: usize, max_k: usize, seed: u64) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for (idx, name) in IDENTITY_NAMES.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
        let mut failures = 0;
        for i in 0..instances {
            let k = 2 + i % (max_k - 1);
            if !one_instance(name, k, &mut rng)? {
                failures += 1;
            }
        }
        out.push(IdentityReport {
            name,
            instances,
            failures,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multivector::set_hodge_sign_mutation;

    #[test]
    fn all_identities_hold() {
        for r in run_identities(200, 6, 1).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn laplace_matches_known() {
        let m = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 3), rat(4, 1)]];
        assert_eq!(det_laplace(&m), rat(23, 3));
        let p = vec![
            vec![rat(0, 1), rat(1, 1), rat(0, 1)],
            vec![rat(0, 1), rat(0, 1), rat(1, 1)],
            vec![rat(1, 1), rat(0, 1), rat(0, 1)],
        ];
        assert_eq!(det_laplace(&p), rat(1, 1));
        assert_eq!(det_laplace(&[]), rat(1, 1));
    }

    #[test]
    fn laplace_matches_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=6 {
            let m = random_vectors(n, n, &mut rng);
            assert_eq!(det_laplace(&m), crate::linalg::det(&m));
        }
    }

    #[test]
    fn mutation_breaks_double_hodge() {
        set_hodge_sign_mutation(true);
        let reports = run_identities(50, 5, 3).unwrap();
        set_hodge_sign_mutation(false);
        let dh = reports.iter().find(|r| r.name == "double-hodge").unwrap();
        assert!(dh.failures > 0);
    }
}
