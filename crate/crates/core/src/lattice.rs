//! Integer points in origin-centred ellipsoids, by Fincke–Pohst enumeration.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_upper, Matrix};
use std::ops::ControlFlow;

/// Relative slack added to the radius so that boundary points survive rounding.
const RADIUS_SLACK: f64 = 1e-7;

/// Visits every integer vector `z` with `zᵀ A z <= radius_sq` (plus a small
/// slack) for symmetric positive definite `A`, including `z = 0`.
///
/// Fails if more than `max_nodes` tree nodes would be explored.
pub fn enumerate_ellipsoid<F>(a: &Matrix<f64>, radius_sq: f64, max_nodes: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[i64]) -> ControlFlow<()>,
{
    let k = a.len();
    let r = cholesky_upper(a).ok_or_else(|| Error::Degenerate("quadratic form is not positive definite".into()))?;
    let bound = radius_sq * (1.0 + RADIUS_SLACK) + 1e-12;
    let mut z = vec![0i64; k];
    let mut nodes = 0usize;
    // partial[i] = Σ_{l>i} (R z)_l², for the coordinates already fixed.
    fn rec<F: FnMut(&[i64]) -> ControlFlow<()>>(
        i: usize,
        r: &Matrix<f64>,
        bound: f64,
        used: f64,
        z: &mut Vec<i64>,
        nodes: &mut usize,
        max_nodes: usize,
        visit: &mut F,
    ) -> Result<ControlFlow<()>> {
        let k = r.len();
        let shift: f64 = (i + 1..k).map(|j| r[i][j] * z[j] as f64).sum();
        let rii = r[i][i];
        let center = -shift / rii;
        let rem = (bound - used).max(0.0);
        let half = rem.sqrt() / rii;
        let lo = (center - half).ceil() as i64;
        let hi = (center + half).floor() as i64;
        for v in lo..=hi {
            *nodes += 1;
            if *nodes > max_nodes {
                return Err(Error::InvalidArgument(format!(
                    "lattice enumeration exceeded {max_nodes} nodes"
                )));
            }
            z[i] = v;
            let t = rii * v as f64 + shift;
            let used2 = used + t * t;
            if used2 > bound {
                continue;
            }
            let flow = if i == 0 {
                visit(z)
            } else {
                rec(i - 1, r, bound, used2, z, nodes, max_nodes, visit)?
            };
            if flow.is_break() {
                return Ok(flow);
            }
        }
        z[i] = 0;
        Ok(ControlFlow::Continue(()))
    }
    if k == 0 {
        return Ok(());
    }
    let _ = rec(k - 1, &r, bound, 0.0, &mut z, &mut nodes, max_nodes, &mut visit)?;
    Ok(())
}

/// Visits every integer vector in the box `|z_i| <= bounds[i]`.
pub fn enumerate_box<F>(bounds: &[i64], mut visit: F)
where
    F: FnMut(&[i64]) -> ControlFlow<()>,
{
    let k = bounds.len();
    let mut z: Vec<i64> = bounds.iter().map(|b| -b).collect();
    if k == 0 || bounds.iter().any(|&b| b < 0) {
        return;
    }
    loop {
        if visit(&z).is_break() {
            return;
        }
        let mut i = 0;
        loop {
            if i == k {
                return;
            }
            if z[i] < bounds[i] {
                z[i] += 1;
                break;
            }
            z[i] = -bounds[i];
            i += 1;
        }
    }
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

/// Divides by the gcd of the entries and makes the first non-zero entry positive.
pub fn primitive(v: &[i64]) -> Vec<i64> {
    let g = v.iter().fold(0, |acc, &x| gcd_i64(acc, x));
    if g == 0 {
        return v.to_vec();
    }
    let sign = v.iter().find(|&&x| x != 0).map_or(1, |x| x.signum());
    v.iter().map(|x| x / g * sign).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_matches_box_scan() {
        let a = vec![vec![2.0, 0.7, 0.1], vec![0.7, 1.0, 0.2], vec![0.1, 0.2, 0.3]];
        let radius = 7.5;
        let mut fp = Vec::new();
        enumerate_ellipsoid(&a, radius, 1_000_000, |z| {
            fp.push(z.to_vec());
            ControlFlow::Continue(())
        })
        .unwrap();
        let q = |z: &[i64]| -> f64 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += a[i][j] * z[i] as f64 * z[j] as f64;
                }
            }
            s
        };
        let mut brute = Vec::new();
        enumerate_box(&[10, 10, 10], |z| {
            if q(z) <= radius {
                brute.push(z.to_vec());
            }
            ControlFlow::Continue(())
        });
        fp.retain(|z| q(z) <= radius);
        fp.sort();
        brute.sort();
        assert_eq!(fp, brute);
    }

    #[test]
    fn primitive_normalises() {
        assert_eq!(primitive(&[0, -4, 6]), vec![0, 2, -3]);
        assert_eq!(primitive(&[3, 6, 9]), vec![1, 2, 3]);
    }
}
