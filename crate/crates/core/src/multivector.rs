//! Exterior algebra over `R^k` for `k <= 12`.
//!
//! A grade-`p` multivector stores one coefficient per sorted `p`-subset of
//! `{0, ..., k-1}`, listed lexicographically; subsets are encoded as bitmasks.
//! The interior product follows the convention `(u·v)·x = u·(v∧x)` and the Hodge
//! star is `u^⊥ = i·u` with `i = e_0∧…∧e_{k-1}`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;
use std::cell::Cell;
use std::sync::OnceLock;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 12;

struct BladeTable {
    /// `masks[p]` lists the `p`-subsets in lexicographic order.
    masks: Vec<Vec<u16>>,
    /// Position of a mask inside its grade.
    index: Vec<u32>,
}

fn build_table(k: usize) -> BladeTable {
    fn rec(k: usize, start: usize, left: usize, cur: u16, out: &mut Vec<u16>) {
        if left == 0 {
            out.push(cur);
            return;
        }
        for i in start..k {
            if k - i < left {
                break;
            }
            rec(k, i + 1, left - 1, cur | (1 << i), out);
        }
    }
    let mut masks = Vec::with_capacity(k + 1);
    let mut index = vec![0u32; 1 << k];
    for p in 0..=k {
        let mut v = Vec::new();
        rec(k, 0, p, 0, &mut v);
        for (i, &m) in v.iter().enumerate() {
            index[m as usize] = i as u32;
        }
        masks.push(v);
    }
    BladeTable { masks, index }
}

fn table(k: usize) -> &'static BladeTable {
    static TABLES: OnceLock<Vec<BladeTable>> = OnceLock::new();
    &TABLES.get_or_init(|| (0..=MAX_DIM).map(build_table).collect())[k]
}

/// Sign of `e_A ∧ e_B` relative to `e_{A∪B}` for disjoint `A`, `B`.
#[inline]
fn wedge_sign(a: u16, b: u16) -> bool {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    swaps % 2 == 1
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

thread_local! {
    static HODGE_SIGN_MUTATION: Cell<bool> = const { Cell::new(false) };
}

/// Test hook: when enabled on the current thread, the Hodge star of grade-1
/// inputs is negated. Used to check that the self-test catches a sign error.
#[doc(hidden)]
pub fn set_hodge_sign_mutation(enabled: bool) {
    HODGE_SIGN_MUTATION.with(|c| c.set(enabled));
}

/// Homogeneous multivector of fixed grade.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiVector<S = f64> {
    dim: usize,
    grade: usize,
    coeffs: Vec<S>,
    decomposable: bool,
}

impl<S: Scalar> MultiVector<S> {
    fn check_dim(dim: usize) -> Result<()> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "ambient dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        Ok(())
    }

    pub fn zero(dim: usize, grade: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        if grade > dim {
            return Err(Error::GradeMismatch(format!("grade {grade} exceeds dimension {dim}")));
        }
        Ok(Self {
            dim,
            grade,
            coeffs: vec![S::zero(); binomial(dim, grade)],
            decomposable: true,
        })
    }

    /// Grade-0 element.
    pub fn scalar(dim: usize, s: S) -> Result<Self> {
        let mut z = Self::zero(dim, 0)?;
        z.coeffs[0] = s;
        Ok(z)
    }

    /// Grade-1 element with the given coordinates.
    pub fn vector(coords: &[S]) -> Result<Self> {
        Self::check_dim(coords.len())?;
        Ok(Self {
            dim: coords.len(),
            grade: 1,
            coeffs: coords.to_vec(),
            decomposable: true,
        })
    }

    /// Builds a multivector from coefficients in lexicographic subset order.
    pub fn from_coeffs(dim: usize, grade: usize, coeffs: Vec<S>) -> Result<Self> {
        Self::check_dim(dim)?;
        if grade > dim || coeffs.len() != binomial(dim, grade) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients for grade {grade} in dimension {dim}, got {}",
                binomial(dim, grade),
                coeffs.len()
            )));
        }
        let decomposable = grade <= 1 || grade + 1 >= dim;
        Ok(Self {
            dim,
            grade,
            coeffs,
            decomposable,
        })
    }

    /// `e_{i_1} ∧ … ∧ e_{i_p}` for arbitrary (possibly unsorted) indices.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut out = Self::scalar(dim, S::one())?;
        for &i in indices {
            if i >= dim {
                return Err(Error::InvalidArgument(format!("index {i} out of range for dimension {dim}")));
            }
            let mut e = vec![S::zero(); dim];
            e[i] = S::one();
            out = wedge(&out, &Self::vector(&e)?)?;
        }
        Ok(out)
    }

    /// The unit pseudoscalar `e_0 ∧ … ∧ e_{k-1}`.
    pub fn pseudoscalar(dim: usize) -> Result<Self> {
        let mut top = Self::zero(dim, dim)?;
        top.coeffs[0] = S::one();
        Ok(top)
    }

    /// Wedge of a list of vectors; the result is flagged decomposable.
    pub fn wedge_vectors(dim: usize, vectors: &[Vec<S>]) -> Result<Self> {
        let mut out = Self::scalar(dim, S::one())?;
        for v in vectors {
            out = wedge(&out, &Self::vector(v)?)?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn grade(&self) -> usize {
        self.grade
    }
    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }
    /// True when the value is known to be a wedge of vectors.
    pub fn is_decomposable(&self) -> bool {
        self.decomposable
    }

    /// Sorted index sets matching `coeffs()` positions.
    pub fn basis_sets(&self) -> Vec<Vec<usize>> {
        table(self.dim).masks[self.grade]
            .iter()
            .map(|&m| (0..self.dim).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    /// Coefficient on `e_I` for a sorted index set.
    pub fn coeff(&self, indices: &[usize]) -> Option<&S> {
        if indices.len() != self.grade || indices.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        let mask = indices.iter().try_fold(0u16, |m, &i| (i < self.dim).then(|| m | 1 << i))?;
        Some(&self.coeffs[table(self.dim).index[mask as usize] as usize])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Zero up to the scalar-mode tolerance relative to `scale`.
    pub fn is_negligible(&self, scale: f64) -> bool {
        self.coeffs.iter().all(|c| c.is_negligible(scale))
    }

    pub fn norm_sq(&self) -> S {
        self.coeffs
            .iter()
            .fold(S::zero(), |acc, c| acc + c.clone() * c.clone())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().to_f64().max(0.0).sqrt()
    }

    pub fn scale(&self, s: &S) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect(),
            ..self.clone()
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-S::one())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim, other.dim)));
        }
        if self.grade != other.grade {
            return Err(Error::GradeMismatch(format!("{} vs {}", self.grade, other.grade)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        Self::from_coeffs(self.dim, self.grade, coeffs)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Coordinates of a grade-1 element.
    pub fn as_vector(&self) -> Result<Vec<S>> {
        if self.grade != 1 {
            return Err(Error::GradeMismatch(format!("expected grade 1, got {}", self.grade)));
        }
        Ok(self.coeffs.clone())
    }

    /// Value of a grade-0 element.
    pub fn as_scalar(&self) -> Result<S> {
        if self.grade != 0 {
            return Err(Error::GradeMismatch(format!("expected grade 0, got {}", self.grade)));
        }
        Ok(self.coeffs[0].clone())
    }

    pub fn to_f64(&self) -> MultiVector<f64> {
        MultiVector {
            dim: self.dim,
            grade: self.grade,
            coeffs: self.coeffs.iter().map(|c| c.to_f64()).collect(),
            decomposable: self.decomposable,
        }
    }
}

fn check_same_dim<S>(u: &MultiVector<S>, v: &MultiVector<S>) -> Result<()> {
    if u.dim != v.dim {
        return Err(Error::DimensionMismatch(format!("{} vs {}", u.dim, v.dim)));
    }
    Ok(())
}

/// Exterior product `u ∧ v`.
pub fn wedge<S: Scalar>(u: &MultiVector<S>, v: &MultiVector<S>) -> Result<MultiVector<S>> {
    check_same_dim(u, v)?;
    let k = u.dim;
    let grade = u.grade + v.grade;
    if grade > k {
        return Err(Error::GradeMismatch(format!("wedge grade {grade} exceeds dimension {k}")));
    }
    let mut out = MultiVector::<S>::zero(k, grade)?;
    let t = table(k);
    for (ia, &a) in t.masks[u.grade].iter().enumerate() {
        let ua = &u.coeffs[ia];
        if ua.is_zero() {
            continue;
        }
        for (ib, &b) in t.masks[v.grade].iter().enumerate() {
            if a & b != 0 || v.coeffs[ib].is_zero() {
                continue;
            }
            let slot = t.index[(a | b) as usize] as usize;
            let term = ua.clone() * v.coeffs[ib].clone();
            out.coeffs[slot] = if wedge_sign(a, b) {
                out.coeffs[slot].clone() - term
            } else {
                out.coeffs[slot].clone() + term
            };
        }
    }
    out.decomposable = (u.decomposable && v.decomposable) || grade <= 1 || grade + 1 >= k;
    Ok(out)
}

/// Inner product of equal-grade multivectors.
pub fn inner<S: Scalar>(u: &MultiVector<S>, v: &MultiVector<S>) -> Result<S> {
    u.same_shape(v)?;
    Ok(linalg::dot(&u.coeffs, &v.coeffs))
}

/// Interior product `u·v` for `grade(u) >= grade(v)`, characterised by
/// `(u·v)·x = u·(v∧x)`.
pub fn interior<S: Scalar>(u: &MultiVector<S>, v: &MultiVector<S>) -> Result<MultiVector<S>> {
    contract(u, v, false)
}

/// Interior product `v·u` with the lower-grade factor on the left, characterised
/// by `x·(v·u) = (x∧v)·u`. Equals `(-1)^{q(p-q)} u·v`.
pub fn interior_left<S: Scalar>(v: &MultiVector<S>, u: &MultiVector<S>) -> Result<MultiVector<S>> {
    contract(u, v, true)
}

fn contract<S: Scalar>(u: &MultiVector<S>, v: &MultiVector<S>, left: bool) -> Result<MultiVector<S>> {
    check_same_dim(u, v)?;
    if v.grade > u.grade {
        return Err(Error::GradeMismatch(format!(
            "interior product needs grade {} >= {}",
            u.grade, v.grade
        )));
    }
    let k = u.dim;
    let t = table(k);
    let mut out = MultiVector::<S>::zero(k, u.grade - v.grade)?;
    for (ij, &j) in t.masks[out.grade].iter().enumerate() {
        let mut acc = S::zero();
        for (ii, &i) in t.masks[v.grade].iter().enumerate() {
            if i & j != 0 || v.coeffs[ii].is_zero() {
                continue;
            }
            let uc = &u.coeffs[t.index[(i | j) as usize] as usize];
            if uc.is_zero() {
                continue;
            }
            let term = v.coeffs[ii].clone() * uc.clone();
            let negative = if left { wedge_sign(j, i) } else { wedge_sign(i, j) };
            acc = if negative { acc - term } else { acc + term };
        }
        out.coeffs[ij] = acc;
    }
    out.decomposable = (u.decomposable && v.decomposable) || out.grade <= 1 || out.grade + 1 >= k;
    Ok(out)
}

/// Hodge star `u^⊥ = i·u`.
pub fn hodge<S: Scalar>(u: &MultiVector<S>) -> Result<MultiVector<S>> {
    let top = MultiVector::pseudoscalar(u.dim)?;
    let mut out = interior(&top, u)?;
    out.decomposable = u.decomposable || out.grade <= 1 || out.grade + 1 >= u.dim;
    if u.grade == 1 && HODGE_SIGN_MUTATION.with(|c| c.get()) {
        out = out.neg();
    }
    Ok(out)
}

/// Orthogonal projection of the vector `u` onto `V(v)`.
///
/// Computed from `v·(v·u) = ±|v|² π(u)`; the sign is fixed by requiring
/// `u·π(u) >= 0`.
pub fn project<S: Scalar>(v: &MultiVector<S>, u: &[S]) -> Result<Vec<S>> {
    if v.grade == 0 {
        return Err(Error::GradeMismatch("projection onto a grade-0 element".into()));
    }
    if u.len() != v.dim {
        return Err(Error::DimensionMismatch(format!("{} vs {}", u.len(), v.dim)));
    }
    let nv = v.norm_sq();
    if nv.is_negligible(0.0) {
        return Err(Error::Degenerate("projection onto a zero multivector".into()));
    }
    let uv = MultiVector::vector(u)?;
    let w = interior(v, &interior(v, &uv)?)?.coeffs;
    let sign = linalg::dot(u, &w);
    let s = if sign < S::zero() { -nv } else { nv };
    Ok(w.into_iter().map(|c| c / s.clone()).collect())
}

/// `(1, x)`.
pub fn lift<S: Scalar>(x: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(S::one());
    out.extend(x.iter().cloned());
    out
}

/// `|a∧b|²` for two vectors via their 2x2 minors.
pub fn wedge_norm_sq<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let m = a[i].clone() * b[j].clone() - a[j].clone() * b[i].clone();
            acc = acc + m.clone() * m;
        }
    }
    acc
}

/// Square of the projective distance `|x̂∧ŷ|/(|x̂||ŷ|)` between lifted points.
pub fn projective_distance_sq<S: Scalar>(x: &[S], y: &[S]) -> Result<S> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", x.len(), y.len())));
    }
    let (xh, yh) = (lift(x), lift(y));
    let num = wedge_norm_sq(&xh, &yh);
    Ok(num / (linalg::dot(&xh, &xh) * linalg::dot(&yh, &yh)))
}

/// Projective distance between two points of `R^n`.
pub fn projective_distance<S: Scalar>(x: &[S], y: &[S]) -> Result<f64> {
    Ok(projective_distance_sq(x, y)?.to_f64().max(0.0).sqrt())
}

/// Whether the vector `x` lies in `V(w)`, i.e. `w∧x` vanishes.
pub fn span_membership<S: Scalar>(w: &MultiVector<S>, x: &[S]) -> Result<bool> {
    let xv = MultiVector::vector(x)?;
    let p = wedge(w, &xv)?;
    Ok(p.is_negligible(w.norm() * xv.norm()))
}

/// Linear subspace given by a basis of independent vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<S = f64> {
    ambient: usize,
    basis: Vec<Vec<S>>,
}

impl<S: Scalar> Subspace<S> {
    /// Span of `vectors`; dependent vectors are dropped.
    pub fn span(ambient: usize, vectors: &[Vec<S>]) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != ambient) {
            return Err(Error::DimensionMismatch("basis vector length".into()));
        }
        let mut basis: Vec<Vec<S>> = Vec::new();
        for v in vectors {
            let mut trial = basis.clone();
            trial.push(v.clone());
            if linalg::rank(&trial) == trial.len() {
                basis = trial;
            }
        }
        Ok(Self { ambient, basis })
    }

    /// `V(w) = {x : w∧x = 0}`.
    pub fn of_blade(w: &MultiVector<S>) -> Result<Self> {
        let k = w.dim;
        if w.grade >= k {
            let id: Vec<Vec<S>> = (0..k)
                .map(|i| (0..k).map(|j| if i == j { S::one() } else { S::zero() }).collect())
                .collect();
            return Ok(Self { ambient: k, basis: if w.is_zero() { vec![] } else { id } });
        }
        let mut cols: Vec<Vec<S>> = Vec::with_capacity(k);
        for j in 0..k {
            let mut e = vec![S::zero(); k];
            e[j] = S::one();
            cols.push(wedge(w, &MultiVector::vector(&e)?)?.coeffs);
        }
        let rows = cols[0].len();
        let m: Matrix<S> = (0..rows).map(|r| cols.iter().map(|c| c[r].clone()).collect()).collect();
        Ok(Self {
            ambient: k,
            basis: linalg::null_space(&m, k),
        })
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
    pub fn basis(&self) -> &[Vec<S>] {
        &self.basis
    }

    /// Wedge of the basis vectors.
    pub fn blade(&self) -> Result<MultiVector<S>> {
        MultiVector::wedge_vectors(self.ambient, &self.basis)
    }

    /// Orthogonal complement.
    pub fn complement(&self) -> Self {
        let basis = if self.basis.is_empty() {
            linalg::null_space(&Vec::new(), self.ambient)
        } else {
            linalg::null_space(&self.basis, self.ambient)
        };
        Self {
            ambient: self.ambient,
            basis,
        }
    }

    pub fn contains(&self, x: &[S]) -> Result<bool> {
        if self.basis.is_empty() {
            return Ok(x.iter().all(|c| c.is_negligible(1.0)));
        }
        span_membership(&self.blade()?, x)
    }
}
