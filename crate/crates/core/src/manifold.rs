//! Monge-parametrised manifolds `x ↦ (x, f(x))` over a box in `R^d`.

use crate::error::{Error, Result};
use crate::poly::{taylor_sqrt, Poly};
use crate::scalar::{parse_rat, rat, Rat, Scalar};
use num::Signed;
use serde::{Deserialize, Serialize};

/// Highest jet order served.
pub const MAX_JET_ORDER: usize = 16;

/// How the graph map `f` is represented.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// Each `f_l` is a polynomial with rational coefficients; exact evaluation available.
    Polynomial(Vec<Poly>),
    /// `f(x) = sqrt(r - x²)`; evaluated in double precision.
    Circle { r: Rat },
}

/// A Monge manifold `{(x, f(x)) : x ∈ domain}` with `d` free and `m` dependent coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    name: String,
    d: usize,
    m: usize,
    model: Model,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Partial derivatives `∂^α f` for all `|α| <= order` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S> {
    pub x: Vec<S>,
    pub order: usize,
    entries: Vec<(Vec<u32>, Vec<S>)>,
}

impl<S: Scalar> Jet<S> {
    /// `∂^α f`, or `None` if `|α|` exceeds the jet order.
    pub fn partial(&self, alpha: &[u32]) -> Option<&[S]> {
        self.entries
            .iter()
            .find(|(a, _)| a.as_slice() == alpha)
            .map(|(_, v)| v.as_slice())
    }

    pub fn value(&self) -> &[S] {
        &self.entries[0].1
    }

    /// `∂_i f`.
    pub fn first(&self, i: usize) -> &[S] {
        let mut a = vec![0; self.x.len()];
        a[i] = 1;
        self.partial(&a).expect("jet order >= 1")
    }

    /// All stored multi-indices with their values.
    pub fn entries(&self) -> &[(Vec<u32>, Vec<S>)] {
        &self.entries
    }
}

/// Multi-indices in `d` variables with total degree `<= order`, graded then lexicographic.
pub fn multi_indices(d: usize, order: usize) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == d - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(d, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=order as u32 {
        rec(d, total, &mut Vec::new(), &mut out);
    }
    out
}

/// Regular grid including the box corners, `per_axis` points per coordinate.
pub fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|i| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    if per_axis == 1 {
                        0.5 * (lo[i] + hi[i])
                    } else {
                        lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

impl Manifold {
    /// Manifold from explicit polynomial components over a box.
    pub fn polynomial(name: &str, d: usize, components: Vec<Poly>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if d == 0 || components.is_empty() {
            return Err(Error::InvalidArgument("need d >= 1 and at least one component".into()));
        }
        if components.iter().any(|p| p.nvars() != d) {
            return Err(Error::DimensionMismatch("component variable count differs from d".into()));
        }
        if d + components.len() + 1 > crate::multivector::MAX_DIM {
            return Err(Error::InvalidArgument("ambient dimension too large".into()));
        }
        let m = components.len();
        Self::with_box(name, d, m, Model::Polynomial(components), lo, hi)
    }

    fn with_box(name: &str, d: usize, m: usize, model: Model, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != d || hi.len() != d {
            return Err(Error::DimensionMismatch(format!("domain needs {d} intervals")));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidArgument("empty or non-finite domain".into()));
        }
        Ok(Self {
            name: name.to_string(),
            d,
            m,
            model,
            lo,
            hi,
        })
    }

    /// `(x, x²)` on `[-1, 1]`.
    pub fn parabola() -> Self {
        let mut v = Self::veronese(2).expect("n = 2 is valid");
        v.name = "parabola".into();
        v.lo = vec![-1.0];
        v.hi = vec![1.0];
        v
    }

    /// `(x, x², …, x^n)` on `[-0.9, 0.9]`.
    pub fn veronese(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("veronese curve needs n >= 2".into()));
        }
        let comps = (2..=n as u32).map(|e| Poly::monomial(vec![e], rat(1, 1))).collect();
        Self::polynomial(&format!("veronese({n})"), 1, comps, vec![-0.9], vec![0.9])
    }

    /// Upper arc `(x, sqrt(r - x²))` on `[-0.9 sqrt(r), 0.9 sqrt(r)]`.
    pub fn circle(r: Rat) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::InvalidArgument("circle needs r > 0".into()));
        }
        let s = 0.9 * r.to_f64().sqrt();
        Self::circle_on(r, -s, s)
    }

    /// Circle arc over `[lo, hi]`, which must stay strictly inside `x² < r`.
    pub fn circle_on(r: Rat, lo: f64, hi: f64) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::InvalidArgument("circle needs r > 0".into()));
        }
        let rf = r.to_f64();
        if lo * lo >= rf || hi * hi >= rf {
            return Err(Error::InvalidArgument("circle domain touches x² = r".into()));
        }
        let name = format!("circle({})", crate::scalar::format_rat(&r));
        Self::with_box(&name, 1, 1, Model::Circle { r }, vec![lo], vec![hi])
    }

    /// `(x_1, …, x_d, x_d^{k+1}, …, x_d^{k+m})` on `[-0.9, 0.9]^d`.
    pub fn power_block(d: usize, m: usize, k: u32) -> Result<Self> {
        if d == 0 || m == 0 || k == 0 {
            return Err(Error::InvalidArgument("power block needs d, m, k >= 1".into()));
        }
        let comps = (1..=m as u32)
            .map(|l| {
                let mut e = vec![0; d];
                e[d - 1] = k + l;
                Poly::monomial(e, rat(1, 1))
            })
            .collect();
        Self::polynomial(
            &format!("power-block({d},{m},{k})"),
            d,
            comps,
            vec![-0.9; d],
            vec![0.9; d],
        )
    }

    /// Same manifold restricted to another box.
    pub fn restricted(&self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if let Model::Circle { r } = &self.model {
            let rf = r.to_f64();
            if lo.iter().chain(&hi).any(|v| v * v >= rf) {
                return Err(Error::InvalidArgument("circle domain touches x² = r".into()));
            }
        }
        Self::with_box(&self.name, self.d, self.m, self.model.clone(), lo, hi)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn m(&self) -> usize {
        self.m
    }
    /// Ambient dimension `n = d + m`.
    pub fn n(&self) -> usize {
        self.d + self.m
    }
    pub fn model(&self) -> &Model {
        &self.model
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
    pub fn is_polynomial(&self) -> bool {
        matches!(self.model, Model::Polynomial(_))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.d && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| a <= v && v <= b)
    }

    fn check_point<S: Scalar>(&self, x: &[S]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch(format!("expected {} coordinates, got {}", self.d, x.len())));
        }
        Ok(())
    }

    /// `f(x)` in either scalar mode.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_point(x)?;
        match &self.model {
            Model::Polynomial(ps) => Ok(ps.iter().map(|p| p.eval(x)).collect()),
            Model::Circle { r } => {
                let g = S::from_rat(r) - x[0].clone() * x[0].clone();
                if g <= S::zero() {
                    return Err(Error::InvalidArgument("point outside the circle's graph domain".into()));
                }
                let s = g.sqrt().ok_or_else(|| {
                    Error::ExactUnavailable(format!("sqrt({g}) is irrational"))
                })?;
                Ok(vec![s])
            }
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        match &self.model {
            Model::Polynomial(ps) => ps.iter().map(|p| p.eval_f64(x)).collect(),
            Model::Circle { r } => vec![(r.to_f64() - x[0] * x[0]).max(0.0).sqrt()],
        }
    }

    /// `y(x) = (1, x, f(x))`.
    pub fn lifted<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let fx = self.eval(x)?;
        let mut y = crate::multivector::lift(x);
        y.extend(fx);
        Ok(y)
    }

    /// Jet of `f` up to `order` in either scalar mode.
    pub fn jet<S: Scalar>(&self, x: &[S], order: usize) -> Result<Jet<S>> {
        self.check_point(x)?;
        if order > MAX_JET_ORDER {
            return Err(Error::InvalidArgument(format!("jet order {order} above {MAX_JET_ORDER}")));
        }
        let entries = match &self.model {
            Model::Polynomial(ps) => multi_indices(self.d, order)
                .into_iter()
                .map(|a| {
                    let vals = ps.iter().map(|p| p.partial(&a).eval(x)).collect();
                    (a, vals)
                })
                .collect(),
            Model::Circle { r } => {
                let x0 = x[0].clone();
                let mut g = vec![S::zero(); order + 1];
                g[0] = S::from_rat(r) - x0.clone() * x0.clone();
                if g[0] <= S::zero() {
                    return Err(Error::InvalidArgument("point outside the circle's graph domain".into()));
                }
                if order >= 1 {
                    g[1] = -(x0.clone() + x0);
                }
                if order >= 2 {
                    g[2] = -S::one();
                }
                let h = taylor_sqrt(&g).ok_or_else(|| {
                    Error::ExactUnavailable("sqrt of an irrational value".into())
                })?;
                let mut fact = S::one();
                h.into_iter()
                    .enumerate()
                    .map(|(k, hk)| {
                        if k > 0 {
                            fact = fact.clone() * S::from_i64(k as i64);
                        }
                        (vec![k as u32], vec![hk * fact.clone()])
                    })
                    .collect()
            }
        };
        Ok(Jet {
            x: x.to_vec(),
            order,
            entries,
        })
    }

    /// Supremum over a sample grid of `|f|`, `|∂f|` and `|∂²f|` on `[lo, hi]`.
    pub fn derivative_sup(&self, lo: &[f64], hi: &[f64], per_axis: usize) -> f64 {
        let (lo, hi) = self.clip_to_graph(lo, hi);
        grid_points(&lo, &hi, per_axis)
            .into_iter()
            .filter_map(|x| self.jet(&x, 2).ok())
            .flat_map(|j| j.entries.into_iter().flat_map(|(_, v)| v))
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    fn clip_to_graph(&self, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.model {
            Model::Polynomial(_) => (lo.to_vec(), hi.to_vec()),
            Model::Circle { .. } => (
                vec![lo[0].max(self.lo[0])],
                vec![hi[0].min(self.hi[0])],
            ),
        }
    }

    /// Sup-norm Lipschitz constant of `f` on the domain, from sampled first
    /// derivatives inflated by 1.25.
    pub fn lipschitz(&self) -> f64 {
        let per_axis = match self.d {
            1 => 513,
            2 => 65,
            _ => 17,
        };
        let sup = grid_points(&self.lo, &self.hi, per_axis)
            .into_iter()
            .filter_map(|x| self.jet(&x, 1).ok())
            .map(|j| {
                (0..self.m)
                    .map(|l| (0..self.d).map(|i| j.first(i)[l].abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        (1.25 * sup).max(f64::MIN_POSITIVE)
    }
}

/// Plain-text manifold description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    /// `parabola`, `veronese`, `circle`, `power-block` or `poly-curve`.
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Circle radius squared, as an integer, decimal or `p/q` string.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<toml::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Either `[lo, hi]` for every axis or `[lo_1, hi_1, …, lo_d, hi_d]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<f64>>,
    /// Coefficient lists `c_0, c_1, …` for each component of a `poly-curve`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<toml::Value>>>,
}

fn value_to_rat(v: &toml::Value) -> Result<Rat> {
    match v {
        toml::Value::Integer(i) => Ok(rat(*i, 1)),
        toml::Value::Float(f) => Rat::from_float(*f).ok_or_else(|| Error::Manifest("non-finite number".into())),
        toml::Value::String(s) => parse_rat(s).ok_or_else(|| Error::Manifest(format!("bad rational '{s}'"))),
        other => Err(Error::Manifest(format!("expected a number, got {other}"))),
    }
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<Manifold> {
        let need = |v: Option<usize>, what: &str| {
            v.ok_or_else(|| Error::Manifest(format!("manifold '{}' needs '{what}'", self.name)))
        };
        let base = match self.name.as_str() {
            "parabola" => Manifold::parabola(),
            "veronese" => Manifold::veronese(need(self.n, "n")?)?,
            "circle" => {
                let r = self
                    .r
                    .as_ref()
                    .ok_or_else(|| Error::Manifest("circle needs 'r'".into()))
                    .and_then(value_to_rat)?;
                Manifold::circle(r)?
            }
            "power-block" => Manifold::power_block(need(self.d, "d")?, need(self.m, "m")?, self.k.unwrap_or(1))?,
            "poly-curve" => {
                let comps = self
                    .components
                    .as_ref()
                    .ok_or_else(|| Error::Manifest("poly-curve needs 'components'".into()))?;
                let polys = comps
                    .iter()
                    .map(|c| Ok(Poly::univariate(&c.iter().map(value_to_rat).collect::<Result<Vec<_>>>()?)))
                    .collect::<Result<Vec<_>>>()?;
                Manifold::polynomial("poly-curve", 1, polys, vec![-1.0], vec![1.0])?
            }
            other => return Err(Error::Manifest(format!("unknown manifold '{other}'"))),
        };
        match &self.domain {
            None => Ok(base),
            Some(dom) => {
                let d = base.d();
                let (lo, hi) = if dom.len() == 2 {
                    (vec![dom[0]; d], vec![dom[1]; d])
                } else if dom.len() == 2 * d {
                    (dom.iter().step_by(2).copied().collect(), dom.iter().skip(1).step_by(2).copied().collect())
                } else {
                    return Err(Error::Manifest(format!("domain needs 2 or {} numbers", 2 * d)));
                };
                base.restricted(lo, hi)
            }
        }
    }
}

/// One catalog entry for listings.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static str,
    pub description: &'static str,
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "parabola",
            params: "",
            description: "(x, x^2) on [-1, 1]",
        },
        CatalogEntry {
            name: "veronese",
            params: "n >= 2",
            description: "(x, x^2, ..., x^n) on [-0.9, 0.9]",
        },
        CatalogEntry {
            name: "circle",
            params: "r > 0",
            description: "upper arc (x, sqrt(r - x^2)) on [-0.9 sqrt(r), 0.9 sqrt(r)]",
        },
        CatalogEntry {
            name: "power-block",
            params: "d, m, k >= 1",
            description: "(x_1..x_d, x_d^(k+1), ..., x_d^(k+m)) on [-0.9, 0.9]^d",
        },
        CatalogEntry {
            name: "poly-curve",
            params: "components = [[c0, c1, ...], ...]",
            description: "(x, p_1(x), ..., p_m(x)) with rational coefficients on [-1, 1]",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_jet_matches_closed_form() {
        let c = Manifold::circle(rat(3, 1)).unwrap();
        let x = 0.7;
        let j = c.jet(&[x], 3).unwrap();
        let g: f64 = 3.0 - x * x;
        assert!((j.value()[0] - g.sqrt()).abs() < 1e-14);
        assert!((j.first(0)[0] + x / g.sqrt()).abs() < 1e-14);
        assert!((j.partial(&[2]).unwrap()[0] + 3.0 / g.powf(1.5)).abs() < 1e-13);
        let third = -9.0 * x / g.powf(2.5);
        assert!((j.partial(&[3]).unwrap()[0] - third).abs() < 1e-12);
    }

    #[test]
    fn exact_circle_needs_rational_root() {
        let c = Manifold::circle(rat(1, 1)).unwrap();
        assert_eq!(c.eval(&[rat(3, 5)]).unwrap(), vec![rat(4, 5)]);
        assert!(matches!(c.eval(&[rat(1, 2)]), Err(Error::ExactUnavailable(_))));
    }

    #[test]
    fn circle_domain_rejected_at_boundary() {
        assert!(Manifold::circle_on(rat(1, 1), -1.0, 0.5).is_err());
    }

    #[test]
    fn power_block_shape() {
        let pb = Manifold::power_block(2, 2, 1).unwrap();
        assert_eq!((pb.d(), pb.m(), pb.n()), (2, 2, 4));
        assert_eq!(pb.eval(&[rat(1, 3), rat(1, 2)]).unwrap(), vec![rat(1, 4), rat(1, 8)]);
        let j = pb.jet(&[0.3, 0.5], 2).unwrap();
        assert_eq!(j.first(0), &[0.0, 0.0]);
        assert!((j.first(1)[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn multi_index_count() {
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(1, 4).len(), 5);
    }

    #[test]
    fn lipschitz_bounds_difference_quotients() {
        for m in [Manifold::parabola(), Manifold::veronese(3).unwrap(), Manifold::circle(rat(3, 1)).unwrap()] {
            let c1 = m.lipschitz();
            let pts = grid_points(m.lo(), m.hi(), 97);
            for w in pts.windows(2) {
                let (a, b) = (m.eval_f64(&w[0]), m.eval_f64(&w[1]));
                let q = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / (w[1][0] - w[0][0]);
                assert!(q <= c1, "{}: {q} > {c1}", m.name());
            }
        }
    }

    #[test]
    fn spec_from_text() {
        let spec: ManifoldSpec = toml::from_str("name = \"poly-curve\"\ncomponents = [[0, 0, 1], [0, 1, 0, 1]]\n").unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.eval(&[rat(2, 1)]).unwrap(), vec![rat(4, 1), rat(10, 1)]);
        let spec: ManifoldSpec = toml::from_str("name = \"circle\"\nr = \"3\"\ndomain = [0.1, 1.5]\n").unwrap();
        assert_eq!(spec.build().unwrap().lo(), &[0.1]);
        let bad: ManifoldSpec = toml::from_str("name = \"circle\"\nr = 1\ndomain = [0.0, 1.0]\n").unwrap();
        assert!(bad.build().is_err());
    }
}
