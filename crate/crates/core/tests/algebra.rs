use proptest::prelude::*;
use ratpoints::identities::{double_hodge, hodge_wedge, interior_associativity, laplace, wedge_minors, wedge_norm_bound};
use ratpoints::multivector::MultiVector;
use ratpoints::scalar::{rat, Rat};

fn small_rat() -> impl Strategy<Value = Rat> {
    (-6i64..=6, 1i64..=5).prop_map(|(n, d)| rat(n, d))
}

fn vectors(k: usize, count: usize) -> impl Strategy<Value = Vec<Vec<Rat>>> {
    prop::collection::vec(prop::collection::vec(small_rat(), k), count)
}

fn multivector(k: usize, p: usize) -> impl Strategy<Value = MultiVector<Rat>> {
    let n = MultiVector::<Rat>::zero(k, p).unwrap().coeffs().len();
    prop::collection::vec(small_rat(), n).prop_map(move |c| MultiVector::from_coeffs(k, p, c).unwrap())
}

/// `(k, p, q)` with `p + q <= k`.
fn split() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..=8).prop_flat_map(|k| (Just(k), 0..=k)).prop_flat_map(|(k, p)| (Just(k), Just(p), 0..=k - p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn wedge_is_minors(vs in (2usize..=8).prop_flat_map(|k| (Just(k), 1..=k)).prop_flat_map(|(k, p)| (Just(k), vectors(k, p)))) {
        prop_assert!(wedge_minors(vs.0, &vs.1).unwrap());
    }

    #[test]
    fn laplace_identity(
        (k, vs, us) in (2usize..=8)
            .prop_flat_map(|k| (Just(k), 1..=k))
            .prop_flat_map(|(k, p)| (Just(k), vectors(k, p), vectors(k, p)))
    ) {
        prop_assert!(laplace(k, &vs, &us).unwrap());
    }

    #[test]
    fn decomposable_wedge_bound(
        (u, v) in split().prop_flat_map(|(k, p, q)| (vectors(k, p), multivector(k, q), Just(k)))
            .prop_map(|(vs, v, k)| (MultiVector::wedge_vectors(k, &vs).unwrap(), v))
    ) {
        prop_assert!(wedge_norm_bound(&u, &v).unwrap());
    }

    #[test]
    fn interior_associative(
        (a, b, c) in (2usize..=8)
            .prop_flat_map(|k| (Just(k), 0..=k))
            .prop_flat_map(|(k, p)| (Just(k), Just(p), 0..=p))
            .prop_flat_map(|(k, p, q)| (Just(k), Just(p), Just(q), 0..=p - q))
            .prop_flat_map(|(k, p, q, r)| (multivector(k, p), multivector(k, q), multivector(k, r)))
    ) {
        prop_assert!(interior_associativity(&a, &b, &c).unwrap());
    }

    #[test]
    fn hodge_twice(v in (2usize..=8).prop_flat_map(|k| (Just(k), 0..=k)).prop_flat_map(|(k, p)| multivector(k, p))) {
        prop_assert!(double_hodge(&v).unwrap());
    }

    #[test]
    fn hodge_relates_wedge_and_interior(
        (v, u) in split().prop_flat_map(|(k, p, q)| (multivector(k, q), multivector(k, p)))
    ) {
        prop_assert!(hodge_wedge(&v, &u).unwrap());
    }
}
