use ratpoints::cells::{inclusion_check, CellParams, SizeCondition};
use ratpoints::dual::{curve_theta_profile, DualCurve};
use ratpoints::frames::{FrameContext, SupBall};
use ratpoints::manifold::Manifold;

fn widened_inclusion(n: usize, q_star: f64, exponent: f64, kappa: f64) {
    let m = Manifold::veronese(n).unwrap();
    let ctx = FrameContext::new(&m, SupBall::new(vec![0.0], 0.5).unwrap()).unwrap();
    let psi_star = q_star.powf(-exponent);
    let p = CellParams::new(&m, &ctx, q_star, psi_star, kappa, Some(2.0), SizeCondition::Uniform).unwrap();
    let rep = inclusion_check(&m, &ctx, &p, 201).unwrap();
    assert!(rep.good_points > 0, "{rep:?}");
    assert_eq!(rep.uncovered, 0, "{rep:?}");
    assert_eq!(rep.detection_failures, 0, "{rep:?}");
}

#[test]
fn extended_detection_veronese2() {
    // 3/(2n-1) = 1/m for n = 2, so the widened window reaches its lower edge only
    widened_inclusion(2, 300.0, 0.95, 0.6);
}

#[test]
fn extended_detection_veronese3() {
    // psi ~ Q^{-0.56}: inside Q^{-3/5} < psi, below the Q^{-1/2} edge
    widened_inclusion(3, 3000.0, 0.56, 0.4);
}

#[test]
fn tilde_weight_decays() {
    let m = Manifold::veronese(2).unwrap();
    let ctx = FrameContext::for_domain(&m).unwrap();
    let k1 = DualCurve::new(&m).unwrap().k1_bound(-1.0, 1.0, 65).unwrap();
    let mut scaled = Vec::new();
    for q_star in [1e3, 1e4, 1e5, 1e6] {
        let p = CellParams::new(&m, &ctx, q_star, 2.0 / q_star, 0.6, Some(2.0), SizeCondition::Unchecked).unwrap();
        let t = curve_theta_profile(&p, k1, 1.0).unwrap();
        assert!(t.sorted_tilde_bound_holds());
        scaled.push(t.theta_tilde() * p.big_q().powf(1.0 / 6.0));
    }
    assert!(scaled.windows(2).all(|w| w[1] <= w[0]), "{scaled:?}");
}

