//! Built-in invariant checks run by `ratpoints selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratpoints::cells::{inclusion_check, minkowski_trials, CellParams, SizeCondition};
use ratpoints::dual::DualCurve;
use ratpoints::frames::{check_frame, frame_at, FrameContext, SupBall};
use ratpoints::identities::run_identities;
use ratpoints::manifold::{grid_points, Manifold};
use ratpoints::pbox::{good_estimate, membership_a, membership_a_box, membership_lattice, wronski_family, AnalyticFn, WeightProfile};
use ratpoints::rats::{count_n, PsiRule};
use ratpoints::scalar::rat;
use ratpoints::ubiquity::{lambda_inclusion_check, ResonantSystem};
use ratpoints::Result;

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn record(out: &mut Vec<CheckResult>, name: &str, r: Result<(bool, String)>) {
    let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    out.push(CheckResult {
        name: name.to_string(),
        passed,
        detail,
    });
}

fn frames_check(m: &Manifold) -> Result<(bool, String)> {
    let ctx = FrameContext::for_domain(m)?;
    let (lo, hi) = (ctx.ball.lo(), ctx.ball.hi());
    let mut worst = 0.0f64;
    let mut bad_dims = 0;
    for x in grid_points(&lo, &hi, 101) {
        let c = check_frame(&frame_at(m, &x, &ctx)?)?;
        worst = worst.max(c.orthogonality_residual);
        if c.dim_sum() != m.n() + 1 {
            bad_dims += 1;
        }
    }
    Ok((worst <= 1e-9 && bad_dims == 0, format!("residual {worst:e}, {bad_dims} bad dimension sums")))
}

fn parabola_cells() -> Result<(Manifold, FrameContext)> {
    let m = Manifold::parabola();
    let ctx = FrameContext::new(&m, SupBall::new(vec![0.0], 0.5)?)?;
    Ok((m, ctx))
}

fn pbox_family() -> Result<ratpoints::pbox::ParallelepipedFamily> {
    let fns = ["poly:1", "poly:0,1", "poly:0,0,1"].iter().map(|s| AnalyticFn::parse(s)).collect::<Result<Vec<_>>>()?;
    wronski_family(fns, 0.0, 1.0)
}

/// Runs every check; `mutate_hodge` flips the grade-1 Hodge sign first so
/// that the algebra checks are seen to fail.
pub fn run_all(seed: u64, mutate_hodge: bool) -> Vec<CheckResult> {
    let mut out = Vec::new();

    ratpoints::multivector::set_hodge_sign_mutation(mutate_hodge);
    match run_identities(200, 8, seed) {
        Ok(reports) => {
            for r in reports {
                record(&mut out, &format!("algebra/{}", r.name), Ok((r.passed(), format!("{} failures in {}", r.failures, r.instances))));
            }
        }
        Err(e) => record(&mut out, "algebra", Err(e)),
    }
    ratpoints::multivector::set_hodge_sign_mutation(false);

    for (name, m) in [
        ("parabola", Ok(Manifold::parabola())),
        ("veronese(3)", Manifold::veronese(3)),
        ("circle(3)", Manifold::circle(rat(3, 1))),
    ] {
        record(&mut out, &format!("frames/{name}"), m.and_then(|m| frames_check(&m)));
    }

    record(
        &mut out,
        "rats/circle(3)-zero-count",
        (|| {
            // off the circle |a² + b² − 3q²| >= 1, so the distance exceeds 1/((2√3 + ε) q²)
            let m = Manifold::circle(rat(3, 1))?;
            let counts = [50i64, 100, 200]
                .iter()
                .map(|&q| count_n(&m, q, 0.25 / (q * q) as f64, m.lo(), m.hi(), false).map(|r| r.count))
                .collect::<Result<Vec<_>>>()?;
            Ok((counts.iter().all(|&c| c == 0), format!("counts {counts:?}")))
        })(),
    );
    record(
        &mut out,
        "rats/parabola-count",
        (|| {
            let m = Manifold::parabola();
            let rep = count_n(&m, 20, 0.02, m.lo(), m.hi(), true)?;
            let ok = rep.points.iter().all(|(q, _)| *q <= 20) && rep.count == rep.points.len();
            Ok((ok, format!("{} points up to Q = 20", rep.count)))
        })(),
    );

    for (name, m) in [("parabola", Ok(Manifold::parabola())), ("veronese(3)", Manifold::veronese(3))] {
        record(
            &mut out,
            &format!("cells/minkowski/{name}"),
            m.and_then(|m| {
                let ctx = FrameContext::for_domain(&m)?;
                let rep = minkowski_trials(&m, &ctx, 40, seed)?;
                Ok((rep.failures == 0, format!("{} failures in {}", rep.failures, rep.trials)))
            }),
        );
    }
    record(
        &mut out,
        "cells/inclusion",
        (|| {
            let (m, ctx) = parabola_cells()?;
            let q_star = 200.0f64;
            let p = CellParams::new(&m, &ctx, q_star, q_star.powf(-0.5), 0.6, Some(2.0), SizeCondition::Uniform)?;
            let rep = inclusion_check(&m, &ctx, &p, 101)?;
            let ok = rep.good_points > 0 && rep.uncovered == 0 && rep.detection_failures == 0;
            Ok((ok, format!("{} good, {} uncovered, {} failed", rep.good_points, rep.uncovered, rep.detection_failures)))
        })(),
    );

    record(
        &mut out,
        "pbox/membership",
        (|| {
            let fam = pbox_family()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut hits, mut mismatches) = (0, 0);
            for _ in 0..200 {
                let x = [rng.gen_range(0.0..1.0)];
                let th = WeightProfile::new(vec![rng.gen_range(0.01..0.2), rng.gen_range(0.2..2.0), rng.gen_range(2.0..20.0)])?;
                let a = membership_a(&fam, &th, &x)?;
                if a != membership_a_box(&fam, &th, &x)? || a != membership_lattice(&fam, &th, &x)? {
                    mismatches += 1;
                }
                hits += usize::from(a);
            }
            Ok((mismatches == 0, format!("{mismatches} mismatches, {hits} of 200 members")))
        })(),
    );
    record(
        &mut out,
        "pbox/good-linear",
        good_estimate(|x: &[f64]| x[0], &[0.0], &[1.0], 1.0).map(|g| ((g.c - 1.0).abs() <= 0.02, format!("C = {}", g.c))),
    );

    record(
        &mut out,
        "dual/relations",
        (|| {
            let m = Manifold::veronese(3)?;
            let dc = DualCurve::new(&m)?;
            let mut bad = 0;
            for i in -10i64..=10 {
                let x = rat(i, 10);
                if dc.relation_defect(&x)? != rat(0, 1) || dc.wronskian_ratio(&x)? < rat(1, 1) {
                    bad += 1;
                }
            }
            Ok((bad == 0, format!("{bad} of 21 rational points fail")))
        })(),
    );

    record(
        &mut out,
        "ubiquity/j-monotone",
        (|| {
            let m = Manifold::parabola();
            let c = ResonantSystem::new(&m, PsiRule::power(0.8), 1.0)?.j_counts(8)?;
            Ok((c.windows(2).all(|w| w[0] <= w[1]), format!("counts {c:?}")))
        })(),
    );
    record(
        &mut out,
        "ubiquity/lambda-inclusion",
        lambda_inclusion_check(&Manifold::parabola(), &PsiRule::power(0.8), 7, 5).map(|n| (n > 0, format!("{n} samples checked"))),
    );
    out
}
