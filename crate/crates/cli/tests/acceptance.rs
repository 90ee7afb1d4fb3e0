//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (uncaptured) and then asserts. A shared lock runs them one at a time
//! so that the runtime limits are measured without interference.

use ratpoints::cells::{inclusion_check, kappa0, minkowski_trials, CellParams, SizeCondition};
use ratpoints::dual::DualCurve;
use ratpoints::frames::{check_frame, frame_at, FrameContext, SupBall};
use ratpoints::identities::run_identities;
use ratpoints::manifold::{grid_points, Manifold};
use ratpoints::pbox::{
    good_estimate, max_grid_step, measure_a, membership_a, membership_a_box, membership_lattice, wronski_family,
    AnalyticFn, WeightProfile,
};
use ratpoints::rats::{count_n, exponent_fit, graph_distance, AMBIGUOUS_BAND};
use ratpoints::scalar::{rat, Rat};
use ratpoints::ubiquity::dim_estimate;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2} [{name}]: {tag} ({detail})\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} [{name}] failed: {detail}");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

#[test]
fn criterion_01_algebra_exactness() {
    let _g = lock();
    let start = Instant::now();
    let reports = run_identities(1000, 8, 2024).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let failures: usize = reports.iter().map(|r| r.failures).sum();
    let all = reports.iter().all(|r| r.passed() && r.instances == 1000);
    report(
        1,
        "algebra exactness",
        all && reports.len() == 6 && secs <= 10.0,
        &format!("{} identities x 1000 instances, k <= 8, {failures} failures, {secs:.2} s", reports.len()),
    );
}

#[test]
fn criterion_02_frame_decomposition() {
    let _g = lock();
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut samples = 0;
    for m in [Manifold::parabola(), Manifold::veronese(3).unwrap(), Manifold::circle(rat(3, 1)).unwrap()] {
        let ctx = FrameContext::for_domain(&m).unwrap();
        for x in grid_points(&ctx.ball.lo(), &ctx.ball.hi(), 1000) {
            let c = check_frame(&frame_at(&m, &x, &ctx).unwrap()).unwrap();
            worst = worst.max(c.orthogonality_residual);
            bad += usize::from(c.dim_sum() != m.n() + 1);
            samples += 1;
        }
    }
    report(
        2,
        "frame decomposition",
        worst <= 1e-9 && bad == 0 && samples == 3000,
        &format!("{samples} frames, worst residual {worst:e}, {bad} wrong dimension sums"),
    );
}

/// Reduced points on the upper arc with `| |p/q| − √3 | <= ε`, by an
/// independent scan of `b` around `q √(3 − (a/q)²)`.
fn circle3_oracle(q_max: i64, eps: f64) -> usize {
    let s3 = 3f64.sqrt();
    let mut n = 0;
    for q in 1..=q_max {
        let lim = (0.9 * s3 * q as f64).floor() as i64;
        for a in -lim..=lim {
            let t = 3 * q * q - a * a;
            let r = (t as f64).sqrt() as i64;
            for b in (r - 1).max(1)..=r + 2 {
                if gcd(gcd(q, a.abs()), b) != 1 {
                    continue;
                }
                let dist = ((a * a + b * b) as f64).sqrt() / q as f64 - s3;
                n += usize::from(dist.abs() <= eps);
            }
        }
    }
    n
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn criterion_03_circle_zero_count() {
    let _g = lock();
    let m = Manifold::circle(rat(3, 1)).unwrap();
    let start = Instant::now();
    let mut counts = Vec::new();
    let mut oracle = Vec::new();
    for q in [50i64, 100, 200, 400] {
        let eps = (q as f64).powf(-2.2);
        counts.push(count_n(&m, q, eps, m.lo(), m.hi(), false).unwrap().count);
        oracle.push(circle3_oracle(q, eps));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        "circle(3) zero count",
        counts.iter().all(|&c| c == 0) && secs <= 60.0,
        &format!("N(Q, Q^-2.2) for Q = 50, 100, 200, 400: {counts:?}; independent oracle {oracle:?}; {secs:.1} s"),
    );
}

#[test]
fn criterion_04_heuristic_exponent() {
    let _g = lock();
    let m = Manifold::parabola();
    // same acceptance band as the counter: counted below ε(1 − 10⁻⁶), ambiguous up to ε(1 + 10⁻⁶)
    let naive = |q_max: i64, eps: f64| -> (usize, usize) {
        let (mut n, mut amb) = (0, 0);
        for q in 1..=q_max {
            for a in -q - 1..=q + 1 {
                for b in -1..=2 * q + 1 {
                    if gcd(gcd(q, a.abs()), b.abs()) != 1 {
                        continue;
                    }
                    let p = [a as f64 / q as f64, b as f64 / q as f64];
                    let d = graph_distance(&m, &p, m.lo(), m.hi());
                    if d <= eps * (1.0 - AMBIGUOUS_BAND) {
                        n += 1;
                    } else if d < eps * (1.0 + AMBIGUOUS_BAND) {
                        amb += 1;
                    }
                }
            }
        }
        (n, amb)
    };
    let start = Instant::now();
    let mut series = Vec::new();
    let mut ambiguous = Vec::new();
    for q in [100i64, 200, 400, 800] {
        let rep = count_n(&m, q, 0.02, m.lo(), m.hi(), false).unwrap();
        series.push((q as f64, rep.count as f64));
        ambiguous.push(rep.ambiguous);
    }
    let secs = start.elapsed().as_secs_f64();
    let fit = exponent_fit(&series).unwrap();
    let brute = naive(100, 0.02);
    let ok = (fit.slope - 3.0).abs() <= 0.2 && brute == (series[0].1 as usize, ambiguous[0]) && secs <= 300.0;
    report(
        4,
        "heuristic exponent",
        ok,
        &format!(
            "slope {:.4} (R² {:.6}), counts {:?}, ambiguous {ambiguous:?}, double-loop oracle (count, ambiguous) at Q = 100: {brute:?}, {secs:.1} s",
            fit.slope,
            fit.r_squared,
            series.iter().map(|s| s.1 as usize).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_05_minkowski_guarantee() {
    let _g = lock();
    let mut detail = Vec::new();
    let mut ok = true;
    for m in [Manifold::parabola(), Manifold::veronese(3).unwrap()] {
        let ctx = FrameContext::for_domain(&m).unwrap();
        let rep = minkowski_trials(&m, &ctx, 200, 5).unwrap();
        ok &= rep.trials == 200 && rep.failures == 0;
        detail.push(format!(
            "{}: {} failures in {} (κ0 = {:.4})",
            m.name(),
            rep.failures,
            rep.trials,
            kappa0(m.d(), m.m()).unwrap()
        ));
    }
    report(5, "Minkowski guarantee", ok, &detail.join("; "));
}

#[test]
fn criterion_06_detection_inclusion() {
    let _g = lock();
    let m = Manifold::parabola();
    let ctx = FrameContext::new(&m, SupBall::new(vec![0.0], 0.5).unwrap()).unwrap();
    let (c0, kappa) = (2.0, 0.6);
    let mut ok = true;
    let mut detail = Vec::new();
    for q_star in [200.0f64, 400.0] {
        let p = CellParams::new(&m, &ctx, q_star, q_star.powf(-0.5), kappa, Some(c0), SizeCondition::Uniform).unwrap();
        let rep = inclusion_check(&m, &ctx, &p, 201).unwrap();
        ok &= rep.good_points > 0 && rep.uncovered == 0 && rep.detection_failures == 0;
        detail.push(format!(
            "Q* = {q_star}: {} good of {}, {} uncovered, {} detection failures, |R| = {}",
            rep.good_points, rep.grid_points, rep.uncovered, rep.detection_failures, rep.rational_points
        ));
    }
    report(6, "detection inclusion", ok, &format!("c0 = {c0}, κ = {kappa}; {}", detail.join("; ")));
}

#[test]
fn criterion_07_dual_curve() {
    let _g = lock();
    let xs: Vec<Rat> = (0..100).map(|i| rat(i - 50, 56)).collect();
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [2, 3] {
        let m = Manifold::veronese(n).unwrap();
        let dc = DualCurve::new(&m).unwrap();
        let (mut defects, mut below, mut not_one) = (0, 0, 0);
        for x in &xs {
            defects += usize::from(dc.relation_defect(x).unwrap() != rat(0, 1));
            let ratio = dc.wronskian_ratio(x).unwrap();
            below += usize::from(ratio < rat(1, 1));
            not_one += usize::from(ratio != rat(1, 1));
        }
        ok &= defects == 0 && below == 0 && (n != 2 || not_one == 0);
        detail.push(format!("veronese({n}): {defects} relation defects, {below} ratios < 1, {not_one} ratios != 1"));
    }
    report(7, "dual-curve identities", ok, &format!("100 rational points each; {}", detail.join("; ")));
}

/// Deterministic equidistributed points `frac(i φ)`.
fn golden(i: usize) -> f64 {
    (i as f64 * 0.618_033_988_749_894_9).fract()
}

#[test]
fn criterion_08_parallelepiped_decay() {
    let _g = lock();
    let fns = ["poly:1", "poly:0,1", "poly:0,0,1"].iter().map(|s| AnalyticFn::parse(s).unwrap()).collect();
    let fam = wronski_family(fns, 0.0, 1.0).unwrap();
    let base = WeightProfile::new(vec![0.05, 0.5, 32.0]).unwrap();
    let profiles: Vec<(f64, WeightProfile<f64>)> = (0..=4)
        .map(|j| {
            let s = 0.5f64.powi(j);
            (s, base.scaled(&s))
        })
        .collect();
    let (lo, hi) = ([0.0], [1.0]);
    let h = max_grid_step(&fam, &profiles[4].1, &lo, &hi);
    let fractions: Vec<f64> = profiles.iter().map(|(_, th)| measure_a(&fam, th, &lo, &hi, h).unwrap()).collect();
    let decreasing = fractions.windows(2).all(|w| w[1] < w[0]);
    let series: Vec<(f64, f64)> = profiles.iter().zip(&fractions).map(|((s, _), f)| (*s, *f)).collect();
    let alpha = exponent_fit(&series).map(|f| f.slope).unwrap_or(f64::NAN);
    let mut mismatches = 0;
    let mut checked = 0;
    for (_, th) in &profiles {
        for i in 0..200 {
            let x = [golden(i + 1)];
            let a = membership_a(&fam, th, &x).unwrap();
            let brute = membership_a_box(&fam, th, &x).unwrap();
            let lattice = membership_lattice(&fam, th, &x).unwrap();
            mismatches += usize::from(a != brute || lattice != brute);
            checked += 1;
        }
    }
    report(
        8,
        "parallelepiped decay",
        decreasing && alpha > 0.3 && mismatches == 0,
        &format!("θ̄ = (0.05, 0.5, 32) halved 4 times, fractions {fractions:?}, α̂ = {alpha:.4}, {mismatches} mismatches in {checked}"),
    );
}

#[test]
fn criterion_09_good_sanity() {
    let _g = lock();
    let lin = good_estimate(|x: &[f64]| x[0], &[0.0], &[1.0], 1.0).unwrap();
    let sq = good_estimate(|x: &[f64]| x[0] * x[0], &[0.0], &[1.0], 0.5).unwrap();
    report(
        9,
        "(C, α)-good sanity",
        (lin.c - 1.0).abs() <= 0.02 && sq.c <= 2.05,
        &format!("f = x, α = 1: C = {:.4}; f = x², α = 1/2: C = {:.4}", lin.c, sq.c),
    );
}

#[test]
fn criterion_10_dimension_surrogates() {
    let _g = lock();
    let start = Instant::now();
    let circle = dim_estimate(&Manifold::circle(rat(1, 1)).unwrap(), 1.5, &(6..=14).map(|k| 1i64 << k).collect::<Vec<_>>()).unwrap();
    let parabola = dim_estimate(&Manifold::parabola(), 0.75, &(6..=11).map(|k| 1i64 << k).collect::<Vec<_>>()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let within = |e: &ratpoints::ubiquity::DimEstimate, target: f64| {
        e.r_squared >= 0.95 && e.dimension.is_some_and(|d| (d - target).abs() <= 0.12)
    };
    let (t_circle, t_parabola) = (1.0 / 2.5, 1.25 / 1.75);
    report(
        10,
        "dimension surrogates",
        within(&circle, t_circle) && within(&parabola, t_parabola) && secs <= 600.0,
        &format!(
            "unit circle τ = 1.5: {:?} (target {t_circle:.3}, R² {:.4}); parabola τ = 0.75: {:?} (target {t_parabola:.3}, R² {:.4}); {secs:.1} s",
            circle.dimension, circle.r_squared, parabola.dimension, parabola.r_squared
        ),
    );
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ratpoints-acceptance-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_cli(manifest: &Path, out: &Path, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_ratpoints"))
        .args(["run", manifest.to_str().unwrap(), "--seed", "17", "--threads", &threads.to_string(), "--out"])
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    (
        std::fs::read(out.join("results.csv")).unwrap(),
        std::fs::read(out.join("summary.json")).unwrap(),
    )
}

fn sorted_lines(bytes: &[u8]) -> Vec<String> {
    let mut v: Vec<String> = String::from_utf8_lossy(bytes).lines().map(str::to_string).collect();
    v.sort();
    v
}

#[test]
fn criterion_11_determinism() {
    let _g = lock();
    let dir = scratch_dir("det");
    let manifests = [
        (
            "pbox",
            "kind = \"pbox-decay\"\n[params]\nfunctions = [\"poly:1\", \"poly:0,1\", \"poly:0,0,1\"]\ntheta = [0.05, 0.5, 32.0]\nhalvings = 4\nchecks = 300\n",
        ),
        (
            "cells",
            "kind = \"cells\"\n[manifold]\nname = \"parabola\"\n[params]\nq_star = [200.0]\npsi_star = \"q^-0.5\"\nkappa = 0.6\nc0 = 2.0\nball = [0.0, 0.5]\nsize = \"uniform\"\nper_axis = 101\ntrials = 30\n",
        ),
        (
            "count",
            "kind = \"count\"\n[manifold]\nname = \"veronese\"\nn = 3\n[params]\nq = [10, 20]\neps = \"0.1\"\n",
        ),
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for (tag, text) in manifests {
        let path = dir.join(format!("{tag}.toml"));
        std::fs::write(&path, text).unwrap();
        let a = run_cli(&path, &dir.join(format!("{tag}-a")), 1);
        let b = run_cli(&path, &dir.join(format!("{tag}-b")), 1);
        let c = run_cli(&path, &dir.join(format!("{tag}-c")), 4);
        let identical = a == b;
        let multi = sorted_lines(&a.0) == sorted_lines(&c.0) && sorted_lines(&a.1) == sorted_lines(&c.1);
        ok &= identical && multi;
        detail.push(format!("{tag}: single-thread identical {identical}, 4 threads match {multi}"));
    }
    let _ = std::fs::remove_dir_all(&dir);
    report(11, "determinism", ok, &detail.join("; "));
}
