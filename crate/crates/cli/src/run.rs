//! Executes a validated manifest and renders CSV rows plus a JSON summary.

use crate::manifest::{Kind, Manifest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratpoints::cells::{inclusion_check, minkowski_trials, CellParams, SizeCondition};
use ratpoints::dual::{wronskian_inequality_check, DualCurve};
use ratpoints::frames::{FrameContext, SupBall};
use ratpoints::manifold::Manifold;
use ratpoints::pbox::{
    max_grid_step, measure_a, membership_a, membership_a_box, membership_lattice, wronski_family, AnalyticFn, WeightProfile,
};
use ratpoints::rats::{count_n, covered_fraction, enumerate_r, exponent_fit, BallUnion, PsiRule};
use ratpoints::scalar::{format_rat, rat, Rat};
use ratpoints::ubiquity::{dim_estimate, ubiquity_fraction, ResonantSystem};
use ratpoints::{Error, Result};
use serde_json::{json, Value};
use std::path::Path;

pub const DEFAULT_SEED: u64 = 0;
pub const CSV_NAME: &str = "results.csv";
pub const SUMMARY_NAME: &str = "summary.json";

/// In-memory result of one experiment.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
    /// Hard invariant failures; any entry makes the run exit non-zero.
    pub failures: Vec<String>,
}

impl RunOutput {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            summary: json!({}),
            failures: Vec::new(),
        }
    }

    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `results.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        std::fs::write(dir.join(CSV_NAME), self.csv()?)?;
        let mut summary = self.summary.clone();
        summary["failures"] = json!(self.failures);
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join(SUMMARY_NAME), text + "\n")?;
        Ok(())
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn seconds(timing: bool, s: f64) -> String {
    if timing {
        f(s)
    } else {
        String::new()
    }
}

/// Runs the manifest with `seed`; thread count is set by the caller's pool.
pub fn run(man: &Manifest, seed: u64) -> Result<RunOutput> {
    man.validate()?;
    let mut out = match man.kind {
        Kind::Count => run_count(man)?,
        Kind::Coverage => run_coverage(man)?,
        Kind::Cells => run_cells(man, seed)?,
        Kind::PboxDecay => run_pbox(man, seed)?,
        Kind::DualCheck => run_dual(man)?,
        Kind::Dim => run_dim(man)?,
        Kind::Ubiquity => run_ubiquity(man)?,
    };
    out.summary["kind"] = json!(man.kind.name());
    out.summary["seed"] = json!(seed);
    if let Some(spec) = &man.manifold {
        out.summary["manifold"] = json!(man.build_manifold()?.name());
        out.summary["manifold_spec"] = json!(spec);
    }
    Ok(out)
}

fn fit_summary(series: &[(f64, f64)]) -> Value {
    match exponent_fit(series) {
        Ok(fit) => json!(fit),
        Err(e) => json!({ "unavailable": e.to_string() }),
    }
}

fn run_count(man: &Manifest) -> Result<RunOutput> {
    let m = man.build_manifold()?;
    let (lo, hi) = man.query_box(&m)?;
    let eps_rule = PsiRule::parse(man.params.eps.as_deref().unwrap_or_default())?;
    let mut out = RunOutput::new(&["q", "eps", "count", "ambiguous", "seconds"]);
    let mut series = Vec::new();
    for &q in man.params.q.as_deref().unwrap_or_default() {
        let eps = eps_rule.eval(q as f64);
        let rep = count_n(&m, q, eps, &lo, &hi, false)?;
        out.rows.push(vec![
            q.to_string(),
            f(eps),
            rep.count.to_string(),
            rep.ambiguous.to_string(),
            seconds(man.timing, rep.seconds),
        ]);
        if rep.count > 0 {
            series.push((q as f64, rep.count as f64));
        }
    }
    out.summary["eps_rule"] = json!(eps_rule.to_string());
    out.summary["growth_fit"] = fit_summary(&series);
    Ok(out)
}

fn run_coverage(man: &Manifest) -> Result<RunOutput> {
    let m = man.build_manifold()?;
    let (lo, hi) = man.query_box(&m)?;
    let psi = man.psi_rule()?;
    let p = &man.params;
    let delta = p.delta.unwrap_or(0.0);
    let (d, mm) = (m.d() as i32, m.m() as i32);
    let mut out = RunOutput::new(&["q", "psi", "delta", "rho", "points", "fraction"]);
    for &q in p.q.as_deref().unwrap_or_default() {
        let psi_q = psi.eval(q as f64);
        let rho = p
            .rho
            .unwrap_or_else(|| p.rho0.unwrap_or(1.0) * (psi_q.powi(mm) * (q as f64).powi(d + 1)).powf(-1.0 / d as f64));
        let h = p.grid_h.unwrap_or(rho / 10.0);
        if h > rho / 10.0 {
            return Err(Error::ResolutionTooCoarse(format!("grid step {h} exceeds ρ/10 = {}", rho / 10.0)));
        }
        let pts = enumerate_r(&m, q, psi_q, delta, &lo, &hi)?;
        let union = BallUnion::new(pts.iter().map(|r| r.x()).collect(), rho)?;
        let frac = covered_fraction(&union, &lo, &hi, h);
        out.rows.push(vec![q.to_string(), f(psi_q), f(delta), f(rho), pts.len().to_string(), f(frac)]);
    }
    out.summary["psi_rule"] = json!(psi.to_string());
    Ok(out)
}

fn cell_context(man: &Manifest, m: &Manifold) -> Result<FrameContext> {
    match &man.params.ball {
        None => FrameContext::for_domain(m),
        Some(b) if b.len() == m.d() + 1 => FrameContext::new(m, SupBall::new(b[..m.d()].to_vec(), b[m.d()])?),
        Some(_) => Err(Error::Manifest(format!("params.ball needs {} numbers", m.d() + 1))),
    }
}

fn run_cells(man: &Manifest, seed: u64) -> Result<RunOutput> {
    let m = man.build_manifold()?;
    let ctx = cell_context(man, &m)?;
    let p = &man.params;
    let psi_star = PsiRule::parse(p.psi_star.as_deref().unwrap_or_default())?;
    let size = match p.size.as_deref() {
        Some("ball") => SizeCondition::Ball,
        _ => SizeCondition::Uniform,
    };
    let kappa = p.kappa.unwrap_or_default();
    let mut out = RunOutput::new(&[
        "q_star",
        "psi_star",
        "kappa",
        "c0",
        "rho",
        "grid_points",
        "good_points",
        "uncovered",
        "detection_failures",
        "rational_points",
    ]);
    for &q_star in p.q_star.as_deref().unwrap_or_default() {
        let cp = CellParams::new(&m, &ctx, q_star, psi_star.eval(q_star), kappa, p.c0, size)?;
        let rep = inclusion_check(&m, &ctx, &cp, p.per_axis.unwrap_or(201))?;
        if rep.uncovered > 0 || rep.detection_failures > 0 {
            out.failures.push(format!(
                "Q* = {q_star}: {} uncovered and {} failed detections among {} good points",
                rep.uncovered, rep.detection_failures, rep.good_points
            ));
        }
        out.rows.push(vec![
            f(q_star),
            f(rep.psi_star),
            f(rep.kappa),
            f(rep.c0),
            f(rep.rho),
            rep.grid_points.to_string(),
            rep.good_points.to_string(),
            rep.uncovered.to_string(),
            rep.detection_failures.to_string(),
            rep.rational_points.to_string(),
        ]);
    }
    if let Some(trials) = p.trials.filter(|&t| t > 0) {
        let rep = minkowski_trials(&m, &ctx, trials, seed)?;
        if rep.failures > 0 {
            out.failures.push(format!("{} of {trials} Minkowski searches found no point", rep.failures));
        }
        out.summary["minkowski"] = json!(rep);
    }
    out.summary["ball"] = json!({ "center": ctx.ball.center, "radius": ctx.ball.radius });
    Ok(out)
}

fn run_pbox(man: &Manifest, seed: u64) -> Result<RunOutput> {
    let p = &man.params;
    let fns = p
        .functions
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|s| AnalyticFn::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = match p.bbox.as_deref() {
        Some([a, b]) => (*a, *b),
        _ => (0.0, 1.0),
    };
    let fam = wronski_family(fns, lo, hi)?;
    let base = WeightProfile::new(p.theta.clone().unwrap_or_default())?;
    let halvings = p.halvings.unwrap_or(4);
    let profiles: Vec<(f64, WeightProfile<f64>)> = (0..=halvings)
        .map(|j| {
            let s = 0.5f64.powi(j as i32);
            (s, base.scaled(&s))
        })
        .collect();
    let (blo, bhi) = (vec![lo], vec![hi]);
    let finest = &profiles.last().expect("at least one profile").1;
    let h = p.grid_h.unwrap_or_else(|| max_grid_step(&fam, finest, &blo, &bhi));
    let mut out = RunOutput::new(&["halving", "scale", "fraction"]);
    let mut series = Vec::new();
    let mut fractions = Vec::new();
    for (j, (s, th)) in profiles.iter().enumerate() {
        let frac = measure_a(&fam, th, &blo, &bhi, h)?;
        out.rows.push(vec![j.to_string(), f(*s), f(frac)]);
        fractions.push(frac);
        if frac > 0.0 {
            series.push((*s, frac));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = p.checks.unwrap_or(200);
    let mut mismatches = 0;
    for _ in 0..checks {
        let x = [rng.gen_range(lo..=hi)];
        let th = &profiles[rng.gen_range(0..profiles.len())].1;
        let a = membership_a(&fam, th, &x)?;
        if a != membership_a_box(&fam, th, &x)? || a != membership_lattice(&fam, th, &x)? {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        out.failures.push(format!("{mismatches} of {checks} membership decisions differ between the ellipsoid, box and lattice scans"));
    }
    out.summary["grid_h"] = json!(h);
    out.summary["strictly_decreasing"] = json!(fractions.windows(2).all(|w| w[1] < w[0]));
    out.summary["decay_fit"] = fit_summary(&series);
    out.summary["membership_checks"] = json!({ "checks": checks, "mismatches": mismatches });
    Ok(out)
}

/// `samples` rationals with denominator `4·samples`, spread evenly over `[lo, hi]`.
fn rational_samples(lo: f64, hi: f64, samples: usize) -> Vec<Rat> {
    let den = 4 * samples as i64;
    let a = (lo * den as f64).ceil() as i64;
    let b = (hi * den as f64).floor() as i64;
    let last = (samples as i64 - 1).max(1);
    let mut xs: Vec<i64> = (0..samples as i64).map(|i| a + i * (b - a) / last).collect();
    xs.dedup();
    xs.into_iter().map(|v| rat(v, den)).collect()
}

fn run_dual(man: &Manifest) -> Result<RunOutput> {
    let m = man.build_manifold()?;
    let dc = DualCurve::new(&m)?;
    let samples = man.params.samples.unwrap_or(100);
    let (lo, hi) = (m.lo()[0], m.hi()[0]);
    let mut out = RunOutput::new(&["x", "w_y", "w_z", "ratio", "relation_defect"]);
    if m.is_polynomial() {
        for x in rational_samples(lo, hi, samples) {
            let (wy, wz) = (dc.w_y(&x)?, dc.w_z(&x)?);
            let ratio = dc.wronskian_ratio(&x)?;
            let defect = dc.relation_defect(&x)?;
            if defect != rat(0, 1) {
                out.failures.push(format!("relations fail at x = {}", format_rat(&x)));
            }
            if ratio < rat(1, 1) {
                out.failures.push(format!("|W_z|/|W_y|^n = {} < 1 at x = {}", format_rat(&ratio), format_rat(&x)));
            }
            out.rows.push(vec![format_rat(&x), format_rat(&wy), format_rat(&wz), format_rat(&ratio), format_rat(&defect)]);
        }
    } else {
        let xs: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / samples as f64).collect();
        if let Err(e) = wronskian_inequality_check(&m, &xs) {
            out.failures.push(e.to_string());
        }
        for &x in &xs {
            let defect = dc.relation_defect(&x)?;
            if defect > 1e-8 {
                out.failures.push(format!("relation defect {defect} at x = {x}"));
            }
            out.rows.push(vec![f(x), f(dc.w_y(&x)?), f(dc.w_z(&x)?), f(dc.wronskian_ratio(&x)?), f(defect)]);
        }
    }
    out.summary["n"] = json!(dc.n());
    out.summary["k1"] = json!(dc.k1_bound(lo, hi, 65)?);
    Ok(out)
}

fn run_dim(man: &Manifest) -> Result<RunOutput> {
    let m = man.build_manifold()?;
    let tau = man.params.tau.unwrap_or_default();
    let qs = man.params.q.clone().unwrap_or_default();
    let est = dim_estimate(&m, tau, &qs)?;
    let mut out = RunOutput::new(&["tag", "q", "scale", "count"]);
    for ((q, s), c) in est.qs.iter().zip(&est.scales).zip(&est.counts) {
        out.rows.push(vec![m.name().to_string(), q.to_string(), f(*s), c.to_string()]);
    }
    out.summary["estimate"] = json!(est);
    out.summary["caveat"] = json!("finite-scale box-counting surrogate, not a Hausdorff dimension");
    Ok(out)
}

fn run_ubiquity(man: &Manifest) -> Result<RunOutput> {
    let m = man.build_manifold()?;
    let (lo, hi) = man.query_box(&m)?;
    let psi = man.psi_rule()?;
    let p = &man.params;
    let rho0 = p.rho0.unwrap_or(1.0);
    let delta0 = p.delta0.unwrap_or(0.1);
    let ts = p.t.clone().unwrap_or_default();
    let mut out = RunOutput::new(&["tag", "t", "q_max", "rho", "count", "fraction", "delta_fraction"]);
    for &t in &ts {
        let sys = ResonantSystem::new(&m, psi.clone(), rho0)?;
        let h = p.grid_h.unwrap_or(sys.rho((1i64 << t) as f64) / 10.0);
        let rep = ubiquity_fraction(&m, &psi, t, &lo, &hi, rho0, delta0, h)?;
        if rep.delta_fraction > rep.fraction {
            out.failures.push(format!("t = {t}: Δ fraction {} exceeds the J(t) fraction {}", rep.delta_fraction, rep.fraction));
        }
        out.rows.push(vec![
            m.name().to_string(),
            t.to_string(),
            rep.q_max.to_string(),
            f(rep.rho),
            rep.resonant_points.to_string(),
            f(rep.fraction),
            f(rep.delta_fraction),
        ]);
    }
    let t_max = *ts.iter().max().expect("validated non-empty");
    let counts = ResonantSystem::new(&m, psi.clone(), rho0)?.j_counts(t_max)?;
    if counts.windows(2).any(|w| w[1] < w[0]) {
        out.failures.push("J(t) counts decrease".into());
    }
    out.summary["j_counts"] = json!(counts);
    out.summary["psi_rule"] = json!(psi.to_string());
    out.summary["rho0"] = json!(rho0);
    out.summary["delta0"] = json!(delta0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(text: &str) -> Manifest {
        Manifest::parse(text).unwrap()
    }

    #[test]
    fn rational_samples_span_interval() {
        let xs = rational_samples(-0.9, 0.9, 100);
        assert_eq!(xs.len(), 100);
        assert_eq!(xs[0], rat(-9, 10));
        assert_eq!(xs[99], rat(9, 10));
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn count_rows_and_fit() {
        let m = manifest("kind = \"count\"\n[manifold]\nname = \"parabola\"\n[params]\nq = [10, 20, 40, 80]\neps = \"0.05\"\n");
        let out = run(&m, 0).unwrap();
        assert_eq!(out.header, ["q", "eps", "count", "ambiguous", "seconds"]);
        assert_eq!(out.rows.len(), 4);
        assert!(out.rows.iter().all(|r| r[4].is_empty()));
        assert!(out.summary["growth_fit"]["slope"].as_f64().unwrap() > 2.0);
        assert!(out.failures.is_empty());
    }

    #[test]
    fn dual_check_is_exact_for_polynomials() {
        let m = manifest("kind = \"dual-check\"\n[manifold]\nname = \"veronese\"\nn = 2\n[params]\nsamples = 10\n");
        let out = run(&m, 0).unwrap();
        assert!(out.failures.is_empty());
        assert!(out.rows.iter().all(|r| r[3] == "1" && r[4] == "0"));
    }

    #[test]
    fn ubiquity_reports_monotone_counts() {
        let m = manifest(
            "kind = \"ubiquity\"\n[manifold]\nname = \"parabola\"\n[params]\npsi = \"q^-0.8\"\nt = [2, 4]\nrho0 = 2.0\nbox = [0.0, 1.0]\n",
        );
        let out = run(&m, 0).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.summary["j_counts"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn csv_quotes_nothing_plain() {
        let m = manifest("kind = \"pbox-decay\"\n[params]\nfunctions = [\"poly:1\", \"poly:0,1\"]\ntheta = [0.1, 8.0]\nhalvings = 2\nchecks = 20\n");
        let out = run(&m, 3).unwrap();
        let text = out.csv().unwrap();
        assert!(text.starts_with("halving,scale,fraction\n0,1,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn coarse_coverage_grid_rejected() {
        let m = manifest(
            "kind = \"coverage\"\n[manifold]\nname = \"parabola\"\n[params]\nq = [10]\npsi = \"0.1\"\nrho = 0.01\ngrid_h = 0.01\n",
        );
        assert!(matches!(run(&m, 0), Err(Error::ResolutionTooCoarse(_))));
    }
}
