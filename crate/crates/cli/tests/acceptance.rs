//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::f64::consts::{E, PI};
use std::process::Command;
use std::time::{Duration, Instant};

use lcres::extension_engine::{extend_with_estimate, iterated_extension, ExtensionResult};
use lcres::ideal_engine::{jumping_numbers, multiplier_ideal};
use lcres::presets::{preset, Preset};
use lcres::quadrature::Status;
use lcres::rational::{q, qi, to_f64};
use lcres::residue_analysis::{
    ell_independence, ohsawa_norm, regime_classify, residue_function, residue_norm, verify_prop_1lc_equals_ohsawa,
    AnalysisConfig, Classification, ExtensionChoice,
};
use lcres::suites::{filtration, membership};
use lcres::toric_model::{BumpFactor, MonomialSection, ToricData};

const SEED: u64 = 0x5EED_1C0DE;

type Outcome = Result<String, String>;

/// Composite Simpson rule with `2k` panels; the oracle for all 1-D reference integrals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn toric(name: &str) -> (ToricData, MonomialSection, Option<lcres::toric_model::BumpFunction>) {
    match preset(name).expect("preset") {
        Preset::Toric { data, f, g, .. } => (data, f, g),
        Preset::Model { .. } => panic!("{name} is not toric"),
    }
}

fn model_trichotomy() -> Outcome {
    let t0 = Instant::now();
    let cfg = AnalysisConfig::default();
    let Preset::Model { sigma, g } = preset("model-sigma2").map_err(|e| e.to_string())? else {
        return Err("model-sigma2 is not the real model".into());
    };
    let rows = regime_classify(sigma, &g, &[1, 2, 3], &cfg).map_err(|e| e.to_string())?;
    let divergent = [1.0, 0.5, 0.25].iter().all(|&eps| {
        rows[0]
            .samples
            .iter()
            .any(|s| s.eps == eps && s.status == Status::Divergent)
    });
    let free = match &g.factors[2] {
        BumpFactor::Disc { radius } => radius * radius,
        other => return Err(format!("unexpected free factor {other:?}")),
    };
    // 1/(sigma-1)! = 1 for sigma = 2; the centre factors equal 1 at the origin
    let limit = simpson(|x| g.factors[2].eval(x), 0.0, free, 20_000);
    let finite = rows[1].residue_norm.map(|n| n.value).ok_or("s=2 has no limit")?;
    let vanishing = rows[2].residue_norm.map(|n| n.value).ok_or("s=3 has no limit")?;
    let elapsed = t0.elapsed();
    check(
        divergent
            && rows[1].classification == Classification::FiniteResidueNorm
            && rel(finite, limit) <= 1e-3
            && vanishing.abs() <= 1e-3 * finite.abs()
            && within(elapsed, 60),
        format!(
            "s=1 divergent at eps 1,1/2,1/4: {divergent}; s=2 {finite:.8} vs 1-D {limit:.8}; s=3 {vanishing:.2e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn multiplier_example() -> Outcome {
    let data = ToricData::new(vec![qi(0)], vec![qi(1)], qi(1)).map_err(|e| e.to_string())?;
    let mut ideals_ok = true;
    for m in [q(1, 2), qi(1), q(3, 2), q(5, 2), qi(3)] {
        // z^a is in the ideal iff x^(a - m) is integrable at 0, i.e. a - m > -1
        let mf = to_f64(&m);
        let smallest = (0u32..).find(|&a| a as f64 - mf > -1.0).unwrap_or(0);
        ideals_ok &= multiplier_ideal(&data, &m).gens == vec![vec![smallest]];
    }
    let jumps = jumping_numbers(&data, &qi(0), &qi(5)).jumps;
    let expected: Vec<_> = (1..=5).map(qi).collect();
    check(
        ideals_ok && jumps == expected,
        format!("ideals (z^floor m): {ideals_ok}; jumps on (0,5]: {}", jumps.len()),
    )
}

fn kernel_calibration() -> Outcome {
    let t0 = Instant::now();
    let cfg = AnalysisConfig::default();
    let (data, f, _) = toric("calib1d");
    let target = PI * E;
    let mut worst: f64 = 0.0;
    for &eps in &cfg.eps_grid {
        let r = residue_function(&data, &f, 1, eps, cfg.ell, None, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((r.value - target).abs());
    }
    let norm = residue_norm(&data, &f, 1, None, &cfg)
        .map_err(|e| e.to_string())?
        .ok_or("residue norm diverges")?
        .value;
    let ohsawa = ohsawa_norm(&data, &f, None, ExtensionChoice::ConstantLift, &cfg)
        .map_err(|e| e.to_string())?
        .value;
    let spread = [rel(norm, target), rel(ohsawa, target), rel(norm, ohsawa)]
        .into_iter()
        .fold(0.0, f64::max);
    let elapsed = t0.elapsed();
    check(
        worst <= 1e-6 && spread <= 1e-6 && within(elapsed, 5),
        format!(
            "max |R(eps) - pi e| {worst:.1e}; norm {norm:.10}; ohsawa {ohsawa:.10}; spread {spread:.1e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn lc_equals_ohsawa() -> Outcome {
    let t0 = Instant::now();
    let cfg = AnalysisConfig::default();
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["calib1d", "prop2d", "prop2d-smooth"] {
        let (data, f, g) = toric(name);
        let r = verify_prop_1lc_equals_ohsawa(&data, &f, g.as_ref(), &cfg);
        let (Some(lc), Some(oh), Some(ow)) = (r.lc_norm, r.ohsawa_norm, r.ohsawa_weighted) else {
            ok = false;
            details.push(format!("{name}: {:?}", r.failure));
            continue;
        };
        let gap = (lc.value - oh.value).abs() / lc.value;
        let ext = rel(ow.value, oh.value);
        ok &= gap <= 1e-3 && ext <= 1e-3;
        details.push(format!("{name} lc {:.6} gap {gap:.1e} ext {ext:.1e}", lc.value));
    }
    // prop2d closed form: pi^2 e^(3/2) int_0^1 x^(-1/2) g_2(x) dx, with x = u^2
    let (_, _, g) = toric("prop2d");
    let g = g.ok_or("prop2d has no test function")?;
    let free = simpson(|u| 2.0 * g.factors[1].eval(u * u), 0.0, 1.0, 20_000);
    let expected = PI * PI * 1.5f64.exp() * free;
    let (data, f, _) = toric("prop2d");
    let lc = verify_prop_1lc_equals_ohsawa(&data, &f, Some(&g), &cfg)
        .lc_norm
        .map_or(f64::NAN, |n| n.value);
    let closed = rel(lc, expected);
    ok &= closed <= 1e-3;
    let elapsed = t0.elapsed();
    details.push(format!("prop2d vs 1-D oracle {closed:.1e}; {:.1}s", elapsed.as_secs_f64()));
    check(ok && within(elapsed, 120), details.join("; "))
}

fn filtration_suite() -> Outcome {
    let t0 = Instant::now();
    let r = filtration(100, SEED).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    check(
        r.pass && r.cases.len() == 100 && within(elapsed, 10),
        format!("{} configs, failing {:?}; {:.1}s", r.cases.len(), r.failing, elapsed.as_secs_f64()),
    )
}

fn dual_membership() -> Outcome {
    let t0 = Instant::now();
    let r = membership(20, 5, SEED, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let checks: u64 = r.cases.iter().filter_map(|c| c.detail["checks"].as_u64()).sum();
    check(
        r.pass && r.cases.len() >= 20 && within(elapsed, 600),
        format!(
            "{} configs, {checks} checks, failing {:?}; {:.1}s",
            r.cases.len(),
            r.failing,
            elapsed.as_secs_f64()
        ),
    )
}

fn ell_independence_check() -> Outcome {
    let cfg = AnalysisConfig::default();
    let mut ok = true;
    let mut details = Vec::new();
    for name in ["calib1d", "model-sigma2"] {
        let p = preset(name).map_err(|e| e.to_string())?;
        let r = ell_independence(&p.integrand(), p.sigma(), &[E, 10.0, 100.0], &cfg).map_err(|e| e.to_string())?;
        let lo = r.norms.iter().map(|(_, n)| n.value).fold(f64::INFINITY, f64::min);
        let hi = r.norms.iter().map(|(_, n)| n.value).fold(f64::NEG_INFINITY, f64::max);
        let spread = (hi - lo) / lo;
        ok &= r.norms.len() == 3 && spread <= 1e-3;
        details.push(format!("{name} spread {spread:.1e}"));
    }
    check(ok, details.join("; "))
}

/// Every row within `constant * R_f(0) * (1 + 1e-3)` at the four required step sizes.
fn estimate_holds(r: &ExtensionResult, constant: f64) -> bool {
    let rows_for = |sigma: usize| r.estimate_table.iter().filter(move |row| row.sigma == sigma);
    let stages_ok = r.stages.iter().all(|st| {
        let rows: Vec<_> = rows_for(st.sigma).filter(|row| row.centre == st.centre).collect();
        let eps_ok = [0.0, 0.25, 0.5, 1.0].iter().all(|e| rows.iter().any(|row| row.eps == *e));
        eps_ok
            && st.centre_norm > 0.0
            && rows
                .iter()
                .all(|row| row.lhs <= constant * st.centre_norm * (1.0 + 1e-3))
    });
    !r.stages.is_empty() && stages_ok
}

fn local_extension() -> Outcome {
    let t0 = Instant::now();
    let cfg = AnalysisConfig::default();
    let mut ok = true;
    let mut details = Vec::new();
    let cases = [
        ("calib1d", "1", 1, 2.0),
        ("box2", "z2", 1, 2.0),
        ("box2", "1", 2, 2.0),
        ("box2-smooth-up", "z2", 1, 2.0 * 0.1f64.exp()),
        ("box2-smooth-down", "z2", 1, 2.0 * 0.1f64.exp()),
    ];
    for (name, f, sigma, constant) in cases {
        let (data, _, _) = toric(name);
        let section = MonomialSection::parse(f, data.n).map_err(|e| e.to_string())?;
        let r = extend_with_estimate(&data, &section, sigma, &cfg).map_err(|e| e.to_string())?;
        let diagonal = data.smooth_term.is_none();
        let c_ok = !diagonal || r.bound_constant == 0.0;
        let good = r.congruence_ok && estimate_holds(&r, constant) && c_ok;
        ok &= good;
        details.push(format!("{name}:{f}:sigma={sigma} C={} {}", r.bound_constant, if good { "ok" } else { "bad" }));
    }
    // R_f(0) on the 1-D centre is the calibrated pi e
    let (data, f, _) = toric("calib1d");
    let r = extend_with_estimate(&data, &f, 1, &cfg).map_err(|e| e.to_string())?;
    let centre = r.stages.first().map_or(f64::NAN, |s| s.centre_norm);
    ok &= rel(centre, PI * E) <= 1e-3;
    let elapsed = t0.elapsed();
    details.push(format!("{:.1}s", elapsed.as_secs_f64()));
    check(ok && within(elapsed, 300), details.join("; "))
}

fn iterated() -> Outcome {
    let cfg = AnalysisConfig::default();
    let (data, _, _) = toric("box2");
    let f = MonomialSection::parse("1 + z1", 2).map_err(|e| e.to_string())?;
    let r = iterated_extension(&data, &f, &cfg).map_err(|e| e.to_string())?;
    // F - f must lie in (z1 z2): every surviving monomial divisible by both coordinates
    let diff = r.extension.sub(&f);
    let congruent = diff.terms().all(|(a, _)| a[0] >= 1 && a[1] >= 1);
    let rows_ok = !r.estimate_table.is_empty() && r.estimate_table.iter().all(|row| row.ok);
    check(
        congruent && r.congruence_ok && rows_ok && estimate_holds(&r, 2.0),
        format!(
            "F = {}; {} stages; F - f in (z1z2): {congruent}; rows ok: {rows_ok}",
            r.extension,
            r.stages.len()
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lcres"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.code() != Some(0) {
        return Err(format!("{args:?} exited with {:?}", out.status.code()));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 3] = [
        &["verify", "filtration", "--configs", "25", "--seed", "42"],
        &["verify", "prop-ohsawa", "--preset", "calib1d"],
        &["verify", "membership", "--configs", "1", "--box", "3", "--seed", "9"],
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for args in runs {
        let a = run_cli(args)?;
        let b = run_cli(args)?;
        let same = !a.is_empty() && a == b;
        ok &= same;
        details.push(format!("{} {}: {} bytes identical={same}", args[0], args[1], a.len()));
    }
    check(ok, details.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("model trichotomy", model_trichotomy),
        ("multiplier ideal example", multiplier_example),
        ("kernel calibration", kernel_calibration),
        ("lc norm equals ohsawa norm", lc_equals_ohsawa),
        ("filtration properties", filtration_suite),
        ("dual-oracle membership", dual_membership),
        ("ell independence", ell_independence_check),
        ("local extension estimate", local_extension),
        ("iterated extension", iterated),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
