//! Named verification suites: each runs a family of cases and reports
//! pass/fail per case.

use std::f64::consts::E;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::extension_engine::{extend_with_estimate, iterated_extension};
use crate::ideal_engine::{
    adjoint_ideal, combinatorial_membership, jumping_numbers, lc_structure, multiplier_ideal,
};
use crate::presets::{model_bump, preset, random_data, Preset};
use crate::rational::{format_q, qi};
use crate::residue_analysis::{
    analytic_membership, ell_independence, regime_classify, verify_prop_1lc_equals_ohsawa,
    AnalysisConfig, Classification,
};
use crate::toric_model::{MonomialSection, ToricData};

pub const SUITES: [&str; 6] = [
    "regimes",
    "prop-ohsawa",
    "membership",
    "filtration",
    "ell-independence",
    "extension",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub cases: Vec<CaseResult>,
    pub failing: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str, cases: Vec<CaseResult>) -> Self {
        let failing: Vec<String> = cases.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        SuiteReport {
            suite: suite.to_string(),
            pass: failing.is_empty(),
            cases,
            failing,
        }
    }
}

fn failed(name: String, err: &Error) -> CaseResult {
    CaseResult {
        name,
        pass: false,
        detail: json!({ "error": err.to_string() }),
    }
}

fn data_json(d: &ToricData) -> Value {
    serde_json::to_value(d).unwrap_or(Value::Null)
}

/// Kernel index `s` below, at and above `sigma` on the real model with `n = sigma + 1`.
pub fn regimes(sigma: usize, cfg: &AnalysisConfig) -> Result<SuiteReport> {
    if sigma == 0 {
        return Err(Error::Domain("the model needs sigma >= 1".into()));
    }
    let g = model_bump(sigma + 1);
    let s_values: Vec<u32> = ((sigma as u32).saturating_sub(1).max(1)..=sigma as u32 + 1).collect();
    let rows = regime_classify(sigma, &g, &s_values, cfg)?;
    let scale = rows
        .iter()
        .find(|r| r.s as usize == sigma)
        .and_then(|r| r.residue_norm)
        .map_or(0.0, |n| n.value.abs());
    let cases = rows
        .into_iter()
        .map(|row| {
            let s = row.s as usize;
            let (expected, pass) = if s < sigma {
                ("diverges_all_eps", row.classification == Classification::DivergesAllEps)
            } else if s == sigma {
                let close = match (row.residue_norm, row.expected) {
                    (Some(n), Some(e)) => (n.value - e).abs() <= cfg.identity_tol * e.abs(),
                    _ => false,
                };
                ("finite_residue_norm", row.classification == Classification::FiniteResidueNorm && close)
            } else {
                let small = row
                    .residue_norm
                    .is_some_and(|n| n.value.abs() <= cfg.identity_tol * scale);
                ("vanishing_limit", row.classification == Classification::VanishingLimit && small)
            };
            CaseResult {
                name: format!("s={s}"),
                pass,
                detail: json!({ "expected": expected, "row": row }),
            }
        })
        .collect();
    Ok(SuiteReport::new("regimes", cases))
}

pub fn prop_ohsawa(presets: &[String], cfg: &AnalysisConfig) -> Result<SuiteReport> {
    let mut cases = Vec::new();
    for name in presets {
        let Preset::Toric { data, f, g, .. } = preset(name)? else {
            return Err(Error::InvalidData(format!("preset {name} is not toric data")));
        };
        let report = verify_prop_1lc_equals_ohsawa(&data, &f, g.as_ref(), cfg);
        cases.push(CaseResult {
            name: name.clone(),
            pass: report.pass,
            detail: serde_json::to_value(&report).unwrap_or(Value::Null),
        });
    }
    Ok(SuiteReport::new("prop-ohsawa", cases))
}

fn box_monomials(n: usize, side: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..side).map(move |k| {
                    let mut b = a.clone();
                    b.push(k);
                    b
                })
            })
            .collect();
    }
    out
}

/// Analytic against combinatorial membership on random data with `n <= 3`.
pub fn membership(configs: usize, side: u32, seed: u64, cfg: &AnalysisConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let datas: Vec<ToricData> = (0..configs).map(|_| random_data(&mut rng, 3, 6)).collect();
    let mut cases = Vec::new();
    for (i, data) in datas.iter().enumerate() {
        let lc = lc_structure(data)?;
        let monomials = box_monomials(data.n, side);
        let ideal0 = multiplier_ideal(data, &data.m);
        let checks: Vec<(Vec<u32>, usize)> = monomials
            .iter()
            .flat_map(|a| (0..=lc.sigma_mlc + 1).map(move |s| (a.clone(), s)))
            .collect();
        let outcomes: Vec<Result<Option<Value>>> = checks
            .par_iter()
            .map(|(a, s)| {
                let combinatorial = combinatorial_membership(data, a, *s);
                let other = if *s == 0 {
                    ideal0.contains(a)
                } else {
                    analytic_membership(data, a, *s as u32, cfg)?
                };
                Ok((combinatorial != other).then(|| {
                    json!({ "monomial": a, "sigma": s, "combinatorial": combinatorial, "other": other })
                }))
            })
            .collect();
        let mut mismatches = Vec::new();
        let mut errors = Vec::new();
        for o in outcomes {
            match o {
                Ok(Some(m)) => mismatches.push(m),
                Ok(None) => {}
                Err(e) => errors.push(e.to_string()),
            }
        }
        cases.push(CaseResult {
            name: format!("config-{i}"),
            pass: mismatches.is_empty() && errors.is_empty(),
            detail: json!({
                "data": data_json(data),
                "checks": checks.len(),
                "mismatches": mismatches,
                "errors": errors,
            }),
        });
    }
    Ok(SuiteReport::new("membership", cases))
}

/// Exact chain and endpoint identities of the adjoint ideals on random data with `n <= 4`.
pub fn filtration(configs: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for i in 0..configs {
        let data = random_data(&mut rng, 4, 6);
        let case = (|| -> Result<CaseResult> {
            let jumps = jumping_numbers(&data, &qi(0), &data.m);
            let lc = lc_structure(&data)?;
            let ideals = (0..=lc.sigma_mlc)
                .map(|s| adjoint_ideal(&data, &jumps, s))
                .collect::<Result<Vec<_>>>()?;
            let chain = ideals.windows(2).all(|w| w[0].is_subset_of(&w[1]));
            let bottom = ideals[0] == multiplier_ideal(&data, &data.m);
            let top = ideals[lc.sigma_mlc] == *jumps.ideal_before(&data.m)?;
            let square_free = (1..=lc.sigma_mlc + 1).all(|s| {
                let l = lc.lcc_ideal(s);
                l.is_zero() || l.is_radical()
            });
            let annihilators = (1..=lc.sigma_mlc).all(|s| ideals[s - 1].colon(&ideals[s]) == lc.lcc_ideal(s));
            Ok(CaseResult {
                name: format!("config-{i}"),
                pass: chain && bottom && top && square_free && annihilators,
                detail: json!({
                    "data": data_json(&data),
                    "sigma_mlc": lc.sigma_mlc,
                    "chain": chain,
                    "bottom_is_multiplier_ideal": bottom,
                    "top_is_previous_ideal": top,
                    "lcc_square_free": square_free,
                    "annihilators": annihilators,
                }),
            })
        })();
        cases.push(case.unwrap_or_else(|e| failed(format!("config-{i}"), &e)));
    }
    Ok(SuiteReport::new("filtration", cases))
}

pub fn ell_suite(presets: &[String], ells: &[f64], cfg: &AnalysisConfig) -> Result<SuiteReport> {
    let mut cases = Vec::new();
    for name in presets {
        let p = preset(name)?;
        let case = match ell_independence(&p.integrand(), p.sigma(), ells, cfg) {
            Ok(r) => CaseResult {
                name: name.clone(),
                pass: r.pass,
                detail: serde_json::to_value(&r).unwrap_or(Value::Null),
            },
            Err(e) => failed(name.clone(), &e),
        };
        cases.push(case);
    }
    Ok(SuiteReport::new("ell-independence", cases))
}

pub fn default_ells() -> Vec<f64> {
    vec![E, 10.0, 100.0]
}

/// `(preset, section, sigma)`; `sigma = None` runs the iterated extension.
pub type ExtensionCase = (String, String, Option<usize>);

pub fn default_extension_cases() -> Vec<ExtensionCase> {
    let c = |p: &str, f: &str, s: Option<usize>| (p.to_string(), f.to_string(), s);
    vec![
        c("calib1d", "1", Some(1)),
        c("box2", "z2", Some(1)),
        c("box2", "1", Some(2)),
        c("box2-smooth-up", "z2", Some(1)),
        c("box2-smooth-down", "z2", Some(1)),
        c("box2", "1 + z1", None),
    ]
}

pub fn extension(cases: &[ExtensionCase], cfg: &AnalysisConfig) -> Result<SuiteReport> {
    let mut out = Vec::new();
    for (name, f, sigma) in cases {
        let Preset::Toric { data, .. } = preset(name)? else {
            return Err(Error::InvalidData(format!("preset {name} is not toric data")));
        };
        let section = MonomialSection::parse(f, data.n)?;
        let label = match sigma {
            Some(s) => format!("{name}:{f}:sigma={s}"),
            None => format!("{name}:{f}:iterated"),
        };
        let result = match sigma {
            Some(s) => extend_with_estimate(&data, &section, *s, cfg),
            None => iterated_extension(&data, &section, cfg),
        };
        out.push(match result {
            Ok(r) => CaseResult {
                name: label,
                pass: r.passed(),
                detail: json!({ "m": format_q(&data.m), "result": r }),
            },
            Err(e) => failed(label, &e),
        });
    }
    Ok(SuiteReport::new("extension", out))
}
