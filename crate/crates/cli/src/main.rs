//! Batch command-line front end: computations and verification suites with
//! JSON or CSV reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use lcres::extension_engine::{extend_with_estimate, iterated_extension, ExtensionResult};
use lcres::ideal_engine::{adjoint_ideal, jumping_numbers, lc_structure, multiplier_ideal};
use lcres::presets::{preset, Preset};
use lcres::rational::{format_q, parse_q, parse_q_list, qi, to_f64};
use lcres::residue_analysis::{ohsawa_norm, residue_report, AnalysisConfig, ExtensionChoice, Integrand};
use lcres::suites::{self, SuiteReport};
use lcres::toric_model::{BumpFunction, MonomialSection, ToricData};
use lcres::{Error, Q};

const KERNEL_CONVENTION: &str = "R(eps) = eps * pi^n e^m * int |f|^2 e^(-h) g * prod x_j^(c_j + m nu_j - 1) \
     * |psi|^(-sigma) * (ln(ell |psi|))^(-1-eps) dx, psi = sum nu_j ln x_j - 1, x_j = |z_j|^2";

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "lcres", version, about = "Residue functions, adjoint ideals and lc-measures on toric model data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON file with toric data (`n`, `c`, `nu`, `m`, optional `smooth_term`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated rationals.
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, global = true)]
    nu: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    /// Named configuration.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    sigma: Option<u32>,
    #[arg(long, global = true)]
    ell: Option<f64>,
    /// Halving grid `a:b`, e.g. `1:2^-10`.
    #[arg(long, global = true)]
    eps_grid: Option<String>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    #[arg(long, global = true)]
    csv: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Section such as `1 + z1` (1-based coordinates).
    #[arg(long, global = true)]
    f: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Jumping numbers of `m -> I(phi_L + m psi)` in a range.
    Jumps {
        /// `lo:hi`, rationals.
        #[arg(long, default_value = "0:3")]
        range: String,
    },
    /// Multiplier ideal at `m` and the adjoint ideals `A_0, ..., A_{sigma_mlc}`.
    Ideals,
    /// Relevant divisors and lc centres at `m`.
    Centres,
    /// Residue function samples and the residue norm.
    Residue,
    /// Shell integrals and their limit.
    Ohsawa {
        /// `start:end:step`, e.g. `-20:-35:5`.
        #[arg(long, default_value = "-20:-35:5", allow_hyphen_values = true)]
        shells: String,
        #[arg(long, value_parser = ["constant-lift", "proof-weighted"], default_value = "constant-lift")]
        extension: String,
    },
    /// Extension with the local estimate; iterated through the filtration unless `--sigma` is given.
    Extend,
    /// Runs a named verification suite.
    Verify {
        #[arg(value_parser = suites::SUITES)]
        suite: String,
        /// Random configurations (membership, filtration).
        #[arg(long)]
        configs: Option<usize>,
        /// Side of the exponent box (membership).
        #[arg(long = "box", default_value_t = 5)]
        box_side: u32,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Invalid(anyhow::Error),
    Numeric(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Quadrature(_) | Error::Extrapolation(_) | Error::CrossCheck(_)) => Failure::Numeric(e),
            _ => Failure::Invalid(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

struct Output {
    result: Value,
    csv: Option<String>,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(pass) => ExitCode::from(if pass { 0 } else { 1 }),
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let common = &cli.common;
    let cfg = analysis_config(common)?;
    let (name, output) = match &cli.command {
        Command::Jumps { range } => ("jumps", cmd_jumps(common, range)?),
        Command::Ideals => ("ideals", cmd_ideals(common)?),
        Command::Centres => ("centres", cmd_centres(common)?),
        Command::Residue => ("residue", cmd_residue(common, &cfg)?),
        Command::Ohsawa { shells, extension } => ("ohsawa", cmd_ohsawa(common, &cfg, shells, extension)?),
        Command::Extend => ("extend", cmd_extend(common, &cfg)?),
        Command::Verify {
            suite,
            configs,
            box_side,
        } => ("verify", cmd_verify(common, &cfg, suite, *configs, *box_side)?),
    };
    let text = if common.csv {
        output
            .csv
            .ok_or_else(|| Failure::Invalid(anyhow!("`{name}` has no tabular output; drop --csv")))?
    } else {
        let report = json!({
            "artifact": "lcres",
            "version": env!("CARGO_PKG_VERSION"),
            "schema": SCHEMA_VERSION,
            "command": name,
            "kernel_convention": KERNEL_CONVENTION,
            "config": resolved_config(cli, &cfg),
            "pass": output.pass,
            "result": output.result,
        });
        let mut s = serde_json::to_string_pretty(&report).map_err(|e| Failure::Invalid(e.into()))?;
        s.push('\n');
        s
    };
    emit(common.out.as_deref(), &text).map_err(Failure::Invalid)?;
    Ok(output.pass)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".tmp");
            let tmp = PathBuf::from(tmp);
            fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
            fs::rename(&tmp, path).with_context(|| format!("moving report to {}", path.display()))?;
        }
    }
    Ok(())
}

fn analysis_config(common: &Common) -> anyhow::Result<AnalysisConfig> {
    let mut cfg = AnalysisConfig::default();
    if let Some(grid) = &common.eps_grid {
        cfg.eps_grid = parse_eps_grid(grid)?;
    }
    if let Some(ell) = common.ell {
        if !(ell >= std::f64::consts::E) {
            bail!("--ell must be at least e");
        }
        cfg.ell = ell;
    }
    if let Some(tol) = common.tol {
        if !(tol > 0.0 && tol < 1.0) {
            bail!("--tol must lie in (0, 1)");
        }
        cfg.quad.tol = tol;
    }
    if let Some(seed) = common.seed {
        cfg.quad.seed = seed;
    }
    Ok(cfg)
}

fn resolved_config(cli: &Cli, cfg: &AnalysisConfig) -> Value {
    let c = &cli.common;
    let mut map = BTreeMap::new();
    let mut put = |k: &str, v: Value| {
        map.insert(k.to_string(), v);
    };
    put("analysis", serde_json::to_value(cfg).unwrap_or(Value::Null));
    put("preset", json!(c.preset));
    put("sigma", json!(c.sigma));
    put("f", json!(c.f));
    put("c", json!(c.c));
    put("nu", json!(c.nu));
    put("m", json!(c.m));
    put("config_file", json!(c.config.as_ref().map(|p| p.display().to_string())));
    if let Command::Verify {
        suite,
        configs,
        box_side,
    } = &cli.command
    {
        put("suite", json!(suite));
        put("configs", json!(configs));
        put("box", json!(box_side));
    }
    if let Command::Jumps { range } = &cli.command {
        put("range", json!(range));
    }
    if let Command::Ohsawa { shells, extension } = &cli.command {
        put("shells", json!(shells));
        put("extension", json!(extension));
    }
    serde_json::to_value(map).unwrap_or(Value::Null)
}

/// `2^-8`, `1/256`, `0.5` or `1`.
fn parse_number(s: &str) -> anyhow::Result<f64> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let b: f64 = base.trim().parse().with_context(|| format!("bad base in '{s}'"))?;
        let e: i32 = exp.trim().parse().with_context(|| format!("bad exponent in '{s}'"))?;
        return Ok(b.powi(e));
    }
    if s.contains('/') {
        return Ok(to_f64(&parse_q(s)?));
    }
    s.parse::<f64>().with_context(|| format!("bad number '{s}'"))
}

fn parse_eps_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("--eps-grid expects a:b, got '{s}'"))?;
    let (hi, lo) = (parse_number(a)?, parse_number(b)?);
    if !(hi > 0.0 && lo > 0.0 && lo <= hi) {
        bail!("--eps-grid needs 0 < b <= a");
    }
    let mut grid = vec![hi];
    while grid.last().is_some_and(|&e| e * 0.5 >= lo * (1.0 - 1e-12)) {
        let next = grid.last().copied().unwrap_or(hi) * 0.5;
        grid.push(next);
    }
    if (grid.last().copied().unwrap_or(hi) / lo - 1.0).abs() > 1e-9 {
        bail!("--eps-grid end {lo} is not {hi} times a power of 1/2");
    }
    Ok(grid)
}

fn parse_shells(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        bail!("--shells expects start:end:step, got '{s}'");
    };
    let (a, b, step) = (parse_number(a)?, parse_number(b)?, parse_number(step)?.abs());
    if step == 0.0 {
        bail!("--shells step must be nonzero");
    }
    let dir = if b < a { -1.0 } else { 1.0 };
    let count = ((b - a).abs() / step).floor() as usize;
    Ok((0..=count).map(|i| a + dir * step * i as f64).collect())
}

/// Toric data, section, index and test function from the flags.
struct Setup {
    data: ToricData,
    f: MonomialSection,
    sigma: Option<u32>,
    g: Option<BumpFunction>,
}

fn toric_setup(common: &Common, need_m: bool) -> anyhow::Result<Setup> {
    let (mut data, preset_f, preset_sigma, g) = if let Some(name) = &common.preset {
        match preset(name)? {
            Preset::Toric { data, f, sigma, g } => (data, Some(f), Some(sigma), g),
            Preset::Model { .. } => bail!("preset {name} is a real model, not toric data"),
        }
    } else if let Some(path) = &common.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        (ToricData::from_json(&text)?, None, None, None)
    } else {
        let c = parse_q_list(common.c.as_deref().ok_or_else(|| anyhow!("give --preset, --config or --c/--nu"))?)?;
        let nu = parse_q_list(common.nu.as_deref().ok_or_else(|| anyhow!("--nu is required with --c"))?)?;
        let m = match &common.m {
            Some(m) => parse_q(m)?,
            None if need_m => bail!("--m is required"),
            None => qi(1),
        };
        (ToricData::new(c, nu, m)?, None, None, None)
    };
    if common.preset.is_some() || common.config.is_some() {
        if let Some(m) = &common.m {
            data = data.with_m(parse_q(m)?);
            data.validate()?;
        }
    }
    let f = match (&common.f, preset_f) {
        (Some(s), _) => MonomialSection::parse(s, data.n)?,
        (None, Some(f)) => f,
        (None, None) => MonomialSection::monomial(vec![0; data.n]),
    };
    Ok(Setup {
        data,
        f,
        sigma: common.sigma.or(preset_sigma),
        g,
    })
}

fn ok(result: Value, csv: Option<String>) -> Output {
    Output {
        result,
        csv,
        pass: true,
    }
}

fn to_value<T: Serialize>(v: &T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_jumps(common: &Common, range: &str) -> Result<Output, Failure> {
    let setup = toric_setup(common, false)?;
    let (lo, hi) = range
        .split_once(':')
        .ok_or_else(|| anyhow!("--range expects lo:hi, got '{range}'"))?;
    let (lo, hi): (Q, Q) = (parse_q(lo)?, parse_q(hi)?);
    if hi < lo {
        return Err(anyhow!("--range needs lo <= hi").into());
    }
    let schedule = jumping_numbers(&setup.data, &lo, &hi);
    let csv = std::iter::once("m".to_string())
        .chain(schedule.jumps.iter().map(format_q))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    Ok(ok(to_value(&schedule)?, Some(csv)))
}

fn cmd_ideals(common: &Common) -> Result<Output, Failure> {
    let setup = toric_setup(common, true)?;
    let data = &setup.data;
    let multiplier = multiplier_ideal(data, &data.m);
    let mut result = json!({ "m": format_q(&data.m), "multiplier_ideal": multiplier });
    if let Ok(lc) = lc_structure(data) {
        let jumps = jumping_numbers(data, &qi(0), &data.m);
        let adjoint = (0..=lc.sigma_mlc)
            .map(|s| adjoint_ideal(data, &jumps, s))
            .collect::<lcres::Result<Vec<_>>>()?;
        let lcc: Vec<_> = (1..=lc.sigma_mlc + 1).map(|s| lc.lcc_ideal(s)).collect();
        result["previous_jump"] = json!(format_q(&jumps.predecessor(&data.m)?));
        result["adjoint_ideals"] = to_value(&adjoint)?;
        result["lcc_ideals"] = to_value(&lcc)?;
    }
    Ok(ok(result, None))
}

fn cmd_centres(common: &Common) -> Result<Output, Failure> {
    let setup = toric_setup(common, true)?;
    let lc = lc_structure(&setup.data)?;
    let centres: BTreeMap<String, Vec<Vec<usize>>> = (1..=lc.sigma_mlc)
        .map(|s| {
            let cs = lc.centres(s).into_iter().map(|c| c.iter().map(|j| j + 1).collect()).collect();
            (s.to_string(), cs)
        })
        .collect();
    Ok(ok(
        json!({
            "m": format_q(&setup.data.m),
            "relevant": lc.relevant.iter().map(|j| j + 1).collect::<Vec<_>>(),
            "sigma_mlc": lc.sigma_mlc,
            "centres": centres,
        }),
        None,
    ))
}

fn residue_source(common: &Common) -> anyhow::Result<(Integrand, u32)> {
    if let Some(name) = &common.preset {
        if let Preset::Model { sigma, g } = preset(name)? {
            return Ok((Integrand::Model { sigma, g }, common.sigma.unwrap_or(sigma as u32)));
        }
    }
    let setup = toric_setup(common, true)?;
    let sigma = setup.sigma.unwrap_or(1);
    Ok((Integrand::toric(&setup.data, &setup.f, setup.g.as_ref()), sigma))
}

fn cmd_residue(common: &Common, cfg: &AnalysisConfig) -> Result<Output, Failure> {
    let (source, sigma) = residue_source(common)?;
    let report = residue_report(&source, sigma, cfg.ell, cfg)?;
    let mut csv = String::from("eps,value,error,status\n");
    for s in &report.samples {
        csv.push_str(&format!("{},{},{},{}\n", s.eps, s.value, s.error, to_value(&s.status)?.as_str().unwrap_or("")));
    }
    Ok(ok(to_value(&report)?, Some(csv)))
}

fn cmd_ohsawa(common: &Common, cfg: &AnalysisConfig, shells: &str, extension: &str) -> Result<Output, Failure> {
    let setup = toric_setup(common, true)?;
    let mut cfg = cfg.clone();
    cfg.shell_levels = parse_shells(shells)?;
    let choice = if extension == "proof-weighted" {
        ExtensionChoice::ProofWeighted
    } else {
        ExtensionChoice::ConstantLift
    };
    let norm = ohsawa_norm(&setup.data, &setup.f, setup.g.as_ref(), choice, &cfg)?;
    let mut csv = String::from("t,value\n");
    for (t, v) in &norm.shells {
        csv.push_str(&format!("{t},{v}\n"));
    }
    Ok(ok(to_value(&norm)?, Some(csv)))
}

fn extension_csv(r: &ExtensionResult) -> String {
    let mut csv = String::from("sigma,centre,eps,lhs,rhs,ok\n");
    for row in &r.estimate_table {
        let centre: Vec<String> = row.centre.iter().map(|j| j.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.sigma,
            centre.join(" "),
            row.eps,
            row.lhs,
            row.rhs,
            row.ok
        ));
    }
    csv
}

fn cmd_extend(common: &Common, cfg: &AnalysisConfig) -> Result<Output, Failure> {
    let setup = toric_setup(common, true)?;
    let result = match common.sigma {
        Some(s) => extend_with_estimate(&setup.data, &setup.f, s as usize, cfg)?,
        None => iterated_extension(&setup.data, &setup.f, cfg)?,
    };
    Ok(Output {
        csv: Some(extension_csv(&result)),
        pass: result.passed(),
        result: to_value(&result)?,
    })
}

fn cmd_verify(
    common: &Common,
    cfg: &AnalysisConfig,
    suite: &str,
    configs: Option<usize>,
    box_side: u32,
) -> Result<Output, Failure> {
    let presets = |defaults: &[&str]| -> Vec<String> {
        match &common.preset {
            Some(p) => vec![p.clone()],
            None => defaults.iter().map(|s| s.to_string()).collect(),
        }
    };
    let seed = cfg.quad.seed;
    let report: SuiteReport = match suite {
        "regimes" => suites::regimes(common.sigma.unwrap_or(2) as usize, cfg)?,
        "prop-ohsawa" => suites::prop_ohsawa(&presets(&["calib1d", "prop2d", "prop2d-smooth"]), cfg)?,
        "membership" => suites::membership(configs.unwrap_or(20), box_side, seed, cfg)?,
        "filtration" => suites::filtration(configs.unwrap_or(100), seed)?,
        "ell-independence" => {
            let ells = match common.ell {
                Some(_) => return Err(anyhow!("ell-independence sweeps its own values of ell").into()),
                None => suites::default_ells(),
            };
            suites::ell_suite(&presets(&["calib1d", "model-sigma2"]), &ells, cfg)?
        }
        "extension" => {
            let cases = match &common.preset {
                Some(p) => vec![(
                    p.clone(),
                    common.f.clone().unwrap_or_else(|| "1".into()),
                    common.sigma.map(|s| s as usize),
                )],
                None => suites::default_extension_cases(),
            };
            suites::extension(&cases, cfg)?
        }
        other => return Err(anyhow!("unknown suite '{other}'").into()),
    };
    if common.verbose > 0 {
        for case in &report.cases {
            eprintln!("{} {}", if case.pass { "PASS" } else { "FAIL" }, case.name);
        }
    }
    let mut csv = String::from("case,pass\n");
    for case in &report.cases {
        csv.push_str(&format!("{},{}\n", case.name, case.pass));
    }
    Ok(Output {
        pass: report.pass,
        csv: Some(csv),
        result: to_value(&report)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_grid_parsing() {
        let g = parse_eps_grid("1:2^-3").unwrap();
        assert_eq!(g, vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(parse_eps_grid("1/2:1/8").unwrap(), vec![0.5, 0.25, 0.125]);
        assert!(parse_eps_grid("1:0.3").is_err());
        assert!(parse_eps_grid("1").is_err());
    }

    #[test]
    fn shells_parsing() {
        assert_eq!(parse_shells("-20:-35:5").unwrap(), vec![-20.0, -25.0, -30.0, -35.0]);
        assert!(parse_shells("-20:-35").is_err());
    }
}
