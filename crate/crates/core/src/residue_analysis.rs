//! Residue functions, residue norms, lc-measures and the Ohsawa measure,
//! assembled term by term from the quadrature layer.

use std::f64::consts::{E, PI};

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{
    extrapolate_to_zero, residue_integral, restriction_integral, shell_integral, stable_sum,
    IntegralSpec, QuadOptions, QuadResult, SmoothFactor, Status,
};
use crate::rational::{to_f64, Q};
use crate::toric_model::{BumpFactor, BumpFunction, MonomialSection, SmoothTerm, ToricData};

/// Tolerances and grids shared by the analytic verifiers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub eps_grid: Vec<f64>,
    pub ell: f64,
    pub quad: QuadOptions,
    /// Relative tolerance of identity checks.
    pub identity_tol: f64,
    /// Monotonicity slack and vanishing threshold of the extrapolation.
    pub extrapolation_tol: f64,
    /// Levels `t` of the shells `{t < psi < t + 1}`.
    pub shell_levels: Vec<f64>,
    /// Step sizes probed by the analytic membership test.
    pub membership_eps: Vec<f64>,
    /// Relative tolerance of the membership probes and of their detector shells.
    pub membership_tol: f64,
    /// Added to the kernel index of residue functions; nonzero only in negative controls.
    pub kernel_index_shift: i32,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            eps_grid: (0..=10).map(|i| 0.5f64.powi(i)).collect(),
            ell: E,
            quad: QuadOptions::default(),
            identity_tol: 1e-3,
            extrapolation_tol: 1e-3,
            shell_levels: vec![-20.0, -25.0, -30.0, -35.0],
            membership_eps: vec![1.0, 0.25],
            membership_tol: 1e-3,
            kernel_index_shift: 0,
        }
    }
}

/// Which smooth extension of the test function enters the Ohsawa shells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionChoice {
    /// `g` pulled back along the normal directions.
    ConstantLift,
    /// `g * exp(h(x) - h(x)|_{centre})`, cancelling the smooth part of the weight.
    ProofWeighted,
}

/// The integrand family `eps -> R(eps)` of a residue function.
#[derive(Clone, Debug, PartialEq)]
pub enum Integrand {
    Toric {
        data: ToricData,
        f: MonomialSection,
        g: Option<BumpFunction>,
        /// Extra factor `exp(w(x))` multiplying the weight.
        log_weight: Option<SmoothTerm>,
    },
    /// `psi = sum_{j < sigma} ln x_j - 1` on the real cube `[0,1]^n` with test function `g`.
    Model { sigma: usize, g: BumpFunction },
}

impl Integrand {
    pub fn toric(data: &ToricData, f: &MonomialSection, g: Option<&BumpFunction>) -> Self {
        Integrand::Toric {
            data: data.clone(),
            f: f.clone(),
            g: g.cloned(),
            log_weight: None,
        }
    }

    /// Integral specs, one per orthogonal term, at kernel index `sigma`.
    pub fn term_specs(&self, sigma: u32, eps: f64, ell: f64) -> Result<Vec<IntegralSpec>> {
        match self {
            Integrand::Toric {
                data,
                f,
                g,
                log_weight,
            } => f
                .terms()
                .map(|(a, c)| {
                    let mut smooth = SmoothFactor::constant(c.norm_sqr());
                    if let Some(g) = g {
                        smooth = smooth.with_bump(g.clone());
                    }
                    if let Some(h) = &data.smooth_term {
                        smooth = smooth.with_log_weight(SmoothTerm::default().sub(h));
                    }
                    if let Some(w) = log_weight {
                        smooth = smooth.with_log_weight(w.clone());
                    }
                    Ok(IntegralSpec {
                        beta: rates(data, a)?,
                        nu: data.nu_f64(),
                        sigma,
                        eps,
                        ell,
                        smooth,
                        prefactor: prefactor(data),
                    })
                })
                .collect(),
            Integrand::Model { sigma: k, g } => {
                let n = g.factors.len();
                if *k > n {
                    return Err(Error::InvalidData(format!("model index {k} exceeds n = {n}")));
                }
                Ok(vec![IntegralSpec {
                    beta: (0..n).map(|j| if j < *k { 0.0 } else { 1.0 }).collect(),
                    nu: (0..n).map(|j| if j < *k { 1.0 } else { 0.0 }).collect(),
                    sigma,
                    eps,
                    ell,
                    smooth: SmoothFactor::one().with_bump(g.clone()),
                    prefactor: 1.0,
                }])
            }
        }
    }
}

/// Exponential rates `a_j + 1 - e_j` in log coordinates.
pub fn exact_rates(data: &ToricData, a: &[u32]) -> Vec<Q> {
    data.exponents()
        .iter()
        .zip(a)
        .map(|(e, &aj)| Q::from_integer((aj + 1).into()) - e)
        .collect()
}

fn rates(data: &ToricData, a: &[u32]) -> Result<Vec<f64>> {
    if a.len() != data.n {
        return Err(Error::InvalidData(format!(
            "monomial has {} exponents, expected {}",
            a.len(),
            data.n
        )));
    }
    Ok(exact_rates(data, a).iter().map(to_f64).collect())
}

/// `pi^n e^m`: angular integrals and the shift in `psi`.
pub fn prefactor(data: &ToricData) -> f64 {
    PI.powi(data.n as i32) * to_f64(&data.m).exp()
}

fn kernel_index(sigma: u32, cfg: &AnalysisConfig) -> Result<u32> {
    let k = sigma as i64 + cfg.kernel_index_shift as i64;
    if k < 1 {
        return Err(Error::Domain(format!("kernel index {k} must be at least 1")));
    }
    Ok(k as u32)
}

fn combine(results: Vec<QuadResult>) -> QuadResult {
    let status = if results.iter().any(|r| r.status == Status::Divergent) {
        Status::Divergent
    } else if results.iter().any(|r| r.status == Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Converged
    };
    let engine = results
        .first()
        .map_or(crate::quadrature::Engine::Deterministic, |r| r.engine);
    let evidence = results
        .iter()
        .find(|r| r.status == Status::Divergent)
        .map(|r| r.evidence.clone())
        .unwrap_or_default();
    let values: Vec<f64> = results.iter().map(|r| r.value).collect();
    let errors: Vec<f64> = results.iter().map(|r| r.abs_error).collect();
    QuadResult {
        value: stable_sum(&values),
        abs_error: stable_sum(&errors),
        status,
        evidence,
        engine,
    }
}

fn residue_at(source: &Integrand, sigma: u32, eps: f64, ell: f64, opts: &QuadOptions) -> Result<QuadResult> {
    let specs = source.term_specs(sigma, eps, ell)?;
    let results = specs
        .iter()
        .map(|s| residue_integral(s, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(results))
}

/// `R(eps)` of index `sigma` for `|f|^2` (times `g` when given).
pub fn residue_function(
    data: &ToricData,
    f: &MonomialSection,
    sigma: u32,
    eps: f64,
    ell: f64,
    g: Option<&BumpFunction>,
    cfg: &AnalysisConfig,
) -> Result<QuadResult> {
    if sigma == 0 {
        return Err(Error::Domain("residue functions need sigma >= 1".into()));
    }
    let k = kernel_index(sigma, cfg)?;
    residue_at(&Integrand::toric(data, f, g), k, eps, ell, &cfg.quad)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    DivergesAllEps,
    FiniteResidueNorm,
    VanishingLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormValue {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub eps: f64,
    pub value: f64,
    pub error: f64,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidueReport {
    pub sigma: u32,
    pub ell: f64,
    pub samples: Vec<Sample>,
    pub classification: Classification,
    pub residue_norm: Option<NormValue>,
}

/// Samples `R(eps)` on the grid, classifies and extrapolates to `eps = 0`.
pub fn residue_report(source: &Integrand, sigma: u32, ell: f64, cfg: &AnalysisConfig) -> Result<ResidueReport> {
    if sigma == 0 {
        return Err(Error::Domain("residue functions need sigma >= 1".into()));
    }
    let k = kernel_index(sigma, cfg)?;
    let results: Vec<Result<QuadResult>> = cfg
        .eps_grid
        .par_iter()
        .map(|&eps| residue_at(source, k, eps, ell, &cfg.quad))
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    for (eps, r) in cfg.eps_grid.iter().zip(results) {
        let r = r?;
        samples.push(Sample {
            eps: *eps,
            value: r.value,
            error: r.abs_error,
            status: r.status,
        });
    }
    let divergent = samples.iter().filter(|s| s.status == Status::Divergent).count();
    if divergent == samples.len() && divergent > 0 {
        return Ok(ResidueReport {
            sigma,
            ell,
            samples,
            classification: Classification::DivergesAllEps,
            residue_norm: None,
        });
    }
    if let Some(bad) = samples.iter().find(|s| s.status != Status::Converged) {
        return Err(Error::Quadrature(format!(
            "sample at eps = {} is {:?} while others are not",
            bad.eps, bad.status
        )));
    }
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.eps, s.value)).collect();
    let ex = extrapolate_to_zero(&pairs, cfg.extrapolation_tol)?;
    let quad_err = samples.iter().fold(0.0f64, |m, s| m.max(s.error));
    let scale = samples.iter().fold(0.0f64, |m, s| m.max(s.value.abs()));
    let norm = NormValue {
        value: ex.limit,
        error: ex.error + quad_err,
    };
    let classification = if ex.limit.abs() <= cfg.extrapolation_tol * scale || scale == 0.0 {
        Classification::VanishingLimit
    } else {
        Classification::FiniteResidueNorm
    };
    Ok(ResidueReport {
        sigma,
        ell,
        samples,
        classification,
        residue_norm: Some(norm),
    })
}

/// Residue norm at `eps = 0`; `None` when `R(eps)` diverges for every `eps`.
pub fn residue_norm(
    data: &ToricData,
    f: &MonomialSection,
    sigma: u32,
    g: Option<&BumpFunction>,
    cfg: &AnalysisConfig,
) -> Result<Option<NormValue>> {
    Ok(residue_report(&Integrand::toric(data, f, g), sigma, cfg.ell, cfg)?.residue_norm)
}

/// `R(eps) < inf` for every probe step size, decided from the integrals alone.
pub fn analytic_membership(data: &ToricData, a: &[u32], sigma: u32, cfg: &AnalysisConfig) -> Result<bool> {
    if sigma == 0 {
        return Err(Error::Domain(
            "index 0 has no residue function; decide it combinatorially".into(),
        ));
    }
    let f = MonomialSection::monomial(a.to_vec());
    let k = kernel_index(sigma, cfg)?;
    let opts = QuadOptions {
        tol: cfg.membership_tol,
        detect_tol: cfg.membership_tol,
        ..cfg.quad.clone()
    };
    for &eps in &cfg.membership_eps {
        let specs = Integrand::toric(data, &f, None).term_specs(k, eps, cfg.ell)?;
        for spec in &specs {
            match residue_integral(spec, &opts) {
                Err(Error::NotIntegrable { .. }) => return Ok(false),
                Err(e) => return Err(e),
                Ok(r) => match r.status {
                    Status::Converged => {}
                    Status::Divergent => return Ok(false),
                    Status::Inconclusive => {
                        return Err(Error::Quadrature(format!(
                            "membership of {a:?} at index {sigma}, eps = {eps} is inconclusive"
                        )))
                    }
                },
            }
        }
    }
    Ok(true)
}

/// Relevant coordinates where the rate of `z^a` vanishes.
pub fn polar_block(data: &ToricData, a: &[u32]) -> Vec<usize> {
    let rates = exact_rates(data, a);
    (0..data.n)
        .filter(|&j| rates[j].is_zero() && data.nu[j].is_positive())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LcMeasure {
    /// Extrapolated residue norm.
    pub extrapolated: NormValue,
    /// Restriction integral with the lc-measure density.
    pub restricted: NormValue,
    pub relative_gap: f64,
}

/// Density integral on the centres: for each term with polar block `Z`,
/// `|Z| = sigma`, the factor `1/((sigma-1)! prod_Z nu_j)` times the restriction
/// of the integrand to `{x_Z = 0}`.
pub fn restricted_lc_norm(
    data: &ToricData,
    f: &MonomialSection,
    g: Option<&BumpFunction>,
    sigma: u32,
    cfg: &AnalysisConfig,
) -> Result<NormValue> {
    let source = Integrand::toric(data, f, g);
    let specs = source.term_specs(sigma, 1.0, cfg.ell)?;
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for ((a, _), spec) in f.terms().zip(specs) {
        let block = polar_block(data, a);
        if block.len() < sigma as usize {
            continue;
        }
        let cut_off = |j: usize| {
            g.is_some_and(|g| matches!(g.factors[j], BumpFactor::Annulus { .. }))
        };
        let effective: Vec<usize> = block.iter().copied().filter(|&j| !cut_off(j)).collect();
        if effective.len() > sigma as usize {
            return Err(Error::Precondition(format!(
                "term {a:?} has {} polar directions at index {sigma}",
                effective.len()
            )));
        }
        if effective.len() < sigma as usize {
            continue;
        }
        let density: f64 = effective
            .iter()
            .map(|&j| 1.0 / spec.nu[j])
            .product::<f64>()
            / crate::quadrature::factorial(sigma as usize - 1);
        let mut s = spec.clone();
        s.prefactor *= density;
        let r = restriction_integral(&s, &effective, &cfg.quad)?;
        if !r.is_converged() {
            return Err(Error::Quadrature(format!("restriction of {a:?} did not converge")));
        }
        values.push(r.value);
        errors.push(r.abs_error);
    }
    Ok(NormValue {
        value: stable_sum(&values),
        error: stable_sum(&errors),
    })
}

/// `g -> R_{g|f|^2}(0)`, computed by extrapolation and by restriction; a
/// mismatch beyond `identity_tol` is an error.
pub fn lc_measure_norm(
    data: &ToricData,
    f: &MonomialSection,
    g: Option<&BumpFunction>,
    sigma: u32,
    cfg: &AnalysisConfig,
) -> Result<LcMeasure> {
    let report = residue_report(&Integrand::toric(data, f, g), sigma, cfg.ell, cfg)?;
    let extrapolated = report.residue_norm.ok_or_else(|| {
        Error::Precondition(format!("residue function of index {sigma} diverges"))
    })?;
    let restricted = restricted_lc_norm(data, f, g, sigma, cfg)?;
    let scale = extrapolated.value.abs().max(restricted.value.abs());
    let gap = (extrapolated.value - restricted.value).abs();
    let relative_gap = if scale == 0.0 { 0.0 } else { gap / scale };
    let slack = cfg.identity_tol * scale + extrapolated.error + restricted.error;
    if gap > slack.max(cfg.identity_tol * 1e-12) && scale > 0.0 {
        return Err(Error::CrossCheck(format!(
            "lc-measure by extrapolation {} vs restriction {} (relative gap {relative_gap:.3e})",
            extrapolated.value, restricted.value
        )));
    }
    Ok(LcMeasure {
        extrapolated,
        restricted,
        relative_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OhsawaNorm {
    pub value: f64,
    pub error: f64,
    pub shells: Vec<(f64, f64)>,
}

/// Centre of the test function, or the whole relevant set when `g` is absent.
fn test_centre(data: &ToricData, g: Option<&BumpFunction>) -> Vec<usize> {
    match g {
        Some(g) if !g.is_constant() => g.centre(),
        _ => data.relevant_set(),
    }
}

/// Limit of the shell integrals `int_{t < psi < t+1} |f|^2 g e^{-phi_L - m psi}`.
pub fn ohsawa_norm(
    data: &ToricData,
    f: &MonomialSection,
    g: Option<&BumpFunction>,
    choice: ExtensionChoice,
    cfg: &AnalysisConfig,
) -> Result<OhsawaNorm> {
    let log_weight = match (choice, &data.smooth_term) {
        (ExtensionChoice::ProofWeighted, Some(h)) => {
            // g-hat = g e^{h - h|_centre}: the total weight becomes e^{-h|_centre}
            let centre = test_centre(data, g);
            Some(h.sub(&h.restrict_zero(&centre)))
        }
        _ => None,
    };
    let source = Integrand::Toric {
        data: data.clone(),
        f: f.clone(),
        g: g.cloned(),
        log_weight,
    };
    let specs = source.term_specs(1, 1.0, cfg.ell)?;
    let mut shells = Vec::new();
    for &t in &cfg.shell_levels {
        let results = specs
            .iter()
            .map(|s| shell_integral(s, t, &cfg.quad))
            .collect::<Result<Vec<_>>>()?;
        let r = combine(results);
        if !r.is_converged() {
            return Err(Error::Quadrature(format!("shell at t = {t} did not converge")));
        }
        shells.push((t, r.value));
    }
    let (value, error) = match shells.as_slice() {
        [] => return Err(Error::InvalidData("no shell levels".into())),
        [only] => (only.1, f64::INFINITY),
        [.., a, b] => (b.1, (b.1 - a.1).abs()),
    };
    Ok(OhsawaNorm { value, error, shells })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub lc_norm: Option<NormValue>,
    pub ohsawa_norm: Option<NormValue>,
    pub ohsawa_weighted: Option<NormValue>,
    pub shells: Vec<(f64, f64)>,
    pub discrepancy: f64,
    pub extension_discrepancy: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// 1-lc-measure against the Ohsawa measure, and independence of the
/// Ohsawa limit from the extension of `g`. Never fails; errors land in the report.
pub fn verify_prop_1lc_equals_ohsawa(
    data: &ToricData,
    f: &MonomialSection,
    g: Option<&BumpFunction>,
    cfg: &AnalysisConfig,
) -> MeasureReport {
    let mut report = MeasureReport {
        lc_norm: None,
        ohsawa_norm: None,
        ohsawa_weighted: None,
        shells: vec![],
        discrepancy: f64::INFINITY,
        extension_discrepancy: f64::INFINITY,
        pass: false,
        failure: None,
    };
    let lc = lc_measure_norm(data, f, g, 1, cfg);
    let lift = ohsawa_norm(data, f, g, ExtensionChoice::ConstantLift, cfg);
    let weighted = ohsawa_norm(data, f, g, ExtensionChoice::ProofWeighted, cfg);
    let mut failures = Vec::new();
    match &lc {
        Ok(m) => report.lc_norm = Some(m.extrapolated),
        Err(e) => failures.push(format!("lc-measure: {e}")),
    }
    match &lift {
        Ok(o) => {
            report.ohsawa_norm = Some(NormValue {
                value: o.value,
                error: o.error,
            });
            report.shells = o.shells.clone();
        }
        Err(e) => failures.push(format!("ohsawa (constant lift): {e}")),
    }
    match &weighted {
        Ok(o) => {
            report.ohsawa_weighted = Some(NormValue {
                value: o.value,
                error: o.error,
            })
        }
        Err(e) => failures.push(format!("ohsawa (weighted): {e}")),
    }
    if let (Some(l), Some(o)) = (report.lc_norm, report.ohsawa_norm) {
        report.discrepancy = relative(l.value, o.value);
        if report.discrepancy > cfg.identity_tol {
            failures.push(format!(
                "lc {} vs ohsawa {}: relative discrepancy {:.3e}",
                l.value, o.value, report.discrepancy
            ));
        }
    }
    if let (Some(o), Some(w)) = (report.ohsawa_norm, report.ohsawa_weighted) {
        report.extension_discrepancy = relative(o.value, w.value);
        if report.extension_discrepancy > cfg.identity_tol {
            failures.push(format!(
                "extension choices disagree: {} vs {}",
                o.value, w.value
            ));
        }
    }
    report.pass = failures.is_empty();
    if !failures.is_empty() {
        report.failure = Some(failures.join("; "));
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeRow {
    /// Kernel index probed.
    pub s: u32,
    pub classification: Classification,
    pub residue_norm: Option<NormValue>,
    /// `(1/(sigma-1)!) int g|_{x_1 = .. = x_sigma = 0}` when `s = sigma`.
    pub expected: Option<f64>,
    pub samples: Vec<Sample>,
}

/// Classifies `eps -> R(eps)` of the real model for each kernel index `s`.
pub fn regime_classify(sigma: usize, g: &BumpFunction, s_values: &[u32], cfg: &AnalysisConfig) -> Result<Vec<RegimeRow>> {
    if sigma == 0 || sigma > g.factors.len() {
        return Err(Error::InvalidData(format!(
            "model index {sigma} must lie in 1..={}",
            g.factors.len()
        )));
    }
    let source = Integrand::Model { sigma, g: g.clone() };
    s_values
        .iter()
        .map(|&s| {
            let report = residue_report(&source, s, cfg.ell, cfg)?;
            let expected = if s as usize == sigma {
                let mut spec = source.term_specs(s, 1.0, cfg.ell)?.remove(0);
                spec.prefactor /= crate::quadrature::factorial(sigma - 1);
                let centre: Vec<usize> = (0..sigma).collect();
                Some(restriction_integral(&spec, &centre, &cfg.quad)?.value)
            } else {
                None
            };
            Ok(RegimeRow {
                s,
                classification: report.classification,
                residue_norm: report.residue_norm,
                expected,
                samples: report.samples,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllReport {
    pub norms: Vec<(f64, NormValue)>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Residue norms across `ells`; passes when they agree within `identity_tol`.
pub fn ell_independence(source: &Integrand, sigma: u32, ells: &[f64], cfg: &AnalysisConfig) -> Result<EllReport> {
    let mut norms = Vec::new();
    for &ell in ells {
        let report = residue_report(source, sigma, ell, cfg)?;
        let norm = report.residue_norm.ok_or_else(|| {
            Error::Precondition(format!("residue norm diverges at ell = {ell}"))
        })?;
        norms.push((ell, norm));
    }
    let mut max_deviation = 0.0f64;
    for (i, a) in norms.iter().enumerate() {
        for b in &norms[i + 1..] {
            let scale = a.1.value.abs().max(b.1.value.abs());
            let dev = if scale == 0.0 {
                (a.1.value - b.1.value).abs()
            } else {
                (a.1.value - b.1.value).abs() / scale
            };
            max_deviation = max_deviation.max(dev);
        }
    }
    Ok(EllReport {
        pass: max_deviation <= cfg.identity_tol,
        norms,
        max_deviation,
    })
}
