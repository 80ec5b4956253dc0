//! Extension of sections from lc centres by constant lift, with the local
//! L2 estimate checked on residue functions.

use std::collections::BTreeMap;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ideal_engine::{
    adjoint_ideal, combinatorial_membership, equality_set, jumping_numbers, lc_structure, JumpSchedule,
    LcStructure,
};
use crate::rational::{self, Q};
use crate::residue_analysis::{residue_report, AnalysisConfig, Integrand};
use crate::toric_model::{decompose_potential, MonomialSection, PotentialDecomposition, ToricData};

/// Step sizes of the estimate table; `0.0` stands for the extrapolated limit.
pub const ESTIMATE_EPS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub sigma: usize,
    /// 1-based coordinates of the centre.
    pub centre: Vec<usize>,
    /// `0` marks the extrapolated row `eps -> 0+`.
    pub eps: f64,
    /// `R_F(eps)`.
    pub lhs: f64,
    /// `2 e^C R_f(0)`.
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub sigma: usize,
    pub centre: Vec<usize>,
    /// The part of the input handled at this stage.
    pub input: MonomialSection,
    pub section: MonomialSection,
    pub bound_constant: f64,
    /// `R_f(0)` on the centre.
    pub centre_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtensionResult {
    pub input: MonomialSection,
    pub extension: MonomialSection,
    pub stages: Vec<Stage>,
    pub bound_constant: f64,
    pub estimate_table: Vec<EstimateRow>,
    pub congruence_ok: bool,
    pub estimates_ok: bool,
}

impl ExtensionResult {
    pub fn passed(&self) -> bool {
        self.congruence_ok && self.estimates_ok
    }
}

fn schedule(data: &ToricData) -> Result<JumpSchedule> {
    let jumps = jumping_numbers(data, &Q::zero(), &data.m);
    if !jumps.contains(&data.m) {
        return Err(Error::NotAJump(rational::format_q(&data.m)));
    }
    Ok(jumps)
}

fn one_based(centre: &[usize]) -> Vec<usize> {
    centre.iter().map(|j| j + 1).collect()
}

/// Pullback of `f` from the centre `{z_j = 0, j in centre}`, times the
/// canonical factor `prod_{j in centre} z_j^{s0_j}`.
///
/// `f` is written in all `n` coordinates with zero exponents along the centre.
pub fn constant_extension(data: &ToricData, f: &MonomialSection, centre: &[usize]) -> Result<MonomialSection> {
    let jumps = schedule(data)?;
    let decomp = decompose_potential(data, &jumps)?;
    let mut out = MonomialSection::zero();
    for (a, c) in f.terms() {
        if a.len() != data.n {
            return Err(Error::InvalidData(format!(
                "monomial {a:?} has {} exponents, expected {}",
                a.len(),
                data.n
            )));
        }
        let mut lifted = a.clone();
        for &j in centre {
            if !decomp.is_relevant(j) {
                return Err(Error::Precondition(format!("z{} = 0 is not a relevant divisor", j + 1)));
            }
            if a[j] != 0 {
                return Err(Error::InvalidData(format!(
                    "section on the centre depends on z{}",
                    j + 1
                )));
            }
            lifted[j] = decomp.s0[j];
        }
        if !combinatorial_membership(data, &lifted, centre.len()) {
            return Err(Error::Precondition(format!(
                "lift {lifted:?} is not in the adjoint ideal of index {}: the section does not vanish on deeper centres",
                centre.len()
            )));
        }
        out.add_term(lifted, *c);
    }
    Ok(out)
}

/// `C = max(0, max_T sup (bphi|_T - bphi))` over the `sigma`-centres `T`.
///
/// The diagonal part of `bphi` vanishes along every relevant divisor, so only
/// the smooth term contributes.
pub fn bphi_bound_constant(decomp: &PotentialDecomposition, centres: &LcStructure, sigma: usize) -> Result<f64> {
    let Some(h) = &decomp.bphi_smooth else {
        return Ok(0.0);
    };
    if h.is_zero() {
        return Ok(0.0);
    }
    if let Some(j) = decomp.relevant.iter().find(|&&j| !decomp.bphi_exponents[j].is_zero()) {
        return Err(Error::Precondition(format!(
            "centre z{} = 0 lies in the polar set of the weight",
            j + 1
        )));
    }
    let mut c = 0.0f64;
    for centre in centres.centres(sigma) {
        let sup = h.restrict_zero(&centre).sub(h).sup_on_unit_box(centres.n);
        if !sup.is_finite() {
            return Err(Error::Positivity(format!("unbounded weight difference on {centre:?}")));
        }
        c = c.max(sup);
    }
    Ok(c)
}

fn restrict_to_centre(f: &MonomialSection, centre: &[usize]) -> MonomialSection {
    let mut out = MonomialSection::zero();
    for (a, c) in f.terms() {
        let mut b = a.clone();
        for &j in centre {
            b[j] = 0;
        }
        out.add_term(b, *c);
    }
    out
}

struct StageOutcome {
    stage: Stage,
    rows: Vec<EstimateRow>,
}

fn extend_on_centre(
    data: &ToricData,
    f: &MonomialSection,
    centre: &[usize],
    c_bound: f64,
    cfg: &AnalysisConfig,
) -> Result<StageOutcome> {
    let sigma = centre.len();
    let lift = constant_extension(data, &restrict_to_centre(f, centre), centre)?;
    // R_f(0): residue norm with the weight frozen on the centre
    let frozen = data.smooth_term.as_ref().map(|h| h.sub(&h.restrict_zero(centre)));
    let on_centre = Integrand::Toric {
        data: data.clone(),
        f: lift.clone(),
        g: None,
        log_weight: frozen,
    };
    let norm = residue_report(&on_centre, sigma as u32, cfg.ell, cfg)?
        .residue_norm
        .ok_or_else(|| Error::Precondition(format!("residue norm on {:?} diverges", one_based(centre))))?;
    let rhs = 2.0 * c_bound.exp() * norm.value;
    let full = Integrand::toric(data, &lift, None);
    let report = residue_report(&full, sigma as u32, cfg.ell, cfg)?;
    let limit = report
        .residue_norm
        .ok_or_else(|| Error::Precondition(format!("R_F diverges at index {sigma}")))?;
    let rows: Vec<EstimateRow> = ESTIMATE_EPS
        .par_iter()
        .map(|&eps| {
            let lhs = if eps == 0.0 {
                limit.value
            } else {
                report
                    .samples
                    .iter()
                    .find(|s| s.eps == eps)
                    .map(|s| Ok(s.value))
                    .unwrap_or_else(|| {
                        let specs = full.term_specs(sigma as u32, eps, cfg.ell)?;
                        let mut total = 0.0;
                        for s in &specs {
                            let r = crate::quadrature::residue_integral(s, &cfg.quad)?;
                            if !r.is_converged() {
                                return Err(Error::Quadrature(format!("R_F({eps}) did not converge")));
                            }
                            total += r.value;
                        }
                        Ok(total)
                    })?
            };
            Ok(EstimateRow {
                sigma,
                centre: one_based(centre),
                eps,
                lhs,
                rhs,
                ok: lhs <= rhs * (1.0 + cfg.identity_tol),
            })
        })
        .collect::<Result<_>>()?;
    Ok(StageOutcome {
        stage: Stage {
            sigma,
            centre: one_based(centre),
            input: f.clone(),
            section: lift,
            bound_constant: c_bound,
            centre_norm: norm.value,
        },
        rows,
    })
}

fn congruent(data: &ToricData, jumps: &JumpSchedule, diff: &MonomialSection, sigma: usize) -> Result<bool> {
    let ideal = adjoint_ideal(data, jumps, sigma)?;
    Ok(diff.terms().all(|(a, _)| ideal.contains(a)))
}

/// Extends a class of `A_sigma / A_{sigma-1}` given by monomials whose equality
/// sets all have size `sigma`, and checks `R_F(eps) <= 2 e^C R_f(0)`.
pub fn extend_with_estimate(data: &ToricData, f: &MonomialSection, sigma: usize, cfg: &AnalysisConfig) -> Result<ExtensionResult> {
    if sigma == 0 {
        return Err(Error::Domain("extension needs sigma >= 1".into()));
    }
    let jumps = schedule(data)?;
    let lc = lc_structure(data)?;
    let decomp = decompose_potential(data, &jumps)?;
    let c_bound = bphi_bound_constant(&decomp, &lc, sigma)?;
    let mut groups: BTreeMap<Vec<usize>, MonomialSection> = BTreeMap::new();
    for (a, c) in f.terms() {
        if a.len() != data.n {
            return Err(Error::InvalidData(format!("monomial {a:?} has wrong length")));
        }
        let eq = equality_set(data, a);
        if eq.len() != sigma || !combinatorial_membership(data, a, sigma) {
            return Err(Error::Precondition(format!(
                "term {a:?} does not represent a class of index {sigma} (equality set of size {})",
                eq.len()
            )));
        }
        groups.entry(eq).or_insert_with(MonomialSection::zero).add_term(a.clone(), *c);
    }
    let mut stages = Vec::new();
    let mut rows = Vec::new();
    let mut extension = MonomialSection::zero();
    for (centre, part) in &groups {
        let out = extend_on_centre(data, part, centre, c_bound, cfg)?;
        extension = extension.add(&out.stage.section);
        stages.push(out.stage);
        rows.extend(out.rows);
    }
    let congruence_ok = congruent(data, &jumps, &extension.sub(f), sigma - 1)?;
    Ok(ExtensionResult {
        input: f.clone(),
        extension,
        stages,
        bound_constant: c_bound,
        estimates_ok: rows.iter().all(|r| r.ok),
        estimate_table: rows,
        congruence_ok,
    })
}

/// Peels `f in A_{sigma_mlc}` through the filtration from the top index down,
/// extending each graded piece; the sum is congruent to `f` modulo `A_0`.
pub fn iterated_extension(data: &ToricData, f: &MonomialSection, cfg: &AnalysisConfig) -> Result<ExtensionResult> {
    let jumps = schedule(data)?;
    let lc = lc_structure(data)?;
    for (a, _) in f.terms() {
        if a.len() != data.n || !combinatorial_membership(data, a, lc.sigma_mlc) {
            return Err(Error::Precondition(format!(
                "term {a:?} is outside I(phi_L + m_(k-1) psi)"
            )));
        }
    }
    let mut stages = Vec::new();
    let mut rows = Vec::new();
    let mut extension = MonomialSection::zero();
    let mut bound_constant = 0.0f64;
    let mut residual = f.clone();
    for sigma in (1..=lc.sigma_mlc).rev() {
        let part = residual.filter(|a| equality_set(data, a).len() == sigma);
        if part.is_empty() {
            continue;
        }
        let stage = extend_with_estimate(data, &part, sigma, cfg)
            .map_err(|e| Error::Precondition(format!("stage {sigma}: {e}")))?;
        residual = residual.sub(&stage.extension);
        extension = extension.add(&stage.extension);
        bound_constant = bound_constant.max(stage.bound_constant);
        stages.extend(stage.stages);
        rows.extend(stage.estimate_table);
    }
    let congruence_ok = congruent(data, &jumps, &extension.sub(f), 0)?;
    Ok(ExtensionResult {
        input: f.clone(),
        extension,
        stages,
        bound_constant,
        estimates_ok: rows.iter().all(|r| r.ok),
        estimate_table: rows,
        congruence_ok,
    })
}
