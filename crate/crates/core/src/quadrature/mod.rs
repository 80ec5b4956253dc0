//! Singular integrals over the log coordinates `t_j = -ln |z_j|^2`.
//!
//! After exact angular integration every integral in the crate has the form
//! `prefactor * int_{t >= 0} prod_j exp(-beta_j t_j) * H(x) * w(<nu, t>) dt`
//! with `x_j = exp(-t_j)`, a bounded nonnegative factor `H` and a weight `w`
//! that is either the log-pole kernel (residue integrals), the indicator of a
//! unit slab (shell integrals) or a point mass on a centre (restrictions).

mod extrapolate;
mod gk;
mod layout;
mod montecarlo;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::toric_model::{BumpFunction, SmoothTerm};

pub use extrapolate::{extrapolate_to_zero, Extrapolation};
pub use gk::{integrate, stable_sum, Estimate, Rule, Tolerance, GK15, GK21};
pub use layout::{factorial, max_numeric_dims};

use layout::{Layout, Problem, Weight};

/// Bounded nonnegative factor `scale * bump(x) * exp(log_weight(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothFactor {
    pub scale: f64,
    pub bump: Option<BumpFunction>,
    pub log_weight: Option<SmoothTerm>,
}

impl SmoothFactor {
    pub fn one() -> Self {
        SmoothFactor {
            scale: 1.0,
            bump: None,
            log_weight: None,
        }
    }

    pub fn constant(scale: f64) -> Self {
        SmoothFactor {
            scale,
            ..Self::one()
        }
    }

    pub fn with_bump(mut self, bump: BumpFunction) -> Self {
        self.bump = if bump.is_constant() { None } else { Some(bump) };
        self
    }

    /// Multiplies by `exp(h(x))`.
    pub fn with_log_weight(mut self, h: SmoothTerm) -> Self {
        self.log_weight = match self.log_weight.take() {
            None => Some(h),
            Some(prev) => Some(prev.sub(&SmoothTerm::default().sub(&h))),
        }
        .filter(|p| !p.is_zero());
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let b = self.bump.as_ref().map_or(1.0, |g| g.eval(x));
        if b == 0.0 {
            return 0.0;
        }
        self.scale * b * self.log_weight.as_ref().map_or(1.0, |h| h.eval(x).exp())
    }

    /// Upper bound of the log weight on `[0,1]^n`.
    pub fn log_weight_bound(&self) -> f64 {
        self.log_weight
            .as_ref()
            .map_or(0.0, |h| crate::rational::to_f64(&h.coefficient_bound()))
    }

    pub fn is_constant(&self) -> bool {
        self.bump.is_none() && self.log_weight.is_none()
    }

    pub(crate) fn bump_depends_on(&self, j: usize) -> bool {
        self.bump.as_ref().is_some_and(|g| !g.factors[j].is_trivial())
    }

    pub(crate) fn log_depends_on(&self, j: usize) -> bool {
        self.log_weight.as_ref().is_some_and(|h| h.depends_on(j))
    }

    pub fn depends_on(&self, j: usize) -> bool {
        self.bump_depends_on(j) || self.log_depends_on(j)
    }
}

/// Data of one residue, shell or restriction integral.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralSpec {
    pub beta: Vec<f64>,
    pub nu: Vec<f64>,
    pub sigma: u32,
    pub eps: f64,
    pub ell: f64,
    pub smooth: SmoothFactor,
    pub prefactor: f64,
}

impl IntegralSpec {
    pub fn n(&self) -> usize {
        self.beta.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.beta.len();
        if self.nu.len() != n {
            return Err(Error::InvalidData("beta and nu lengths differ".into()));
        }
        if let Some(g) = &self.smooth.bump {
            if g.factors.len() != n {
                return Err(Error::InvalidData("bump dimension mismatch".into()));
            }
        }
        if !(self.prefactor >= 0.0 && self.prefactor.is_finite()) {
            return Err(Error::InvalidData(format!("prefactor {}", self.prefactor)));
        }
        if self.smooth.scale < 0.0 {
            return Err(Error::InvalidData("negative smooth scale".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Auto,
    Deterministic,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub status: Status,
    /// Partial sums over growing radial regions (divergence evidence).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<f64>,
    pub engine: Engine,
}

impl QuadResult {
    fn zero(engine: Engine) -> Self {
        QuadResult {
            value: 0.0,
            abs_error: 0.0,
            status: Status::Converged,
            evidence: vec![],
            engine,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadOptions {
    /// Relative tolerance of deterministic integration.
    pub tol: f64,
    /// Relative standard-error target of the Monte Carlo engine.
    pub mc_tol: f64,
    pub engine: Engine,
    pub seed: u64,
    /// Run the radial divergence detector before integrating.
    pub detect: bool,
    /// Relative tolerance of each detector shell.
    pub detect_tol: f64,
    pub max_shells: usize,
    /// Monte Carlo batches (of 2^16 samples) before giving up on `mc_tol`.
    pub mc_max_batches: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            tol: 1e-8,
            mc_tol: 1e-3,
            engine: Engine::Auto,
            seed: 0x5EED_1C0DE,
            detect: true,
            detect_tol: 1e-4,
            max_shells: 24,
            mc_max_batches: 64,
        }
    }
}

/// First radial region is `r <= SHELL_T0 * (1 + <nu_D, t_D>)`; each next one doubles.
pub const SHELL_T0: f64 = 8.0;
/// Consecutive non-decaying shells needed to call divergence.
pub const SHELL_STREAK: usize = 4;
/// Growth of the partial sums over the first region needed to call divergence.
pub const SHELL_GROWTH: f64 = 1e3;

fn choose_engine(layout: &Layout, opts: &QuadOptions) -> Engine {
    match opts.engine {
        Engine::Auto if layout.numeric_dims() <= 3 => Engine::Deterministic,
        Engine::Auto => Engine::MonteCarlo,
        e => e,
    }
}

fn evaluate(problem: &Problem, engine: Engine, tol: f64, opts: &QuadOptions) -> Result<(f64, f64, bool)> {
    match engine {
        Engine::MonteCarlo => montecarlo::evaluate(problem, opts, tol.max(opts.mc_tol)),
        _ => Ok(problem.deterministic(tol)),
    }
}

/// `eps * prefactor * int prod exp(-beta t) H / (|psi|^sigma (ln(ell |psi|))^{1+eps}) dt`
/// with `|psi| = 1 + <nu, t>`.
pub fn residue_integral(spec: &IntegralSpec, opts: &QuadOptions) -> Result<QuadResult> {
    spec.validate()?;
    if !(spec.eps > 0.0) {
        return Err(Error::Domain(format!("eps = {} must be positive", spec.eps)));
    }
    if !(spec.ell >= std::f64::consts::E * (1.0 - 1e-15)) {
        return Err(Error::Domain(format!("ell = {} must be at least e", spec.ell)));
    }
    let layout = Layout::new(spec, false)?;
    let engine = choose_engine(&layout, opts);
    if layout.vanishes || spec.prefactor == 0.0 {
        return Ok(QuadResult::zero(engine));
    }
    let scale = spec.prefactor * layout.factored;
    let mut evidence = vec![];
    if opts.detect && layout.radial_len() > 0 {
        let detection = detect_divergence(spec, &layout, engine, opts)?;
        evidence = detection.partial_sums.iter().map(|s| s * scale).collect();
        match detection.verdict {
            Status::Converged => {}
            status => {
                return Ok(QuadResult {
                    value: f64::INFINITY,
                    abs_error: f64::INFINITY,
                    status,
                    evidence,
                    engine,
                })
            }
        }
    }
    let problem = Problem::new(spec, &layout, Weight::Kernel { t_lo: 0.0, t_hi: f64::INFINITY });
    let (v, e, ok) = evaluate(&problem, engine, opts.tol, opts)?;
    Ok(QuadResult {
        value: v * scale,
        abs_error: e * scale,
        status: if ok { Status::Converged } else { Status::Inconclusive },
        evidence,
        engine,
    })
}

struct Detection {
    verdict: Status,
    partial_sums: Vec<f64>,
}

/// Partial sums over `r <= T_i (1 + s_D)`, `T_i = T0 2^i`, computed shell by shell.
fn detect_divergence(
    spec: &IntegralSpec,
    layout: &Layout,
    engine: Engine,
    opts: &QuadOptions,
) -> Result<Detection> {
    let mut sums: Vec<f64> = Vec::new();
    let mut shells: Vec<f64> = Vec::new();
    let mut prev_t = 0.0;
    let mut up_streak = 0usize;
    let mut down_streak = 0usize;
    for i in 0..opts.max_shells {
        let t_hi = SHELL_T0 * 2f64.powi(i as i32);
        let problem = Problem::new(spec, layout, Weight::Kernel { t_lo: prev_t, t_hi });
        let (d, _, _) = evaluate(&problem, engine, opts.detect_tol, opts)?;
        prev_t = t_hi;
        let total = sums.last().copied().unwrap_or(0.0) + d;
        sums.push(total);
        if let Some(&last) = shells.last() {
            if d >= last && d > 0.0 {
                up_streak += 1;
                down_streak = 0;
            } else {
                up_streak = 0;
                down_streak += 1;
            }
        }
        shells.push(d);
        if up_streak >= SHELL_STREAK && total >= SHELL_GROWTH * sums[0] {
            return Ok(Detection {
                verdict: Status::Divergent,
                partial_sums: sums,
            });
        }
        if total == 0.0 && i >= SHELL_STREAK {
            break;
        }
        if down_streak >= SHELL_STREAK && i >= 2 * SHELL_STREAK - 2 {
            break;
        }
    }
    let verdict = if up_streak >= SHELL_STREAK {
        Status::Inconclusive
    } else {
        Status::Converged
    };
    Ok(Detection {
        verdict,
        partial_sums: sums,
    })
}

/// `prefactor * int_{t_level < psi < t_level + 1} prod exp(-beta t) H dt`.
pub fn shell_integral(spec: &IntegralSpec, t_level: f64, opts: &QuadOptions) -> Result<QuadResult> {
    spec.validate()?;
    if !(t_level <= -2.0) {
        return Err(Error::Domain(format!("t_level = {t_level} must be at most -2")));
    }
    let layout = Layout::new(spec, true)?;
    let engine = choose_engine(&layout, opts);
    if layout.vanishes || spec.prefactor == 0.0 || layout.radial_len() == 0 {
        // no coordinate moves psi: the slab misses the domain
        return Ok(QuadResult::zero(engine));
    }
    let lower = -t_level - 2.0;
    let problem = Problem::new(spec, &layout, Weight::Slab { lower });
    let (v, e, ok) = evaluate(&problem, engine, opts.tol, opts)?;
    let scale = spec.prefactor * layout.factored;
    Ok(QuadResult {
        value: v * scale,
        abs_error: e * scale,
        status: if ok { Status::Converged } else { Status::Inconclusive },
        evidence: vec![],
        engine,
    })
}

/// `prefactor * int prod_{j not in centre} exp(-beta_j t_j) H(x)|_{x_centre = 0} dt`.
///
/// Coordinates of the centre are fixed at `x_j = 0`; their `beta`, `nu` are ignored.
pub fn restriction_integral(spec: &IntegralSpec, centre: &[usize], opts: &QuadOptions) -> Result<QuadResult> {
    spec.validate()?;
    let layout = Layout::restriction(spec, centre)?;
    if layout.vanishes || spec.prefactor == 0.0 {
        return Ok(QuadResult::zero(Engine::Deterministic));
    }
    let problem = Problem::new(spec, &layout, Weight::Point);
    let (v, e, ok) = problem.deterministic(opts.tol);
    let scale = spec.prefactor * layout.factored;
    Ok(QuadResult {
        value: v * scale,
        abs_error: e * scale,
        status: if ok { Status::Converged } else { Status::Inconclusive },
        evidence: vec![],
        engine: Engine::Deterministic,
    })
}

#[cfg(test)]
mod tests;
