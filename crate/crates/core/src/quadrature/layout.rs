//! Coordinate bookkeeping and the deterministic nested integrator.
//!
//! Coordinates split into
//! * the radial block: `beta_j = 0`, `nu_j > 0`, integrated through the
//!   radius `r = sum nu_j t_j` and a point `w` of the standard simplex;
//! * outer coordinates: decaying (`beta_j > 0`, cut at `T_CUT / beta_j`) or
//!   bounded by an annular bump factor;
//! * factored coordinates: outer ones with `nu_j = 0` on which `H` depends
//!   only through its own bump factor, integrated once in one dimension.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::toric_model::BumpFactor;

use super::gk::{integrate, Tolerance, GK21};
use super::IntegralSpec;

/// `exp(-T_CUT)` is below double precision relative to the retained mass.
pub const T_CUT: f64 = 37.0;
const MAX_X: usize = 8;

/// Largest number of nested numeric dimensions handled deterministically.
pub fn max_numeric_dims() -> usize {
    3
}

#[derive(Clone, Debug)]
pub(crate) struct OuterCoord {
    pub j: usize,
    pub beta: f64,
    pub nu: f64,
    pub upper: f64,
    pub knots: Vec<f64>,
    pub bounded: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct RadialCoord {
    pub j: usize,
    pub beta: f64,
    pub nu: f64,
    pub knots: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub n: usize,
    pub radial: Vec<RadialCoord>,
    pub outer: Vec<OuterCoord>,
    /// Product of the one-dimensional integrals over factored coordinates.
    pub factored: f64,
    /// Coordinates whose bump factor enters `H` pointwise.
    pub active: Vec<bool>,
    /// Coordinates pinned at `x_j = 0`.
    pub pinned: Vec<usize>,
    /// `H` or the weight varies along the radial block.
    pub radial_depends: bool,
    /// Some factored integral vanishes identically.
    pub vanishes: bool,
}

fn knots_in_t(f: &BumpFactor) -> Vec<f64> {
    f.knots()
        .into_iter()
        .filter(|&k| k > 0.0 && k < 1.0)
        .map(|k| -k.ln())
        .collect()
}

fn annulus_cut(f: &BumpFactor) -> Option<f64> {
    match *f {
        BumpFactor::Annulus { margin, .. } => Some(-2.0 * margin.ln()),
        _ => None,
    }
}

impl Layout {
    fn empty(n: usize) -> Self {
        Layout {
            n,
            radial: vec![],
            outer: vec![],
            factored: 1.0,
            active: vec![true; n],
            pinned: vec![],
            radial_depends: false,
            vanishes: false,
        }
    }

    /// Layout of a residue (`shell = false`) or shell integral.
    pub fn new(spec: &IntegralSpec, shell: bool) -> Result<Self> {
        let n = spec.n();
        if n > MAX_X {
            return Err(Error::InvalidData(format!("dimension {n} exceeds {MAX_X}")));
        }
        let mut layout = Layout::empty(n);
        for j in 0..n {
            let (beta, nu) = (spec.beta[j], spec.nu[j]);
            if !(beta >= 0.0) {
                return Err(Error::NotIntegrable {
                    coord: j,
                    reason: format!("exponential rate {beta} is negative"),
                });
            }
            let factor = spec.smooth.bump.as_ref().map(|g| g.factors[j].clone());
            let cut = factor.as_ref().and_then(annulus_cut);
            if beta == 0.0 && nu > 0.0 && cut.is_none() {
                layout.radial.push(RadialCoord {
                    j,
                    beta,
                    nu,
                    knots: factor.as_ref().map(knots_in_t).unwrap_or_default(),
                });
                continue;
            }
            if beta == 0.0 && cut.is_none() {
                return Err(Error::NotIntegrable {
                    coord: j,
                    reason: "no decay and psi does not depend on this coordinate".into(),
                });
            }
            layout.push_outer(spec, j, nu, factor.as_ref(), cut, nu == 0.0)?;
        }
        if shell && layout.radial.is_empty() {
            // borrow the slowest-decaying outer coordinate that moves psi
            let pick = layout
                .outer
                .iter()
                .enumerate()
                .filter(|(_, o)| o.nu > 0.0 && !o.bounded)
                .min_by(|a, b| (a.1.beta / a.1.nu).total_cmp(&(b.1.beta / b.1.nu)))
                .map(|(i, _)| i);
            if let Some(i) = pick {
                let o = layout.outer.remove(i);
                layout.radial.push(RadialCoord {
                    j: o.j,
                    beta: o.beta,
                    nu: o.nu,
                    knots: o.knots,
                });
            }
        }
        layout.radial_depends = layout
            .radial
            .iter()
            .any(|c| c.beta > 0.0 || spec.smooth.depends_on(c.j));
        Ok(layout)
    }

    /// Layout of an integral over the coordinate subspace `{x_j = 0 : j in centre}`.
    pub fn restriction(spec: &IntegralSpec, centre: &[usize]) -> Result<Self> {
        let n = spec.n();
        if centre.iter().any(|&j| j >= n) {
            return Err(Error::InvalidData("centre coordinate out of range".into()));
        }
        let mut layout = Layout::empty(n);
        layout.pinned = centre.to_vec();
        for j in 0..n {
            if centre.contains(&j) {
                continue;
            }
            let beta = spec.beta[j];
            let factor = spec.smooth.bump.as_ref().map(|g| g.factors[j].clone());
            let cut = factor.as_ref().and_then(annulus_cut);
            if !(beta > 0.0 || (beta == 0.0 && cut.is_some())) {
                return Err(Error::NotIntegrable {
                    coord: j,
                    reason: format!("restricted integrand does not decay (rate {beta})"),
                });
            }
            layout.push_outer(spec, j, 0.0, factor.as_ref(), cut, true)?;
        }
        Ok(layout)
    }

    fn push_outer(
        &mut self,
        spec: &IntegralSpec,
        j: usize,
        nu: f64,
        factor: Option<&BumpFactor>,
        cut: Option<f64>,
        may_factor: bool,
    ) -> Result<()> {
        let beta = spec.beta[j];
        let decay_cut = if beta > 0.0 { T_CUT / beta } else { f64::INFINITY };
        let upper = cut.map_or(decay_cut, |c| c.min(decay_cut));
        let knots = factor.map(knots_in_t).unwrap_or_default();
        if may_factor && !spec.smooth.log_depends_on(j) {
            let value = match factor {
                Some(f) if !f.is_trivial() => {
                    let est = integrate(
                        &GK21,
                        |t: f64| (-beta * t).exp() * f.eval((-t).exp()),
                        0.0,
                        upper,
                        &knots,
                        Tolerance::rel(1e-13).with_abs(1e-300),
                    );
                    if !est.converged {
                        return Err(Error::Quadrature(format!(
                            "factored coordinate {j}: error {}",
                            est.error
                        )));
                    }
                    est.value
                }
                _ if cut.is_some() && beta > 0.0 => -(-beta * upper).exp_m1() / beta,
                _ if cut.is_some() => upper,
                _ => 1.0 / beta,
            };
            self.factored *= value;
            self.active[j] = false;
            if value == 0.0 {
                self.vanishes = true;
            }
            return Ok(());
        }
        self.outer.push(OuterCoord {
            j,
            beta,
            nu,
            upper,
            knots,
            bounded: cut.is_some(),
        });
        Ok(())
    }

    pub fn radial_len(&self) -> usize {
        self.radial.len()
    }

    pub fn numeric_dims(&self) -> usize {
        let p = self.radial.len();
        let simplex = if self.radial_depends && p >= 2 { p - 1 } else { 0 };
        self.outer.len() + usize::from(p > 0) + simplex
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Weight {
    /// Log-pole kernel restricted to radial region `T_lo (1+s) < r <= T_hi (1+s)`.
    Kernel { t_lo: f64, t_hi: f64 },
    /// Indicator of `lower < <nu, t> <= lower + 1`.
    Slab { lower: f64 },
    /// No radial integration; pinned coordinates sit at `x = 0`.
    Point,
}

pub(crate) struct Problem<'a> {
    pub spec: &'a IntegralSpec,
    pub layout: &'a Layout,
    pub weight: Weight,
    pub p: usize,
    pub inv_nu_prod: f64,
    pub simplex_volume: f64,
    /// Absolute error accepted from nested radial and simplex integrals.
    pub abs_floor: f64,
}

/// Relative size, against the bound on `H`, of nested-integral errors that are ignored.
const NESTED_ABS: f64 = 1e-15;

/// Values at one point of the outer coordinates.
pub(crate) struct OuterPoint {
    pub x: [f64; MAX_X],
    pub s: f64,
    pub decay: f64,
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl<'a> Problem<'a> {
    pub fn new(spec: &'a IntegralSpec, layout: &'a Layout, weight: Weight) -> Self {
        let p = layout.radial.len();
        Problem {
            spec,
            layout,
            weight,
            p,
            inv_nu_prod: layout.radial.iter().map(|c| 1.0 / c.nu).product(),
            simplex_volume: if p == 0 { 1.0 } else { 1.0 / factorial(p - 1) },
            abs_floor: NESTED_ABS * spec.smooth.scale.abs() * spec.smooth.log_weight_bound().exp(),
        }
    }

    pub fn outer_point(&self, t: &[f64]) -> OuterPoint {
        let mut x = [1.0; MAX_X];
        for &j in &self.layout.pinned {
            x[j] = 0.0;
        }
        for (j, a) in self.layout.active.iter().enumerate() {
            if !a {
                x[j] = 0.0;
            }
        }
        let mut s = 0.0;
        let mut rate = 0.0;
        for (c, &tj) in self.layout.outer.iter().zip(t) {
            x[c.j] = (-tj).exp();
            s += c.nu * tj;
            rate += c.beta * tj;
        }
        OuterPoint {
            x,
            s,
            decay: (-rate).exp(),
        }
    }

    /// `H` with inactive coordinates' bump factors dropped.
    pub fn h(&self, x: &[f64]) -> f64 {
        let smooth = &self.spec.smooth;
        let b = match &smooth.bump {
            None => 1.0,
            Some(g) => g
                .factors
                .iter()
                .zip(x)
                .zip(&self.layout.active)
                .filter(|(_, &a)| a)
                .map(|((f, &xj), _)| f.eval(xj))
                .product(),
        };
        if b == 0.0 {
            return 0.0;
        }
        smooth.scale * b * smooth.log_weight.as_ref().map_or(1.0, |h| h.eval(x).exp())
    }

    /// Range of the radial variable: `y` in [0,1) for kernels, `r` for slabs.
    pub fn radial_range(&self, s: f64) -> (f64, f64) {
        match self.weight {
            Weight::Kernel { t_lo, t_hi } => {
                let w0 = self.spec.ell.ln() + s.ln_1p();
                let y = |t: f64| {
                    if t == 0.0 {
                        0.0
                    } else if t.is_infinite() {
                        1.0
                    } else {
                        -(self.spec.eps * (w0 / (w0 + t.ln_1p())).ln()).exp_m1()
                    }
                };
                (y(t_lo), y(t_hi))
            }
            Weight::Slab { lower } => ((lower - s).max(0.0), (lower + 1.0 - s).max(0.0)),
            Weight::Point => (0.0, 0.0),
        }
    }

    /// Weight of the radial variable `u` and the corresponding radius `r`.
    pub fn radial_factor(&self, s: f64, u: f64) -> (f64, f64) {
        match self.weight {
            Weight::Kernel { .. } => {
                let eps = self.spec.eps;
                let lv0 = s.ln_1p();
                let w0 = self.spec.ell.ln() + lv0;
                let q0 = (-eps * w0.ln()).exp();
                let tau = -(-u).ln_1p() / eps;
                let z = if tau > 700.0 { f64::INFINITY } else { w0 * tau.exp_m1() };
                let r_over_v = -(-z).exp_m1();
                let mut f = q0 * r_over_v.powi(self.p as i32 - 1);
                let excess = self.p as i32 - self.spec.sigma as i32;
                if excess != 0 {
                    f *= (excess as f64 * (lv0 + z)).exp();
                }
                let r = if z.is_infinite() { f64::INFINITY } else { (1.0 + s) * z.exp_m1() };
                (f, r)
            }
            Weight::Slab { .. } => (u.powi(self.p as i32 - 1), u),
            Weight::Point => (1.0, 0.0),
        }
    }

    /// Radii where the radial integrand loses smoothness: sums of knots
    /// `nu_j t_j` over distinct radial coordinates.
    fn kink_radii(&self) -> Vec<f64> {
        let mut sums = vec![0.0];
        for c in &self.layout.radial {
            let mut next = sums.clone();
            for s in &sums {
                for t in &c.knots {
                    next.push(s + t * c.nu);
                }
            }
            next.sort_by(f64::total_cmp);
            next.dedup();
            next.truncate(64);
            sums = next;
        }
        sums.retain(|r| *r > 0.0);
        sums
    }

    /// Inverse of `radial_factor` in its radius.
    fn radial_coordinate(&self, s: f64, r: f64) -> Option<f64> {
        match self.weight {
            Weight::Kernel { .. } => {
                let w0 = self.spec.ell.ln() + s.ln_1p();
                let z = (r / (1.0 + s)).ln_1p();
                Some(-(self.spec.eps * (w0 / (w0 + z)).ln()).exp_m1())
            }
            Weight::Slab { .. } => Some(r),
            Weight::Point => None,
        }
    }

    /// `eps K(1 + s)` for a kernel integral without radial block.
    fn kernel_at(&self, s: f64) -> f64 {
        let v = 1.0 + s;
        let w = (self.spec.ell * v).ln();
        self.spec.eps * v.powi(-(self.spec.sigma as i32)) * w.powf(-1.0 - self.spec.eps)
    }

    /// `H * exp(-sum beta t)` along the radial block at radius `r`, direction `w`.
    pub fn radial_h(&self, pt: &OuterPoint, r: f64, w: &[f64]) -> f64 {
        let mut x = pt.x;
        let mut rate = 0.0;
        for (c, &wj) in self.layout.radial.iter().zip(w) {
            let t = if wj <= 0.0 { 0.0 } else { r * wj / c.nu };
            x[c.j] = (-t).exp();
            if c.beta > 0.0 {
                rate += c.beta * t;
            }
        }
        let decay = if rate == 0.0 { 1.0 } else { (-rate).exp() };
        if decay == 0.0 {
            return 0.0;
        }
        decay * self.h(&x[..self.layout.n])
    }

    /// Simplex average of `radial_h` at radius `r`, including the simplex volume.
    fn phi(&self, pt: &OuterPoint, r: f64, tol: f64, ok: &Cell<bool>) -> f64 {
        if !self.layout.radial_depends {
            unreachable!("phi is only called for radially varying integrands");
        }
        if self.p == 1 {
            return self.radial_h(pt, r, &[1.0]);
        }
        let mut w = [0.0; MAX_X];
        self.simplex_level(pt, r, 0, 1.0, &mut w, tol, ok)
    }

    #[allow(clippy::too_many_arguments)]
    fn simplex_level(
        &self,
        pt: &OuterPoint,
        r: f64,
        level: usize,
        remaining: f64,
        w: &mut [f64; MAX_X],
        tol: f64,
        ok: &Cell<bool>,
    ) -> f64 {
        let last = self.p - 1;
        if level == last {
            w[last] = remaining.max(0.0);
            return self.radial_h(pt, r, &w[..self.p]);
        }
        let mut breaks = Vec::new();
        if r.is_finite() && r > 0.0 {
            for t in &self.layout.radial[level].knots {
                breaks.push(t * self.layout.radial[level].nu / r);
            }
            if level + 1 == last {
                for t in &self.layout.radial[last].knots {
                    breaks.push(remaining - t * self.layout.radial[last].nu / r);
                }
            }
        }
        let mut local = *w;
        let est = integrate(
            &GK21,
            |wl: f64| {
                local[level] = wl;
                self.simplex_level(pt, r, level + 1, remaining - wl, &mut local, tol, ok)
            },
            0.0,
            remaining,
            &breaks,
            Tolerance::rel(tol).with_abs(self.abs_floor).with_limit(400),
        );
        if !est.converged {
            ok.set(false);
        }
        est.value
    }

    /// Integral over the radial block (and simplex) at fixed outer point,
    /// without the outer decay factor and `1/prod nu`.
    pub fn inner(&self, pt: &OuterPoint, tol: f64, ok: &Cell<bool>) -> f64 {
        match self.weight {
            Weight::Point => self.h(&pt.x[..self.layout.n]),
            Weight::Kernel { .. } if self.p == 0 => {
                self.kernel_at(pt.s) * self.h(&pt.x[..self.layout.n])
            }
            _ => {
                let (a, b) = self.radial_range(pt.s);
                if !(b > a) {
                    return 0.0;
                }
                let constant_h = if self.layout.radial_depends {
                    None
                } else {
                    let h = self.h(&pt.x[..self.layout.n]);
                    if h == 0.0 {
                        return 0.0;
                    }
                    Some(h * self.simplex_volume)
                };
                let breaks: Vec<f64> = self
                    .kink_radii()
                    .into_iter()
                    .filter_map(|r| self.radial_coordinate(pt.s, r))
                    .filter(|u| *u > a && *u < b)
                    .collect();
                let inner_tol = tol * 0.3;
                let est = integrate(
                    &GK21,
                    |u: f64| {
                        let (f, r) = self.radial_factor(pt.s, u);
                        if f == 0.0 {
                            return 0.0;
                        }
                        match constant_h {
                            Some(_) => f,
                            None => f * self.phi(pt, r, inner_tol, ok),
                        }
                    },
                    a,
                    b,
                    &breaks,
                    Tolerance::rel(tol).with_abs(self.abs_floor).with_limit(600),
                );
                if !est.converged {
                    ok.set(false);
                }
                est.value * constant_h.unwrap_or(1.0)
            }
        }
    }

    fn outer_level(&self, level: usize, t: &mut [f64; MAX_X], s_fixed: f64, tol: f64, ok: &Cell<bool>) -> f64 {
        if level == self.layout.outer.len() {
            let pt = self.outer_point(&t[..level]);
            if pt.decay == 0.0 {
                return 0.0;
            }
            return pt.decay * self.inner(&pt, tol, ok);
        }
        let c = &self.layout.outer[level];
        let mut breaks = c.knots.clone();
        if let Weight::Slab { lower } = self.weight {
            if c.nu > 0.0 {
                breaks.push((lower - s_fixed) / c.nu);
                breaks.push((lower + 1.0 - s_fixed) / c.nu);
            }
        }
        let mut local = *t;
        let limit = Tolerance::rel(tol).with_abs(1e-300).with_limit(if level == 0 { 2000 } else { 600 });
        let est = integrate(
            &GK21,
            |tj: f64| {
                local[level] = tj;
                self.outer_level(level + 1, &mut local, s_fixed + c.nu * tj, tol * 0.3, ok)
            },
            0.0,
            c.upper,
            &breaks,
            limit,
        );
        if !est.converged {
            ok.set(false);
        }
        est.value
    }

    /// Deterministic nested integral, scaled by `1/prod nu` of the radial block.
    /// Returns value, error estimate and convergence flag.
    pub fn deterministic(&self, tol: f64) -> (f64, f64, bool) {
        let ok = Cell::new(true);
        let mut t = [0.0; MAX_X];
        let v = self.outer_level(0, &mut t, 0.0, tol, &ok) * self.inv_nu_prod;
        let converged = ok.get() && v.is_finite();
        (v, tol * v.abs(), converged)
    }
}
