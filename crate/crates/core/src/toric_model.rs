//! Model geometry on the closed unit polydisc.
//!
//! Everything is diagonal in the coordinates `z_1, .., z_n`: the potential is
//! `phi_L = sum c_j log|z_j|^2 + h(|z_1|^2, .., |z_n|^2)` with `h` an optional
//! bounded polynomial, and `psi = sum nu_j log|z_j|^2 - 1`. Pointwise
//! evaluations take the squared moduli `x_j = |z_j|^2` as input.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ideal_engine::JumpSchedule;
use crate::rational::{self, format_q, parse_q, to_f64, Q};

/// Upper bound on the dimension handled by the numerical layer.
pub const MAX_DIM: usize = 6;

fn exp_key(a: &[u32]) -> String {
    a.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_exp_key(s: &str, n: Option<usize>) -> Result<Vec<u32>> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    let a = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| Error::Parse(format!("bad exponent key {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(n) = n {
        if a.len() != n {
            return Err(Error::Parse(format!(
                "exponent key {s:?} has {} entries, expected {n}",
                a.len()
            )));
        }
    }
    Ok(a)
}

/// Real polynomial in the squared moduli with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SmoothTerm {
    terms: BTreeMap<Vec<u32>, Q>,
}

impl SmoothTerm {
    pub fn new(terms: impl IntoIterator<Item = (Vec<u32>, Q)>) -> Self {
        let mut out = SmoothTerm::default();
        for (a, c) in terms {
            out.add_term(a, c);
        }
        out
    }

    /// `coef * x_j` in dimension `n`.
    pub fn linear(n: usize, j: usize, coef: Q) -> Self {
        let mut a = vec![0; n];
        a[j] = 1;
        Self::new([(a, coef)])
    }

    fn add_term(&mut self, a: Vec<u32>, c: Q) {
        let entry = self.terms.entry(a).or_insert_with(Q::zero);
        *entry += c;
        self.terms.retain(|_, v| !v.is_zero());
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Q)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.terms.keys().next().map(|a| a.len())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, c)| {
                let mono: f64 = a
                    .iter()
                    .zip(x)
                    .map(|(&e, &xj)| if e == 0 { 1.0 } else { xj.powi(e as i32) })
                    .product();
                to_f64(c) * mono
            })
            .sum()
    }

    pub fn eval_exact(&self, x: &[Q]) -> Q {
        let mut acc = Q::zero();
        for (a, c) in &self.terms {
            let mut mono = c.clone();
            for (&e, xj) in a.iter().zip(x) {
                for _ in 0..e {
                    mono *= xj;
                }
            }
            acc += mono;
        }
        acc
    }

    /// Sum of absolute coefficients; bounds |h| on the closed unit box.
    pub fn coefficient_bound(&self) -> Q {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Depends on coordinate `j` at all.
    pub fn depends_on(&self, j: usize) -> bool {
        self.terms.keys().any(|a| a[j] > 0)
    }

    /// Sets `x_j = 0` for every `j` in `coords`.
    pub fn restrict_zero(&self, coords: &[usize]) -> SmoothTerm {
        SmoothTerm {
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| coords.iter().all(|&j| a[j] == 0))
                .map(|(a, c)| (a.clone(), c.clone()))
                .collect(),
        }
    }

    /// The Euler-type derivative `x_j d/dx_j`.
    pub fn euler_derivative(&self, j: usize) -> SmoothTerm {
        SmoothTerm::new(
            self.terms
                .iter()
                .filter(|(a, _)| a[j] > 0)
                .map(|(a, c)| (a.clone(), c * Q::from_integer(a[j].into()))),
        )
    }

    pub fn sub(&self, other: &SmoothTerm) -> SmoothTerm {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), -c.clone());
        }
        out
    }

    pub fn add_constant(&self, n: usize, c: Q) -> SmoothTerm {
        let mut out = self.clone();
        out.add_term(vec![0; n], c);
        out
    }

    /// Certified upper bound for the supremum over `[0,1]^n`.
    ///
    /// When the polynomial is monotone in every variable (all terms involving
    /// a variable share one coefficient sign) the supremum sits at a vertex and
    /// is returned exactly. Otherwise a grid maximum plus a Lipschitz margin.
    pub fn sup_on_unit_box(&self, n: usize) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let mut vertex = Vec::with_capacity(n);
        let mut monotone = true;
        for j in 0..n {
            let mut pos = false;
            let mut neg = false;
            for (a, c) in &self.terms {
                if a[j] > 0 {
                    if c.is_positive() {
                        pos = true;
                    } else {
                        neg = true;
                    }
                }
            }
            if pos && neg {
                monotone = false;
                break;
            }
            vertex.push(if pos { Q::one() } else { Q::zero() });
        }
        if monotone {
            return to_f64(&self.eval_exact(&vertex));
        }
        // grid with at most ~2e5 points
        let per_dim = ((200_000f64).powf(1.0 / n as f64).floor() as usize).clamp(2, 257);
        let step = 1.0 / (per_dim - 1) as f64;
        let lipschitz: f64 = self
            .terms
            .iter()
            .map(|(a, c)| to_f64(&c.abs()) * a.iter().map(|&e| e as f64).sum::<f64>())
            .sum();
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        let mut best = f64::NEG_INFINITY;
        loop {
            for j in 0..n {
                x[j] = idx[j] as f64 * step;
            }
            best = best.max(self.eval(&x));
            let mut k = 0;
            loop {
                if k == n {
                    return best + lipschitz * step * 0.5;
                }
                idx[k] += 1;
                if idx[k] < per_dim {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

impl Serialize for SmoothTerm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, String> = self
            .terms
            .iter()
            .map(|(a, c)| (exp_key(a), format_q(c)))
            .collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SmoothTerm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Coef {
            S(String),
            F(f64),
        }
        let raw = BTreeMap::<String, Coef>::deserialize(d)?;
        let mut out = SmoothTerm::default();
        for (k, v) in raw {
            let a = parse_exp_key(&k, None).map_err(serde::de::Error::custom)?;
            let c = match v {
                Coef::S(s) => parse_q(&s).map_err(serde::de::Error::custom)?,
                Coef::F(f) => Q::from_float(f)
                    .ok_or_else(|| serde::de::Error::custom("non-finite coefficient"))?,
            };
            out.add_term(a, c);
        }
        Ok(out)
    }
}

/// Diagonal weights defining `phi_L`, `psi` and the multiplier `m` under study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToricData {
    pub n: usize,
    #[serde(
        serialize_with = "rational::serialize_q_vec",
        deserialize_with = "rational::deserialize_q_vec"
    )]
    pub c: Vec<Q>,
    #[serde(
        serialize_with = "rational::serialize_q_vec",
        deserialize_with = "rational::deserialize_q_vec"
    )]
    pub nu: Vec<Q>,
    #[serde(
        serialize_with = "rational::serialize_q",
        deserialize_with = "rational::deserialize_q"
    )]
    pub m: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_term: Option<SmoothTerm>,
}

impl ToricData {
    pub fn new(c: Vec<Q>, nu: Vec<Q>, m: Q) -> Result<Self> {
        let data = ToricData {
            n: c.len(),
            c,
            nu,
            m,
            smooth_term: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_smooth_term(mut self, h: SmoothTerm) -> Result<Self> {
        self.smooth_term = if h.is_zero() { None } else { Some(h) };
        self.validate()?;
        Ok(self)
    }

    pub fn with_m(&self, m: Q) -> Self {
        ToricData { m, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidData("dimension must be at least 1".into()));
        }
        if self.c.len() != self.n || self.nu.len() != self.n {
            return Err(Error::InvalidData(format!(
                "c and nu must have length n = {}",
                self.n
            )));
        }
        if self.c.iter().any(|x| x.is_negative()) {
            return Err(Error::InvalidData("c must be nonnegative".into()));
        }
        if self.nu.iter().any(|x| x.is_negative()) {
            return Err(Error::InvalidData("nu must be nonnegative".into()));
        }
        if !self.nu.iter().any(|x| x.is_positive()) {
            return Err(Error::InvalidData("at least one nu_j must be positive".into()));
        }
        if self.m.is_negative() {
            return Err(Error::InvalidData("m must be nonnegative".into()));
        }
        if let Some(h) = &self.smooth_term {
            if let Some(d) = h.dim() {
                if d != self.n {
                    return Err(Error::InvalidData(format!(
                        "smooth_term exponents have length {d}, expected {}",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }

    /// `e_j = c_j + m nu_j` at the given multiplier.
    pub fn exponents_at(&self, m: &Q) -> Vec<Q> {
        self.c
            .iter()
            .zip(&self.nu)
            .map(|(c, nu)| c + m * nu)
            .collect()
    }

    pub fn exponents(&self) -> Vec<Q> {
        self.exponents_at(&self.m)
    }

    /// Coordinates `j` with `nu_j > 0` and `c_j + m nu_j` a positive integer.
    pub fn relevant_set(&self) -> Vec<usize> {
        self.exponents()
            .iter()
            .enumerate()
            .filter(|(j, e)| {
                self.nu[*j].is_positive() && rational::is_integer(e) && *e >= &Q::one()
            })
            .map(|(j, _)| j)
            .collect()
    }

    pub fn smooth_eval(&self, x: &[f64]) -> f64 {
        self.smooth_term.as_ref().map_or(0.0, |h| h.eval(x))
    }

    pub fn nu_f64(&self) -> Vec<f64> {
        self.nu.iter().map(to_f64).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ToricData serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let data: ToricData =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("config: {e}")))?;
        data.validate()?;
        Ok(data)
    }
}

/// `psi(x) = sum nu_j ln x_j - 1`.
///
/// Returns `-inf` when some `x_j = 0` with `nu_j > 0`; rejects points outside
/// the unit box.
pub fn eval_psi(data: &ToricData, x: &[f64]) -> Result<f64> {
    if x.len() != data.n {
        return Err(Error::Domain(format!(
            "point has {} coordinates, expected {}",
            x.len(),
            data.n
        )));
    }
    let mut acc = -1.0;
    for (xj, nu) in x.iter().zip(data.nu_f64()) {
        if !(0.0..=1.0).contains(xj) {
            return Err(Error::Domain(format!("x = {xj} outside [0,1]")));
        }
        if nu > 0.0 {
            if *xj == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            acc += nu * xj.ln();
        }
    }
    Ok(acc)
}

/// `phi_L(x) = sum c_j ln x_j + h(x)`.
pub fn eval_phi_l(data: &ToricData, x: &[f64]) -> f64 {
    let diag: f64 = data
        .c
        .iter()
        .zip(x)
        .map(|(c, xj)| if c.is_zero() { 0.0 } else { to_f64(c) * xj.ln() })
        .sum();
    diag + data.smooth_eval(x)
}

/// Finite sum of monomials `z^a` with complex coefficients.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MonomialSection {
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl MonomialSection {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(a: Vec<u32>) -> Self {
        Self::from_terms([(a, Complex64::new(1.0, 0.0))])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Vec<u32>, Complex64)>) -> Self {
        let mut out = Self::default();
        for (a, c) in terms {
            out.add_term(a, c);
        }
        out
    }

    pub fn add_term(&mut self, a: Vec<u32>, c: Complex64) {
        let entry = self.terms.entry(a.clone()).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(&a);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.terms.keys().next().map(|a| a.len())
    }

    pub fn sub(&self, other: &MonomialSection) -> MonomialSection {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), -c);
        }
        out
    }

    pub fn add(&self, other: &MonomialSection) -> MonomialSection {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), *c);
        }
        out
    }

    /// Keeps only the terms satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[u32]) -> bool) -> MonomialSection {
        MonomialSection {
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| keep(a))
                .map(|(a, c)| (a.clone(), *c))
                .collect(),
        }
    }

    /// Parses expressions such as `1 + z1`, `2*z1^2*z2 - z2`, `z1z2`.
    /// Coordinates are 1-based in the text.
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        let mut out = MonomialSection::default();
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Err(Error::Parse("empty section".into()));
        }
        if cleaned == "0" {
            return Ok(out);
        }
        let mut chunks = Vec::new();
        let mut current = String::new();
        for (i, ch) in cleaned.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !current.ends_with('^') {
                chunks.push(std::mem::take(&mut current));
            }
            current.push(ch);
        }
        chunks.push(current);
        for chunk in chunks {
            let (sign, body) = match chunk.strip_prefix('-') {
                Some(rest) => (-1.0, rest),
                None => (1.0, chunk.trim_start_matches('+')),
            };
            let mut coef = sign;
            let mut a = vec![0u32; n];
            for factor in body.split('*').filter(|f| !f.is_empty()) {
                let mut rest = factor;
                // leading numeric coefficient
                let num_len = rest
                    .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '/'))
                    .unwrap_or(rest.len());
                if num_len > 0 {
                    coef *= rational::to_f64(&parse_q(&rest[..num_len])?);
                    rest = &rest[num_len..];
                }
                while !rest.is_empty() {
                    let after_z = rest
                        .strip_prefix('z')
                        .ok_or_else(|| Error::Parse(format!("unexpected {rest:?} in {s:?}")))?;
                    let idx_len = after_z
                        .find(|c: char| !c.is_ascii_digit())
                        .unwrap_or(after_z.len());
                    let idx: usize = after_z[..idx_len]
                        .parse()
                        .map_err(|_| Error::Parse(format!("missing index in {s:?}")))?;
                    if idx == 0 || idx > n {
                        return Err(Error::Parse(format!("z{idx} out of range for n = {n}")));
                    }
                    rest = &after_z[idx_len..];
                    let mut power = 1u32;
                    if let Some(p) = rest.strip_prefix('^') {
                        let plen = p.find(|c: char| !c.is_ascii_digit()).unwrap_or(p.len());
                        power = p[..plen]
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad power in {s:?}")))?;
                        rest = &p[plen..];
                    }
                    a[idx - 1] += power;
                }
            }
            out.add_term(a, Complex64::new(coef, 0.0));
        }
        Ok(out)
    }
}

impl fmt::Display for MonomialSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (a, c)) in self.terms.iter().enumerate() {
            if c.im == 0.0 {
                match (i, c.re < 0.0) {
                    (0, _) => write!(f, "{}", c.re)?,
                    (_, true) => write!(f, " - {}", -c.re)?,
                    (_, false) => write!(f, " + {}", c.re)?,
                }
            } else {
                if i > 0 {
                    write!(f, " + ")?;
                }
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            for (j, &e) in a.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*z{}", j + 1)?,
                    _ => write!(f, "*z{}^{}", j + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

impl Serialize for MonomialSection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, [f64; 2]> = self
            .terms
            .iter()
            .map(|(a, c)| (exp_key(a), [c.re, c.im]))
            .collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MonomialSection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, [f64; 2]>::deserialize(d)?;
        let mut out = MonomialSection::default();
        for (k, [re, im]) in raw {
            let a = parse_exp_key(&k, None).map_err(serde::de::Error::custom)?;
            out.add_term(a, Complex64::new(re, im));
        }
        Ok(out)
    }
}

/// Splitting of `phi_L + m psi` into a part `bphi` integrable at general points
/// of `S`, the divisor `S_0` and the reduced divisor `S`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PotentialDecomposition {
    pub relevant: Vec<usize>,
    pub s0: Vec<u32>,
    #[serde(serialize_with = "rational::serialize_q_vec")]
    pub bphi_exponents: Vec<Q>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bphi_smooth: Option<SmoothTerm>,
    /// The constant `-m` coming from the shift in `psi`.
    #[serde(serialize_with = "rational::serialize_q")]
    pub constant: Q,
}

impl PotentialDecomposition {
    pub fn is_relevant(&self, j: usize) -> bool {
        self.relevant.contains(&j)
    }

    /// Exact check of `c_j + m nu_j = bphi_j + s0_j + [j in J]`.
    pub fn reconstructs(&self, data: &ToricData) -> bool {
        data.exponents().iter().enumerate().all(|(j, e)| {
            let s = if self.is_relevant(j) { Q::one() } else { Q::zero() };
            *e == &self.bphi_exponents[j] + Q::from_integer(self.s0[j].into()) + s
        }) && self.s0.iter().enumerate().all(|(j, &s)| s == 0 || self.is_relevant(j))
            && self.relevant.iter().all(|&j| self.bphi_exponents[j].is_zero())
    }

    pub fn eval_bphi(&self, x: &[f64]) -> f64 {
        let diag: f64 = self
            .bphi_exponents
            .iter()
            .zip(x)
            .map(|(b, xj)| if b.is_zero() { 0.0 } else { to_f64(b) * xj.ln() })
            .sum();
        diag + self.bphi_smooth.as_ref().map_or(0.0, |h| h.eval(x)) + to_f64(&self.constant)
    }

    pub fn eval_phi_s0(&self, x: &[f64]) -> f64 {
        self.s0
            .iter()
            .zip(x)
            .map(|(&s, xj)| if s == 0 { 0.0 } else { s as f64 * xj.ln() })
            .sum()
    }

    pub fn eval_phi_s(&self, x: &[f64]) -> f64 {
        self.relevant.iter().map(|&j| x[j].ln()).sum()
    }
}

/// Splits `phi_L + m psi = bphi + phi_{S_0} + phi_S` at a jumping number.
pub fn decompose_potential(data: &ToricData, jumps: &JumpSchedule) -> Result<PotentialDecomposition> {
    if !jumps.jumps.contains(&data.m) {
        return Err(Error::NotAJump(format_q(&data.m)));
    }
    let relevant = data.relevant_set();
    if relevant.is_empty() {
        return Err(Error::NotAJump(format_q(&data.m)));
    }
    let e = data.exponents();
    let mut s0 = vec![0u32; data.n];
    let mut bphi = vec![Q::zero(); data.n];
    for j in 0..data.n {
        if relevant.contains(&j) {
            s0[j] = rational::to_u32(&(rational::floor(&e[j]) - 1))?;
        } else {
            bphi[j] = e[j].clone();
        }
    }
    Ok(PotentialDecomposition {
        relevant,
        s0,
        bphi_exponents: bphi,
        bphi_smooth: data.smooth_term.clone(),
        constant: -data.m.clone(),
    })
}

/// `r_j^2 d/d(r_j^2)` of `psi` perturbed by the data's smooth term:
/// `nu_j + x_j dh/dx_j`.
#[derive(Clone, Debug)]
pub struct AdmissibilityProfile {
    pub coord: usize,
    pub nu: f64,
    pub perturbation: Option<SmoothTerm>,
    /// Certified lower bound of the profile on `[0,1]^n`.
    pub min_bound: f64,
}

impl AdmissibilityProfile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.nu + self.perturbation.as_ref().map_or(0.0, |p| p.eval(x))
    }

    /// Value on `{x_j = 0}`, which is `nu_j` since the perturbation carries a factor `x_j`.
    pub fn at_divisor(&self) -> f64 {
        self.nu
    }

    pub fn is_constant(&self) -> bool {
        self.perturbation.is_none()
    }
}

pub fn admissibility_profile(data: &ToricData, j: usize) -> Result<AdmissibilityProfile> {
    if j >= data.n {
        return Err(Error::Domain(format!("coordinate {j} out of range")));
    }
    if !data.nu[j].is_positive() {
        return Err(Error::Precondition(format!("nu_{} = 0", j + 1)));
    }
    let nu = to_f64(&data.nu[j]);
    let perturbation = data
        .smooth_term
        .as_ref()
        .map(|h| h.euler_derivative(j))
        .filter(|p| !p.is_zero());
    let min_bound = match &perturbation {
        None => nu,
        Some(p) => {
            // inf(nu + p) = nu - sup(-p)
            let neg = SmoothTerm::default().sub(p);
            nu - neg.sup_on_unit_box(data.n)
        }
    };
    if min_bound <= 0.0 {
        return Err(Error::Positivity(format!(
            "profile r^2 d/dr^2 psi along z{} may vanish (certified lower bound {min_bound})",
            j + 1
        )));
    }
    Ok(AdmissibilityProfile {
        coord: j,
        nu,
        perturbation,
        min_bound,
    })
}

/// One factor of a toric test function, in the squared modulus `x = |z|^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpFactor {
    /// Normal direction of the centre: the function does not depend on it.
    Normal,
    /// Identically one.
    Full,
    /// 1 for `|z| <= radius/2`, 0 for `|z| >= radius`.
    Disc { radius: f64 },
    /// 0 for `|z| <= margin`, 1 on `[2 margin, radius/2]`, 0 beyond `radius`.
    Annulus { margin: f64, radius: f64 },
}

/// C^2 quintic smoothstep on [0,1].
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

impl BumpFactor {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BumpFactor::Normal | BumpFactor::Full => 1.0,
            BumpFactor::Disc { radius } => disc_profile(x, radius),
            BumpFactor::Annulus { margin, radius } => {
                let lo = margin * margin;
                let hi = 4.0 * margin * margin;
                let rise = if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else {
                    smoothstep((x - lo) / (hi - lo))
                };
                rise * disc_profile(x, radius)
            }
        }
    }

    /// Breakpoints of the piecewise-polynomial profile, in `x`.
    pub fn knots(&self) -> Vec<f64> {
        match *self {
            BumpFactor::Normal | BumpFactor::Full => vec![],
            BumpFactor::Disc { radius } => vec![0.25 * radius * radius, radius * radius],
            BumpFactor::Annulus { margin, radius } => vec![
                margin * margin,
                4.0 * margin * margin,
                0.25 * radius * radius,
                radius * radius,
            ],
        }
    }

    /// Value at `x = 0`.
    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self, BumpFactor::Normal | BumpFactor::Full)
    }
}

fn disc_profile(x: f64, radius: f64) -> f64 {
    let inner = 0.25 * radius * radius;
    let outer = radius * radius;
    if x <= inner {
        1.0
    } else if x >= outer {
        0.0
    } else {
        1.0 - smoothstep((x - inner) / (outer - inner))
    }
}

/// Compactly supported toric test function on a coordinate subspace, pulled
/// back along the normal directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub factors: Vec<BumpFactor>,
}

impl BumpFunction {
    /// The constant function 1 (supported everywhere).
    pub fn one(n: usize) -> Self {
        BumpFunction {
            factors: vec![BumpFactor::Full; n],
        }
    }

    /// Bump on the centre `{z_j = 0 : j in centre}`: a disc of `radius` in free
    /// non-relevant directions, an annulus keeping `margin` away from the other
    /// relevant divisors.
    pub fn on_centre(
        n: usize,
        centre: &[usize],
        relevant: &[usize],
        radius: f64,
        margin: f64,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::InvalidData(format!("radius {radius} not in (0,1)")));
        }
        let factors = (0..n)
            .map(|j| {
                if centre.contains(&j) {
                    Ok(BumpFactor::Normal)
                } else if relevant.contains(&j) {
                    if !(margin > 0.0 && 4.0 * margin <= radius) {
                        return Err(Error::InvalidData(format!(
                            "margin {margin} must lie in (0, radius/4]"
                        )));
                    }
                    Ok(BumpFactor::Annulus { margin, radius })
                } else {
                    Ok(BumpFactor::Disc { radius })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BumpFunction { factors })
    }

    pub fn centre(&self) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, BumpFactor::Normal))
            .map(|(j, _)| j)
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.factors.iter().zip(x).map(|(f, &xj)| f.eval(xj)).product()
    }

    pub fn is_constant(&self) -> bool {
        self.factors.iter().all(|f| f.is_trivial())
    }

    /// Checks the support stays `margin` away from relevant divisors other
    /// than the centre's.
    pub fn respects_margin(&self, relevant: &[usize]) -> bool {
        relevant.iter().all(|&j| {
            matches!(
                self.factors[j],
                BumpFactor::Normal | BumpFactor::Annulus { .. }
            )
        })
    }
}
