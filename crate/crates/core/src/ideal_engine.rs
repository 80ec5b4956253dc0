//! Exact combinatorics of multiplier ideals, jumping numbers and the adjoint
//! ideal filtration for diagonal weights. All arithmetic is rational.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, format_q, Q};
use crate::toric_model::ToricData;

/// Monomial ideal given by a minimal generating antichain.
///
/// An empty generator list is the zero ideal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialIdeal {
    pub n: usize,
    pub gens: Vec<Vec<u32>>,
}

fn divides(g: &[u32], a: &[u32]) -> bool {
    g.iter().zip(a).all(|(x, y)| x <= y)
}

impl MonomialIdeal {
    pub fn new(n: usize, gens: impl IntoIterator<Item = Vec<u32>>) -> Self {
        let mut ideal = MonomialIdeal {
            n,
            gens: gens.into_iter().collect(),
        };
        ideal.reduce();
        ideal
    }

    pub fn unit(n: usize) -> Self {
        MonomialIdeal {
            n,
            gens: vec![vec![0; n]],
        }
    }

    pub fn zero(n: usize) -> Self {
        MonomialIdeal { n, gens: vec![] }
    }

    pub fn principal(a: Vec<u32>) -> Self {
        MonomialIdeal {
            n: a.len(),
            gens: vec![a],
        }
    }

    pub fn is_unit(&self) -> bool {
        self.gens.iter().any(|g| g.iter().all(|&e| e == 0))
    }

    pub fn is_zero(&self) -> bool {
        self.gens.is_empty()
    }

    /// Drops duplicates and non-minimal generators; sorts lexicographically.
    fn reduce(&mut self) {
        let set: BTreeSet<Vec<u32>> = self.gens.drain(..).collect();
        let all: Vec<Vec<u32>> = set.into_iter().collect();
        self.gens = all
            .iter()
            .filter(|a| !all.iter().any(|g| g != *a && divides(g, a)))
            .cloned()
            .collect();
    }

    pub fn is_antichain(&self) -> bool {
        self.gens.iter().enumerate().all(|(i, a)| {
            self.gens
                .iter()
                .enumerate()
                .all(|(k, g)| i == k || !divides(g, a))
        })
    }

    pub fn contains(&self, a: &[u32]) -> bool {
        self.gens.iter().any(|g| divides(g, a))
    }

    /// Ideal inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &MonomialIdeal) -> bool {
        self.gens.iter().all(|g| other.contains(g))
    }

    pub fn product(&self, other: &MonomialIdeal) -> MonomialIdeal {
        let gens = self
            .gens
            .iter()
            .flat_map(|a| {
                other
                    .gens
                    .iter()
                    .map(move |b| a.iter().zip(b).map(|(x, y)| x + y).collect())
            })
            .collect::<Vec<_>>();
        MonomialIdeal::new(self.n, gens)
    }

    pub fn intersection(&self, other: &MonomialIdeal) -> MonomialIdeal {
        let gens = self
            .gens
            .iter()
            .flat_map(|a| {
                other
                    .gens
                    .iter()
                    .map(move |b| a.iter().zip(b).map(|(x, y)| *x.max(y)).collect())
            })
            .collect::<Vec<_>>();
        MonomialIdeal::new(self.n, gens)
    }

    /// Colon ideal `(self : other)`.
    pub fn colon(&self, other: &MonomialIdeal) -> MonomialIdeal {
        let mut acc = MonomialIdeal::unit(self.n);
        for g in &other.gens {
            let quotient = MonomialIdeal::new(
                self.n,
                self.gens.iter().map(|a| {
                    a.iter()
                        .zip(g)
                        .map(|(x, y)| x.saturating_sub(*y))
                        .collect::<Vec<_>>()
                }),
            );
            acc = acc.intersection(&quotient);
        }
        acc
    }

    /// All generators square-free.
    pub fn is_radical(&self) -> bool {
        self.gens.iter().all(|g| g.iter().all(|&e| e <= 1))
    }
}

/// `e_j = c_j + m nu_j` exceeds `a_j + 1` strictly for the minimal exponent
/// `a_min_j`, the least integer strictly greater than `e_j - 1`.
pub fn multiplier_ideal(data: &ToricData, m: &Q) -> MonomialIdeal {
    let a_min = data
        .exponents_at(m)
        .iter()
        .map(|e| {
            let v = rational::next_int_above(&(e - Q::one()));
            rational::to_u32(&v.max(num_bigint::BigInt::zero())).expect("exponent fits in u32")
        })
        .collect();
    MonomialIdeal::principal(a_min)
}

/// Jumping numbers of `I(phi_L + m psi)` in `(lo, hi]`, with the ideal on
/// each interval between them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpSchedule {
    #[serde(serialize_with = "rational::serialize_q")]
    pub m0: Q,
    #[serde(serialize_with = "rational::serialize_q_vec")]
    pub jumps: Vec<Q>,
    /// `ideals[0]` holds on `[m0, m_1)`, `ideals[i]` on `[m_i, m_{i+1})`.
    pub ideals: Vec<MonomialIdeal>,
}

impl JumpSchedule {
    pub fn contains(&self, m: &Q) -> bool {
        self.jumps.contains(m)
    }

    /// The previous jump, or `m0` for the first one.
    pub fn predecessor(&self, m: &Q) -> Result<Q> {
        let k = self
            .jumps
            .iter()
            .position(|x| x == m)
            .ok_or_else(|| Error::NotAJump(format_q(m)))?;
        Ok(if k == 0 {
            self.m0.clone()
        } else {
            self.jumps[k - 1].clone()
        })
    }

    /// Ideal in force immediately before the jump `m`.
    pub fn ideal_before(&self, m: &Q) -> Result<&MonomialIdeal> {
        let k = self
            .jumps
            .iter()
            .position(|x| x == m)
            .ok_or_else(|| Error::NotAJump(format_q(m)))?;
        Ok(&self.ideals[k])
    }

    pub fn ideal_at_jump(&self, m: &Q) -> Result<&MonomialIdeal> {
        let k = self
            .jumps
            .iter()
            .position(|x| x == m)
            .ok_or_else(|| Error::NotAJump(format_q(m)))?;
        Ok(&self.ideals[k + 1])
    }
}

pub fn jumping_numbers(data: &ToricData, lo: &Q, hi: &Q) -> JumpSchedule {
    let mut set = BTreeSet::new();
    for (c, nu) in data.c.iter().zip(&data.nu) {
        if !nu.is_positive() {
            continue;
        }
        // m = (k - c) / nu for integers k >= 1 with lo < m <= hi
        let k_lo = rational::next_int_above(&(c + lo * nu)).max(num_bigint::BigInt::one());
        let k_hi = rational::floor(&(c + hi * nu));
        let mut k = k_lo;
        while k <= k_hi {
            set.insert((Q::from_integer(k.clone()) - c) / nu);
            k += 1;
        }
    }
    let jumps: Vec<Q> = set.into_iter().collect();
    let mut ideals = vec![multiplier_ideal(data, lo)];
    for m in &jumps {
        ideals.push(multiplier_ideal(data, m));
    }
    JumpSchedule {
        m0: lo.clone(),
        jumps,
        ideals,
    }
}

/// Relevant divisors at a jump and the lc centres they cut out.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LcStructure {
    pub n: usize,
    pub relevant: Vec<usize>,
    pub sigma_mlc: usize,
}

impl LcStructure {
    /// All `sigma`-element subsets of the relevant set, lexicographically.
    /// `centres(0)` is the single empty subset naming the whole space.
    pub fn centres(&self, sigma: usize) -> Vec<Vec<usize>> {
        subsets(&self.relevant, sigma)
    }

    /// Radical ideal of the union of the `sigma`-fold centres: square-free
    /// monomials of degree `|J| - sigma + 1` in the relevant variables.
    pub fn lcc_ideal(&self, sigma: usize) -> MonomialIdeal {
        let size = self.relevant.len();
        if sigma > size {
            return MonomialIdeal::unit(self.n);
        }
        if sigma == 0 {
            return MonomialIdeal::zero(self.n);
        }
        let degree = size - sigma + 1;
        MonomialIdeal::new(
            self.n,
            subsets(&self.relevant, degree).into_iter().map(|s| {
                let mut a = vec![0; self.n];
                for j in s {
                    a[j] = 1;
                }
                a
            }),
        )
    }
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= items.len() {
        rec(items, k, 0, &mut Vec::new(), &mut out);
    }
    out
}

pub fn lc_structure(data: &ToricData) -> Result<LcStructure> {
    let relevant = data.relevant_set();
    if relevant.is_empty() {
        return Err(Error::NotAJump(format_q(&data.m)));
    }
    Ok(LcStructure {
        n: data.n,
        sigma_mlc: relevant.len(),
        relevant,
    })
}

/// `A_sigma = I(phi_L + m_{k-1} psi) * I(lcc_{sigma+1})`.
pub fn adjoint_ideal(data: &ToricData, jumps: &JumpSchedule, sigma: usize) -> Result<MonomialIdeal> {
    let lc = lc_structure(data)?;
    let before = jumps.ideal_before(&data.m)?;
    Ok(before.product(&lc.lcc_ideal(sigma + 1)))
}

/// Relevant coordinates where `a_j + 1 = e_j`.
pub fn equality_set(data: &ToricData, a: &[u32]) -> Vec<usize> {
    let e = data.exponents();
    data.relevant_set()
        .into_iter()
        .filter(|&j| Q::from_integer((a[j] + 1).into()) == e[j])
        .collect()
}

pub fn combinatorial_membership(data: &ToricData, a: &[u32], sigma: usize) -> bool {
    let e = data.exponents();
    let relevant = data.relevant_set();
    let mut equalities = 0;
    for j in 0..data.n {
        let a1 = Q::from_integer((a[j] + 1).into());
        if relevant.contains(&j) {
            if a1 < e[j] {
                return false;
            }
            if a1 == e[j] {
                equalities += 1;
            }
        } else if a1 <= e[j] {
            return false;
        }
    }
    equalities <= sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use proptest::prelude::*;

    fn data(c: &[Q], nu: &[Q], m: Q) -> ToricData {
        ToricData::new(c.to_vec(), nu.to_vec(), m).unwrap()
    }

    #[test]
    fn multiplier_examples() {
        let d = data(&[qi(0)], &[qi(1)], q(5, 2));
        assert_eq!(multiplier_ideal(&d, &q(5, 2)).gens, vec![vec![2]]);
        let d = data(&[qi(0), qi(0)], &[q(3, 7), qi(2)], qi(0));
        assert!(multiplier_ideal(&d, &qi(0)).is_unit());
        let d = data(&[q(1, 2)], &[qi(1)], q(1, 2));
        assert_eq!(multiplier_ideal(&d, &q(1, 2)).gens, vec![vec![1]]);
    }

    #[test]
    fn multiplier_matches_one_dimensional_integrability() {
        // z^a in I iff int_0^1 x^{a - e} dx < inf iff a - e > -1
        for (c, nu, m) in [(q(1, 3), q(2, 5), q(7, 4)), (qi(0), qi(1), qi(3)), (q(5, 2), q(1, 3), qi(1))] {
            let d = data(&[c.clone()], &[nu.clone()], m.clone());
            let e = &c + &m * &nu;
            let ideal = multiplier_ideal(&d, &m);
            for a in 0..8u32 {
                let integrable = Q::from_integer(a.into()) - &e > qi(-1);
                assert_eq!(ideal.contains(&[a]), integrable, "a={a} e={e}");
            }
        }
    }

    #[test]
    fn jump_examples() {
        let d = data(&[qi(0)], &[qi(1)], qi(1));
        assert_eq!(jumping_numbers(&d, &qi(0), &qi(3)).jumps, vec![qi(1), qi(2), qi(3)]);
        let d = data(&[q(1, 2), qi(0)], &[qi(1), qi(1)], qi(1));
        assert_eq!(
            jumping_numbers(&d, &qi(0), &qi(2)).jumps,
            vec![q(1, 2), qi(1), q(3, 2), qi(2)]
        );
        // open upper end excludes 1
        let d = data(&[qi(0)], &[qi(1)], qi(1));
        assert!(jumping_numbers(&d, &qi(0), &q(999, 1000)).jumps.is_empty());
    }

    /// Scans a fine rational grid and records where the ideal changes.
    fn grid_jumps(d: &ToricData, lo: &Q, hi: &Q, den: i64) -> Vec<Q> {
        let mut out = Vec::new();
        let steps = rational::floor(&((hi - lo) * Q::from_integer(den.into())));
        let steps: i64 = steps.try_into().unwrap();
        let mut prev = multiplier_ideal(d, lo);
        for i in 1..=steps {
            let m = lo + q(i, den);
            let cur = multiplier_ideal(d, &m);
            if cur != prev {
                out.push(m);
            }
            prev = cur;
        }
        out
    }

    #[test]
    fn jumps_match_grid_scan() {
        let d = data(&[q(1, 2), qi(0)], &[qi(1), qi(1)], qi(1));
        assert_eq!(
            jumping_numbers(&d, &qi(0), &qi(2)).jumps,
            grid_jumps(&d, &qi(0), &qi(2), 60)
        );
        let d = data(&[q(1, 3), q(1, 4), qi(0)], &[q(1, 2), q(2, 3), qi(0)], qi(1));
        assert_eq!(
            jumping_numbers(&d, &qi(0), &qi(4)).jumps,
            grid_jumps(&d, &qi(0), &qi(4), 120)
        );
    }

    #[test]
    fn schedule_ideals_strictly_shrink() {
        let d = data(&[q(1, 2), qi(0)], &[qi(1), qi(1)], qi(1));
        let s = jumping_numbers(&d, &qi(0), &qi(2));
        assert_eq!(s.ideals.len(), s.jumps.len() + 1);
        for w in s.ideals.windows(2) {
            assert!(w[1].is_subset_of(&w[0]) && w[0] != w[1]);
        }
        assert_eq!(s.predecessor(&q(1, 2)).unwrap(), qi(0));
        assert_eq!(s.predecessor(&q(3, 2)).unwrap(), qi(1));
        assert!(s.predecessor(&q(1, 3)).is_err());
    }

    #[test]
    fn lc_examples() {
        let d = data(&[qi(0), qi(0)], &[qi(1), qi(1)], qi(1));
        let lc = lc_structure(&d).unwrap();
        assert_eq!(lc.relevant, vec![0, 1]);
        assert_eq!(lc.sigma_mlc, 2);
        assert_eq!(lc.centres(1), vec![vec![0], vec![1]]);
        assert_eq!(lc.centres(2), vec![vec![0, 1]]);
        assert!(lc.centres(3).is_empty());
        assert_eq!(lc.centres(0), vec![Vec::<usize>::new()]);

        let d = data(&[q(1, 2), qi(0)], &[qi(1), qi(1)], q(3, 2));
        let lc = lc_structure(&d).unwrap();
        assert_eq!((lc.relevant.clone(), lc.sigma_mlc), (vec![0], 1));

        let d = data(&[qi(0)], &[qi(1)], qi(1));
        assert_eq!(lc_structure(&d).unwrap().sigma_mlc, 1);

        let d = data(&[qi(0)], &[qi(1)], q(1, 2));
        assert!(lc_structure(&d).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let d = data(&[qi(0), qi(0)], &[qi(1), qi(1)], qi(1));
        let s = jumping_numbers(&d, &qi(0), &qi(1));
        assert_eq!(adjoint_ideal(&d, &s, 1).unwrap().gens, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(adjoint_ideal(&d, &s, 0).unwrap().gens, vec![vec![1, 1]]);
        assert!(adjoint_ideal(&d, &s, 2).unwrap().is_unit());
    }

    #[test]
    fn membership_examples() {
        let d = data(&[qi(0), qi(0)], &[qi(1), qi(1)], qi(1));
        assert!(combinatorial_membership(&d, &[0, 0], 2));
        assert!(!combinatorial_membership(&d, &[0, 0], 1));
        assert!(combinatorial_membership(&d, &[1, 0], 1));
        assert!(combinatorial_membership(&d, &[1, 1], 0));
        assert_eq!(equality_set(&d, &[1, 0]), vec![1]);
    }

    #[test]
    fn colon_and_intersection() {
        let i = MonomialIdeal::new(2, [vec![2, 0], vec![0, 1]]);
        let j = MonomialIdeal::new(2, [vec![1, 0]]);
        assert_eq!(i.colon(&j).gens, vec![vec![0, 1], vec![1, 0]]);
        let k = MonomialIdeal::new(2, [vec![1, 1]]);
        assert_eq!(i.intersection(&k).gens, vec![vec![1, 1]]);
        assert!(MonomialIdeal::zero(2).colon(&MonomialIdeal::unit(2)).is_zero());
        assert!(i.colon(&MonomialIdeal::zero(2)).is_unit());
    }

    fn arb_data() -> impl Strategy<Value = (ToricData, usize)> {
        (1usize..=3)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec((0i64..4, 1i64..4), n),
                    prop::collection::vec((0i64..4, 1i64..4), n),
                    0usize..8,
                )
            })
            .prop_filter_map("needs a jump", |(c, nu, pick)| {
                let c: Vec<Q> = c.into_iter().map(|(a, b)| q(a, b)).collect();
                let mut nu: Vec<Q> = nu.into_iter().map(|(a, b)| q(a, b)).collect();
                if nu.iter().all(|x| x.is_zero()) {
                    nu[0] = qi(1);
                }
                let probe = ToricData::new(c, nu, qi(0)).ok()?;
                let s = jumping_numbers(&probe, &qi(0), &qi(3));
                if s.jumps.is_empty() {
                    return None;
                }
                let m = s.jumps[pick % s.jumps.len()].clone();
                Some((probe.with_m(m), pick))
            })
    }

    fn box_points(n: usize, side: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..side).map(move |v| {
                        let mut p = p.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    proptest! {
        #[test]
        fn filtration_is_monotone_and_pinned((d, _) in arb_data()) {
            let s = jumping_numbers(&d, &qi(0), &qi(3));
            let lc = lc_structure(&d).unwrap();
            let ideals: Vec<_> = (0..=lc.sigma_mlc + 1)
                .map(|k| adjoint_ideal(&d, &s, k).unwrap())
                .collect();
            for w in ideals.windows(2) {
                prop_assert!(w[0].is_subset_of(&w[1]));
                prop_assert!(w[0].is_antichain());
            }
            prop_assert_eq!(&ideals[0], &multiplier_ideal(&d, &d.m));
            let before = multiplier_ideal(&d, &s.predecessor(&d.m).unwrap());
            prop_assert_eq!(&ideals[lc.sigma_mlc], &before);
            prop_assert_eq!(&ideals[lc.sigma_mlc + 1], &before);
        }

        #[test]
        fn membership_characterizations_agree((d, _) in arb_data()) {
            let s = jumping_numbers(&d, &qi(0), &qi(3));
            let lc = lc_structure(&d).unwrap();
            let side = d.exponents().iter().map(|e| rational::to_f64(e) as u32 + 3).max().unwrap();
            for sigma in 0..=lc.sigma_mlc + 1 {
                let a_sigma = adjoint_ideal(&d, &s, sigma).unwrap();
                for a in box_points(d.n, side) {
                    prop_assert_eq!(combinatorial_membership(&d, &a, sigma), a_sigma.contains(&a),
                        "sigma={} a={:?}", sigma, a);
                }
            }
        }

        #[test]
        fn lcc_ideals_are_radical_annihilators((d, _) in arb_data()) {
            let s = jumping_numbers(&d, &qi(0), &qi(3));
            let lc = lc_structure(&d).unwrap();
            for sigma in 1..=lc.sigma_mlc {
                let lcc = lc.lcc_ideal(sigma);
                prop_assert!(lcc.is_radical());
                let lower = adjoint_ideal(&d, &s, sigma - 1).unwrap();
                let upper = adjoint_ideal(&d, &s, sigma).unwrap();
                prop_assert_eq!(lower.colon(&upper), lcc);
            }
        }

        #[test]
        fn filtration_steps_match_equality_sizes((d, _) in arb_data()) {
            let s = jumping_numbers(&d, &qi(0), &qi(3));
            let lc = lc_structure(&d).unwrap();
            let ideals: Vec<_> = (0..=lc.sigma_mlc + 1)
                .map(|k| adjoint_ideal(&d, &s, k).unwrap())
                .collect();
            let steps = ideals.windows(2).filter(|w| w[0] != w[1]).count();
            let side = d.exponents().iter().map(|e| rational::to_f64(e) as u32 + 2).max().unwrap();
            let sizes: BTreeSet<usize> = box_points(d.n, side)
                .into_iter()
                .filter(|a| ideals[lc.sigma_mlc].contains(a))
                .map(|a| equality_set(&d, &a).len())
                .filter(|&k| k > 0)
                .collect();
            prop_assert_eq!(steps, sizes.len());
        }

        #[test]
        fn grid_scan_oracle((d, _) in arb_data()) {
            let s = jumping_numbers(&d, &qi(0), &qi(3));
            // jumps (k - c_j)/nu_j have denominators dividing denom(c_j) * numer(nu_j)
            let mut den = num_bigint::BigInt::one();
            for (c, nu) in d.c.iter().zip(&d.nu) {
                if nu.is_positive() {
                    den = num_integer::Integer::lcm(&den, &(c.denom() * nu.numer()));
                }
            }
            let den: i64 = den.try_into().unwrap();
            prop_assert_eq!(s.jumps, grid_jumps(&d, &qi(0), &qi(3), den));
        }
    }
}
