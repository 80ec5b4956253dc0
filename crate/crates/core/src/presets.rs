//! Named configurations used by the acceptance suite and the command line.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ideal_engine::jumping_numbers;
use crate::rational::{q, qi};
use crate::residue_analysis::Integrand;
use crate::toric_model::{BumpFactor, BumpFunction, MonomialSection, SmoothTerm, ToricData};

#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Toric {
        data: ToricData,
        f: MonomialSection,
        sigma: u32,
        g: Option<BumpFunction>,
    },
    /// Real model `psi = sum_{j < sigma} ln x_j - 1` with test function `g`.
    Model { sigma: usize, g: BumpFunction },
}

pub const NAMES: [&str; 8] = [
    "calib1d",
    "box2",
    "prop2d",
    "prop2d-smooth",
    "model-sigma2",
    "nu21",
    "box2-smooth-up",
    "box2-smooth-down",
];

/// Radius and margin of the test function around a 1-lc centre.
pub const BUMP_RADIUS: f64 = 0.8;
pub const BUMP_MARGIN: f64 = 0.1;

fn prop2d_data() -> ToricData {
    ToricData::new(vec![q(1, 2), qi(0)], vec![qi(1), qi(1)], q(3, 2)).expect("valid preset")
}

fn box2_data() -> ToricData {
    ToricData::new(vec![qi(0), qi(0)], vec![qi(1), qi(1)], qi(1)).expect("valid preset")
}

fn centre_bump(data: &ToricData, centre: &[usize]) -> BumpFunction {
    BumpFunction::on_centre(data.n, centre, &data.relevant_set(), BUMP_RADIUS, BUMP_MARGIN).expect("valid preset")
}

/// Separable bump of the real model.
pub fn model_bump(n: usize) -> BumpFunction {
    BumpFunction {
        factors: vec![BumpFactor::Disc { radius: 0.9 }; n],
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let mono = |a: Vec<u32>| MonomialSection::monomial(a);
    Ok(match name {
        "calib1d" => Preset::Toric {
            data: ToricData::new(vec![qi(0)], vec![qi(1)], qi(1)).expect("valid preset"),
            f: mono(vec![0]),
            sigma: 1,
            g: None,
        },
        "box2" => Preset::Toric {
            data: box2_data(),
            f: mono(vec![0, 0]),
            sigma: 2,
            g: None,
        },
        "prop2d" => {
            let data = prop2d_data();
            let g = centre_bump(&data, &[0]);
            Preset::Toric {
                data,
                f: mono(vec![1, 1]),
                sigma: 1,
                g: Some(g),
            }
        }
        "prop2d-smooth" => {
            let data = prop2d_data()
                .with_smooth_term(SmoothTerm::linear(2, 0, q(1, 10)))
                .expect("valid preset");
            let g = centre_bump(&data, &[0]);
            Preset::Toric {
                data,
                f: mono(vec![1, 1]),
                sigma: 1,
                g: Some(g),
            }
        }
        "model-sigma2" => Preset::Model {
            sigma: 2,
            g: model_bump(3),
        },
        "nu21" => {
            let data = ToricData::new(vec![qi(0), qi(0)], vec![qi(2), qi(1)], q(1, 2)).expect("valid preset");
            let g = centre_bump(&data, &[0]);
            Preset::Toric {
                data,
                f: mono(vec![0, 0]),
                sigma: 1,
                g: Some(g),
            }
        }
        "box2-smooth-up" | "box2-smooth-down" => {
            let sign = if name.ends_with("up") { 1 } else { -1 };
            let data = box2_data()
                .with_smooth_term(SmoothTerm::linear(2, 0, q(sign, 10)))
                .expect("valid preset");
            Preset::Toric {
                data,
                f: mono(vec![0, 1]),
                sigma: 1,
                g: None,
            }
        }
        other => {
            return Err(Error::InvalidData(format!(
                "unknown preset '{other}' (known: {})",
                NAMES.join(", ")
            )))
        }
    })
}

impl Preset {
    pub fn integrand(&self) -> Integrand {
        match self {
            Preset::Toric { data, f, g, .. } => Integrand::toric(data, f, g.as_ref()),
            Preset::Model { sigma, g } => Integrand::Model {
                sigma: *sigma,
                g: g.clone(),
            },
        }
    }

    pub fn sigma(&self) -> u32 {
        match self {
            Preset::Toric { sigma, .. } => *sigma,
            Preset::Model { sigma, .. } => *sigma as u32,
        }
    }

    pub fn toric(&self) -> Option<&ToricData> {
        match self {
            Preset::Toric { data, .. } => Some(data),
            Preset::Model { .. } => None,
        }
    }
}

/// Random diagonal data with `n <= max_n`, `c_j in [0, 2)` and `nu_j in [0, 2)`
/// with denominators at most `max_den`, and `m` one of its jumping numbers.
pub fn random_data(rng: &mut impl Rng, max_n: usize, max_den: i64) -> ToricData {
    let n = rng.gen_range(1..=max_n);
    let mut rat = |lo: i64, hi_over_den: i64| {
        let den = rng.gen_range(1..=max_den);
        q(rng.gen_range(lo..hi_over_den * den), den)
    };
    let c: Vec<_> = (0..n).map(|_| rat(0, 2)).collect();
    let mut nu: Vec<_> = (0..n).map(|_| rat(0, 2)).collect();
    if nu.iter().all(|v| *v == qi(0)) {
        nu[0] = qi(1);
    }
    let placeholder = ToricData::new(c.clone(), nu.clone(), qi(1)).expect("valid random data");
    let jumps = jumping_numbers(&placeholder, &qi(0), &qi(3 * max_den));
    let pick = rng.gen_range(0..jumps.jumps.len().min(4));
    placeholder.with_m(jumps.jumps[pick].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            let p = preset(name).unwrap();
            if let Preset::Toric { data, g, .. } = &p {
                data.validate().unwrap();
                if let Some(g) = g {
                    assert!(g.respects_margin(&data.relevant_set()));
                }
            }
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn prop2d_has_one_relevant_direction() {
        let p = preset("prop2d").unwrap();
        assert_eq!(p.toric().unwrap().relevant_set(), vec![0]);
        let p = preset("nu21").unwrap();
        assert_eq!(p.toric().unwrap().relevant_set(), vec![0]);
    }

    #[test]
    fn random_data_sits_at_a_jump() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = random_data(&mut rng, 4, 6);
            d.validate().unwrap();
            assert!(!d.relevant_set().is_empty());
        }
    }
}
