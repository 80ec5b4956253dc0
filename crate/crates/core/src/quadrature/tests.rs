use std::f64::consts::{E, PI};

use approx::assert_relative_eq;

use super::*;
use crate::toric_model::{BumpFactor, BumpFunction};

fn spec(beta: &[f64], nu: &[f64], sigma: u32, eps: f64, prefactor: f64) -> IntegralSpec {
    IntegralSpec {
        beta: beta.to_vec(),
        nu: nu.to_vec(),
        sigma,
        eps,
        ell: E,
        smooth: SmoothFactor::one(),
        prefactor,
    }
}

/// Composite Simpson rule on [a, b].
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

#[test]
fn calibration_closed_form() {
    let opts = QuadOptions::default();
    for eps in [1.0, 0.5, 0.25, 2f64.powi(-10)] {
        let r = residue_integral(&spec(&[0.0], &[1.0], 1, eps, PI * E), &opts).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_relative_eq!(r.value, PI * E, max_relative = 1e-10);
        let r = residue_integral(&spec(&[0.0], &[2.0], 1, eps, PI * E), &opts).unwrap();
        assert_relative_eq!(r.value, PI * E / 2.0, max_relative = 1e-10);
    }
}

#[test]
fn calibration_with_ell() {
    // eps * int_0^inf dt / ((1+t) ln(ell (1+t))^{1+eps}) = (ln ell)^{-eps}
    let mut s = spec(&[0.0], &[1.0], 1, 0.5, 1.0);
    s.ell = 10.0;
    let r = residue_integral(&s, &QuadOptions::default()).unwrap();
    assert_relative_eq!(r.value, 10f64.ln().powf(-0.5), max_relative = 1e-10);
}

#[test]
fn decaying_direction_vanishes_linearly() {
    let opts = QuadOptions::default();
    let values: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
        .iter()
        .map(|&eps| residue_integral(&spec(&[1.0], &[1.0], 1, eps, 1.0), &opts).unwrap().value)
        .collect();
    for w in values.windows(2) {
        let ratio = w[1] / w[0];
        assert!(ratio > 0.45 && ratio < 0.6, "{values:?}");
    }
    // direct oracle at eps = 1: int_0^inf e^{-t} / ((1+t) (1+ln(1+t))^2) dt
    let direct = simpson(
        |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let t = u / (1.0 - u);
            (-t).exp() / ((1.0 + t) * (1.0 + t.ln_1p()).powi(2)) / ((1.0 - u) * (1.0 - u))
        },
        0.0,
        1.0,
        20_000,
    );
    assert_relative_eq!(values[0], direct, max_relative = 1e-7);
}

#[test]
fn two_relevant_directions_at_index_one_diverge() {
    let r = residue_integral(&spec(&[0.0, 0.0], &[1.0, 1.0], 1, 0.25, 1.0), &QuadOptions::default()).unwrap();
    assert_eq!(r.status, Status::Divergent);
    assert!(r.evidence.len() >= SHELL_STREAK + 1);
    assert!(r.evidence.last().unwrap() >= &(SHELL_GROWTH * r.evidence[0]));
}

#[test]
fn index_two_square_against_radial_oracle() {
    // with s = ln(1+r): eps int_0^inf (1 - e^{-s}) (1+s)^{-1-eps} ds
    //                 = 1 - eps int_0^inf e^{-s} (1+s)^{-1-eps} ds
    let eps = 0.5;
    let r = residue_integral(&spec(&[0.0, 0.0], &[1.0, 1.0], 2, eps, 1.0), &QuadOptions::default()).unwrap();
    assert_eq!(r.status, Status::Converged);
    let tail = simpson(|s: f64| (-s).exp() * (1.0 + s).powf(-1.0 - eps), 0.0, 45.0, 90_000);
    let oracle = 1.0 - eps * tail;
    assert_relative_eq!(r.value, oracle, max_relative = 1e-8);
}

#[test]
fn lower_block_than_index_is_finite_and_small() {
    let opts = QuadOptions::default();
    let a = residue_integral(&spec(&[0.0], &[1.0], 2, 0.25, 1.0), &opts).unwrap();
    let b = residue_integral(&spec(&[0.0], &[1.0], 2, 0.125, 1.0), &opts).unwrap();
    assert!(a.is_converged() && b.is_converged());
    assert_relative_eq!(b.value / a.value, 0.5, max_relative = 0.1);
}

#[test]
fn negative_rate_is_rejected() {
    let err = residue_integral(&spec(&[-0.5], &[1.0], 1, 0.5, 1.0), &QuadOptions::default());
    assert!(matches!(err, Err(Error::NotIntegrable { coord: 0, .. })));
    let err = residue_integral(&spec(&[0.0, 0.0], &[1.0, 0.0], 1, 0.5, 1.0), &QuadOptions::default());
    assert!(matches!(err, Err(Error::NotIntegrable { coord: 1, .. })));
}

#[test]
fn shell_examples() {
    let opts = QuadOptions::default();
    let r = shell_integral(&spec(&[0.0], &[1.0], 1, 1.0, PI * E), -30.0, &opts).unwrap();
    assert_relative_eq!(r.value, PI * E, max_relative = 1e-10);
    let r = shell_integral(&spec(&[1.0], &[1.0], 1, 1.0, 1.0), -30.0, &opts).unwrap();
    assert!(r.value >= 0.0 && r.value <= (-28f64).exp());
    assert_relative_eq!(r.value, (-28f64).exp() - (-29f64).exp(), max_relative = 1e-8);
    let r = shell_integral(&spec(&[0.0, 0.0], &[1.0, 1.0], 1, 1.0, PI * PI * E), -30.0, &opts).unwrap();
    assert_relative_eq!(r.value, PI * PI * E * 28.5, max_relative = 1e-10);
}

#[test]
fn shell_with_decaying_outer_coordinate() {
    // int_0^inf e^{-t2/2} * |{t1 >= 0 : 28 < t1 + t2 <= 29}| dt2
    let r = shell_integral(&spec(&[0.0, 0.5], &[1.0, 1.0], 1, 1.0, 1.0), -30.0, &QuadOptions::default()).unwrap();
    let oracle = simpson(
        |t2: f64| {
            let len = (29.0 - t2).max(0.0) - (28.0 - t2).max(0.0);
            (-0.5 * t2).exp() * len
        },
        0.0,
        74.0,
        74 * 2000,
    );
    assert_relative_eq!(r.value, oracle, max_relative = 1e-7);
}

#[test]
fn restriction_examples() {
    let opts = QuadOptions::default();
    let mut s = spec(&[0.0], &[1.0], 1, 1.0, 1.0);
    s.smooth = SmoothFactor::constant(E);
    let r = restriction_integral(&s, &[0], &opts).unwrap();
    assert_relative_eq!(r.value, E, max_relative = 1e-15);

    s.smooth = SmoothFactor::constant(0.0);
    assert_eq!(restriction_integral(&s, &[0], &opts).unwrap().value, 0.0);

    // centre {z1 = 0}, radial bump of radius 1/2 in z2, weight e^m with m = 1
    let bump = BumpFunction {
        factors: vec![BumpFactor::Normal, BumpFactor::Disc { radius: 0.5 }],
    };
    let mut s = spec(&[0.0, 1.0], &[1.0, 1.0], 1, 1.0, PI * E);
    s.smooth = SmoothFactor::one().with_bump(bump.clone());
    let r = restriction_integral(&s, &[0], &opts).unwrap();
    let reference = PI * E * simpson(|x| bump.factors[1].eval(x), 0.0, 0.25, 40_000);
    assert_relative_eq!(r.value, reference, max_relative = 1e-9);
}

#[test]
fn separable_bump_limit_structure() {
    // model with sigma = 2 coordinates in psi and one bump-only coordinate
    let g = BumpFunction {
        factors: vec![BumpFactor::Disc { radius: 0.9 }; 3],
    };
    let mut s = spec(&[0.0, 0.0, 1.0], &[1.0, 1.0, 0.0], 2, 0.25, 1.0);
    s.smooth = SmoothFactor::one().with_bump(g.clone());
    let r = residue_integral(&s, &QuadOptions::default()).unwrap();
    assert!(r.is_converged(), "{r:?}");
    let limit = simpson(|x| g.factors[2].eval(x), 0.0, 0.81, 40_000);
    // finite and of the size of the limit
    assert!(r.value > 0.5 * limit && r.value < 1.5 * limit, "{} vs {limit}", r.value);
}

fn three_dim_spec() -> IntegralSpec {
    let mut s = spec(&[0.0, 0.5, 1.0], &[1.0, 1.0, 0.5], 1, 0.5, 2.0);
    s.smooth = SmoothFactor::one().with_log_weight(crate::toric_model::SmoothTerm::linear(
        3,
        2,
        crate::rational::q(-1, 5),
    ));
    s
}

#[test]
fn monte_carlo_agrees_with_deterministic() {
    let s = three_dim_spec();
    let det = residue_integral(&s, &QuadOptions::default()).unwrap();
    assert_eq!(det.engine, Engine::Deterministic);
    let mc_opts = QuadOptions {
        engine: Engine::MonteCarlo,
        mc_tol: 1e-3,
        detect: false,
        ..QuadOptions::default()
    };
    let mc = residue_integral(&s, &mc_opts).unwrap();
    assert_eq!(mc.engine, Engine::MonteCarlo);
    assert!(mc.abs_error > 0.0);
    assert!(
        (mc.value - det.value).abs() <= 3.0 * mc.abs_error + det.abs_error,
        "mc {} +- {} vs det {}",
        mc.value,
        mc.abs_error,
        det.value
    );
}

#[test]
fn repeated_runs_are_bit_identical() {
    let s = three_dim_spec();
    let opts = QuadOptions {
        engine: Engine::MonteCarlo,
        detect: false,
        mc_max_batches: 8,
        ..QuadOptions::default()
    };
    let a = residue_integral(&s, &opts).unwrap();
    let b = residue_integral(&s, &opts).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.abs_error.to_bits(), b.abs_error.to_bits());
    let d1 = residue_integral(&s, &QuadOptions::default()).unwrap();
    let d2 = residue_integral(&s, &QuadOptions::default()).unwrap();
    assert_eq!(d1.value.to_bits(), d2.value.to_bits());
}

#[test]
fn annulus_bounds_a_relevant_direction() {
    // relevant direction cut off by an annulus behaves like a bounded coordinate
    let g = BumpFunction {
        factors: vec![
            BumpFactor::Normal,
            BumpFactor::Annulus {
                margin: 0.1,
                radius: 0.8,
            },
        ],
    };
    let mut s = spec(&[0.0, 0.0], &[1.0, 1.0], 1, 0.5, 1.0);
    s.smooth = SmoothFactor::one().with_bump(g);
    let r = residue_integral(&s, &QuadOptions::default()).unwrap();
    assert!(r.is_converged(), "{r:?}");
    assert!(r.value > 0.0);
}

