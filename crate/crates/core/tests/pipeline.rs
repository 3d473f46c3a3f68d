//! Cross-module checks through the public API.

use lorenzlab_core::estimators::{estimate_lambda_growth, estimate_lambda_mc, heuristic_lambda, Method};
use lorenzlab_core::excursions::{estimate_lambda_excursion, simulate_excursions, stop_time_stats};
use lorenzlab_core::fokker_planck::{solve_all, Grid2D};
use lorenzlab_core::params::derive_constants;
use lorenzlab_core::sde::{simulate, SimConfig, System};
use lorenzlab_core::threshold::{find_threshold, PdeOracle, ThresholdConfig};
use lorenzlab_core::transforms::{from_transformed, to_transformed, State};
use lorenzlab_core::{DerivedConsts, Params};
use proptest::prelude::*;

fn consts(alpha_hat: f64) -> DerivedConsts {
    derive_constants(&Params::classic(alpha_hat)).unwrap()
}

fn theta_z(c: &DerivedConsts, window: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(System::ThetaZ, 50.0 + window, seed, c);
    cfg.t_burn = 50.0;
    cfg
}

#[test]
fn subcritical_estimators_agree() {
    let c = consts(10.0);
    let cfg = theta_z(&c, 2000.0, 11);
    let mc = estimate_lambda_mc(c.alpha, &cfg, &c, 4).unwrap();
    let gr = estimate_lambda_growth(c.alpha, &cfg, &c, 4).unwrap();
    assert_eq!(mc.sign(), Some(-1.0));
    assert!(mc.overlaps(&gr), "{mc:?} {gr:?}");
    let grid = Grid2D::around(&c, c.alpha, 128, 256).unwrap();
    let pde = solve_all(&grid, &c, c.alpha, false).unwrap().lambda;
    assert!((pde - mc.value).abs() <= mc.half_width + 0.03, "{pde} {mc:?}");
}

#[test]
fn excursion_ratio_reproduces_the_time_average() {
    let c = consts(30.0);
    let cfg = theta_z(&c, 3000.0, 4);
    let d = simulate_excursions(&cfg, &c, c.alpha).unwrap();
    let ex = estimate_lambda_excursion(&d.excursions).unwrap();
    assert_eq!(ex.method, Method::Excursion);
    // same path through the plain simulator: its third column is the running integral of F
    let mut raw = Vec::new();
    simulate(&cfg, &State::polar(0.0, 0.0, c.z_star), &c, c.alpha, &mut raw).unwrap();
    let direct = raw.last().unwrap().1[2] / (cfg.t_final - cfg.t_burn);
    let tail = d.tail.as_ref().unwrap();
    let window = d.t_end - d.t_start;
    let bound = tail.tau / window * (2.0 + tail.fhat.abs() / tail.tau.max(1e-12));
    assert!((ex.value - direct).abs() <= bound + 1e-9, "{} {direct} {bound}", ex.value);
    assert!(ex.value > 0.0);
}

#[test]
fn stopping_times_scale_diffusively_below_alpha() {
    let c = consts(400.0);
    let mut cfg = theta_z(&c, 20.0, 3);
    cfg.dt0 = 1e-5;
    cfg.adaptive = false;
    let d = simulate_excursions(&cfg, &c, c.alpha).unwrap();
    let rep = stop_time_stats(&d.excursions, c.alpha);
    let slope = rep.small_z_slope(c.alpha / 4.0, 30).unwrap();
    assert!((slope - 2.0).abs() <= 0.3, "{slope}");
    // normalised moments stay within a bounded band across levels
    let r4: Vec<f64> = rep.buckets.iter().filter(|b| b.n >= 30).map(|b| b.ratio4).collect();
    let hi = r4.iter().cloned().fold(0.0, f64::max);
    let lo = r4.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 20.0, "{r4:?}");
}

#[test]
fn coarse_pde_threshold_lies_above_the_heuristic_one() {
    let c = consts(27.7);
    let k = c.alpha_per_alpha_hat();
    let mut o = PdeOracle { c, n_theta: 32, n_z: 64 };
    let r = find_threshold(&mut o, &ThresholdConfig::new(20.0 * k, 40.0 * k, 0.5 * k), &c).unwrap();
    assert!(r.converged);
    let h = heuristic_lambda(r.alpha_star, &c, 1e-10);
    assert!(h > 0.0, "heuristic already positive at the grid threshold {}", r.alpha_star_hat);
}

#[test]
fn deterministic_full_run_is_reproducible() {
    let c = consts(10.0);
    let mut cfg = SimConfig::new(System::TransformedFull, 20.0, 8, &c);
    cfg.t_burn = 0.0;
    let init = State::transformed(0.6, -0.8, c.z_star);
    let mut a = Vec::new();
    let mut b = Vec::new();
    simulate(&cfg, &init, &c, c.alpha, &mut a).unwrap();
    simulate(&cfg, &init, &c, c.alpha, &mut b).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(p, q)| p.0 == q.0 && p.1 == q.1));
}

proptest! {
    #[test]
    fn original_chart_round_trip(x in -50.0f64..50.0, y in -50.0f64..50.0, z in -50.0f64..80.0, ah in 0.1f64..100.0) {
        let c = consts(ah);
        let s = State::original(x, y, z);
        let back = from_transformed(&to_transformed(&s, &c).unwrap(), &c).unwrap();
        for (u, v) in s.coords.iter().zip(back.coords.iter()) {
            prop_assert!((u - v).abs() <= 1e-10 * (1.0 + u.abs()));
        }
    }
}
