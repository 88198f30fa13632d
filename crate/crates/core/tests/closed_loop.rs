mod support;

use maglev_core::control::{level_error, ControllerMemory};
use maglev_core::metrics::{level_metrics, pair_metrics, settling_band, RISE_FRACTION};
use maglev_core::plant::{self, PairFlags};
use maglev_core::sim::{run, run_pair_comparison};
use maglev_core::{Config, Outcome, PairState, PlantState, Scenario, PAIRS};
use proptest::prelude::*;
use support::Decay;

const DT: f64 = 5e-4;

fn decay() -> Decay {
    Decay { setpoint: 0.004, a: 0.005, s: 20.0, w: 2.0 * std::f64::consts::PI * 15.0 }
}

#[test]
fn decaying_oscillation_metrics_match_closed_form() {
    let d = decay();
    let m = pair_metrics(&d.series(DT, 1000), d.setpoint, d.setpoint + d.a);

    let rise = d.rise_time(RISE_FRACTION);
    let got = m.rise_time.unwrap();
    assert!(got >= rise && got - rise < DT, "rise {got} vs {rise}");

    let settle = d.settling_time(settling_band(d.setpoint));
    let got = m.settling_time.unwrap();
    assert!((got - settle).abs() <= DT, "settling {got} vs {settle}");

    // Sampling can only miss the top of the trough, never exceed it.
    let os = d.overshoot();
    let tp = d.peak_time(1);
    let floor = d.offset(tp - DT).abs().min(d.offset(tp + DT).abs());
    assert!(m.max_abs_overshoot <= os + 1e-15 && m.max_abs_overshoot >= floor, "{} vs {os}", m.max_abs_overshoot);
}

#[test]
fn metrics_ignore_time_origin() {
    let d = decay();
    let s = d.series(DT, 800);
    let shifted: Vec<(f64, f64)> = s.iter().map(|(t, z)| (t + 3.25, *z)).collect();
    let a = pair_metrics(&s, d.setpoint, d.setpoint + d.a);
    let b = pair_metrics(&shifted, d.setpoint, d.setpoint + d.a);
    assert!((a.rise_time.unwrap() - b.rise_time.unwrap()).abs() < 1e-9);
    assert!((a.settling_time.unwrap() - b.settling_time.unwrap()).abs() < 1e-9);
    assert_eq!(a.max_abs_overshoot, b.max_abs_overshoot);
}

proptest! {
    #[test]
    fn level_statistics_match_two_pass(xs in prop::collection::vec(-1e-3..1e-3f64, 1..400)) {
        let m = level_metrics(&xs);
        let (mean, sd) = support::two_pass(&xs);
        // Relative to the size of the data; the mean itself may cancel to ~0.
        let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!((m.mean - mean).abs() <= 1e-12 * scale);
        prop_assert!((m.std_dev - sd).abs() <= 1e-12 * sd.max(scale));
        prop_assert_eq!(m.largest_abs, xs.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    }

    #[test]
    fn monotone_approach_never_overshoots(z0 in 0.0045..0.02f64, tau in 0.005..0.1f64) {
        let s: Vec<(f64, f64)> = (0..600).map(|k| {
            let t = k as f64 * DT;
            (t, 0.004 + (z0 - 0.004) * (-t / tau).exp())
        }).collect();
        prop_assert_eq!(pair_metrics(&s, 0.004, z0).max_abs_overshoot, 0.0);
    }

    #[test]
    fn commands_respect_voltage_limits(z in prop::array::uniform4(1e-4..0.05f64), prev in prop::array::uniform4(-0.05..0.05f64)) {
        let cfg = Config::reference();
        let stack = cfg.stack().unwrap();
        let mem = ControllerMemory { prev_error: prev, primed: true, ..Default::default() };
        let (u, _, _) = stack.control_step(&mem, &z).unwrap();
        for k in 0..PAIRS {
            prop_assert!(u[k] >= 0.0 && u[k] <= cfg.actuators[k].u_max);
        }
        let (again, _, _) = stack.control_step(&mem, &z).unwrap();
        prop_assert_eq!(u, again);
    }
}

#[test]
fn coplanar_gaps_leave_leveler_idle() {
    let cfg = Config::reference();
    let stack = cfg.stack().unwrap();
    let mut mem = ControllerMemory::default();
    // Multiples of 2^-10 m so the sums are exact.
    let q = (2.0f64).powi(-10);
    for z in [[3.0 * q, 5.0 * q, 6.0 * q, 4.0 * q], [4.0 * q, 5.0 * q, 5.0 * q, 4.0 * q]] {
        assert_eq!(level_error(&z), 0.0);
        let (_, next, d) = stack.control_step(&mem, &z).unwrap();
        mem = next;
        assert_eq!(d.w, 0.0);
    }
}

#[test]
fn leveler_pushes_level_error_back() {
    // l > 0 with everything else at equilibrium: one control period later the
    // level acceleration must be lower with the leveler than without it.
    let cfg = Config::reference();
    let plant_model = cfg.plant();
    let c = cfg.physics;
    let z = [0.0041, 0.004, 0.0041, 0.004];
    let level_accel = |pd: bool| {
        let mut cfg = cfg.clone();
        cfg.controller.pd_enabled = pd;
        let stack = cfg.stack().unwrap();
        let mem = ControllerMemory {
            primed: true,
            prev_error: z.map(|zk| 0.004 - zk),
            prev_level: level_error(&z),
            ..Default::default()
        };
        let (u, _, _) = stack.control_step(&mem, &z).unwrap();
        let mut s = PlantState {
            pairs: std::array::from_fn(|k| PairState {
                z: z[k],
                v: 0.0,
                i: cfg.actuators[k].equilibrium_current(&c, 0.004),
            }),
            t: 0.0,
            flags: [PairFlags::default(); PAIRS],
        };
        for _ in 0..50 {
            s = plant::step(&plant_model.params, &c, &plant_model.limits, &s, &u, 1e-5).unwrap();
        }
        let d = plant::state_derivative(&plant_model.params, &c, &s.pairs, &u).unwrap();
        d[0].dv + d[2].dv - d[1].dv - d[3].dv
    };
    assert!(level_accel(true) < level_accel(false));
}

#[test]
fn reference_runs_satisfy_sample_invariants() {
    let cfg = Config::reference();
    let stack = cfg.stack().unwrap();
    for name in ["setting1", "setting2", "setting3"] {
        let sc = cfg.scenario(name).unwrap();
        let r = run(sc, &stack, &cfg.plant()).unwrap();
        assert_eq!(r.samples.len(), (sc.duration / cfg.controller.period).floor() as usize + 1);
        assert_eq!(r.outcome, Outcome::Stabilized, "{name}");
        let vmax = 2.0;
        for (n, s) in r.samples.iter().enumerate() {
            assert!((s.t - n as f64 * cfg.controller.period).abs() < 1e-12);
            let l = s.z[0] + s.z[2] - s.z[1] - s.z[3];
            assert!((s.l - l).abs() <= 1e-15 * l.abs().max(1e-3));
            for k in 0..PAIRS {
                let a = &cfg.actuators[k];
                assert!(s.u[k] >= 0.0 && s.u[k] <= a.u_max);
                assert!(s.i[k] >= 0.0 && s.i[k] <= a.i_max);
                assert!(s.v[k].abs() < vmax);
            }
            if n > 0 {
                let prev = &r.samples[n - 1];
                for k in 0..PAIRS {
                    assert!((s.z[k] - prev.z[k]).abs() <= vmax * cfg.controller.period + 1e-9);
                }
            }
        }
    }
}

#[test]
fn zero_voltage_closes_every_gap() {
    // Unpowered, gravity pulls each floater into its magnet in this model.
    let mut cfg = Config::reference();
    for m in cfg.controller.main.iter_mut() {
        m.g_u = Some(1e-12);
    }
    for s in cfg.controller.supervisor.iter_mut() {
        s.g_max = 1.0;
    }
    cfg.controller.pd_enabled = false;
    let sc = Scenario { duration: 0.1, ..cfg.scenario("setting1").unwrap().clone() };
    let r = run(&sc, &cfg.stack().unwrap(), &cfg.plant()).unwrap();
    assert_eq!(r.outcome, Outcome::Contact);
}

#[test]
fn comparison_is_repeatable_bit_for_bit() {
    let cfg = Config::reference();
    let stack = cfg.stack().unwrap();
    let sc = Scenario { duration: 0.1, ..cfg.scenario("setting1").unwrap().clone() };
    let (a_on, a_off) = run_pair_comparison(&sc, &stack, &cfg.plant()).unwrap();
    let (b_on, b_off) = run_pair_comparison(&sc, &stack, &cfg.plant()).unwrap();
    assert_eq!(a_on, b_on);
    assert_eq!(a_off, b_off);
    assert!(a_on.max_abs_level() <= a_off.max_abs_level());
}
