mod support;

use maglev_core::plant::{self, rk4_pair, state_derivative, GapLimits, PairFlags};
use maglev_core::{ActuatorParams, PairState, PhysicalConstants, PlantState, PAIRS};
use proptest::prelude::*;

const Z_STAR: f64 = 0.004;

fn consts() -> PhysicalConstants {
    PhysicalConstants::default()
}

/// Equilibrium current and voltage of every actuator, from the force balance
/// and Ohm's law alone.
fn oracle_equilibrium() -> [(f64, f64); PAIRS] {
    let mu0 = 4.0 * std::f64::consts::PI * 1e-7;
    ActuatorParams::table().map(|p| {
        let i = support::equilibrium_current(p.area, p.turns, mu0, 3.0, 9.8, Z_STAR);
        (i, p.resistance * i)
    })
}

#[test]
fn equilibrium_values_match_hand_solution() {
    let eq = oracle_equilibrium();
    // i*_1 = 9.121 A and u*_1 = 45.6 V for actuator 1.
    assert!((eq[0].0 - 9.121).abs() < 5e-4, "{}", eq[0].0);
    assert!((eq[0].1 - 45.6).abs() < 5e-2, "{}", eq[0].1);
    let c = consts();
    for (p, (i, u)) in ActuatorParams::table().iter().zip(eq) {
        assert!(i <= p.i_max && u <= p.u_max, "equilibrium outside limits");
        assert!((p.equilibrium_current(&c, Z_STAR) - i).abs() < 1e-12);
        assert!((p.equilibrium_voltage(&c, Z_STAR) - u).abs() < 1e-10);
    }
}

#[test]
fn equilibrium_residual_is_negligible() {
    let eq = oracle_equilibrium();
    let pairs = eq.map(|(i, _)| PairState { z: Z_STAR, v: 0.0, i });
    let u = eq.map(|(_, u)| u);
    let d = state_derivative(&ActuatorParams::table(), &consts(), &pairs, &u).unwrap();
    for r in d {
        let worst = r.dz.abs().max(r.dv.abs()).max(r.di.abs());
        assert!(worst < 1e-9, "{r:?}");
    }
}

#[test]
fn unpowered_fall_follows_constant_acceleration() {
    let c = consts();
    let p = ActuatorParams::table()[2];
    let mut s = PairState { z: 0.01, v: 0.0, i: 0.0 };
    let dt = 1e-5;
    for k in 1..=1000 {
        s = rk4_pair(&p, &c, &s, 0.0, dt).unwrap();
        let t = k as f64 * dt;
        // Gravity closes the gap in this model.
        assert!((s.z - (0.01 - 0.5 * 9.8 * t * t)).abs() < 1e-9, "t = {t}");
        assert!((s.v + 9.8 * t).abs() < 1e-9);
        assert_eq!(s.i, 0.0);
    }
}

fn trajectory(dt: f64, horizon: f64) -> Vec<PairState> {
    let c = consts();
    let p = ActuatorParams::table()[0];
    let mut s = PairState { z: 0.0042, v: 0.0, i: 8.0 };
    let u = 1.05 * p.equilibrium_voltage(&c, Z_STAR);
    let steps = (horizon / dt).round() as usize;
    let mut out = vec![s];
    for _ in 0..steps {
        s = rk4_pair(&p, &c, &s, u, dt).unwrap();
        out.push(s);
    }
    out
}

fn max_deviation(coarse: &[PairState], fine: &[PairState]) -> f64 {
    // Compare at the coarse grid; scale each component to comparable size.
    coarse
        .iter()
        .zip(fine.iter().step_by(2))
        .map(|(a, b)| {
            ((a.z - b.z) / 1e-3).abs().max(((a.v - b.v) / 1e-1).abs()).max((a.i - b.i).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn rk4_error_shrinks_sixteenfold() {
    let horizon = 0.02;
    let dt = 2e-4;
    let a = trajectory(dt, horizon);
    let b = trajectory(dt / 2.0, horizon);
    let c = trajectory(dt / 4.0, horizon);
    let ratio = max_deviation(&a, &b) / max_deviation(&b, &c);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn pairs_two_and_four_permute() {
    let c = consts();
    let params = ActuatorParams::table();
    let pairs = [
        PairState { z: 0.003, v: 0.01, i: 7.0 },
        PairState { z: 0.005, v: -0.02, i: 8.5 },
        PairState { z: 0.004, v: 0.0, i: 3.0 },
        PairState { z: 0.006, v: 0.03, i: 5.0 },
    ];
    let u = [40.0, 35.0, 30.0, 45.0];
    let d = state_derivative(&params, &c, &pairs, &u).unwrap();
    fn swap<T: Copy>(a: [T; 4]) -> [T; 4] {
        [a[0], a[3], a[2], a[1]]
    }
    let d2 = state_derivative(&swap(params), &c, &swap(pairs), &swap(u)).unwrap();
    assert_eq!(swap(d), d2);
}

#[test]
fn guards_keep_state_in_range() {
    let c = consts();
    let params = ActuatorParams::table();
    let limits = GapLimits::default();
    let mut s = PlantState {
        pairs: [
            PairState { z: 0.0002, v: -1.0, i: 0.0 },
            PairState { z: 0.049, v: 1.0, i: 0.0 },
            PairState { z: 0.004, v: 0.0, i: 6.9 },
            PairState { z: 0.004, v: 0.0, i: 0.0 },
        ],
        t: 0.0,
        flags: [PairFlags::default(); PAIRS],
    };
    for _ in 0..2000 {
        s = plant::step(&params, &c, &limits, &s, &[0.0, 0.0, 200.0, -5.0], 1e-5).unwrap();
        for k in 0..PAIRS {
            assert!(s.pairs[k].z >= limits.z_min);
            assert!((0.0..=params[k].i_max).contains(&s.pairs[k].i));
        }
    }
    assert!(s.flags[0].contact);
    assert!(s.flags[1].dropped);
    assert!(s.flags[2].voltage_clamped && s.flags[2].current_clamped);
    assert!(s.flags[3].voltage_clamped);
}

fn any_pair() -> impl Strategy<Value = (PairState, f64)> {
    (1e-4..0.05f64, -1.0..1.0f64, 0.0..10.0f64, 0.0..70.0f64).prop_map(|(z, v, i, u)| (PairState { z, v, i }, u))
}

proptest! {
    #[test]
    fn magnet_only_pulls(k in 0..PAIRS, (s, u) in any_pair()) {
        let c = consts();
        let p = ActuatorParams::table()[k];
        let f = plant::magnetic_force(&p, &c, s.i, s.z).unwrap();
        prop_assert!(f >= 0.0);
        let r = plant::pair_derivative(&p, &c, &s, u).unwrap();
        prop_assert!(r.dv >= -c.g);
    }

    #[test]
    fn stepping_is_deterministic((a, ua) in any_pair(), (b, ub) in any_pair()) {
        let c = consts();
        let params = ActuatorParams::table();
        let s = PlantState { pairs: [a, b, a, b], t: 0.0, flags: [PairFlags::default(); PAIRS] };
        let u = [ua, ub, ua, ub];
        let x = plant::step(&params, &c, &GapLimits::default(), &s, &u, 1e-5).unwrap();
        let y = plant::step(&params, &c, &GapLimits::default(), &s, &u, 1e-5).unwrap();
        prop_assert_eq!(x, y);
    }
}
