use cityroad::dispersion::{compute_c_star, ExponentialSupersolution};
use cityroad::front_speed::{estimate_speed, estimate_speed_between};
use cityroad::lattice_sim::{
    check_long_time_convergence, init_state, simulate, simulate_from, InitialData,
    SimulationConfig,
};
use cityroad::model::{total_mass, EdgeGrid, Parameters};
use proptest::prelude::*;

fn unit() -> Parameters {
    Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap()
}

fn cfg(t: f64) -> SimulationConfig {
    SimulationConfig {
        t_final: t,
        c_upper_guess: 0.75,
        ..SimulationConfig::default()
    }
}

#[test]
fn left_block_front_and_long_time_limit() {
    let p = unit();
    let c_star = compute_c_star(&p).unwrap().c_star;
    let traj = simulate(&InitialData::LeftBlock, &SimulationConfig::for_parameters(&p, 80.0), &p).unwrap();
    assert!(!traj.is_contaminated());
    assert!(check_long_time_convergence(&traj, &p) <= 0.02);

    let base = estimate_speed_between(&traj, 0.5, 30.0, 60.0).unwrap();
    assert!(base.is_ballistic());
    assert!((base.fitted_speed - c_star).abs() / c_star <= 0.05);
    for th in [0.3, 0.7] {
        let other = estimate_speed_between(&traj, th, 30.0, 60.0).unwrap();
        assert!((other.fitted_speed - base.fitted_speed).abs() <= 0.02 * base.fitted_speed);
    }

    // monotone front at the final time: nonincreasing to the right of the block
    let s = traj.final_state();
    let start = s.index_of(0).unwrap();
    assert!(s.rho[start..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn steady_start_stays_steady() {
    let p = unit();
    let traj = simulate(&InitialData::Constant { v: 1.0, rho: 1.0 }, &cfg(20.0), &p).unwrap();
    let dev = check_long_time_convergence(&traj, &p);
    // only the absorbing window edge perturbs the state, and that decays inward
    assert!(dev <= 1e-6, "{dev}");
}

#[test]
fn sine_bump_seed_invades() {
    let p = unit();
    let data = InitialData::SineBump { n: 5, amplitude: 1e-3 };
    let traj = simulate(&data, &cfg(120.0), &p).unwrap();
    let dev = check_long_time_convergence(&traj, &p);
    assert!(dev <= 0.05, "deviation {dev}");
}

#[test]
fn reaction_free_mass_is_conserved() {
    let p = Parameters::new(1.0, 1.0, 1.0, 0.0).unwrap();
    let traj = simulate(
        &InitialData::LeftBlock,
        &SimulationConfig {
            t_final: 10.0,
            m: 64,
            ..SimulationConfig::default()
        },
        &p,
    )
    .unwrap();
    assert!(traj.mass_drift() <= 1e-5);
    assert!((traj.mass[0] - total_mass(&traj.snapshots[0])).abs() == 0.0);
}

#[test]
fn supersolution_start_is_nonincreasing() {
    let p = unit();
    let c = cfg(10.0).with_monotone_dt(&p);
    let traj = simulate(&InitialData::Constant { v: 1.5, rho: 1.5 }, &c, &p).unwrap();
    for w in traj.snapshots.windows(2) {
        for (a, b) in w[0].rho.iter().zip(&w[1].rho) {
            assert!(b <= &(a + 1e-12));
        }
        for (e, f) in w[0].edges.iter().zip(&w[1].edges) {
            for (a, b) in e.values().iter().zip(f.values()) {
                assert!(b <= &(a + 1e-12));
            }
        }
    }
}

#[test]
fn exponential_supersolution_dominates() {
    let p = unit();
    let res = compute_c_star(&p).unwrap();
    let rho: Vec<f64> = (-3..=3).map(|j: i64| 0.5 * (-(j * j) as f64 / 2.0).exp()).collect();
    let c = cfg(10.0).with_monotone_dt(&p);
    let data = InitialData::Custom {
        j_min: -3,
        rho: rho.clone(),
        edges: vec![EdgeGrid::zeros(c.m); 6],
    };
    let theta = (-3..=3)
        .zip(&rho)
        .map(|(j, r)| r * (res.mu_star * j as f64).exp())
        .fold(0.0, f64::max);
    let sup = ExponentialSupersolution::new(&res, theta, &p);
    let traj = simulate(&data, &c, &p).unwrap();
    for s in &traj.snapshots {
        for (i, r) in s.rho.iter().enumerate() {
            let j = s.j_min + i as i64;
            assert!(*r <= sup.rho(j, s.time) * (1.0 + 1e-9) + 1e-300, "t = {}, j = {j}", s.time);
        }
        for (k, e) in s.edges.iter().enumerate() {
            let j = s.j_min + k as i64;
            for (i, v) in e.values().iter().enumerate() {
                let bound = sup.road(j, s.time, e.x(i));
                assert!(*v <= bound * (1.0 + 1e-9) + 1e-300, "t = {}, road {j}", s.time);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn translation_equivariance(j0 in -5_i64..5, amp in 0.05..1.0_f64) {
        let p = unit();
        let c = cfg(2.0);
        let a = simulate(&InitialData::PointMass { j0, amplitude: amp }, &c, &p).unwrap();
        let b = simulate(&InitialData::PointMass { j0: j0 + 1, amplitude: amp }, &c, &p).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            prop_assert_eq!(&x.translated(1), y);
        }
    }

    #[test]
    fn ordered_data_stay_ordered(
        lo in prop::collection::vec(0.0..1.0_f64, 4),
        lift in prop::collection::vec(0.0..0.5_f64, 4),
        road in 0.0..1.0_f64,
    ) {
        let p = unit();
        let c = cfg(3.0).with_monotone_dt(&p);
        let hi: Vec<f64> = lo.iter().zip(&lift).map(|(a, b)| a + b).collect();
        let mk = |rho: Vec<f64>, v: f64| InitialData::Custom {
            j_min: 0,
            rho,
            edges: vec![EdgeGrid::constant(c.m, v); 3],
        };
        let (sl, rl) = init_state(&mk(lo.clone(), road), &c, &p).unwrap();
        let (su, ru) = init_state(&mk(hi, road + 0.1), &c, &p).unwrap();
        let a = simulate_from(sl, rl, &c, &p).unwrap();
        let b = simulate_from(su, ru, &c, &p).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            prop_assert!(x.min_value() >= -1e-12);
            for (r, s) in x.rho.iter().zip(&y.rho) {
                prop_assert!(s - r >= -1e-10);
            }
        }
    }
}

#[test]
fn speed_estimate_is_translation_invariant() {
    let p = unit();
    let a = simulate(&InitialData::PointMass { j0: 0, amplitude: 1.0 }, &cfg(30.0), &p).unwrap();
    let b = simulate(&InitialData::PointMass { j0: 7, amplitude: 1.0 }, &cfg(30.0), &p).unwrap();
    let sa = estimate_speed(&a, 0.5, (0.5, 1.0)).unwrap();
    let sb = estimate_speed(&b, 0.5, (0.5, 1.0)).unwrap();
    assert!((sa.fitted_speed - sb.fitted_speed).abs() < 1e-12);
    assert!((sb.intercept - sa.intercept - 7.0).abs() < 1e-9);
}
