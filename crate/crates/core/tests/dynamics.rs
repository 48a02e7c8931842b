use std::f64::consts::TAU;

use phonmem::dynamics::*;
use phonmem::protocol::DeviceParams;
use proptest::prelude::*;

#[test]
fn parametric_profiles() {
    let flat = OccupationProfile::Parametric {
        baseline: 0.1,
        amplitude: 0.0,
        rise_time: 1e-5,
        fall_time: 1e-3,
    };
    for t in [0.0, 1e-6, 1e-3, 1.0] {
        assert_eq!(thermal_occupation(&flat, t).unwrap(), 0.1);
    }
    let p = OccupationProfile::Parametric {
        baseline: 0.1,
        amplitude: 0.1,
        rise_time: 1e-5,
        fall_time: 1e-3,
    };
    let mut best = (0.0, f64::MIN);
    for i in 0..200_000 {
        let t = 1e-7 * 1.0001f64.powi(i);
        let n = thermal_occupation(&p, t).unwrap();
        if n > best.1 {
            best = (t, n);
        }
    }
    let peak = p.parametric_peak().unwrap();
    assert!(peak > 1e-5 && peak < 1e-3);
    assert!((best.0 / peak - 1.0).abs() < 1e-3, "{} vs {peak}", best.0);
}

#[test]
fn table_profiles() {
    let flat = OccupationProfile::table(vec![(1e-6, 0.2), (1e-3, 0.2)]).unwrap();
    assert_eq!(thermal_occupation(&flat, 30e-6).unwrap(), 0.2);
    let t = OccupationProfile::table(vec![(1e-6, 0.1), (1e-4, 0.3)]).unwrap();
    // log-linear: 1e-5 lies halfway in log time
    assert!((thermal_occupation(&t, 1e-5).unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(thermal_occupation(&t, 0.0).unwrap(), 0.1);
    assert_eq!(thermal_occupation(&t, 1.0).unwrap(), 0.3);
    assert!(OccupationProfile::table(vec![]).is_err());
    assert!(OccupationProfile::table(vec![(1e-3, 0.1), (1e-4, 0.1)]).is_err());
    assert!(OccupationProfile::table(vec![(1e-3, -0.1)]).is_err());
}

#[test]
fn csv_ingestion() {
    let text = "delay_s,occupation\n1e-6,0.1\n1e-3,0.2\n";
    let p = OccupationProfile::from_csv_reader(text.as_bytes()).unwrap();
    assert_eq!(thermal_occupation(&p, 1e-3).unwrap(), 0.2);
    assert!(OccupationProfile::from_csv_reader("t,n\n1,2\n".as_bytes()).is_err());
    let shipped = OccupationProfile::from_csv_path(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/occupation_fig2b.csv"
    ))
    .unwrap();
    let peak = (1..400)
        .map(|i| thermal_occupation(&shipped, 1e-6 * 1.03f64.powi(i)).unwrap())
        .fold(0.0, f64::max);
    assert!(peak < 0.2 && thermal_occupation(&shipped, 1e-6).unwrap() >= 0.1);
}

#[test]
fn optomechanical_damping() {
    let d = DeviceParams::REFERENCE;
    assert_eq!(gamma_opt(0.0, &d).unwrap(), 0.0);
    let g1 = gamma_opt(1.0, &d).unwrap();
    assert!((g1 / TAU - 4.0 * 780e3f64.powi(2) / 2300e6).abs() < 1e-9);
    assert!((g1 / TAU - 1.06e3).abs() < 0.01e3);
    assert_eq!(gamma_opt(2.0, &d).unwrap(), 2.0 * g1);
    let gm = d.gamma_m;
    assert_eq!(bunching_rate_theory(0.0, &d, gm).unwrap(), gm);
    assert!((bunching_rate_theory(0.75, &d, gm).unwrap() - (gm + 0.75 * g1)).abs() < 1e-9);
    assert!(gamma_opt(-1.0, &d).is_err());
}

#[test]
fn tls_steady_state() {
    let p = TlsParams::REFERENCE;
    assert_eq!(tls_tau_steady(0.0, &p).unwrap(), 16e-6);
    assert_eq!(tls_tau_steady(f64::INFINITY, &p).unwrap(), 112e-6);
    assert!((tls_tau_steady(1e12, &p).unwrap() - 112e-6).abs() < 1e-15);
    let q = TlsParams {
        rate_ratio: 0.3,
        ..p
    };
    assert!((tls_tau_steady(0.3, &q).unwrap() - 64e-6).abs() < 1e-18);
    assert!(tls_tau_steady(
        1.0,
        &TlsParams {
            tau_min: 2e-5,
            tau_max: 1e-5,
            rate_ratio: 1.0
        }
    )
    .is_err());
}

#[test]
fn tls_ode() {
    let ode = TlsOde {
        g_def: 2e3,
        gamma_def: 1e3,
        tau_max: 112e-6,
    };
    let off = PiecewiseDrive::constant(0.0).unwrap();
    let traj = tls_tau_evolve(&off, &ode, 112e-6, 3e-3, 1e-6).unwrap();
    for &(t, tau) in traj.iter().step_by(300) {
        assert!((tau - 112e-6 * (-1e3 * t).exp()).abs() < 1e-14);
    }

    let n = 0.8;
    let on = PiecewiseDrive::constant(n).unwrap();
    let rate = ode.g_def * n + ode.gamma_def;
    let fixed = ode.fixed_point(n);
    let traj = tls_tau_evolve(&on, &ode, 0.0, 20e-3, 1e-6).unwrap();
    let (t_end, tau_end) = *traj.last().unwrap();
    assert!((tau_end - fixed).abs() < 1e-6 * fixed);
    let exact = fixed * (1.0 - (-rate * t_end).exp());
    assert!((traj[500].1 - fixed * (1.0 - (-rate * traj[500].0).exp())).abs() < 1e-14);
    assert!((tau_end - exact).abs() < 1e-14);

    let half = tls_tau_evolve(&on, &ode, 0.0, 20e-3, 0.5e-6).unwrap();
    assert!((half.last().unwrap().1 - tau_end).abs() < 1e-8);

    assert!(tls_tau_evolve(&on, &ode, 0.0, 1e-3, 1e-2).is_err());

    // the rate equation fixed point lacks the tau_min offset of the steady-state model
    let steady = TlsParams {
        tau_min: 16e-6,
        tau_max: 112e-6,
        rate_ratio: ode.gamma_def / ode.g_def,
    };
    let s = tls_tau_steady(n, &steady).unwrap();
    assert!((s - fixed - 16e-6 * (1.0 - n / (n + steady.rate_ratio))).abs() < 1e-15);
    assert!((s - fixed).abs() > 1e-6);
    let zero_min = TlsParams {
        tau_min: 1e-300,
        ..steady
    };
    assert!((tls_tau_steady(n, &zero_min).unwrap() - fixed).abs() < 1e-15);
}

#[test]
fn piecewise_drive_switches() {
    let ode = TlsOde {
        g_def: 1e3,
        gamma_def: 1e3,
        tau_max: 100e-6,
    };
    let drive = PiecewiseDrive::new(vec![(0.0, 1.0), (5e-3, 0.0)]).unwrap();
    assert_eq!(drive.at(4.9e-3), 1.0);
    assert_eq!(drive.at(5e-3), 0.0);
    let traj = tls_tau_evolve(&drive, &ode, 0.0, 10e-3, 1e-6).unwrap();
    let at_switch = traj[5000].1;
    assert!((at_switch - 50e-6 * (1.0 - (-10.0f64).exp())).abs() < 1e-12);
    assert!((traj.last().unwrap().1 - at_switch * (-5.0f64).exp()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn steady_monotone_and_bounded(a in 0.0f64..100.0, b in 0.0f64..100.0, r in 0.01f64..10.0) {
        let p = TlsParams { rate_ratio: r, ..TlsParams::REFERENCE };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let tl = tls_tau_steady(lo, &p).unwrap();
        let th = tls_tau_steady(hi, &p).unwrap();
        prop_assert!(tl <= th);
        prop_assert!(tl >= p.tau_min && th <= p.tau_max);
    }

    #[test]
    fn damping_is_affine(n in 0.0f64..10.0, m in 0.0f64..10.0) {
        let d = DeviceParams::REFERENCE;
        let lhs = gamma_opt(n + m, &d).unwrap();
        let rhs = gamma_opt(n, &d).unwrap() + gamma_opt(m, &d).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        let b = bunching_rate_theory(n, &d, d.gamma_m).unwrap();
        prop_assert!((b - d.gamma_m - gamma_opt(n, &d).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn table_nodes_exact(raw in proptest::collection::vec(0.0f64..1.0, 2..12)) {
        let points: Vec<(f64, f64)> = raw.iter().enumerate().map(|(i, &n)| (1e-6 * 3f64.powi(i as i32), n)).collect();
        let p = OccupationProfile::table(points.clone()).unwrap();
        for (t, n) in points {
            prop_assert_eq!(thermal_occupation(&p, t).unwrap(), n);
        }
    }
}
