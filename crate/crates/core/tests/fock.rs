use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use phonmem::fock::*;
use phonmem::Error;

fn space(dims: &[usize]) -> FockSpace {
    FockSpace::new(dims.to_vec()).unwrap()
}

fn basis(space: &FockSpace, occ: &[usize]) -> DensityMatrix {
    let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
    amps[space.index(occ).unwrap()] = C64::new(1.0, 0.0);
    DensityMatrix::from_pure(space.clone(), &amps).unwrap()
}

fn geometric_mean(nbar: f64, dim: usize) -> f64 {
    let q = nbar / (1.0 + nbar);
    let z: f64 = (0..dim).map(|k| q.powi(k as i32)).sum();
    (0..dim).map(|k| k as f64 * q.powi(k as i32)).sum::<f64>() / z
}

#[test]
fn vacuum_product() {
    let s = space(&[6, 6]);
    let rho = build_state(&s, &[ModePrep::Vacuum, ModePrep::Vacuum]).unwrap();
    assert!((rho.population(&[0, 0]).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn thermal_matches_truncated_geometric() {
    let s = space(&[6]);
    let rho = build_state(&s, &[ModePrep::Thermal(0.1)]).unwrap();
    let stats = mode_stats(&rho, 0).unwrap();
    assert!((stats.mean - geometric_mean(0.1, 6)).abs() < 1e-12);
    // the quoted 0.0909 is the Boltzmann ratio n/(n+1); the truncated mean stays near 0.1
    let ratio = stats.probabilities[1] / stats.probabilities[0];
    assert!((ratio - 0.0909).abs() < 1e-4);
    assert!((stats.mean - 0.1).abs() < 1e-4);
    let s8 = space(&[8]);
    let rho8 = build_state(&s8, &[ModePrep::Thermal(0.1)]).unwrap();
    assert!((mode_stats(&rho8, 0).unwrap().mean - 0.1).abs() < 1e-4);
}

#[test]
fn coherent_poisson_ratio() {
    let s = space(&[6]);
    let rho = build_state(&s, &[ModePrep::Coherent(C64::new(0.2, 0.0))]).unwrap();
    let p = mode_stats(&rho, 0).unwrap().probabilities;
    assert!((p[1] / p[0] - 0.04).abs() < 1e-12);
    let rho = build_state(&s, &[ModePrep::Coherent(C64::new(0.0, 0.3))]).unwrap();
    let stats = mode_stats(&rho, 0).unwrap();
    // truncated Poisson mean
    let w: Vec<f64> = (0..6)
        .scan(1.0, |acc, k| {
            if k > 0 {
                *acc *= 0.09 / k as f64;
            }
            Some(*acc)
        })
        .collect();
    let mean = w.iter().enumerate().map(|(k, x)| k as f64 * x).sum::<f64>() / w.iter().sum::<f64>();
    assert!((stats.mean - mean).abs() < 1e-12);
    assert!((stats.mean - 0.09).abs() < 1e-6);
    assert!((stats.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn build_state_errors() {
    let s = space(&[4, 4]);
    assert!(matches!(
        build_state(&s, &[ModePrep::Vacuum]),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(build_state(&s, &[ModePrep::Thermal(-0.1), ModePrep::Vacuum]).is_err());
}

#[test]
fn squeeze_on_vacuum() {
    let s = space(&[6, 6]);
    let p_b = 0.002;
    let rho = apply_two_mode_squeeze(&DensityMatrix::vacuum(s.clone()), (0, 1), p_b, 0.7).unwrap();
    let p11 = rho.population(&[1, 1]).unwrap();
    // tanh^2 sech^2 with tanh^2 = p_b
    assert!((p11 - p_b * (1.0 - p_b)).abs() < 1e-12);
    let ratio = rho.element(&[1, 1], &[0, 0]).unwrap() / rho.population(&[0, 0]).unwrap();
    assert!((ratio.norm() - p_b.sqrt()).abs() < 1e-12);
    assert!((ratio.arg() - 0.7).abs() < 1e-10);

    let same = apply_two_mode_squeeze(&rho, (0, 1), 0.0, 0.3).unwrap();
    assert_eq!(same, rho);
    assert!(apply_two_mode_squeeze(&rho, (0, 1), 1.0, 0.0).is_err());
    assert!(apply_two_mode_squeeze(&rho, (0, 0), 0.1, 0.0).is_err());
}

#[test]
fn squeeze_leakage_guard() {
    let s = space(&[3, 3]);
    let err = apply_two_mode_squeeze(&DensityMatrix::vacuum(s), (0, 1), 0.3, 0.0).unwrap_err();
    assert!(matches!(err, Error::TruncationLeakage { .. }));
}

#[test]
fn beamsplitter_cases() {
    let s = space(&[4, 4]);
    let one = basis(&s, &[1, 0]);
    assert_eq!(apply_beamsplitter(&one, (0, 1), 0.0, 0.0).unwrap(), one);
    let out = apply_beamsplitter(&one, (0, 1), std::f64::consts::FRAC_PI_4, 0.4).unwrap();
    assert!((mode_stats(&out, 0).unwrap().probabilities[1] - 0.5).abs() < 1e-12);
    assert!((mode_stats(&out, 1).unwrap().probabilities[1] - 0.5).abs() < 1e-12);

    // two-photon amplitudes from the 2x2 mode transform: a -> (a + c)/sqrt2, c -> (c - a)/sqrt2
    // give <11| = (t^2 - r^2) = 0
    let hom = apply_beamsplitter(
        &basis(&s, &[1, 1]),
        (0, 1),
        std::f64::consts::FRAC_PI_4,
        1.1,
    )
    .unwrap();
    assert!(hom.population(&[1, 1]).unwrap().abs() < 1e-12);
    assert!((hom.population(&[2, 0]).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn projections() {
    let s = space(&[4, 4]);
    assert!(matches!(
        project(&DensityMatrix::vacuum(s.clone()), 0, Detector::Click),
        Err(Error::ZeroProbability)
    ));
    assert!(project(&DensityMatrix::vacuum(s.clone()), 0, Detector::Fock(4)).is_err());

    let s6 = space(&[6, 6]);
    let tmsv =
        apply_two_mode_squeeze(&DensityMatrix::vacuum(s6.clone()), (0, 1), 0.002, 0.0).unwrap();
    let (post, p) = project(&tmsv, 0, Detector::Fock(1)).unwrap();
    let mech = partial_trace(&post, &[1]).unwrap();
    assert!(mode_stats(&mech, 0).unwrap().probabilities[1] >= 0.999);
    assert!((p - 0.002 * 0.998).abs() < 1e-12);

    let th = build_state(
        &s6,
        &[
            ModePrep::Thermal(0.1),
            ModePrep::Coherent(C64::new(0.1, 0.2)),
        ],
    )
    .unwrap();
    let (_, p0) = project(&th, 0, Detector::Fock(0)).unwrap();
    let q: f64 = 0.1 / 1.1;
    let z: f64 = (0..6).map(|k| q.powi(k)).sum();
    assert!((p0 - 1.0 / z).abs() < 1e-12);
    assert!((p0 - 1.0 / 1.1).abs() < 1e-4);
}

#[test]
fn partial_traces() {
    let s = space(&[3, 4]);
    let a = ModePrep::Thermal(0.3);
    let b = ModePrep::Coherent(C64::new(0.2, -0.4));
    let rho = build_state(&s, &[a, b]).unwrap();
    let ra = partial_trace(&rho, &[0]).unwrap();
    let expect = a.matrix(3).unwrap();
    assert!((ra.matrix() - expect).norm() < 1e-12);
    assert!(partial_trace(&rho, &[]).is_err());

    // ordered keep: swapping the kept order transposes the tensor factors
    let swapped = partial_trace(&rho, &[1, 0]).unwrap();
    let expect = b.matrix(4).unwrap().kronecker(&a.matrix(3).unwrap());
    assert!((swapped.matrix() - expect).norm() < 1e-12);

    let s12 = space(&[12, 12]);
    let tmsv = apply_two_mode_squeeze(&DensityMatrix::vacuum(s12.clone()), (0, 1), 0.5, 0.0);
    // p_b = 0.5 is too strong for a 12-level cutoff under the default guard
    assert!(tmsv.is_err());
    let tmsv = DensityMatrix::vacuum(s12)
        .apply_gate(
            TwoModeGate::Squeeze {
                p_b: 0.5,
                phase: 0.0,
            },
            (0, 1),
            LeakagePolicy::Ignore,
        )
        .unwrap();
    let m = partial_trace(&tmsv, &[1]).unwrap();
    let p = mode_stats(&m, 0).unwrap().probabilities;
    for (k, pk) in p.iter().take(6).enumerate() {
        // thermal with nbar = 1 has P(k) = 2^-(k+1)
        assert!((pk - 0.5f64.powi(k as i32 + 1)).abs() < 2e-3, "k = {k}");
    }

    let s2 = space(&[2, 2]);
    let mut amp = vec![C64::new(0.0, 0.0); 4];
    amp[0] = C64::new(1.0, 0.0);
    amp[3] = C64::new(1.0, 0.0);
    let bell = DensityMatrix::from_pure(s2, &amp).unwrap();
    let r = partial_trace(&bell, &[1]).unwrap();
    let half = DMatrix::<C64>::identity(2, 2) * C64::new(0.5, 0.0);
    assert!((r.matrix() - half).norm() < 1e-15);
}
