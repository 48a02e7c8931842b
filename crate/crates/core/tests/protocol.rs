use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use phonmem::dynamics::OccupationProfile;
use phonmem::fock::{DensityMatrix, Detector, FockSpace};
use phonmem::protocol::*;

/// Heralded mechanics from the disentangled squeezer
/// `exp(t a^dag b^dag) cosh(r)^-(n_a + n_b + 1) exp(-t a b)`: input `|0, m>`
/// heralded on one Stokes photon leaves `t sqrt(m+1) cosh(r)^-(m+1) |m+1>`.
fn herald_oracle(p_b: f64, n_init: f64, dim: usize) -> Vec<f64> {
    let t2 = p_b;
    let cosh2 = 1.0 / (1.0 - p_b);
    let q = n_init / (1.0 + n_init);
    let z: f64 = (0..dim).map(|m| q.powi(m as i32)).sum();
    let mut p = vec![0.0; dim];
    for m in 0..dim - 1 {
        p[m + 1] = q.powi(m as i32) / z * t2 * (m + 1) as f64 / cosh2.powi(m as i32 + 1);
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|x| x / s).collect()
}

/// First-order interference of a state with a 50:50 reference:
/// `V = 2 |beta| |<b>| / (<n> + |beta|^2)`.
fn visibility_oracle(rho: &DensityMatrix, beta: f64) -> f64 {
    let m = rho.matrix();
    let d = m.nrows();
    let mut mean_b = C64::new(0.0, 0.0);
    let mut n = 0.0;
    for k in 1..d {
        mean_b += m[(k, k - 1)].conj() * (k as f64).sqrt();
        n += k as f64 * m[(k, k)].re;
    }
    2.0 * beta * mean_b.norm() / (n + beta * beta)
}

#[test]
fn heralded_fock_state() {
    let rho = heralded_phonon_state(0.002, 0.0, 6).unwrap();
    assert!(rho.population(&[1]).unwrap() >= 0.999);
    let r = |s: &DensityMatrix| s.population(&[2]).unwrap() / s.population(&[1]).unwrap();
    // a number-resolved herald on vacuum leaves exactly one phonon
    assert_eq!(r(&heralded_phonon_state(1e-2, 0.0, 6).unwrap()), 0.0);
    // a threshold herald admits pairs at order p_b
    let click = |p: f64| heralded_phonon_state_with(p, 0.0, 6, Detector::Click).unwrap();
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-6]
        .iter()
        .map(|&p| r(&click(p)))
        .collect();
    assert!(
        ratios.windows(2).all(|w| w[1] < w[0]) && ratios[3] < 1e-5,
        "{ratios:?}"
    );
}

#[test]
fn heralded_thermal_matches_disentangled_oracle() {
    // at the default cutoff the top thermal level cannot be heralded, a q^5 effect
    let rho = heralded_phonon_state(0.002, 0.1, 6).unwrap();
    let oracle = herald_oracle(0.002, 0.1, 6);
    let got = rho.mode_stats(0).unwrap().probabilities;
    assert!(got[1] < 1.0);
    for k in 0..6 {
        assert!(
            (got[k] - oracle[k]).abs() < 1e-5,
            "k={k}: {} vs {}",
            got[k],
            oracle[k]
        );
    }
    let rho = heralded_phonon_state(0.002, 0.1, 12).unwrap();
    let oracle = herald_oracle(0.002, 0.1, 12);
    let got = rho.mode_stats(0).unwrap().probabilities;
    for k in 0..12 {
        assert!(
            (got[k] - oracle[k]).abs() < 1e-9,
            "k={k}: {} vs {}",
            got[k],
            oracle[k]
        );
    }
    // leading terms: P(2)/P(1) = 2 q (1 - p_b) with q = n/(n+1)
    let q = 0.1 / 1.1;
    assert!((got[2] / got[1] - 2.0 * q * 0.998).abs() < 1e-9);
}

#[test]
fn herald_input_errors() {
    assert!(heralded_phonon_state(0.0, 0.1, 6).is_err());
    assert!(heralded_phonon_state(0.002, -0.1, 6).is_err());
}

#[test]
fn equal_rates_give_equal_superposition() {
    let cfg = HeraldConfig::default().with_ratio(1.0).unwrap();
    let s = prepare_superposition(&cfg).unwrap();
    // the ideal 0.5 holds to first order in p_b
    assert!(
        (s.single_phonon_weight - 0.5).abs() < 2e-3,
        "{}",
        s.single_phonon_weight
    );
    assert!(s.herald_probability > 0.0);
}

#[test]
fn no_wcs_reduces_to_plain_herald() {
    for n_init in [0.0, 0.1] {
        let cfg = HeraldConfig {
            n_init,
            ..Default::default()
        };
        let s = prepare_superposition(&cfg).unwrap();
        let h = heralded_phonon_state(cfg.p_b, n_init, cfg.dim).unwrap();
        // the beamsplitter loses half of every extra Stokes photon, so the
        // two heralds differ at order p_b
        let diff = (s.state.matrix() - h.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 3.0 * cfg.p_b, "n_init {n_init}: {diff}");
    }
}

#[test]
fn superposition_errors() {
    let cfg = HeraldConfig {
        wcs_alpha: 1.2,
        ..Default::default()
    };
    assert!(prepare_superposition(&cfg).is_err());
}

#[test]
fn wcs_ratio_examples() {
    assert_eq!(wcs_ratio_for_target(0.5).unwrap(), 1.0);
    assert!((wcs_ratio_for_target(0.56).unwrap() - 0.44 / 0.56).abs() < 1e-15);
    assert!(wcs_ratio_for_target(1.0 - 1e-12).unwrap() < 1e-11);
    assert!(wcs_ratio_for_target(0.0).is_err() && wcs_ratio_for_target(1.0).is_err());
}

#[test]
fn readout_matches_first_order_oracle() {
    let cfg = HeraldConfig {
        n_init: 0.05,
        ..Default::default()
    }
    .with_ratio(2.0)
    .unwrap();
    let s = prepare_superposition(&cfg).unwrap();
    for beta in [0.05, 0.3, 0.7] {
        let v = readout_visibility(&s.state, C64::new(beta, 0.0), 1.0, 12).unwrap();
        assert!(
            (v - visibility_oracle(&s.state, beta)).abs() < 1e-8,
            "beta {beta}: {v} vs {}",
            visibility_oracle(&s.state, beta)
        );
        let scaled = readout_visibility(&s.state, C64::new(beta, 0.0), 0.95, 12).unwrap();
        assert!((scaled - 0.95 * v).abs() < 1e-12);
    }
}

#[test]
fn half_superposition_reaches_inverse_sqrt2_at_matched_reference() {
    let cfg = HeraldConfig::default().with_ratio(1.0).unwrap();
    let s = prepare_superposition(&cfg).unwrap();
    let n = s.state.mode_stats(0).unwrap().mean;
    let v = readout_visibility(&s.state, C64::new(n.sqrt(), 0.0), 1.0, 16).unwrap();
    assert!((v - FRAC_1_SQRT_2).abs() < 0.01, "{v}");
    // a weak reference carries almost no interference
    let weak = readout_visibility(&s.state, C64::new(0.05, 0.0), 1.0, 16).unwrap();
    assert!(weak < 0.11, "{weak}");
}

#[test]
fn matched_visibility_follows_sqrt_one_minus_n() {
    // for a pure a|0> + b|1> state the matched-reference visibility is sqrt(1 - n)
    for ratio in [0.3, 1.0, 3.0] {
        let cfg = HeraldConfig::default().with_ratio(ratio).unwrap();
        let s = prepare_superposition(&cfg).unwrap();
        let n = s.single_phonon_weight;
        let mean = s.state.mode_stats(0).unwrap().mean;
        let v = readout_visibility(&s.state, C64::new(mean.sqrt(), 0.0), 1.0, 16).unwrap();
        assert!(
            (v - (1.0 - n).sqrt()).abs() < 5e-3,
            "ratio {ratio}: {v} vs {}",
            (1.0 - n).sqrt()
        );
    }
}

#[test]
fn mixed_state_stays_below_classical_bound() {
    let mut m = DMatrix::<C64>::zeros(6, 6);
    m[(0, 0)] = C64::new(0.5, 0.0);
    m[(1, 1)] = C64::new(0.5, 0.0);
    let rho = DensityMatrix::from_matrix(FockSpace::new(vec![6]).unwrap(), m).unwrap();
    for beta in [0.05, 0.5, 1.0, 2.0] {
        let v = readout_visibility(&rho, C64::new(beta, 0.0), 1.0, 16).unwrap();
        assert!(v <= 0.5 && v.abs() < 1e-10, "beta {beta}: {v}");
    }
}

#[test]
fn readout_errors() {
    let rho = heralded_phonon_state(0.002, 0.0, 6).unwrap();
    assert!(readout_visibility(&rho, C64::new(0.0, 0.0), 1.0, 16).is_err());
    assert!(readout_visibility(&rho, C64::new(0.1, 0.0), 1.0, 4).is_err());
    assert!(readout_visibility(&rho, C64::new(0.1, 0.0), 1.2, 16).is_err());
}

#[test]
fn visibility_ignores_phase_reference() {
    let base = HeraldConfig::default().with_ratio(1.5).unwrap();
    let s0 = prepare_superposition(&base).unwrap();
    let shift = 0.9;
    let s1 = prepare_superposition(&HeraldConfig {
        wcs_phase: shift,
        ..base
    })
    .unwrap();
    let readout = Readout::new(6).unwrap();
    let phases: Vec<f64> = (0..16).map(|k| TAU * k as f64 / 16.0).collect();
    // the herald imprints the conjugate WCS phase on <b>
    let shifted: Vec<f64> = phases.iter().map(|p| p - shift).collect();
    let beta = C64::new(0.6, 0.0);
    let c0 = readout.curve(&s0.state, beta, &phases).unwrap();
    let c1 = readout.curve(&s1.state, beta, &shifted).unwrap();
    for (a, b) in c0.iter().zip(&c1) {
        assert!((a - b).abs() < 1e-10);
    }
    let v0 = readout_visibility(&s0.state, beta, 1.0, 16).unwrap();
    let v1 = readout_visibility(&s1.state, beta, 1.0, 16).unwrap();
    assert!((v0 - v1).abs() < 1e-10);
}

#[test]
fn visibility_drops_with_background() {
    let beta = C64::new(0.3, 0.0);
    let mut last = f64::INFINITY;
    for n_init in [0.0, 0.05, 0.1, 0.2, 0.3] {
        let base = HeraldConfig {
            n_init,
            dim: 8,
            ..Default::default()
        };
        let ratio = ratio_for_weight(&base, 0.5).unwrap();
        let s = prepare_superposition(&base.with_ratio(ratio).unwrap()).unwrap();
        assert!((s.single_phonon_weight - 0.5).abs() < 1e-8);
        let v = readout_visibility(&s.state, beta, 1.0, 16).unwrap();
        assert!(v < last, "n_init {n_init}: {v} >= {last}");
        last = v;
    }
}

#[test]
fn ratio_mapping_uses_stokes_photons() {
    let n_s = stokes_mean_photons(0.002, 0.1, 6).unwrap();
    // <n_Stokes> = p_b (1 + n_init) / (1 - p_b) for an untruncated squeezer
    assert!((n_s - 0.002 * 1.1 / 0.998).abs() < 1e-7);
    let cfg = HeraldConfig {
        n_init: 0.1,
        ..Default::default()
    }
    .with_ratio(7.0)
    .unwrap();
    assert!((cfg.wcs_alpha.powi(2) - 7.0 * n_s).abs() < 1e-15);
}

#[test]
fn g2_model_examples() {
    let g = g2_om_model(0.0, 1.0 / 1.8e-3, |_| Ok(0.1)).unwrap();
    assert!((g - 11.0).abs() < 1e-12);
    let g = g2_om_model(1.0, 1.0 / 1.8e-3, |_| Ok(0.1)).unwrap();
    assert!((g - 1.0).abs() < 1e-12);
    assert!(g2_om_model(0.0, 1.0, |_| Ok(0.0)).is_err());
    assert!(g2_om_model(-1.0, 1.0, |_| Ok(0.1)).is_err());
}

#[test]
fn g2_crossing_constant_background() {
    // exp(-t/T1) = n  =>  t = T1 ln(1/n)
    let profile = OccupationProfile::table(vec![(1e-6, 0.1), (1.0, 0.1)]).unwrap();
    let t1 = 1.8e-3;
    let t = g2_crossing(2.0, 1.0 / t1, &profile, 1e-6, 1.0)
        .unwrap()
        .unwrap();
    assert!((t - t1 * 10f64.ln()).abs() < 1e-9);
    let t = g2_crossing(5.7, 1.0 / t1, &profile, 1e-6, 1.0)
        .unwrap()
        .unwrap();
    assert!((t - t1 * (1.0 / (4.7 * 0.1f64)).ln()).abs() < 1e-9);
}

#[test]
fn bounds() {
    assert_eq!(classical_bound(), 2.0);
    assert_eq!(bell_bound(), 5.7);
    assert!(bell_bound() > classical_bound());
}

#[test]
fn g2_counts() {
    let rec = CorrelationRecord {
        n_trials: 1_000_000,
        n_b: 2000,
        n_r: 100_000,
        n_coinc: 2000,
    };
    let est = g2_from_counts(&rec).unwrap();
    assert!((est.g2 - 10.0).abs() < 1e-12);
    let sd = est.sd.unwrap();
    assert!((sd - 10.0 * (1.0 / 2000.0 + 1.0 / 2000.0 + 1e-5f64).sqrt()).abs() < 1e-12);
    let rec = CorrelationRecord {
        n_trials: 1_000_000,
        n_b: 2000,
        n_r: 100_000,
        n_coinc: 200,
    };
    assert!((g2_from_counts(&rec).unwrap().g2 - 1.0).abs() < 1e-12);
    let rec = CorrelationRecord { n_coinc: 0, ..rec };
    let est = g2_from_counts(&rec).unwrap();
    assert_eq!(est.g2, 0.0);
    assert!(est.sd.is_none());
    assert!(g2_from_counts(&CorrelationRecord {
        n_b: 0,
        n_coinc: 0,
        ..rec
    })
    .is_err());
    assert!(g2_from_counts(&CorrelationRecord {
        n_coinc: 3000,
        ..rec
    })
    .is_err());
}

#[test]
fn correlation_coefficients() {
    assert_eq!(correlation_coefficient(1.3, 1.3).unwrap(), 0.0);
    assert_eq!(correlation_coefficient(0.7, 0.0).unwrap(), 1.0);
    assert!(correlation_coefficient(0.0, 0.0).is_err());
    assert!(correlation_coefficient(-1.0, 0.5).is_err());
}

#[test]
fn thermometry_examples() {
    assert!((sideband_asymmetry_occupancy(11.0, 1.0).unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(sideband_asymmetry_occupancy(1.0, 0.0).unwrap(), 0.0);
    assert_eq!(sideband_asymmetry_occupancy(2.0, 1.0).unwrap(), 1.0);
    assert!(sideband_asymmetry_occupancy(1.0, 1.0).is_err());
}

#[test]
fn pulsed_trials_violate_bell_bound() {
    let rec = simulate_pulsed_trials(&PulsedTrials {
        p_b: 0.002,
        p_r: 0.14,
        n_therm: 0.01,
        efficiency_b: 0.5,
        efficiency_r: 0.5,
        n_trials: 3_000_000,
        seed: 17,
    })
    .unwrap();
    let est = g2_from_counts(&rec).unwrap();
    assert!(
        est.g2 - 2.0 * est.sd.unwrap() > bell_bound(),
        "{est:?} from {rec:?}"
    );
    let again = simulate_pulsed_trials(&PulsedTrials {
        p_b: 0.002,
        p_r: 0.14,
        n_therm: 0.01,
        efficiency_b: 0.5,
        efficiency_r: 0.5,
        n_trials: 3_000_000,
        seed: 17,
    })
    .unwrap();
    assert_eq!(rec, again);
}

#[test]
fn mixing_angle_is_configurable() {
    // the literal generator coefficient 1/pi gives a strongly unbalanced split
    let base = HeraldConfig {
        mixing_angle: 1.0 / std::f64::consts::PI,
        ..Default::default()
    };
    let s = prepare_superposition(&base.with_ratio(7.0).unwrap()).unwrap();
    let even = prepare_superposition(
        &HeraldConfig {
            mixing_angle: FRAC_PI_4,
            ..base
        }
        .with_ratio(7.0)
        .unwrap(),
    )
    .unwrap();
    assert!(s.single_phonon_weight > 0.5 && even.single_phonon_weight < 0.2);
}
