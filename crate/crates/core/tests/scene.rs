use nalgebra::DMatrix;

use shdoa::array::{make_encoder, make_icosahedral_array, sh_matrix_rows};
use shdoa::scene::{
    synth_hoa_direct, synth_hoa_element, synth_source_signals, uniform_sigma2_for_snr, NoiseSpec, RoomSpec, Scene,
    SignalKind,
};
use shdoa::sh::{mode_strength, Direction, ShBasis};

fn doas() -> Vec<Direction> {
    vec![Direction::from_degrees(70.0, 40.0), Direction::from_degrees(60.0, 70.0)]
}

fn row_variances(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.norm_squared() / r.len() as f64).collect()
}

#[test]
fn diagonal_noise_has_requested_row_variances() {
    let basis = ShBasis::new(2);
    let q: Vec<f64> = (0..9).map(|p| 0.01 * (1.0 + p as f64)).collect();
    let s = synth_source_signals(2, 100_000, SignalKind::Gaussian, 1).unwrap();
    let scene = Scene::new(doas(), 1.0, s.clone(), 1).unwrap();
    let b = synth_hoa_direct(&scene, basis, &NoiseSpec::Diagonal { q: q.clone() }).unwrap();
    let z = &b.frames - sh_matrix_rows(basis, &doas()).transpose() * s;
    for (v, want) in row_variances(&z).iter().zip(&q) {
        assert!((v / want - 1.0).abs() < 0.02);
    }
}

#[test]
fn realized_snr_matches_configuration() {
    let basis = ShBasis::new(2);
    for snr in [0.0, 10.0, 25.0] {
        let s = synth_source_signals(2, 100_000, SignalKind::Gaussian, 2).unwrap();
        let scene = Scene::new(doas(), 1.0, s.clone(), 2).unwrap();
        let sigma2 = uniform_sigma2_for_snr(2, snr);
        let b = synth_hoa_direct(&scene, basis, &NoiseSpec::Uniform { sigma2 }).unwrap();
        let clean = sh_matrix_rows(basis, &doas()).transpose() * s;
        let z = &b.frames - &clean;
        let realized = 10.0 * (clean.norm_squared() / z.norm_squared()).log10();
        assert!(
            (realized - snr).abs() < 0.2,
            "{snr} dB configured, {realized} dB realized"
        );
    }
}

#[test]
fn element_noise_follows_mode_strength() {
    let basis = ShBasis::new(2);
    let geom = make_icosahedral_array(0.15).unwrap();
    let k = 1.0 / 0.15;
    let enc = make_encoder(&geom, basis, k).unwrap();
    let s = synth_source_signals(1, 100_000, SignalKind::Constant, 3).unwrap();
    let scene = Scene::new(vec![Direction::from_degrees(40.0, 10.0)], k, s, 3).unwrap();
    let noisy = synth_hoa_element(&scene, &geom, &enc, &NoiseSpec::ElementDomain { sigma2: 1.0 }, None).unwrap();
    let quiet = synth_hoa_element(&scene, &geom, &enc, &NoiseSpec::ElementDomain { sigma2: 1e-300 }, None).unwrap();
    let v = row_variances(&(&noisy.frames - &quiet.frames));
    let expected = (mode_strength(0, 1.0).norm() / mode_strength(2, 1.0).norm()).powi(2);
    let order2 = v[4..9].iter().sum::<f64>() / 5.0;
    assert!(
        (order2 / v[0] / expected - 1.0).abs() < 0.1,
        "{} vs {expected}",
        order2 / v[0]
    );
}

#[test]
fn element_and_direct_paths_agree_without_noise() {
    let basis = ShBasis::new(2);
    let geom = make_icosahedral_array(0.15).unwrap();
    let k = 1.0 / 0.15;
    let enc = make_encoder(&geom, basis, k).unwrap();
    let s = synth_source_signals(2, 50, SignalKind::Gaussian, 4).unwrap();
    let scene = Scene::new(doas(), k, s.clone(), 4).unwrap();
    let e = synth_hoa_element(&scene, &geom, &enc, &NoiseSpec::ElementDomain { sigma2: 1e-300 }, None).unwrap();
    let d = sh_matrix_rows(basis, &doas()).transpose() * &s;
    let scale = d.abs().max();
    // each source contributes at most the per-row encoding error (< 0.02)
    let amp = s.abs().max();
    assert!((&e.frames - &d).abs().max() < 2.0 * 0.02 * amp, "{scale}");
}

#[test]
fn zero_reflection_room_equals_free_field() {
    let basis = ShBasis::new(2);
    let geom = make_icosahedral_array(0.15).unwrap();
    let k = 2.0 * std::f64::consts::PI * 1000.0 / 343.0;
    let enc = make_encoder(&geom, basis, k).unwrap();
    let s = synth_source_signals(2, 64, SignalKind::Gaussian, 5).unwrap();
    let scene = Scene::new(doas(), k, s, 5).unwrap();
    let noise = NoiseSpec::ElementDomain { sigma2: 1e-3 };
    let room = RoomSpec::with_sources_at([8.0, 10.0, 3.0], [4.0, 5.0, 1.5], &doas(), 2.0, 0.0, 2).unwrap();
    let free = synth_hoa_element(&scene, &geom, &enc, &noise, None).unwrap();
    let dry = synth_hoa_element(&scene, &geom, &enc, &noise, Some(&room)).unwrap();
    assert_eq!(free, dry);
    let wet_room = RoomSpec {
        reflection_coeff: 0.6,
        ..room
    };
    let wet = synth_hoa_element(&scene, &geom, &enc, &noise, Some(&wet_room)).unwrap();
    assert!((&wet.frames - &free.frames).norm() > 1e-3 * free.frames.norm());
}

#[test]
fn generators_are_pure_functions_of_seed() {
    let basis = ShBasis::new(2);
    let noise = NoiseSpec::Uniform { sigma2: 0.1 };
    let make = |seed| {
        let s = synth_source_signals(2, 100, SignalKind::SinusoidBank, seed).unwrap();
        synth_hoa_direct(&Scene::new(doas(), 1.0, s, seed).unwrap(), basis, &noise).unwrap()
    };
    assert_eq!(make(6), make(6));
    assert_ne!(make(6), make(7));
    let g = synth_source_signals(3, 100_000, SignalKind::Gaussian, 8).unwrap();
    for row in g.row_iter() {
        let power = row.norm_squared() / row.len() as f64;
        assert!((0.99..=1.01).contains(&power));
    }
}
