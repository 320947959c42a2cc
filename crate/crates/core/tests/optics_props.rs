use dazzle_core::adpf;
use dazzle_core::optics::*;
use dazzle_core::Error;
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reduced(n: usize) -> OpticsConfig {
    OpticsConfig::default().with_pupil_samples(n)
}

/// Random smooth phase screen: a handful of random Fourier modes.
fn random_phase_field(cfg: &OpticsConfig, seed: u64) -> PupilField {
    let mut base = build_pupil_field(cfg, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-40.0..40.0),
                rng.gen_range(-40.0..40.0),
                rng.gen_range(0.0..6.3),
                rng.gen_range(0.2..3.0),
            )
        })
        .collect();
    let n = cfg.pupil_nu as f64;
    for ((r, c), v) in base.values.indexed_iter_mut() {
        let (x, y) = (c as f64 / n, r as f64 / n);
        let phase: f64 = modes.iter().map(|(kx, ky, p, a)| a * (kx * x + ky * y + p).sin()).sum();
        *v *= Complex64::from_polar(1.0, phase);
    }
    base
}

#[test]
fn parseval_for_random_masks() {
    let cfg = reduced(256);
    let uncoded = synthesize_psf(&cfg, cfg.lambda_b, false).unwrap();
    for seed in 0..10 {
        let coded = compute_psf(&random_phase_field(&cfg, seed), cfg.lambda_b, &cfg).unwrap();
        let rel = (coded.raw_energy - uncoded.raw_energy).abs() / uncoded.raw_energy;
        assert!(rel < 1e-9, "seed {seed}: {rel:e}");
        assert!(suppression_ratio(&coded, &uncoded).unwrap() <= 1.0 + 1e-9);
    }
}

#[test]
fn five_half_ring_mask_conserves_energy_and_suppresses_peak() {
    let cfg = reduced(512);
    let coded = synthesize_psf(&cfg, cfg.lambda_l, true).unwrap();
    let uncoded = synthesize_psf(&cfg, cfg.lambda_l, false).unwrap();
    assert!((coded.raw_energy - uncoded.raw_energy).abs() / uncoded.raw_energy < 1e-9);
    assert!(coded.values.iter().all(|v| *v >= 0.0));
    assert!((coded.energy() - 1.0).abs() < 1e-12);
    let lsr = suppression_ratio(&coded, &uncoded).unwrap();
    assert!(lsr < 1e-2, "{lsr}");
}

#[test]
fn literal_law_suppresses_far_less() {
    let base = reduced(512);
    let literal = OpticsConfig {
        phase_law: PhaseLaw::LiteralAtan,
        ..base.clone()
    };
    let u = synthesize_psf(&base, base.lambda_l, false).unwrap();
    let field = suppression_ratio(&synthesize_psf(&base, base.lambda_l, true).unwrap(), &u).unwrap();
    let lit = suppression_ratio(&synthesize_psf(&literal, base.lambda_l, true).unwrap(), &u).unwrap();
    assert!(lit > 10.0 * field, "literal {lit} vs field {field}");
}

#[test]
fn psf_is_bit_identical_across_runs() {
    let cfg = reduced(256);
    let a = synthesize_psf(&cfg, cfg.lambda_b, true).unwrap();
    let b = synthesize_psf(&cfg, cfg.lambda_b, true).unwrap();
    assert_eq!(
        adpf::encode(a.values.view(), a.pitch, a.wavelength),
        adpf::encode(b.values.view(), b.pitch, b.wavelength)
    );
    assert!(a
        .values
        .iter()
        .zip(b.values.iter())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn non_square_pupil_is_padded_to_square_transform() {
    let cfg = OpticsConfig {
        pupil_nv: 216,
        ..reduced(410)
    };
    let psf = synthesize_psf(&cfg, cfg.lambda_b, false).unwrap();
    assert_eq!(psf.dims(), (410, 410));
    assert!((psf.pitch - cfg.lambda_b * cfg.focal_length / (410.0 * cfg.pupil_pitch_u)).abs() < 1e-20);
}

#[test]
fn mismatched_field_rejected() {
    let cfg = reduced(128);
    let field = build_pupil_field(&cfg, false).unwrap();
    let other = reduced(256);
    assert!(matches!(compute_psf(&field, 633e-9, &other), Err(Error::Dimension(_))));
}

fn lobe_error(order: u32, n: usize) -> f64 {
    let cfg = OpticsConfig {
        supergauss_order: order,
        ..reduced(n)
    };
    let psf = synthesize_psf(&cfg, cfg.lambda_b, false).unwrap();
    let airy = airy_psf(&cfg, cfg.lambda_b, psf.dims(), psf.pitch).unwrap();
    let r0 = airy_first_zero_radius(&cfg, cfg.lambda_b) / psf.pitch;
    let (cr, cc) = psf.center();
    let (mut num, mut den) = (0.0, 0.0);
    for ((r, c), a) in airy.values.indexed_iter() {
        if (r as f64 - cr as f64).hypot(c as f64 - cc as f64) <= r0 {
            num += (psf.values[(r, c)] - a).powi(2);
            den += a * a;
        }
    }
    (num / den).sqrt()
}

#[test]
fn zero_phase_psf_converges_to_airy_with_order() {
    // A harder aperture edge approaches the uniform disc of the analytic pattern.
    let e50 = lobe_error(50, 1024);
    let e200 = lobe_error(200, 1024);
    let e1000 = lobe_error(1000, 1024);
    assert!(e200 < e50 && e1000 < e200, "{e50} {e200} {e1000}");
    assert!(e1000 < 1e-3, "{e1000}");
}

#[test]
fn first_dark_ring_diameter() {
    let cfg = OpticsConfig::default();
    let d = 2.0 * airy_first_zero_radius(&cfg, cfg.lambda_b);
    assert!((d - 22.2e-6).abs() < 0.1e-6, "{d}");
    assert!((d / 5.4e-6 - 4.1).abs() < 0.05);
}

#[test]
fn adpf_roundtrip_of_psf() {
    let cfg = reduced(128);
    let psf = synthesize_psf(&cfg, cfg.lambda_b, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("psf.adpf");
    adpf::write_psf(&p, &psf).unwrap();
    let back = adpf::read_psf(&p).unwrap();
    assert_eq!(back.dims(), psf.dims());
    assert_eq!(back.pitch, psf.pitch);
    for (a, b) in back.values.iter().zip(psf.values.iter()) {
        assert!((a - b).abs() <= 1e-7 * b.abs() + 1e-30);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn literal_phase_range(xi in 0.0f64..8e-3, phi in -3.2f64..3.2) {
        let cfg = OpticsConfig { phase_law: PhaseLaw::LiteralAtan, ..OpticsConfig::default() };
        let v = five_half_ring_phase(xi, phi, &cfg);
        prop_assert!(v > -std::f64::consts::FRAC_PI_2 && v < std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn field_phase_range(xi in 0.0f64..8e-3, phi in -3.2f64..3.2) {
        let v = five_half_ring_phase(xi, phi, &OpticsConfig::default());
        prop_assert!(v.abs() <= std::f64::consts::PI);
    }

    #[test]
    fn aperture_bounded(u in -1e-2f64..1e-2, v in -1e-2f64..1e-2) {
        let a = super_gauss_aperture(u, v, 3.83e-3, 50);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn airy_point_symmetric(n in 3usize..40, pitch in 0.5e-6f64..8e-6) {
        let cfg = OpticsConfig::default();
        let side = 2 * n + 1;
        let p = airy_psf(&cfg, 633e-9, (side, side), pitch).unwrap();
        for r in 0..side {
            for c in 0..side {
                prop_assert!((p.values[(r, c)] - p.values[(side - 1 - r, side - 1 - c)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn resample_keeps_unit_energy(target in 3e-6f64..9e-6) {
        let v = Array2::from_shape_fn((41, 41), |(r, c)| {
            let d2 = (r as f64 - 20.0).powi(2) + (c as f64 - 20.0).powi(2);
            (-d2 / 30.0).exp()
        });
        let psf = Psf::from_raw(v, 4.5e-6, 633e-9).unwrap();
        let out = resample_psf(&psf, target).unwrap();
        prop_assert!((out.energy() - 1.0).abs() < 1e-12);
        prop_assert!(out.values.iter().all(|v| *v >= 0.0));
    }
}
