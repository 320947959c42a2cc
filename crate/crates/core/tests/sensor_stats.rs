use dazzle_core::sensor::*;
use ndarray::Array2;
use proptest::prelude::*;

const SIDE: usize = 1000; // 1e6 pixels

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn sensor(side: usize) -> SensorModel {
    SensorModel {
        width: side,
        height: side,
        ..SensorModel::default()
    }
}

#[test]
fn photon_noise_moments() {
    // σ = c1·p + c2·√p = 0.2·1e4 + 100 = 2100.
    let p = Array2::from_elem((SIDE, SIDE), 1e4);
    let w = sample_photons(p.view(), &PhotonModel::default(), 11).unwrap();
    let (m, s) = mean_std(w.iter().copied());
    assert!((m - 1e4).abs() < 0.01 * 1e4, "{m}");
    assert!((s - 2100.0).abs() < 0.01 * 2100.0, "{s}");
}

#[test]
fn literal_photon_law_moments() {
    let model = PhotonModel {
        c1: 0.8,
        c2: 1.0,
        law: PhotonLaw::Literal,
    };
    let p = Array2::from_elem((SIDE, SIDE), 2500.0);
    let w = sample_photons(p.view(), &model, 3).unwrap();
    let (m, s) = mean_std(w.iter().copied());
    assert!((m - 2000.0).abs() < 20.0, "{m}");
    assert!((s - 50.0).abs() < 0.5, "{s}");
}

#[test]
fn read_noise_moments() {
    let sens = sensor(SIDE);
    let sw = NoiseSwitches {
        read_noise: true,
        ..NoiseSwitches::NONE
    };
    let e = electrons(Array2::zeros((SIDE, SIDE)).view(), &sens, 5, sw).unwrap();
    let (m, s) = mean_std(e.iter().copied());
    assert!((m - 390.0).abs() < 3.9, "{m}");
    assert!((s - 10.5).abs() < 0.105, "{s}");
}

#[test]
fn dark_current_moments() {
    // μ = 0.002 gives only ~2000 events per megapixel; a large mean checks
    // the Poisson law itself, and the configured mean is checked on 6.4e7 draws.
    let heavy = SensorModel {
        dark_current_mean: 50.0,
        ..sensor(SIDE)
    };
    let sw = NoiseSwitches {
        dark_current: true,
        ..NoiseSwitches::NONE
    };
    let e = electrons(Array2::zeros((SIDE, SIDE)).view(), &heavy, 7, sw).unwrap();
    let (m, s) = mean_std(e.iter().copied());
    assert!((m - 50.0).abs() < 0.5, "{m}");
    assert!((s - 50f64.sqrt()).abs() < 0.01 * 50f64.sqrt(), "{s}");

    let side = 8000;
    let e = electrons(Array2::zeros((side, side)).view(), &sensor(side), 8, sw).unwrap();
    let n = (side * side) as f64;
    let m = e.sum() / n;
    let var = e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((m - 0.002).abs() < 0.01 * 0.002, "{m}");
    assert!((var - 0.002).abs() < 0.01 * 0.002, "{var}");
}

#[test]
fn quantiser_moments() {
    // Dither U(-½, ½) then floor: E = G·μ − ½, Var = G²σ² + 1/6 for non-integer-locked inputs.
    let sens = sensor(SIDE);
    let sw = NoiseSwitches {
        read_noise: true,
        quantization: true,
        ..NoiseSwitches::NONE
    };
    let e = electrons(Array2::zeros((SIDE, SIDE)).view(), &sens, 9, sw).unwrap();
    let counts = digitize(e.view(), &sens, 9, sw);
    let (m, s) = mean_std(counts.iter().map(|c| *c as f64));
    let want_m = 0.37 * 390.0 - 0.5;
    let want_s = (0.37f64.powi(2) * 10.5f64.powi(2) + 1.0 / 6.0).sqrt();
    assert!((m - want_m).abs() < 0.01 * want_m, "{m}");
    assert!((s - want_s).abs() < 0.01 * want_s, "{s} vs {want_s}");
}

#[test]
fn saturation_irradiance_value() {
    // 25500·6.63e-34·3e8 / (633e-9·0.1·(5.4e-6)²·0.56) = 5.07195e-21 / 1.03366368e-18
    let want = 5.07195e-21 / 1.033663_68e-18;
    let got = saturation_irradiance(&SensorModel::default(), 633e-9, 0.1);
    assert!((got - want).abs() / want < 1e-9, "{got} vs {want}");
    assert!((got - 4.9068e-3).abs() < 1e-7, "{got}");
    let doubled = saturation_irradiance(&SensorModel::default(), 633e-9, 0.2);
    assert_eq!(doubled * 2.0, got);
}

#[test]
fn saturation_chain_fills_the_well() {
    let sens = sensor(4);
    let i_sat = saturation_irradiance(&sens, 633e-9, 1e-3);
    let ib = Array2::from_elem((4, 4), i_sat);
    let p = photon_rate(
        ib.view(),
        Array2::zeros((4, 4)).view(),
        633e-9,
        532e-9,
        1e-3,
        sens.pixel_pitch,
    )
    .unwrap();
    let omega = sample_photons(p.view(), &PhotonModel::noiseless(), 0).unwrap();
    let e = electrons(omega.view(), &sens, 0, NoiseSwitches::NONE).unwrap();
    for v in e.iter() {
        assert!((v - 25500.0).abs() / 25500.0 < 1e-9, "{v}");
    }
}

#[test]
fn expose_is_deterministic_and_cropped() {
    let sens = sensor(32);
    let omega = Array2::from_shape_fn((40, 44), |(r, c)| (r * 44 + c) as f64 * 10.0);
    let a = expose(omega.view(), &sens, 1e-3, 42, NoiseSwitches::ALL).unwrap();
    let b = expose(omega.view(), &sens, 1e-3, 42, NoiseSwitches::ALL).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dims(), (32, 32));
    let c = expose(omega.view(), &sens, 1e-3, 43, NoiseSwitches::ALL).unwrap();
    assert_ne!(a.counts, c.counts);
    assert!(expose(Array2::zeros((8, 8)).view(), &sens, 1e-3, 1, NoiseSwitches::ALL).is_err());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sens = sensor(64);
    let omega = Array2::from_elem((64, 64), 3000.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| expose(omega.view(), &sens, 1e-3, 77, NoiseSwitches::ALL).unwrap())
    };
    assert_eq!(run(1), run(6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_within_bit_depth(level in 0.0f64..1e6, bits in 8u32..=16) {
        let sens = SensorModel { bit_depth: bits, ..sensor(8) };
        let img = expose(Array2::from_elem((8, 8), level).view(), &sens, 1e-3, 1, NoiseSwitches::ALL).unwrap();
        let s_sat = (1u32 << bits) - 1;
        prop_assert!(img.counts.iter().all(|c| (*c as u32) <= s_sat));
        prop_assert!(img.normalized().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn noiseless_counts_monotone(a in 0.0f64..1e5, b in 0.0f64..1e5) {
        let sens = sensor(2);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let run = |x: f64| expose(Array2::from_elem((2, 2), x).view(), &sens, 1e-3, 0, NoiseSwitches::NONE).unwrap().counts[(0, 0)];
        prop_assert!(run(lo) <= run(hi));
    }

    #[test]
    fn photon_draws_nonnegative(p in 0.0f64..50.0, c1 in 0.0f64..0.25, c2 in 0.9f64..1.1, seed in any::<u64>()) {
        let m = PhotonModel { c1, c2, law: PhotonLaw::ScaledStd };
        let w = sample_photons(Array2::from_elem((4, 4), p).view(), &m, seed).unwrap();
        prop_assert!(w.iter().all(|v| *v >= 0.0));
    }
}
