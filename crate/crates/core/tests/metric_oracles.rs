use dazzle_core::metrics::*;
use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pair(seed: u64, dims: (usize, usize)) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn(dims, |_| rng.gen::<f64>());
    let y = Array2::from_shape_fn(dims, |(r, c)| (x[(r, c)] + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0));
    (x, y)
}

/// Window statistics summed directly over the 11×11 Gaussian weights
/// `w(i,j) ∝ exp(−((i−5)² + (j−5)²)/(2·1.5²))`, for every valid position.
/// Returns (mean of SSIM map, mean of contrast-structure map).
fn brute_ssim(x: &Array2<f64>, y: &Array2<f64>) -> (f64, f64) {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut w = [[0.0; 11]; 11];
    let mut total = 0.0;
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (-(((i as f64 - 5.0).powi(2) + (j as f64 - 5.0).powi(2)) / 4.5)).exp();
            total += *v;
        }
    }
    let (h, wd) = x.dim();
    let (mut s_sum, mut cs_sum, mut n) = (0.0, 0.0, 0.0);
    for r in 0..=h - 11 {
        for c in 0..=wd - 11 {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    mx += w[i][j] / total * x[(r + i, c + j)];
                    my += w[i][j] / total * y[(r + i, c + j)];
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let (dx, dy) = (x[(r + i, c + j)] - mx, y[(r + i, c + j)] - my);
                    vx += w[i][j] / total * dx * dx;
                    vy += w[i][j] / total * dy * dy;
                    cov += w[i][j] / total * dx * dy;
                }
            }
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            s_sum += l * cs;
            cs_sum += cs;
            n += 1.0;
        }
    }
    (s_sum / n, cs_sum / n)
}

fn brute_msssim(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let halve = |a: &Array2<f64>| {
        let (h, w) = (a.nrows() / 2, a.ncols() / 2);
        Array2::from_shape_fn((h, w), |(r, c)| {
            (a[(2 * r, 2 * c)] + a[(2 * r + 1, 2 * c)] + a[(2 * r, 2 * c + 1)] + a[(2 * r + 1, 2 * c + 1)]) / 4.0
        })
    };
    let (mut xs, mut ys) = (x.clone(), y.clone());
    let mut out = 1.0;
    for (k, wt) in weights.iter().enumerate() {
        let (s, cs) = brute_ssim(&xs, &ys);
        let term: f64 = if k == 4 { s } else { cs };
        out *= term.max(0.0).powf(*wt);
        xs = halve(&xs);
        ys = halve(&ys);
    }
    out
}

#[test]
fn ssim_and_psnr_match_brute_force_on_16x16() {
    let cfg = SsimConfig::default();
    for seed in 0..25 {
        let (x, y) = random_pair(seed, (16, 16));
        let (want, _) = brute_ssim(&x, &y);
        let got = ssim(x.view(), y.view(), &cfg).unwrap();
        assert!((got - want).abs() < 1e-10, "seed {seed}: {got} vs {want}");

        let mut acc = 0.0;
        for r in 0..16 {
            for c in 0..16 {
                acc += (x[(r, c)] - y[(r, c)]).powi(2);
            }
        }
        let m = acc / 256.0;
        let (gm, gp) = mse_psnr(x.view(), y.view()).unwrap();
        assert!((gm - m).abs() < 1e-12);
        assert!((gp - 10.0 * (1.0 / m).log10()).abs() < 1e-10);
    }
}

#[test]
fn msssim_matches_brute_force_composition() {
    let cfg = SsimConfig::default();
    let side = msssim_min_side(&cfg);
    assert_eq!(side, 176);
    for seed in 0..2 {
        let (x, y) = random_pair(100 + seed, (side, side + 7));
        let got = msssim(x.view(), y.view(), &cfg).unwrap();
        let want = brute_msssim(&x, &y);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn identity_cases_are_exact() {
    let cfg = SsimConfig::default();
    let (x, _) = random_pair(7, (180, 190));
    assert_eq!(ssim(x.view(), x.view(), &cfg).unwrap(), 1.0);
    assert_eq!(msssim(x.view(), x.view(), &cfg).unwrap(), 1.0);
    let (m, p) = mse_psnr(x.view(), x.view()).unwrap();
    assert_eq!(m, 0.0);
    assert!(p.is_infinite() && p > 0.0);
    let row = evaluate_pair("same", x.view(), x.view(), &cfg).unwrap();
    let json = serde_json::to_string(&row).unwrap();
    assert!(json.contains("\"Inf\""), "{json}");
}

#[test]
fn constant_offset_gives_20_db() {
    let x = Array2::from_elem((16, 16), 0.3);
    let y = &x + 0.1;
    let (m, p) = mse_psnr(x.view(), y.view()).unwrap();
    assert!((m - 0.01).abs() < 1e-15);
    assert!((p - 20.0).abs() < 1e-12);
}

#[test]
fn inverted_binary_pattern_is_anticorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Array2::from_shape_fn((16, 16), |_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    let y = x.mapv(|v| 1.0 - v);
    let s = ssim(x.view(), y.view(), &SsimConfig::default()).unwrap();
    assert!(s < 0.0, "{s}");
    assert!((s - brute_ssim(&x, &y).0).abs() < 1e-10);
}

#[test]
fn too_small_inputs_rejected() {
    let cfg = SsimConfig::default();
    let a = Array2::zeros((10, 20));
    assert!(ssim(a.view(), a.view(), &cfg).is_err());
    let b = Array2::zeros((175, 200));
    assert!(msssim(b.view(), b.view(), &cfg).is_err());
    assert!(mse(a.view(), b.view()).is_err());
}

#[test]
fn aggregate_is_mean_of_rows() {
    let cfg = SsimConfig::default();
    let rows: Vec<_> = (0..5)
        .map(|i| {
            let (x, y) = random_pair(i, (20, 20));
            evaluate_pair(&format!("p{i}"), x.view(), y.view(), &cfg).unwrap()
        })
        .collect();
    let report = QualityReport::new(rows.clone());
    let mean = |f: fn(&QualityRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    assert_eq!(report.mean.count, 5);
    assert!((report.mean.mse - mean(|r| r.mse)).abs() < 1e-12);
    assert!((report.mean.ssim - mean(|r| r.ssim)).abs() < 1e-12);
    assert!((report.mean.psnr_db - mean(|r| r.psnr_db)).abs() < 1e-12);
    let csv = String::from_utf8(report.to_csv().unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.contains("__mean__"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ssim_is_symmetric_and_bounded(seed in any::<u64>()) {
        let (x, y) = random_pair(seed, (16, 16));
        let cfg = SsimConfig::default();
        let a = ssim(x.view(), y.view(), &cfg).unwrap();
        let b = ssim(y.view(), x.view(), &cfg).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn synchronized_shift_invariance(seed in any::<u64>(), dr in 0usize..6, dc in 0usize..6) {
        // Both images are crops of the same pair of larger fields at the same offset;
        // shifting the crop window of both together equals shifting the fields.
        let (big_x, big_y) = random_pair(seed, (30, 30));
        let crop = |a: &Array2<f64>, r: usize, c: usize| a.slice(s![r..r + 20, c..c + 20]).to_owned();
        let (x, y) = (crop(&big_x, dr, dc), crop(&big_y, dr, dc));
        let shifted_x = Array2::from_shape_fn((30, 30), |(r, c)| big_x[((r + dr) % 30, (c + dc) % 30)]);
        let shifted_y = Array2::from_shape_fn((30, 30), |(r, c)| big_y[((r + dr) % 30, (c + dc) % 30)]);
        let (x2, y2) = (crop(&shifted_x, 0, 0), crop(&shifted_y, 0, 0));
        let cfg = SsimConfig::default();
        prop_assert_eq!(ssim(x.view(), y.view(), &cfg).unwrap(), ssim(x2.view(), y2.view(), &cfg).unwrap());
        prop_assert_eq!(mse(x.view(), y.view()).unwrap(), mse(x2.view(), y2.view()).unwrap());
    }
}
