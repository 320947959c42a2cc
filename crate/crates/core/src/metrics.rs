//! Full-reference quality metrics: MSE, PSNR, SSIM and MS-SSIM.
//!
//! SSIM uses an 11×11 Gaussian window (σ = 1.5), `K1 = 0.01`, `K2 = 0.03`,
//! data range 1 and "valid" filtering (no padding). MS-SSIM uses five scales
//! with 2×2 average pooling between them.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn same_dims(x: &ArrayView2<f64>, y: &ArrayView2<f64>) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "images differ in size: {:?} vs {:?}",
            x.dim(),
            y.dim()
        )));
    }
    if x.is_empty() {
        return Err(Error::Input("images are empty".into()));
    }
    Ok(())
}

pub fn mse(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    same_dims(&x, &y)?;
    let mut acc = 0.0;
    Zip::from(&x).and(&y).for_each(|a, b| acc += (a - b) * (a - b));
    Ok(acc / x.len() as f64)
}

/// `10·log10(1/mse)`; `+∞` for identical images.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn mse_psnr(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<(f64, f64)> {
    let m = mse(x, y)?;
    Ok((m, psnr_from_mse(m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn kernel(&self) -> Vec<f64> {
        let c = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| (-(i as f64 - c).powi(2) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect()
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.data_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.data_range).powi(2)
    }
}

/// Separable "valid" filtering.
fn filter_valid(img: &Array2<f64>, k: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let n = k.len();
    let tmp = Array2::from_shape_fn((h, w + 1 - n), |(r, c)| {
        (0..n).map(|i| k[i] * img[(r, c + i)]).sum::<f64>()
    });
    Array2::from_shape_fn((h + 1 - n, w + 1 - n), |(r, c)| {
        (0..n).map(|i| k[i] * tmp[(r + i, c)]).sum::<f64>()
    })
}

/// Mean SSIM and mean contrast-structure term.
pub fn ssim_components(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &SsimConfig) -> Result<(f64, f64)> {
    same_dims(&x, &y)?;
    let (h, w) = x.dim();
    if h < cfg.window || w < cfg.window {
        return Err(Error::Input(format!(
            "image {w}x{h} is smaller than the {}x{} SSIM window",
            cfg.window, cfg.window
        )));
    }
    let k = cfg.kernel();
    let (x, y) = (x.to_owned(), y.to_owned());
    let mx = filter_valid(&x, &k);
    let my = filter_valid(&y, &k);
    let sxx = filter_valid(&(&x * &x), &k);
    let syy = filter_valid(&(&y * &y), &k);
    let sxy = filter_valid(&(&x * &y), &k);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    Zip::from(&mx)
        .and(&my)
        .and(&sxx)
        .and(&syy)
        .and(&sxy)
        .for_each(|&mx, &my, &sxx, &syy, &sxy| {
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            ssim_sum += l * cs;
            cs_sum += cs;
        });
    let n = mx.len() as f64;
    Ok((ssim_sum / n, cs_sum / n))
}

pub fn ssim(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &SsimConfig) -> Result<f64> {
    ssim_components(x, y, cfg).map(|(s, _)| s)
}

/// 2×2 average pooling; a trailing odd row or column is dropped.
pub fn pool2(img: ArrayView2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    Array2::from_shape_fn((h / 2, w / 2), |(r, c)| {
        0.25 * (img[(2 * r, 2 * c)] + img[(2 * r + 1, 2 * c)] + img[(2 * r, 2 * c + 1)] + img[(2 * r + 1, 2 * c + 1)])
    })
}

/// Smallest side that supports all five scales.
pub fn msssim_min_side(cfg: &SsimConfig) -> usize {
    cfg.window << (MSSSIM_WEIGHTS.len() - 1)
}

/// `Π_{j<4} max(cs_j, 0)^{w_j} · max(ssim_4, 0)^{w_4}`.
pub fn msssim(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &SsimConfig) -> Result<f64> {
    same_dims(&x, &y)?;
    let (h, w) = x.dim();
    let min = msssim_min_side(cfg);
    if h < min || w < min {
        return Err(Error::Input(format!(
            "image {w}x{h} too small for 5-scale MS-SSIM (needs {min}x{min})"
        )));
    }
    let (mut xs, mut ys) = (x.to_owned(), y.to_owned());
    let mut score = 1.0;
    let last = MSSSIM_WEIGHTS.len() - 1;
    for (j, wt) in MSSSIM_WEIGHTS.iter().enumerate() {
        let (s, cs) = ssim_components(xs.view(), ys.view(), cfg)?;
        let term = if j == last { s } else { cs };
        score *= term.max(0.0).powf(*wt);
        if j < last {
            xs = pool2(xs.view());
            ys = pool2(ys.view());
        }
    }
    Ok(score)
}

mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("Inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad PSNR value {t:?}"))),
        }
    }
}

/// Scores for one image pair. Learned metrics are reserved but never computed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub name: String,
    pub mse: f64,
    pub one_minus_mse: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub msssim: Option<f64>,
    pub lpips: Option<f64>,
    pub dists: Option<f64>,
}

pub fn evaluate_pair(name: &str, x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &SsimConfig) -> Result<QualityRow> {
    let (m, p) = mse_psnr(x, y)?;
    let (h, w) = x.dim();
    let ms = if h.min(w) >= msssim_min_side(cfg) {
        Some(msssim(x, y, cfg)?)
    } else {
        None
    };
    Ok(QualityRow {
        name: name.into(),
        mse: m,
        one_minus_mse: 1.0 - m,
        psnr_db: p,
        ssim: ssim(x, y, cfg)?,
        msssim: ms,
        lpips: None,
        dists: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAggregate {
    pub count: usize,
    pub mse: f64,
    pub one_minus_mse: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    /// Mean over rows that have an MS-SSIM score.
    pub msssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub schema_version: u32,
    pub rows: Vec<QualityRow>,
    pub mean: QualityAggregate,
}

impl QualityReport {
    pub fn new(rows: Vec<QualityRow>) -> Self {
        let n = rows.len();
        let avg = |f: &dyn Fn(&QualityRow) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let ms: Vec<f64> = rows.iter().filter_map(|r| r.msssim).collect();
        let mean = QualityAggregate {
            count: n,
            mse: avg(&|r| r.mse),
            one_minus_mse: avg(&|r| r.one_minus_mse),
            psnr_db: avg(&|r| r.psnr_db),
            ssim: avg(&|r| r.ssim),
            msssim: (!ms.is_empty()).then(|| ms.iter().sum::<f64>() / ms.len() as f64),
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            rows,
            mean,
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format {
            format: "CSV",
            reason: e.to_string(),
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let psnr = |v: f64| {
            if v.is_infinite() {
                "Inf".to_string()
            } else {
                v.to_string()
            }
        };
        w.write_record([
            "schema_version",
            "name",
            "mse",
            "one_minus_mse",
            "psnr_db",
            "ssim",
            "msssim",
            "lpips",
            "dists",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                self.schema_version.to_string(),
                r.name.clone(),
                r.mse.to_string(),
                r.one_minus_mse.to_string(),
                psnr(r.psnr_db),
                r.ssim.to_string(),
                opt(r.msssim),
                opt(r.lpips),
                opt(r.dists),
            ])
            .map_err(csv_err)?;
        }
        let m = &self.mean;
        w.write_record([
            self.schema_version.to_string(),
            "__mean__".into(),
            m.mse.to_string(),
            m.one_minus_mse.to_string(),
            psnr(m.psnr_db),
            m.ssim.to_string(),
            opt(m.msssim),
            String::new(),
            String::new(),
        ])
        .map_err(csv_err)?;
        w.into_inner().map_err(|e| Error::Format {
            format: "CSV",
            reason: e.to_string(),
        })
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(json_path).map_err(|e| Error::io(json_path, e))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n").map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.to_csv()?).map_err(|e| Error::io(csv_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_gives_20_db() {
        let x = Array2::from_elem((4, 4), 0.3);
        let y = Array2::from_elem((4, 4), 0.4);
        let (m, p) = mse_psnr(x.view(), y.view()).unwrap();
        assert!((m - 0.01).abs() < 1e-15);
        assert!((p - 20.0).abs() < 1e-10);
        assert_eq!(mse_psnr(x.view(), x.view()).unwrap().1, f64::INFINITY);
        assert!(mse(x.view(), Array2::zeros((3, 4)).view()).is_err());
    }

    #[test]
    fn ssim_identity_and_window_check() {
        let x = Array2::from_shape_fn((16, 16), |(r, c)| ((r * 7 + c * 3) % 5) as f64 / 4.0);
        assert_eq!(ssim(x.view(), x.view(), &SsimConfig::default()).unwrap(), 1.0);
        let small = Array2::zeros((10, 16));
        assert!(ssim(small.view(), small.view(), &SsimConfig::default()).is_err());
    }

    #[test]
    fn report_inf_sentinel_roundtrip() {
        let x = Array2::from_elem((16, 16), 0.5);
        let row = evaluate_pair("a", x.view(), x.view(), &SsimConfig::default()).unwrap();
        assert!(row.msssim.is_none());
        let rep = QualityReport::new(vec![row]);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"psnr_db\":\"Inf\""));
        let back: QualityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        let csv = String::from_utf8(rep.to_csv().unwrap()).unwrap();
        assert!(csv.lines().nth(1).unwrap().contains(",Inf,1,"), "{csv}");
    }
}
