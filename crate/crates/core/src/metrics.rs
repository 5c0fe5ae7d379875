//! Image quality metrics against a high-quality reference: MSE, PSNR, and
//! SSIM, reported per slice and averaged.
//!
//! PSNR and SSIM both use the value range of the full reference volume, not
//! per-slice ranges, so slice metrics share one scale. SSIM uses a 7x7
//! uniform window with k1 = 0.01, k2 = 0.03, averaged over valid window
//! positions.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stacks::Volume;

pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Mean of squared differences.
pub fn mse(x: ArrayView2<f64>, reference: ArrayView2<f64>) -> Result<f64> {
    if x.dim() != reference.dim() {
        return Err(Error::validation(format!(
            "mse: shapes {:?} and {:?} differ",
            x.dim(),
            reference.dim()
        )));
    }
    let mut sum = 0.0;
    for (a, b) in x.iter().zip(reference.iter()) {
        sum += (a - b).powi(2);
    }
    Ok(sum / x.len() as f64)
}

/// `10 log10(range^2 / MSE)` in dB; identical images report `+inf`.
pub fn psnr(x: ArrayView2<f64>, reference: ArrayView2<f64>, range: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::validation(format!(
            "psnr: reference range {range} must be > 0"
        )));
    }
    let err = mse(x, reference)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (range * range / err).log10())
}

/// Mean local SSIM over all valid 7x7 window positions.
pub fn ssim(x: ArrayView2<f64>, reference: ArrayView2<f64>, range: f64) -> Result<f64> {
    if x.dim() != reference.dim() {
        return Err(Error::validation(format!(
            "ssim: shapes {:?} and {:?} differ",
            x.dim(),
            reference.dim()
        )));
    }
    if !(range > 0.0) {
        return Err(Error::validation(format!(
            "ssim: reference range {range} must be > 0"
        )));
    }
    let (rows, cols) = x.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::validation(format!(
            "ssim: image {rows}x{cols} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);

    // Integral images for O(1) window sums.
    let sat = |img: ArrayView2<f64>, f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
        let mut s = vec![0.0; (rows + 1) * (cols + 1)];
        for r in 0..rows {
            for c in 0..cols {
                s[(r + 1) * (cols + 1) + (c + 1)] = f(r, c) + s[r * (cols + 1) + (c + 1)]
                    + s[(r + 1) * (cols + 1) + c]
                    - s[r * (cols + 1) + c];
            }
        }
        let _ = img;
        s
    };
    let sx = sat(x, &|r, c| x[[r, c]]);
    let sy = sat(reference, &|r, c| reference[[r, c]]);
    let sxx = sat(x, &|r, c| x[[r, c]] * x[[r, c]]);
    let syy = sat(reference, &|r, c| reference[[r, c]] * reference[[r, c]]);
    let sxy = sat(x, &|r, c| x[[r, c]] * reference[[r, c]]);

    let w = SSIM_WINDOW;
    let n = (w * w) as f64;
    let window_sum = |s: &[f64], r: usize, c: usize| -> f64 {
        s[(r + w) * (cols + 1) + (c + w)] - s[r * (cols + 1) + (c + w)]
            - s[(r + w) * (cols + 1) + c]
            + s[r * (cols + 1) + c]
    };

    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=(rows - w) {
        for c in 0..=(cols - w) {
            let mx = window_sum(&sx, r, c) / n;
            let my = window_sum(&sy, r, c) / n;
            let vx = window_sum(&sxx, r, c) / n - mx * mx;
            let vy = window_sum(&syy, r, c) / n - my * my;
            let cov = window_sum(&sxy, r, c) / n - mx * my;
            let val = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += val;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Per-slice metrics plus volume averages, all computed against the
/// reference volume's value range.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub range: f64,
    pub per_slice_psnr: Vec<f64>,
    pub per_slice_ssim: Vec<f64>,
    pub per_slice_mse: Vec<f64>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_mse: f64,
}

/// Value range of the full reference volume.
pub fn reference_range(reference: &Volume) -> Result<f64> {
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for &v in reference.data().iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::validation(
            "reference volume is constant, range undefined".to_string(),
        ));
    }
    Ok(range)
}

/// Evaluates a volume slice by slice against a reference volume.
pub fn evaluate_volumes(x: &Volume, reference: &Volume) -> Result<MetricReport> {
    if x.dims() != reference.dims() {
        return Err(Error::validation(format!(
            "evaluate: shapes {:?} and {:?} differ",
            x.dims(),
            reference.dims()
        )));
    }
    let range = reference_range(reference)?;
    let nz = x.dims().0;
    let mut per_slice_psnr = Vec::with_capacity(nz);
    let mut per_slice_ssim = Vec::with_capacity(nz);
    let mut per_slice_mse = Vec::with_capacity(nz);
    for z in 0..nz {
        let xs = x.data().index_axis(ndarray::Axis(0), z);
        let rs = reference.data().index_axis(ndarray::Axis(0), z);
        per_slice_psnr.push(psnr(xs, rs, range)?);
        per_slice_ssim.push(ssim(xs, rs, range)?);
        per_slice_mse.push(mse(xs, rs)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(MetricReport {
        range,
        mean_psnr: mean(&per_slice_psnr),
        mean_ssim: mean(&per_slice_ssim),
        mean_mse: mean(&per_slice_mse),
        per_slice_psnr,
        per_slice_ssim,
        per_slice_mse,
    })
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

impl MetricReport {
    /// CSV rows: `slice,psnr_db,ssim,mse`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slice,psnr_db,ssim,mse\n");
        for (i, ((p, s), m)) in self
            .per_slice_psnr
            .iter()
            .zip(self.per_slice_ssim.iter())
            .zip(self.per_slice_mse.iter())
            .enumerate()
        {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                fmt_metric(*p),
                fmt_metric(*s),
                fmt_metric(*m)
            ));
        }
        out
    }

    /// JSON summary; infinite PSNR serializes as the string `"inf"`.
    pub fn to_json(&self) -> serde_json::Value {
        let num = |v: f64| -> serde_json::Value {
            if v.is_infinite() {
                serde_json::Value::String("inf".to_string())
            } else {
                serde_json::json!(v)
            }
        };
        serde_json::json!({
            "range": self.range,
            "mean_psnr_db": num(self.mean_psnr),
            "mean_ssim": num(self.mean_ssim),
            "mean_mse": num(self.mean_mse),
            "slices": self.per_slice_psnr.len(),
        })
    }
}
