//! Artifact simulators: Poisson photon noise, fixed per-pixel detector
//! offsets (rings), isolated extreme readings (zingers), and flat-field
//! correction for raw count data.
//!
//! Degradations compose as noise -> ring -> zinger, so the zinger value is
//! the final value of every affected pixel. Each generator reduces to the
//! identity when its strength parameter is zero.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::stacks::ProjectionStack;

/// Transmission clamps for flat-field correction.
const MIN_TRANSMISSION: f64 = 1e-6;
const MAX_TRANSMISSION: f64 = 10.0;

/// All degradation parameters for one simulated acquisition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradeSpec {
    /// Incident photon count per detector pixel.
    pub i0: f64,
    /// Fraction of photons the object should absorb on average.
    pub absorption_target: f64,
    /// Fraction of detector pixels with a fixed offset.
    pub p_ring: f64,
    /// Standard deviation of the ring offsets.
    pub sigma_ring: f64,
    /// Fraction of projections that receive zingers.
    pub p_proj: f64,
    /// Fraction of pixels set to the zinger value in each affected projection.
    pub p_zinger: f64,
    /// Attenuation value a zinger pixel is replaced with.
    pub v_zinger: f64,
    pub seed: u64,
}

impl Default for DegradeSpec {
    fn default() -> Self {
        DegradeSpec {
            i0: 100.0,
            absorption_target: 0.5,
            p_ring: 0.1,
            sigma_ring: 0.005,
            p_proj: 0.10,
            p_zinger: 0.001,
            v_zinger: 5.0,
            seed: 0,
        }
    }
}

impl DegradeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0) {
            return Err(Error::validation(format!("degrade: i0 = {} must be > 0", self.i0)));
        }
        if !(self.absorption_target > 0.0 && self.absorption_target < 1.0) {
            return Err(Error::validation(format!(
                "degrade: absorption_target = {} outside (0, 1)",
                self.absorption_target
            )));
        }
        for (name, v) in [
            ("p_ring", self.p_ring),
            ("p_proj", self.p_proj),
            ("p_zinger", self.p_zinger),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "degrade: {name} = {v} outside [0, 1]"
                )));
            }
        }
        if !(self.sigma_ring >= 0.0) {
            return Err(Error::validation(format!(
                "degrade: sigma_ring = {} must be >= 0",
                self.sigma_ring
            )));
        }
        if !(self.v_zinger > 0.0) {
            return Err(Error::validation(format!(
                "degrade: v_zinger = {} must be > 0",
                self.v_zinger
            )));
        }
        Ok(())
    }
}

/// Fixed detector deviations shared by every projection of a scan.
#[derive(Debug, Clone)]
pub struct RingPattern {
    deviations: Array2<f64>,
    mask: Array2<bool>,
}

impl RingPattern {
    pub fn deviations(&self) -> &Array2<f64> {
        &self.deviations
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn affected_pixels(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Finds the attenuation scale `alpha` such that the mean transmission
/// `exp(-alpha * p)` over object-covered pixels (p > 0) equals
/// `1 - absorption_target`. Monotone in `alpha`, solved by bisection.
pub fn solve_absorption_scale(p: &ProjectionStack, absorption_target: f64) -> Result<f64> {
    if !(absorption_target > 0.0 && absorption_target < 1.0) {
        return Err(Error::validation(format!(
            "absorption_target = {absorption_target} outside (0, 1)"
        )));
    }
    let covered: Vec<f64> = p.data().iter().copied().filter(|&v| v > 0.0).collect();
    if covered.is_empty() {
        return Err(Error::validation(
            "apply_poisson_noise: projections are identically zero, scale undefined".to_string(),
        ));
    }
    let target = 1.0 - absorption_target;
    let mean_trans = |alpha: f64| -> f64 {
        covered.iter().map(|&v| (-alpha * v).exp()).sum::<f64>() / covered.len() as f64
    };
    let mut hi = 1.0;
    let mut doublings = 0;
    while mean_trans(hi) > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Numeric(
                "solve_absorption_scale: no bracket found".to_string(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_trans(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Poisson photon-count noise in the same attenuation units as the input:
/// counts are drawn from `Poisson(i0 * exp(-alpha * p))` and converted back
/// through `-ln(max(c, 1) / i0) / alpha`.
pub fn apply_poisson_noise(
    p: &ProjectionStack,
    i0: f64,
    absorption_target: f64,
    rng: &mut Rng,
) -> Result<ProjectionStack> {
    if !(i0 > 0.0) {
        return Err(Error::validation(format!("i0 = {i0} must be > 0")));
    }
    if p.data().iter().any(|&v| v < 0.0) {
        return Err(Error::validation(
            "apply_poisson_noise: negative attenuation".to_string(),
        ));
    }
    let alpha = solve_absorption_scale(p, absorption_target)?;
    let mut out = p.data().clone();
    for v in out.iter_mut() {
        let lambda = i0 * (-alpha * *v).exp();
        let counts = rng.poisson(lambda)?.max(1) as f64;
        *v = -(counts / i0).ln() / alpha;
    }
    p.with_data(out)
}

/// Draws the fixed ring deviation pattern: exactly `round(p_ring * M * N)`
/// pixels chosen uniformly without replacement, each with an independent
/// `Normal(0, sigma_ring^2)` offset.
pub fn make_ring_pattern(
    m: usize,
    n: usize,
    p_ring: f64,
    sigma_ring: f64,
    rng: &mut Rng,
) -> Result<RingPattern> {
    if !(0.0..=1.0).contains(&p_ring) {
        return Err(Error::validation(format!("p_ring = {p_ring} outside [0, 1]")));
    }
    if !(sigma_ring >= 0.0) {
        return Err(Error::validation(format!(
            "sigma_ring = {sigma_ring} must be >= 0"
        )));
    }
    let total = m * n;
    let count = (p_ring * total as f64).round() as usize;
    let picks = sample_without_replacement(total, count.min(total), rng);
    let mut deviations = Array2::zeros((m, n));
    let mut mask = Array2::from_elem((m, n), false);
    for idx in picks {
        let (row, col) = (idx / n, idx % n);
        mask[[row, col]] = true;
        deviations[[row, col]] = rng.normal(0.0, sigma_ring)?;
    }
    Ok(RingPattern { deviations, mask })
}

/// Partial Fisher-Yates: `k` distinct indices from `[0, total)`.
fn sample_without_replacement(total: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..total).collect();
    for i in 0..k {
        let j = i + rng.below((total - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

/// Adds the same deviation image to every projection. Constant detector
/// offsets become angle-constant columns in sinograms, which is exactly the
/// straight-line signature ring removal targets.
pub fn apply_ring(p: &ProjectionStack, pattern: &RingPattern) -> Result<ProjectionStack> {
    let (_, m, n) = p.dims();
    if pattern.deviations.dim() != (m, n) {
        return Err(Error::validation(format!(
            "apply_ring: pattern {:?} does not match projections ({m}, {n})",
            pattern.deviations.dim()
        )));
    }
    let mut out = p.data().clone();
    for a in 0..p.n_theta() {
        let mut img = out.index_axis_mut(ndarray::Axis(0), a);
        img += &pattern.deviations;
    }
    p.with_data(out)
}

/// Replaces pixels with the excessive value `v`: `round(p_proj * n_theta)`
/// projections are selected without replacement, and in each one
/// `round(p_zinger * M * N)` pixels (drawn independently per projection)
/// are set to `v`.
pub fn apply_zinger(
    p: &ProjectionStack,
    p_proj: f64,
    p_zinger: f64,
    v: f64,
    rng: &mut Rng,
) -> Result<ProjectionStack> {
    for (name, val) in [("p_proj", p_proj), ("p_zinger", p_zinger)] {
        if !(0.0..=1.0).contains(&val) {
            return Err(Error::validation(format!("{name} = {val} outside [0, 1]")));
        }
    }
    if !(v > 0.0) {
        return Err(Error::validation(format!("zinger value {v} must be > 0")));
    }
    let (n_theta, m, n) = p.dims();
    let n_proj = (p_proj * n_theta as f64).round() as usize;
    let n_pix = (p_zinger * (m * n) as f64).round() as usize;
    if n_proj == 0 || n_pix == 0 {
        return Ok(p.clone());
    }
    let mut out = p.data().clone();
    let mut affected = sample_without_replacement(n_theta, n_proj.min(n_theta), rng);
    affected.sort_unstable();
    for a in affected {
        let picks = sample_without_replacement(m * n, n_pix.min(m * n), rng);
        let mut img = out.index_axis_mut(ndarray::Axis(0), a);
        for idx in picks {
            img[[idx / n, idx % n]] = v;
        }
    }
    p.with_data(out)
}

/// Runs the full degradation chain (noise, ring, zinger) with per-step
/// child seeds derived from `spec.seed`. Returns the degraded stack and the
/// ring pattern that was applied.
pub fn degrade(p: &ProjectionStack, spec: &DegradeSpec) -> Result<(ProjectionStack, RingPattern)> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let mut noise_rng = root.child(0);
    let mut ring_rng = root.child(1);
    let mut zinger_rng = root.child(2);
    let noisy = apply_poisson_noise(p, spec.i0, spec.absorption_target, &mut noise_rng)?;
    let (_, m, n) = p.dims();
    let pattern = make_ring_pattern(m, n, spec.p_ring, spec.sigma_ring, &mut ring_rng)?;
    let ringed = apply_ring(&noisy, &pattern)?;
    let final_stack = apply_zinger(
        &ringed,
        spec.p_proj,
        spec.p_zinger,
        spec.v_zinger,
        &mut zinger_rng,
    )?;
    Ok((final_stack, pattern))
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

fn aggregate_fields(fields: &[Array2<f64>], use_median: bool) -> Result<Array2<f64>> {
    if fields.is_empty() {
        return Err(Error::validation(
            "flat_field_correct: need at least one field".to_string(),
        ));
    }
    let shape = fields[0].dim();
    for f in fields {
        if f.dim() != shape {
            return Err(Error::validation(
                "flat_field_correct: field shapes differ".to_string(),
            ));
        }
    }
    if !use_median || fields.len() == 1 {
        return Ok(fields[0].clone());
    }
    let mut out = Array2::zeros(shape);
    let mut buf = vec![0.0; fields.len()];
    for row in 0..shape.0 {
        for col in 0..shape.1 {
            for (b, f) in buf.iter_mut().zip(fields.iter()) {
                *b = f[[row, col]];
            }
            out[[row, col]] = median_of(&mut buf);
        }
    }
    Ok(out)
}

/// Converts raw detector counts to attenuation via flat/dark reference
/// fields: `-ln((raw - dark) / (flat - dark))`. Nonpositive numerators
/// clamp to the smallest representable transmission, and transmissions
/// above `MAX_TRANSMISSION` clamp down to it.
pub fn flat_field_correct(
    raw: &Array3<f64>,
    angles: &[f64],
    flats: &[Array2<f64>],
    darks: &[Array2<f64>],
    use_median: bool,
) -> Result<ProjectionStack> {
    let flat = aggregate_fields(flats, use_median)?;
    let dark = aggregate_fields(darks, use_median)?;
    let (n_theta, m, n) = (raw.shape()[0], raw.shape()[1], raw.shape()[2]);
    if flat.dim() != (m, n) || dark.dim() != (m, n) {
        return Err(Error::validation(format!(
            "flat_field_correct: fields {:?} do not match projections ({m}, {n})",
            flat.dim()
        )));
    }
    let denom = &flat - &dark;
    if denom.iter().any(|&d| d <= 0.0) {
        return Err(Error::validation(
            "flat_field_correct: flat <= dark at some pixel".to_string(),
        ));
    }
    let mut out = Array3::zeros((n_theta, m, n));
    for a in 0..n_theta {
        for row in 0..m {
            for col in 0..n {
                let num = raw[[a, row, col]] - dark[[row, col]];
                let trans = if num <= 0.0 {
                    MIN_TRANSMISSION
                } else {
                    (num / denom[[row, col]]).clamp(MIN_TRANSMISSION, MAX_TRANSMISSION)
                };
                out[[a, row, col]] = -trans.ln();
            }
        }
    }
    ProjectionStack::new(out, angles.to_vec())
}
