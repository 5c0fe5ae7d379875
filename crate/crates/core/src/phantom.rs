//! Synthetic foam cylinder phantoms: a solid cylinder of unit attenuation
//! filled with non-overlapping spherical bubbles of zero attenuation.
//!
//! Placement is sequential rejection sampling (order matters, so the loop
//! is single-threaded by design) with radii drawn log-uniformly, giving the
//! multiscale bubble structure the benchmarks rely on.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::stacks::Volume;

/// Parameters of one foam phantom.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FoamSpec {
    /// Grid size; the volume is `n x n x n`.
    pub n: usize,
    /// Number of bubbles to attempt to place.
    pub bubble_count: usize,
    /// Bubble radius range in voxels, sampled log-uniformly.
    pub r_min: f64,
    pub r_max: f64,
    /// Cylinder radius as a fraction of `n / 2`.
    pub cylinder_fraction: f64,
    /// Placement attempts before giving up on the remaining bubbles.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for FoamSpec {
    fn default() -> Self {
        FoamSpec {
            n: 128,
            bubble_count: 300,
            r_min: 2.0,
            r_max: 8.0,
            cylinder_fraction: 0.95,
            max_attempts: 100_000,
            seed: 0,
        }
    }
}

impl FoamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::validation(format!("foam: n = {} too small", self.n)));
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            return Err(Error::validation(format!(
                "foam: need 0 < r_min <= r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.r_max >= self.n as f64 / 4.0 {
            return Err(Error::validation(format!(
                "foam: r_max {} must be below n/4 = {}",
                self.r_max,
                self.n as f64 / 4.0
            )));
        }
        if !(self.cylinder_fraction > 0.0 && self.cylinder_fraction <= 1.0) {
            return Err(Error::validation(format!(
                "foam: cylinder_fraction {} outside (0, 1]",
                self.cylinder_fraction
            )));
        }
        Ok(())
    }
}

/// An accepted bubble: center in voxel coordinates plus radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bubble {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: f64,
}

/// Generation output. `placed < spec.bubble_count` signals that the
/// attempt budget ran out; that is a warning, not an error.
#[derive(Debug)]
pub struct Foam {
    pub volume: Volume,
    pub bubbles: Vec<Bubble>,
    pub attempts: usize,
}

impl Foam {
    pub fn placed(&self) -> usize {
        self.bubbles.len()
    }
}

/// Generates the phantom: binary volume with 1 inside the cylinder and 0
/// outside, bubbles carved to 0. Deterministic under `spec.seed`.
pub fn generate_foam(spec: &FoamSpec) -> Result<Foam> {
    spec.validate()?;
    let n = spec.n;
    let c = (n as f64 - 1.0) / 2.0;
    let cyl_r = spec.cylinder_fraction * n as f64 / 2.0;
    let mut rng = Rng::new(spec.seed);

    let mut bubbles: Vec<Bubble> = Vec::with_capacity(spec.bubble_count);
    let mut attempts = 0usize;
    let ln_min = spec.r_min.ln();
    let ln_max = spec.r_max.ln();
    while bubbles.len() < spec.bubble_count && attempts < spec.max_attempts {
        attempts += 1;
        let r = rng.uniform(ln_min, ln_max)?.exp();
        // Radial bound keeps the sphere fully inside the cylinder wall.
        let max_radial = cyl_r - r;
        if max_radial <= 0.0 || n as f64 - 1.0 < 2.0 * r {
            continue;
        }
        let x = rng.uniform(c - max_radial, c + max_radial)?;
        let y = rng.uniform(c - max_radial, c + max_radial)?;
        if (x - c).powi(2) + (y - c).powi(2) > max_radial * max_radial {
            continue;
        }
        let z = rng.uniform(r, n as f64 - 1.0 - r)?;
        let candidate = Bubble { x, y, z, r };
        let overlaps = bubbles.iter().any(|b| {
            let d2 = (b.x - x).powi(2) + (b.y - y).powi(2) + (b.z - z).powi(2);
            d2 <= (b.r + r).powi(2)
        });
        if !overlaps {
            bubbles.push(candidate);
        }
    }

    // Rasterize: cylinder first, then carve bubbles.
    let mut data = Array3::zeros((n, n, n));
    for y in 0..n {
        let dy2 = (y as f64 - c).powi(2);
        for x in 0..n {
            if (x as f64 - c).powi(2) + dy2 <= cyl_r * cyl_r {
                for z in 0..n {
                    data[[z, y, x]] = 1.0;
                }
            }
        }
    }
    for b in &bubbles {
        let r2 = b.r * b.r;
        let z_lo = (b.z - b.r).floor().max(0.0) as usize;
        let z_hi = ((b.z + b.r).ceil() as usize).min(n - 1);
        let y_lo = (b.y - b.r).floor().max(0.0) as usize;
        let y_hi = ((b.y + b.r).ceil() as usize).min(n - 1);
        let x_lo = (b.x - b.r).floor().max(0.0) as usize;
        let x_hi = ((b.x + b.r).ceil() as usize).min(n - 1);
        for z in z_lo..=z_hi {
            let dz2 = (z as f64 - b.z).powi(2);
            for y in y_lo..=y_hi {
                let dy2 = (y as f64 - b.y).powi(2);
                for x in x_lo..=x_hi {
                    if (x as f64 - b.x).powi(2) + dy2 + dz2 <= r2 {
                        data[[z, y, x]] = 0.0;
                    }
                }
            }
        }
    }

    Ok(Foam {
        volume: Volume::new(data)?,
        bubbles,
        attempts,
    })
}
