//! Deterministic random number generation.
//!
//! One fixed generator backs every stochastic operation in the crate:
//! xoshiro256++ seeded through splitmix64. Identical `(algorithm, seed)`
//! pairs produce identical draw sequences, which is what dataset manifests
//! record to make simulation runs reproducible. Parallel work must derive
//! child generators with [`Rng::child`] instead of sharing a stream.

use crate::error::{Error, Result};

/// Identifier stored in manifests alongside the seed.
pub const ALGORITHM: &str = "xoshiro256++";

/// Poisson sampling switches from inversion to transformed rejection here.
const POISSON_INVERSION_CUTOFF: f64 = 30.0;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator with an explicit stream position.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    state: [u64; 4],
    position: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng {
            seed,
            state,
            position: 0,
        }
    }

    /// Independent child stream for parallel or per-stage work. The child
    /// seed mixes the parent seed with `index`, so children never overlap
    /// the parent stream.
    pub fn child(&self, index: u64) -> Rng {
        let mut sm = self.seed ^ index.wrapping_mul(0xA24B_AED4_963E_E407);
        Rng::new(splitmix64(&mut sm))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of raw 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        self.position += 1;
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in `[0, n)` by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below: n must be positive");
        let threshold = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < threshold {
                return x % n;
            }
        }
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::validation(format!(
                "uniform: lo ({lo}) must not exceed hi ({hi})"
            )));
        }
        Ok(lo + (hi - lo) * self.next_f64())
    }

    /// Normal draw via Box-Muller. `sigma == 0` returns `mu` exactly.
    pub fn normal(&mut self, mu: f64, sigma: f64) -> Result<f64> {
        if !(sigma >= 0.0) {
            return Err(Error::validation(format!(
                "normal: sigma must be >= 0, got {sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(mu);
        }
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        Ok(mu + sigma * z)
    }

    /// Poisson draw. Inversion below the cutoff, transformed rejection with
    /// a normal-shaped envelope above it, so photon counts up to 1e7 sample
    /// without overflow. `lambda == 0` returns 0 exactly.
    pub fn poisson(&mut self, lambda: f64) -> Result<u64> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::validation(format!(
                "poisson: lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if lambda == 0.0 {
            return Ok(0);
        }
        if lambda < POISSON_INVERSION_CUTOFF {
            Ok(self.poisson_inversion(lambda))
        } else {
            Ok(self.poisson_rejection(lambda))
        }
    }

    fn poisson_inversion(&mut self, lambda: f64) -> u64 {
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut product = 1.0;
        loop {
            product *= self.next_f64();
            if product <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// Transformed rejection (Hörmann's PTRS): a table-free rejection method
    /// whose proposal tracks the normal approximation of the Poisson bulk.
    fn poisson_rejection(&mut self, lambda: f64) -> u64 {
        let slam = lambda.sqrt();
        let loglam = lambda.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.next_f64() - 0.5;
            let v = self.next_f64();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
                <= -lambda + k * loglam - ln_factorial(k as u64)
            {
                return k as u64;
            }
        }
    }
}

/// `ln(k!)`, exact summation for small `k`, Stirling series above.
fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k < 128 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = (k + 1) as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln Gamma(x) for x >= 129: four Bernoulli terms give ~1e-15 accuracy.
    (x - 0.5) * x.ln() - x + 0.5 * (std::f64::consts::TAU).ln()
        + inv * (1.0 / 12.0 + inv2 * (-1.0 / 360.0 + inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}
