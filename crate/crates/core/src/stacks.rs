//! Core tensor-like domain types.
//!
//! The three containers mirror the three data representations of a CT
//! pipeline: projection images indexed `(angle, row, column)`, sinograms
//! indexed `(row, angle, column)`, and reconstructed volumes indexed
//! `(slice, y, x)`. All values are attenuation-domain 64-bit floats; the
//! 32-bit cast happens only at the storage boundary in [`crate::io`].
//!
//! Every type is immutable after construction, so sharing across threads is
//! safe without further coordination.

use ndarray::Array3;

use crate::error::{Error, Result};

fn check_finite(data: &Array3<f64>, what: &str) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(format!("{what}: non-finite value")));
    }
    Ok(())
}

fn check_nonempty(data: &Array3<f64>, what: &str) -> Result<()> {
    if data.shape().iter().any(|&d| d == 0) {
        return Err(Error::validation(format!(
            "{what}: empty axis in shape {:?}",
            data.shape()
        )));
    }
    Ok(())
}

/// Angles must be strictly increasing within `[0, pi)`.
pub(crate) fn check_angles(angles: &[f64]) -> Result<()> {
    for (i, &a) in angles.iter().enumerate() {
        if !a.is_finite() || !(0.0..std::f64::consts::PI).contains(&a) {
            return Err(Error::validation(format!(
                "angle[{i}] = {a} outside [0, pi)"
            )));
        }
        if i > 0 && a <= angles[i - 1] {
            return Err(Error::validation(format!(
                "angles not strictly increasing at index {i}"
            )));
        }
    }
    Ok(())
}

/// Attenuation line integrals indexed `(angle, detector row, detector column)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStack {
    data: Array3<f64>,
    angles: Vec<f64>,
}

impl ProjectionStack {
    pub fn new(data: Array3<f64>, angles: Vec<f64>) -> Result<Self> {
        check_nonempty(&data, "ProjectionStack")?;
        check_finite(&data, "ProjectionStack")?;
        check_angles(&angles)?;
        if data.shape()[0] != angles.len() {
            return Err(Error::validation(format!(
                "ProjectionStack: {} projections but {} angles",
                data.shape()[0],
                angles.len()
            )));
        }
        Ok(ProjectionStack { data, angles })
    }

    /// Construction for operator outputs whose invariants hold structurally.
    pub(crate) fn from_parts_unchecked(data: Array3<f64>, angles: Vec<f64>) -> Self {
        debug_assert_eq!(data.shape()[0], angles.len());
        ProjectionStack { data, angles }
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// `(n_theta, M, N)`
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }

    pub fn n_theta(&self) -> usize {
        self.angles.len()
    }

    /// Rebuild with the same angles but new values of identical shape.
    pub fn with_data(&self, data: Array3<f64>) -> Result<Self> {
        if data.shape() != self.data.shape() {
            return Err(Error::validation(format!(
                "with_data: shape {:?} != {:?}",
                data.shape(),
                self.data.shape()
            )));
        }
        ProjectionStack::new(data, self.angles.clone())
    }
}

/// The same data rearranged: indexed `(detector row, angle, detector column)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinogramStack {
    data: Array3<f64>,
    angles: Vec<f64>,
}

impl SinogramStack {
    pub fn new(data: Array3<f64>, angles: Vec<f64>) -> Result<Self> {
        check_nonempty(&data, "SinogramStack")?;
        check_finite(&data, "SinogramStack")?;
        check_angles(&angles)?;
        if data.shape()[1] != angles.len() {
            return Err(Error::validation(format!(
                "SinogramStack: {} angle rows but {} angles",
                data.shape()[1],
                angles.len()
            )));
        }
        Ok(SinogramStack { data, angles })
    }

    pub(crate) fn from_parts_unchecked(data: Array3<f64>, angles: Vec<f64>) -> Self {
        debug_assert_eq!(data.shape()[1], angles.len());
        SinogramStack { data, angles }
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// `(M, n_theta, N)`
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }

    pub fn n_theta(&self) -> usize {
        self.angles.len()
    }

    pub fn with_data(&self, data: Array3<f64>) -> Result<Self> {
        if data.shape() != self.data.shape() {
            return Err(Error::validation(format!(
                "with_data: shape {:?} != {:?}",
                data.shape(),
                self.data.shape()
            )));
        }
        SinogramStack::new(data, self.angles.clone())
    }
}

/// Reconstructed attenuation per voxel, indexed `(slice, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    data: Array3<f64>,
    mask_applied: bool,
}

impl Volume {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        check_nonempty(&data, "Volume")?;
        check_finite(&data, "Volume")?;
        Ok(Volume {
            data,
            mask_applied: false,
        })
    }

    /// Constructor for volumes already known to be circularly masked.
    /// Verifies the out-of-circle voxels really are zero.
    pub fn new_masked(data: Array3<f64>) -> Result<Self> {
        let v = Volume::new(data)?;
        let (_, ny, nx) = v.dims();
        if ny != nx {
            return Err(Error::validation(
                "masked volume requires square slices".to_string(),
            ));
        }
        let c = (nx as f64 - 1.0) / 2.0;
        let r2 = (nx as f64 / 2.0).powi(2);
        for ((_, y, x), &val) in v.data.indexed_iter() {
            let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            if d2 > r2 && val != 0.0 {
                return Err(Error::validation(format!(
                    "masked volume has nonzero voxel outside circle at ({y}, {x})"
                )));
            }
        }
        Ok(Volume {
            data: v.data,
            mask_applied: true,
        })
    }

    pub(crate) fn new_masked_unchecked(data: Array3<f64>) -> Result<Self> {
        let mut v = Volume::new(data)?;
        v.mask_applied = true;
        Ok(v)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn mask_applied(&self) -> bool {
        self.mask_applied
    }

    /// `(Z, Y, X)`
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }
}
