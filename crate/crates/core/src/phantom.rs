//! Nested-cuboid ground-truth phantom.
//!
//! Shell `k` is the set of voxels inside cuboid `k` but outside cuboid
//! `k + 1`, where cuboid `k` is the grid inset by `k * margin` voxels on every
//! face. Cuboid 0 is the whole grid.

use crate::error::{Error, Result};
use crate::volume::{Dims, LabelVolume, Volume};

pub const DEFAULT_INTENSITY_MAX: f32 = 255.0;
pub const DEFAULT_SHELLS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub num_shells: usize,
    pub intensities: Vec<f32>,
    pub margin: usize,
    pub intensity_max: f32,
}

impl PhantomSpec {
    /// Evenly spaced intensities (60/120/180/240 for four shells on a 255
    /// scale) and a margin that gives the cuboids comparable extents.
    pub fn with_defaults(dims: Dims, num_shells: usize) -> Self {
        let n = num_shells.max(1);
        let step = (DEFAULT_INTENSITY_MAX - 15.0) / n as f32;
        PhantomSpec {
            dims,
            num_shells,
            intensities: (1..=n).map(|k| step * k as f32).collect(),
            margin: dims.min_extent() / (2 * n),
            intensity_max: DEFAULT_INTENSITY_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_shells < 2 {
            return Err(Error::validation(format!(
                "phantom needs at least 2 shells, got {}",
                self.num_shells
            )));
        }
        if self.num_shells > 256 {
            return Err(Error::validation("phantom supports at most 256 shells"));
        }
        if self.intensities.len() != self.num_shells {
            return Err(Error::validation(format!(
                "{} intensities given for {} shells",
                self.intensities.len(),
                self.num_shells
            )));
        }
        if self.margin == 0 {
            return Err(Error::validation("phantom margin must be at least 1"));
        }
        if !(self.intensity_max.is_finite() && self.intensity_max > 0.0) {
            return Err(Error::validation("intensity_max must be positive"));
        }
        if self.intensities.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::validation(
                "intensities must be finite and non-negative",
            ));
        }
        if self.intensities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("intensities must be strictly ascending"));
        }
        if self.intensities[self.num_shells - 1] > self.intensity_max {
            return Err(Error::validation("intensities exceed intensity_max"));
        }
        // innermost cuboid is inset by (num_shells - 1) * margin per face
        if 2 * (self.num_shells - 1) * self.margin >= self.dims.min_extent() {
            return Err(Error::validation(format!(
                "margin {} leaves no room for {} shells in {}",
                self.margin, self.num_shells, self.dims
            )));
        }
        Ok(())
    }

    /// Shell index of voxel `(x, y, z)`.
    pub fn shell_of(&self, x: usize, y: usize, z: usize) -> usize {
        let d = self.dims;
        let depth = x
            .min(d.nx - 1 - x)
            .min(y.min(d.ny - 1 - y))
            .min(z.min(d.nz - 1 - z));
        (depth / self.margin).min(self.num_shells - 1)
    }
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<(Volume, LabelVolume)> {
    spec.validate()?;
    let dims = spec.dims;
    let labels: Vec<u8> = (0..dims.len())
        .map(|i| {
            let (x, y, z) = dims.coords(i);
            spec.shell_of(x, y, z) as u8
        })
        .collect();
    let data = labels
        .iter()
        .map(|&l| spec.intensities[l as usize])
        .collect();
    Ok((
        Volume::new(dims, data, spec.intensity_max)?,
        LabelVolume::new(dims, labels)?,
    ))
}
