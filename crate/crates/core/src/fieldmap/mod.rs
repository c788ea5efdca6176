//! Cavity magnetic-field maps on regular 3D grids.
//!
//! Maps come from the analytic current-sheet model in [`biot_savart`] or from
//! CSV exports of an external solver ([`io`]). Either way a map carries the
//! total electromagnetic energy of the mode at the stored amplitude, which is
//! what [`normalize_to_vacuum`] needs to rescale it to one photon.

pub mod biot_savart;
pub mod homogeneity;
pub mod io;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::PLANCK;

pub use biot_savart::{biot_savart_map, counter_propagating_pair, field_at, CurrentSheet, QuadratureOptions};
pub use homogeneity::{homogeneity, region_cells, HistogramBin, HomogeneityReport, RegionCell};
pub use io::ingest_map;

#[derive(Debug, Error)]
pub enum FieldMapError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("mode energy must be positive and finite, got {0} J")]
    NonPositiveEnergy(f64),
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("degenerate current sheet: {0}")]
    DegenerateSheet(String),
    #[error("grid point ({x}, {y}, {z}) m lies within 1e-9 m of a current sheet")]
    Singularity { x: f64, y: f64, z: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: point ({x}, {y}, {z}) does not sit on the declared grid")]
    OffGrid { line: usize, x: f64, y: f64, z: f64 },
    #[error("line {line}: duplicate node ({i}, {j}, {k})")]
    DuplicateNode { line: usize, i: usize, j: usize, k: usize },
    #[error("missing grid node ({i}, {j}, {k}) at ({x}, {y}, {z}) m")]
    MissingNode { i: usize, j: usize, k: usize, x: f64, y: f64, z: f64 },
    #[error("metadata key `{key}`: {msg}")]
    Metadata { key: String, msg: String },
    #[error("invalid sample region: {0}")]
    InvalidRegion(String),
    #[error("sample region extends outside the grid hull")]
    RegionOutsideGrid,
    #[error("sample region contains no grid cells")]
    EmptyRegion,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FieldMapError {
    pub fn code(&self) -> &'static str {
        use FieldMapError::*;
        match self {
            InvalidGrid(_) => "invalid_grid",
            NonFinite { .. } => "non_finite",
            NonPositiveEnergy(_) | NonPositive(_) => "domain",
            DegenerateSheet(_) => "degenerate_sheet",
            Singularity { .. } => "singularity",
            Parse { .. } => "parse",
            OffGrid { .. } => "inconsistent_spacing",
            DuplicateNode { .. } => "duplicate_node",
            MissingNode { .. } => "missing_node",
            Metadata { .. } => "metadata",
            InvalidRegion(_) => "invalid_region",
            RegionOutsideGrid => "region_outside_grid",
            EmptyRegion => "empty_region",
            Io(_) => "io",
        }
    }
}

/// Regular grid, x index fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vector3<f64>,
    pub spacing: Vector3<f64>,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Vector3<f64>, spacing: Vector3<f64>, dims: [usize; 3]) -> Result<Self, FieldMapError> {
        let grid = GridSpec { origin, spacing, dims };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with `dims` nodes spanning the closed box `[lo, hi]`.
    pub fn spanning(lo: Vector3<f64>, hi: Vector3<f64>, dims: [usize; 3]) -> Result<Self, FieldMapError> {
        let mut spacing = Vector3::zeros();
        for a in 0..3 {
            spacing[a] = if dims[a] > 1 { (hi[a] - lo[a]) / (dims[a] - 1) as f64 } else { (hi[a] - lo[a]).max(0.0) };
        }
        // A single layer still needs a positive thickness for cell volumes.
        for a in 0..3 {
            if dims[a] == 1 && spacing[a] == 0.0 {
                spacing[a] = 1.0;
            }
        }
        let origin = Vector3::from_fn(|a, _| if dims[a] > 1 { lo[a] } else { 0.5 * (lo[a] + hi[a]) });
        GridSpec::new(origin, spacing, dims)
    }

    pub fn validate(&self) -> Result<(), FieldMapError> {
        if self.dims.contains(&0) {
            return Err(FieldMapError::InvalidGrid(format!("dims must be >= 1, got {:?}", self.dims)));
        }
        if !self.spacing.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(FieldMapError::InvalidGrid(format!("spacing must be positive, got {:?}", self.spacing)));
        }
        if !self.origin.iter().all(|c| c.is_finite()) {
            return Err(FieldMapError::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        Vector3::new(
            self.origin.x + i as f64 * self.spacing.x,
            self.origin.y + j as f64 * self.spacing.y,
            self.origin.z + k as f64 * self.spacing.z,
        )
    }

    /// Volume represented by one node under the midpoint rule.
    pub fn node_volume(&self) -> f64 {
        self.spacing.x * self.spacing.y * self.spacing.z
    }

    /// Extent of the grid along `axis`. A single layer spans one spacing
    /// centred on its node.
    pub fn axis_hull(&self, axis: usize) -> (f64, f64) {
        let (o, s, n) = (self.origin[axis], self.spacing[axis], self.dims[axis]);
        if n == 1 {
            (o - 0.5 * s, o + 0.5 * s)
        } else {
            (o, o + (n - 1) as f64 * s)
        }
    }
}

/// Axis-aligned box; `extents` are full side lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRegion {
    pub center: Vector3<f64>,
    pub extents: Vector3<f64>,
}

impl SampleRegion {
    pub fn new(center: Vector3<f64>, extents: Vector3<f64>) -> Result<Self, FieldMapError> {
        let region = SampleRegion { center, extents };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<(), FieldMapError> {
        if !self.extents.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(FieldMapError::InvalidRegion(format!("extents must be positive, got {:?}", self.extents)));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(FieldMapError::InvalidRegion("center must be finite".into()));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.extents.x * self.extents.y * self.extents.z
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        (self.center[axis] - 0.5 * self.extents[axis], self.center[axis] + 0.5 * self.extents[axis])
    }
}

/// Vector magnetic field sampled on a grid, with the mode energy at this amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    grid: GridSpec,
    samples: Vec<Vector3<f64>>,
    energy_j: f64,
    vacuum_frequency_hz: Option<f64>,
}

impl FieldMap {
    pub fn new(grid: GridSpec, samples: Vec<Vector3<f64>>, energy_j: f64) -> Result<Self, FieldMapError> {
        grid.validate()?;
        if samples.len() != grid.len() {
            return Err(FieldMapError::InvalidGrid(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(index) = samples.iter().position(|b| !b.iter().all(|c| c.is_finite())) {
            return Err(FieldMapError::NonFinite { index });
        }
        if !(energy_j > 0.0 && energy_j.is_finite()) {
            return Err(FieldMapError::NonPositiveEnergy(energy_j));
        }
        Ok(FieldMap { grid, samples, energy_j, vacuum_frequency_hz: None })
    }

    /// Builds a map whose energy is `2 · (1/2μ₀) Σ |B|² ΔV` over the grid nodes.
    pub fn with_magnetic_energy(grid: GridSpec, samples: Vec<Vector3<f64>>) -> Result<Self, FieldMapError> {
        let energy = magnetic_energy_doubled(&grid, &samples);
        FieldMap::new(grid, samples, energy)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[Vector3<f64>] {
        &self.samples
    }

    pub fn sample(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.samples[self.grid.index(i, j, k)]
    }

    pub fn energy_j(&self) -> f64 {
        self.energy_j
    }

    /// Set once the map has been scaled to single-photon amplitude at this frequency.
    pub fn vacuum_frequency_hz(&self) -> Option<f64> {
        self.vacuum_frequency_hz
    }

    pub fn is_vacuum_normalized(&self) -> bool {
        self.vacuum_frequency_hz.is_some()
    }

    pub(crate) fn set_vacuum_frequency(&mut self, f: Option<f64>) {
        self.vacuum_frequency_hz = f;
    }
}

/// Total mode energy from the magnetic field alone, doubled for the electric
/// half of the LC cycle.
pub fn magnetic_energy_doubled(grid: &GridSpec, samples: &[Vector3<f64>]) -> f64 {
    let sq: Vec<f64> = samples.iter().map(|b| b.norm_squared()).collect();
    crate::quadrature::pairwise_sum(&sq) * grid.node_volume() / crate::constants::MU_0
}

/// Scales the map to the single-photon field `B/√n` with `n = E_em/(h f_c)`.
pub fn normalize_to_vacuum(map: &FieldMap, f_c: f64) -> Result<FieldMap, FieldMapError> {
    if !(f_c > 0.0 && f_c.is_finite()) {
        return Err(FieldMapError::NonPositive("f_c"));
    }
    let photon = PLANCK * f_c;
    let n = map.energy_j / photon;
    let scale = 1.0 / n.sqrt();
    let samples = if scale == 1.0 { map.samples.clone() } else { map.samples.iter().map(|b| b * scale).collect() };
    let mut out = FieldMap::new(map.grid, samples, photon)?;
    out.set_vacuum_frequency(Some(f_c));
    Ok(out)
}
