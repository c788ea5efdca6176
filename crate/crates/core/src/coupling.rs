//! Single-spin and collective spin–cavity coupling.
//!
//! `g₀ = √(2/3) · (g μ_B / 2h) · |B_vac| · |S|` in Hz. The √(2/3) factor is
//! the mean perpendicular projection of a ⟨100⟩-oriented mode field onto the
//! four NV axes; [`Projection::PerAxis`] computes that projection explicitly
//! instead.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{BOHR_MAGNETON, DIAMOND_CARBON_DENSITY, PLANCK, SPIN1_TRANSITION_ELEMENT};
use crate::fieldmap::homogeneity::scalar_stats;
use crate::fieldmap::{region_cells, FieldMap, FieldMapError, SampleRegion};
use crate::nvspin::{NvAxes, SpinSpecies};

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be non-negative and finite, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("field map is not vacuum-normalized; normalize it to the cavity frequency first")]
    Unnormalized,
    #[error(transparent)]
    FieldMap(#[from] FieldMapError),
}

impl CouplingError {
    pub fn code(&self) -> &'static str {
        match self {
            CouplingError::NonPositive { .. } | CouplingError::Negative { .. } => "domain",
            CouplingError::Unnormalized => "unnormalized",
            CouplingError::FieldMap(e) => e.code(),
        }
    }
}

/// How the mode field is projected onto the spin axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// √(2/3)·|B|, independent of field direction.
    #[default]
    Global,
    /// Mean over the four NV axes of |B − (B·n)n|.
    PerAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// NV concentration [ppm of carbon sites].
    pub density_ppm: f64,
    /// Carbon sites per m³.
    #[serde(default = "default_carbon_density")]
    pub carbon_site_density: f64,
    pub region: SampleRegion,
    /// Transition matrix element |S|.
    #[serde(default = "default_matrix_element")]
    pub matrix_element: f64,
}

fn default_carbon_density() -> f64 {
    DIAMOND_CARBON_DENSITY
}

fn default_matrix_element() -> f64 {
    SPIN1_TRANSITION_ELEMENT
}

impl EnsembleSpec {
    pub fn new(density_ppm: f64, region: SampleRegion) -> Self {
        EnsembleSpec {
            density_ppm,
            carbon_site_density: DIAMOND_CARBON_DENSITY,
            region,
            matrix_element: SPIN1_TRANSITION_ELEMENT,
        }
    }

    pub fn validate(&self) -> Result<(), CouplingError> {
        non_negative("density_ppm", self.density_ppm)?;
        non_negative("carbon_site_density", self.carbon_site_density)?;
        non_negative("matrix_element", self.matrix_element)?;
        self.region.validate()?;
        Ok(())
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<(), CouplingError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CouplingError::Negative { field, value })
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), CouplingError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CouplingError::NonPositive { field, value })
    }
}

/// μ_B g / 2h [Hz/T].
fn half_gyromagnetic(species: &SpinSpecies) -> f64 {
    BOHR_MAGNETON * species.g_factor / (2.0 * PLANCK)
}

/// Single-spin coupling |g₀| [Hz] for a vacuum field vector.
pub fn single_spin_coupling(b_vac: &Vector3<f64>, species: &SpinSpecies, matrix_element: f64) -> f64 {
    (2.0f64 / 3.0).sqrt() * half_gyromagnetic(species) * b_vac.norm() * matrix_element
}

/// Per-axis variant: the perpendicular field is projected explicitly for each
/// NV orientation and averaged.
pub fn single_spin_coupling_projected(b_vac: &Vector3<f64>, species: &SpinSpecies, matrix_element: f64, axes: &NvAxes) -> f64 {
    let perp: f64 = axes.iter().map(|n| (b_vac - n * n.dot(b_vac)).norm()).sum::<f64>() / 4.0;
    half_gyromagnetic(species) * perp * matrix_element
}

pub fn spin_count(ens: &EnsembleSpec) -> Result<f64, CouplingError> {
    ens.validate()?;
    Ok(ens.density_ppm * 1e-6 * ens.carbon_site_density * ens.region.volume())
}

/// Ω = g₀ √N.
pub fn collective_coupling(g0_mean: f64, n_spins: f64) -> Result<f64, CouplingError> {
    non_negative("g0_mean", g0_mean)?;
    non_negative("N_spins", n_spins)?;
    Ok(g0_mean * n_spins.sqrt())
}

/// C = Ω²/(κγ*).
pub fn cooperativity(omega: f64, kappa: f64, gamma_star: f64) -> Result<f64, CouplingError> {
    non_negative("Omega", omega)?;
    positive("kappa", kappa)?;
    positive("gamma_star", gamma_star)?;
    Ok(omega * omega / (kappa * gamma_star))
}

/// Cavity and spin linewidths (HWHM, Hz) for the cooperativity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linewidths {
    pub kappa: f64,
    pub gamma_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingCell {
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
    #[serde(rename = "z_m")]
    pub z: f64,
    #[serde(rename = "weight_m3")]
    pub weight: f64,
    #[serde(rename = "g0_Hz")]
    pub g0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub g0_map: Vec<CouplingCell>,
    #[serde(rename = "g0_mean_Hz")]
    pub g0_mean: f64,
    pub g0_rms_deviation: f64,
    pub g0_max_deviation: f64,
    #[serde(rename = "N_spins")]
    pub n_spins: f64,
    #[serde(rename = "Omega_Hz")]
    pub omega: f64,
    #[serde(rename = "kappa_Hz", skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(rename = "gamma_star_Hz", skip_serializing_if = "Option::is_none")]
    pub gamma_star: Option<f64>,
    pub cooperativity: Option<f64>,
    pub projection: Projection,
}

/// Couplings over the ensemble's region of a vacuum-normalized map.
pub fn coupling_report(
    map: &FieldMap,
    ens: &EnsembleSpec,
    species: &SpinSpecies,
    linewidths: Option<Linewidths>,
    projection: Projection,
) -> Result<CouplingReport, CouplingError> {
    if !map.is_vacuum_normalized() {
        return Err(CouplingError::Unnormalized);
    }
    ens.validate()?;
    let cells = region_cells(map, &ens.region)?;
    let axes = NvAxes::default();
    let g0 = |b: &Vector3<f64>| match projection {
        Projection::Global => single_spin_coupling(b, species, ens.matrix_element),
        Projection::PerAxis => single_spin_coupling_projected(b, species, ens.matrix_element, &axes),
    };
    let g0_map: Vec<CouplingCell> = cells
        .iter()
        .map(|c| CouplingCell { x: c.center.x, y: c.center.y, z: c.center.z, weight: c.weight, g0: g0(&c.field) })
        .collect();
    let values: Vec<f64> = g0_map.iter().map(|c| c.g0).collect();
    let weights: Vec<f64> = g0_map.iter().map(|c| c.weight).collect();
    let stats = scalar_stats(&values, &weights, &[]);

    let n_spins = spin_count(ens)?;
    let omega = collective_coupling(stats.mean, n_spins)?;
    let cooperativity = linewidths.map(|lw| cooperativity(omega, lw.kappa, lw.gamma_star)).transpose()?;
    Ok(CouplingReport {
        g0_map,
        g0_mean: stats.mean,
        g0_rms_deviation: stats.rms_deviation,
        g0_max_deviation: stats.max_deviation,
        n_spins,
        omega,
        kappa: linewidths.map(|l| l.kappa),
        gamma_star: linewidths.map(|l| l.gamma_star),
        cooperativity,
        projection,
    })
}

/// |B_vac| that gives single-spin coupling `g0` under the global projection.
pub fn vacuum_field_for_coupling(g0: f64, species: &SpinSpecies, matrix_element: f64) -> f64 {
    g0 / ((2.0f64 / 3.0).sqrt() * half_gyromagnetic(species) * matrix_element)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldmap::{homogeneity, normalize_to_vacuum, GridSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const MM: f64 = 1e-3;

    fn reference_sample() -> SampleRegion {
        SampleRegion::new(Vector3::zeros(), Vector3::new(4.2 * MM, 3.4 * MM, 0.92 * MM)).unwrap()
    }

    #[test]
    fn zero_field_zero_coupling() {
        assert_eq!(single_spin_coupling(&Vector3::zeros(), &SpinSpecies::default(), SPIN1_TRANSITION_ELEMENT), 0.0);
    }

    #[test]
    fn seventy_millihertz_field() {
        let species = SpinSpecies::default();
        let g = single_spin_coupling(&Vector3::new(0.0, 8.74e-12, 0.0), &species, SPIN1_TRANSITION_ELEMENT);
        assert!((g - 0.070).abs() < 0.001, "{g}");
        let b = vacuum_field_for_coupling(0.070, &species, SPIN1_TRANSITION_ELEMENT);
        assert_relative_eq!(b, 8.650467e-12, max_relative = 1e-6);
        let g2 = single_spin_coupling(&Vector3::new(0.0, 2.0 * b, 0.0), &species, SPIN1_TRANSITION_ELEMENT);
        assert_relative_eq!(g2, 0.14, max_relative = 1e-14);
    }

    #[test]
    fn per_axis_projection_agrees_along_100() {
        let species = SpinSpecies::default();
        let axes = NvAxes::default();
        for b in [Vector3::new(0.0, 1e-11, 0.0), Vector3::new(0.0, 0.0, -3e-12)] {
            let global = single_spin_coupling(&b, &species, 0.7);
            let local = single_spin_coupling_projected(&b, &species, 0.7, &axes);
            assert_relative_eq!(global, local, max_relative = 1e-14);
        }
        // Along a ⟨111⟩ axis one sub-ensemble decouples, so the mean drops.
        let b = axes.0[0] * 1e-11;
        assert!(single_spin_coupling_projected(&b, &species, 0.7, &axes) < single_spin_coupling(&b, &species, 0.7));
    }

    #[test]
    fn reference_ensemble_size() {
        let n = spin_count(&EnsembleSpec::new(40.0, reference_sample())).unwrap();
        assert_relative_eq!(n, 9.248870e16, max_relative = 1e-6);
        assert_eq!(spin_count(&EnsembleSpec::new(0.0, reference_sample())).unwrap(), 0.0);
        let doubled = SampleRegion::new(Vector3::zeros(), Vector3::new(8.4 * MM, 3.4 * MM, 0.92 * MM)).unwrap();
        let n2 = spin_count(&EnsembleSpec::new(40.0, doubled)).unwrap();
        assert_relative_eq!(n2, 2.0 * n, max_relative = 1e-15);
    }

    #[test]
    fn collective_and_cooperativity() {
        let n = spin_count(&EnsembleSpec::new(40.0, reference_sample())).unwrap();
        let omega = collective_coupling(0.070, n).unwrap();
        assert_relative_eq!(omega, 21.28837e6, max_relative = 1e-6);
        assert_eq!(collective_coupling(0.07, 0.0).unwrap(), 0.0);
        assert_relative_eq!(collective_coupling(0.07, 4.0 * n).unwrap(), 2.0 * omega, max_relative = 1e-15);

        let c = cooperativity(12.46e6, 1.91e6, 3e6).unwrap();
        assert!((c - 27.1).abs() < 0.05, "{c}");
        assert_eq!(cooperativity(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(cooperativity(2.0 * 12.46e6, 1.91e6, 3e6).unwrap(), 4.0 * c, max_relative = 1e-15);
        assert_eq!(cooperativity(1.0, 0.0, 1.0).unwrap_err().code(), "domain");
        assert_eq!(cooperativity(1.0, 1.0, -1.0).unwrap_err().code(), "domain");
    }

    fn vacuum_map(field: impl Fn(Vector3<f64>) -> Vector3<f64>) -> FieldMap {
        let grid = GridSpec::spanning(Vector3::new(-3.0 * MM, -2.0 * MM, -0.6 * MM), Vector3::new(3.0 * MM, 2.0 * MM, 0.6 * MM), [7, 5, 4]).unwrap();
        let samples = (0..grid.len())
            .map(|idx| {
                let [i, j, k] = grid.unravel(idx);
                field(grid.node(i, j, k))
            })
            .collect();
        let map = FieldMap::new(grid, samples, 1e-15).unwrap();
        normalize_to_vacuum(&map, 3.121e9).unwrap()
    }

    #[test]
    fn unnormalized_map_rejected() {
        let grid = GridSpec::new(Vector3::zeros(), Vector3::repeat(1.0), [2, 2, 2]).unwrap();
        let map = FieldMap::new(grid, vec![Vector3::x(); 8], 1.0).unwrap();
        let ens = EnsembleSpec::new(1.0, SampleRegion::new(Vector3::repeat(0.5), Vector3::repeat(0.5)).unwrap());
        let err = coupling_report(&map, &ens, &SpinSpecies::default(), None, Projection::Global).unwrap_err();
        assert_eq!(err.code(), "unnormalized");
    }

    #[test]
    fn uniform_map_report() {
        let map = vacuum_map(|_| Vector3::new(0.0, 1.0, 0.0));
        let ens = EnsembleSpec::new(40.0, reference_sample());
        let lw = Linewidths { kappa: 1.91e6, gamma_star: 3e6 };
        let r = coupling_report(&map, &ens, &SpinSpecies::default(), Some(lw), Projection::Global).unwrap();
        assert!(r.g0_rms_deviation < 1e-14);
        assert_eq!(r.omega, r.g0_mean * r.n_spins.sqrt());
        let c = r.cooperativity.unwrap();
        assert_relative_eq!(c, r.omega * r.omega / (1.91e6 * 3e6), max_relative = 1e-15);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["g0_mean_Hz", "Omega_Hz", "N_spins", "kappa_Hz", "gamma_star_Hz", "cooperativity"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn coupling_deviations_follow_field_deviations() {
        let map = vacuum_map(|p| Vector3::new(0.1 * p.z / MM, 1.0 + 0.05 * (p.x / MM).powi(2), 0.0));
        let ens = EnsembleSpec::new(40.0, reference_sample());
        let r = coupling_report(&map, &ens, &SpinSpecies::default(), None, Projection::Global).unwrap();
        let h = homogeneity(&map, &ens.region, &[]).unwrap();
        assert!(h.rms_deviation > 1e-3);
        assert_relative_eq!(r.g0_rms_deviation, h.rms_deviation, max_relative = 1e-12);
        assert_relative_eq!(r.g0_max_deviation, h.max_deviation, max_relative = 1e-12);
        assert!(r.cooperativity.is_none());
    }

    #[test]
    fn zero_density_gives_zero_omega() {
        let map = vacuum_map(|_| Vector3::new(0.0, 1.0, 0.0));
        let r = coupling_report(&map, &EnsembleSpec::new(0.0, reference_sample()), &SpinSpecies::default(), None, Projection::Global).unwrap();
        assert_eq!(r.omega, 0.0);
    }

    proptest! {
        #[test]
        fn omega_scale_law(g0 in 1e-3..1.0f64, n in 1e10..1e18f64, s in 0.1..10.0f64) {
            let a = collective_coupling(g0, s * s * n).unwrap();
            let b = s * collective_coupling(g0, n).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * b);
        }

        #[test]
        fn spin_count_is_additive(ppm in 0.0..100.0f64, split in 0.05..0.95f64) {
            let whole = reference_sample();
            let w = whole.extents.x;
            let left = SampleRegion::new(Vector3::new(-0.5 * w + 0.5 * split * w, 0.0, 0.0), Vector3::new(split * w, whole.extents.y, whole.extents.z)).unwrap();
            let right = SampleRegion::new(Vector3::new(0.5 * w - 0.5 * (1.0 - split) * w, 0.0, 0.0), Vector3::new((1.0 - split) * w, whole.extents.y, whole.extents.z)).unwrap();
            let total = spin_count(&EnsembleSpec::new(ppm, whole)).unwrap();
            let parts = spin_count(&EnsembleSpec::new(ppm, left)).unwrap() + spin_count(&EnsembleSpec::new(ppm, right)).unwrap();
            prop_assert!((total - parts).abs() <= 1e-12 * total.max(1.0));
        }

        #[test]
        fn coupling_is_linear(b in 1e-13..1e-9f64, s in 0.1..10.0f64) {
            let species = SpinSpecies::default();
            let g1 = single_spin_coupling(&Vector3::new(b, 0.0, 0.0), &species, SPIN1_TRANSITION_ELEMENT);
            let g2 = single_spin_coupling(&Vector3::new(s * b, 0.0, 0.0), &species, SPIN1_TRANSITION_ELEMENT);
            prop_assert!((g2 - s * g1).abs() <= 1e-14 * g2);
            prop_assert!(g1 >= 0.0);
        }
    }
}
