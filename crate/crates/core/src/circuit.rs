//! Lumped-element model of the bow-tie cavity.
//!
//! The two bow-tie tops form parallel-plate capacitors with the lid, wired in
//! series through the current path between them. The current path is treated
//! as a flat wire of length `l` and width `w`, whose inductance is
//! `k_L · μ₀/2π · l · (ln(l/w) + w/l)`. `k_L` is a dimensionless calibration
//! constant that absorbs whatever the flat-wire picture misses.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{EPSILON_0, MU_0};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("flat-wire model needs width < length, got w = {width} m, l = {length} m")]
    WidthNotBelowLength { width: f64, length: f64 },
}

impl CircuitError {
    pub fn code(&self) -> &'static str {
        match self {
            CircuitError::NonPositive { .. } => "domain",
            CircuitError::WidthNotBelowLength { .. } => "flat_wire_invalid",
        }
    }
}

/// Bow-tie cavity dimensions, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Top area of one bow-tie [m²].
    pub plate_area: f64,
    /// Bow-tie to lid separation [m].
    pub gap: f64,
    /// Current path length between the two capacitors [m].
    pub path_length: f64,
    /// Current path width [m].
    pub path_width: f64,
    /// Gap dielectric constant; 1 for vacuum.
    #[serde(default = "one")]
    pub relative_permittivity: f64,
}

fn one() -> f64 {
    1.0
}

fn positive(field: &'static str, value: f64) -> Result<(), CircuitError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CircuitError::NonPositive { field, value })
    }
}

impl CavityGeometry {
    /// Vacuum-gap geometry.
    pub fn new(plate_area: f64, gap: f64, path_length: f64, path_width: f64) -> Self {
        CavityGeometry { plate_area, gap, path_length, path_width, relative_permittivity: 1.0 }
    }

    pub fn with_gap(self, gap: f64) -> Self {
        CavityGeometry { gap, ..self }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        self.validate_without_gap()?;
        positive("gap", self.gap)
    }

    fn validate_without_gap(&self) -> Result<(), CircuitError> {
        positive("plate_area", self.plate_area)?;
        positive("path_length", self.path_length)?;
        positive("path_width", self.path_width)?;
        positive("relative_permittivity", self.relative_permittivity)?;
        if self.path_width >= self.path_length {
            return Err(CircuitError::WidthNotBelowLength {
                width: self.path_width,
                length: self.path_length,
            });
        }
        Ok(())
    }
}

/// Resonator parameters derived from a geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitParams {
    #[serde(rename = "C_total_F")]
    pub c_total: f64,
    #[serde(rename = "L_total_H")]
    pub l_total: f64,
    #[serde(rename = "omega_c_rad_per_s")]
    pub omega_c: f64,
    #[serde(rename = "f_c_Hz")]
    pub f_c: f64,
}

impl CircuitParams {
    pub fn from_lc(l_total: f64, c_total: f64) -> Self {
        let omega_c = 1.0 / (l_total * c_total).sqrt();
        CircuitParams { c_total, l_total, omega_c, f_c: omega_c / TAU }
    }
}

/// Two equal plate capacitors in series: `C_tot = ε_r ε₀ A / (2d)`.
pub fn series_capacitance(geom: &CavityGeometry) -> Result<f64, CircuitError> {
    positive("plate_area", geom.plate_area)?;
    positive("gap", geom.gap)?;
    positive("relative_permittivity", geom.relative_permittivity)?;
    Ok(geom.relative_permittivity * EPSILON_0 * geom.plate_area / (2.0 * geom.gap))
}

/// Flat-wire inductance of the current path.
pub fn flat_wire_inductance(geom: &CavityGeometry, k_l: f64) -> Result<f64, CircuitError> {
    positive("path_length", geom.path_length)?;
    positive("path_width", geom.path_width)?;
    positive("k_L", k_l)?;
    let (l, w) = (geom.path_length, geom.path_width);
    if w >= l {
        return Err(CircuitError::WidthNotBelowLength { width: w, length: l });
    }
    Ok(k_l * MU_0 / TAU * l * ((l / w).ln() + w / l))
}

pub fn eigenfrequency(geom: &CavityGeometry, k_l: f64) -> Result<CircuitParams, CircuitError> {
    geom.validate()?;
    let c = series_capacitance(geom)?;
    let l = flat_wire_inductance(geom, k_l)?;
    Ok(CircuitParams::from_lc(l, c))
}

/// Gap `d` that puts the resonance at `f_target`.
///
/// From `ω² = 1/(L C)` and `C = ε_r ε₀ A/(2d)`: `d = ε_r ε₀ A L ω² / 2`.
/// The `gap` field of `geom` is ignored.
pub fn gap_for_frequency(geom: &CavityGeometry, k_l: f64, f_target: f64) -> Result<f64, CircuitError> {
    geom.validate_without_gap()?;
    positive("f_target", f_target)?;
    let l = flat_wire_inductance(geom, k_l)?;
    let omega = TAU * f_target;
    Ok(geom.relative_permittivity * EPSILON_0 * geom.plate_area * l * omega * omega / 2.0)
}

/// Inductance calibration constant `k_L` that puts the resonance of `geom` at `f_target`.
pub fn calibrate_inductance(geom: &CavityGeometry, f_target: f64) -> Result<f64, CircuitError> {
    geom.validate()?;
    positive("f_target", f_target)?;
    let c = series_capacitance(geom)?;
    let l_unit = flat_wire_inductance(geom, 1.0)?;
    let omega = TAU * f_target;
    Ok(1.0 / (omega * omega * c * l_unit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const MM: f64 = 1e-3;

    fn reference() -> CavityGeometry {
        CavityGeometry::new(100.0 * MM * MM, 1.0 * MM, 10.0 * MM, 1.0 * MM)
    }

    #[test]
    fn capacitance_constants_cancel() {
        let g = CavityGeometry::new(2.0 / EPSILON_0, 1.0, 10.0, 1.0);
        assert_relative_eq!(series_capacitance(&g).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn capacitance_of_reference_plate() {
        let c = series_capacitance(&reference()).unwrap();
        assert_relative_eq!(c, 4.427e-13, max_relative = 1e-4);
        let c2 = series_capacitance(&reference().with_gap(2.0 * MM)).unwrap();
        assert_relative_eq!(c2, c / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn dielectric_gap_scales_capacitance() {
        let mut g = reference();
        g.relative_permittivity = 5.7;
        let ratio = series_capacitance(&g).unwrap() / series_capacitance(&reference()).unwrap();
        assert_relative_eq!(ratio, 5.7, max_relative = 1e-14);
    }

    #[test]
    fn inductance_of_reference_path() {
        let l = flat_wire_inductance(&reference(), 1.0).unwrap();
        assert_relative_eq!(l, 4.805170e-9, max_relative = 1e-6);
    }

    #[test]
    fn inductance_log_term_limit() {
        // l = e·w: ln term is exactly one, the w/l term is 1/e.
        let w = 1e-6;
        let g = CavityGeometry::new(1.0, 1.0, w * std::f64::consts::E, w);
        let l = flat_wire_inductance(&g, 1.0).unwrap();
        let expected = MU_0 / TAU * g.path_length * (1.0 + 1.0 / std::f64::consts::E);
        assert_relative_eq!(l, expected, max_relative = 1e-14);
        // w/l → 0 with ln(l/w) pinned at one is only reachable asymptotically;
        // check the relative size of the correction shrinks.
        let g_thin = CavityGeometry::new(1.0, 1.0, 1.0, 1e-9);
        let l_thin = flat_wire_inductance(&g_thin, 1.0).unwrap();
        let ln_only = MU_0 / TAU * (1e9f64).ln();
        assert_relative_eq!(l_thin, ln_only, max_relative = 1e-9);
    }

    #[test]
    fn inductance_scales_linearly() {
        let g = reference();
        let s = 3.7;
        let scaled = CavityGeometry { path_length: g.path_length * s, path_width: g.path_width * s, ..g };
        assert_relative_eq!(
            flat_wire_inductance(&scaled, 1.0).unwrap(),
            s * flat_wire_inductance(&g, 1.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn wide_path_rejected() {
        let g = CavityGeometry::new(1e-4, 1e-3, 1e-3, 1e-3);
        assert!(matches!(flat_wire_inductance(&g, 1.0), Err(CircuitError::WidthNotBelowLength { .. })));
        assert!(eigenfrequency(&g, 1.0).is_err());
    }

    #[test]
    fn non_positive_inputs_rejected() {
        let g = reference().with_gap(0.0);
        assert_eq!(series_capacitance(&g).unwrap_err().code(), "domain");
        let g = CavityGeometry { plate_area: -1.0, ..reference() };
        assert!(series_capacitance(&g).is_err());
        assert!(gap_for_frequency(&reference(), 1.0, 0.0).is_err());
    }

    #[test]
    fn one_nanohenry_one_picofarad() {
        let p = CircuitParams::from_lc(1e-9, 1e-12);
        assert_relative_eq!(p.f_c, 5.0329e9, max_relative = 1e-5);
    }

    #[test]
    fn doubling_gap_raises_frequency_by_sqrt2() {
        let f1 = eigenfrequency(&reference(), 1.0).unwrap().f_c;
        let f2 = eigenfrequency(&reference().with_gap(2.0 * MM), 1.0).unwrap().f_c;
        assert_relative_eq!(f2 / f1, 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn calibration_to_unloaded_frequency() {
        let g = reference();
        // Solve the gap for 2.775 GHz and confirm forward evaluation.
        let d = gap_for_frequency(&g, 1.0, 2.775e9).unwrap();
        assert_relative_eq!(d, 6.467154e-4, max_relative = 1e-6);
        let f = eigenfrequency(&g.with_gap(d), 1.0).unwrap().f_c;
        assert_relative_eq!(f, 2.775e9, max_relative = 1e-12);
        // Or keep the gap and calibrate k_L.
        let k = calibrate_inductance(&g, 2.775e9).unwrap();
        let f = eigenfrequency(&g, k).unwrap().f_c;
        assert_relative_eq!(f, 2.775e9, max_relative = 1e-12);
    }

    #[test]
    fn doubling_target_quadruples_gap() {
        let d1 = gap_for_frequency(&reference(), 1.0, 2e9).unwrap();
        let d2 = gap_for_frequency(&reference(), 1.0, 4e9).unwrap();
        assert_relative_eq!(d2 / d1, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn mm_scale_lands_in_microwave_band() {
        let f = eigenfrequency(&reference(), 1.0).unwrap().f_c;
        assert!(f > 0.1e9 && f < 100e9, "{f}");
    }

    fn geometry() -> impl Strategy<Value = CavityGeometry> {
        (1e-6..1e-3f64, 1e-5..1e-2f64, 1e-3..5e-2f64, 0.01..0.9f64).prop_map(|(a, d, l, wf)| {
            CavityGeometry::new(a, d, l, l * wf)
        })
    }

    proptest! {
        #[test]
        fn circuit_params_invariants(g in geometry()) {
            let p = eigenfrequency(&g, 1.0).unwrap();
            prop_assert_eq!(p.omega_c, 1.0 / (p.l_total * p.c_total).sqrt());
            prop_assert_eq!(p.f_c, p.omega_c / TAU);
        }

        #[test]
        fn gap_roundtrip(g in geometry(), k in 0.2..5.0f64) {
            let f = eigenfrequency(&g, k).unwrap().f_c;
            let d = gap_for_frequency(&g, k, f).unwrap();
            prop_assert!(((d - g.gap) / g.gap).abs() < 1e-12);
        }
    }
}
