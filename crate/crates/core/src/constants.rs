//! Physical constants and material defaults.
//!
//! Every derived number in the crate traces back to this table, which the
//! CLI prints verbatim (`bowtie constants`). SI values are CODATA 2018.

use std::f64::consts::PI;

/// Vacuum permittivity ε₀ [F/m].
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability μ₀ [H/m].
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Planck constant h [J s] (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant ħ [J s].
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Bohr magneton μ_B [J/T].
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Carbon atom number density of diamond [m⁻³] (1.76e23 cm⁻³).
pub const DIAMOND_CARBON_DENSITY: f64 = 1.76e29;
/// NV⁻ ground-state zero-field splitting D/h [Hz].
pub const NV_ZERO_FIELD_SPLITTING: f64 = 2.87e9;
/// NV⁻ electron g-factor.
pub const NV_G_FACTOR: f64 = 2.0028;
/// ⟨±1|Sx|0⟩ for spin 1.
pub const SPIN1_TRANSITION_ELEMENT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// A named constant with its unit, for the printed registry.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Constant {
    pub name: &'static str,
    pub symbol: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

/// All constants used by the crate, in display order.
pub fn registry() -> Vec<Constant> {
    vec![
        Constant { name: "vacuum permittivity", symbol: "epsilon_0", value: EPSILON_0, unit: "F/m" },
        Constant { name: "vacuum permeability", symbol: "mu_0", value: MU_0, unit: "H/m" },
        Constant { name: "Planck constant", symbol: "h", value: PLANCK, unit: "J s" },
        Constant { name: "reduced Planck constant", symbol: "hbar", value: HBAR, unit: "J s" },
        Constant { name: "Bohr magneton", symbol: "mu_B", value: BOHR_MAGNETON, unit: "J/T" },
        Constant {
            name: "diamond carbon site density",
            symbol: "n_C",
            value: DIAMOND_CARBON_DENSITY,
            unit: "1/m^3",
        },
        Constant { name: "NV zero-field splitting", symbol: "D", value: NV_ZERO_FIELD_SPLITTING, unit: "Hz" },
        Constant { name: "NV g-factor", symbol: "g", value: NV_G_FACTOR, unit: "1" },
        Constant {
            name: "spin-1 transition matrix element",
            symbol: "|S|",
            value: SPIN1_TRANSITION_ELEMENT,
            unit: "1",
        },
    ]
}
