//! TOML run configuration. Every section is optional; keys carry their unit
//! as a suffix. Relative paths resolve against the config file's directory.

#![allow(non_snake_case)]

use std::path::{Path, PathBuf};

use serde::Deserialize;

use bowtie_core::coupling::Projection;
use bowtie_core::nvspin::Branch;
use bowtie_core::spectroscopy::KappaConvention;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub species: SpeciesSection,
    #[serde(default)]
    pub spins: SpinsSection,
    #[serde(default)]
    pub fieldmap: FieldMapSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub plot_data: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub plate_area_m2: Option<f64>,
    pub gap_m: Option<f64>,
    pub path_length_m: Option<f64>,
    pub path_width_m: Option<f64>,
    pub relative_permittivity: Option<f64>,
    #[serde(rename = "k_L")]
    pub k_l: Option<f64>,
    pub target_freq_Hz: Option<f64>,
    pub calibrate_to_Hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    pub zero_field_splitting_Hz: Option<f64>,
    pub g_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinsSection {
    pub direction: Option<[f64; 3]>,
    pub b_max_T: Option<f64>,
    pub steps: Option<usize>,
    pub tune_to_Hz: Option<f64>,
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapSource {
    Model,
    File,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapSection {
    pub source: Option<MapSource>,
    pub file: Option<PathBuf>,
    pub sheet_length_m: Option<f64>,
    pub sheet_width_m: Option<f64>,
    pub sheet_gap_m: Option<f64>,
    pub surface_current_A_per_m: Option<f64>,
    pub grid_lo_m: Option<[f64; 3]>,
    pub grid_hi_m: Option<[f64; 3]>,
    pub grid_dims: Option<[usize; 3]>,
    pub rel_tol: Option<f64>,
    pub f_c_Hz: Option<f64>,
    pub histogram_bins: Option<Vec<f64>>,
    pub region_center_m: Option<[f64; 3]>,
    pub region_extents_m: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub density_ppm: Option<f64>,
    pub region_center_m: Option<[f64; 3]>,
    pub region_extents_m: Option<[f64; 3]>,
    pub carbon_site_density_m3: Option<f64>,
    pub matrix_element: Option<f64>,
    pub projection: Option<Projection>,
    /// Uniform single-spin coupling in place of a field map.
    pub g0_Hz: Option<f64>,
    /// Measured collective coupling, reported alongside the computed one.
    pub measured_Omega_Hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega_c_Hz: Option<f64>,
    pub kappa_Hz: Option<f64>,
    pub omega_s_Hz: Option<f64>,
    pub gamma_star_Hz: Option<f64>,
    pub Omega_Hz: Option<f64>,
    /// Loaded quality factor; converted to κ when `kappa_Hz` is absent.
    pub Q: Option<f64>,
    pub kappa_convention: Option<KappaConvention>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub f_min_Hz: Option<f64>,
    pub f_max_Hz: Option<f64>,
    pub points: Option<usize>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
    pub detuning_min_Hz: Option<f64>,
    pub detuning_max_Hz: Option<f64>,
    pub detuning_points: Option<usize>,
    pub probe_min_Hz: Option<f64>,
    pub probe_max_Hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub data: Option<PathBuf>,
    pub decibels: Option<bool>,
    pub fix: Option<Vec<String>>,
    pub amplitude: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let mut cfg = RunConfig::parse(&text).map_err(|msg| CliError::Config { path: path.to_path_buf(), msg })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base)?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<(), CliError> {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(dir) = self.output.dir.as_mut() {
            resolve(dir);
        }
        for (key, path) in [("fieldmap.file", self.fieldmap.file.as_mut()), ("fit.data", self.fit.data.as_mut())] {
            if let Some(p) = path {
                resolve(p);
                if !p.is_file() {
                    return Err(CliError::Invalid(format!("{key}: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}
