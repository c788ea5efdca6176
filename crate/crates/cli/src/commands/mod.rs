pub mod couple;
pub mod design;
pub mod fieldmap;
pub mod fit;
pub mod spectrum;
pub mod spins;

use std::path::PathBuf;

use clap::Args;
use nalgebra::Vector3;
use serde::Serialize;

use bowtie_core::constants::registry;
use bowtie_core::fieldmap::SampleRegion;
use bowtie_core::nvspin::SpinSpecies;
use bowtie_core::spectroscopy::{q_to_kappa, CoupledSystem, KappaConvention};

use crate::config::{RunConfig, SpeciesSection, SystemSection};
use crate::error::CliError;
use crate::output::{OutputDir, Table};

pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub plot_data: bool,
    pub json: bool,
}

impl Context {
    pub fn output(&self) -> Result<OutputDir, CliError> {
        OutputDir::new(self.out_dir.clone(), self.plot_data)
    }

    /// Prints either the table or the JSON value to stdout.
    pub fn report<T: Serialize>(&self, table: &Table, value: &T, out: &OutputDir) -> Result<(), CliError> {
        if self.json {
            let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
            println!("{text}");
        } else {
            print!("{}", table.render());
            for path in &out.written {
                println!("wrote {}", path.display());
            }
        }
        Ok(())
    }
}

/// Flag value (already in SI) if given, else the config value, else a missing-key error.
pub fn require(flag: Option<f64>, cfg: Option<f64>, key: &'static str, flag_name: &'static str) -> Result<f64, CliError> {
    flag.or(cfg).ok_or(CliError::MissingKey { key, flag: flag_name })
}

pub fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

pub fn scale3(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

/// Parses `a,b,c`.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(out)
}

pub fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected nx,ny,nz, got `{s}`"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(out)
}

#[derive(Args, Debug, Default)]
pub struct SpeciesArgs {
    /// Zero-field splitting D/h [GHz]
    #[arg(long = "D-GHz")]
    pub d_ghz: Option<f64>,
    /// Electron g-factor
    #[arg(long = "g-factor")]
    pub g_factor: Option<f64>,
}

impl SpeciesArgs {
    pub fn resolve(&self, cfg: &SpeciesSection) -> Result<SpinSpecies, CliError> {
        let base = SpinSpecies::default();
        let species = SpinSpecies {
            zero_field_splitting: self.d_ghz.map(|v| v * 1e9).or(cfg.zero_field_splitting_Hz).unwrap_or(base.zero_field_splitting),
            g_factor: self.g_factor.or(cfg.g_factor).unwrap_or(base.g_factor),
        };
        species.validate()?;
        Ok(species)
    }
}

#[derive(Args, Debug, Default)]
pub struct SystemArgs {
    /// Cavity frequency [GHz]
    #[arg(long = "omega-c-GHz")]
    pub omega_c_ghz: Option<f64>,
    /// Cavity HWHM linewidth [MHz]
    #[arg(long = "kappa-MHz")]
    pub kappa_mhz: Option<f64>,
    /// Loaded quality factor, converted to κ when no linewidth is given
    #[arg(long = "Q")]
    pub q: Option<f64>,
    /// How Q maps to κ
    #[arg(long, value_enum)]
    pub kappa_convention: Option<ConventionArg>,
    /// Spin frequency [GHz] (default: cavity frequency)
    #[arg(long = "omega-s-GHz")]
    pub omega_s_ghz: Option<f64>,
    /// Spin HWHM inhomogeneous linewidth [MHz]
    #[arg(long = "gamma-star-MHz")]
    pub gamma_star_mhz: Option<f64>,
    /// Collective coupling Ω [MHz]
    #[arg(long = "Omega-MHz")]
    pub coupling_mhz: Option<f64>,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
pub enum ConventionArg {
    Standard,
    FullWidth,
}

impl From<ConventionArg> for KappaConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Standard => KappaConvention::Standard,
            ConventionArg::FullWidth => KappaConvention::FullWidth,
        }
    }
}

/// Partially specified coupled system: flags over config, nothing defaulted
/// except ω_s = ω_c.
#[derive(Debug, Default, Clone, Copy)]
pub struct PartialSystem {
    pub omega_c: Option<f64>,
    pub kappa: Option<f64>,
    pub omega_s: Option<f64>,
    pub gamma_star: Option<f64>,
    pub coupling: Option<f64>,
}

impl SystemArgs {
    pub fn partial(&self, cfg: &SystemSection) -> Result<PartialSystem, CliError> {
        let omega_c = self.omega_c_ghz.map(|v| v * 1e9).or(cfg.omega_c_Hz);
        let mut kappa = self.kappa_mhz.map(|v| v * 1e6).or(cfg.kappa_Hz);
        let q = self.q.or(cfg.Q);
        if kappa.is_none() {
            if let (Some(q), Some(f)) = (q, omega_c) {
                let convention = self.kappa_convention.map(Into::into).or(cfg.kappa_convention).unwrap_or_default();
                kappa = Some(q_to_kappa(f, q, convention)?);
            }
        }
        Ok(PartialSystem {
            omega_c,
            kappa,
            omega_s: self.omega_s_ghz.map(|v| v * 1e9).or(cfg.omega_s_Hz).or(omega_c),
            gamma_star: self.gamma_star_mhz.map(|v| v * 1e6).or(cfg.gamma_star_Hz),
            coupling: self.coupling_mhz.map(|v| v * 1e6).or(cfg.Omega_Hz),
        })
    }

    pub fn resolve(&self, cfg: &SystemSection) -> Result<CoupledSystem, CliError> {
        let p = self.partial(cfg)?;
        let sys = CoupledSystem {
            omega_c: p.omega_c.ok_or(CliError::MissingKey { key: "system.omega_c_Hz", flag: "--omega-c-GHz" })?,
            kappa: p.kappa.ok_or(CliError::MissingKey { key: "system.kappa_Hz", flag: "--kappa-MHz or --Q" })?,
            omega_s: p.omega_s.ok_or(CliError::MissingKey { key: "system.omega_s_Hz", flag: "--omega-s-GHz" })?,
            gamma_star: p
                .gamma_star
                .ok_or(CliError::MissingKey { key: "system.gamma_star_Hz", flag: "--gamma-star-MHz" })?,
            coupling: p.coupling.ok_or(CliError::MissingKey { key: "system.Omega_Hz", flag: "--Omega-MHz" })?,
        };
        sys.validate()?;
        Ok(sys)
    }
}

/// Box-shaped region from center/extents given in mm on the command line or m in the config.
pub fn resolve_region(
    center_mm: Option<[f64; 3]>,
    extents_mm: Option<[f64; 3]>,
    cfg_center: Option<[f64; 3]>,
    cfg_extents: Option<[f64; 3]>,
    extents_key: &'static str,
    extents_flag: &'static str,
) -> Result<SampleRegion, CliError> {
    let center = center_mm.map(|c| scale3(c, 1e-3)).or(cfg_center).unwrap_or([0.0; 3]);
    let extents = extents_mm
        .map(|e| scale3(e, 1e-3))
        .or(cfg_extents)
        .ok_or(CliError::MissingKey { key: extents_key, flag: extents_flag })?;
    Ok(SampleRegion::new(vec3(center), vec3(extents))?)
}

pub fn constants(ctx: &Context) -> Result<(), CliError> {
    let reg = registry();
    if ctx.json {
        let text = serde_json::to_string_pretty(&reg).map_err(|e| CliError::Invalid(e.to_string()))?;
        println!("{text}");
        return Ok(());
    }
    let mut t = Table::default();
    for c in &reg {
        t.row(&format!("{} ({})", c.name, c.symbol), format!("{:e} {}", c.value, c.unit));
    }
    print!("{}", t.render());
    Ok(())
}
