use clap::Args;
use serde::Serialize;

use bowtie_core::coupling::{
    collective_coupling, cooperativity, coupling_report, spin_count, CouplingReport, EnsembleSpec, Linewidths, Projection,
};

use super::fieldmap::MapArgs;
use super::{parse_triple, resolve_region, Context, SpeciesArgs, SystemArgs};
use crate::error::CliError;
use crate::output::{gnuplot_columns, Table};

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
pub enum ProjectionArg {
    Global,
    PerAxis,
}

#[derive(Args, Debug)]
pub struct CoupleArgs {
    /// NV concentration [ppm]
    #[arg(long = "density-ppm")]
    pub density_ppm: Option<f64>,
    /// Sample center [mm]
    #[arg(long = "sample-center-mm", value_parser = parse_triple)]
    pub sample_center_mm: Option<[f64; 3]>,
    /// Sample dimensions [mm]
    #[arg(long = "sample-mm", value_parser = parse_triple)]
    pub sample_mm: Option<[f64; 3]>,
    /// Uniform single-spin coupling [mHz] instead of a field map
    #[arg(long = "g0-mHz")]
    pub g0_mhz: Option<f64>,
    /// Measured Ω [MHz] to compare against and derive its cooperativity
    #[arg(long = "measured-Omega-MHz")]
    pub measured_mhz: Option<f64>,
    /// How the mode field is projected onto the NV axes
    #[arg(long, value_enum)]
    pub projection: Option<ProjectionArg>,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub species: SpeciesArgs,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct Measured {
    Omega_Hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cooperativity: Option<f64>,
    computed_over_measured: f64,
}

#[derive(Serialize)]
struct CoupleOutput {
    source: &'static str,
    #[serde(flatten)]
    report: CouplingReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    measured: Option<Measured>,
}

pub fn run(ctx: Context, args: CoupleArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg.ensemble;
    let species = args.species.resolve(&ctx.cfg.species)?;
    let region = resolve_region(
        args.sample_center_mm,
        args.sample_mm,
        cfg.region_center_m,
        cfg.region_extents_m,
        "ensemble.region_extents_m",
        "--sample-mm",
    )?;
    let density = args
        .density_ppm
        .or(cfg.density_ppm)
        .ok_or(CliError::MissingKey { key: "ensemble.density_ppm", flag: "--density-ppm" })?;
    let mut ens = EnsembleSpec::new(density, region);
    if let Some(n) = cfg.carbon_site_density_m3 {
        ens.carbon_site_density = n;
    }
    if let Some(s) = cfg.matrix_element {
        ens.matrix_element = s;
    }
    let projection = match args.projection {
        Some(ProjectionArg::Global) => Projection::Global,
        Some(ProjectionArg::PerAxis) => Projection::PerAxis,
        None => cfg.projection.unwrap_or_default(),
    };
    let system = args.system.partial(&ctx.cfg.system)?;
    let linewidths = match (system.kappa, system.gamma_star) {
        (Some(kappa), Some(gamma_star)) => Some(Linewidths { kappa, gamma_star }),
        _ => None,
    };

    let uniform = args.g0_mhz.map(|g| g * 1e-3).or(cfg.g0_Hz);
    let (source, report) = match uniform {
        Some(g0) => {
            let n_spins = spin_count(&ens)?;
            let omega = collective_coupling(g0, n_spins)?;
            let c = linewidths.map(|l| cooperativity(omega, l.kappa, l.gamma_star)).transpose()?;
            let report = CouplingReport {
                g0_map: Vec::new(),
                g0_mean: g0,
                g0_rms_deviation: 0.0,
                g0_max_deviation: 0.0,
                n_spins,
                omega,
                kappa: linewidths.map(|l| l.kappa),
                gamma_star: linewidths.map(|l| l.gamma_star),
                cooperativity: c,
                projection,
            };
            ("uniform", report)
        }
        None => {
            let loaded = args.map.load(&ctx.cfg.fieldmap, system.omega_c)?;
            if !loaded.map.is_vacuum_normalized() {
                return Err(CliError::MissingKey { key: "system.omega_c_Hz", flag: "--f-c-GHz or --omega-c-GHz" });
            }
            ("fieldmap", coupling_report(&loaded.map, &ens, &species, linewidths, projection)?)
        }
    };

    let measured_omega = args.measured_mhz.map(|m| m * 1e6).or(cfg.measured_Omega_Hz);
    let measured = measured_omega
        .map(|m| -> Result<Measured, CliError> {
            Ok(Measured {
                Omega_Hz: m,
                cooperativity: linewidths.map(|l| cooperativity(m, l.kappa, l.gamma_star)).transpose()?,
                computed_over_measured: report.omega / m,
            })
        })
        .transpose()?;

    let output = CoupleOutput { source, report, measured };
    let mut out = ctx.output()?;
    out.write_json("couple.json", &output)?;
    if !output.report.g0_map.is_empty() {
        out.write_plot("couple_g0.dat", || {
            gnuplot_columns(&["x_m", "y_m", "z_m", "g0_Hz"], output.report.g0_map.iter().map(|c| vec![c.x, c.y, c.z, c.g0]))
        })?;
    }

    let r = &output.report;
    let mut t = Table::default();
    t.row("g0 source", source);
    t.row("mean g0", format!("{:.4} mHz", r.g0_mean * 1e3));
    if source == "fieldmap" {
        t.row("g0 RMS deviation", format!("{:.4} %", 100.0 * r.g0_rms_deviation));
        t.row("g0 max deviation", format!("{:.4} %", 100.0 * r.g0_max_deviation));
    }
    t.row("N spins", format!("{:.4e}", r.n_spins));
    t.row("Omega = g0 sqrt(N)", format!("{:.4} MHz", r.omega * 1e-6));
    if let Some(c) = r.cooperativity {
        t.row("cooperativity", format!("{c:.3}"));
    }
    if let Some(m) = &output.measured {
        t.row("measured Omega", format!("{:.4} MHz", m.Omega_Hz * 1e-6));
        if let Some(c) = m.cooperativity {
            t.row("measured cooperativity", format!("{c:.3}"));
        }
        t.row("computed / measured", format!("{:.3}", m.computed_over_measured));
    }
    ctx.report(&t, &output, &out)
}
