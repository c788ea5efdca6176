use clap::Args;
use serde::Serialize;

use bowtie_core::circuit::{calibrate_inductance, eigenfrequency, gap_for_frequency, CavityGeometry, CircuitParams};

use super::{require, Context};
use crate::error::CliError;
use crate::output::{gnuplot_columns, Table};

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Top area of one bow-tie [mm²]
    #[arg(long = "A-mm2")]
    pub area_mm2: Option<f64>,
    /// Bow-tie to lid gap [mm]
    #[arg(long = "d-mm")]
    pub gap_mm: Option<f64>,
    /// Current path length [mm]
    #[arg(long = "l-mm")]
    pub length_mm: Option<f64>,
    /// Current path width [mm]
    #[arg(long = "w-mm")]
    pub width_mm: Option<f64>,
    /// Relative permittivity of the gap
    #[arg(long = "eps-r")]
    pub eps_r: Option<f64>,
    /// Inductance calibration constant
    #[arg(long = "k-L")]
    pub k_l: Option<f64>,
    /// Solve for the gap that puts the resonance here [GHz]
    #[arg(long = "target-freq-GHz")]
    pub target_ghz: Option<f64>,
    /// Solve for k_L so the given geometry resonates here [GHz]
    #[arg(long = "calibrate-to-GHz")]
    pub calibrate_ghz: Option<f64>,
}

#[derive(Serialize)]
struct DesignReport {
    geometry: GeometryOut,
    #[serde(rename = "k_L")]
    k_l: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    circuit: Option<CircuitParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<TargetOut>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct GeometryOut {
    plate_area_m2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_m: Option<f64>,
    path_length_m: f64,
    path_width_m: f64,
    relative_permittivity: f64,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct TargetOut {
    f_target_Hz: f64,
    gap_m: f64,
    circuit: CircuitParams,
}

pub fn run(ctx: Context, args: DesignArgs) -> Result<(), CliError> {
    let g = &ctx.cfg.geometry;
    let mm = |v: Option<f64>| v.map(|x| x * 1e-3);
    let plate_area = require(args.area_mm2.map(|a| a * 1e-6), g.plate_area_m2, "geometry.plate_area_m2", "--A-mm2")?;
    let path_length = require(mm(args.length_mm), g.path_length_m, "geometry.path_length_m", "--l-mm")?;
    let path_width = require(mm(args.width_mm), g.path_width_m, "geometry.path_width_m", "--w-mm")?;
    let gap = mm(args.gap_mm).or(g.gap_m);
    let relative_permittivity = args.eps_r.or(g.relative_permittivity).unwrap_or(1.0);
    let target = args.target_ghz.map(|f| f * 1e9).or(g.target_freq_Hz);
    let calibrate = args.calibrate_ghz.map(|f| f * 1e9).or(g.calibrate_to_Hz);

    let mut geom = CavityGeometry { plate_area, gap: gap.unwrap_or(f64::NAN), path_length, path_width, relative_permittivity };
    if gap.is_none() && target.is_none() {
        return Err(CliError::MissingKey { key: "geometry.gap_m", flag: "--d-mm or --target-freq-GHz" });
    }
    let k_l = match calibrate {
        Some(f) => {
            if gap.is_none() {
                return Err(CliError::MissingKey { key: "geometry.gap_m", flag: "--d-mm (needed to calibrate)" });
            }
            calibrate_inductance(&geom, f)?
        }
        None => args.k_l.or(g.k_l).unwrap_or(1.0),
    };

    let circuit = gap.map(|_| eigenfrequency(&geom, k_l)).transpose()?;
    let target_out = match target {
        Some(f) => {
            let d = gap_for_frequency(&geom, k_l, f)?;
            geom = geom.with_gap(d);
            Some(TargetOut { f_target_Hz: f, gap_m: d, circuit: eigenfrequency(&geom, k_l)? })
        }
        None => None,
    };

    let report = DesignReport {
        geometry: GeometryOut { plate_area_m2: plate_area, gap_m: gap, path_length_m: path_length, path_width_m: path_width, relative_permittivity },
        k_l,
        circuit,
        target: target_out,
    };

    let mut out = ctx.output()?;
    out.write_json("design.json", &report)?;
    // f_c against gap around the working point.
    let d0 = report.target.as_ref().map(|t| t.gap_m).or(gap).unwrap_or(1e-3);
    out.write_plot("design_gap_sweep.dat", || {
        let rows = (0..=200).filter_map(|i| {
            let d = d0 * 10f64.powf(-1.0 + i as f64 / 100.0);
            eigenfrequency(&geom.with_gap(d), k_l).ok().map(|p| vec![d, p.f_c])
        });
        gnuplot_columns(&["gap_m", "f_c_Hz"], rows)
    })?;

    let mut t = Table::default();
    t.row("k_L", format!("{k_l:.6}"));
    if let Some(c) = &report.circuit {
        t.row("C_total", format!("{:.4e} F", c.c_total));
        t.row("L_total", format!("{:.4e} H", c.l_total));
        t.row("f_c", format!("{:.6} GHz", c.f_c * 1e-9));
    }
    if let Some(tg) = &report.target {
        t.row("target f_c", format!("{:.6} GHz", tg.f_target_Hz * 1e-9));
        t.row("solved gap d", format!("{:.6} mm", tg.gap_m * 1e3));
        t.row("check f_c", format!("{:.6} GHz", tg.circuit.f_c * 1e-9));
    }
    ctx.report(&t, &report, &out)
}
