use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use bowtie_core::fieldmap::io::meta_path;
use bowtie_core::fieldmap::{
    biot_savart_map, counter_propagating_pair, homogeneity, ingest_map, normalize_to_vacuum, FieldMap, GridSpec,
    HomogeneityReport, QuadratureOptions, SampleRegion,
};

use super::{parse_dims, parse_triple, require, resolve_region, scale3, vec3, Context};
use crate::config::{FieldMapSection, MapSource};
use crate::error::CliError;
use crate::output::{OutputDir, Table};

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
pub enum SourceArg {
    Model,
    File,
}

/// Where the field map comes from.
#[derive(Args, Debug, Default)]
pub struct MapArgs {
    /// `model` (current-sheet pair) or `file` (CSV + .meta)
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    /// Field-map CSV to ingest (implies --source file)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Sheet length along the current [mm]
    #[arg(long = "sheet-length-mm")]
    pub sheet_length_mm: Option<f64>,
    /// Sheet width [mm]
    #[arg(long = "sheet-width-mm")]
    pub sheet_width_mm: Option<f64>,
    /// Distance between the two sheets [mm]
    #[arg(long = "sheet-gap-mm")]
    pub sheet_gap_mm: Option<f64>,
    /// Surface current density [A/m]
    #[arg(long = "surface-current-A-per-m")]
    pub surface_current: Option<f64>,
    /// Grid nodes per axis, nx,ny,nz
    #[arg(long = "grid-dims", value_parser = parse_dims)]
    pub grid_dims: Option<[usize; 3]>,
    /// Grid lower corner [mm]
    #[arg(long = "grid-lo-mm", value_parser = parse_triple)]
    pub grid_lo_mm: Option<[f64; 3]>,
    /// Grid upper corner [mm]
    #[arg(long = "grid-hi-mm", value_parser = parse_triple)]
    pub grid_hi_mm: Option<[f64; 3]>,
    /// Relative tolerance of the adaptive quadrature
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    /// Normalize to one photon at this cavity frequency [GHz]
    #[arg(long = "f-c-GHz")]
    pub f_c_ghz: Option<f64>,
}

pub struct LoadedMap {
    pub map: FieldMap,
    pub source: MapSource,
    pub raw: Option<FieldMap>,
}

impl MapArgs {
    fn source(&self, cfg: &FieldMapSection) -> MapSource {
        match (self.source, &self.input) {
            (Some(SourceArg::Model), _) => MapSource::Model,
            (Some(SourceArg::File), _) | (None, Some(_)) => MapSource::File,
            (None, None) => cfg.source.unwrap_or(if cfg.file.is_some() { MapSource::File } else { MapSource::Model }),
        }
    }

    /// Builds or reads the map, then normalizes it when a frequency is known.
    pub fn load(&self, cfg: &FieldMapSection, fallback_f_c: Option<f64>) -> Result<LoadedMap, CliError> {
        let source = self.source(cfg);
        let map = match source {
            MapSource::File => {
                let path = self
                    .input
                    .clone()
                    .or_else(|| cfg.file.clone())
                    .ok_or(CliError::MissingKey { key: "fieldmap.file", flag: "--input" })?;
                ingest_map(&path)?
            }
            MapSource::Model => self.model(cfg)?,
        };
        let f_c = self.f_c_ghz.map(|f| f * 1e9).or(cfg.f_c_Hz).or(fallback_f_c);
        Ok(match f_c {
            Some(f) if map.vacuum_frequency_hz() != Some(f) => {
                let vac = normalize_to_vacuum(&map, f)?;
                LoadedMap { map: vac, source, raw: Some(map) }
            }
            _ => LoadedMap { map, source, raw: None },
        })
    }

    fn model(&self, cfg: &FieldMapSection) -> Result<FieldMap, CliError> {
        let mm = |v: Option<f64>| v.map(|x| x * 1e-3);
        let length = require(mm(self.sheet_length_mm), cfg.sheet_length_m, "fieldmap.sheet_length_m", "--sheet-length-mm")?;
        let width = require(mm(self.sheet_width_mm), cfg.sheet_width_m, "fieldmap.sheet_width_m", "--sheet-width-mm")?;
        let gap = require(mm(self.sheet_gap_mm), cfg.sheet_gap_m, "fieldmap.sheet_gap_m", "--sheet-gap-mm")?;
        let current = self.surface_current.or(cfg.surface_current_A_per_m).unwrap_or(1.0);
        let half = [0.5 * length, 0.5 * width, 0.4 * gap];
        let lo = self.grid_lo_mm.map(|v| scale3(v, 1e-3)).or(cfg.grid_lo_m).unwrap_or(scale3(half, -1.0));
        let hi = self.grid_hi_mm.map(|v| scale3(v, 1e-3)).or(cfg.grid_hi_m).unwrap_or(half);
        let dims = self.grid_dims.or(cfg.grid_dims).unwrap_or([21, 21, 21]);
        let grid = GridSpec::spanning(vec3(lo), vec3(hi), dims)?;
        let opts = QuadratureOptions {
            rel_tol: self.rel_tol.or(cfg.rel_tol).unwrap_or(QuadratureOptions::default().rel_tol),
            ..QuadratureOptions::default()
        };
        let sheets = counter_propagating_pair(length, width, gap, current);
        Ok(biot_savart_map(&sheets, &grid, &opts)?)
    }
}

/// Central third of the grid hull.
pub fn default_region(map: &FieldMap) -> Result<SampleRegion, CliError> {
    let g = map.grid();
    let mut center = [0.0; 3];
    let mut extents = [0.0; 3];
    for a in 0..3 {
        let (lo, hi) = g.axis_hull(a);
        center[a] = 0.5 * (lo + hi);
        extents[a] = (hi - lo) / 3.0;
    }
    Ok(SampleRegion::new(vec3(center), vec3(extents))?)
}

/// Writes `name` and its `.meta` sidecar atomically, then reads both back and
/// checks the map survived unchanged.
pub fn save_verified(out: &mut OutputDir, name: &str, map: &FieldMap) -> Result<PathBuf, CliError> {
    let path = out.write(name, &map.to_csv())?;
    let meta_name = meta_path(&path).file_name().and_then(|n| n.to_str()).map(str::to_string).unwrap_or_default();
    out.write(&meta_name, &map.metadata())?;
    let back = ingest_map(&path)?;
    if back.samples() != map.samples() || back.energy_j() != map.energy_j() || back.vacuum_frequency_hz() != map.vacuum_frequency_hz() {
        return Err(CliError::Validation { path, msg: "re-ingested map differs from the one written".into() });
    }
    Ok(path)
}

/// |B| on the node layer closest to the middle of the z range.
pub fn midplane_plot(map: &FieldMap) -> String {
    let g = map.grid();
    let k = g.dims[2] / 2;
    let mut s = format!("# x_m y_m |B|_T at z = {:e} m\n", g.node(0, 0, k).z);
    for j in 0..g.dims[1] {
        for i in 0..g.dims[0] {
            let p = g.node(i, j, k);
            s.push_str(&format!("{:e} {:e} {:e}\n", p.x, p.y, map.sample(i, j, k).norm()));
        }
        s.push('\n');
    }
    s
}

#[derive(Args, Debug)]
pub struct FieldMapArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Homogeneity region center [mm] (default: grid center)
    #[arg(long = "region-center-mm", value_parser = parse_triple)]
    pub region_center_mm: Option<[f64; 3]>,
    /// Homogeneity region extents [mm] (default: central third of the grid)
    #[arg(long = "region-extents-mm", value_parser = parse_triple)]
    pub region_extents_mm: Option<[f64; 3]>,
    /// Histogram bin edges of |deviation|, as fractions
    #[arg(long, value_delimiter = ',')]
    pub bins: Option<Vec<f64>>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct FieldMapReport {
    source: &'static str,
    dims: [usize; 3],
    energy_J: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    vacuum_f_Hz: Option<f64>,
    region_center_m: [f64; 3],
    region_extents_m: [f64; 3],
    homogeneity: HomogeneityReport,
}

pub fn run(ctx: Context, args: FieldMapArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg.fieldmap;
    let loaded = args.map.load(cfg, None)?;
    let map = &loaded.map;
    let region = if args.region_extents_mm.is_some() || cfg.region_extents_m.is_some() {
        resolve_region(
            args.region_center_mm,
            args.region_extents_mm,
            cfg.region_center_m,
            cfg.region_extents_m,
            "fieldmap.region_extents_m",
            "--region-extents-mm",
        )?
    } else {
        default_region(map)?
    };
    let bins = args.bins.clone().or_else(|| cfg.histogram_bins.clone()).unwrap_or_else(|| vec![0.01, 0.02, 0.05, 0.1]);
    let stats = homogeneity(map, &region, &bins)?;

    let mut out = ctx.output()?;
    if loaded.source == MapSource::Model {
        save_verified(&mut out, "fieldmap.csv", loaded.raw.as_ref().unwrap_or(map))?;
    }
    if map.is_vacuum_normalized() && loaded.raw.is_some() {
        save_verified(&mut out, "fieldmap_vacuum.csv", map)?;
    }
    let report = FieldMapReport {
        source: match loaded.source {
            MapSource::Model => "model",
            MapSource::File => "file",
        },
        dims: map.grid().dims,
        energy_J: map.energy_j(),
        vacuum_f_Hz: map.vacuum_frequency_hz(),
        region_center_m: [region.center.x, region.center.y, region.center.z],
        region_extents_m: [region.extents.x, region.extents.y, region.extents.z],
        homogeneity: stats,
    };
    out.write_json("homogeneity.json", &report)?;
    out.write_plot("fieldmap_midplane.dat", || midplane_plot(map))?;

    let h = &report.homogeneity;
    let mut t = Table::default();
    t.row("source", report.source);
    t.row("grid", format!("{} x {} x {}", report.dims[0], report.dims[1], report.dims[2]));
    t.row("mode energy", format!("{:.4e} J", report.energy_J));
    t.row("mean |B| in region", format!("{:.6e} T", h.mean));
    t.row("RMS deviation", format!("{:.4} %", 100.0 * h.rms_deviation));
    t.row("max deviation", format!("{:.4} %", 100.0 * h.max_deviation));
    for b in &h.contour_histogram {
        let label = match b.upper {
            Some(u) => format!("|dev| in [{:.3}, {:.3})", b.lower, u),
            None => format!("|dev| >= {:.3}", b.lower),
        };
        t.row(&label, format!("{:.4} of volume", b.volume_fraction));
    }
    ctx.report(&t, &report, &out)
}
