use clap::Args;
use serde::Serialize;

use bowtie_core::spectroscopy::{avoided_crossing_map, find_peaks, s21_squared, spectrum, CoupledSystem};

use super::{Context, SystemArgs};
use crate::error::CliError;
use crate::output::{gnuplot_columns, Table};

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Lowest probe frequency [GHz] (default ω_c − 4Ω − 10κ)
    #[arg(long = "f-min-GHz")]
    pub f_min_ghz: Option<f64>,
    /// Highest probe frequency [GHz]
    #[arg(long = "f-max-GHz")]
    pub f_max_ghz: Option<f64>,
    /// Number of probe points
    #[arg(long)]
    pub points: Option<usize>,
    /// Multiplicative Gaussian noise σ (fraction)
    #[arg(long)]
    pub noise: Option<f64>,
    /// Seed for the noise generator
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also compute an avoided-crossing map over spin detunings MIN,MAX [MHz]
    #[arg(long = "detuning-MHz", value_delimiter = ',', allow_negative_numbers = true)]
    pub detuning_mhz: Option<Vec<f64>>,
    /// Number of detuning rows in the crossing map
    #[arg(long = "detuning-points")]
    pub detuning_points: Option<usize>,
    /// Probe offsets from the spin frequency MIN,MAX for the crossing map [MHz]
    #[arg(long = "probe-MHz", value_delimiter = ',', allow_negative_numbers = true)]
    pub probe_mhz: Option<Vec<f64>>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct Peak {
    f_Hz: f64,
    S21_sq: f64,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct SpectrumReport {
    system: CoupledSystem,
    cooperativity: f64,
    f_min_Hz: f64,
    f_max_Hz: f64,
    points: usize,
    noise: f64,
    seed: u64,
    /// |S21|² at ω = ω_c, and (1+C)⁻² for comparison when ω_s = ω_c.
    S21_sq_at_omega_c: f64,
    resonant_dip_expected: f64,
    peaks: Vec<Peak>,
    #[serde(skip_serializing_if = "Option::is_none")]
    splitting_Hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing_map: Option<CrossingInfo>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct CrossingInfo {
    detuning_min_Hz: f64,
    detuning_max_Hz: f64,
    detuning_points: usize,
    probe_min_Hz: f64,
    probe_max_Hz: f64,
    probe_points: usize,
}

fn pair(v: Option<Vec<f64>>, scale: f64, flag: &str) -> Result<Option<(f64, f64)>, CliError> {
    match v.as_deref() {
        None => Ok(None),
        Some([a, b]) => Ok(Some((a * scale, b * scale))),
        Some(other) => Err(CliError::Invalid(format!("{flag} takes MIN,MAX, got {} values", other.len()))),
    }
}

pub fn run(ctx: Context, args: SpectrumArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg.spectrum;
    let sys = args.system.resolve(&ctx.cfg.system)?;
    let span = 4.0 * sys.coupling + 10.0 * sys.kappa.max(sys.gamma_star) + (sys.omega_s - sys.omega_c).abs();
    let f_min = args.f_min_ghz.map(|f| f * 1e9).or(cfg.f_min_Hz).unwrap_or(sys.omega_c - span);
    let f_max = args.f_max_ghz.map(|f| f * 1e9).or(cfg.f_max_Hz).unwrap_or(sys.omega_c + span);
    let points = args.points.or(cfg.points).unwrap_or(2001);
    let noise = args.noise.or(cfg.noise).unwrap_or(0.0);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Invalid(format!("noise must be a non-negative fraction, got {noise}")));
    }

    let clean = spectrum(&sys, f_min, f_max, points)?;
    let spec = if noise > 0.0 { clean.with_multiplicative_noise(noise, seed) } else { clean.clone() };
    let top = clean.values.iter().copied().fold(0.0, f64::max);
    let peaks = find_peaks(&clean, 1e-3 * top);
    let splitting = (peaks.len() >= 2).then(|| (peaks[0].0 - peaks[1].0).abs());

    let detuning = pair(args.detuning_mhz, 1e6, "--detuning-MHz")?.or(match (cfg.detuning_min_Hz, cfg.detuning_max_Hz) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    });
    let crossing = match detuning {
        Some(range) => {
            let nd = args.detuning_points.or(cfg.detuning_points).unwrap_or(201);
            let probe = pair(args.probe_mhz.clone(), 1e6, "--probe-MHz")?
                .or(match (cfg.probe_min_Hz, cfg.probe_max_Hz) {
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => None,
                })
                .unwrap_or((range.0.min(-span), range.1.max(span)));
            Some((avoided_crossing_map(&sys, range, probe, (nd, points))?, range, probe, nd))
        }
        None => None,
    };

    let report = SpectrumReport {
        system: sys,
        cooperativity: sys.cooperativity(),
        f_min_Hz: f_min,
        f_max_Hz: f_max,
        points,
        noise,
        seed,
        S21_sq_at_omega_c: s21_squared(&sys, sys.omega_c),
        resonant_dip_expected: (1.0 + sys.cooperativity()).powi(-2),
        peaks: peaks.iter().map(|&(f, h)| Peak { f_Hz: f, S21_sq: h }).collect(),
        splitting_Hz: splitting,
        crossing_map: crossing.as_ref().map(|(g, d, p, nd)| CrossingInfo {
            detuning_min_Hz: d.0,
            detuning_max_Hz: d.1,
            detuning_points: *nd,
            probe_min_Hz: p.0,
            probe_max_Hz: p.1,
            probe_points: g.probe_offsets.len(),
        }),
    };

    let mut out = ctx.output()?;
    out.write("spectrum.csv", &spec.to_csv())?;
    out.write_json("spectrum.json", &report)?;
    out.write_plot("spectrum.dat", || {
        gnuplot_columns(&["f_Hz", "S21_sq"], spec.frequencies.iter().zip(&spec.values).map(|(f, v)| vec![*f, *v]))
    })?;
    if let Some((grid, ..)) = &crossing {
        out.write("crossing.csv", &grid.to_csv())?;
        out.write_plot("crossing.dat", || {
            // pm3d layout: one block per detuning.
            let mut s = String::from("# delta_s_Hz nu_p_Hz S21_sq\n");
            for (i, d) in grid.detunings.iter().enumerate() {
                for (p, v) in grid.probe_offsets.iter().zip(grid.row(i)) {
                    s.push_str(&format!("{d:e} {p:e} {v:e}\n"));
                }
                s.push('\n');
            }
            s
        })?;
    }

    let mut t = Table::default();
    t.row("omega_c / omega_s", format!("{:.6} / {:.6} GHz", sys.omega_c * 1e-9, sys.omega_s * 1e-9));
    t.row("kappa / gamma*", format!("{:.4} / {:.4} MHz", sys.kappa * 1e-6, sys.gamma_star * 1e-6));
    t.row("Omega", format!("{:.4} MHz", sys.coupling * 1e-6));
    t.row("cooperativity", format!("{:.3}", report.cooperativity));
    t.row("|S21|^2 at omega_c", format!("{:.6e}", report.S21_sq_at_omega_c));
    match splitting {
        Some(s) => t.row("peak splitting", format!("{:.4} MHz ({:.4} x 2 Omega)", s * 1e-6, s / (2.0 * sys.coupling))),
        None => t.row("peak splitting", "single peak"),
    };
    if noise > 0.0 {
        t.row("noise", format!("{noise} (seed {seed})"));
    }
    ctx.report(&t, &report, &out)
}
