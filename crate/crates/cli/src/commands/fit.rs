use std::path::PathBuf;

use clap::Args;

use bowtie_core::spectroscopy::{fit_spectrum, initial_guess, s21_squared, FitOptions, FitResult, FreeParameters, Spectrum, SpectroscopyError};

use super::{Context, SystemArgs};
use crate::error::CliError;
use crate::output::{gnuplot_columns, Table};

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Spectrum CSV: frequency [Hz], |S21|² (or dB with --db)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Second column is in dB
    #[arg(long)]
    pub db: bool,
    /// Parameters to hold at their initial value: omega_c, kappa, omega_s, gamma_star, Omega
    #[arg(long, value_delimiter = ',')]
    pub fix: Vec<String>,
    /// Let an overall transmission scale float
    #[arg(long)]
    pub float_amplitude: bool,
    /// Initial values; anything not given is estimated from the data
    #[command(flatten)]
    pub system: SystemArgs,
}

fn free_parameters(fixed: &[String], float_amplitude: bool) -> Result<FreeParameters, CliError> {
    let mut free = FreeParameters { amplitude: float_amplitude, ..FreeParameters::default() };
    for name in fixed {
        match name.trim() {
            "omega_c" => free.omega_c = false,
            "kappa" => free.kappa = false,
            "omega_s" => free.omega_s = false,
            "gamma_star" => free.gamma_star = false,
            "Omega" | "coupling" => free.coupling = false,
            "amplitude" => free.amplitude = false,
            "" => {}
            other => return Err(CliError::Invalid(format!("unknown fit parameter `{other}`"))),
        }
    }
    Ok(free)
}

pub fn run(ctx: Context, args: FitArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg.fit;
    let path = args.data.clone().or_else(|| cfg.data.clone()).ok_or(CliError::MissingKey { key: "fit.data", flag: "--data" })?;
    let decibels = args.db || cfg.decibels.unwrap_or(false);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    let data = Spectrum::from_csv(&text, decibels).map_err(|e| match e {
        SpectroscopyError::Parse { line, msg } => CliError::Spectroscopy(SpectroscopyError::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        }),
        other => other.into(),
    })?;

    let mut fixed = args.fix.clone();
    if fixed.is_empty() {
        fixed = cfg.fix.clone().unwrap_or_default();
    }
    let free = free_parameters(&fixed, args.float_amplitude || cfg.amplitude.unwrap_or(false))?;

    let given = args.system.partial(&ctx.cfg.system)?;
    let guess = initial_guess(&data);
    let pick = |v: Option<f64>, g: Option<f64>, key: &'static str, flag: &'static str| {
        v.or(g).ok_or(CliError::MissingKey { key, flag })
    };
    let g = guess.as_ref().ok();
    let initial = bowtie_core::spectroscopy::CoupledSystem {
        omega_c: pick(given.omega_c, g.map(|s| s.omega_c), "system.omega_c_Hz", "--omega-c-GHz")?,
        kappa: pick(given.kappa, g.map(|s| s.kappa), "system.kappa_Hz", "--kappa-MHz")?,
        omega_s: pick(given.omega_s, g.map(|s| s.omega_s), "system.omega_s_Hz", "--omega-s-GHz")?,
        gamma_star: pick(given.gamma_star, g.map(|s| s.gamma_star), "system.gamma_star_Hz", "--gamma-star-MHz")?,
        coupling: pick(given.coupling, g.map(|s| s.coupling), "system.Omega_Hz", "--Omega-MHz")?,
    };
    let opts = FitOptions { free, ..FitOptions::default() };

    let mut out = ctx.output()?;
    let (result, failure): (FitResult, Option<SpectroscopyError>) = match fit_spectrum(&data, &initial, &opts) {
        Ok(r) => (r, None),
        Err(SpectroscopyError::NotConverged { iterations, residual, best }) => {
            let r = (*best).clone();
            (r, Some(SpectroscopyError::NotConverged { iterations, residual, best }))
        }
        Err(e) => return Err(e.into()),
    };
    out.write_json("fit.json", &result)?;
    out.write_plot("fit.dat", || {
        gnuplot_columns(
            &["f_Hz", "data_S21_sq", "model_S21_sq"],
            data.frequencies
                .iter()
                .zip(&data.values)
                .map(|(f, y)| vec![*f, *y, result.amplitude * s21_squared(&result.system, *f)]),
        )
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }

    let s = &result.system;
    let err = |name: &str| result.std_error(name).map(|e| format!(" ± {:.3}", e * 1e-6)).unwrap_or_default();
    let mut t = Table::default();
    let center_err = result.std_error("omega_c_Hz").map(|e| format!(" (± {:.3} kHz)", e * 1e-3)).unwrap_or_default();
    t.row("omega_c", format!("{:.6} GHz{center_err}", s.omega_c * 1e-9));
    t.row("kappa (HWHM)", format!("{:.4}{} MHz", s.kappa * 1e-6, err("kappa_Hz")));
    t.row("omega_s", format!("{:.6} GHz", s.omega_s * 1e-9));
    t.row("gamma* (HWHM)", format!("{:.4}{} MHz", s.gamma_star * 1e-6, err("gamma_star_Hz")));
    t.row("Omega", format!("{:.4}{} MHz", s.coupling * 1e-6, err("Omega_Hz")));
    t.row("cooperativity", format!("{:.3}", s.cooperativity()));
    if free.amplitude {
        t.row("amplitude", format!("{:.5}", result.amplitude));
    }
    t.row("residual (SSR)", format!("{:.4e} over {} points", result.residual, result.points));
    t.row("iterations", result.iterations);
    ctx.report(&t, &result, &out)
}
