//! Least-squares fit of the transmission model to a measured spectrum.
//!
//! The search runs in scaled coordinates: resonance frequencies are offsets
//! from the initial guess in units of the initial linewidth, widths and
//! coupling are relative to their initial values. A Nelder–Mead pass brings
//! the simplex near the minimum; Levenberg–Marquardt with a central-difference
//! Jacobian finishes it.

use serde::{Deserialize, Serialize};

use super::{find_peaks, s21_squared, CoupledSystem, Spectrum, SpectroscopyError};
use crate::optim::{levenberg_marquardt, nelder_mead, LeastSquaresOptions, NelderMeadOptions};

pub const PARAMETER_NAMES: [&str; 6] = ["omega_c_Hz", "kappa_Hz", "omega_s_Hz", "gamma_star_Hz", "Omega_Hz", "amplitude"];

/// Which parameters the fit may move. Masked parameters stay at their initial value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeParameters {
    pub omega_c: bool,
    pub kappa: bool,
    pub omega_s: bool,
    pub gamma_star: bool,
    pub coupling: bool,
    /// Overall transmission scale A₀ multiplying |S21|².
    pub amplitude: bool,
}

impl Default for FreeParameters {
    fn default() -> Self {
        FreeParameters { omega_c: true, kappa: true, omega_s: true, gamma_star: true, coupling: true, amplitude: false }
    }
}

impl FreeParameters {
    fn mask(&self) -> [bool; 6] {
        [self.omega_c, self.kappa, self.omega_s, self.gamma_star, self.coupling, self.amplitude]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub free: FreeParameters,
    /// Initial A₀.
    pub amplitude: f64,
    pub simplex: NelderMeadOptions,
    pub refine: LeastSquaresOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            free: FreeParameters::default(),
            amplitude: 1.0,
            simplex: NelderMeadOptions { max_evaluations: 3000, initial_step: 0.1, f_tol: 1e-12 },
            refine: LeastSquaresOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub system: CoupledSystem,
    pub amplitude: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    pub points: usize,
    /// Names of the free parameters, in covariance order.
    pub free_parameters: Vec<&'static str>,
    /// `s² (JᵀJ)⁻¹` over the free parameters in physical units, with
    /// `s² = residual / (points − free)`. Empty if the curvature is singular.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub linewidth_convention: &'static str,
    pub frequency_unit: &'static str,
}

impl FitResult {
    /// One-sigma uncertainty of a named free parameter, from the covariance diagonal.
    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.free_parameters.iter().position(|p| *p == name)?;
        self.covariance.get(i).map(|row| row[i].max(0.0).sqrt())
    }
}

fn unpack(p: &[f64; 6]) -> (CoupledSystem, f64) {
    (
        CoupledSystem { omega_c: p[0], kappa: p[1].abs(), omega_s: p[2], gamma_star: p[3].abs(), coupling: p[4].abs() },
        p[5],
    )
}

struct Scaling {
    base: [f64; 6],
    scale: [f64; 6],
    free: Vec<usize>,
}

impl Scaling {
    fn new(initial: &CoupledSystem, amplitude: f64, mask: [bool; 6]) -> Self {
        let base = [initial.omega_c, initial.kappa, initial.omega_s, initial.gamma_star, initial.coupling, amplitude];
        let width = initial.kappa.max(initial.gamma_star);
        let relative = |v: f64| if v > 0.0 { v } else { width };
        let scale = [width, relative(initial.kappa), width, relative(initial.gamma_star), relative(initial.coupling), amplitude.abs().max(1e-3)];
        let free = (0..6).filter(|&i| mask[i]).collect();
        Scaling { base, scale, free }
    }

    fn physical(&self, x: &[f64]) -> [f64; 6] {
        let mut p = self.base;
        for (xi, &k) in x.iter().zip(&self.free) {
            p[k] = self.base[k] + self.scale[k] * xi;
        }
        p
    }
}

/// Fits `data` starting from `initial`.
///
/// Fails with [`SpectroscopyError::NotConverged`], carrying the best state
/// reached, when the refinement hits its iteration cap.
pub fn fit_spectrum(data: &Spectrum, initial: &CoupledSystem, opts: &FitOptions) -> Result<FitResult, SpectroscopyError> {
    data.validate()?;
    initial.validate()?;
    if !(opts.amplitude > 0.0 && opts.amplitude.is_finite()) {
        return Err(SpectroscopyError::NonPositive { field: "amplitude", value: opts.amplitude });
    }
    let scaling = Scaling::new(initial, opts.amplitude, opts.free.mask());
    let m = data.len();
    let residuals = |x: &[f64], out: &mut [f64]| {
        let (sys, amp) = unpack(&scaling.physical(x));
        for ((o, f), y) in out.iter_mut().zip(&data.frequencies).zip(&data.values) {
            *o = amp * s21_squared(&sys, *f) - y;
        }
    };
    let cost = |x: &[f64]| {
        let (sys, amp) = unpack(&scaling.physical(x));
        data.frequencies.iter().zip(&data.values).map(|(f, y)| (amp * s21_squared(&sys, *f) - y).powi(2)).sum::<f64>()
    };

    let n = scaling.free.len();
    let start = vec![0.0; n];
    let coarse = nelder_mead(cost, &start, &opts.simplex);
    let fine = levenberg_marquardt(residuals, &coarse.x, m, &opts.refine);

    let p = scaling.physical(&fine.x);
    let (system, amplitude) = unpack(&p);
    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = fine.ssr / dof;
    let covariance = match fine.jtj.clone().try_inverse() {
        Some(inv) if n > 0 => (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| s2 * inv[(i, j)] * scaling.scale[scaling.free[i]] * scaling.scale[scaling.free[j]])
                    .collect()
            })
            .collect(),
        _ => Vec::new(),
    };
    let result = FitResult {
        system,
        amplitude,
        residual: fine.ssr,
        points: m,
        free_parameters: scaling.free.iter().map(|&k| PARAMETER_NAMES[k]).collect(),
        covariance,
        iterations: fine.iterations,
        evaluations: coarse.evaluations,
        converged: fine.converged,
        linewidth_convention: "HWHM",
        frequency_unit: "Hz",
    };
    if !fine.converged {
        return Err(SpectroscopyError::NotConverged {
            iterations: fine.iterations,
            residual: fine.ssr,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Starting point read off the data: two dominant peaks give the center and
/// the coupling, one peak gives a bare cavity. Widths start at a fraction of
/// the splitting (or of the peak width).
pub fn initial_guess(data: &Spectrum) -> Result<CoupledSystem, SpectroscopyError> {
    data.validate()?;
    // Light box smoothing keeps noise spikes from posing as peaks.
    let half = (data.len() / 400).max(1);
    let smoothed: Vec<f64> = (0..data.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(data.len());
            data.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let smooth = Spectrum { frequencies: data.frequencies.clone(), values: smoothed, system: None };
    let top = smooth.values.iter().copied().fold(0.0, f64::max);
    let peaks = find_peaks(&smooth, 0.2 * top);
    let span = data.frequencies[data.len() - 1] - data.frequencies[0];
    let min_gap = 4.0 * span / data.len() as f64 * half as f64;
    let second = peaks.iter().skip(1).find(|p| (p.0 - peaks[0].0).abs() > min_gap);
    match (peaks.first(), second) {
        (Some(a), Some(b)) => {
            let center = 0.5 * (a.0 + b.0);
            let coupling = 0.5 * (a.0 - b.0).abs();
            let width = 0.2 * coupling;
            Ok(CoupledSystem { omega_c: center, kappa: width, omega_s: center, gamma_star: width, coupling })
        }
        (Some(a), None) => {
            // Half-maximum crossings of the single peak.
            let i = smooth.frequencies.partition_point(|f| *f < a.0).min(data.len() - 1);
            let level = 0.5 * a.1;
            let left = (0..i).rev().find(|&j| smooth.values[j] < level).unwrap_or(0);
            let right = (i..data.len()).find(|&j| smooth.values[j] < level).unwrap_or(data.len() - 1);
            let hwhm = (0.5 * (data.frequencies[right] - data.frequencies[left])).max(span / data.len() as f64);
            Ok(CoupledSystem { omega_c: a.0, kappa: hwhm, omega_s: a.0, gamma_star: hwhm, coupling: 0.1 * hwhm })
        }
        _ => Err(SpectroscopyError::NoSplitting { found: 0 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectroscopy::spectrum;

    fn reference_data() -> Spectrum {
        let sys = CoupledSystem::reference();
        spectrum(&sys, sys.omega_c - 40e6, sys.omega_c + 40e6, 801).unwrap()
    }

    fn perturbed() -> CoupledSystem {
        CoupledSystem { omega_c: 3.1213e9, kappa: 2.6e6, omega_s: 3.1208e9, gamma_star: 2.2e6, coupling: 10.5e6 }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn noiseless_roundtrip() {
        let truth = CoupledSystem::reference();
        let fit = fit_spectrum(&reference_data(), &perturbed(), &FitOptions::default()).unwrap();
        let s = fit.system;
        assert!(rel(s.omega_c, truth.omega_c) < 1e-6);
        assert!(rel(s.omega_s, truth.omega_s) < 1e-6);
        assert!(rel(s.kappa, truth.kappa) < 1e-6, "{}", s.kappa);
        assert!(rel(s.gamma_star, truth.gamma_star) < 1e-6, "{}", s.gamma_star);
        assert!(rel(s.coupling, truth.coupling) < 1e-6, "{}", s.coupling);
        assert!(fit.converged);
        assert_eq!(fit.free_parameters.len(), 5);
    }

    #[test]
    fn amplitude_can_float() {
        let data = reference_data();
        let scaled = Spectrum { values: data.values.iter().map(|v| 0.3 * v).collect(), ..data };
        let opts = FitOptions { free: FreeParameters { amplitude: true, ..Default::default() }, ..Default::default() };
        let fit = fit_spectrum(&scaled, &perturbed(), &opts).unwrap();
        assert!(rel(fit.amplitude, 0.3) < 1e-6);
        assert!(rel(fit.system.coupling, 12.46e6) < 1e-6);
    }

    #[test]
    fn masking_coupling_inflates_residual() {
        let data = reference_data();
        let free_fit = fit_spectrum(&data, &perturbed(), &FitOptions::default()).unwrap();
        let masked = CoupledSystem { coupling: 0.0, ..perturbed() };
        let opts = FitOptions { free: FreeParameters { coupling: false, ..Default::default() }, ..Default::default() };
        let masked_fit = match fit_spectrum(&data, &masked, &opts) {
            Ok(f) => f,
            Err(SpectroscopyError::NotConverged { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(masked_fit.system.coupling, 0.0);
        assert!(masked_fit.residual > 1e6 * free_fit.residual.max(1e-30));
        assert!(masked_fit.residual > 1e-2);
    }

    #[test]
    fn iteration_cap_returns_best_state() {
        let mut opts = FitOptions::default();
        opts.simplex.max_evaluations = 10;
        opts.refine.max_iterations = 1;
        match fit_spectrum(&reference_data(), &perturbed(), &opts) {
            Err(SpectroscopyError::NotConverged { iterations, best, .. }) => {
                assert_eq!(iterations, 1);
                assert!(!best.converged);
                assert!(best.residual.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn covariance_shrinks_with_noise() {
        let data = reference_data().with_multiplicative_noise(0.01, 3);
        let fit = fit_spectrum(&data, &perturbed(), &FitOptions::default()).unwrap();
        let sigma = fit.std_error("Omega_Hz").unwrap();
        assert!(sigma > 0.0 && sigma < 0.01 * 12.46e6, "{sigma}");
        assert!((fit.system.coupling - 12.46e6).abs() < 5.0 * sigma + 0.02 * 12.46e6);
    }

    #[test]
    fn guess_from_split_spectrum() {
        let g = initial_guess(&reference_data().with_multiplicative_noise(0.01, 1)).unwrap();
        assert!(rel(g.coupling, 12.46e6) < 0.1, "{g:?}");
        assert!((g.omega_c - 3.121e9).abs() < 1e6);
    }

    #[test]
    fn guess_from_bare_cavity() {
        let sys = CoupledSystem { coupling: 0.0, ..CoupledSystem::reference() };
        let data = spectrum(&sys, sys.omega_c - 20e6, sys.omega_c + 20e6, 801).unwrap();
        let g = initial_guess(&data).unwrap();
        assert!((g.omega_c - sys.omega_c).abs() < 1e5);
        assert!(rel(g.kappa, sys.kappa) < 0.1, "{}", g.kappa);
    }
}
