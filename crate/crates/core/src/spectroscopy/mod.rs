//! Steady-state transmission of a cavity coupled to a spin ensemble.
//!
//! ```text
//! |S21|² = | κ (ω − ω_s − iγ*) / ((ω − ω_c − iκ)(ω − ω_s − iγ*) − Ω²) |²
//! ```
//!
//! All quantities are ordinary frequencies in Hz (κ and γ* are HWHM). The
//! expression is invariant under a common 2π rescaling, so angular units give
//! identical results as long as every parameter uses them.

pub mod fit;
pub mod io;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{fit_spectrum, initial_guess, FitOptions, FitResult, FreeParameters};

#[derive(Debug, Error)]
pub enum SpectroscopyError {
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be non-negative and finite, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("invalid frequency range: {0}")]
    InvalidRange(String),
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("found {found} peak(s) above the floor, need two for a splitting")]
    NoSplitting { found: usize },
    #[error("fit did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, best: Box<FitResult> },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SpectroscopyError {
    pub fn code(&self) -> &'static str {
        use SpectroscopyError::*;
        match self {
            NonPositive { .. } | Negative { .. } => "domain",
            InvalidRange(_) => "invalid_range",
            InvalidSpectrum(_) => "invalid_spectrum",
            NoSplitting { .. } => "no_splitting",
            NotConverged { .. } => "not_converged",
            Parse { .. } => "parse",
            Io(_) => "io",
        }
    }
}

/// The five parameters of the transmission model, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystem {
    #[serde(rename = "omega_c_Hz")]
    pub omega_c: f64,
    /// Cavity HWHM.
    #[serde(rename = "kappa_Hz")]
    pub kappa: f64,
    #[serde(rename = "omega_s_Hz")]
    pub omega_s: f64,
    /// Inhomogeneous spin HWHM.
    #[serde(rename = "gamma_star_Hz")]
    pub gamma_star: f64,
    /// Collective coupling.
    #[serde(rename = "Omega_Hz")]
    pub coupling: f64,
}

impl CoupledSystem {
    /// Cavity and spins on resonance at 3.121 GHz, with Ω = 12.46 MHz,
    /// κ = 1.91 MHz and γ* = 3 MHz.
    pub fn reference() -> Self {
        CoupledSystem { omega_c: 3.121e9, kappa: 1.91e6, omega_s: 3.121e9, gamma_star: 3e6, coupling: 12.46e6 }
    }

    pub fn validate(&self) -> Result<(), SpectroscopyError> {
        for (field, value) in [
            ("omega_c", self.omega_c),
            ("kappa", self.kappa),
            ("omega_s", self.omega_s),
            ("gamma_star", self.gamma_star),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SpectroscopyError::NonPositive { field, value });
            }
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(SpectroscopyError::Negative { field: "Omega", value: self.coupling });
        }
        Ok(())
    }

    pub fn cooperativity(&self) -> f64 {
        self.coupling * self.coupling / (self.kappa * self.gamma_star)
    }
}

/// |S21|² at probe frequency `omega`.
pub fn s21_squared(sys: &CoupledSystem, omega: f64) -> f64 {
    let spin = Complex64::new(omega - sys.omega_s, -sys.gamma_star);
    let cavity = Complex64::new(omega - sys.omega_c, -sys.kappa);
    let denom = cavity * spin - sys.coupling * sys.coupling;
    (spin * sys.kappa / denom).norm_sqr()
}

/// Transmission versus probe frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    /// Parameters the spectrum was simulated from, if any.
    pub system: Option<CoupledSystem>,
}

impl Spectrum {
    /// Measured or external data; frequencies strictly increasing, values finite and ≥ 0.
    pub fn from_data(frequencies: Vec<f64>, values: Vec<f64>) -> Result<Self, SpectroscopyError> {
        let s = Spectrum { frequencies, values, system: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SpectroscopyError> {
        if self.frequencies.len() != self.values.len() {
            return Err(SpectroscopyError::InvalidSpectrum("frequency and value counts differ".into()));
        }
        if self.frequencies.len() < 2 {
            return Err(SpectroscopyError::InvalidSpectrum("need at least two points".into()));
        }
        if !self.frequencies.iter().all(|f| f.is_finite()) || self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SpectroscopyError::InvalidSpectrum("frequencies must be finite and strictly increasing".into()));
        }
        if !self.values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(SpectroscopyError::InvalidSpectrum("values must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Copy with each value multiplied by `1 + σ·N(0,1)`, clamped at zero.
    pub fn with_multiplicative_noise(&self, sigma: f64, seed: u64) -> Spectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma.abs()).expect("finite sigma");
        let values = self.values.iter().map(|v| (v * (1.0 + normal.sample(&mut rng))).max(0.0)).collect();
        Spectrum { frequencies: self.frequencies.clone(), values, system: self.system }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + i as f64 * step }).collect()
}

pub fn spectrum(sys: &CoupledSystem, f_min: f64, f_max: f64, n_points: usize) -> Result<Spectrum, SpectroscopyError> {
    sys.validate()?;
    if n_points < 2 {
        return Err(SpectroscopyError::InvalidRange(format!("need at least 2 points, got {n_points}")));
    }
    if !(f_min < f_max) || !f_min.is_finite() || !f_max.is_finite() {
        return Err(SpectroscopyError::InvalidRange(format!("f_min {f_min} must be below f_max {f_max}")));
    }
    let frequencies = linspace(f_min, f_max, n_points);
    let values = frequencies.par_iter().map(|&f| s21_squared(sys, f)).collect();
    Ok(Spectrum { frequencies, values, system: Some(*sys) })
}

/// |S21|² over spin–cavity detuning Δ_s (rows) and probe offset ν_P from the
/// spin frequency (columns).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumGrid {
    #[serde(rename = "delta_s_Hz")]
    pub detunings: Vec<f64>,
    #[serde(rename = "nu_p_Hz")]
    pub probe_offsets: Vec<f64>,
    /// Row-major, `detunings.len() × probe_offsets.len()`.
    #[serde(rename = "S21_sq")]
    pub values: Vec<f64>,
    /// Absolute probe frequencies of each column [Hz].
    pub probe_frequencies: Vec<f64>,
    pub template: CoupledSystem,
}

impl SpectrumGrid {
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.probe_offsets.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// One row as a [`Spectrum`] over absolute probe frequency.
    pub fn row_spectrum(&self, i: usize) -> Spectrum {
        let mut sys = self.template;
        sys.omega_c = sys.omega_s + self.detunings[i];
        Spectrum { frequencies: self.probe_frequencies.clone(), values: self.row(i).to_vec(), system: Some(sys) }
    }
}

/// Sweeps the cavity across the spins: for each Δ_s the cavity sits at
/// `ω_s + Δ_s` and the probe covers `ω_s + ν_P`.
pub fn avoided_crossing_map(
    template: &CoupledSystem,
    detuning_range: (f64, f64),
    probe_range: (f64, f64),
    dims: (usize, usize),
) -> Result<SpectrumGrid, SpectroscopyError> {
    template.validate()?;
    let (nd, np) = dims;
    if nd < 1 || np < 2 {
        return Err(SpectroscopyError::InvalidRange(format!("grid needs ≥1 detuning and ≥2 probe points, got {dims:?}")));
    }
    if !(probe_range.0 < probe_range.1) || (nd > 1 && !(detuning_range.0 < detuning_range.1)) {
        return Err(SpectroscopyError::InvalidRange("ranges must be increasing".into()));
    }
    let detunings = if nd == 1 { vec![detuning_range.0] } else { linspace(detuning_range.0, detuning_range.1, nd) };
    let ws = template.omega_s;
    // Same probe axis construction as `spectrum`, so rows can be compared bitwise.
    let probe_frequencies = linspace(ws + probe_range.0, ws + probe_range.1, np);
    let probe_offsets = probe_frequencies.iter().map(|f| f - ws).collect();
    let values = detunings
        .par_iter()
        .flat_map_iter(|&d| {
            let sys = CoupledSystem { omega_c: ws + d, ..*template };
            probe_frequencies.iter().map(move |&f| s21_squared(&sys, f)).collect::<Vec<_>>()
        })
        .collect();
    Ok(SpectrumGrid { detunings, probe_offsets, values, probe_frequencies, template: *template })
}

/// Local maxima above `floor`, refined by a parabola through three samples.
/// Returned as (frequency, height), highest first.
pub fn find_peaks(spec: &Spectrum, floor: f64) -> Vec<(f64, f64)> {
    let (f, v) = (&spec.frequencies, &spec.values);
    let mut peaks = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor {
            let (y0, y1, y2) = (v[i - 1], v[i], v[i + 1]);
            let curvature = y0 - 2.0 * y1 + y2;
            let delta = if curvature < 0.0 { (0.5 * (y0 - y2) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
            let step = if delta >= 0.0 { f[i + 1] - f[i] } else { f[i] - f[i - 1] };
            let height = y1 - 0.25 * (y0 - y2) * delta;
            peaks.push((f[i] + delta * step, height));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks
}

/// Distance between the two highest peaks [Hz].
pub fn peak_splitting(spec: &Spectrum, floor: f64) -> Result<f64, SpectroscopyError> {
    spec.validate()?;
    let peaks = find_peaks(spec, floor);
    if peaks.len() < 2 {
        return Err(SpectroscopyError::NoSplitting { found: peaks.len() });
    }
    Ok((peaks[0].0 - peaks[1].0).abs())
}

/// How a quality factor maps to the HWHM κ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaConvention {
    /// κ = f_c / (2Q): FWHM = f_c/Q, halved.
    #[default]
    Standard,
    /// κ = f_c / Q: the full width is reported as the half width.
    FullWidth,
}

pub fn q_to_kappa(f_c: f64, q: f64, convention: KappaConvention) -> Result<f64, SpectroscopyError> {
    if !(q > 0.0) {
        return Err(SpectroscopyError::NonPositive { field: "Q", value: q });
    }
    if !(f_c > 0.0 && f_c.is_finite()) {
        return Err(SpectroscopyError::NonPositive { field: "f_c", value: f_c });
    }
    Ok(match convention {
        KappaConvention::Standard => f_c / (2.0 * q),
        KappaConvention::FullWidth => f_c / q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_spectrum(n: usize) -> Spectrum {
        let sys = CoupledSystem::reference();
        spectrum(&sys, sys.omega_c - 40e6, sys.omega_c + 40e6, n).unwrap()
    }

    #[test]
    fn bare_cavity_peak_is_unity() {
        let sys = CoupledSystem { coupling: 0.0, ..CoupledSystem::reference() };
        assert_eq!(s21_squared(&sys, sys.omega_c), 1.0);
    }

    #[test]
    fn on_resonance_dip() {
        let sys = CoupledSystem::reference();
        let c = sys.cooperativity();
        assert_relative_eq!(s21_squared(&sys, sys.omega_c), (1.0 + c).powi(-2), max_relative = 1e-12);
        let sys = CoupledSystem { coupling: (27.1f64 * 1.91e6 * 3e6).sqrt(), ..sys };
        assert_relative_eq!(s21_squared(&sys, sys.omega_c), 1.266e-3, max_relative = 1e-3);
    }

    #[test]
    fn far_off_resonance_vanishes() {
        let sys = CoupledSystem::reference();
        assert!(s21_squared(&sys, 1e15) < 1e-12);
        assert!(s21_squared(&sys, -1e15) < 1e-12);
    }

    #[test]
    fn reference_point_splits_in_two() {
        let spec = reference_spectrum(4001);
        let peaks = find_peaks(&spec, 1e-3);
        assert_eq!(peaks.len(), 2);
        let split = peak_splitting(&spec, 1e-3).unwrap();
        assert!((split / (2.0 * 12.46e6) - 1.0).abs() < 0.02, "{split}");
    }

    #[test]
    fn detuned_spins_leave_bare_lorentzian() {
        let sys = CoupledSystem { omega_s: 3.121e9 + 2e9, ..CoupledSystem::reference() };
        let spec = spectrum(&sys, sys.omega_c - 10e6, sys.omega_c + 10e6, 2001).unwrap();
        let peaks = find_peaks(&spec, 0.0);
        assert_eq!(peaks.len(), 1);
        // Dispersive pull Ω²/Δ away from the spins.
        let pulled = sys.omega_c - sys.coupling.powi(2) / (sys.omega_s - sys.omega_c);
        assert!((peaks[0].0 - pulled).abs() < 0.01 * sys.kappa, "{}", peaks[0].0 - pulled);
        // Half maximum sits one κ from the center.
        let half = s21_squared(&sys, pulled + sys.kappa) / s21_squared(&sys, pulled);
        assert!((half - 0.5).abs() < 1e-3, "{half}");
    }

    #[test]
    fn no_coupling_no_splitting() {
        let sys = CoupledSystem { coupling: 0.0, ..CoupledSystem::reference() };
        let spec = spectrum(&sys, sys.omega_c - 40e6, sys.omega_c + 40e6, 801).unwrap();
        assert_eq!(peak_splitting(&spec, 0.0).unwrap_err().code(), "no_splitting");
    }

    #[test]
    fn splitting_grows_with_coupling() {
        let mut last = 0.0;
        for omega in [6e6, 8e6, 10e6, 12.46e6, 15e6, 20e6] {
            let sys = CoupledSystem { coupling: omega, ..CoupledSystem::reference() };
            let spec = spectrum(&sys, sys.omega_c - 50e6, sys.omega_c + 50e6, 4001).unwrap();
            let split = peak_splitting(&spec, 0.0).unwrap();
            assert!(split > last);
            last = split;
        }
    }

    #[test]
    fn spectrum_argument_checks() {
        let sys = CoupledSystem::reference();
        assert_eq!(spectrum(&sys, 2.0, 1.0, 10).unwrap_err().code(), "invalid_range");
        assert_eq!(spectrum(&sys, 1.0, 2.0, 1).unwrap_err().code(), "invalid_range");
        let bad = CoupledSystem { kappa: 0.0, ..sys };
        assert_eq!(spectrum(&bad, 1.0, 2.0, 10).unwrap_err().code(), "domain");
        assert!(Spectrum::from_data(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Spectrum::from_data(vec![1.0, 2.0], vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn crossing_map_zero_row_matches_spectrum() {
        let sys = CoupledSystem::reference();
        let grid = avoided_crossing_map(&sys, (-60e6, 60e6), (-50e6, 50e6), (121, 501)).unwrap();
        let zero = grid.detunings.iter().position(|d| *d == 0.0).unwrap();
        let spec = spectrum(&sys, sys.omega_s - 50e6, sys.omega_s + 50e6, 501).unwrap();
        assert_eq!(grid.row(zero), &spec.values[..]);
        assert_eq!(grid.probe_frequencies, spec.frequencies);
    }

    #[test]
    fn crossing_branches_follow_normal_modes() {
        let sys = CoupledSystem::reference();
        let omega = sys.coupling;
        let grid = avoided_crossing_map(&sys, (-200e6, 200e6), (-250e6, 250e6), (81, 20001)).unwrap();
        // Far detuned: the cavity-like peak sits at the upper/lower eigenvalue of
        // [[Δ, Ω], [Ω, 0]], which tends to ν_P = Δ_s; the other branch tends to 0.
        for i in [0, grid.detunings.len() - 1] {
            let d = grid.detunings[i];
            let peaks = find_peaks(&grid.row_spectrum(i), 0.0);
            let cavity_like = peaks[0].0 - sys.omega_s;
            let eig = 0.5 * d + d.signum() * (0.25 * d * d + omega * omega).sqrt();
            assert!((cavity_like - eig).abs() < 0.05 * omega, "Δ={d}: {cavity_like} vs {eig}");
            assert!((cavity_like - d).abs() < 0.1 * d.abs());
            let spin_like = peaks.iter().map(|p| p.0 - sys.omega_s).min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(spin_like.abs() < 0.1 * d.abs(), "{spin_like}");
        }
        // The branch gap is smallest on resonance.
        let splits: Vec<(f64, f64)> = (0..grid.detunings.len())
            .filter_map(|i| peak_splitting(&grid.row_spectrum(i), 0.0).ok().map(|s| (grid.detunings[i], s)))
            .collect();
        let (d_min, s_min) = splits.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(d_min, 0.0);
        let resonant = peak_splitting(&spectrum(&sys, sys.omega_s - 250e6, sys.omega_s + 250e6, 20001).unwrap(), 0.0).unwrap();
        assert_eq!(s_min, resonant);
    }

    #[test]
    fn q_conventions() {
        let full = q_to_kappa(3.121e9, 1637.0, KappaConvention::FullWidth).unwrap();
        assert!((full - 1.906e6).abs() < 1e3);
        assert!((full - 1.91e6).abs() / 1.91e6 < 5e-3);
        let standard = q_to_kappa(3.121e9, 1637.0, KappaConvention::Standard).unwrap();
        assert_relative_eq!(standard, 0.953e6, max_relative = 1e-3);
        assert_eq!(standard, 0.5 * full);
        assert!(q_to_kappa(3.121e9, 1e300, KappaConvention::Standard).unwrap() < 1e-280);
        assert!(q_to_kappa(3.121e9, 0.0, KappaConvention::Standard).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let spec = reference_spectrum(101);
        let a = spec.with_multiplicative_noise(0.01, 7);
        let b = spec.with_multiplicative_noise(0.01, 7);
        let c = spec.with_multiplicative_noise(0.01, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn system() -> impl Strategy<Value = CoupledSystem> {
        (1e9..5e9f64, 1e4..1e7f64, -5e7..5e7f64, 1e4..1e7f64, 0.0..5e7f64).prop_map(|(wc, k, d, g, o)| CoupledSystem {
            omega_c: wc,
            kappa: k,
            omega_s: wc + d,
            gamma_star: g,
            coupling: o,
        })
    }

    proptest! {
        #[test]
        fn resonant_identity(wc in 1e9..5e9f64, k in 1e3..1e8f64, g in 1e3..1e8f64, o in 0.0..1e8f64) {
            let sys = CoupledSystem { omega_c: wc, kappa: k, omega_s: wc, gamma_star: g, coupling: o };
            let exact = (1.0 + o * o / (k * g)).powi(-2);
            let v = s21_squared(&sys, wc);
            prop_assert!(((v - exact) / exact).abs() < 1e-12);
        }

        #[test]
        fn symmetric_about_resonance(sys in system(), wc in 1_000_000_000u64..5_000_000_000, delta in 0u64..100_000_000) {
            // Integer Hz keeps ω_c ± δ exact.
            let (wc, delta) = (wc as f64, delta as f64);
            let sys = CoupledSystem { omega_c: wc, omega_s: wc, ..sys };
            let a = s21_squared(&sys, sys.omega_c + delta);
            let b = s21_squared(&sys, sys.omega_c - delta);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b));
        }

        #[test]
        fn bounded_by_one(sys in system(), offset in -2e8..2e8f64) {
            let v = s21_squared(&sys, sys.omega_c + offset);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v), "{}", v);
        }
    }
}
