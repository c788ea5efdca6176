//! CSV formats for spectra and avoided-crossing maps.

use std::fmt::Write as _;
use std::path::Path;

use super::{Spectrum, SpectrumGrid, SpectroscopyError};

pub const SPECTRUM_HEADER: &str = "freq_Hz,S21_sq";
pub const GRID_HEADER: &str = "delta_s_Hz,nu_p_Hz,S21_sq";

/// Converts a power ratio in dB to linear |S21|².
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.len() + 1));
        out.push_str(SPECTRUM_HEADER);
        out.push('\n');
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            let _ = writeln!(out, "{f:e},{v:e}");
        }
        out
    }

    /// Parses two-column CSV. A leading non-numeric line is taken as a header;
    /// `#` lines and blank lines are skipped. With `decibels` the second
    /// column is converted from dB.
    pub fn from_csv(text: &str, decibels: bool) -> Result<Spectrum, SpectroscopyError> {
        let mut frequencies = Vec::new();
        let mut values = Vec::new();
        let mut seen_data = false;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            let parsed: Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            let nums = match parsed {
                Ok(v) => v,
                Err(_) if !seen_data && frequencies.is_empty() => {
                    seen_data = true;
                    continue;
                }
                Err(e) => return Err(SpectroscopyError::Parse { line, msg: e.to_string() }),
            };
            seen_data = true;
            if nums.len() != 2 {
                return Err(SpectroscopyError::Parse { line, msg: format!("expected 2 columns, got {}", nums.len()) });
            }
            let value = if decibels { db_to_linear(nums[1]) } else { nums[1] };
            if !nums[0].is_finite() || !value.is_finite() || value < 0.0 {
                return Err(SpectroscopyError::Parse { line, msg: "non-finite or negative value".into() });
            }
            if frequencies.last().is_some_and(|last| nums[0] <= *last) {
                return Err(SpectroscopyError::Parse { line, msg: "frequencies must be strictly increasing".into() });
            }
            frequencies.push(nums[0]);
            values.push(value);
        }
        Spectrum::from_data(frequencies, values)
    }

    pub fn read(path: &Path, decibels: bool) -> Result<Spectrum, SpectroscopyError> {
        Spectrum::from_csv(&std::fs::read_to_string(path)?, decibels)
    }
}

impl SpectrumGrid {
    /// Long format, one row per (detuning, probe offset) pair, probe fastest.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.values.len() + 1));
        out.push_str(GRID_HEADER);
        out.push('\n');
        for (i, d) in self.detunings.iter().enumerate() {
            for (p, v) in self.probe_offsets.iter().zip(self.row(i)) {
                let _ = writeln!(out, "{d:e},{p:e},{v:e}");
            }
        }
        out
    }
}
