//! NV⁻ ground-state spin triplet under a static magnetic field.
//!
//! Energies are carried as frequencies (E/h, in Hz). Matrices are written in
//! the `{|+1⟩, |0⟩, |−1⟩}` basis quantized along the NV axis.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{BOHR_MAGNETON, NV_G_FACTOR, NV_ZERO_FIELD_SPLITTING, PLANCK};

/// Bracket searched by [`zeeman_tune`], in tesla.
pub const TUNING_BRACKET_T: (f64, f64) = (0.0, 0.5);
/// Coarse samples across the bracket when looking for the first crossing.
pub const TUNING_SCAN_STEPS: usize = 500;
/// Frequency tolerance of [`zeeman_tune`], in Hz.
pub const TUNING_TOLERANCE_HZ: f64 = 1.0;

const AXIS_NORM_TOLERANCE: f64 = 1e-9;
/// Two candidate ground states closer than this in |⟨0|ψ⟩|² make the labeling ambiguous.
const AMBIGUOUS_OVERLAP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("axis must be a unit vector, got norm {norm}")]
    NotUnitVector { norm: f64 },
    #[error("static field has non-finite components")]
    NonFiniteField,
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("no field in [{lo} T, {hi} T] puts the {branch:?} transition at {target} Hz (range {f_lo} .. {f_hi} Hz)")]
    NoSolution { target: f64, branch: Branch, lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
}

impl SpinError {
    pub fn code(&self) -> &'static str {
        match self {
            SpinError::NotUnitVector { .. } => "bad_axis",
            SpinError::NonFiniteField => "non_finite",
            SpinError::NonPositive { .. } => "domain",
            SpinError::NoSolution { .. } => "no_solution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSpecies {
    /// Zero-field splitting D/h [Hz].
    pub zero_field_splitting: f64,
    pub g_factor: f64,
}

impl Default for SpinSpecies {
    fn default() -> Self {
        SpinSpecies { zero_field_splitting: NV_ZERO_FIELD_SPLITTING, g_factor: NV_G_FACTOR }
    }
}

impl SpinSpecies {
    /// Zeeman coefficient g·μ_B/h [Hz/T].
    pub fn gyromagnetic_ratio(&self) -> f64 {
        self.g_factor * BOHR_MAGNETON / PLANCK
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        for (field, value) in [("zero_field_splitting", self.zero_field_splitting), ("g_factor", self.g_factor)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SpinError::NonPositive { field, value });
            }
        }
        Ok(())
    }
}

/// The four ⟨111⟩ NV orientations of the diamond lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NvAxes(pub [Vector3<f64>; 4]);

impl Default for NvAxes {
    fn default() -> Self {
        let s = 1.0 / 3f64.sqrt();
        NvAxes([
            Vector3::new(s, s, s),
            Vector3::new(s, -s, -s),
            Vector3::new(-s, s, -s),
            Vector3::new(-s, -s, s),
        ])
    }
}

impl NvAxes {
    pub fn iter(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.0.iter()
    }
}

/// Which of the two transitions out of the |m_s ≈ 0⟩ level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinLevels {
    /// Eigenvalues of H/h in ascending order [Hz].
    pub eigenvalues: [f64; 3],
    /// Index into `eigenvalues` of the level with the most |m_s = 0⟩ character.
    pub ground_index: usize,
    /// Transition frequencies out of the ground level, ascending [Hz].
    /// A negative value means the excited level has dropped below it.
    pub transitions: [f64; 2],
    /// Set when two levels have nearly equal |m_s = 0⟩ weight.
    pub ambiguous_ground: bool,
}

impl SpinLevels {
    pub fn lower(&self) -> f64 {
        self.transitions[0]
    }

    pub fn upper(&self) -> f64 {
        self.transitions[1]
    }

    pub fn branch(&self, which: Branch) -> f64 {
        match which {
            Branch::Lower => self.lower(),
            Branch::Upper => self.upper(),
        }
    }
}

fn check_axis(axis: &Vector3<f64>) -> Result<(), SpinError> {
    let norm = axis.norm();
    if (norm - 1.0).abs() > AXIS_NORM_TOLERANCE || !norm.is_finite() {
        return Err(SpinError::NotUnitVector { norm });
    }
    Ok(())
}

/// Orthonormal frame (x', y', z') with z' along `axis`.
fn local_frame(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    // Pick the lab axis least aligned with `axis` to seed x'.
    let seed = if axis.x.abs() <= axis.y.abs() && axis.x.abs() <= axis.z.abs() {
        Vector3::x()
    } else if axis.y.abs() <= axis.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let x = (seed - axis * axis.dot(&seed)).normalize();
    let y = axis.cross(&x);
    (x, y)
}

/// H/h for one NV orientation: `D S_z² + (g μ_B/h) B·S`, with S_z along `axis`.
pub fn hamiltonian(
    species: &SpinSpecies,
    axis: &Vector3<f64>,
    b0: &Vector3<f64>,
) -> Result<Matrix3<Complex64>, SpinError> {
    species.validate()?;
    check_axis(axis)?;
    if !b0.iter().all(|c| c.is_finite()) {
        return Err(SpinError::NonFiniteField);
    }
    let (ex, ey) = local_frame(axis);
    let gamma = species.gyromagnetic_ratio();
    let bx = gamma * b0.dot(&ex);
    let by = gamma * b0.dot(&ey);
    let bz = gamma * b0.dot(axis);
    let d = species.zero_field_splitting;

    // Sx ± i Sy couple neighbouring m_s with amplitude 1/√2.
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let off = Complex64::new(bx * r, -by * r);
    let c = |re: f64| Complex64::new(re, 0.0);
    Ok(Matrix3::new(
        c(d + bz),
        off,
        c(0.0),
        off.conj(),
        c(0.0),
        off,
        c(0.0),
        off.conj(),
        c(d - bz),
    ))
}

pub fn transition_frequencies(
    species: &SpinSpecies,
    axis: &Vector3<f64>,
    b0: &Vector3<f64>,
) -> Result<SpinLevels, SpinError> {
    let h = hamiltonian(species, axis, b0)?;
    let eig = SymmetricEigen::new(h);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.map(|i| eig.eigenvalues[i]);
    // |m_s = 0⟩ is the middle basis vector.
    let weights = order.map(|i| eig.eigenvectors[(1, i)].norm_sqr());

    let mut by_weight = [0usize, 1, 2];
    by_weight.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let ground_index = by_weight[0];
    let ambiguous_ground = weights[by_weight[0]] - weights[by_weight[1]] < AMBIGUOUS_OVERLAP;

    let e0 = eigenvalues[ground_index];
    let mut transitions = [0.0; 2];
    for (slot, e) in (0..3).filter(|&i| i != ground_index).map(|i| eigenvalues[i] - e0).enumerate() {
        transitions[slot] = e;
    }
    transitions.sort_by(f64::total_cmp);

    Ok(SpinLevels { eigenvalues, ground_index, transitions, ambiguous_ground })
}

/// Field magnitude along `direction` that brings the chosen transition of the
/// first sub-ensemble in `axes` to `f_target`.
///
/// The smallest such field in [`TUNING_BRACKET_T`]: a coarse scan finds the
/// first crossing, bisection refines it. The result is within
/// [`TUNING_TOLERANCE_HZ`] of the target.
pub fn zeeman_tune(
    species: &SpinSpecies,
    axes: &NvAxes,
    direction: &Vector3<f64>,
    f_target: f64,
    which: Branch,
) -> Result<f64, SpinError> {
    check_axis(direction)?;
    if !(f_target > 0.0 && f_target.is_finite()) {
        return Err(SpinError::NonPositive { field: "f_target", value: f_target });
    }
    let axis = &axes.0[0];
    let detuning = |b: f64| -> Result<f64, SpinError> {
        Ok(transition_frequencies(species, axis, &(direction * b))?.branch(which) - f_target)
    };

    // Off-axis branches are not monotonic, so march through the bracket to
    // the first sign change (the smallest field) before bisecting.
    let (b_min, b_max) = TUNING_BRACKET_T;
    let f0 = detuning(b_min)?;
    if f0 == 0.0 {
        return Ok(b_min);
    }
    let mut bracket = None;
    let (mut prev_b, mut prev_f) = (b_min, f0);
    for i in 1..=TUNING_SCAN_STEPS {
        let b = b_min + (b_max - b_min) * i as f64 / TUNING_SCAN_STEPS as f64;
        let f = detuning(b)?;
        if f == 0.0 {
            return Ok(b);
        }
        if f.signum() != prev_f.signum() {
            bracket = Some((prev_b, prev_f, b));
            break;
        }
        prev_b = b;
        prev_f = f;
    }
    let Some((mut lo, mut f_lo, mut hi)) = bracket else {
        return Err(SpinError::NoSolution {
            target: f_target,
            branch: which,
            lo: b_min,
            hi: b_max,
            f_lo: f0 + f_target,
            f_hi: prev_f + f_target,
        });
    };

    // Bisect well past the 1 Hz requirement; stop when the bracket collapses.
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = detuning(mid)?;
        if f_mid == 0.0 || f_mid.abs() < 1e-3 * TUNING_TOLERANCE_HZ {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// One row of a transition-frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub field_t: f64,
    pub axis_index: usize,
    pub f_lower_hz: f64,
    pub f_upper_hz: f64,
}

/// Transition frequencies of all four orientations for fields `direction · b`.
pub fn sweep(
    species: &SpinSpecies,
    axes: &NvAxes,
    direction: &Vector3<f64>,
    magnitudes: &[f64],
) -> Result<Vec<SweepRow>, SpinError> {
    check_axis(direction)?;
    let mut rows = Vec::with_capacity(magnitudes.len() * 4);
    for &b in magnitudes {
        for (axis_index, axis) in axes.iter().enumerate() {
            let levels = transition_frequencies(species, axis, &(direction * b))?;
            rows.push(SweepRow { field_t: b, axis_index, f_lower_hz: levels.lower(), f_upper_hz: levels.upper() });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "B_magnitude_T,axis_index,f_lower_Hz,f_upper_Hz";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{:e},{},{:e},{:e}\n", r.field_t, r.axis_index, r.f_lower_hz, r.f_upper_hz));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Eigenvalues of a 3×3 Hermitian matrix from its characteristic cubic
    /// (trigonometric form), independent of the iterative solver.
    fn cubic_eigenvalues(h: &Matrix3<Complex64>) -> [f64; 3] {
        let a = |i: usize, j: usize| h[(i, j)];
        let tr = (a(0, 0) + a(1, 1) + a(2, 2)).re;
        let minors = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0))
            + (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0))
            + (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1));
        let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        // λ³ − tr λ² + m λ − det = 0, shift λ = t + tr/3.
        let (m, det) = (minors.re, det.re);
        let s = tr / 3.0;
        let p = m - tr * tr / 3.0;
        let q = -2.0 * s * s * s + m * s - det;
        // t³ + p t + q = 0 with p ≤ 0 for real roots.
        let r = (-p / 3.0).sqrt();
        let arg = if r == 0.0 { 0.0 } else { (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0) };
        let phi = arg.acos() / 3.0;
        let mut roots = [0, 1, 2]
            .map(|k| s + 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos());
        roots.sort_by(f64::total_cmp);
        roots
    }

    fn nv() -> SpinSpecies {
        SpinSpecies::default()
    }

    #[test]
    fn tetrahedral_axes() {
        let axes = NvAxes::default();
        for (i, a) in axes.iter().enumerate() {
            assert_relative_eq!(a.norm(), 1.0, max_relative = 1e-15);
            for b in axes.iter().skip(i + 1) {
                assert_relative_eq!(a.dot(b), -1.0 / 3.0, max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn zero_field_hamiltonian_is_diagonal() {
        let axis = NvAxes::default().0[2];
        let h = hamiltonian(&nv(), &axis, &Vector3::zeros()).unwrap();
        let d = NV_ZERO_FIELD_SPLITTING;
        let expected = Matrix3::from_diagonal(&Vector3::new(d, 0.0, d)).map(|x| Complex64::new(x, 0.0));
        assert_eq!(h, expected);
        let levels = transition_frequencies(&nv(), &axis, &Vector3::zeros()).unwrap();
        assert_eq!(levels.transitions, [2.87e9, 2.87e9]);
        assert!(!levels.ambiguous_ground);
    }

    #[test]
    fn longitudinal_field_is_linear_zeeman() {
        let axis = NvAxes::default().0[1];
        let b = 3e-3;
        let levels = transition_frequencies(&nv(), &axis, &(axis * b)).unwrap();
        let shift = nv().gyromagnetic_ratio() * b;
        let d = nv().zero_field_splitting;
        assert_relative_eq!(levels.eigenvalues[0], 0.0, epsilon = 1e-3);
        assert_relative_eq!(levels.eigenvalues[1], d - shift, max_relative = 1e-13);
        assert_relative_eq!(levels.eigenvalues[2], d + shift, max_relative = 1e-13);
        assert_relative_eq!(levels.upper() - levels.lower(), 2.0 * shift, max_relative = 1e-9);
    }

    #[test]
    fn transverse_field_matches_cubic_oracle() {
        let axis = NvAxes::default().0[0];
        let perp = Vector3::new(1.0, -1.0, 0.0).normalize();
        let b0 = perp * 1e-3;
        let species = SpinSpecies { zero_field_splitting: 2.87e9, g_factor: 2.0028 };
        let h = hamiltonian(&species, &axis, &b0).unwrap();
        let oracle = cubic_eigenvalues(&h);
        let levels = transition_frequencies(&species, &axis, &b0).unwrap();
        // The two upper roots are ~0.3 MHz apart, so the cubic formula itself
        // is only good to ~ε·D³/(D·0.3 MHz) ≈ 10 mHz there.
        for (num, exact) in levels.eigenvalues.iter().zip(oracle) {
            assert!((num - exact).abs() < 0.05, "{num} vs {exact}");
        }
    }

    #[test]
    fn field_along_010_is_equivalent_for_all_axes() {
        let axes = NvAxes::default();
        let b0 = Vector3::new(0.0, 5e-3, 0.0);
        let levels: Vec<_> = axes.iter().map(|a| transition_frequencies(&nv(), a, &b0).unwrap()).collect();
        for l in &levels[1..] {
            for k in 0..2 {
                assert_relative_eq!(l.transitions[k], levels[0].transitions[k], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_axis() {
        let err = hamiltonian(&nv(), &Vector3::new(1.0, 1.0, 0.0), &Vector3::zeros()).unwrap_err();
        assert_eq!(err.code(), "bad_axis");
    }

    #[test]
    fn tune_to_zero_field_splitting() {
        let b = zeeman_tune(&nv(), &NvAxes::default(), &Vector3::y(), 2.87e9, Branch::Upper).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn tune_to_loaded_cavity() {
        let axes = NvAxes::default();
        let b = zeeman_tune(&nv(), &axes, &Vector3::y(), 3.121e9, Branch::Upper).unwrap();
        let f = transition_frequencies(&nv(), &axes.0[0], &(Vector3::y() * b)).unwrap().upper();
        assert!((f - 3.121e9).abs() < TUNING_TOLERANCE_HZ, "{f}");
        // Roughly ΔD / (γ cos θ) with cos θ = 1/√3.
        assert!(b > 8e-3 && b < 2e-2, "{b}");
    }

    #[test]
    fn tune_lower_branch() {
        let axes = NvAxes::default();
        let b = zeeman_tune(&nv(), &axes, &Vector3::y(), 2.7e9, Branch::Lower).unwrap();
        let f = transition_frequencies(&nv(), &axes.0[0], &(Vector3::y() * b)).unwrap().lower();
        assert!((f - 2.7e9).abs() < TUNING_TOLERANCE_HZ);
        // First crossing, before the branch turns back up near 30 mT.
        assert!(b < 0.03, "{b}");
    }

    #[test]
    fn unreachable_target() {
        let err = zeeman_tune(&nv(), &NvAxes::default(), &Vector3::y(), 100e9, Branch::Upper).unwrap_err();
        assert_eq!(err.code(), "no_solution");
        // Along ⟨100⟩ the lower branch bottoms out near 2.62 GHz.
        let err = zeeman_tune(&nv(), &NvAxes::default(), &Vector3::y(), 2.5e9, Branch::Lower).unwrap_err();
        assert_eq!(err.code(), "no_solution");
    }

    #[test]
    fn transverse_shift_is_quadratic() {
        let axis = NvAxes::default().0[0];
        let perp = Vector3::new(1.0, -1.0, 0.0).normalize();
        let shift = |b: f64| {
            let l = transition_frequencies(&nv(), &axis, &(perp * b)).unwrap();
            0.5 * (l.lower() + l.upper()) - nv().zero_field_splitting
        };
        // Local exponent log2(δ(2b)/δ(b)) and its Richardson extrapolation.
        let order = |b: f64| (shift(2.0 * b) / shift(b)).log2();
        let (p1, p2) = (order(2e-4), order(1e-4));
        let extrapolated = (4.0 * p2 - p1) / 3.0;
        assert!((p2 - 2.0).abs() < 1e-2, "{p2}");
        assert!((extrapolated - 2.0).abs() < 1e-3, "{extrapolated}");
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = sweep(&nv(), &NvAxes::default(), &Vector3::y(), &[0.0, 1e-3]).unwrap();
        assert_eq!(rows.len(), 8);
        let csv = sweep_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SWEEP_CSV_HEADER));
        assert_eq!(lines.next(), Some("0e0,0,2.87e9,2.87e9"));
    }

    fn field() -> impl Strategy<Value = Vector3<f64>> {
        (-0.2..0.2f64, -0.2..0.2f64, -0.2..0.2f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn hamiltonian_is_hermitian_with_conserved_trace(b0 in field(), k in 0usize..4) {
            let axis = NvAxes::default().0[k];
            let h = hamiltonian(&nv(), &axis, &b0).unwrap();
            let skew = (h - h.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
            prop_assert_eq!(skew, 0.0);
            let levels = transition_frequencies(&nv(), &axis, &b0).unwrap();
            let trace = h.trace().re;
            let sum: f64 = levels.eigenvalues.iter().sum();
            prop_assert!(((sum - trace) / trace).abs() < 1e-9);
            prop_assert!(levels.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn eigenvalues_match_cubic(b0 in field(), k in 0usize..4) {
            let axis = NvAxes::default().0[k];
            let h = hamiltonian(&nv(), &axis, &b0).unwrap();
            let levels = transition_frequencies(&nv(), &axis, &b0).unwrap();
            let oracle = cubic_eigenvalues(&h);
            let scale = h.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in levels.eigenvalues.iter().zip(oracle) {
                prop_assert!((a - b).abs() < 1e-7 * scale, "{} vs {}", a, b);
            }
        }

        #[test]
        fn longitudinal_monotonicity(b1 in 0.0..0.09f64, db in 1e-5..0.01f64) {
            let axis = NvAxes::default().0[0];
            let l1 = transition_frequencies(&nv(), &axis, &(axis * b1)).unwrap();
            let l2 = transition_frequencies(&nv(), &axis, &(axis * (b1 + db))).unwrap();
            prop_assert!(l2.upper() > l1.upper());
            prop_assert!(l2.lower() < l1.lower());
        }

        #[test]
        fn longitudinal_tuning_roundtrip(b in 1e-4..0.09f64) {
            let axes = NvAxes::default();
            let axis = axes.0[0];
            let f = transition_frequencies(&nv(), &axis, &(axis * b)).unwrap().upper();
            let solved = zeeman_tune(&nv(), &axes, &axis, f, Branch::Upper).unwrap();
            // 1 Hz in frequency is ~36 pT in field.
            prop_assert!((solved - b).abs() < 2.0 * TUNING_TOLERANCE_HZ / nv().gyromagnetic_ratio());
        }
    }
}
