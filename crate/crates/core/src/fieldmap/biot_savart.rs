//! Magnetostatic field of flat rectangular current sheets.
//!
//! Each sheet carries a uniform surface current density `K` (A/m). The field
//! at `r` is `μ₀/4π ∫∫ K ĵ × (r − r') / |r − r'|³ dA`, evaluated by globally
//! adaptive tensor Gauss–Legendre quadrature. Panels are refined largest error
//! first until the summed error estimate drops below `rel_tol · |B_sheet|`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{FieldMap, FieldMapError, GridSpec};
use crate::constants::MU_0;
use crate::quadrature::gauss_legendre;

/// Closest allowed approach of an evaluation point to a sheet [m].
pub const SINGULARITY_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    /// Gauss–Legendre points per panel edge.
    pub order: usize,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { rel_tol: 1e-8, order: 6, max_panels: 20_000 }
    }
}

/// Rectangular sheet with current flowing along `current_dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSheet {
    pub center: Vector3<f64>,
    /// Unit vector of current flow.
    pub current_dir: Vector3<f64>,
    /// Unit vector spanning the sheet perpendicular to the current.
    pub width_dir: Vector3<f64>,
    /// Half extent along `current_dir` [m].
    pub half_length: f64,
    /// Half extent along `width_dir` [m].
    pub half_width: f64,
    /// Surface current density [A/m]; the sign flips the flow.
    pub surface_current: f64,
}

impl CurrentSheet {
    pub fn normal(&self) -> Vector3<f64> {
        self.current_dir.cross(&self.width_dir)
    }

    pub fn validate(&self) -> Result<(), FieldMapError> {
        let unit = |v: &Vector3<f64>| (v.norm() - 1.0).abs() < 1e-12;
        if !unit(&self.current_dir) || !unit(&self.width_dir) {
            return Err(FieldMapError::DegenerateSheet("direction vectors must be unit length".into()));
        }
        if self.current_dir.dot(&self.width_dir).abs() > 1e-12 {
            return Err(FieldMapError::DegenerateSheet("current and width directions must be orthogonal".into()));
        }
        if !(self.half_length > 0.0 && self.half_width > 0.0) {
            return Err(FieldMapError::DegenerateSheet("sheet extents must be positive".into()));
        }
        if !self.surface_current.is_finite() || !self.center.iter().all(|c| c.is_finite()) {
            return Err(FieldMapError::DegenerateSheet("non-finite sheet parameters".into()));
        }
        Ok(())
    }

    /// Copy with the current scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        CurrentSheet { surface_current: self.surface_current * s, ..*self }
    }
}

/// Two `length × width` sheets at `z = ±gap/2` with opposite currents along x.
///
/// Between the sheets the field points along +y with magnitude close to
/// `μ₀ K` when the sheets are large compared with the gap.
pub fn counter_propagating_pair(length: f64, width: f64, gap: f64, surface_current: f64) -> [CurrentSheet; 2] {
    let sheet = |z: f64, k: f64| CurrentSheet {
        center: Vector3::new(0.0, 0.0, z),
        current_dir: Vector3::x(),
        width_dir: Vector3::y(),
        half_length: 0.5 * length,
        half_width: 0.5 * width,
        surface_current: k,
    };
    [sheet(0.5 * gap, surface_current), sheet(-0.5 * gap, -surface_current)]
}

/// Tensor rule mapped onto panels.
struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Rule { nodes, weights }
    }
}

#[derive(Clone, Copy)]
struct Rect {
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
}

impl Rect {
    fn quarters(&self) -> [Rect; 4] {
        let sm = 0.5 * (self.s0 + self.s1);
        let tm = 0.5 * (self.t0 + self.t1);
        [
            Rect { s0: self.s0, s1: sm, t0: self.t0, t1: tm },
            Rect { s0: sm, s1: self.s1, t0: self.t0, t1: tm },
            Rect { s0: self.s0, s1: sm, t0: tm, t1: self.t1 },
            Rect { s0: sm, s1: self.s1, t0: tm, t1: self.t1 },
        ]
    }
}

/// Point in sheet-local coordinates (along current, along width, along normal).
#[derive(Clone, Copy)]
struct Local {
    s: f64,
    t: f64,
    n: f64,
}

type Pair = [f64; 2];

/// Integral over `rect` of the dimensionless kernel, returning the
/// (width_dir, normal) components of `ĵ × (r − r')/|r − r'|³`.
fn panel_integral(rule: &Rule, p: Local, rect: &Rect) -> Pair {
    let hs = 0.5 * (rect.s1 - rect.s0);
    let ms = 0.5 * (rect.s1 + rect.s0);
    let ht = 0.5 * (rect.t1 - rect.t0);
    let mt = 0.5 * (rect.t1 + rect.t0);
    let n2 = p.n * p.n;
    let mut acc = [0.0; 2];
    for (xs, ws) in rule.nodes.iter().zip(&rule.weights) {
        let u = p.s - (ms + hs * xs);
        let u2n2 = u * u + n2;
        let mut row = [0.0; 2];
        for (xt, wt) in rule.nodes.iter().zip(&rule.weights) {
            let v = p.t - (mt + ht * xt);
            let r2 = u2n2 + v * v;
            let inv_r3 = 1.0 / (r2 * r2.sqrt());
            // ĵ × (u ĵ + v ŵ + n n̂) = v n̂ − n ŵ
            row[0] -= wt * p.n * inv_r3;
            row[1] += wt * v * inv_r3;
        }
        acc[0] += ws * row[0];
        acc[1] += ws * row[1];
    }
    let jac = hs * ht;
    [acc[0] * jac, acc[1] * jac]
}

struct Panel {
    rect: Rect,
    value: Pair,
    children: [Pair; 4],
    error: f64,
}

impl Panel {
    fn evaluate(rule: &Rule, p: Local, rect: Rect, coarse: Pair) -> Panel {
        let quarters = rect.quarters();
        let children = quarters.map(|q| panel_integral(rule, p, &q));
        let value = [
            children.iter().map(|c| c[0]).sum::<f64>(),
            children.iter().map(|c| c[1]).sum::<f64>(),
        ];
        let error = ((value[0] - coarse[0]).powi(2) + (value[1] - coarse[1]).powi(2)).sqrt();
        Panel { rect, value, children, error }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn sheet_field(rule: &Rule, opts: &QuadratureOptions, sheet: &CurrentSheet, point: &Vector3<f64>) -> Result<Vector3<f64>, FieldMapError> {
    let normal = sheet.normal();
    let d = point - sheet.center;
    let p = Local { s: d.dot(&sheet.current_dir), t: d.dot(&sheet.width_dir), n: d.dot(&normal) };
    let (a, b) = (sheet.half_length, sheet.half_width);

    let out_s = (p.s.abs() - a).max(0.0);
    let out_t = (p.t.abs() - b).max(0.0);
    if (out_s * out_s + out_t * out_t + p.n * p.n).sqrt() < SINGULARITY_DISTANCE {
        return Err(FieldMapError::Singularity { x: point.x, y: point.y, z: point.z });
    }

    // Split at the foot of the perpendicular so the kernel peak sits on panel corners.
    let s_cuts: Vec<f64> = if p.s > -a && p.s < a { vec![-a, p.s, a] } else { vec![-a, a] };
    let t_cuts: Vec<f64> = if p.t > -b && p.t < b { vec![-b, p.t, b] } else { vec![-b, b] };

    let mut heap = BinaryHeap::new();
    for sw in s_cuts.windows(2) {
        for tw in t_cuts.windows(2) {
            let rect = Rect { s0: sw[0], s1: sw[1], t0: tw[0], t1: tw[1] };
            let coarse = panel_integral(rule, p, &rect);
            heap.push(Panel::evaluate(rule, p, rect, coarse));
        }
    }

    loop {
        let (mut total, mut error) = ([0.0; 2], 0.0);
        for panel in heap.iter() {
            total[0] += panel.value[0];
            total[1] += panel.value[1];
            error += panel.error;
        }
        let magnitude = (total[0] * total[0] + total[1] * total[1]).sqrt();
        if error <= opts.rel_tol * magnitude || error == 0.0 || heap.len() >= opts.max_panels {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        for (rect, coarse) in worst.rect.quarters().into_iter().zip(worst.children) {
            heap.push(Panel::evaluate(rule, p, rect, coarse));
        }
    }

    // Sum in a fixed order so the result does not depend on heap layout.
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|x, y| {
        (x.rect.s0, x.rect.t0).partial_cmp(&(y.rect.s0, y.rect.t0)).unwrap_or(Ordering::Equal)
    });
    let (mut bw, mut bn) = (0.0, 0.0);
    for panel in panels {
        bw += panel.value[0];
        bn += panel.value[1];
    }
    let prefactor = MU_0 / (4.0 * std::f64::consts::PI) * sheet.surface_current;
    Ok((sheet.width_dir * bw + normal * bn) * prefactor)
}

/// Field of all `sheets` at one point [T].
pub fn field_at(sheets: &[CurrentSheet], point: &Vector3<f64>, opts: &QuadratureOptions) -> Result<Vector3<f64>, FieldMapError> {
    let rule = Rule::new(opts.order);
    field_with_rule(&rule, opts, sheets, point)
}

fn field_with_rule(rule: &Rule, opts: &QuadratureOptions, sheets: &[CurrentSheet], point: &Vector3<f64>) -> Result<Vector3<f64>, FieldMapError> {
    let mut total = Vector3::zeros();
    for sheet in sheets {
        total += sheet_field(rule, opts, sheet, point)?;
    }
    Ok(total)
}

/// Samples the sheets' field on every node of `grid`, evaluated in parallel.
///
/// The stored mode energy is the doubled magnetic energy over the grid
/// (midpoint rule), see [`super::magnetic_energy_doubled`].
pub fn biot_savart_map(sheets: &[CurrentSheet], grid: &GridSpec, opts: &QuadratureOptions) -> Result<FieldMap, FieldMapError> {
    grid.validate()?;
    if sheets.is_empty() {
        return Err(FieldMapError::DegenerateSheet("no current sheets given".into()));
    }
    for sheet in sheets {
        sheet.validate()?;
    }
    if !(opts.rel_tol > 0.0) || opts.order == 0 {
        return Err(FieldMapError::NonPositive("quadrature tolerance/order"));
    }
    let rule = Rule::new(opts.order);
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.unravel(idx);
            field_with_rule(&rule, opts, sheets, &grid.node(i, j, k))
        })
        .collect::<Result<Vec<_>, _>>()?;
    FieldMap::with_magnetic_energy(*grid, samples)
}
