//! Field-strength statistics over a sample region.
//!
//! The region is covered by the grid cells it intersects. Each cell
//! contributes the trilinearly interpolated field at its center, weighted by
//! the volume it shares with the region. Deviations are taken on |B|.

use nalgebra::Vector3;
use serde::Serialize;

use super::{FieldMap, FieldMapError, SampleRegion};
use crate::quadrature::pairwise_sum;

/// Slack for region-inside-hull checks, relative to the hull size.
const HULL_SLACK: f64 = 1e-9;

/// One grid cell inside a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub center: Vector3<f64>,
    /// Volume shared with the region [m³].
    pub weight: f64,
    /// Interpolated field at the cell center.
    pub field: Vector3<f64>,
}

/// Cells along one axis: bounds and the node indices averaged at the center.
struct AxisCell {
    lo: f64,
    hi: f64,
    nodes: [usize; 2],
}

fn axis_cells(map: &FieldMap, axis: usize, lo: f64, hi: f64) -> Vec<(AxisCell, f64)> {
    let g = map.grid();
    let (o, s, n) = (g.origin[axis], g.spacing[axis], g.dims[axis]);
    let cells: Vec<AxisCell> = if n == 1 {
        vec![AxisCell { lo: o - 0.5 * s, hi: o + 0.5 * s, nodes: [0, 0] }]
    } else {
        (0..n - 1)
            .map(|i| AxisCell { lo: o + i as f64 * s, hi: o + (i + 1) as f64 * s, nodes: [i, i + 1] })
            .collect()
    };
    cells
        .into_iter()
        .filter_map(|c| {
            let overlap = c.hi.min(hi) - c.lo.max(lo);
            (overlap > 0.0).then_some((c, overlap))
        })
        .collect()
}

/// Cells of `map` intersecting `region`, in x-fastest order.
pub fn region_cells(map: &FieldMap, region: &SampleRegion) -> Result<Vec<RegionCell>, FieldMapError> {
    region.validate()?;
    let g = map.grid();
    for a in 0..3 {
        let (h0, h1) = g.axis_hull(a);
        let (r0, r1) = region.bounds(a);
        let slack = HULL_SLACK * (h1 - h0).abs().max(region.extents[a]);
        if r0 < h0 - slack || r1 > h1 + slack {
            return Err(FieldMapError::RegionOutsideGrid);
        }
    }
    let per_axis: Vec<_> = (0..3)
        .map(|a| {
            let (lo, hi) = region.bounds(a);
            axis_cells(map, a, lo, hi)
        })
        .collect();
    let mut cells = Vec::with_capacity(per_axis.iter().map(Vec::len).product());
    for (cz, wz) in &per_axis[2] {
        for (cy, wy) in &per_axis[1] {
            for (cx, wx) in &per_axis[0] {
                let mut field = Vector3::zeros();
                for &k in &cz.nodes {
                    for &j in &cy.nodes {
                        for &i in &cx.nodes {
                            field += map.sample(i, j, k);
                        }
                    }
                }
                field /= 8.0;
                cells.push(RegionCell {
                    center: Vector3::new(0.5 * (cx.lo + cx.hi), 0.5 * (cy.lo + cy.hi), 0.5 * (cz.lo + cz.hi)),
                    weight: wx * wy * wz,
                    field,
                });
            }
        }
    }
    if cells.is_empty() {
        return Err(FieldMapError::EmptyRegion);
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    /// Lower edge of |deviation| (fraction).
    pub lower: f64,
    /// Upper edge; `None` for the open last bin.
    pub upper: Option<f64>,
    pub volume_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    #[serde(rename = "mean_B_T")]
    pub mean: f64,
    pub rms_deviation: f64,
    pub max_deviation: f64,
    pub contour_histogram: Vec<HistogramBin>,
    pub cells: usize,
}

/// Weighted statistics of a positive scalar over cells; shared with the coupling report.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScalarStats {
    pub mean: f64,
    pub rms_deviation: f64,
    pub max_deviation: f64,
    pub histogram: Vec<HistogramBin>,
}

pub(crate) fn scalar_stats(values: &[f64], weights: &[f64], bins: &[f64]) -> ScalarStats {
    let total = pairwise_sum(weights);
    let weighted: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    let mean = pairwise_sum(&weighted) / total;
    let rel: Vec<f64> = if mean > 0.0 { values.iter().map(|v| (v - mean) / mean).collect() } else { vec![0.0; values.len()] };
    let sq: Vec<f64> = rel.iter().zip(weights).map(|(d, w)| d * d * w).collect();
    let rms_deviation = (pairwise_sum(&sq) / total).sqrt();
    let max_deviation = rel.iter().map(|d| d.abs()).fold(0.0, f64::max);

    let mut edges: Vec<f64> = bins.iter().copied().filter(|b| *b > 0.0 && b.is_finite()).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut lowers = vec![0.0];
    lowers.extend(edges.iter().copied());
    let mut mass = vec![Vec::new(); lowers.len()];
    for (d, w) in rel.iter().zip(weights) {
        let bin = edges.partition_point(|e| *e <= d.abs());
        mass[bin].push(*w);
    }
    let histogram = lowers
        .iter()
        .enumerate()
        .map(|(b, &lower)| HistogramBin {
            lower,
            upper: edges.get(b).copied(),
            volume_fraction: pairwise_sum(&mass[b]) / total,
        })
        .collect();
    ScalarStats { mean, rms_deviation, max_deviation, histogram }
}

/// RMS and maximum fractional deviation of |B| over `region`, plus the volume
/// fraction in each |deviation| bin. `bins` are upper edges (fractions);
/// a final open bin collects everything above the last edge.
pub fn homogeneity(map: &FieldMap, region: &SampleRegion, bins: &[f64]) -> Result<HomogeneityReport, FieldMapError> {
    let cells = region_cells(map, region)?;
    let values: Vec<f64> = cells.iter().map(|c| c.field.norm()).collect();
    let weights: Vec<f64> = cells.iter().map(|c| c.weight).collect();
    let stats = scalar_stats(&values, &weights, bins);
    Ok(HomogeneityReport {
        mean: stats.mean,
        rms_deviation: stats.rms_deviation,
        max_deviation: stats.max_deviation,
        contour_histogram: stats.histogram,
        cells: cells.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldmap::GridSpec;
    use proptest::prelude::*;

    /// 3×2×2 nodes with Bx = 0, 2, 4 along x: cell centers see |B| = 1 and 3.
    fn two_value_map() -> FieldMap {
        let grid = GridSpec::new(Vector3::zeros(), Vector3::repeat(1.0), [3, 2, 2]).unwrap();
        let samples = (0..grid.len()).map(|idx| Vector3::new(2.0 * grid.unravel(idx)[0] as f64, 0.0, 0.0)).collect();
        FieldMap::new(grid, samples, 1.0).unwrap()
    }

    fn whole(map: &FieldMap) -> SampleRegion {
        let g = map.grid();
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..3).map(|a| g.axis_hull(a)).unzip();
        let lo = Vector3::from_vec(lo);
        let hi = Vector3::from_vec(hi);
        SampleRegion::new((lo + hi) / 2.0, hi - lo).unwrap()
    }

    #[test]
    fn two_value_statistics() {
        let map = two_value_map();
        let r = homogeneity(&map, &whole(&map), &[0.25, 0.75]).unwrap();
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.rms_deviation, 0.5);
        assert_eq!(r.max_deviation, 0.5);
        assert_eq!(r.cells, 2);
        let fractions: Vec<f64> = r.contour_histogram.iter().map(|b| b.volume_fraction).collect();
        assert_eq!(fractions, vec![0.0, 1.0, 0.0]);
        assert_eq!(r.contour_histogram[2].upper, None);
    }

    #[test]
    fn uniform_field_has_no_deviation() {
        let grid = GridSpec::new(Vector3::zeros(), Vector3::repeat(1e-3), [2, 2, 2]).unwrap();
        let map = FieldMap::new(grid, vec![Vector3::new(0.0, 1e-6, 0.0); 8], 1.0).unwrap();
        let r = homogeneity(&map, &whole(&map), &[0.01]).unwrap();
        assert_eq!(r.mean, 1e-6);
        assert_eq!((r.rms_deviation, r.max_deviation), (0.0, 0.0));
    }

    #[test]
    fn partial_overlap_weights_cells() {
        let map = two_value_map();
        // Region covers all of the |B|=1 cell and a quarter of the |B|=3 cell.
        let region = SampleRegion::new(Vector3::new(0.625, 0.5, 0.5), Vector3::new(1.25, 1.0, 1.0)).unwrap();
        let r = homogeneity(&map, &region, &[]).unwrap();
        assert!((r.mean - (1.0 + 0.25 * 3.0) / 1.25).abs() < 1e-15);
    }

    #[test]
    fn region_outside_grid_rejected() {
        let map = two_value_map();
        let region = SampleRegion::new(Vector3::new(5.0, 0.5, 0.5), Vector3::repeat(1.0)).unwrap();
        assert_eq!(homogeneity(&map, &region, &[]).unwrap_err().code(), "region_outside_grid");
        assert!(SampleRegion::new(Vector3::zeros(), Vector3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn single_layer_grid() {
        let grid = GridSpec::new(Vector3::zeros(), Vector3::repeat(1.0), [2, 2, 1]).unwrap();
        let map = FieldMap::new(grid, vec![Vector3::new(1.0, 0.0, 0.0); 4], 1.0).unwrap();
        let r = homogeneity(&map, &whole(&map), &[]).unwrap();
        assert_eq!(r.cells, 1);
        assert_eq!(r.mean, 1.0);
    }

    proptest! {
        #[test]
        fn report_invariants(values in proptest::collection::vec(0.1..10.0f64, 12), s in 0.01..100.0f64) {
            let grid = GridSpec::new(Vector3::zeros(), Vector3::repeat(1.0), [3, 2, 2]).unwrap();
            let samples: Vec<_> = values.iter().map(|v| Vector3::new(*v, 0.5 * v, 0.0)).collect();
            let map = FieldMap::new(grid, samples.clone(), 1.0).unwrap();
            let region = whole(&map);
            let r = homogeneity(&map, &region, &[0.01, 0.05, 0.2]).unwrap();
            prop_assert!(r.rms_deviation <= r.max_deviation + 1e-15);
            let total: f64 = r.contour_histogram.iter().map(|b| b.volume_fraction).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            // Scale invariance of relative deviations.
            let scaled = FieldMap::new(grid, samples.iter().map(|b| b * s).collect(), 1.0).unwrap();
            let rs = homogeneity(&scaled, &region, &[0.01, 0.05, 0.2]).unwrap();
            prop_assert!((rs.rms_deviation - r.rms_deviation).abs() <= 1e-12 * r.rms_deviation.max(1e-300) + 1e-15);
        }
    }
}
