//! Pattern evaluation: maximum and average nearest-pilot distance, projection
//! spacings, and the absorption-area partition of a rasterized frame.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    make_pattern, norm, LatticeBasis, OfdmGridSpec, PatternKind, PilotPattern, RegularizedScale, Vec2,
};

/// Samples per basis vector used when no resolution is given.
pub const DEFAULT_RESOLUTION: usize = 256;
pub const MIN_RESOLUTION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternMetrics {
    /// Maximum over the plane of the distance to the nearest pilot (covering radius).
    pub d_max: f64,
    /// Mean nearest-pilot distance for a uniformly distributed point.
    pub d_avg: f64,
    pub d_t_proj: f64,
    pub d_f_proj: f64,
    pub t_uniform: bool,
    pub f_uniform: bool,
    pub resolution: usize,
}

/// Dense-sampling evaluation of a continuous pattern.
pub fn pattern_metrics(pattern: &PilotPattern, resolution: usize) -> Result<PatternMetrics> {
    lattice_metrics(&pattern.basis, resolution)
}

/// Sample one fundamental domain on a `resolution x resolution` midpoint grid
/// (a `resolution`-point segment across the spacing for line lattices) and
/// reduce the nearest-pilot distance field to its max and mean.
pub fn lattice_metrics(basis: &LatticeBasis, resolution: usize) -> Result<PatternMetrics> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(format!(
            "resolution {resolution} below the minimum of {MIN_RESOLUTION} samples per spacing"
        )));
    }
    basis.check_nondegenerate()?;
    let n = resolution;
    let step = 1.0 / n as f64;
    // Point at fractional coordinates (u, v) of the fundamental domain.
    let at = |u: f64, v: f64| -> Vec2 {
        if basis.is_line() {
            [basis.offset[0] + u * basis.e2[0], basis.offset[1] + u * basis.e2[1]]
        } else {
            [
                basis.offset[0] + u * basis.e1[0] + v * basis.e2[0],
                basis.offset[1] + u * basis.e1[1] + v * basis.e2[1],
            ]
        }
    };
    let cols = if basis.is_line() { 1 } else { n };
    // The maximum is taken over the closed sample lattice (corners included),
    // the mean over cell midpoints. Row partials are collected in order and
    // reduced sequentially, so the result does not depend on how rayon splits
    // the rows.
    let rows: Vec<(f64, Vec2, f64)> = (0..=n)
        .into_par_iter()
        .map(|a| {
            let mut max = (0.0f64, [0.0, 0.0]);
            let mut sum = 0.0;
            for b in 0..=cols {
                let (u, v) = (a as f64 * step, b as f64 * step);
                let p = at(u, v);
                let d = basis.nearest_distance(p);
                if d > max.0 {
                    max = (d, p);
                }
                if a < n && b < cols {
                    sum += basis.nearest_distance(at(u + 0.5 * step, v + 0.5 * step));
                }
            }
            (max.0, max.1, sum)
        })
        .collect();
    let (mut d_max, peak) = rows.iter().fold((0.0, [0.0, 0.0]), |acc, r| if r.0 > acc.0 { (r.0, r.1) } else { acc });
    if !basis.is_line() {
        d_max = d_max.max(refine_peak(basis, peak, d_max));
    }
    let d_avg = rows.iter().map(|r| r.2).sum::<f64>() / (n * cols) as f64;
    let t = basis.projection_spacing(0);
    let f = basis.projection_spacing(1);
    Ok(PatternMetrics {
        d_max,
        d_avg,
        d_t_proj: t.spacing,
        d_f_proj: f.spacing,
        t_uniform: t.uniform,
        f_uniform: f.uniform,
        resolution,
    })
}

/// The distance field peaks on Voronoi vertices, where sampling converges
/// only at first order. Returns the nearest-pilot distance at the
/// circumcentre of the three pilots closest to the sampled peak `p`.
fn refine_peak(basis: &LatticeBasis, p: Vec2, d: f64) -> f64 {
    let r = 1.5 * d + 1e-9;
    let mut near: Vec<(f64, Vec2)> = basis
        .points_in_box([p[0] - r, p[1] - r], [p[0] + r, p[1] + r])
        .into_iter()
        .map(|(_, q)| (norm([q[0] - p[0], q[1] - p[1]]), q))
        .collect();
    if near.len() < 3 {
        return 0.0;
    }
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (a, b, c) = (near[0].1, near[1].1, near[2].1);
    let det = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if det.abs() < 1e-12 {
        return 0.0;
    }
    let (a2, b2, c2) = (a[0] * a[0] + a[1] * a[1], b[0] * b[0] + b[1] * b[1], c[0] * c[0] + c[1] * c[1]);
    let centre = [
        (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / det,
        (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / det,
    ];
    basis.nearest_distance(centre)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub kind: PatternKind,
    /// Rotation applied to the constructed lattice, radians.
    pub rotation: f64,
    pub density: f64,
    pub metrics: PatternMetrics,
}

/// One metrics row per kind, all at the same `density` (regularized units).
/// With `rotated`, each lattice is first turned by [`PatternKind::table_rotation`].
pub fn metrics_table(
    kinds: &[PatternKind],
    density: f64,
    rotated: bool,
    resolution: usize,
) -> Result<Vec<MetricsRow>> {
    kinds
        .iter()
        .map(|&kind| {
            let mut pattern = make_pattern(kind, density, RegularizedScale::unit())?;
            let rotation = if rotated { kind.table_rotation() } else { 0.0 };
            if rotation != 0.0 {
                pattern.basis = pattern.basis.rotated(rotation);
            }
            Ok(MetricsRow { kind, rotation, density, metrics: pattern_metrics(&pattern, resolution)? })
        })
        .collect()
}

pub const METRICS_CSV_HEADER: &str = "kind,D_M,D_E,d_t,d_f,density,resolution";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.kind, m.d_max, m.d_avg, m.d_t_proj, m.d_f_proj, r.density, m.resolution
        ));
    }
    out
}

pub fn metrics_text_table(rows: &[MetricsRow]) -> String {
    let mut out = format!(
        "{:<14} {:>8} {:>8} {:>8} {:>8} {:>9}\n",
        "kind", "D_M", "D_E", "d_t", "d_f", "rot(deg)"
    );
    let spacing = |v: f64, uniform: bool| {
        if uniform {
            format!("{v:.3}")
        } else {
            format!("~{v:.3}")
        }
    };
    for r in rows {
        let m = &r.metrics;
        out.push_str(&format!(
            "{:<14} {:>8.3} {:>8.3} {:>8} {:>8} {:>9.2}\n",
            r.kind.name(),
            m.d_max,
            m.d_avg,
            spacing(m.d_t_proj, m.t_uniform),
            spacing(m.d_f_proj, m.f_uniform),
            r.rotation.to_degrees()
        ));
    }
    out
}

/// Owner pilot of every grid cell under the regularized Euclidean metric.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionMap {
    /// Index into `pattern.pilot_cells`, row-major over the frame.
    pub owner: Vec<usize>,
    /// Cell is equidistant (to 1e-9 relative) from two or more nearest pilots.
    pub boundary: Vec<bool>,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
}

impl AbsorptionMap {
    pub fn owner(&self, symbol: usize, subcarrier: usize) -> usize {
        self.owner[symbol * self.n_subcarriers + subcarrier]
    }

    pub fn is_boundary(&self, symbol: usize, subcarrier: usize) -> bool {
        self.boundary[symbol * self.n_subcarriers + subcarrier]
    }

    /// Number of cells owned by each pilot.
    pub fn ownership_counts(&self, n_pilots: usize) -> Vec<usize> {
        let mut counts = vec![0; n_pilots];
        for &o in &self.owner {
            counts[o] += 1;
        }
        counts
    }
}

const TIE_TOL: f64 = 1e-9;

/// Uniform bucket index over pilot positions for nearest-pilot queries.
struct Buckets {
    size: f64,
    origin: Vec2,
    dims: (i64, i64),
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(points: &[Vec2], size: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let dims = (
            ((hi[0] - lo[0]) / size).floor() as i64 + 1,
            ((hi[1] - lo[1]) / size).floor() as i64 + 1,
        );
        let mut cells = vec![Vec::new(); (dims.0 * dims.1) as usize];
        let mut b = Self { size, origin: lo, dims, cells: Vec::new() };
        for (i, p) in points.iter().enumerate() {
            let (bx, by) = b.bucket_of(*p);
            cells[(bx.clamp(0, dims.0 - 1) * dims.1 + by.clamp(0, dims.1 - 1)) as usize].push(i);
        }
        b.cells = cells;
        b
    }

    fn bucket_of(&self, p: Vec2) -> (i64, i64) {
        (
            ((p[0] - self.origin[0]) / self.size).floor() as i64,
            ((p[1] - self.origin[1]) / self.size).floor() as i64,
        )
    }

    fn ring(&self, center: (i64, i64), r: i64, mut visit: impl FnMut(usize)) {
        for bx in center.0 - r..=center.0 + r {
            for by in center.1 - r..=center.1 + r {
                if (bx - center.0).abs() != r && (by - center.1).abs() != r {
                    continue;
                }
                if bx < 0 || by < 0 || bx >= self.dims.0 || by >= self.dims.1 {
                    continue;
                }
                for &i in &self.cells[(bx * self.dims.1 + by) as usize] {
                    visit(i);
                }
            }
        }
    }

    /// Every point within `TIE_TOL` (relative) of the minimum distance to `q`.
    fn nearest_ties(&self, points: &[Vec2], q: Vec2) -> Vec<usize> {
        let center = self.bucket_of(q);
        let mut cand: Vec<(f64, usize)> = Vec::new();
        let mut best = f64::INFINITY;
        let max_r = self.dims.0.max(self.dims.1) + center.0.abs().max(center.1.abs()) + 1;
        for r in 0..=max_r {
            self.ring(center, r, |i| {
                let d2 = (points[i][0] - q[0]).powi(2) + (points[i][1] - q[1]).powi(2);
                best = best.min(d2);
                cand.push((d2, i));
            });
            // Anything in ring r+1 or beyond is at least r bucket widths away.
            let reach = r as f64 * self.size;
            if best.is_finite() && reach * reach > best * (1.0 + 4.0 * TIE_TOL) {
                break;
            }
        }
        let limit = best * (1.0 + TIE_TOL) + f64::MIN_POSITIVE;
        cand.into_iter().filter(|&(d2, _)| d2 <= limit).map(|(_, i)| i).collect()
    }
}

/// Assign every cell of `frame` to its nearest pilot.
///
/// Exact ties go to the pilot with the larger symbol index, then the larger
/// subcarrier index, and the cell is flagged as a boundary cell.
pub fn absorption_map(pattern: &PilotPattern, frame: &OfdmGridSpec) -> Result<AbsorptionMap> {
    if pattern.pilot_cells.is_empty() {
        return Err(Error::invalid("pattern has no pilot cells"));
    }
    if pattern.frame_dims != Some((frame.n_symbols, frame.n_subcarriers)) {
        return Err(Error::invalid("pattern was not rasterized on this frame"));
    }
    let pilots = pattern.pilot_positions();
    let area = frame.n_cells() as f64 * pattern.scale.cell_area();
    let size = (area / pilots.len() as f64).sqrt().max(1e-9);
    let buckets = Buckets::new(&pilots, size);
    let n_sc = frame.n_subcarriers;
    let assigned: Vec<(usize, bool)> = (0..frame.n_cells())
        .into_par_iter()
        .map(|idx| {
            let q = pattern.cell_position(idx / n_sc, idx % n_sc);
            let ties = buckets.nearest_ties(&pilots, q);
            let owner = ties
                .iter()
                .copied()
                .max_by_key(|&i| (pattern.pilot_cells[i].symbol, pattern.pilot_cells[i].subcarrier))
                .expect("at least one pilot");
            (owner, ties.len() > 1)
        })
        .collect();
    let (owner, boundary) = assigned.into_iter().unzip();
    Ok(AbsorptionMap { owner, boundary, n_symbols: frame.n_symbols, n_subcarriers: n_sc })
}

/// Covering lower bound: no pattern of density `d` covers the plane with a
/// smaller maximum distance than `sqrt(1 / (pi d))`.
pub fn covering_lower_bound(density: f64) -> f64 {
    (1.0 / (std::f64::consts::PI * density)).sqrt()
}

/// Smallest pairwise distance among a lattice's neighbour vectors, for
/// reporting.
pub fn min_pilot_separation(basis: &LatticeBasis) -> f64 {
    if basis.is_line() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for m in 0..basis.motif.len() {
        for m2 in 0..basis.motif.len() {
            for i in -2i64..=2 {
                for j in -2i64..=2 {
                    if i == 0 && j == 0 && m == m2 {
                        continue;
                    }
                    let a = basis.point(crate::grid::LatticeLabel { i: 0, j: 0, m });
                    let b = basis.point(crate::grid::LatticeLabel { i, j, m: m2 });
                    best = best.min(norm([b[0] - a[0], b[1] - a[1]]));
                }
            }
        }
    }
    best
}
