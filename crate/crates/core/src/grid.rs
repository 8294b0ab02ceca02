//! Regularized time-frequency plane, pilot lattices and their rasterization.
//!
//! Continuous lattices live in *regularized* coordinates `(x, y)` where one
//! unit of length corresponds to the same amount of channel variation along
//! time and along frequency. A [`RegularizedScale`] maps them to the discrete
//! OFDM grid: symbol `n` sits at `x = n / alpha_t`, subcarrier `k` at
//! `y = k / alpha_f`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};

/// A point or vector in regularized coordinates, `[time, frequency]`.
pub type Vec2 = [f64; 2];

const TIME: usize = 0;
const FREQ: usize = 1;

/// Apex angle of the Cell lattice triangles, `arccos(3/5)`.
pub fn cell_apex_angle() -> f64 {
    (0.6f64).acos()
}

/// Rotation of the first Cell basis vector from the time axis, `arctan(1/3)`.
pub fn cell_rotation() -> f64 {
    (1.0f64 / 3.0).atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Block,
    Comb,
    Rectangular,
    Hexagonal,
    Parallelogram,
    Diamond,
    Cell,
}

impl PatternKind {
    pub const ALL: [PatternKind; 7] = [
        PatternKind::Comb,
        PatternKind::Block,
        PatternKind::Rectangular,
        PatternKind::Hexagonal,
        PatternKind::Diamond,
        PatternKind::Parallelogram,
        PatternKind::Cell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Block => "block",
            PatternKind::Comb => "comb",
            PatternKind::Rectangular => "rectangular",
            PatternKind::Hexagonal => "hexagonal",
            PatternKind::Parallelogram => "parallelogram",
            PatternKind::Diamond => "diamond",
            PatternKind::Cell => "cell",
        }
    }

    /// Line lattices: every cell along one axis is a pilot.
    pub fn is_line(self) -> bool {
        matches!(self, PatternKind::Block | PatternKind::Comb)
    }

    /// Rotation used for the "rotated" rows of the comparison table.
    ///
    /// Rectangular is turned by 45 degrees so both projections are uniform
    /// with equal spacing. The other kinds already have uniform projections
    /// on at least one axis and are left as constructed.
    pub fn table_rotation(self) -> f64 {
        match self {
            PatternKind::Rectangular => PI / 4.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "block" => PatternKind::Block,
            "comb" => PatternKind::Comb,
            "rectangular" | "rect" | "square" => PatternKind::Rectangular,
            "hexagonal" | "hex" => PatternKind::Hexagonal,
            "parallelogram" => PatternKind::Parallelogram,
            "diamond" => PatternKind::Diamond,
            "cell" => PatternKind::Cell,
            other => return Err(Error::invalid(format!("unknown pattern kind '{other}'"))),
        };
        Ok(kind)
    }
}

/// Grid steps per regularized unit along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedScale {
    pub alpha_t: f64,
    pub alpha_f: f64,
}

impl RegularizedScale {
    pub fn new(alpha_t: f64, alpha_f: f64) -> Result<Self> {
        if !(alpha_t > 0.0 && alpha_f > 0.0) || !alpha_t.is_finite() || !alpha_f.is_finite() {
            return Err(Error::invalid(format!(
                "scale factors must be positive and finite, got alpha_t={alpha_t}, alpha_f={alpha_f}"
            )));
        }
        Ok(Self { alpha_t, alpha_f })
    }

    pub fn unit() -> Self {
        Self { alpha_t: 1.0, alpha_f: 1.0 }
    }

    /// Scale that balances the fourth-order moments of the Doppler spectrum
    /// (`w1_4`, cycles per symbol) and of the delay profile (`w2_4`, cycles
    /// per subcarrier).
    ///
    /// `alpha_t / alpha_f = (w2_4 / w1_4)^(1/4)` and `alpha_t * alpha_f = 1`,
    /// so one grid cell has unit regularized area and a regularized pilot
    /// density equals the fraction of grid cells carrying pilots.
    pub fn from_moments(w1_4: f64, w2_4: f64) -> Result<Self> {
        let ratio = eq1_scale_ratio(w1_4, w2_4)?;
        Self::new(ratio.sqrt(), 1.0 / ratio.sqrt())
    }

    pub fn to_regularized(&self, symbol: f64, subcarrier: f64) -> Vec2 {
        [symbol / self.alpha_t, subcarrier / self.alpha_f]
    }

    pub fn to_grid(&self, p: Vec2) -> [f64; 2] {
        [p[TIME] * self.alpha_t, p[FREQ] * self.alpha_f]
    }

    /// Regularized area of one grid cell.
    pub fn cell_area(&self) -> f64 {
        1.0 / (self.alpha_t * self.alpha_f)
    }
}

/// Pilot spacing ratio `d_t / d_f` that balances the fourth-order moment rule
/// `w1_4 * d_t^4 = w2_4 * d_f^4`.
pub fn eq1_scale_ratio(w1_4: f64, w2_4: f64) -> Result<f64> {
    if !(w1_4 > 0.0) || !(w2_4 > 0.0) {
        return Err(Error::invalid(format!(
            "fourth-order moments must be positive, got w1_4={w1_4}, w2_4={w2_4}"
        )));
    }
    Ok((w2_4 / w1_4).powf(0.25))
}

/// Axis filled by a line lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineAxis {
    /// Lines run along time (Comb: fixed subcarriers, every symbol).
    Time,
    /// Lines run along frequency (Block: fixed symbols, every subcarrier).
    Frequency,
}

/// Integer coordinates of a lattice point: `offset + i*e1 + j*e2 + motif[m]`.
///
/// For line lattices `i` is the grid index along the line and `j` the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeLabel {
    pub i: i64,
    pub j: i64,
    pub m: usize,
}

/// A (possibly decorated) 2-D lattice in regularized units.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis {
    pub kind: PatternKind,
    pub e1: Vec2,
    pub e2: Vec2,
    pub offset: Vec2,
    /// Points per primitive cell, relative to `offset`. `[[0, 0]]` for simple lattices.
    pub motif: Vec<Vec2>,
    /// `Some` for line lattices. `e1` is then the unit line direction and `e2`
    /// the line-to-line spacing vector.
    pub fill: Option<LineAxis>,
    /// Rigid rotation applied after construction, radians.
    pub rotation: f64,
}

fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

pub(crate) fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn rotate(a: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

/// Spacing of the sorted axis projections of a pattern's points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSpacing {
    /// Mean gap between distinct projections; `0.0` when the projection is
    /// continuous (line lattice along its own axis).
    pub spacing: f64,
    /// Gaps agree within 1% of their mean.
    pub uniform: bool,
}

impl LatticeBasis {
    pub fn is_line(&self) -> bool {
        self.fill.is_some()
    }

    pub fn determinant(&self) -> f64 {
        cross(self.e1, self.e2).abs()
    }

    /// Points per unit regularized area; for line lattices, lines per unit length.
    pub fn point_density(&self) -> f64 {
        if self.is_line() {
            1.0 / norm(self.e2)
        } else {
            self.motif.len() as f64 / self.determinant()
        }
    }

    pub fn check_nondegenerate(&self) -> Result<()> {
        let ok = if self.is_line() {
            norm(self.e2) > 0.0 && norm(self.e2).is_finite()
        } else {
            let det = self.determinant();
            det > 1e-12 * norm(self.e1).max(norm(self.e2)).powi(2) && det.is_finite()
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("degenerate {} lattice", self.kind)))
        }
    }

    /// The same lattice rigidly rotated about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        Self {
            kind: self.kind,
            e1: rotate(self.e1, angle),
            e2: rotate(self.e2, angle),
            offset: rotate(self.offset, angle),
            motif: self.motif.iter().map(|&m| rotate(m, angle)).collect(),
            fill: self.fill,
            rotation: self.rotation + angle,
        }
    }

    pub fn with_offset(mut self, offset: Vec2) -> Self {
        self.offset = offset;
        self
    }

    pub fn point(&self, label: LatticeLabel) -> Vec2 {
        add(
            add(self.offset, self.motif[label.m]),
            add(scale(self.e1, label.i as f64), scale(self.e2, label.j as f64)),
        )
    }

    /// Fractional lattice coordinates of `p` relative to a motif point.
    fn fractional(&self, p: Vec2, m: usize) -> [f64; 2] {
        let q = sub(sub(p, self.offset), self.motif[m]);
        let det = cross(self.e1, self.e2);
        [cross(q, self.e2) / det, cross(self.e1, q) / det]
    }

    /// Euclidean distance from `p` to the nearest point of the (infinite) pattern.
    pub fn nearest_distance(&self, p: Vec2) -> f64 {
        if self.is_line() {
            let spacing = norm(self.e2);
            let proj = (sub(p, self.offset)[0] * self.e2[0] + sub(p, self.offset)[1] * self.e2[1])
                / spacing;
            let r = proj.rem_euclid(spacing);
            return r.min(spacing - r);
        }
        let mut best = f64::INFINITY;
        for m in 0..self.motif.len() {
            let c = self.fractional(p, m);
            let (i0, j0) = (c[0].floor() as i64, c[1].floor() as i64);
            for i in i0 - 2..=i0 + 3 {
                for j in j0 - 2..=j0 + 3 {
                    let d = norm(sub(p, self.point(LatticeLabel { i, j, m })));
                    if d < best {
                        best = d;
                    }
                }
            }
        }
        best
    }

    /// Lattice points whose coordinates fall in `[lo, hi]` (inclusive), in
    /// deterministic `(i, j, m)` order. Not defined for line lattices.
    pub fn points_in_box(&self, lo: Vec2, hi: Vec2) -> Vec<(LatticeLabel, Vec2)> {
        assert!(!self.is_line(), "points_in_box on a line lattice");
        let corners = [lo, [lo[0], hi[1]], [hi[0], lo[1]], hi];
        let mut out = Vec::new();
        for m in 0..self.motif.len() {
            let mut imin = f64::INFINITY;
            let mut imax = f64::NEG_INFINITY;
            let mut jmin = f64::INFINITY;
            let mut jmax = f64::NEG_INFINITY;
            for &c in &corners {
                let f = self.fractional(c, m);
                imin = imin.min(f[0]);
                imax = imax.max(f[0]);
                jmin = jmin.min(f[1]);
                jmax = jmax.max(f[1]);
            }
            for i in (imin.floor() as i64 - 1)..=(imax.ceil() as i64 + 1) {
                for j in (jmin.floor() as i64 - 1)..=(jmax.ceil() as i64 + 1) {
                    let label = LatticeLabel { i, j, m };
                    let p = self.point(label);
                    if p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1] {
                        out.push((label, p));
                    }
                }
            }
        }
        out.sort_by_key(|(l, _)| *l);
        out
    }

    /// Spacing of the point projections onto `axis` (0 = time, 1 = frequency).
    pub fn projection_spacing(&self, axis: usize) -> ProjectionSpacing {
        if self.is_line() {
            let along = match self.fill {
                Some(LineAxis::Time) => TIME,
                _ => FREQ,
            };
            if self.rotation != 0.0 || axis == along {
                return ProjectionSpacing { spacing: 0.0, uniform: true };
            }
            return ProjectionSpacing { spacing: norm(self.e2), uniform: true };
        }
        const N: i64 = 24;
        let reach = norm(self.e1).min(norm(self.e2));
        let band = 0.25 * N as f64 * reach;
        let mut proj: Vec<f64> = Vec::new();
        for m in 0..self.motif.len() {
            for i in -N..=N {
                for j in -N..=N {
                    let p = self.point(LatticeLabel { i, j, m });
                    let v = p[axis] - self.offset[axis];
                    if v.abs() <= band {
                        proj.push(v);
                    }
                }
            }
        }
        proj.sort_by(f64::total_cmp);
        let tol = 1e-9 * reach;
        proj.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let gaps: Vec<f64> = proj.windows(2).map(|w| w[1] - w[0]).collect();
        if gaps.is_empty() {
            return ProjectionSpacing { spacing: 0.0, uniform: false };
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let (lo, hi) = gaps
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
        ProjectionSpacing { spacing: mean, uniform: (hi - lo) <= 0.01 * mean }
    }
}

/// Basis of the Cell lattice with equal sides `side`, apex angle
/// `theta = arccos(3/5)` and first vector rotated `phi = arctan(1/3)` from the
/// time axis. Both axis projections of the lattice are then uniformly spaced,
/// with spacing `side / sqrt(10)`.
pub fn cell_basis(side: f64) -> Result<LatticeBasis> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::invalid(format!("cell side must be positive, got {side}")));
    }
    let theta = cell_apex_angle();
    let phi = cell_rotation();
    Ok(LatticeBasis {
        kind: PatternKind::Cell,
        e1: [side * phi.cos(), side * phi.sin()],
        e2: [side * (theta + phi).cos(), side * (theta + phi).sin()],
        offset: [0.0, 0.0],
        motif: vec![[0.0, 0.0]],
        fill: None,
        rotation: 0.0,
    })
}

/// Build a continuous lattice of `kind` with `density` points per unit
/// regularized area.
///
/// Comb and Block are line lattices whose line spacing is `1 / density`.
pub fn lattice_basis(kind: PatternKind, density: f64) -> Result<LatticeBasis> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::invalid(format!("density must be positive, got {density}")));
    }
    let simple = |e1: Vec2, e2: Vec2| LatticeBasis {
        kind,
        e1,
        e2,
        offset: [0.0, 0.0],
        motif: vec![[0.0, 0.0]],
        fill: None,
        rotation: 0.0,
    };
    let sqrt3 = 3f64.sqrt();
    let basis = match kind {
        PatternKind::Cell => cell_basis(1.0 / (density * cell_apex_angle().sin()).sqrt())?,
        PatternKind::Rectangular => {
            let s = 1.0 / density.sqrt();
            simple([s, 0.0], [0.0, s])
        }
        PatternKind::Diamond => {
            // Centered rectangular with equilateral proportions: pilot symbols
            // every sqrt(3)/2 t, alternate symbols shifted by half the
            // in-symbol spacing t.
            let t = (2.0 / (sqrt3 * density)).sqrt();
            simple([0.5 * sqrt3 * t, 0.5 * t], [0.5 * sqrt3 * t, -0.5 * t])
        }
        PatternKind::Parallelogram => {
            // Diamond sheared so successive pilot symbols advance by a third
            // of the in-symbol spacing instead of a half.
            let t = (2.0 / (sqrt3 * density)).sqrt();
            simple([0.5 * sqrt3 * t, t / 3.0], [0.5 * sqrt3 * t, -2.0 * t / 3.0])
        }
        PatternKind::Hexagonal => {
            // Honeycomb with edge a: triangular lattice of spacing sqrt(3) a
            // decorated with a second point at distance a.
            let a = (4.0 / (3.0 * sqrt3 * density)).sqrt();
            LatticeBasis {
                motif: vec![[0.0, 0.0], [0.0, a]],
                ..simple([sqrt3 * a, 0.0], [0.5 * sqrt3 * a, 1.5 * a])
            }
        }
        PatternKind::Comb => LatticeBasis {
            fill: Some(LineAxis::Time),
            ..simple([1.0, 0.0], [0.0, 1.0 / density])
        },
        PatternKind::Block => LatticeBasis {
            fill: Some(LineAxis::Frequency),
            ..simple([0.0, 1.0], [1.0 / density, 0.0])
        },
    };
    basis.check_nondegenerate()?;
    Ok(basis)
}

/// Normal-ish OFDM frame description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmGridSpec {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    /// Subcarrier spacing, Hz.
    pub delta_f: f64,
    pub n_fft: usize,
    pub n_cp: usize,
    /// Sample duration, s.
    pub t_spl: f64,
    #[serde(default = "default_n_tx")]
    pub n_tx: usize,
}

fn default_n_tx() -> usize {
    1
}

impl OfdmGridSpec {
    /// 128 subcarriers, 125 kHz spacing, FFT 128, 16-sample prefix.
    pub fn standard(n_symbols: usize) -> Self {
        let n_fft = 128;
        let delta_f = 125e3;
        Self {
            n_subcarriers: 128,
            n_symbols,
            delta_f,
            n_fft,
            n_cp: 16,
            t_spl: 1.0 / (n_fft as f64 * delta_f),
            n_tx: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_symbols == 0 {
            return Err(Error::config("frame dimensions must be positive"));
        }
        if self.n_fft < self.n_subcarriers {
            return Err(Error::config(format!(
                "n_fft ({}) must be at least n_subcarriers ({})",
                self.n_fft, self.n_subcarriers
            )));
        }
        if self.n_tx == 0 {
            return Err(Error::config("n_tx must be at least 1"));
        }
        if !(self.t_spl > 0.0) || !(self.delta_f > 0.0) {
            return Err(Error::config("t_spl and delta_f must be positive"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_subcarriers * self.n_symbols
    }

    /// Row-major (symbol-major) cell index.
    pub fn index(&self, symbol: usize, subcarrier: usize) -> usize {
        symbol * self.n_subcarriers + subcarrier
    }

    /// Symbol duration including the cyclic prefix.
    pub fn symbol_duration(&self) -> f64 {
        (self.n_fft + self.n_cp) as f64 * self.t_spl
    }

    /// Useful symbol duration without the prefix.
    pub fn useful_duration(&self) -> f64 {
        self.n_fft as f64 * self.t_spl
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotCell {
    pub symbol: usize,
    pub subcarrier: usize,
    /// Every lattice point that snapped onto this cell, first one is canonical.
    pub labels: Vec<LatticeLabel>,
}

/// A pilot lattice plus, once rasterized, its pilot cells on a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    pub basis: LatticeBasis,
    pub scale: RegularizedScale,
    /// Fraction of grid cells meant to be pilots.
    pub target_density: f64,
    /// Sorted by `(symbol, subcarrier)`. Empty until rasterized.
    pub pilot_cells: Vec<PilotCell>,
    pub achieved_density: Option<f64>,
    /// `(n_symbols, n_subcarriers)` of the frame the pattern was rasterized on.
    pub frame_dims: Option<(usize, usize)>,
    /// Lattice points lost to snapping collisions.
    pub merged_points: usize,
}

/// `density` argument for [`make_pattern`] that yields a grid pilot fraction
/// of `fraction` under `scale`.
pub fn density_for_fraction(kind: PatternKind, fraction: f64, scale: RegularizedScale) -> f64 {
    match kind {
        PatternKind::Comb => fraction * scale.alpha_f,
        PatternKind::Block => fraction * scale.alpha_t,
        _ => fraction * scale.alpha_t * scale.alpha_f,
    }
}

fn fraction_for_density(kind: PatternKind, density: f64, scale: RegularizedScale) -> f64 {
    match kind {
        PatternKind::Comb => density / scale.alpha_f,
        PatternKind::Block => density / scale.alpha_t,
        _ => density * scale.cell_area(),
    }
}

/// Continuous pattern of `kind` at `density` pilots per unit regularized area.
pub fn make_pattern(kind: PatternKind, density: f64, scale: RegularizedScale) -> Result<PilotPattern> {
    let basis = lattice_basis(kind, density)?;
    Ok(PilotPattern::from_basis(basis, scale, fraction_for_density(kind, density, scale)))
}

/// Continuous pattern of `kind` whose rasterization covers `fraction` of the grid.
pub fn make_pattern_for_fraction(
    kind: PatternKind,
    fraction: f64,
    scale: RegularizedScale,
) -> Result<PilotPattern> {
    make_pattern(kind, density_for_fraction(kind, fraction, scale), scale)
}

/// Nearest integer, exact halves going to the smaller index.
fn snap(v: f64) -> i64 {
    (v - 0.5).ceil() as i64
}

impl PilotPattern {
    pub fn from_basis(basis: LatticeBasis, scale: RegularizedScale, target_density: f64) -> Self {
        Self {
            basis,
            scale,
            target_density,
            pilot_cells: Vec::new(),
            achieved_density: None,
            frame_dims: None,
            merged_points: 0,
        }
    }

    pub fn kind(&self) -> PatternKind {
        self.basis.kind
    }

    pub fn is_rasterized(&self) -> bool {
        self.frame_dims.is_some()
    }

    /// True when snapping merged two or more lattice points into one cell.
    pub fn has_collisions(&self) -> bool {
        self.merged_points > 0
    }

    pub fn density_error(&self) -> Option<f64> {
        self.achieved_density.map(|a| a - self.target_density)
    }

    /// Regularized coordinates of a grid cell.
    pub fn cell_position(&self, symbol: usize, subcarrier: usize) -> Vec2 {
        self.scale.to_regularized(symbol as f64, subcarrier as f64)
    }

    pub fn pilot_positions(&self) -> Vec<Vec2> {
        self.pilot_cells
            .iter()
            .map(|c| self.cell_position(c.symbol, c.subcarrier))
            .collect()
    }

    /// Projection spacings `(d_t, d_f)` in symbols and subcarriers.
    pub fn grid_spacings(&self) -> (f64, f64) {
        let t = self.basis.projection_spacing(TIME).spacing * self.scale.alpha_t;
        let f = self.basis.projection_spacing(FREQ).spacing * self.scale.alpha_f;
        match self.basis.fill {
            // A continuous line is sampled at every grid step.
            Some(LineAxis::Time) => (1.0, f),
            Some(LineAxis::Frequency) => (t, 1.0),
            None => (t, f),
        }
    }

    /// Plain-text export: a header line, then `symbol_index,subcarrier_index` per pilot.
    pub fn to_text(&self) -> String {
        let b = &self.basis;
        let mut out = format!(
            "# kind={} density={} e1=({},{}) e2=({},{}) offset=({},{}) rotation={} alpha_t={} alpha_f={}\n",
            b.kind,
            self.achieved_density.unwrap_or(self.target_density),
            b.e1[0],
            b.e1[1],
            b.e2[0],
            b.e2[1],
            b.offset[0],
            b.offset[1],
            b.rotation,
            self.scale.alpha_t,
            self.scale.alpha_f
        );
        for c in &self.pilot_cells {
            out.push_str(&format!("{},{}\n", c.symbol, c.subcarrier));
        }
        out
    }
}

/// Parse the cell list back out of [`PilotPattern::to_text`] output.
pub fn parse_pilot_text(text: &str) -> Result<Vec<(usize, usize)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (n, k) = l
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected 'symbol,subcarrier', got '{l}'")))?;
            let n = n.trim().parse().map_err(|e| Error::Parse(format!("{e}: '{l}'")))?;
            let k = k.trim().parse().map_err(|e| Error::Parse(format!("{e}: '{l}'")))?;
            Ok((n, k))
        })
        .collect()
}

/// Snap every lattice point inside the frame onto its nearest grid cell.
pub fn rasterize(pattern: &PilotPattern, frame: &OfdmGridSpec) -> Result<PilotPattern> {
    frame.validate()?;
    pattern.basis.check_nondegenerate()?;
    let (n_sym, n_sc) = (frame.n_symbols as i64, frame.n_subcarriers as i64);
    let sc = pattern.scale;
    let mut cells: BTreeMap<(usize, usize), Vec<LatticeLabel>> = BTreeMap::new();
    let mut inside = |n: i64, k: i64, label: LatticeLabel| {
        if (0..n_sym).contains(&n) && (0..n_sc).contains(&k) {
            cells.entry((n as usize, k as usize)).or_default().push(label);
        }
    };
    let basis = &pattern.basis;
    match basis.fill {
        Some(axis) => {
            if basis.rotation != 0.0 {
                return Err(Error::invalid("rotated line lattices cannot be rasterized"));
            }
            let spacing = norm(basis.e2);
            let (across, along_len, alpha) = match axis {
                LineAxis::Time => (FREQ, n_sym, sc.alpha_f),
                LineAxis::Frequency => (TIME, n_sc, sc.alpha_t),
            };
            let extent = match axis {
                LineAxis::Time => n_sc,
                LineAxis::Frequency => n_sym,
            } as f64;
            let lo = ((-0.5 / alpha - basis.offset[across]) / spacing).floor() as i64 - 1;
            let hi = (((extent - 0.5) / alpha - basis.offset[across]) / spacing).ceil() as i64 + 1;
            for j in lo..=hi {
                let pos = snap((basis.offset[across] + j as f64 * spacing) * alpha);
                for i in 0..along_len {
                    let label = LatticeLabel { i, j, m: 0 };
                    match axis {
                        LineAxis::Time => inside(i, pos, label),
                        LineAxis::Frequency => inside(pos, i, label),
                    }
                }
            }
        }
        None => {
            let lo = sc.to_regularized(-0.5, -0.5);
            let hi = sc.to_regularized(n_sym as f64 - 0.5, n_sc as f64 - 0.5);
            for (label, p) in basis.points_in_box(lo, hi) {
                let g = sc.to_grid(p);
                inside(snap(g[TIME]), snap(g[FREQ]), label);
            }
        }
    }
    let n_points: usize = cells.values().map(Vec::len).sum();
    let pilot_cells: Vec<PilotCell> = cells
        .into_iter()
        .map(|((symbol, subcarrier), labels)| PilotCell { symbol, subcarrier, labels })
        .collect();
    let achieved = pilot_cells.len() as f64 / frame.n_cells() as f64;
    if achieved > 0.5 {
        return Err(Error::config(format!(
            "pattern too dense: {:.1}% of cells would be pilots",
            100.0 * achieved
        )));
    }
    let merged_points = n_points - pilot_cells.len();
    if merged_points > 0 {
        log::warn!(
            "{} pattern: {merged_points} lattice points merged while snapping to the grid",
            basis.kind
        );
    }
    Ok(PilotPattern {
        basis: basis.clone(),
        scale: sc,
        target_density: pattern.target_density,
        pilot_cells,
        achieved_density: Some(achieved),
        frame_dims: Some((frame.n_symbols, frame.n_subcarriers)),
        merged_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub value: f64,
    pub limit: f64,
    /// `limit - value`; negative when violated.
    pub margin: f64,
    pub pass: bool,
}

impl ConstraintCheck {
    fn new(value: f64, limit: f64) -> Self {
        Self { value, limit, margin: limit - value, pass: value <= limit }
    }
}

/// Sampling constraints on pilot spacings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eq2Report {
    /// `f_max * T_sym * d_t <= 1/2`
    pub doppler: ConstraintCheck,
    /// `d_f * N_T * tau_max / T <= 1`
    pub delay: ConstraintCheck,
}

impl Eq2Report {
    pub fn pass(&self) -> bool {
        self.doppler.pass && self.delay.pass
    }
}

/// Check the time and frequency pilot spacings (in symbols and subcarriers)
/// against the Doppler and delay-spread sampling limits.
pub fn eq2_validate(
    channel: &ChannelSpec,
    frame: &OfdmGridSpec,
    d_t: f64,
    d_f: f64,
) -> Result<Eq2Report> {
    if !(d_t > 0.0) || !(d_f > 0.0) {
        return Err(Error::invalid(format!("spacings must be positive, got d_t={d_t}, d_f={d_f}")));
    }
    let doppler = channel.f_max_normalized * d_t;
    let delay = d_f * frame.n_tx as f64 * channel.tau_max() / frame.n_fft as f64;
    Ok(Eq2Report {
        doppler: ConstraintCheck::new(doppler, 0.5),
        delay: ConstraintCheck::new(delay, 1.0),
    })
}
