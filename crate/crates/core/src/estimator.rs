//! Pilot LS estimation and interpolation to data cells.
//!
//! Three interpolators are provided:
//!
//! - **distance**: inverse-distance weighting `k_i = d_i^-1 / sum_j d_j^-1`
//!   over the pilot owning the data cell (its absorption area) and that
//!   pilot's lattice neighbours; seven pilots for the Cell lattice.
//! - **linear-frequency**: linear interpolation between adjacent pilots of a
//!   pilot-bearing symbol, then linear in time for symbols without pilots.
//! - **bilinear**: the four corners of the surrounding pilot rectangle.
//!
//! All three are linear in the pilot estimates, so they are compiled once per
//! pattern into an [`InterpolationPlan`] of per-cell weights.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{cell_basis, norm, LatticeLabel, LineAxis, OfdmGridSpec, PilotPattern, Vec2};
use crate::metrics::{absorption_map, AbsorptionMap};
use crate::rng::seeded_rng;

/// Below this regularized distance a data point coincides with a pilot.
pub const COINCIDENCE_EPS: f64 = 1e-9;

/// Neighbours requested around the centre pilot (closed shells may add more).
pub const NEIGHBOURS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotObservation {
    pub position: (usize, usize),
    pub received: Complex64,
    pub transmitted: Complex64,
}

/// Least-squares channel estimate `Y / X` at a pilot.
pub fn ls_estimate(obs: &PilotObservation) -> Result<Complex64> {
    if obs.transmitted.norm_sqr() == 0.0 {
        return Err(Error::invalid(format!("pilot at {:?} has zero amplitude", obs.position)));
    }
    Ok(obs.received / obs.transmitted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Distance,
    LinearFrequency,
    Bilinear,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Distance, Method::LinearFrequency, Method::Bilinear];

    pub fn name(self) -> &'static str {
        match self {
            Method::Distance => "distance",
            Method::LinearFrequency => "linear-frequency",
            Method::Bilinear => "bilinear",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "distance" | "idw" => Ok(Method::Distance),
            "linear-frequency" | "linear" => Ok(Method::LinearFrequency),
            "bilinear" => Ok(Method::Bilinear),
            other => Err(Error::invalid(format!("unknown interpolation method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    PilotLs,
    Distance,
    Linear,
    Bilinear,
    Unfilled,
}

impl From<Method> for Provenance {
    fn from(m: Method) -> Self {
        match m {
            Method::Distance => Provenance::Distance,
            Method::LinearFrequency => Provenance::Linear,
            Method::Bilinear => Provenance::Bilinear,
        }
    }
}

/// Estimated channel over a frame, row-major like the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CirEstimate {
    pub h_hat: Vec<Complex64>,
    pub provenance: Vec<Provenance>,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
}

impl CirEstimate {
    /// Estimate holding only LS values at the pattern's pilots.
    pub fn from_pilots(pattern: &PilotPattern, ls: &[Complex64]) -> Result<Self> {
        let (n_sym, n_sc) = pattern
            .frame_dims
            .ok_or_else(|| Error::invalid("pattern is not rasterized"))?;
        if ls.len() != pattern.pilot_cells.len() {
            return Err(Error::invalid("one LS value per pilot cell required"));
        }
        let mut est = Self {
            h_hat: vec![Complex64::new(0.0, 0.0); n_sym * n_sc],
            provenance: vec![Provenance::Unfilled; n_sym * n_sc],
            n_symbols: n_sym,
            n_subcarriers: n_sc,
        };
        for (cell, &v) in pattern.pilot_cells.iter().zip(ls) {
            let idx = cell.symbol * n_sc + cell.subcarrier;
            est.h_hat[idx] = v;
            est.provenance[idx] = Provenance::PilotLs;
        }
        Ok(est)
    }

    pub fn at(&self, symbol: usize, subcarrier: usize) -> Complex64 {
        self.h_hat[symbol * self.n_subcarriers + subcarrier]
    }
}

/// Inverse-distance weights of a data point against a set of pilots.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceWeights {
    pub weights: Vec<f64>,
    pub distances: Vec<f64>,
}

impl DistanceWeights {
    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|k| k * k).sum()
    }
}

/// `k_i = d_i^-1 / sum_j d_j^-1`. A data point within [`COINCIDENCE_EPS`] of
/// a pilot gets the indicator weights of that pilot, the limit of the
/// formula as `d_i -> 0`.
pub fn distance_weights(data_point: Vec2, pilot_points: &[Vec2]) -> Result<DistanceWeights> {
    if pilot_points.is_empty() {
        return Err(Error::invalid("no pilot points"));
    }
    for (i, a) in pilot_points.iter().enumerate() {
        if pilot_points[..i].iter().any(|b| norm([a[0] - b[0], a[1] - b[1]]) < COINCIDENCE_EPS) {
            return Err(Error::invalid(format!("duplicate pilot point {a:?}")));
        }
    }
    let distances: Vec<f64> = pilot_points
        .iter()
        .map(|p| norm([p[0] - data_point[0], p[1] - data_point[1]]))
        .collect();
    let weights = match distances.iter().position(|&d| d < COINCIDENCE_EPS) {
        Some(hit) => (0..distances.len()).map(|i| if i == hit { 1.0 } else { 0.0 }).collect(),
        None => {
            let inv: Vec<f64> = distances.iter().map(|d| 1.0 / d).collect();
            let total: f64 = inv.iter().sum();
            inv.into_iter().map(|v| v / total).collect()
        }
    };
    Ok(DistanceWeights { weights, distances })
}

/// Interpolate scalar samples `values` at `data_point` with the distance filter.
pub fn distance_interpolate(data_point: Vec2, pilot_points: &[Vec2], values: &[Complex64]) -> Result<Complex64> {
    if values.len() != pilot_points.len() {
        return Err(Error::invalid("one value per pilot point required"));
    }
    let w = distance_weights(data_point, pilot_points)?;
    Ok(w.weights.iter().zip(values).map(|(&k, &v)| v * k).sum())
}

/// Pilots contributing to one data cell under the distance filter.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    /// Owning pilot of the data cell (absorption area).
    pub center: usize,
    /// Pilot indices, centre first, then neighbours by increasing lattice distance.
    pub members: Vec<usize>,
    /// Some neighbours fell outside the frame.
    pub edge: bool,
}

/// Lattice label to pilot index lookup plus neighbour offsets per motif point.
pub struct PilotIndex {
    by_label: HashMap<LatticeLabel, usize>,
    offsets: Vec<Vec<(i64, i64, usize)>>,
}

impl PilotIndex {
    pub fn new(pattern: &PilotPattern) -> Result<Self> {
        if !pattern.is_rasterized() {
            return Err(Error::invalid("pattern is not rasterized"));
        }
        let mut by_label = HashMap::new();
        for (idx, cell) in pattern.pilot_cells.iter().enumerate() {
            for &l in &cell.labels {
                by_label.insert(l, idx);
            }
        }
        let offsets = (0..pattern.basis.motif.len())
            .map(|m| neighbour_offsets(pattern, m))
            .collect();
        Ok(Self { by_label, offsets })
    }

    pub fn neighbour_count(&self, m: usize) -> usize {
        self.offsets[m].len()
    }

    fn select(&self, pattern: &PilotPattern, center: usize) -> PilotSet {
        let label = pattern.pilot_cells[center].labels[0];
        let mut members = vec![center];
        let mut missing = false;
        for &(di, dj, m) in &self.offsets[label.m] {
            let l = LatticeLabel { i: label.i + di, j: label.j + dj, m };
            match self.by_label.get(&l) {
                Some(&p) if !members.contains(&p) => members.push(p),
                Some(_) => {}
                None => missing = true,
            }
        }
        PilotSet { center, members, edge: missing }
    }
}

/// Label offsets of the nearest neighbours of motif point `m`, taking whole
/// distance shells until at least [`NEIGHBOURS`] are collected.
fn neighbour_offsets(pattern: &PilotPattern, m: usize) -> Vec<(i64, i64, usize)> {
    let b = &pattern.basis;
    // Discrete step along a line lattice is one grid cell.
    let e1 = match b.fill {
        Some(LineAxis::Time) => [1.0 / pattern.scale.alpha_t, 0.0],
        Some(LineAxis::Frequency) => [0.0, 1.0 / pattern.scale.alpha_f],
        None => b.e1,
    };
    let e2 = b.e2;
    let origin = b.motif[m];
    let mut cand: Vec<(f64, i64, i64, usize)> = Vec::new();
    const W: i64 = 6;
    for m2 in 0..b.motif.len() {
        for di in -W..=W {
            for dj in -W..=W {
                if di == 0 && dj == 0 && m2 == m {
                    continue;
                }
                let v = [
                    di as f64 * e1[0] + dj as f64 * e2[0] + b.motif[m2][0] - origin[0],
                    di as f64 * e1[1] + dj as f64 * e2[1] + b.motif[m2][1] - origin[1],
                ];
                cand.push((norm(v), di, dj, m2));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
    let shell_tol = 1e-6 * cand[0].0;
    let mut out = Vec::new();
    for (i, c) in cand.iter().enumerate() {
        if out.len() >= NEIGHBOURS && c.0 > cand[i - 1].0 + shell_tol {
            break;
        }
        out.push((c.1, c.2, c.3));
    }
    out
}

/// Pilot set for a data cell: its owning pilot plus that pilot's lattice
/// neighbours. Boundary cells already carry the later-time owner in
/// `absorption`. Near the frame edge the set shrinks and `edge` is set.
pub fn select_pilot_cell(
    data_cell: (usize, usize),
    pattern: &PilotPattern,
    absorption: &AbsorptionMap,
) -> Result<PilotSet> {
    let index = PilotIndex::new(pattern)?;
    let (n, k) = data_cell;
    if n >= absorption.n_symbols || k >= absorption.n_subcarriers {
        return Err(Error::invalid(format!("cell {data_cell:?} outside the frame")));
    }
    if pattern.pilot_cells.iter().any(|c| (c.symbol, c.subcarrier) == data_cell) {
        return Err(Error::invalid(format!("cell {data_cell:?} is a pilot")));
    }
    Ok(index.select(pattern, absorption.owner(n, k)))
}

/// Per-cell linear combination of pilot estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPlan {
    pub method: Method,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    pub n_pilots: usize,
    /// `(pilot index, weight)` terms for every cell, row-major.
    pub terms: Vec<Vec<(usize, f64)>>,
    pub provenance: Vec<Provenance>,
    /// Data cells whose distance-filter set was truncated at the frame edge.
    pub edge_cells: usize,
}

impl InterpolationPlan {
    pub fn build(pattern: &PilotPattern, frame: &OfdmGridSpec, method: Method) -> Result<Self> {
        if pattern.frame_dims != Some((frame.n_symbols, frame.n_subcarriers)) {
            return Err(Error::invalid("pattern was not rasterized on this frame"));
        }
        if pattern.pilot_cells.is_empty() {
            return Err(Error::config("pattern has no pilots"));
        }
        let n_cells = frame.n_cells();
        let mut terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_cells];
        let mut provenance = vec![Provenance::from(method); n_cells];
        for (i, c) in pattern.pilot_cells.iter().enumerate() {
            let idx = frame.index(c.symbol, c.subcarrier);
            terms[idx] = vec![(i, 1.0)];
            provenance[idx] = Provenance::PilotLs;
        }
        let mut edge_cells = 0;
        match method {
            Method::Distance => {
                let absorption = absorption_map(pattern, frame)?;
                let index = PilotIndex::new(pattern)?;
                let positions = pattern.pilot_positions();
                for idx in 0..n_cells {
                    if provenance[idx] == Provenance::PilotLs {
                        continue;
                    }
                    let set = index.select(pattern, absorption.owner[idx]);
                    edge_cells += set.edge as usize;
                    let pts: Vec<Vec2> = set.members.iter().map(|&p| positions[p]).collect();
                    let q = pattern.cell_position(idx / frame.n_subcarriers, idx % frame.n_subcarriers);
                    let w = distance_weights(q, &pts)?;
                    terms[idx] = set.members.iter().copied().zip(w.weights).collect();
                }
            }
            Method::LinearFrequency => linear_frequency_terms(pattern, frame, &mut terms, &provenance)?,
            Method::Bilinear => bilinear_terms(pattern, frame, &mut terms, &provenance)?,
        }
        Ok(Self {
            method,
            n_symbols: frame.n_symbols,
            n_subcarriers: frame.n_subcarriers,
            n_pilots: pattern.pilot_cells.len(),
            terms,
            provenance,
            edge_cells,
        })
    }

    /// Apply the plan to LS estimates given in pilot order.
    pub fn apply(&self, pilot_values: &[Complex64]) -> CirEstimate {
        assert_eq!(pilot_values.len(), self.n_pilots, "one value per pilot");
        let h_hat = self
            .terms
            .iter()
            .map(|t| t.iter().map(|&(p, w)| pilot_values[p] * w).sum())
            .collect();
        CirEstimate {
            h_hat,
            provenance: self.provenance.clone(),
            n_symbols: self.n_symbols,
            n_subcarriers: self.n_subcarriers,
        }
    }
}

/// Bracketing neighbours of `x` in sorted `knots` with the weight of the upper
/// one; values outside the knot range clamp to the nearest end.
fn bracket(knots: &[usize], x: usize) -> (usize, usize, f64) {
    match knots.binary_search(&x) {
        Ok(i) => (i, i, 0.0),
        Err(0) => (0, 0, 0.0),
        Err(i) if i == knots.len() => (i - 1, i - 1, 0.0),
        Err(i) => {
            let (lo, hi) = (knots[i - 1], knots[i]);
            (i - 1, i, (x - lo) as f64 / (hi - lo) as f64)
        }
    }
}

fn push_term(terms: &mut Vec<(usize, f64)>, p: usize, w: f64) {
    if w == 0.0 {
        return;
    }
    match terms.iter_mut().find(|t| t.0 == p) {
        Some(t) => t.1 += w,
        None => terms.push((p, w)),
    }
}

fn linear_frequency_terms(
    pattern: &PilotPattern,
    frame: &OfdmGridSpec,
    terms: &mut [Vec<(usize, f64)>],
    provenance: &[Provenance],
) -> Result<()> {
    let mut rows: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, c) in pattern.pilot_cells.iter().enumerate() {
        rows.entry(c.symbol).or_default().push((c.subcarrier, i));
    }
    if let Some((n, _)) = rows.iter().find(|(_, r)| r.len() < 2) {
        return Err(Error::config(format!(
            "linear-frequency needs at least two pilots on every pilot symbol; symbol {n} of the {} pattern has one",
            pattern.kind()
        )));
    }
    // Frequency interpolation on each pilot-bearing symbol.
    let mut row_terms: BTreeMap<usize, Vec<Vec<(usize, f64)>>> = BTreeMap::new();
    for (&n, row) in &rows {
        let knots: Vec<usize> = row.iter().map(|r| r.0).collect();
        let per_k = (0..frame.n_subcarriers)
            .map(|k| {
                let (a, b, t) = bracket(&knots, k);
                let mut v = Vec::with_capacity(2);
                push_term(&mut v, row[a].1, 1.0 - t);
                push_term(&mut v, row[b].1, t);
                v
            })
            .collect();
        row_terms.insert(n, per_k);
    }
    let symbols: Vec<usize> = rows.keys().copied().collect();
    for n in 0..frame.n_symbols {
        let (a, b, u) = bracket(&symbols, n);
        let (before, after) = (&row_terms[&symbols[a]], &row_terms[&symbols[b]]);
        for (k, (ta, tb)) in before.iter().zip(after).enumerate() {
            let idx = frame.index(n, k);
            if provenance[idx] == Provenance::PilotLs {
                continue;
            }
            let mut v = Vec::new();
            for &(p, w) in ta {
                push_term(&mut v, p, w * (1.0 - u));
            }
            for &(p, w) in tb {
                push_term(&mut v, p, w * u);
            }
            terms[idx] = v;
        }
    }
    Ok(())
}

fn bilinear_terms(
    pattern: &PilotPattern,
    frame: &OfdmGridSpec,
    terms: &mut [Vec<(usize, f64)>],
    provenance: &[Provenance],
) -> Result<()> {
    let mut symbols: Vec<usize> = pattern.pilot_cells.iter().map(|c| c.symbol).collect();
    let mut subcarriers: Vec<usize> = pattern.pilot_cells.iter().map(|c| c.subcarrier).collect();
    symbols.sort_unstable();
    symbols.dedup();
    subcarriers.sort_unstable();
    subcarriers.dedup();
    let at: HashMap<(usize, usize), usize> = pattern
        .pilot_cells
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.symbol, c.subcarrier), i))
        .collect();
    if symbols.len() * subcarriers.len() != at.len() {
        return Err(Error::config(format!(
            "bilinear needs a rectangular pilot grid; the {} pattern is not one",
            pattern.kind()
        )));
    }
    for n in 0..frame.n_symbols {
        let (ta, tb, u) = bracket(&symbols, n);
        for k in 0..frame.n_subcarriers {
            let idx = frame.index(n, k);
            if provenance[idx] == Provenance::PilotLs {
                continue;
            }
            let (fa, fb, v) = bracket(&subcarriers, k);
            let mut t = Vec::with_capacity(4);
            for (ti, wu) in [(ta, 1.0 - u), (tb, u)] {
                for (fi, wv) in [(fa, 1.0 - v), (fb, v)] {
                    push_term(&mut t, at[&(symbols[ti], subcarriers[fi])], wu * wv);
                }
            }
            terms[idx] = t;
        }
    }
    Ok(())
}

/// Fill every data cell of `estimates_at_pilots` with `method`.
pub fn interpolate(
    estimates_at_pilots: &CirEstimate,
    pattern: &PilotPattern,
    frame: &OfdmGridSpec,
    method: Method,
) -> Result<CirEstimate> {
    let mut ls = Vec::with_capacity(pattern.pilot_cells.len());
    for c in &pattern.pilot_cells {
        let idx = frame.index(c.symbol, c.subcarrier);
        if estimates_at_pilots.provenance.get(idx) != Some(&Provenance::PilotLs) {
            return Err(Error::invalid(format!(
                "pilot ({}, {}) carries no LS estimate",
                c.symbol, c.subcarrier
            )));
        }
        ls.push(estimates_at_pilots.h_hat[idx]);
    }
    Ok(InterpolationPlan::build(pattern, frame, method)?.apply(&ls))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotMsePrediction {
    /// `sigma_n2 * factor`.
    pub mse: f64,
    /// Sample mean of `sum_i k_i^2`.
    pub factor: f64,
    /// `10 log10(1 / factor)`.
    pub db_reduction: f64,
    /// `sum_i (mean k_i)^2`, when every sample has the same pilot ordering.
    pub squared_mean_weight_factor: Option<f64>,
    pub samples: usize,
}

/// Interpolated-value MSE caused by i.i.d. pilot estimation errors of
/// variance `sigma_n2`, averaged over the given weight samples.
pub fn predicted_pilot_mse<I>(weights_field: I, sigma_n2: f64) -> Result<PilotMsePrediction>
where
    I: IntoIterator<Item = DistanceWeights>,
{
    let mut samples = 0usize;
    let mut sum_sq = 0.0;
    let mut mean_w: Option<Vec<f64>> = None;
    let mut aligned = true;
    for w in weights_field {
        samples += 1;
        sum_sq += w.sum_of_squares();
        match &mut mean_w {
            None => mean_w = Some(w.weights.clone()),
            Some(acc) if acc.len() == w.weights.len() => {
                acc.iter_mut().zip(&w.weights).for_each(|(a, k)| *a += k)
            }
            Some(_) => aligned = false,
        }
    }
    if samples == 0 {
        return Err(Error::invalid("no weight samples"));
    }
    let factor = sum_sq / samples as f64;
    let squared_mean_weight_factor = mean_w
        .filter(|_| aligned)
        .map(|acc| acc.iter().map(|a| (a / samples as f64).powi(2)).sum());
    Ok(PilotMsePrediction {
        mse: sigma_n2 * factor,
        factor,
        db_reduction: 10.0 * (1.0 / factor).log10(),
        squared_mean_weight_factor,
        samples,
    })
}

/// Centre and six neighbours of a Cell lattice with side `side`, centre first.
pub fn cell_seven(side: f64) -> Result<[Vec2; 7]> {
    let b = cell_basis(side)?;
    let (e1, e2) = (b.e1, b.e2);
    Ok([
        [0.0, 0.0],
        e1,
        e2,
        [e2[0] - e1[0], e2[1] - e1[1]],
        [-e1[0], -e1[1]],
        [-e2[0], -e2[1]],
        [e1[0] - e2[0], e1[1] - e2[1]],
    ])
}

fn inside_convex(poly: &[Vec2], p: Vec2) -> bool {
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}

/// Distance-filter weights at `n` points drawn uniformly from the hexagon
/// spanned by the six neighbours of a unit-side Cell.
pub fn sample_cell_weights(n: usize, seed: u64) -> Result<impl Iterator<Item = DistanceWeights>> {
    let seven = cell_seven(1.0)?;
    let mut hexagon: Vec<Vec2> = seven[1..].to_vec();
    hexagon.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    let (lo, hi) = hexagon.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), v| {
        ([lo[0].min(v[0]), lo[1].min(v[1])], [hi[0].max(v[0]), hi[1].max(v[1])])
    });
    let mut rng = seeded_rng(seed);
    Ok((0..n).map(move |_| loop {
        let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        if inside_convex(&hexagon, p) {
            break distance_weights(p, &seven).expect("distinct Cell points");
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_pattern, make_pattern_for_fraction, rasterize, PatternKind, RegularizedScale};
    use proptest::prelude::{prop, prop_assert, prop_assume, proptest, Strategy};
    use rand_distr::StandardNormal;

    #[test]
    fn ls_examples() {
        let h = Complex64::new(0.3, -1.2);
        let x = Complex64::new(0.0, 1.0);
        let obs = PilotObservation { position: (0, 0), received: h * x, transmitted: x };
        assert!((ls_estimate(&obs).unwrap() - h).norm() < 1e-15);
        let zero = PilotObservation { transmitted: Complex64::new(0.0, 0.0), ..obs };
        assert!(ls_estimate(&zero).is_err());
    }

    #[test]
    fn ls_error_variance_matches_noise() {
        let mut rng = seeded_rng(4);
        let sigma2 = 0.25;
        let x = Complex64::from_polar(1.0, 0.7);
        let h = Complex64::new(0.5, 0.5);
        let trials = 100_000;
        let mse: f64 = (0..trials)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let z = Complex64::new(re, im) * (sigma2 / 2.0f64).sqrt();
                let obs = PilotObservation { position: (0, 0), received: h * x + z, transmitted: x };
                (ls_estimate(&obs).unwrap() - h).norm_sqr()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mse - sigma2).abs() / sigma2 < 0.03, "{mse}");
    }

    #[test]
    fn weight_examples() {
        let pilots = [[0.0, 0.0], [1.0, 0.0], [0.0, 3.0]];
        let w = distance_weights([1.0, 0.0], &pilots).unwrap();
        assert_eq!(w.weights, vec![0.0, 1.0, 0.0]);
        let ring: Vec<Vec2> = (0..7)
            .map(|i| {
                let a = i as f64 * 2.0 * std::f64::consts::PI / 7.0;
                [2.0 * a.cos(), 2.0 * a.sin()]
            })
            .collect();
        let w = distance_weights([0.0, 0.0], &ring).unwrap();
        assert!(w.weights.iter().all(|k| (k - 1.0 / 7.0).abs() < 1e-15));
        let w = distance_weights([0.0, 0.0], &[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        assert!((w.weights[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.weights[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(distance_weights([0.0, 0.0], &[[1.0, 1.0], [1.0, 1.0]]).is_err());
        assert!(distance_weights([0.0, 0.0], &[]).is_err());
    }

    #[test]
    fn weights_decrease_with_distance() {
        let mut pilots = vec![[1.0, 0.0], [0.0, 2.0], [-3.0, 0.0]];
        let before = distance_weights([0.0, 0.0], &pilots).unwrap();
        pilots[0] = [1.5, 0.0];
        let after = distance_weights([0.0, 0.0], &pilots).unwrap();
        assert!(after.weights[0] < before.weights[0]);
    }

    // Dyadic coordinates, so translating them is exact like on the cell grid.
    fn point() -> impl Strategy<Value = Vec2> {
        (-640..640i32, -640..640i32).prop_map(|(a, b)| [a as f64 / 64.0, b as f64 / 64.0])
    }

    proptest! {
        #[test]
        fn weights_are_normalized_and_invariant(
            q in point(),
            pilots in prop::collection::vec(point(), 1..9),
            shift in point(),
            c in 0.01..100.0f64,
        ) {
            prop_assume!(distance_weights(q, &pilots).is_ok());
            let w = distance_weights(q, &pilots).unwrap();
            prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.weights.iter().all(|&k| k >= 0.0));
            let moved: Vec<Vec2> = pilots.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
            let ws = distance_weights([q[0] + shift[0], q[1] + shift[1]], &moved).unwrap();
            let scaled: Vec<Vec2> = pilots.iter().map(|p| [p[0] * c, p[1] * c]).collect();
            let wc = distance_weights([q[0] * c, q[1] * c], &scaled);
            for i in 0..pilots.len() {
                prop_assert!((ws.weights[i] - w.weights[i]).abs() < 1e-12);
                if let Ok(wc) = &wc {
                    prop_assert!((wc.weights[i] - w.weights[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cell_factor_by_monte_carlo() {
        // Oracle values frozen from an independent numpy sweep over 10^6
        // uniform points in the hexagon: mean sum k^2 = 0.2224, sum (mean k)^2 = 0.1495.
        let pred = predicted_pilot_mse(sample_cell_weights(200_000, 9).unwrap(), 2.0).unwrap();
        assert!((pred.factor - 0.2224).abs() < 0.003, "{}", pred.factor);
        assert!((pred.mse - 2.0 * pred.factor).abs() < 1e-15);
        assert!((pred.squared_mean_weight_factor.unwrap() - 0.1495).abs() < 0.003);
    }

    #[test]
    fn factor_limits() {
        let seven = cell_seven(1.0).unwrap();
        let at_center = (0..10).map(|_| distance_weights([0.0, 0.0], &seven).unwrap());
        let p = predicted_pilot_mse(at_center, 1.0).unwrap();
        assert_eq!(p.factor, 1.0);
        assert_eq!(p.db_reduction, 0.0);
        let ring: Vec<Vec2> = (0..7)
            .map(|i| {
                let a = i as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let p = predicted_pilot_mse((0..5).map(|_| distance_weights([0.0, 0.0], &ring).unwrap()), 1.0).unwrap();
        assert!((p.factor - 1.0 / 7.0).abs() < 1e-15);
        assert!(predicted_pilot_mse(std::iter::empty(), 1.0).is_err());
    }

    fn cell_setup() -> (PilotPattern, OfdmGridSpec, AbsorptionMap) {
        let frame = OfdmGridSpec::standard(48);
        let p = make_pattern_for_fraction(PatternKind::Cell, 0.057, RegularizedScale::unit()).unwrap();
        let r = rasterize(&p, &frame).unwrap();
        let map = absorption_map(&r, &frame).unwrap();
        (r, frame, map)
    }

    #[test]
    fn interior_cells_use_seven_pilots_centred_on_owner() {
        let (r, frame, map) = cell_setup();
        let index = PilotIndex::new(&r).unwrap();
        assert_eq!(index.neighbour_count(0), 6);
        let center = r
            .pilot_cells
            .iter()
            .position(|c| (20..28).contains(&c.symbol) && (60..68).contains(&c.subcarrier))
            .unwrap();
        let c = &r.pilot_cells[center];
        let data = (c.symbol + 1, c.subcarrier);
        assert_eq!(map.owner(data.0, data.1), center);
        let set = select_pilot_cell(data, &r, &map).unwrap();
        assert_eq!(set.center, center);
        assert_eq!(set.members.len(), 7);
        assert!(!set.edge);
        assert!(select_pilot_cell((c.symbol, c.subcarrier), &r, &map).is_err());
        let _ = frame;
    }

    #[test]
    fn corner_cells_get_truncated_sets() {
        let (r, _frame, map) = cell_setup();
        let corner = (47, 127);
        let set = select_pilot_cell(corner, &r, &map).unwrap();
        assert!(set.members.len() < 7);
        assert!(set.edge);
    }

    #[test]
    fn boundary_cell_prefers_later_pilot() {
        let frame = OfdmGridSpec { n_subcarriers: 16, n_fft: 16, ..OfdmGridSpec::standard(16) };
        let p = make_pattern(PatternKind::Rectangular, 1.0 / 16.0, RegularizedScale::unit()).unwrap();
        let r = rasterize(&p, &frame).unwrap();
        let map = absorption_map(&r, &frame).unwrap();
        let set = select_pilot_cell((6, 4), &r, &map).unwrap();
        let c = &r.pilot_cells[set.center];
        assert_eq!((c.symbol, c.subcarrier), (8, 4));
    }

    fn all_methods_pattern(kind: PatternKind) -> (PilotPattern, OfdmGridSpec) {
        let frame = OfdmGridSpec::standard(32);
        let scale = RegularizedScale::new(0.657, 1.0 / 0.657).unwrap();
        let r = rasterize(&make_pattern_for_fraction(kind, 0.057, scale).unwrap(), &frame).unwrap();
        (r, frame)
    }

    #[test]
    fn constants_are_reproduced_by_every_method() {
        let h0 = Complex64::new(0.4, -0.9);
        for kind in [PatternKind::Cell, PatternKind::Rectangular, PatternKind::Comb, PatternKind::Parallelogram] {
            let (r, frame) = all_methods_pattern(kind);
            let ls = vec![h0; r.pilot_cells.len()];
            let est = CirEstimate::from_pilots(&r, &ls).unwrap();
            for method in Method::ALL {
                match interpolate(&est, &r, &frame, method) {
                    Ok(out) => {
                        assert!(out.h_hat.iter().all(|v| (v - h0).norm() < 1e-12), "{kind} {method}");
                        assert!(out.provenance.iter().all(|&p| p != Provenance::Unfilled));
                    }
                    Err(e) => assert!(matches!(e, Error::Config(_)), "{kind} {method}: {e}"),
                }
            }
        }
    }

    #[test]
    fn method_compatibility() {
        let (cell, frame) = all_methods_pattern(PatternKind::Cell);
        assert!(InterpolationPlan::build(&cell, &frame, Method::Bilinear).is_err());
        let mut lonely = cell.clone();
        let first = lonely.pilot_cells[0].clone();
        lonely.pilot_cells.retain(|c| c.symbol != first.symbol || c.subcarrier == first.subcarrier);
        assert!(InterpolationPlan::build(&lonely, &frame, Method::LinearFrequency).is_err());
        let (rect, frame) = all_methods_pattern(PatternKind::Rectangular);
        for m in Method::ALL {
            InterpolationPlan::build(&rect, &frame, m).unwrap();
        }
        let (comb, frame) = all_methods_pattern(PatternKind::Comb);
        InterpolationPlan::build(&comb, &frame, Method::LinearFrequency).unwrap();
    }

    #[test]
    fn linear_frequency_matches_two_point_rule() {
        // Comb with pilots every 4 subcarriers: t = 1 gives H(k) + (H(k+1) - H(k)) / 4.
        let frame = OfdmGridSpec { n_subcarriers: 16, n_fft: 16, ..OfdmGridSpec::standard(3) };
        let p = make_pattern_for_fraction(PatternKind::Comb, 0.25, RegularizedScale::unit()).unwrap();
        let r = rasterize(&p, &frame).unwrap();
        let ls: Vec<Complex64> = r
            .pilot_cells
            .iter()
            .map(|c| Complex64::new(c.subcarrier as f64 * 0.3 + c.symbol as f64, (c.subcarrier as f64).sin()))
            .collect();
        let est = interpolate(&CirEstimate::from_pilots(&r, &ls).unwrap(), &r, &frame, Method::LinearFrequency)
            .unwrap();
        for n in 0..3 {
            let (a, b) = (est.at(n, 4), est.at(n, 8));
            let expected = a + (b - a) / 4.0;
            assert!((est.at(n, 5) - expected).norm() < 1e-12);
            assert_eq!(est.provenance[frame.index(n, 5)], Provenance::Linear);
        }
    }

    #[test]
    fn bilinear_is_exact_on_affine_fields() {
        let (rect, frame) = all_methods_pattern(PatternKind::Rectangular);
        let field = |n: usize, k: usize| Complex64::new(0.2 * n as f64 - 0.05 * k as f64 + 1.0, 0.01 * k as f64);
        let ls: Vec<Complex64> = rect.pilot_cells.iter().map(|c| field(c.symbol, c.subcarrier)).collect();
        let est = interpolate(&CirEstimate::from_pilots(&rect, &ls).unwrap(), &rect, &frame, Method::Bilinear)
            .unwrap();
        let (t_lo, t_hi) = rect.pilot_cells.iter().fold((usize::MAX, 0), |(lo, hi), c| (lo.min(c.symbol), hi.max(c.symbol)));
        let (f_lo, f_hi) = rect
            .pilot_cells
            .iter()
            .fold((usize::MAX, 0), |(lo, hi), c| (lo.min(c.subcarrier), hi.max(c.subcarrier)));
        for n in t_lo..=t_hi {
            for k in f_lo..=f_hi {
                assert!((est.at(n, k) - field(n, k)).norm() < 1e-12, "({n},{k})");
            }
        }
    }

    #[test]
    fn distance_output_in_convex_hull_of_contributors() {
        let (r, frame) = all_methods_pattern(PatternKind::Cell);
        let ls: Vec<Complex64> = (0..r.pilot_cells.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let plan = InterpolationPlan::build(&r, &frame, Method::Distance).unwrap();
        let est = plan.apply(&ls);
        for (idx, t) in plan.terms.iter().enumerate() {
            let (lo_re, hi_re) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(p, _)| (a.min(ls[p].re), b.max(ls[p].re)));
            let (lo_im, hi_im) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(p, _)| (a.min(ls[p].im), b.max(ls[p].im)));
            let v = est.h_hat[idx];
            assert!(v.re >= lo_re - 1e-12 && v.re <= hi_re + 1e-12);
            assert!(v.im >= lo_im - 1e-12 && v.im <= hi_im + 1e-12);
            assert!((t.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(t.len() <= 7);
        }
        assert!(plan.edge_cells > 0);
    }

    #[test]
    fn interpolate_requires_ls_at_pilots() {
        let (r, frame) = all_methods_pattern(PatternKind::Cell);
        let mut est = CirEstimate::from_pilots(&r, &vec![Complex64::new(1.0, 0.0); r.pilot_cells.len()]).unwrap();
        let c = &r.pilot_cells[0];
        est.provenance[frame.index(c.symbol, c.subcarrier)] = Provenance::Unfilled;
        assert!(interpolate(&est, &r, &frame, Method::Distance).is_err());
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("spline".parse::<Method>().is_err());
    }
}
