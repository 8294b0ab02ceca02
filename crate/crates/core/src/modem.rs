//! Constellations, OFDM frame assembly and coherent equalize/demap.
//!
//! Labeling (bits are written MSB first, normalized to unit average energy):
//!
//! | modulation | bits          | point                                   |
//! |------------|---------------|-----------------------------------------|
//! | QPSK       | `b1 b0`       | `((1-2 b1) + j (1-2 b0)) / sqrt(2)`     |
//! | 16QAM      | `b3 b2 b1 b0` | `(g(b3 b2) + j g(b1 b0)) / sqrt(10)`    |
//! | 8QAM       | `b2 b1 b0`    | `(g(b2 b1) + j (1-2 b0)) / sqrt(6)`     |
//!
//! with the per-axis Gray map `g: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3`.
//! 8QAM is the rectangular 4 x 2 grid; its labeling is Gray along each axis.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::CirEstimate;
use crate::grid::{OfdmGridSpec, PilotPattern};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Qpsk,
    Qam8,
    Qam16,
}

impl Modulation {
    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam8 => "8QAM",
            Modulation::Qam16 => "16QAM",
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam8 => 3,
            Modulation::Qam16 => 4,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "QPSK" | "4QAM" => Ok(Modulation::Qpsk),
            "8QAM" => Ok(Modulation::Qam8),
            "16QAM" => Ok(Modulation::Qam16),
            other => Err(Error::invalid(format!("unknown modulation '{other}'"))),
        }
    }
}

fn gray4(b_hi: usize, b_lo: usize) -> f64 {
    match (b_hi, b_lo) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

/// Point table indexed by the bit label read MSB first.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub modulation: Modulation,
    pub points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let m = 1usize << modulation.bits_per_symbol();
        let bit = |v: usize, i: usize| (v >> i) & 1;
        let points = (0..m)
            .map(|v| match modulation {
                Modulation::Qpsk => Complex64::new(1.0 - 2.0 * bit(v, 1) as f64, 1.0 - 2.0 * bit(v, 0) as f64)
                    / 2f64.sqrt(),
                Modulation::Qam16 => {
                    Complex64::new(gray4(bit(v, 3), bit(v, 2)), gray4(bit(v, 1), bit(v, 0))) / 10f64.sqrt()
                }
                Modulation::Qam8 => {
                    Complex64::new(gray4(bit(v, 2), bit(v, 1)), 1.0 - 2.0 * bit(v, 0) as f64) / 6f64.sqrt()
                }
            })
            .collect();
        Self { modulation, points }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Label of the nearest point.
    pub fn decide(&self, s: Complex64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (label, p) in self.points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best.0 {
                best = (d, label);
            }
        }
        best.1
    }
}

/// Map bits (each 0 or 1) to constellation points.
pub fn modulate(bits: &[u8], constellation: &Constellation) -> Result<Vec<Complex64>> {
    let m = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(m) {
        return Err(Error::invalid(format!(
            "{} bits is not a multiple of {m} for {}",
            bits.len(),
            constellation.modulation
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::invalid(format!("bit value {b} is not 0 or 1")));
    }
    Ok(bits
        .chunks(m)
        .map(|g| constellation.points[g.iter().fold(0usize, |acc, &b| acc << 1 | b as usize)])
        .collect())
}

fn push_label(out: &mut Vec<u8>, label: usize, m: usize) {
    out.extend((0..m).rev().map(|i| ((label >> i) & 1) as u8));
}

/// Hard nearest-point decisions.
pub fn demap(symbols: &[Complex64], constellation: &Constellation) -> Vec<u8> {
    let m = constellation.bits_per_symbol();
    let mut out = Vec::with_capacity(symbols.len() * m);
    for &s in symbols {
        push_label(&mut out, constellation.decide(s), m);
    }
    out
}

/// Unit-magnitude QPSK pilot values for `n` pilots.
pub fn pilot_sequence(n: usize, pilot_seed: u64) -> Vec<Complex64> {
    let q = Constellation::new(Modulation::Qpsk);
    let mut rng = seeded_rng(pilot_seed);
    (0..n).map(|_| q.points[rng.random_range(0..4)]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    /// Transmitted grid, `grid[symbol * n_subcarriers + subcarrier]`.
    pub grid: Vec<Complex64>,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    /// Row-major indices of the pilot cells, in pattern order.
    pub pilot_indices: Vec<usize>,
    pub pilot_values: Vec<Complex64>,
    /// Row-major indices of the data cells.
    pub data_indices: Vec<usize>,
    pub data_bits: Vec<u8>,
}

/// Number of data bits one frame carries.
pub fn data_bit_capacity(pattern: &PilotPattern, frame: &OfdmGridSpec, constellation: &Constellation) -> usize {
    (frame.n_cells() - pattern.pilot_cells.len()) * constellation.bits_per_symbol()
}

/// Place seeded pilots at the pattern cells and fill the remaining cells
/// row-major with the first bits of `bits`.
pub fn build_frame(
    bits: &[u8],
    pattern: &PilotPattern,
    frame: &OfdmGridSpec,
    constellation: &Constellation,
    pilot_seed: u64,
) -> Result<OfdmFrame> {
    frame.validate()?;
    if pattern.frame_dims != Some((frame.n_symbols, frame.n_subcarriers)) {
        return Err(Error::invalid("pattern was not rasterized on this frame"));
    }
    if pattern.pilot_cells.is_empty() {
        return Err(Error::config("pattern has no pilots"));
    }
    let need = data_bit_capacity(pattern, frame, constellation);
    if bits.len() < need {
        return Err(Error::invalid(format!("frame needs {need} data bits, got {}", bits.len())));
    }
    let pilot_indices: Vec<usize> =
        pattern.pilot_cells.iter().map(|c| frame.index(c.symbol, c.subcarrier)).collect();
    let pilot_values = pilot_sequence(pilot_indices.len(), pilot_seed);
    let mut is_pilot = vec![false; frame.n_cells()];
    for &i in &pilot_indices {
        is_pilot[i] = true;
    }
    let data_indices: Vec<usize> = (0..frame.n_cells()).filter(|&i| !is_pilot[i]).collect();
    let data_bits = bits[..need].to_vec();
    let symbols = modulate(&data_bits, constellation)?;
    let mut grid = vec![Complex64::new(0.0, 0.0); frame.n_cells()];
    for (&i, &v) in pilot_indices.iter().zip(&pilot_values) {
        grid[i] = v;
    }
    for (&i, &s) in data_indices.iter().zip(&symbols) {
        grid[i] = s;
    }
    Ok(OfdmFrame {
        grid,
        n_symbols: frame.n_symbols,
        n_subcarriers: frame.n_subcarriers,
        pilot_indices,
        pilot_values,
        data_indices,
        data_bits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemapResult {
    pub bits: Vec<u8>,
    /// Errors among decided (non-erased) bits.
    pub bit_errors: u64,
    /// Bits of cells with a zero channel estimate.
    pub erased_bits: u64,
    pub erased_cells: usize,
}

impl DemapResult {
    /// Errors with erased bits counted as half wrong.
    pub fn error_count(&self) -> f64 {
        self.bit_errors as f64 + 0.5 * self.erased_bits as f64
    }

    pub fn ber(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.error_count() / self.bits.len() as f64
        }
    }
}

/// Zero-forcing `Y / h_hat` on every data cell and hard decisions.
pub fn equalize_demap(
    received: &[Complex64],
    h_hat: &CirEstimate,
    frame: &OfdmFrame,
    constellation: &Constellation,
) -> Result<DemapResult> {
    let n = frame.grid.len();
    if received.len() != n || h_hat.h_hat.len() != n {
        return Err(Error::invalid("received grid, estimate and frame sizes differ"));
    }
    let m = constellation.bits_per_symbol();
    if frame.data_bits.len() != frame.data_indices.len() * m {
        return Err(Error::invalid("frame was built for a different modulation"));
    }
    let mut bits = Vec::with_capacity(frame.data_bits.len());
    let mut erased_cells = 0;
    for &i in &frame.data_indices {
        let h = h_hat.h_hat[i];
        if h.norm_sqr() == 0.0 || !h.is_finite() {
            erased_cells += 1;
            bits.extend(std::iter::repeat_n(0, m));
        } else {
            push_label(&mut bits, constellation.decide(received[i] / h), m);
        }
    }
    let mut bit_errors = 0u64;
    let mut erased_bits = 0u64;
    for (&i, (got, sent)) in frame.data_indices.iter().zip(bits.chunks(m).zip(frame.data_bits.chunks(m))) {
        let h = h_hat.h_hat[i];
        if h.norm_sqr() == 0.0 || !h.is_finite() {
            erased_bits += m as u64;
        } else {
            bit_errors += got.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
        }
    }
    Ok(DemapResult { bits, bit_errors, erased_bits, erased_cells })
}
