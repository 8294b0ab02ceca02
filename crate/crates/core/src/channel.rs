//! Ground-truth time-frequency channels and additive noise.
//!
//! Each tap is an independent complex Gaussian process. Time variation uses
//! a sum of sinusoids with Gaussian-weighted amplitudes and uniformly
//! distributed arrival angles, which gives Rayleigh statistics and the
//! classical `J0(2 pi nu lag)` autocorrelation in the ensemble.

use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OfdmGridSpec, RegularizedScale};
use crate::rng::seeded_rng;

/// Oscillators per tap for the sum-of-sinusoids generator.
pub const OSCILLATORS_PER_TAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DopplerShape {
    /// Block fading: each tap is constant over the frame.
    None,
    /// Classical (Jakes/Clarke) U-shaped spectrum.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    /// Delay in samples.
    pub delay: f64,
    /// Linear average power.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Maximum Doppler times symbol duration.
    pub f_max_normalized: f64,
    pub taps: Vec<Tap>,
    pub doppler_shape: DopplerShape,
    /// Bypass fading entirely: `h = 1` on every cell.
    #[serde(default)]
    pub awgn_only: bool,
}

/// Normalized fourth-order moment `sum(w x^4) / sum(w)` of a profile given as
/// `(coordinate, weight)` pairs.
pub fn fourth_moment(profile: &[(f64, f64)]) -> Result<f64> {
    if profile.iter().any(|&(_, w)| w < 0.0 || !w.is_finite()) {
        return Err(Error::invalid("profile weights must be nonnegative"));
    }
    let total: f64 = profile.iter().map(|&(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("profile weights are all zero"));
    }
    Ok(profile.iter().map(|&(x, w)| w * x.powi(4)).sum::<f64>() / total)
}

impl ChannelSpec {
    /// Flat, static, unit channel. Only noise is applied.
    pub fn awgn() -> Self {
        Self {
            f_max_normalized: 0.0,
            taps: vec![Tap { delay: 0.0, power: 1.0 }],
            doppler_shape: DopplerShape::None,
            awgn_only: true,
        }
    }

    /// Exponential power delay profile on integer delays `0..n_taps`, tap `l`
    /// with power proportional to `decay^l`.
    pub fn exponential(f_max_normalized: f64, decay: f64, n_taps: usize) -> Result<Self> {
        if n_taps == 0 || !(0.0..1.0).contains(&decay) {
            return Err(Error::invalid(format!(
                "exponential profile needs n_taps >= 1 and 0 <= decay < 1, got {n_taps}, {decay}"
            )));
        }
        let raw: Vec<f64> = (0..n_taps).map(|l| decay.powi(l as i32)).collect();
        let total: f64 = raw.iter().sum();
        Ok(Self {
            f_max_normalized,
            taps: raw
                .iter()
                .enumerate()
                .map(|(l, &p)| Tap { delay: l as f64, power: p / total })
                .collect(),
            doppler_shape: DopplerShape::Classical,
            awgn_only: false,
        })
    }

    /// Exponential profile whose expected across-band frequency-response
    /// variance on `frame` equals `variance`.
    pub fn from_freq_response_variance(
        variance: f64,
        n_taps: usize,
        f_max_normalized: f64,
        frame: &OfdmGridSpec,
    ) -> Result<Self> {
        let at = |decay: f64| -> Result<f64> {
            Ok(Self::exponential(f_max_normalized, decay, n_taps)?.band_variance(frame))
        };
        let (mut lo, mut hi) = (0.0, 1.0 - 1e-9);
        let reachable = at(hi)?;
        if !(variance > 0.0 && variance < reachable) {
            return Err(Error::invalid(format!(
                "frequency-response variance {variance} not reachable with {n_taps} taps (max {reachable:.4})"
            )));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if at(mid)? < variance {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::exponential(f_max_normalized, 0.5 * (lo + hi), n_taps)
    }

    pub fn tau_max(&self) -> f64 {
        self.taps.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.power).sum()
    }

    /// Expected variance of `H[n, k]` around its across-band mean, averaged
    /// over the frame's subcarriers.
    pub fn band_variance(&self, frame: &OfdmGridSpec) -> f64 {
        let n = frame.n_subcarriers as f64;
        let mean_power: f64 = self
            .taps
            .iter()
            .map(|t| {
                let s: Complex64 = (0..frame.n_subcarriers)
                    .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * t.delay / frame.n_fft as f64))
                    .sum();
                t.power * (s / n).norm_sqr()
            })
            .sum();
        self.total_power() - mean_power
    }

    /// Fourth-order moment of the Doppler spectrum in cycles per symbol.
    pub fn doppler_fourth_moment(&self) -> f64 {
        match self.doppler_shape {
            DopplerShape::None => 0.0,
            // E[cos^4] over uniform arrival angles is 3/8.
            DopplerShape::Classical => 0.375 * self.f_max_normalized.powi(4),
        }
    }

    /// Fourth-order moment of the power delay profile in cycles per subcarrier.
    pub fn delay_fourth_moment(&self, n_fft: usize) -> Result<f64> {
        let profile: Vec<(f64, f64)> =
            self.taps.iter().map(|t| (t.delay / n_fft as f64, t.power)).collect();
        fourth_moment(&profile)
    }

    /// Regularization derived from the channel's fourth-order moments.
    pub fn regularized_scale(&self, frame: &OfdmGridSpec) -> Result<RegularizedScale> {
        RegularizedScale::from_moments(self.doppler_fourth_moment(), self.delay_fourth_moment(frame.n_fft)?)
    }

    pub fn validate(&self, frame: &OfdmGridSpec) -> Result<()> {
        if self.awgn_only {
            return Ok(());
        }
        if self.taps.is_empty() {
            return Err(Error::config("channel needs at least one tap"));
        }
        if !(self.f_max_normalized >= 0.0) || !self.f_max_normalized.is_finite() {
            return Err(Error::config("f_max_normalized must be finite and nonnegative"));
        }
        if self.taps.iter().any(|t| !(t.power >= 0.0) || !(t.delay >= 0.0)) {
            return Err(Error::config("tap powers and delays must be nonnegative"));
        }
        if (self.total_power() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("tap powers sum to {}, expected 1", self.total_power())));
        }
        if self.tau_max() >= frame.n_cp as f64 {
            return Err(Error::config(format!(
                "maximum delay {} samples must be below the cyclic prefix ({})",
                self.tau_max(),
                frame.n_cp
            )));
        }
        Ok(())
    }
}

/// Channel response over one frame, `h[symbol * n_subcarriers + subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<Complex64>,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    pub spec: ChannelSpec,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn at(&self, symbol: usize, subcarrier: usize) -> Complex64 {
        self.h[symbol * self.n_subcarriers + subcarrier]
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Per-symbol complex gain of one tap with average power `power`.
fn tap_process<R: Rng>(rng: &mut R, power: f64, spec: &ChannelSpec, n_symbols: usize) -> Vec<Complex64> {
    if spec.doppler_shape == DopplerShape::None || spec.f_max_normalized == 0.0 {
        return vec![complex_gaussian(rng, power); n_symbols];
    }
    let m = OSCILLATORS_PER_TAP;
    let oscillators: Vec<(Complex64, f64)> = (0..m)
        .map(|_| {
            let amp = complex_gaussian(rng, 1.0);
            let angle = rng.random::<f64>() * 2.0 * PI;
            (amp, 2.0 * PI * spec.f_max_normalized * angle.cos())
        })
        .collect();
    let norm = (power / m as f64).sqrt();
    (0..n_symbols)
        .map(|n| {
            let t = n as f64;
            oscillators
                .iter()
                .map(|&(amp, w)| amp * Complex64::from_polar(1.0, w * t))
                .sum::<Complex64>()
                * norm
        })
        .collect()
}

/// Draw one channel realization; identical arguments give identical output.
pub fn synthesize_channel(spec: &ChannelSpec, frame: &OfdmGridSpec, seed: u64) -> Result<ChannelRealization> {
    frame.validate()?;
    spec.validate(frame)?;
    let (n_sym, n_sc) = (frame.n_symbols, frame.n_subcarriers);
    let h = if spec.awgn_only {
        vec![Complex64::new(1.0, 0.0); n_sym * n_sc]
    } else {
        let mut rng = seeded_rng(seed);
        let processes: Vec<Vec<Complex64>> =
            spec.taps.iter().map(|t| tap_process(&mut rng, t.power, spec, n_sym)).collect();
        let phasors: Vec<Vec<Complex64>> = spec
            .taps
            .iter()
            .map(|t| {
                (0..n_sc)
                    .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * t.delay / frame.n_fft as f64))
                    .collect()
            })
            .collect();
        let mut h = vec![Complex64::new(0.0, 0.0); n_sym * n_sc];
        for n in 0..n_sym {
            for k in 0..n_sc {
                h[n * n_sc + k] = processes
                    .iter()
                    .zip(&phasors)
                    .map(|(proc_l, ph_l)| proc_l[n] * ph_l[k])
                    .sum();
            }
        }
        h
    };
    Ok(ChannelRealization { h, n_symbols: n_sym, n_subcarriers: n_sc, spec: spec.clone(), seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyGrid {
    pub values: Vec<Complex64>,
    /// Per-cell complex noise variance actually applied.
    pub noise_variance: f64,
}

/// Noise variance for `snr_db` at average symbol energy `es`.
pub fn noise_variance(snr_db: f64, es: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        es / 10f64.powf(snr_db / 10.0)
    }
}

/// Add circular complex Gaussian noise with variance `es / 10^(snr_db/10)`.
/// `snr_db = +inf` disables noise and returns the input unchanged.
pub fn apply_awgn(symbols: &[Complex64], snr_db: f64, es: f64, seed: u64) -> Result<NoisyGrid> {
    if !(es > 0.0) {
        return Err(Error::invalid(format!("symbol energy must be positive, got {es}")));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("snr is NaN"));
    }
    let var = noise_variance(snr_db, es);
    if var == 0.0 {
        return Ok(NoisyGrid { values: symbols.to_vec(), noise_variance: 0.0 });
    }
    let mut rng = seeded_rng(seed);
    let values = symbols.iter().map(|&s| s + complex_gaussian(&mut rng, var)).collect();
    Ok(NoisyGrid { values, noise_variance: var })
}

/// Text grid: `n_symbols n_subcarriers seed` then one `re im` line per cell, row-major.
pub fn write_grid_text<W: Write>(
    mut w: W,
    values: &[Complex64],
    n_symbols: usize,
    n_subcarriers: usize,
    seed: u64,
) -> Result<()> {
    if values.len() != n_symbols * n_subcarriers {
        return Err(Error::invalid("grid size does not match dimensions"));
    }
    writeln!(w, "{n_symbols} {n_subcarriers} {seed}")?;
    for v in values {
        writeln!(w, "{} {}", v.re, v.im)?;
    }
    Ok(())
}

/// Grid read back by [`read_grid_text`] / [`read_grid_binary`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    pub seed: u64,
    pub values: Vec<Complex64>,
}

pub fn read_grid_text<R: BufRead>(r: R) -> Result<GridDump> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse(format!("bad grid header '{header}'")));
    }
    let p = |s: &str| s.parse::<u64>().map_err(|e| Error::Parse(format!("{e}: '{s}'")));
    let (n_symbols, n_subcarriers, seed) = (p(fields[0])? as usize, p(fields[1])? as usize, p(fields[2])?);
    let mut values = Vec::with_capacity(n_symbols * n_subcarriers);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (re, im) = line
            .split_once(' ')
            .ok_or_else(|| Error::Parse(format!("expected 're im', got '{line}'")))?;
        let f = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{e}: '{s}'")));
        values.push(Complex64::new(f(re)?, f(im)?));
    }
    if values.len() != n_symbols * n_subcarriers {
        return Err(Error::Parse(format!(
            "grid has {} values, header says {}",
            values.len(),
            n_symbols * n_subcarriers
        )));
    }
    Ok(GridDump { n_symbols, n_subcarriers, seed, values })
}

/// Binary grid: three little-endian `u64` header words then `f64` re/im pairs.
pub fn write_grid_binary<W: Write>(
    mut w: W,
    values: &[Complex64],
    n_symbols: usize,
    n_subcarriers: usize,
    seed: u64,
) -> Result<()> {
    if values.len() != n_symbols * n_subcarriers {
        return Err(Error::invalid("grid size does not match dimensions"));
    }
    for word in [n_symbols as u64, n_subcarriers as u64, seed] {
        w.write_all(&word.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_binary<R: Read>(mut r: R) -> Result<GridDump> {
    let mut word = [0u8; 8];
    let mut header = [0u64; 3];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let n = (header[0] * header[1]) as usize;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut word)?;
        let re = f64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        values.push(Complex64::new(re, f64::from_le_bytes(word)));
    }
    Ok(GridDump { n_symbols: header[0] as usize, n_subcarriers: header[1] as usize, seed: header[2], values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(n_symbols: usize) -> OfdmGridSpec {
        OfdmGridSpec::standard(n_symbols)
    }

    #[test]
    fn fourth_moment_examples() {
        assert_eq!(fourth_moment(&[(0.0, 3.0)]).unwrap(), 0.0);
        assert_eq!(fourth_moment(&[(2.0, 0.5)]).unwrap(), 16.0);
        assert_eq!(fourth_moment(&[(-1.0, 1.0), (1.0, 1.0)]).unwrap(), 1.0);
        assert!(fourth_moment(&[(1.0, 0.0), (2.0, 0.0)]).is_err());
        assert!(fourth_moment(&[(1.0, -1.0)]).is_err());
    }

    #[test]
    fn static_single_tap_is_constant() {
        let spec = ChannelSpec {
            f_max_normalized: 0.02,
            taps: vec![Tap { delay: 0.0, power: 1.0 }],
            doppler_shape: DopplerShape::None,
            awgn_only: false,
        };
        let r = synthesize_channel(&spec, &frame(16), 3).unwrap();
        assert!(r.h.iter().all(|&v| v == r.h[0]));
        assert!(r.h[0].norm() > 0.0);
    }

    #[test]
    fn two_tap_magnitude_matches_closed_form() {
        // |h0 + h1 e^{-j 2 pi k d / N}| with both gains read from symbol 0.
        let d = 4.0;
        let spec = ChannelSpec {
            f_max_normalized: 0.0,
            taps: vec![Tap { delay: 0.0, power: 0.5 }, Tap { delay: d, power: 0.5 }],
            doppler_shape: DopplerShape::None,
            awgn_only: false,
        };
        let f = frame(2);
        let r = synthesize_channel(&spec, &f, 11).unwrap();
        // Recover the two gains from subcarriers 0 and n_fft/(2d).
        let h0 = r.at(0, 0);
        let hq = r.at(0, 16);
        let g0 = 0.5 * (h0 + hq);
        let g1 = 0.5 * (h0 - hq);
        let period = (f.n_fft as f64 / d) as usize;
        for k in 0..f.n_subcarriers {
            let closed = (g0 + g1 * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * d / 128.0)).norm();
            assert!((r.at(0, k).norm() - closed).abs() < 1e-12);
            if k + period < f.n_subcarriers {
                assert!((r.at(0, k).norm() - r.at(0, k + period).norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn realizations_are_reproducible() {
        let spec = ChannelSpec::exponential(0.02455, 0.3, 6).unwrap();
        let a = synthesize_channel(&spec, &frame(32), 99).unwrap();
        let b = synthesize_channel(&spec, &frame(32), 99).unwrap();
        let c = synthesize_channel(&spec, &frame(32), 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.h, c.h);
    }

    #[test]
    fn delay_beyond_prefix_is_rejected() {
        let spec = ChannelSpec {
            f_max_normalized: 0.0,
            taps: vec![Tap { delay: 16.0, power: 1.0 }],
            doppler_shape: DopplerShape::None,
            awgn_only: false,
        };
        assert!(matches!(synthesize_channel(&spec, &frame(4), 0), Err(Error::Config(_))));
        let unnormalized = ChannelSpec {
            taps: vec![Tap { delay: 0.0, power: 0.7 }],
            ..spec
        };
        assert!(synthesize_channel(&unnormalized, &frame(4), 0).is_err());
    }

    #[test]
    fn unit_average_power() {
        let spec = ChannelSpec::exponential(0.02455, 0.4, 8).unwrap();
        let f = frame(4);
        let n = 12_000u64;
        let mean: f64 = (0..n)
            .map(|s| {
                let r = synthesize_channel(&spec, &f, s).unwrap();
                r.h.iter().map(|v| v.norm_sqr()).sum::<f64>() / r.h.len() as f64
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    /// Bessel J0 by its power series, adequate for |x| < 10.
    fn bessel_j0(x: f64) -> f64 {
        let q = -(x * x) / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..60 {
            term *= q / (m * m) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn j0_series_oracle() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(2.404_825_557_695_773) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn classical_doppler_autocorrelation() {
        let nu = 0.1;
        let spec = ChannelSpec {
            f_max_normalized: nu,
            taps: vec![Tap { delay: 0.0, power: 1.0 }],
            doppler_shape: DopplerShape::Classical,
            awgn_only: false,
        };
        let f = OfdmGridSpec { n_subcarriers: 1, n_fft: 1, n_cp: 1, ..frame(5) };
        let seeds = 20_000u64;
        let mut acc = [Complex64::new(0.0, 0.0); 5];
        for s in 0..seeds {
            let r = synthesize_channel(&spec, &f, s).unwrap();
            for (lag, a) in acc.iter_mut().enumerate() {
                *a += r.h[0] * r.h[lag].conj();
            }
        }
        let r0 = acc[0].re / seeds as f64;
        for (lag, a) in acc.iter().enumerate().skip(1) {
            let rho = a.re / seeds as f64 / r0;
            let expected = bessel_j0(2.0 * PI * nu * lag as f64);
            if lag == 1 {
                assert!((rho - expected).abs() / expected < 0.05, "lag 1: {rho} vs {expected}");
            }
            assert!((rho - expected).abs() < 0.03, "lag {lag}: {rho} vs {expected}");
        }
    }

    #[test]
    fn frequency_correlation_follows_delay_profile() {
        let spec = ChannelSpec::exponential(0.0, 0.5, 4).unwrap();
        let f = frame(1);
        let seeds = 20_000u64;
        let lags = [1usize, 3, 8];
        let mut acc = vec![Complex64::new(0.0, 0.0); lags.len()];
        for s in 0..seeds {
            let r = synthesize_channel(&spec, &f, s).unwrap();
            for (a, &d) in acc.iter_mut().zip(&lags) {
                *a += r.at(0, 10) * r.at(0, 10 + d).conj();
            }
        }
        for (a, &d) in acc.iter().zip(&lags) {
            let expected: Complex64 = spec
                .taps
                .iter()
                .map(|t| Complex64::from_polar(t.power, 2.0 * PI * d as f64 * t.delay / 128.0))
                .sum();
            let got = a / seeds as f64;
            assert!((got - expected).norm() < 0.03, "lag {d}: {got} vs {expected}");
        }
    }

    #[test]
    fn awgn_only_is_unity() {
        let r = synthesize_channel(&ChannelSpec::awgn(), &frame(3), 5).unwrap();
        assert!(r.h.iter().all(|&v| v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn freq_response_variance_solver() {
        let f = frame(8);
        for v in [0.177, 0.32, 0.357] {
            let spec = ChannelSpec::from_freq_response_variance(v, 8, 0.02455, &f).unwrap();
            assert!((spec.band_variance(&f) - v).abs() < 1e-9);
            assert!((spec.total_power() - 1.0).abs() < 1e-12);
            spec.validate(&f).unwrap();
        }
        assert!(ChannelSpec::from_freq_response_variance(0.95, 8, 0.0, &f).is_err());
    }

    #[test]
    fn moments_and_scale() {
        let spec = ChannelSpec::exponential(0.02455, 0.2, 4).unwrap();
        assert!((spec.doppler_fourth_moment() - 0.375 * 0.02455f64.powi(4)).abs() < 1e-20);
        let f = frame(8);
        let scale = spec.regularized_scale(&f).unwrap();
        let ratio = (spec.delay_fourth_moment(128).unwrap() / spec.doppler_fourth_moment()).powf(0.25);
        assert!((scale.alpha_t / scale.alpha_f - ratio).abs() < 1e-12);
        let static_spec = ChannelSpec { doppler_shape: DopplerShape::None, ..spec };
        assert!(static_spec.regularized_scale(&f).is_err());
    }

    #[test]
    fn infinite_snr_is_noiseless() {
        let x: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let y = apply_awgn(&x, f64::INFINITY, 1.0, 1).unwrap();
        assert_eq!(y.values, x);
        assert_eq!(y.noise_variance, 0.0);
        assert!(apply_awgn(&x, 10.0, 0.0, 1).is_err());
    }

    #[test]
    fn awgn_sample_variance() {
        let zeros = vec![Complex64::new(0.0, 0.0); 1_000_000];
        for (snr, expected) in [(0.0, 1.0), (10.0, 0.1)] {
            let y = apply_awgn(&zeros, snr, 1.0, 17).unwrap();
            let var = y.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / zeros.len() as f64;
            assert!((var - expected).abs() / expected < 0.01, "{snr}: {var}");
            assert!((y.noise_variance - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_files_round_trip() {
        let spec = ChannelSpec::exponential(0.01, 0.3, 3).unwrap();
        let r = synthesize_channel(&spec, &frame(3), 8).unwrap();
        let mut text = Vec::new();
        write_grid_text(&mut text, &r.h, 3, 128, 8).unwrap();
        let back = read_grid_text(&text[..]).unwrap();
        assert_eq!((back.n_symbols, back.n_subcarriers, back.seed), (3, 128, 8));
        assert_eq!(back.values, r.h);
        let mut bin = Vec::new();
        write_grid_binary(&mut bin, &r.h, 3, 128, 8).unwrap();
        assert_eq!(bin.len(), 24 + 16 * 3 * 128);
        assert_eq!(read_grid_binary(&bin[..]).unwrap(), back);
    }
}
