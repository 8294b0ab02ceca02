//! Experiment configuration files.

use std::path::{Path, PathBuf};

use log::warn;
use serde::Deserialize;

use crate::channel::{ChannelSpec, DopplerShape, Tap};
use crate::error::{Error, Result};
use crate::estimator::Method;
use crate::grid::{eq2_validate, make_pattern_for_fraction, rasterize, OfdmGridSpec, PatternKind, PilotPattern, RegularizedScale};
use crate::modem::Modulation;

/// Shipped default reproducing the published simulation conditions.
pub const DEFAULT_TOML: &str = include_str!("../../configs/default.toml");

pub const SNR_RANGE_DB: (f64, f64) = (-10.0, 60.0);

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    frame: RawFrame,
    channel: RawChannel,
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    n_subcarriers: usize,
    n_symbols: usize,
    delta_f: f64,
    n_fft: usize,
    n_cp: usize,
    t_spl: Option<f64>,
    #[serde(default = "one")]
    n_tx: usize,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ChannelModel {
    Rayleigh,
    Awgn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    model: ChannelModel,
    #[serde(default)]
    f_max_normalized: f64,
    #[serde(default = "classical")]
    doppler: DopplerShape,
    freq_response_variance: Option<f64>,
    n_taps: Option<usize>,
    taps: Option<Vec<Tap>>,
}

fn classical() -> DopplerShape {
    DopplerShape::Classical
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    patterns: Vec<String>,
    methods: Vec<String>,
    modulation: String,
    pilot_density: f64,
    snr_db: Vec<f64>,
    seeds: usize,
    #[serde(default)]
    base_seed: u64,
    #[serde(default)]
    pilot_seed: u64,
    #[serde(default = "yes")]
    regularize: bool,
    output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub frame: OfdmGridSpec,
    pub channel: ChannelSpec,
    pub patterns: Vec<PatternKind>,
    pub methods: Vec<Method>,
    pub modulation: Modulation,
    /// Fraction of grid cells carrying pilots.
    pub pilot_density: f64,
    pub snr_db: Vec<f64>,
    pub seeds: usize,
    pub base_seed: u64,
    pub pilot_seed: u64,
    /// Shape patterns in the plane regularized by the channel's moments.
    pub regularize: bool,
    pub output: PathBuf,
    /// Sampling-constraint violations found while loading.
    pub warnings: Vec<String>,
}

fn cfg_err(origin: &str, e: impl std::fmt::Display) -> Error {
    Error::config(format!("{origin}: {}", e.to_string().trim()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| cfg_err(origin, e))?;
        let f = raw.frame;
        let frame = OfdmGridSpec {
            n_subcarriers: f.n_subcarriers,
            n_symbols: f.n_symbols,
            delta_f: f.delta_f,
            n_fft: f.n_fft,
            n_cp: f.n_cp,
            t_spl: f.t_spl.unwrap_or(1.0 / (f.n_fft as f64 * f.delta_f)),
            n_tx: f.n_tx,
        };
        frame.validate().map_err(|e| cfg_err(origin, e))?;

        let c = raw.channel;
        let mut channel = match c.model {
            ChannelModel::Awgn => ChannelSpec::awgn(),
            ChannelModel::Rayleigh => match (c.taps, c.freq_response_variance) {
                (Some(taps), None) => ChannelSpec {
                    f_max_normalized: c.f_max_normalized,
                    taps,
                    doppler_shape: c.doppler,
                    awgn_only: false,
                },
                (None, Some(var)) => {
                    let n_taps = c.n_taps.ok_or_else(|| cfg_err(origin, "channel: missing field `n_taps`"))?;
                    ChannelSpec::from_freq_response_variance(var, n_taps, c.f_max_normalized, &frame)
                        .map_err(|e| cfg_err(origin, e))?
                }
                _ => {
                    return Err(cfg_err(
                        origin,
                        "channel: give exactly one of `taps` or `freq_response_variance`",
                    ))
                }
            },
        };
        channel.doppler_shape = if channel.awgn_only { DopplerShape::None } else { c.doppler };
        channel.validate(&frame).map_err(|e| cfg_err(origin, e))?;

        let e = raw.experiment;
        let patterns = e
            .patterns
            .iter()
            .map(|p| p.parse())
            .collect::<Result<Vec<PatternKind>>>()
            .map_err(|err| cfg_err(origin, err))?;
        let methods = e
            .methods
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<Method>>>()
            .map_err(|err| cfg_err(origin, err))?;
        let modulation = e.modulation.parse().map_err(|err| cfg_err(origin, err))?;
        let cfg = Self {
            frame,
            channel,
            patterns,
            methods,
            modulation,
            pilot_density: e.pilot_density,
            snr_db: e.snr_db,
            seeds: e.seeds,
            base_seed: e.base_seed,
            pilot_seed: e.pilot_seed,
            regularize: e.regularize,
            output: e.output,
            warnings: Vec::new(),
        };
        cfg.validated().map_err(|err| cfg_err(origin, err))
    }

    /// Check invariants and attach sampling-constraint warnings.
    pub fn validated(mut self) -> Result<Self> {
        if self.seeds == 0 {
            return Err(Error::config("seeds must be at least 1"));
        }
        if self.patterns.is_empty() || self.methods.is_empty() {
            return Err(Error::config("at least one pattern and one method are required"));
        }
        if !(self.pilot_density > 0.0 && self.pilot_density <= 0.5) {
            return Err(Error::config(format!("pilot_density {} outside (0, 0.5]", self.pilot_density)));
        }
        for &s in &self.snr_db {
            if s != f64::INFINITY && !(SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&s) {
                return Err(Error::config(format!(
                    "snr {s} dB outside [{}, {}] (inf is allowed)",
                    SNR_RANGE_DB.0, SNR_RANGE_DB.1
                )));
            }
        }
        let mut sorted = self.snr_db.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.snr_db.len() {
            return Err(Error::config("snr_db has duplicate entries"));
        }
        let mut p = self.patterns.clone();
        p.sort();
        p.dedup();
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        if p.len() != self.patterns.len() || m.len() != self.methods.len() {
            return Err(Error::config("patterns and methods must not repeat"));
        }
        self.warnings.clear();
        for &kind in &self.patterns {
            let pattern = self.pattern(kind)?;
            let (d_t, d_f) = pattern.grid_spacings();
            let report = eq2_validate(&self.channel, &self.frame, d_t, d_f)?;
            if !report.doppler.pass {
                self.warnings.push(format!(
                    "{kind}: time spacing {d_t:.2} symbols undersamples the Doppler spread ({:.3} > {})",
                    report.doppler.value, report.doppler.limit
                ));
            }
            if !report.delay.pass {
                self.warnings.push(format!(
                    "{kind}: frequency spacing {d_f:.2} subcarriers undersamples the delay spread ({:.3} > {})",
                    report.delay.value, report.delay.limit
                ));
            }
        }
        for w in &self.warnings {
            warn!("{w}");
        }
        Ok(self)
    }

    pub fn scale(&self) -> RegularizedScale {
        if !self.regularize || self.channel.awgn_only {
            return RegularizedScale::unit();
        }
        self.channel.regularized_scale(&self.frame).unwrap_or_else(|e| {
            warn!("channel moments give no regularization ({e}); using unit scale");
            RegularizedScale::unit()
        })
    }

    /// Pattern of `kind` rasterized on this config's frame.
    pub fn pattern(&self, kind: PatternKind) -> Result<PilotPattern> {
        rasterize(&make_pattern_for_fraction(kind, self.pilot_density, self.scale())?, &self.frame)
    }

    /// The shipped default configuration.
    pub fn shipped_default() -> Self {
        Self::from_toml(DEFAULT_TOML, "default.toml").expect("shipped config is valid")
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text, &path.display().to_string())
}
