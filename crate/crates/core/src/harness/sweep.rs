//! Monte-Carlo BER / MSE sweeps.
//!
//! One job per seed. A job draws the channel, bits and frame once per
//! pattern, then evaluates every method and SNR on them, so all
//! (pattern, method, snr) points see common random numbers. Noise for a cell
//! is keyed by `(seed, snr)` only, which keeps points independent of what
//! else is in the sweep. Jobs run in parallel and are reduced in seed order,
//! so results do not depend on the worker count.

use log::info;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{apply_awgn, synthesize_channel};
use crate::error::{Error, Result};
use crate::estimator::{CirEstimate, InterpolationPlan, Method, Provenance};
use crate::grid::{PatternKind, PilotPattern};
use crate::modem::{build_frame, equalize_demap, Constellation, OfdmFrame};
use crate::rng::{derive_seed, seeded_rng, stream};

use super::config::ExperimentConfig;

/// Errors below which a BER point is flagged low-confidence.
pub const MIN_ERRORS: f64 = 100.0;

/// 95% two-sided normal quantile.
const Z95: f64 = 1.96;

/// Normal-approximation 95% half-width of a binomial rate.
pub fn ci_halfwidth(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub pattern: PatternKind,
    pub method: Method,
    pub snr_db: f64,
    pub ber_total: f64,
    pub ber_floor: f64,
    pub ber_noise: f64,
    pub mse: f64,
    pub ci_halfwidth: f64,
    pub seeds: usize,
    pub bits: u64,
    /// Erased bits count as half an error, so this may end in .5.
    pub bit_errors: f64,
    pub ber_perfect_csi: f64,
}

impl ResultRow {
    pub fn low_confidence(&self) -> bool {
        self.bit_errors < MIN_ERRORS
    }
}

/// Noise-free BER of one pattern/method pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorResult {
    pub ber: f64,
    pub bits: u64,
    pub bit_errors: f64,
    pub ci_halfwidth: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPair {
    pub pattern: PatternKind,
    pub method: Method,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    /// Sorted by pattern, method and SNR in config order.
    pub rows: Vec<ResultRow>,
    pub skipped: Vec<SkippedPair>,
}

impl ExperimentResult {
    pub fn row(&self, pattern: PatternKind, method: Method, snr_db: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.pattern == pattern && r.method == method && r.snr_db == snr_db)
    }

    pub fn series(&self, pattern: PatternKind, method: Method) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.pattern == pattern && r.method == method).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    errors: f64,
    bits: u64,
    sq_err: f64,
    cells: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.errors += o.errors;
        self.bits += o.bits;
        self.sq_err += o.sq_err;
        self.cells += o.cells;
    }

    fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors / self.bits as f64
        }
    }
}

/// Everything that is fixed across seeds for one pattern.
struct PatternSetup {
    kind: PatternKind,
    pattern: PilotPattern,
    plans: Vec<(usize, InterpolationPlan)>,
}

/// Per-seed tallies: `[pair][snr]`, `[pair]` floors and `[pattern][snr]` perfect CSI.
struct SeedTally {
    points: Vec<Vec<Tally>>,
    floors: Vec<Tally>,
    perfect: Vec<Vec<Tally>>,
}

fn setups(cfg: &ExperimentConfig, skipped: &mut Vec<SkippedPair>) -> Result<Vec<PatternSetup>> {
    let mut out = Vec::new();
    for &kind in &cfg.patterns {
        let pattern = cfg.pattern(kind)?;
        let mut plans = Vec::new();
        for (mi, &method) in cfg.methods.iter().enumerate() {
            match InterpolationPlan::build(&pattern, &cfg.frame, method) {
                Ok(plan) => plans.push((mi, plan)),
                Err(Error::Config(reason)) => {
                    info!("skipping {kind}/{method}: {reason}");
                    skipped.push(SkippedPair { pattern: kind, method, reason });
                }
                Err(e) => return Err(e),
            }
        }
        out.push(PatternSetup { kind, pattern, plans });
    }
    Ok(out)
}

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn evaluate(
    rx: &[Complex64],
    frame: &OfdmFrame,
    est: &CirEstimate,
    h: &[Complex64],
    constellation: &Constellation,
) -> Result<Tally> {
    let r = equalize_demap(rx, est, frame, constellation)?;
    let sq_err = frame.data_indices.iter().map(|&i| (est.h_hat[i] - h[i]).norm_sqr()).sum();
    Ok(Tally {
        errors: r.error_count(),
        bits: r.bits.len() as u64,
        sq_err,
        cells: frame.data_indices.len() as u64,
    })
}

fn run_seed(cfg: &ExperimentConfig, setups: &[PatternSetup], seed_index: u64) -> Result<SeedTally> {
    let constellation = Constellation::new(cfg.modulation);
    let n_snr = cfg.snr_db.len();
    let channel = synthesize_channel(
        &cfg.channel,
        &cfg.frame,
        derive_seed(cfg.base_seed, &[stream::CHANNEL, seed_index]),
    )?;
    let h = &channel.h;
    let bits = random_bits(
        cfg.frame.n_cells() * constellation.bits_per_symbol(),
        derive_seed(cfg.base_seed, &[stream::BITS, seed_index]),
    );
    let mut out = SeedTally { points: Vec::new(), floors: Vec::new(), perfect: Vec::new() };
    let perfect_est = CirEstimate {
        h_hat: h.clone(),
        provenance: vec![Provenance::PilotLs; h.len()],
        n_symbols: cfg.frame.n_symbols,
        n_subcarriers: cfg.frame.n_subcarriers,
    };
    for s in setups {
        let frame = build_frame(&bits, &s.pattern, &cfg.frame, &constellation, cfg.pilot_seed)?;
        let clean: Vec<Complex64> = frame.grid.iter().zip(h).map(|(x, h)| x * h).collect();
        let received: Vec<Vec<Complex64>> = cfg
            .snr_db
            .iter()
            .map(|&snr| {
                let noise_seed = derive_seed(cfg.base_seed, &[stream::NOISE, seed_index, snr.to_bits()]);
                apply_awgn(&clean, snr, 1.0, noise_seed).map(|g| g.values)
            })
            .collect::<Result<_>>()?;
        let ls = |rx: &[Complex64]| -> Vec<Complex64> {
            frame.pilot_indices.iter().zip(&frame.pilot_values).map(|(&i, &x)| rx[i] / x).collect()
        };
        out.perfect.push(
            received
                .iter()
                .map(|rx| evaluate(rx, &frame, &perfect_est, h, &constellation))
                .collect::<Result<_>>()?,
        );
        let clean_ls = ls(&clean);
        for (_, plan) in &s.plans {
            let floor_est = plan.apply(&clean_ls);
            out.floors.push(evaluate(&clean, &frame, &floor_est, h, &constellation)?);
            let mut per_snr = Vec::with_capacity(n_snr);
            for rx in &received {
                let est = plan.apply(&ls(rx));
                per_snr.push(evaluate(rx, &frame, &est, h, &constellation)?);
            }
            out.points.push(per_snr);
        }
    }
    Ok(out)
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Run every (pattern, method, snr) point of `cfg` over `cfg.seeds` seeds.
/// `workers = None` uses one thread per core.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    let mut skipped = Vec::new();
    let setups = setups(cfg, &mut skipped)?;
    let per_seed: Vec<SeedTally> = pool(workers)?.install(|| {
        (0..cfg.seeds as u64)
            .into_par_iter()
            .map(|s| run_seed(cfg, &setups, s))
            .collect::<Result<Vec<_>>>()
    })?;

    let n_snr = cfg.snr_db.len();
    let n_pairs: usize = setups.iter().map(|s| s.plans.len()).sum();
    let mut points = vec![vec![Tally::default(); n_snr]; n_pairs];
    let mut floors = vec![Tally::default(); n_pairs];
    let mut perfect = vec![vec![Tally::default(); n_snr]; setups.len()];
    for t in &per_seed {
        for (acc, seed) in points.iter_mut().zip(&t.points) {
            acc.iter_mut().zip(seed).for_each(|(a, b)| a.add(b));
        }
        floors.iter_mut().zip(&t.floors).for_each(|(a, b)| a.add(b));
        for (acc, seed) in perfect.iter_mut().zip(&t.perfect) {
            acc.iter_mut().zip(seed).for_each(|(a, b)| a.add(b));
        }
    }

    let mut rows = Vec::new();
    let mut pair = 0;
    for (pi, s) in setups.iter().enumerate() {
        for (mi, _) in &s.plans {
            let floor = floors[pair].ber();
            for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
                let t = &points[pair][si];
                let ber_total = t.ber();
                rows.push(ResultRow {
                    pattern: s.kind,
                    method: cfg.methods[*mi],
                    snr_db,
                    ber_total,
                    ber_floor: floor,
                    ber_noise: (ber_total - floor).max(0.0),
                    mse: if t.cells == 0 { 0.0 } else { t.sq_err / t.cells as f64 },
                    ci_halfwidth: ci_halfwidth(ber_total, t.bits),
                    seeds: cfg.seeds,
                    bits: t.bits,
                    bit_errors: t.errors,
                    ber_perfect_csi: perfect[pi][si].ber(),
                });
            }
            pair += 1;
        }
    }
    Ok(ExperimentResult { rows, skipped })
}

/// BER with noise disabled for one pattern/method pair over `seeds` seeds.
pub fn ber_floor(
    cfg: &ExperimentConfig,
    pattern: PatternKind,
    method: Method,
    seeds: usize,
    workers: Option<usize>,
) -> Result<FloorResult> {
    let point = ExperimentConfig {
        patterns: vec![pattern],
        methods: vec![method],
        snr_db: vec![f64::INFINITY],
        seeds,
        ..cfg.clone()
    }
    .validated()?;
    let res = run_experiment(&point, workers)?;
    if let Some(s) = res.skipped.first() {
        return Err(Error::config(format!("{}/{}: {}", s.pattern, s.method, s.reason)));
    }
    let r = &res.rows[0];
    Ok(FloorResult {
        ber: r.ber_floor,
        bits: r.bits,
        bit_errors: r.bit_errors,
        ci_halfwidth: ci_halfwidth(r.ber_floor, r.bits),
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::DEFAULT_TOML;

    fn small(patterns: &str, methods: &str, snr: &str, seeds: usize) -> ExperimentConfig {
        let text = DEFAULT_TOML
            .replace(
                "patterns = [\"cell\", \"comb\", \"parallelogram\", \"rectangular\"]",
                &format!("patterns = {patterns}"),
            )
            .replace(
                "methods = [\"distance\", \"linear-frequency\", \"bilinear\"]",
                &format!("methods = {methods}"),
            )
            .replace("snr_db = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0]", &format!("snr_db = {snr}"))
            .replace("seeds = 50", &format!("seeds = {seeds}"))
            .replace("n_symbols = 64", "n_symbols = 24");
        ExperimentConfig::from_toml(&text, "test").unwrap()
    }

    #[test]
    fn flat_static_channel_has_no_floor() {
        let mut cfg = small(
            "[\"cell\", \"comb\", \"rectangular\", \"parallelogram\"]",
            "[\"distance\", \"linear-frequency\", \"bilinear\"]",
            "[10.0]",
            3,
        );
        cfg.channel = crate::channel::ChannelSpec::awgn();
        let res = run_experiment(&cfg, Some(2)).unwrap();
        assert!(!res.rows.is_empty());
        for r in &res.rows {
            assert_eq!(r.ber_floor, 0.0, "{} {}", r.pattern, r.method);
            assert!(r.mse > 0.0);
        }
    }

    #[test]
    fn infinite_snr_equals_floor_and_genie_bound_holds() {
        let cfg = small("[\"cell\", \"rectangular\"]", "[\"distance\", \"bilinear\"]", "[5.0, 15.0, inf]", 4);
        let res = run_experiment(&cfg, None).unwrap();
        assert_eq!(res.skipped.len(), 1);
        for r in &res.rows {
            if r.snr_db == f64::INFINITY {
                assert_eq!(r.ber_total, r.ber_floor);
                assert_eq!(r.ber_noise, 0.0);
            }
            assert!(r.ber_perfect_csi <= r.ber_total + r.ci_halfwidth, "{r:?}");
            assert!(r.ber_noise >= 0.0);
        }
        let f = ber_floor(&cfg, PatternKind::Cell, Method::Distance, 4, Some(1)).unwrap();
        assert_eq!(f.ber, res.row(PatternKind::Cell, Method::Distance, f64::INFINITY).unwrap().ber_floor);
        assert!(ber_floor(&cfg, PatternKind::Cell, Method::Bilinear, 4, None).is_err());
    }

    #[test]
    fn points_do_not_depend_on_the_rest_of_the_sweep() {
        let wide = small("[\"cell\", \"comb\"]", "[\"distance\", \"linear-frequency\"]", "[0.0, 10.0]", 3);
        let narrow = small("[\"comb\"]", "[\"linear-frequency\"]", "[10.0]", 3);
        let a = run_experiment(&wide, Some(3)).unwrap();
        let b = run_experiment(&narrow, Some(1)).unwrap();
        assert_eq!(a.row(PatternKind::Comb, Method::LinearFrequency, 10.0), b.rows.first());
        assert_eq!(a, run_experiment(&wide, Some(1)).unwrap());
    }

    #[test]
    fn more_pilots_lower_the_floor() {
        let mut lo = small("[\"cell\"]", "[\"distance\"]", "[inf]", 6);
        lo.channel.f_max_normalized = 0.05;
        let mut hi = lo.clone();
        hi.pilot_density = 0.12;
        let f_lo = ber_floor(&lo, PatternKind::Cell, Method::Distance, 6, None).unwrap();
        let f_hi = ber_floor(&hi, PatternKind::Cell, Method::Distance, 6, None).unwrap();
        assert!(f_hi.ber <= f_lo.ber, "{} > {}", f_hi.ber, f_lo.ber);
    }

    #[test]
    fn ci_examples() {
        assert_eq!(ci_halfwidth(0.0, 100), 0.0);
        assert!((ci_halfwidth(0.5, 10_000) - 0.0098).abs() < 1e-12);
        assert_eq!(ci_halfwidth(0.1, 0), 0.0);
    }
}
