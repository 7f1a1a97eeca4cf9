//! Monte Carlo experiment runner.
//!
//! [`run_ranging_sweep`] reproduces the ToA-versus-PDoA ranging comparison:
//! for every (estimator, sampling rate, SNR) cell it draws independent true
//! ranges, pushes the probing waveform through the channel, estimates, and
//! summarizes the absolute errors. [`run_hvp_mc`] runs the hidden-vehicle
//! solver over random scenarios with optional angle/delay noise.
//!
//! Reproducibility contract: every trial's seed is
//! `mix(master_seed, cell_id, 1 + trial_index)` (and index 0 is reserved for
//! per-cell waveform generation), where `mix` chains SplitMix64 steps. Rows
//! and per-trial results are collected in deterministic order, so identical
//! configs produce byte-identical CSV no matter how many threads run.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::channel::{propagate, ChannelTap, ChannelError};
use crate::hvp::{solve_linear, HvpError, SolveOptions};
use crate::ranging::{
    pdoa_estimate, pdoa_hierarchical, toa_estimate, RangingError, RangingMethod, TonePair,
};
use crate::scenario::{
    enumerate_paths, normalize_angle, random_scenario, Region, ScenarioError, ScenarioParams,
    Point2D,
};
use crate::waveform::{gen_ofdm_reference, gen_two_tone, OfdmConfig, Waveform, WaveformError};

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("invalid-sweep-config: {0}")]
    InvalidConfig(String),
    #[error("empty-sample: metrics require at least one error value")]
    EmptySample,
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Ranging(#[from] RangingError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Hvp(#[from] HvpError),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable (master, cell, trial) -> seed mixing. Trial index 0 is reserved
/// for per-cell setup such as reference-waveform generation.
pub fn derive_seed(master: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ trial)
}

/// Error summary: mean absolute, root-mean-square, nearest-rank 95th
/// percentile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mae: f64,
    pub rmse: f64,
    pub p95: f64,
}

/// Standard metrics over absolute errors.
pub fn summarize(errors: &[f64]) -> Result<Summary, HarnessError> {
    if errors.is_empty() {
        return Err(HarnessError::EmptySample);
    }
    let n = errors.len() as f64;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mut sorted: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * n).ceil() as usize).clamp(1, sorted.len());
    Ok(Summary {
        mae,
        rmse,
        p95: sorted[rank - 1],
    })
}

mod snr_grid_serde {
    //! SNR grids allow "inf" (noiseless) entries, which JSON numbers cannot
    //! express; they serialize as the string "inf".
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Db(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(grid: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = grid
            .iter()
            .map(|&v| {
                if v.is_finite() {
                    Entry::Db(v)
                } else {
                    Entry::Text("inf".into())
                }
            })
            .collect();
        entries.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(de)?;
        entries
            .into_iter()
            .map(|e| match e {
                Entry::Db(v) => Ok(v),
                Entry::Text(t) if t == "inf" || t == "noiseless" => Ok(f64::INFINITY),
                Entry::Text(t) => Err(D::Error::custom(format!("bad SNR entry: {t:?}"))),
            })
            .collect()
    }
}

/// Configuration of one ranging sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub estimators: Vec<RangingMethod>,
    #[serde(default = "default_n_subcarriers")]
    pub n_subcarriers: usize,
    #[serde(default = "default_spacing_hz")]
    pub spacing_hz: f64,
    /// Sampling-rate grid, expressed as oversampling factors.
    #[serde(default = "default_oversample_list")]
    pub oversample_list: Vec<usize>,
    #[serde(with = "snr_grid_serde", default = "default_snr_grid")]
    pub snr_db_grid: Vec<f64>,
    pub trials: usize,
    /// True ranges are drawn uniformly from this interval, meters.
    #[serde(default = "default_range_bounds")]
    pub range_bounds_m: [f64; 2],
    /// Subcarrier indices of the PDoA probing pair.
    #[serde(default = "default_tone_pair")]
    pub tone_pair: [usize; 2],
    /// Coarse-to-fine pairs for the hierarchical estimator.
    #[serde(default = "default_hier_pairs")]
    pub hier_pairs: Vec<[usize; 2]>,
    /// Configured bound on a single stage's error, used to validate that
    /// each finer ambiguity range can absorb it.
    #[serde(default = "default_hier_expected_error")]
    pub hier_expected_error_m: f64,
    pub master_seed: u64,
}

fn default_n_subcarriers() -> usize {
    2048
}
fn default_spacing_hz() -> f64 {
    15_000.0
}
fn default_oversample_list() -> Vec<usize> {
    vec![1]
}
fn default_snr_grid() -> Vec<f64> {
    vec![f64::INFINITY]
}
fn default_range_bounds() -> [f64; 2] {
    [50.0, 500.0]
}
fn default_tone_pair() -> [usize; 2] {
    [1, 12]
}
fn default_hier_pairs() -> Vec<[usize; 2]> {
    vec![[1, 12], [1, 111]]
}
fn default_hier_expected_error() -> f64 {
    20.0
}

/// One output row of [`run_ranging_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    pub fs_hz: f64,
    pub snr_db: f64,
    pub trials: usize,
    pub mae_m: f64,
    pub rmse_m: f64,
    pub p95_m: f64,
}

pub const RANGING_CSV_HEADER: &str = "estimator,fs_hz,snr_db,trials,mae_m,rmse_m,p95_m";

pub fn ranging_rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RANGING_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.estimator, r.fs_hz, r.snr_db, r.trials, r.mae_m, r.rmse_m, r.p95_m
        ));
    }
    out
}

impl SweepConfig {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.estimators.is_empty() {
            return Err(HarnessError::InvalidConfig("no estimators selected".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.oversample_list.is_empty() {
            return Err(HarnessError::InvalidConfig("empty oversample list".into()));
        }
        let [lo, hi] = self.range_bounds_m;
        if !(0.0 < lo && lo < hi) {
            return Err(HarnessError::InvalidConfig(format!(
                "bad range bounds [{lo}, {hi}]"
            )));
        }
        let base = self.ofdm(1);
        base.validate()?;
        // The correlation window is one symbol long regardless of L.
        let window_m = crate::SPEED_OF_LIGHT / self.spacing_hz;
        if self.estimators.contains(&RangingMethod::Toa) && hi >= window_m {
            return Err(HarnessError::InvalidConfig(format!(
                "range bound {hi} m exceeds the correlation window {window_m} m"
            )));
        }
        if self.estimators.contains(&RangingMethod::Pdoa) {
            let pair = TonePair::new(&base, self.tone_pair[0], self.tone_pair[1])?;
            if hi >= pair.ambiguity_range_m() {
                return Err(HarnessError::InvalidConfig(format!(
                    "range bound {hi} m violates the PDoA ambiguity range {} m",
                    pair.ambiguity_range_m()
                )));
            }
        }
        if self.estimators.contains(&RangingMethod::PdoaHier) {
            if self.hier_pairs.is_empty() {
                return Err(HarnessError::InvalidConfig("empty hierarchy".into()));
            }
            let coarsest = TonePair::new(&base, self.hier_pairs[0][0], self.hier_pairs[0][1])?;
            if hi >= coarsest.ambiguity_range_m() {
                return Err(HarnessError::InvalidConfig(format!(
                    "range bound {hi} m violates the coarsest ambiguity range {} m",
                    coarsest.ambiguity_range_m()
                )));
            }
            let mut prev_gap = 0.0;
            for p in &self.hier_pairs {
                let pair = TonePair::new(&base, p[0], p[1])?;
                if pair.gap_hz() <= prev_gap {
                    return Err(HarnessError::InvalidConfig(
                        "hierarchy pairs must be sorted coarse to fine".into(),
                    ));
                }
                if prev_gap > 0.0 && pair.ambiguity_range_m() <= 2.0 * self.hier_expected_error_m
                {
                    return Err(HarnessError::InvalidConfig(format!(
                        "ambiguity range {} m cannot absorb stage error {} m",
                        pair.ambiguity_range_m(),
                        self.hier_expected_error_m
                    )));
                }
                prev_gap = pair.gap_hz();
            }
        }
        Ok(())
    }

    fn ofdm(&self, oversample: usize) -> OfdmConfig {
        OfdmConfig {
            n_subcarriers: self.n_subcarriers,
            spacing_hz: self.spacing_hz,
            oversample,
            cp_len: 0,
        }
    }
}

/// Unit-amplitude zero-phase multi-tone waveform over the distinct
/// subcarriers used by the hierarchy.
fn multi_tone(cfg: &OfdmConfig, ks: &[usize]) -> Waveform {
    let fs = cfg.sample_rate_hz();
    let total = cfg.n_subcarriers * cfg.oversample;
    let freqs: Vec<f64> = {
        let mut sorted: Vec<usize> = ks.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        sorted.into_iter().map(|k| k as f64 * cfg.spacing_hz).collect()
    };
    let samples = (0..total)
        .map(|s| {
            let t = s as f64 / fs;
            freqs
                .iter()
                .map(|f| Complex64::from_polar(1.0, TAU * f * t))
                .sum()
        })
        .collect();
    Waveform::new(samples, fs)
}

fn run_cell(
    cfg: &SweepConfig,
    estimator: RangingMethod,
    oversample: usize,
    snr_db: f64,
    cell: u64,
) -> Result<ResultRow, HarnessError> {
    let ofdm = cfg.ofdm(oversample);
    let [lo, hi] = cfg.range_bounds_m;

    let reference = match estimator {
        RangingMethod::Toa => gen_ofdm_reference(&ofdm, derive_seed(cfg.master_seed, cell, 0))?,
        RangingMethod::Pdoa => gen_two_tone(&ofdm, cfg.tone_pair[0], cfg.tone_pair[1])?,
        RangingMethod::PdoaHier => {
            let ks: Vec<usize> = cfg.hier_pairs.iter().flatten().copied().collect();
            multi_tone(&ofdm, &ks)
        }
    };
    let pair = TonePair::new(&ofdm, cfg.tone_pair[0], cfg.tone_pair[1]);
    let hier: Result<Vec<TonePair>, RangingError> = cfg
        .hier_pairs
        .iter()
        .map(|p| TonePair::new(&ofdm, p[0], p[1]))
        .collect();

    let errors: Vec<Result<f64, HarnessError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.master_seed,
                cell,
                1 + trial as u64,
            ));
            let true_range = rng.gen_range(lo..hi);
            let noise_seed = rng.gen::<u64>();
            let tap = ChannelTap::new(true_range / crate::SPEED_OF_LIGHT, Complex64::new(1.0, 0.0));
            let rx = propagate(&reference, &[tap], snr_db, noise_seed)?;
            let estimate = match estimator {
                RangingMethod::Toa => toa_estimate(&rx, &reference)?.range_m,
                RangingMethod::Pdoa => pdoa_estimate(&rx, pair.as_ref().unwrap())?.range_m,
                RangingMethod::PdoaHier => {
                    pdoa_hierarchical(&rx, hier.as_ref().unwrap(), cfg.hier_expected_error_m)?
                        .range_m
                }
            };
            Ok((estimate - true_range).abs())
        })
        .collect();
    let errors: Vec<f64> = errors.into_iter().collect::<Result<_, _>>()?;

    let s = summarize(&errors)?;
    Ok(ResultRow {
        estimator: estimator.to_string(),
        fs_hz: ofdm.sample_rate_hz(),
        snr_db,
        trials: cfg.trials,
        mae_m: s.mae,
        rmse_m: s.rmse,
        p95_m: s.p95,
    })
}

/// Runs the full estimator x sampling-rate x SNR grid. Rows come out in
/// configuration order: estimators outermost, then oversampling factors,
/// then SNR points.
pub fn run_ranging_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut cell: u64 = 0;
    for &estimator in &cfg.estimators {
        for &l in &cfg.oversample_list {
            for &snr in &cfg.snr_db_grid {
                rows.push(run_cell(cfg, estimator, l, snr, cell)?);
                cell += 1;
            }
        }
    }
    Ok(rows)
}

/// Configuration of a hidden-vehicle Monte Carlo campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HvpMcConfig {
    #[serde(default = "default_n_scatterers_range")]
    pub n_scatterers_range: [usize; 2],
    #[serde(default = "default_region")]
    pub region: Region,
    #[serde(default = "default_min_separation")]
    pub min_separation_m: f64,
    #[serde(default = "Point2D::origin_default")]
    pub anchor: Point2D,
    /// Noise grids: one row per (angle sigma, delay sigma) pair, cartesian.
    #[serde(default = "default_zero_grid")]
    pub sigma_angle_rad: Vec<f64>,
    #[serde(default = "default_zero_grid")]
    pub sigma_delay_s: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub solve: SolveOptionsConfig,
}

fn default_n_scatterers_range() -> [usize; 2] {
    [3, 6]
}
fn default_region() -> Region {
    Region::new(-200.0, 200.0, -200.0, 200.0)
}
fn default_min_separation() -> f64 {
    10.0
}
fn default_zero_grid() -> Vec<f64> {
    vec![0.0]
}

/// Serde-friendly mirror of [`SolveOptions`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptionsConfig {
    pub c: f64,
    pub max_condition: f64,
}

impl Default for SolveOptionsConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            c: o.c,
            max_condition: o.max_condition,
        }
    }
}

impl From<SolveOptionsConfig> for SolveOptions {
    fn from(c: SolveOptionsConfig) -> Self {
        Self {
            c: c.c,
            max_condition: c.max_condition,
        }
    }
}

/// One output row of [`run_hvp_mc`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HvpResultRow {
    pub sigma_angle_rad: f64,
    pub sigma_delay_s: f64,
    pub trials: usize,
    /// Trials that produced a usable fix.
    pub solved: usize,
    pub degenerate_rate: f64,
    pub mae_m: f64,
    pub rmse_m: f64,
    pub p95_m: f64,
}

pub const HVP_CSV_HEADER: &str =
    "sigma_angle_rad,sigma_delay_s,trials,solved,degenerate_rate,mae_m,rmse_m,p95_m";

pub fn hvp_rows_to_csv(rows: &[HvpResultRow]) -> String {
    let mut out = String::from(HVP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.sigma_angle_rad,
            r.sigma_delay_s,
            r.trials,
            r.solved,
            r.degenerate_rate,
            r.mae_m,
            r.rmse_m,
            r.p95_m
        ));
    }
    out
}

/// Runs one trial: random scenario, oracle paths, noise injection, solve.
/// `None` marks a degenerate trial (packing failure, ill-conditioning, or an
/// infeasible solution).
fn hvp_trial(cfg: &HvpMcConfig, sigma_angle: f64, sigma_delay: f64, seed: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [n_lo, n_hi] = cfg.n_scatterers_range;
    let n_scatterers = if n_hi > n_lo {
        rng.gen_range(n_lo..=n_hi)
    } else {
        n_lo
    };
    let params = ScenarioParams {
        n_scatterers,
        region: cfg.region,
        min_separation_m: cfg.min_separation_m,
        anchor: cfg.anchor,
    };
    let scenario = random_scenario(rng.gen::<u64>(), &params).ok()?;
    let mut paths = enumerate_paths(&scenario, 1).ok()?;
    if paths.len() < 3 {
        return None;
    }

    if sigma_angle > 0.0 || sigma_delay > 0.0 {
        let angle_noise = Normal::new(0.0, sigma_angle.max(f64::MIN_POSITIVE)).ok()?;
        let delay_noise = Normal::new(0.0, sigma_delay.max(f64::MIN_POSITIVE)).ok()?;
        // Delay noise perturbs arrival timestamps; differences against the
        // reference keep its draw in every other path.
        let reference_jitter = if sigma_delay > 0.0 {
            delay_noise.sample(&mut rng)
        } else {
            0.0
        };
        for (i, p) in paths.iter_mut().enumerate() {
            if sigma_angle > 0.0 {
                p.aod_rad = normalize_angle(p.aod_rad + angle_noise.sample(&mut rng));
                p.aoa_rad = normalize_angle(p.aoa_rad + angle_noise.sample(&mut rng));
            }
            if sigma_delay > 0.0 && i > 0 {
                p.rel_delay_s += delay_noise.sample(&mut rng) - reference_jitter;
            }
        }
    }

    let opts: SolveOptions = cfg.solve.into();
    let fix = solve_linear(&paths, scenario.anchor, &opts).ok()?;
    if !fix.feasible && sigma_angle == 0.0 && sigma_delay == 0.0 {
        // Noiseless infeasibility is a degenerate draw, not an estimate.
        return None;
    }
    Some(fix.position.distance_to(scenario.vehicle))
}

/// Runs the (sigma_angle x sigma_delay) grid. Degenerate trials are excluded
/// from the metrics and reported via `degenerate_rate`.
pub fn run_hvp_mc(cfg: &HvpMcConfig) -> Result<Vec<HvpResultRow>, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::InvalidConfig("trials must be >= 1".into()));
    }
    if cfg.n_scatterers_range[0] < 3 || cfg.n_scatterers_range[1] < cfg.n_scatterers_range[0] {
        return Err(HarnessError::InvalidConfig(
            "scatterer range must be [lo, hi] with 3 <= lo <= hi".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut cell: u64 = 0;
    for &sa in &cfg.sigma_angle_rad {
        for &sd in &cfg.sigma_delay_s {
            let outcomes: Vec<Option<f64>> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    hvp_trial(cfg, sa, sd, derive_seed(cfg.master_seed, cell, 1 + trial as u64))
                })
                .collect();
            let errors: Vec<f64> = outcomes.iter().filter_map(|o| *o).collect();
            if errors.is_empty() {
                return Err(HarnessError::InvalidConfig(format!(
                    "all {} trials degenerate at sigma_angle {sa}, sigma_delay {sd}",
                    cfg.trials
                )));
            }
            let s = summarize(&errors)?;
            rows.push(HvpResultRow {
                sigma_angle_rad: sa,
                sigma_delay_s: sd,
                trials: cfg.trials,
                solved: errors.len(),
                degenerate_rate: 1.0 - errors.len() as f64 / cfg.trials as f64,
                mae_m: s.mae,
                rmse_m: s.rmse,
                p95_m: s.p95,
            });
            cell += 1;
        }
    }
    Ok(rows)
}
