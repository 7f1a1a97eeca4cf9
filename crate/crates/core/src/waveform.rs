//! OFDM reference waveform and two-tone probing signals.
//!
//! The OFDM reference carries seeded pseudorandom QPSK on every subcarrier
//! (a flat spectrum keeps the correlation peak sharp); oversampling is
//! realized by zero-padding the frequency grid, i.e. exact bandlimited
//! interpolation. The two-tone signal is the probing waveform for
//! phase-difference ranging: two unit-amplitude complex exponentials with
//! zero initial phase.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

/// OFDM numerology. Sampling rate is `n_subcarriers * spacing_hz * oversample`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub spacing_hz: f64,
    /// Oversampling factor L; 1, 2 or 4.
    pub oversample: usize,
    /// Cyclic prefix length in output samples. Defaults to 0: the ranging
    /// experiment is one-shot, not a communication link.
    #[serde(default)]
    pub cp_len: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 2048,
            spacing_hz: 15_000.0,
            oversample: 1,
            cp_len: 0,
        }
    }
}

impl OfdmConfig {
    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.n_subcarriers as f64 * self.spacing_hz * self.oversample as f64
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        if self.n_subcarriers == 0 || !self.n_subcarriers.is_power_of_two() {
            return Err(WaveformError::InvalidConfig(format!(
                "n_subcarriers must be a power of two, got {}",
                self.n_subcarriers
            )));
        }
        if !(self.spacing_hz > 0.0) {
            return Err(WaveformError::InvalidConfig(format!(
                "spacing_hz must be positive, got {}",
                self.spacing_hz
            )));
        }
        if ![1, 2, 4].contains(&self.oversample) {
            return Err(WaveformError::InvalidConfig(format!(
                "oversample must be 1, 2 or 4, got {}",
                self.oversample
            )));
        }
        Ok(())
    }
}

/// Complex baseband samples with their sampling rate and carrier metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub fs_hz: f64,
    pub carrier_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<Complex64>, fs_hz: f64) -> Self {
        Self {
            samples,
            fs_hz,
            carrier_hz: 5.9e9,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs_hz
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WaveformError {
    #[error("invalid-config: {0}")]
    InvalidConfig(String),
    #[error("zero-tone-gap: the two probing tones must differ (k1 {0}, k2 {1})")]
    ZeroToneGap(usize, usize),
    #[error("tone-out-of-band: require 0 < k1 < k2 <= n_subcarriers/2, got k1 {k1}, k2 {k2}, n {n}")]
    ToneOutOfBand { k1: usize, k2: usize, n: usize },
}

thread_local! {
    static PLANNER: RefCell<rustfft::FftPlanner<f64>> = RefCell::new(rustfft::FftPlanner::new());
}

/// In-place forward FFT (unnormalized), with per-thread plan caching.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let plan: Arc<dyn rustfft::Fft<f64>> =
        PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse FFT, scaled by 1/N so that it inverts [`fft_forward`].
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let plan: Arc<dyn rustfft::Fft<f64>> =
        PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    for s in buf.iter_mut() {
        *s *= scale;
    }
}

/// Seeded unit-modulus QPSK symbols, one per subcarrier.
pub fn ofdm_symbols(cfg: &OfdmConfig, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..cfg.n_subcarriers)
        .map(|_| {
            let re = if rng.gen::<bool>() { scale } else { -scale };
            let im = if rng.gen::<bool>() { scale } else { -scale };
            Complex64::new(re, im)
        })
        .collect()
}

/// OFDM reference waveform: seeded QPSK on all subcarriers, transformed to
/// time domain at `n * spacing * L` with the oversampled spectrum zero-padded
/// in the middle, average sample power normalized to 1, optional cyclic
/// prefix prepended.
pub fn gen_ofdm_reference(cfg: &OfdmConfig, seed: u64) -> Result<Waveform, WaveformError> {
    cfg.validate()?;
    let n = cfg.n_subcarriers;
    let total = n * cfg.oversample;
    let symbols = ofdm_symbols(cfg, seed);

    let mut grid = vec![Complex64::new(0.0, 0.0); total];
    // Positive frequencies at the head, negative at the tail; the padding in
    // between is what interpolates.
    let half = n / 2;
    grid[..half].copy_from_slice(&symbols[..half]);
    grid[total - half..].copy_from_slice(&symbols[half..]);

    fft_inverse(&mut grid);

    let power = grid.iter().map(|s| s.norm_sqr()).sum::<f64>() / total as f64;
    let norm = 1.0 / power.sqrt();
    for s in grid.iter_mut() {
        *s *= norm;
    }

    if cfg.cp_len > 0 {
        let cp_start = total - cfg.cp_len.min(total);
        let mut with_cp = Vec::with_capacity(total + cfg.cp_len.min(total));
        with_cp.extend_from_slice(&grid[cp_start..]);
        with_cp.extend_from_slice(&grid);
        grid = with_cp;
    }

    Ok(Waveform::new(grid, cfg.sample_rate_hz()))
}

/// Two-tone probing waveform: unit-amplitude exponentials at `k1 * spacing`
/// and `k2 * spacing`, both starting at phase 0.
pub fn gen_two_tone(cfg: &OfdmConfig, k1: usize, k2: usize) -> Result<Waveform, WaveformError> {
    cfg.validate()?;
    if k1 == k2 {
        return Err(WaveformError::ZeroToneGap(k1, k2));
    }
    if k1 == 0 || k1 > k2 || k2 > cfg.n_subcarriers / 2 {
        return Err(WaveformError::ToneOutOfBand {
            k1,
            k2,
            n: cfg.n_subcarriers,
        });
    }
    let fs = cfg.sample_rate_hz();
    let total = cfg.n_subcarriers * cfg.oversample;
    let f1 = k1 as f64 * cfg.spacing_hz;
    let f2 = k2 as f64 * cfg.spacing_hz;
    let samples = (0..total)
        .map(|s| {
            let t = s as f64 / fs;
            Complex64::from_polar(1.0, TAU * f1 * t) + Complex64::from_polar(1.0, TAU * f2 * t)
        })
        .collect();
    Ok(Waveform::new(samples, fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn base_rate_sample_count_and_fs() {
        let cfg = OfdmConfig::default();
        let w = gen_ofdm_reference(&cfg, 1).unwrap();
        assert_eq!(w.len(), 2048);
        assert_abs_diff_eq!(w.fs_hz, 30.72e6);
    }

    #[test]
    fn oversampled_rate_and_length() {
        let cfg = OfdmConfig::default().with_oversample(4);
        let w = gen_ofdm_reference(&cfg, 1).unwrap();
        assert_eq!(w.len(), 8192);
        assert_abs_diff_eq!(w.fs_hz, 122.88e6);
    }

    #[test]
    fn reference_is_seed_deterministic_and_unit_power() {
        let cfg = OfdmConfig::default();
        let a = gen_ofdm_reference(&cfg, 42).unwrap();
        let b = gen_ofdm_reference(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.mean_power(), 1.0, epsilon = 1e-12);
        let c = gen_ofdm_reference(&cfg, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forward_transform_recovers_symbols() {
        let cfg = OfdmConfig {
            n_subcarriers: 256,
            ..OfdmConfig::default()
        };
        let symbols = ofdm_symbols(&cfg, 9);
        let w = gen_ofdm_reference(&cfg, 9).unwrap();
        let mut spec = w.samples.clone();
        fft_forward(&mut spec);
        // The unit-power normalization scales every bin by sqrt(n); undo it.
        let scale = 1.0 / (cfg.n_subcarriers as f64).sqrt();
        for (k, sym) in symbols.iter().enumerate() {
            let got = spec[k] * scale;
            assert_abs_diff_eq!(got.re, sym.re, epsilon = 1e-9);
            assert_abs_diff_eq!(got.im, sym.im, epsilon = 1e-9);
        }
    }

    #[test]
    fn decimated_oversampled_equals_base_rate() {
        for l in [2usize, 4] {
            let base = gen_ofdm_reference(&OfdmConfig::default(), 5).unwrap();
            let over =
                gen_ofdm_reference(&OfdmConfig::default().with_oversample(l), 5).unwrap();
            for (m, s) in base.samples.iter().enumerate() {
                let o = over.samples[m * l];
                assert_abs_diff_eq!(o.re, s.re, epsilon = 1e-9);
                assert_abs_diff_eq!(o.im, s.im, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn two_tone_gap_and_initial_phase() {
        let cfg = OfdmConfig::default();
        let w = gen_two_tone(&cfg, 1, 12).unwrap();
        // Gap of 11 subcarriers at 15 kHz.
        assert_abs_diff_eq!((12 - 1) as f64 * cfg.spacing_hz, 165e3);
        // Both tones start at phase 0 so the first sample is exactly 2 + 0j.
        assert_abs_diff_eq!(w.samples[0].re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.samples[0].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_tone_spectrum_occupies_only_its_bins() {
        let cfg = OfdmConfig {
            n_subcarriers: 512,
            ..OfdmConfig::default()
        };
        let w = gen_two_tone(&cfg, 3, 17).unwrap();
        let mut spec = w.samples.clone();
        fft_forward(&mut spec);
        for (k, v) in spec.iter().enumerate() {
            let expected = if k == 3 || k == 17 { 512.0 } else { 0.0 };
            assert_abs_diff_eq!(v.norm(), expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn equal_tones_are_rejected() {
        let cfg = OfdmConfig::default();
        assert_eq!(
            gen_two_tone(&cfg, 3, 3),
            Err(WaveformError::ZeroToneGap(3, 3))
        );
        assert!(matches!(
            gen_two_tone(&cfg, 0, 3),
            Err(WaveformError::ToneOutOfBand { .. })
        ));
        assert!(matches!(
            gen_two_tone(&cfg, 1, 2000),
            Err(WaveformError::ToneOutOfBand { .. })
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = OfdmConfig {
            n_subcarriers: 1000,
            ..OfdmConfig::default()
        };
        assert!(gen_ofdm_reference(&bad, 0).is_err());
        let bad = OfdmConfig {
            oversample: 3,
            ..OfdmConfig::default()
        };
        assert!(gen_ofdm_reference(&bad, 0).is_err());
    }

    #[test]
    fn cyclic_prefix_prepends_tail() {
        let cfg = OfdmConfig {
            n_subcarriers: 64,
            cp_len: 16,
            ..OfdmConfig::default()
        };
        let w = gen_ofdm_reference(&cfg, 2).unwrap();
        assert_eq!(w.len(), 80);
        assert_eq!(w.samples[..16], w.samples[64..]);
    }
}
