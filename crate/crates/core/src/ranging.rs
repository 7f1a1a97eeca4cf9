//! Waveform-based range estimators.
//!
//! * [`toa_estimate`] — correlation ToA that is deliberately grid-limited:
//!   no sub-sample interpolation, so halving the sample period halves the
//!   quantization floor and nothing else removes it.
//! * [`pdoa_estimate`] — two-tone phase-difference ranging, continuous in
//!   range (no grid floor) but periodic with the ambiguity range `c / gap`.
//! * [`pdoa_hierarchical`] — coarse-to-fine tone pairs; each finer stage
//!   re-anchors its wrapped estimate on the previous stage's lattice.
//! * [`equalize_tones`] — divides the probing tones by a known selective-
//!   fading response so the extracted phase reflects only the first tap's
//!   propagation delay.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::waveform::{fft_forward, fft_inverse, OfdmConfig, Waveform};
use crate::SPEED_OF_LIGHT;

/// Which estimator produced a [`RangingResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangingMethod {
    Toa,
    Pdoa,
    PdoaHier,
}

impl std::fmt::Display for RangingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RangingMethod::Toa => write!(f, "toa"),
            RangingMethod::Pdoa => write!(f, "pdoa"),
            RangingMethod::PdoaHier => write!(f, "pdoa_hier"),
        }
    }
}

/// Estimator-specific evidence attached to a result.
#[derive(Debug, Clone, PartialEq)]
pub enum RangingDiagnostics {
    /// Grid index of the reported correlation peak.
    CorrelationPeak { index: usize },
    /// Raw wrapped phase difference, radians in [0, 2 pi).
    PhaseDifference { delta_phi_rad: f64 },
    /// Per-stage unwrapped range estimates, coarse to fine.
    Hierarchical { stage_ranges_m: Vec<f64> },
}

/// An estimated delay and the range it maps to (`range = delay * c`).
#[derive(Debug, Clone, PartialEq)]
pub struct RangingResult {
    pub range_m: f64,
    pub delay_s: f64,
    pub method: RangingMethod,
    pub diagnostics: RangingDiagnostics,
}

/// A probing tone pair, identified by subcarrier indices on a common
/// numerology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TonePair {
    pub k1: usize,
    pub k2: usize,
    pub spacing_hz: f64,
}

impl TonePair {
    pub fn new(cfg: &OfdmConfig, k1: usize, k2: usize) -> Result<Self, RangingError> {
        if k1 == 0 || k1 >= k2 || k2 > cfg.n_subcarriers / 2 {
            return Err(RangingError::InvalidTonePair { k1, k2 });
        }
        Ok(Self {
            k1,
            k2,
            spacing_hz: cfg.spacing_hz,
        })
    }

    pub fn freq1_hz(&self) -> f64 {
        self.k1 as f64 * self.spacing_hz
    }

    pub fn freq2_hz(&self) -> f64 {
        self.k2 as f64 * self.spacing_hz
    }

    pub fn gap_hz(&self) -> f64 {
        (self.k2 - self.k1) as f64 * self.spacing_hz
    }

    /// Maximum unambiguous range, `c / gap`.
    pub fn ambiguity_range_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.gap_hz()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RangingError {
    #[error("mismatched-waveforms: rx and reference must share length and sample rate")]
    MismatchedWaveforms,
    #[error("no-peak: received waveform has no correlation peak (all zero)")]
    NoPeak,
    #[error("invalid-tone-pair: require 0 < k1 < k2 <= n/2, got k1 {k1}, k2 {k2}")]
    InvalidTonePair { k1: usize, k2: usize },
    #[error("tone-erased: tone at {freq_hz} Hz has no usable power")]
    ToneErased { freq_hz: f64 },
    #[error("empty-hierarchy: at least one tone pair is required")]
    EmptyHierarchy,
    #[error(
        "hierarchy-order: pairs must be sorted coarse to fine (strictly increasing gap), \
         pair {index} violates this"
    )]
    HierarchyOrder { index: usize },
    #[error(
        "hierarchy-too-coarse: stage {index} ambiguity range {ambiguity_m} m does not exceed \
         twice the expected error {expected_error_m} m of the previous stage"
    )]
    HierarchyTooCoarse {
        index: usize,
        ambiguity_m: f64,
        expected_error_m: f64,
    },
    #[error(
        "ambiguity-failure: stage {index} correction {correction_m} m exceeds half the \
         ambiguity range {ambiguity_m} m"
    )]
    AmbiguityFailure {
        index: usize,
        correction_m: f64,
        ambiguity_m: f64,
    },
    #[error("near-zero-response: channel response magnitude {magnitude} at tone {index} is unusable")]
    NearZeroResponse { index: usize, magnitude: f64 },
}

/// Correlation ToA on the receiver's sample grid.
///
/// The delay is read off the circular cross-correlation with a leading-edge
/// convention: the reported index is the first grid sample at or after the
/// true peak (decided by comparing the two neighbors of the argmax, never by
/// interpolating). For a fractional true delay the error is therefore
/// one-sided, uniform over [0, c/fs) — the sample grid is the floor, and
/// only a faster ADC lowers it.
pub fn toa_estimate(rx: &Waveform, reference: &Waveform) -> Result<RangingResult, RangingError> {
    if rx.len() != reference.len() || rx.is_empty() || rx.fs_hz != reference.fs_hz {
        return Err(RangingError::MismatchedWaveforms);
    }
    let n = rx.len();

    let mut spec_rx = rx.samples.clone();
    let mut spec_ref = reference.samples.clone();
    fft_forward(&mut spec_rx);
    fft_forward(&mut spec_ref);
    for (r, f) in spec_rx.iter_mut().zip(spec_ref.iter()) {
        *r *= f.conj();
    }
    fft_inverse(&mut spec_rx);
    let corr: Vec<f64> = spec_rx.iter().map(|c| c.norm()).collect();

    let (peak, peak_val) = corr
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if *peak_val == 0.0 {
        return Err(RangingError::NoPeak);
    }

    // Leading-edge disambiguation: if the sample after the argmax clearly
    // dominates the one before it, the true peak lies above the argmax and
    // the first not-earlier grid point is argmax + 1.
    let before = corr[(peak + n - 1) % n];
    let after = corr[(peak + 1) % n];
    let index = if after > before * (1.0 + 1e-9) {
        (peak + 1) % n
    } else {
        peak
    };

    let delay_s = index as f64 / rx.fs_hz;
    Ok(RangingResult {
        range_m: delay_s * SPEED_OF_LIGHT,
        delay_s,
        method: RangingMethod::Toa,
        diagnostics: RangingDiagnostics::CorrelationPeak { index },
    })
}

/// Projects the waveform onto the complex exponential at `freq_hz`,
/// returning the average correlation (amplitude-preserving).
fn tone_projection(rx: &Waveform, freq_hz: f64) -> Complex64 {
    let n = rx.len() as f64;
    rx.samples
        .iter()
        .enumerate()
        .map(|(s, v)| v * Complex64::from_polar(1.0, -TAU * freq_hz * s as f64 / rx.fs_hz))
        .sum::<Complex64>()
        / n
}

fn wrap_to_2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r == TAU {
        0.0
    } else {
        r
    }
}

/// Minimum tone amplitude relative to the waveform RMS below which a tone is
/// considered erased by the channel.
const TONE_POWER_FLOOR: f64 = 1e-9;

fn extract_tone_phases(rx: &Waveform, pair: &TonePair) -> Result<(f64, f64), RangingError> {
    let rms = rx.mean_power().sqrt();
    let z1 = tone_projection(rx, pair.freq1_hz());
    let z2 = tone_projection(rx, pair.freq2_hz());
    if z1.norm() <= TONE_POWER_FLOOR * rms.max(f64::MIN_POSITIVE) {
        return Err(RangingError::ToneErased {
            freq_hz: pair.freq1_hz(),
        });
    }
    if z2.norm() <= TONE_POWER_FLOOR * rms.max(f64::MIN_POSITIVE) {
        return Err(RangingError::ToneErased {
            freq_hz: pair.freq2_hz(),
        });
    }
    Ok((z1.arg(), z2.arg()))
}

/// Two-tone phase-difference ranging.
///
/// A propagation delay tau rotates tone k by `-2 pi f_k tau`, so the lower
/// tone leads the upper one by `2 pi gap tau`; that differential phase maps
/// one-to-one onto [0, ambiguity_range). The estimate is exact for noiseless
/// input but only modulo the ambiguity range.
pub fn pdoa_estimate(rx: &Waveform, pair: &TonePair) -> Result<RangingResult, RangingError> {
    let (phi1, phi2) = extract_tone_phases(rx, pair)?;
    let delta_phi = wrap_to_2pi(phi1 - phi2);
    let range_m = SPEED_OF_LIGHT * delta_phi / (TAU * pair.gap_hz());
    Ok(RangingResult {
        range_m,
        delay_s: range_m / SPEED_OF_LIGHT,
        method: RangingMethod::Pdoa,
        diagnostics: RangingDiagnostics::PhaseDifference {
            delta_phi_rad: delta_phi,
        },
    })
}

/// Multi-frequency ambiguity resolution, coarse to fine.
///
/// Stage 1 takes the coarsest pair's estimate at face value (the true range
/// must lie inside its ambiguity range). Every finer stage keeps its own
/// wrapped estimate and adds the integer number of wraps that lands nearest
/// the previous stage's estimate. `expected_error_m` is the configured bound
/// on any single stage's estimation error; each finer ambiguity range must
/// exceed twice that bound or unwrapping cannot be trusted.
pub fn pdoa_hierarchical(
    rx: &Waveform,
    pairs: &[TonePair],
    expected_error_m: f64,
) -> Result<RangingResult, RangingError> {
    if pairs.is_empty() {
        return Err(RangingError::EmptyHierarchy);
    }
    for (i, w) in pairs.windows(2).enumerate() {
        if w[1].gap_hz() <= w[0].gap_hz() {
            return Err(RangingError::HierarchyOrder { index: i + 1 });
        }
        let ambiguity = w[1].ambiguity_range_m();
        if ambiguity <= 2.0 * expected_error_m {
            return Err(RangingError::HierarchyTooCoarse {
                index: i + 1,
                ambiguity_m: ambiguity,
                expected_error_m,
            });
        }
    }

    let mut stage_ranges = Vec::with_capacity(pairs.len());
    let mut estimate = pdoa_estimate(rx, &pairs[0])?.range_m;
    stage_ranges.push(estimate);

    for (i, pair) in pairs.iter().enumerate().skip(1) {
        let wrapped = pdoa_estimate(rx, pair)?.range_m;
        let ambiguity = pair.ambiguity_range_m();
        let wraps = ((estimate - wrapped) / ambiguity).round();
        let refined = wrapped + wraps * ambiguity;
        let correction = (refined - estimate).abs();
        if correction > ambiguity / 2.0 {
            return Err(RangingError::AmbiguityFailure {
                index: i,
                correction_m: correction,
                ambiguity_m: ambiguity,
            });
        }
        estimate = refined;
        stage_ranges.push(estimate);
    }

    Ok(RangingResult {
        range_m: estimate,
        delay_s: estimate / SPEED_OF_LIGHT,
        method: RangingMethod::PdoaHier,
        diagnostics: RangingDiagnostics::Hierarchical {
            stage_ranges_m: stage_ranges,
        },
    })
}

/// Divides the two probing tones by a known channel response, removing the
/// phase contributed by selective fading.
///
/// `response` holds the complex channel values at the pair's two tone
/// frequencies. Pass the excess-delay response
/// ([`crate::channel::excess_response`]) so that the line-of-sight
/// propagation delay itself survives equalization and PDoA afterwards reads
/// the first tap only.
pub fn equalize_tones(
    rx: &Waveform,
    pair: &TonePair,
    response: [Complex64; 2],
) -> Result<Waveform, RangingError> {
    const MIN_RESPONSE: f64 = 1e-12;
    for (i, h) in response.iter().enumerate() {
        if h.norm() <= MIN_RESPONSE {
            return Err(RangingError::NearZeroResponse {
                index: i,
                magnitude: h.norm(),
            });
        }
    }
    let n = rx.len() as f64;
    let bin1 = (pair.freq1_hz() * n / rx.fs_hz).round() as usize;
    let bin2 = (pair.freq2_hz() * n / rx.fs_hz).round() as usize;

    let mut spec = rx.samples.clone();
    fft_forward(&mut spec);
    spec[bin1] /= response[0];
    spec[bin2] /= response[1];
    fft_inverse(&mut spec);
    Ok(Waveform {
        samples: spec,
        fs_hz: rx.fs_hz,
        carrier_hz: rx.carrier_hz,
    })
}
