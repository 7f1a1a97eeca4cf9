//! Multipath channel, path loss, and direction-scanned RSS.
//!
//! Delays are applied in the frequency domain as per-bin phase ramps
//! `exp(-j 2 pi f tau)`, which is exact for the bandlimited, circularly
//! extended waveforms produced by [`crate::waveform`]. That exactness is the
//! point: the receiver's sample grid is then the only quantization in the
//! ToA path. Semantics are circular, so tap delays must stay below the
//! waveform duration.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::waveform::{fft_forward, fft_inverse, Waveform};
use crate::SPEED_OF_LIGHT;

/// One propagation path: delay, complex linear gain, arrival direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTap {
    pub delay_s: f64,
    pub gain: Complex64,
    pub aoa_rad: f64,
}

impl ChannelTap {
    pub fn new(delay_s: f64, gain: Complex64) -> Self {
        Self {
            delay_s,
            gain,
            aoa_rad: 0.0,
        }
    }

    pub fn with_aoa(mut self, aoa_rad: f64) -> Self {
        self.aoa_rad = aoa_rad;
        self
    }
}

/// Uniform linear array used for the RSS scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_elements: usize,
    pub spacing_wavelengths: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            n_elements: 64,
            spacing_wavelengths: 0.5,
        }
    }
}

/// Transmit power and noise assumptions for link-level numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 1.0e8,
        }
    }
}

impl LinkBudget {
    /// Thermal noise floor over the full bandwidth, dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }
}

/// Path-loss model selection. Coefficients for the log-distance form come
/// from configuration; only free space is built in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PathLossModel {
    FreeSpace,
    LogDistance {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
        #[serde(rename = "C")]
        c: f64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("empty-taps: propagation requires at least one channel tap")]
    EmptyTaps,
    #[error("invalid-distance: path loss requires a positive distance, got {0}")]
    InvalidDistance(f64),
    #[error("invalid-frequency: path loss requires a positive frequency, got {0}")]
    InvalidFrequency(f64),
    #[error("empty-paths: RSS scan requires at least one path")]
    EmptyPaths,
}

/// Path loss in dB.
///
/// Free space: `20 log10(4 pi d f / c)`. Log-distance:
/// `A + B log10(d_m) + C log10(f_GHz)` with configured coefficients.
pub fn pathloss_db(model: PathLossModel, freq_hz: f64, dist_m: f64) -> Result<f64, ChannelError> {
    if !(dist_m > 0.0) {
        return Err(ChannelError::InvalidDistance(dist_m));
    }
    if !(freq_hz > 0.0) {
        return Err(ChannelError::InvalidFrequency(freq_hz));
    }
    Ok(match model {
        PathLossModel::FreeSpace => {
            20.0 * (4.0 * std::f64::consts::PI * dist_m * freq_hz / SPEED_OF_LIGHT).log10()
        }
        PathLossModel::LogDistance { a, b, c } => {
            a + b * dist_m.log10() + c * (freq_hz / 1e9).log10()
        }
    })
}

/// Complex channel frequency response at `freq_hz`:
/// `H(f) = sum_i gain_i exp(-j 2 pi f delay_i)`.
pub fn frequency_response(taps: &[ChannelTap], freq_hz: f64) -> Complex64 {
    taps.iter()
        .map(|t| t.gain * Complex64::from_polar(1.0, -TAU * freq_hz * t.delay_s))
        .sum()
}

/// Channel response with delays referenced to the earliest tap. This is the
/// selective-fading factor a receiver can know from the multipath delay
/// profile alone (excess delays and gains), without knowing the absolute
/// propagation delay it is trying to measure.
pub fn excess_response(taps: &[ChannelTap], freq_hz: f64) -> Complex64 {
    let t0 = taps
        .iter()
        .map(|t| t.delay_s)
        .fold(f64::INFINITY, f64::min);
    taps.iter()
        .map(|t| t.gain * Complex64::from_polar(1.0, -TAU * freq_hz * (t.delay_s - t0)))
        .sum()
}

/// Applies the tap set to a waveform and adds circular white Gaussian noise
/// at the requested per-sample SNR (`f64::INFINITY` for noiseless). The noise
/// stream is fully determined by `noise_seed`.
pub fn propagate(
    wave: &Waveform,
    taps: &[ChannelTap],
    snr_db: f64,
    noise_seed: u64,
) -> Result<Waveform, ChannelError> {
    if taps.is_empty() {
        return Err(ChannelError::EmptyTaps);
    }
    let n = wave.len();
    let fs = wave.fs_hz;
    let mut spec = wave.samples.clone();
    fft_forward(&mut spec);

    for (bin, v) in spec.iter_mut().enumerate() {
        // Two-sided bin frequencies: upper half maps to negative frequencies.
        let k = if bin <= n / 2 {
            bin as f64
        } else {
            bin as f64 - n as f64
        };
        let f = k * fs / n as f64;
        let mut h = Complex64::new(0.0, 0.0);
        for tap in taps {
            h += tap.gain * Complex64::from_polar(1.0, -TAU * f * tap.delay_s);
        }
        *v *= h;
    }
    fft_inverse(&mut spec);

    if snr_db.is_finite() {
        let signal_power = spec.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
        let sigma = (noise_power / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).expect("finite std dev");
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        for s in spec.iter_mut() {
            *s += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }

    Ok(Waveform {
        samples: spec,
        fs_hz: fs,
        carrier_hz: wave.carrier_hz,
    })
}

/// Steering vector of a ULA toward bearing `angle_rad` (broadside at 0).
fn steering(array: &ArrayConfig, angle_rad: f64) -> Vec<Complex64> {
    (0..array.n_elements)
        .map(|k| {
            Complex64::from_polar(
                1.0,
                TAU * array.spacing_wavelengths * k as f64 * angle_rad.sin(),
            )
        })
        .collect()
}

/// One scanned direction of [`rss_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssPoint {
    pub angle_rad: f64,
    pub rss_db: f64,
}

/// Output of [`rss_scan`]: the beam-scanned RSS curve plus the thermal noise
/// floor it should be read against.
#[derive(Debug, Clone, PartialEq)]
pub struct RssScan {
    pub points: Vec<RssPoint>,
    pub noise_floor_dbm: f64,
}

/// Scans unit-norm conjugate beamforming over `scan_angles`:
/// `RSS(psi) = tx_power_dbm + 20 log10 |w(psi)^H a|` where `a` superposes the
/// paths' steering vectors weighted by their complex gains.
pub fn rss_scan(
    paths: &[ChannelTap],
    array: &ArrayConfig,
    budget: &LinkBudget,
    scan_angles: &[f64],
) -> Result<RssScan, ChannelError> {
    if paths.is_empty() {
        return Err(ChannelError::EmptyPaths);
    }
    let mut aperture = vec![Complex64::new(0.0, 0.0); array.n_elements];
    for p in paths {
        for (s, a) in steering(array, p.aoa_rad).into_iter().zip(aperture.iter_mut()) {
            *a += p.gain * s;
        }
    }
    let norm = (array.n_elements as f64).sqrt();
    let points = scan_angles
        .iter()
        .map(|&psi| {
            let w = steering(array, psi);
            let response: Complex64 = w
                .iter()
                .zip(aperture.iter())
                .map(|(wk, ak)| wk.conj() * ak)
                .sum();
            RssPoint {
                angle_rad: psi,
                rss_db: budget.tx_power_dbm + 20.0 * (response.norm() / norm).log10(),
            }
        })
        .collect();
    Ok(RssScan {
        points,
        noise_floor_dbm: budget.noise_floor_dbm(),
    })
}
