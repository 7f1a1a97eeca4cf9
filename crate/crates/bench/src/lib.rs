//! Input builders shared by the criterion benches.

use num_complex::Complex64;

use v2xpos_core::channel::{propagate, ChannelTap};
use v2xpos_core::scenario::{
    double_bounce_path, enumerate_paths, random_scenario, reference_delays, single_bounce_path,
    PathObservation, Point2D, Region, Scenario, ScenarioParams,
};
use v2xpos_core::waveform::{gen_ofdm_reference, OfdmConfig, Waveform};
use v2xpos_core::SPEED_OF_LIGHT;

pub fn ofdm_config(oversample: usize) -> OfdmConfig {
    OfdmConfig::default().with_oversample(oversample)
}

pub fn reference_waveform(oversample: usize) -> Waveform {
    gen_ofdm_reference(&ofdm_config(oversample), 1).expect("valid config")
}

pub fn delayed_rx(reference: &Waveform, range_m: f64, snr_db: f64) -> Waveform {
    propagate(
        reference,
        &[ChannelTap::new(
            range_m / SPEED_OF_LIGHT,
            Complex64::new(1.0, 0.0),
        )],
        snr_db,
        7,
    )
    .expect("propagation")
}

pub fn oracle_scenario(n_scatterers: usize) -> (Scenario, Vec<PathObservation>) {
    let params = ScenarioParams {
        n_scatterers,
        region: Region::new(-250.0, 250.0, -250.0, 250.0),
        min_separation_m: 10.0,
        anchor: Point2D::ORIGIN,
    };
    let scenario = random_scenario(42, &params).expect("feasible packing");
    let paths = enumerate_paths(&scenario, 1).expect("oracle paths");
    (scenario, paths)
}

/// 3 single-bounce + 2 double-bounce paths with a scatterer map.
pub fn mixed_scenario() -> (Scenario, Vec<PathObservation>) {
    let params = ScenarioParams {
        n_scatterers: 5,
        region: Region::new(-250.0, 250.0, -250.0, 250.0),
        min_separation_m: 10.0,
        anchor: Point2D::ORIGIN,
    };
    let scenario = random_scenario(1234, &params).expect("feasible packing");
    let paths = vec![
        single_bounce_path(&scenario, 0).unwrap(),
        single_bounce_path(&scenario, 1).unwrap(),
        single_bounce_path(&scenario, 2).unwrap(),
        double_bounce_path(&scenario, 3, 4).unwrap(),
        double_bounce_path(&scenario, 1, 3).unwrap(),
    ];
    let paths = reference_delays(paths, scenario.c);
    (scenario, paths)
}
