//! `v2xpos` — command-line front end for the V2X positioning toolkit.
//!
//! Exit codes: 0 success, 1 domain error (the error name goes to stderr),
//! 2 usage error. Every command's output is a pure function of its config
//! file and seed.

// `!(x > y)` style guards stay as written: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod plot;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use v2xpos_core::channel::{pathloss_db, rss_scan, ChannelTap, PathLossModel};
use v2xpos_core::files::{parse_point, FixFile, ObservationsFile, ScenarioFile};
use v2xpos_core::harness::{
    hvp_rows_to_csv, ranging_rows_to_csv, run_hvp_mc, run_ranging_sweep, HvpMcConfig,
    HvpResultRow, ResultRow, SweepConfig,
};
use v2xpos_core::hvp::{
    classify_and_solve, solve_linear, solve_trajectory, ClassifyConfig, SolveOptions,
    TrajectorySearch,
};
use v2xpos_core::scenario::{enumerate_paths, random_scenario, Region, ScenarioParams};
use v2xpos_core::{ArrayConfig, LinkBudget};

#[derive(Parser)]
#[command(
    name = "v2xpos",
    version,
    about = "V2X positioning toolkit: waveform ranging sweeps and hidden-vehicle solving"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Linear,
    Trajectory,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random scenario (and optionally its oracle paths).
    ScenarioGen {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        n_scatterers: usize,
        /// Sampling region as "xmin,xmax,ymin,ymax" meters.
        #[arg(long, default_value = "-200,200,-200,200")]
        region: String,
        #[arg(long, default_value_t = 10.0)]
        min_sep: f64,
        /// Anchor position "x,y" meters.
        #[arg(long, default_value = "0,0")]
        anchor: String,
        /// Scenario JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the oracle observation file here.
        #[arg(long)]
        obs_out: Option<PathBuf>,
        /// Bounces in the oracle enumeration (1 or 2).
        #[arg(long, default_value_t = 1)]
        max_bounces: u8,
    },
    /// Monte Carlo ranging comparison over (estimator, rate, SNR) cells.
    RangingSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Write an SVG of MAE vs SNR next to the data.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Solve a hidden-vehicle fix from an observation file.
    HvpSolve {
        #[arg(long)]
        obs: PathBuf,
        /// Anchor position "x,y" meters.
        #[arg(long)]
        anchor: String,
        #[arg(long, value_enum, default_value_t = SolveMethod::Linear)]
        method: SolveMethod,
        /// Trajectory search bracket lower edge, meters.
        #[arg(long, default_value_t = 1.0)]
        d1_min: f64,
        /// Trajectory search bracket upper edge, meters.
        #[arg(long, default_value_t = 5000.0)]
        d1_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify multi-bounce paths and solve from the credible subsets.
    Classify {
        #[arg(long)]
        obs: PathBuf,
        /// Anchor position "x,y" meters.
        #[arg(long)]
        anchor: String,
        /// Scenario file supplying map information (obstacles and mapped
        /// reflector positions).
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        cluster_eps: f64,
        #[arg(long, default_value_t = 1)]
        min_cluster: usize,
        #[arg(long, default_value_t = 0.1)]
        residual_tol: f64,
        #[arg(long, default_value_t = 1.0)]
        map_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo campaign of the hidden-vehicle solver under noise.
    HvpMc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Write an SVG of RMSE vs delay noise next to the data.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Beam-scanned RSS across arrival directions.
    RssScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

/// Domain-level failure: message to stderr, exit 1.
struct CliError(String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_region(text: &str) -> Result<Region, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError(format!("bad region {text:?}: {e}")))?;
    if parts.len() != 4 {
        return Err(CliError(format!(
            "region must be \"xmin,xmax,ymin,ymax\", got {text:?}"
        )));
    }
    Ok(Region::new(parts[0], parts[1], parts[2], parts[3]))
}

/// All config files carry a top-level `"schema": 1`.
#[derive(Deserialize)]
struct WithSchema<T> {
    schema: u32,
    #[serde(flatten)]
    inner: T,
}

fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_file(path)?;
    let wrapped: WithSchema<T> = serde_json::from_str(&text)
        .map_err(|e| CliError(format!("malformed-config {}: {e}", path.display())))?;
    if wrapped.schema != v2xpos_core::files::SCHEMA_VERSION {
        return Err(CliError(format!(
            "unsupported-schema: {} has version {}, this build reads {}",
            path.display(),
            wrapped.schema,
            v2xpos_core::files::SCHEMA_VERSION
        )));
    }
    Ok(wrapped.inner)
}

/// RSS scan configuration file.
#[derive(Deserialize)]
struct RssScanConfig {
    #[serde(default)]
    array: ArrayConfig,
    #[serde(default)]
    budget: LinkBudget,
    pathloss: PathLossModel,
    freq_hz: f64,
    paths: Vec<RssPathSpec>,
    scan_deg: ScanGrid,
}

#[derive(Deserialize)]
struct RssPathSpec {
    aoa_deg: f64,
    dist_m: f64,
    #[serde(default)]
    extra_loss_db: f64,
    #[serde(default)]
    phase_deg: f64,
}

#[derive(Deserialize)]
struct ScanGrid {
    start: f64,
    stop: f64,
    step: f64,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::ScenarioGen {
            seed,
            n_scatterers,
            region,
            min_sep,
            anchor,
            out,
            obs_out,
            max_bounces,
        } => {
            let params = ScenarioParams {
                n_scatterers,
                region: parse_region(&region)?,
                min_separation_m: min_sep,
                anchor: parse_point(&anchor)?,
            };
            let scenario = random_scenario(seed, &params)?;
            write_output(Some(&out), &ScenarioFile::new(scenario.clone()).to_json())?;
            if let Some(obs_path) = obs_out {
                let paths = enumerate_paths(&scenario, max_bounces)?;
                write_output(Some(&obs_path), &ObservationsFile::new(&paths).to_json())?;
            }
            Ok(())
        }

        Command::RangingSweep {
            config,
            out,
            seed,
            format,
            plot,
        } => {
            let mut cfg: SweepConfig = load_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let rows = run_ranging_sweep(&cfg)?;
            let rendered = match format {
                OutputFormat::Csv => ranging_rows_to_csv(&rows),
                OutputFormat::Json => to_pretty_json(&rows)?,
            };
            write_output(out.as_deref(), &rendered)?;
            if let Some(svg_path) = plot {
                write_output(Some(&svg_path), &ranging_plot(&rows))?;
            }
            Ok(())
        }

        Command::HvpSolve {
            obs,
            anchor,
            method,
            d1_min,
            d1_max,
            out,
        } => {
            let paths = ObservationsFile::from_json(&read_file(&obs)?)?;
            let anchor = parse_point(&anchor)?;
            let opts = SolveOptions::default();
            let fix = match method {
                SolveMethod::Linear => solve_linear(&paths, anchor, &opts)?,
                SolveMethod::Trajectory => {
                    let search = TrajectorySearch {
                        d1_min_m: d1_min,
                        d1_max_m: d1_max,
                        ..TrajectorySearch::default()
                    };
                    solve_trajectory(&paths, anchor, &search, &opts)?
                }
            };
            let mut json = FixFile::from(&fix).to_json();
            json.push('\n');
            write_output(out.as_deref(), &json)
        }

        Command::Classify {
            obs,
            anchor,
            map,
            cluster_eps,
            min_cluster,
            residual_tol,
            map_tol,
            out,
        } => {
            let paths = ObservationsFile::from_json(&read_file(&obs)?)?;
            let anchor = parse_point(&anchor)?;
            let cfg = ClassifyConfig {
                cluster_radius_m: cluster_eps,
                min_cluster_size: min_cluster,
                scatterer_residual_m: residual_tol,
                map_tolerance_m: map_tol,
                solve: SolveOptions::default(),
            };
            let map_segments = match map {
                Some(path) => Some(ScenarioFile::from_json(&read_file(&path)?)?.scatterer_map()),
                None => None,
            };
            let fix = classify_and_solve(&paths, anchor, &cfg, map_segments.as_deref())?;
            let mut json = FixFile::from(&fix).to_json();
            json.push('\n');
            write_output(out.as_deref(), &json)
        }

        Command::HvpMc {
            config,
            out,
            seed,
            format,
            plot,
        } => {
            let mut cfg: HvpMcConfig = load_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let rows = run_hvp_mc(&cfg)?;
            let rendered = match format {
                OutputFormat::Csv => hvp_rows_to_csv(&rows),
                OutputFormat::Json => to_pretty_json(&rows)?,
            };
            write_output(out.as_deref(), &rendered)?;
            if let Some(svg_path) = plot {
                write_output(Some(&svg_path), &hvp_plot(&rows))?;
            }
            Ok(())
        }

        Command::RssScan {
            config,
            out,
            format,
            plot,
        } => {
            let cfg: RssScanConfig = load_config(&config)?;
            if cfg.scan_deg.step <= 0.0 || cfg.scan_deg.stop < cfg.scan_deg.start {
                return Err(CliError("invalid-scan-grid".into()));
            }
            let mut taps = Vec::new();
            for p in &cfg.paths {
                let loss_db = pathloss_db(cfg.pathloss, cfg.freq_hz, p.dist_m)? + p.extra_loss_db;
                let gain = num_complex::Complex64::from_polar(
                    10f64.powf(-loss_db / 20.0),
                    p.phase_deg.to_radians(),
                );
                taps.push(
                    ChannelTap::new(p.dist_m / v2xpos_core::SPEED_OF_LIGHT, gain)
                        .with_aoa(p.aoa_deg.to_radians()),
                );
            }
            let mut angles = Vec::new();
            let mut a = cfg.scan_deg.start;
            while a <= cfg.scan_deg.stop + 1e-12 {
                angles.push(a.to_radians());
                a += cfg.scan_deg.step;
            }
            let scan = rss_scan(&taps, &cfg.array, &cfg.budget, &angles)?;
            eprintln!("noise floor: {} dBm", scan.noise_floor_dbm);
            let rendered = match format {
                OutputFormat::Csv => {
                    let mut csv = String::from("angle_deg,rss_db\n");
                    for p in &scan.points {
                        csv.push_str(&format!("{},{}\n", p.angle_rad.to_degrees(), p.rss_db));
                    }
                    csv
                }
                OutputFormat::Json => {
                    #[derive(serde::Serialize)]
                    struct Row {
                        angle_deg: f64,
                        rss_db: f64,
                    }
                    let rows: Vec<Row> = scan
                        .points
                        .iter()
                        .map(|p| Row {
                            angle_deg: p.angle_rad.to_degrees(),
                            rss_db: p.rss_db,
                        })
                        .collect();
                    to_pretty_json(&rows)?
                }
            };
            write_output(out.as_deref(), &rendered)?;
            if let Some(svg_path) = plot {
                let series = vec![plot::Series {
                    label: "rss".into(),
                    points: scan
                        .points
                        .iter()
                        .map(|p| (p.angle_rad.to_degrees(), p.rss_db))
                        .collect(),
                }];
                let svg = plot::line_plot(
                    "RSS vs arrival direction",
                    "angle (deg)",
                    "RSS (dB)",
                    &series,
                    false,
                );
                write_output(Some(&svg_path), &svg)?;
            }
            Ok(())
        }
    }
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn ranging_plot(rows: &[ResultRow]) -> String {
    // One series per (estimator, fs); noiseless cells have no SNR abscissa.
    let mut series: Vec<plot::Series> = Vec::new();
    for r in rows {
        if !r.snr_db.is_finite() {
            continue;
        }
        let label = format!("{} @ {:.2} MHz", r.estimator, r.fs_hz / 1e6);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((r.snr_db, r.mae_m)),
            None => series.push(plot::Series {
                label,
                points: vec![(r.snr_db, r.mae_m)],
            }),
        }
    }
    plot::line_plot(
        "Ranging error vs SNR",
        "SNR (dB)",
        "MAE (m), log10",
        &series,
        true,
    )
}

fn hvp_plot(rows: &[HvpResultRow]) -> String {
    let mut series: Vec<plot::Series> = Vec::new();
    for r in rows {
        let label = format!("sigma_angle {:.1e} rad", r.sigma_angle_rad);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((r.sigma_delay_s, r.rmse_m)),
            None => series.push(plot::Series {
                label,
                points: vec![(r.sigma_delay_s, r.rmse_m)],
            }),
        }
    }
    plot::line_plot(
        "Position RMSE vs delay noise",
        "delay sigma (s)",
        "RMSE (m)",
        &series,
        false,
    )
}
