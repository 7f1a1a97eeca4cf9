//! On-disk JSON schemas.
//!
//! Every schema carries a top-level `"schema": 1` version field. Angles are
//! degrees and delays nanoseconds in files (human-friendly); the in-memory
//! types use radians and seconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hvp::{PathLabel, PositionFix};
use crate::scenario::{PathObservation, Point2D, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("unsupported-schema: got version {got}, this build reads {supported}")]
    UnsupportedSchema { got: u32, supported: u32 },
    #[error("malformed-file: {0}")]
    Malformed(String),
}

fn check_schema(got: u32) -> Result<(), FileError> {
    if got != SCHEMA_VERSION {
        return Err(FileError::UnsupportedSchema {
            got,
            supported: SCHEMA_VERSION,
        });
    }
    Ok(())
}

/// Scenario file: `{"schema": 1, "anchor": .., "vehicle": .., "scatterers":
/// [..], "obstacles": [..], "c": ..}`, units meters and meters/second.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema: u32,
    #[serde(flatten)]
    pub scenario: Scenario,
}

impl ScenarioFile {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            scenario,
        }
    }

    pub fn from_json(text: &str) -> Result<Scenario, FileError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| FileError::Malformed(e.to_string()))?;
        check_schema(file.schema)?;
        file.scenario
            .validate()
            .map_err(|e| FileError::Malformed(e.to_string()))?;
        Ok(file.scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// One observed path as stored on disk.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathRecord {
    pub aod_deg: f64,
    pub aoa_deg: f64,
    pub rel_delay_ns: f64,
}

impl From<&PathObservation> for PathRecord {
    fn from(p: &PathObservation) -> Self {
        Self {
            aod_deg: p.aod_rad.to_degrees(),
            aoa_deg: p.aoa_rad.to_degrees(),
            rel_delay_ns: p.rel_delay_s * 1e9,
        }
    }
}

impl From<&PathRecord> for PathObservation {
    fn from(r: &PathRecord) -> Self {
        PathObservation::new(
            r.aod_deg.to_radians(),
            r.aoa_deg.to_radians(),
            r.rel_delay_ns * 1e-9,
        )
    }
}

/// Observations file. The canonical form is an object with a schema field;
/// a bare JSON list of path records is accepted on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationsFile {
    pub schema: u32,
    pub paths: Vec<PathRecord>,
}

impl ObservationsFile {
    pub fn new(paths: &[PathObservation]) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            paths: paths.iter().map(PathRecord::from).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Vec<PathObservation>, FileError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            File(ObservationsFile),
            Bare(Vec<PathRecord>),
        }
        let parsed: Either =
            serde_json::from_str(text).map_err(|e| FileError::Malformed(e.to_string()))?;
        let records = match parsed {
            Either::File(f) => {
                check_schema(f.schema)?;
                f.paths
            }
            Either::Bare(records) => records,
        };
        Ok(records.iter().map(PathObservation::from).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("observations serialize")
    }
}

/// Fix output: `{"schema": 1, "x": .., "y": .., "d1": .., "residual": ..,
/// "condition": .., "feasible": .., "labels": [..]}`. `condition` is null
/// for solvers that assemble no linear system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixFile {
    pub schema: u32,
    pub x: f64,
    pub y: f64,
    pub d1: f64,
    pub residual: f64,
    pub condition: Option<f64>,
    pub feasible: bool,
    pub labels: Vec<PathLabel>,
}

impl From<&PositionFix> for FixFile {
    fn from(fix: &PositionFix) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            x: fix.position.x,
            y: fix.position.y,
            d1: fix.d1_m,
            residual: fix.residual_m,
            condition: if fix.condition.is_finite() {
                Some(fix.condition)
            } else {
                None
            },
            feasible: fix.feasible,
            labels: fix.labels.clone(),
        }
    }
}

impl FixFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fix serializes")
    }
}

/// Parses `"x,y"` into a point (CLI anchor flags).
pub fn parse_point(text: &str) -> Result<Point2D, FileError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(FileError::Malformed(format!(
            "expected \"x,y\", got {text:?}"
        )));
    }
    let x: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|e| FileError::Malformed(format!("bad x in {text:?}: {e}")))?;
    let y: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|e| FileError::Malformed(format!("bad y in {text:?}: {e}")))?;
    Ok(Point2D::new(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scenario_round_trip() {
        let s = Scenario::new(
            Point2D::new(0.0, 0.0),
            Point2D::new(100.0, 0.0),
            vec![Point2D::new(50.0, 50.0)],
        )
        .unwrap();
        let json = ScenarioFile::new(s.clone()).to_json();
        assert!(json.contains("\"schema\": 1"));
        let back = ScenarioFile::from_json(&json).unwrap();
        assert_eq!(back.anchor, s.anchor);
        assert_eq!(back.vehicle, s.vehicle);
        assert_eq!(back.scatterers, s.scatterers);
        assert_eq!(back.c, s.c);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let json = r#"{"schema": 2, "anchor": {"x":0,"y":0}, "vehicle": {"x":1,"y":0},
                       "scatterers": [], "c": 3e8}"#;
        assert!(matches!(
            ScenarioFile::from_json(json),
            Err(FileError::UnsupportedSchema { got: 2, .. })
        ));
    }

    #[test]
    fn observations_accept_object_and_bare_list() {
        let object = r#"{"schema":1,"paths":[{"aod_deg":45.0,"aoa_deg":135.0,"rel_delay_ns":0.0}]}"#;
        let bare = r#"[{"aod_deg":45.0,"aoa_deg":135.0,"rel_delay_ns":0.0}]"#;
        for text in [object, bare] {
            let obs = ObservationsFile::from_json(text).unwrap();
            assert_eq!(obs.len(), 1);
            assert_abs_diff_eq!(obs[0].aod_rad.to_degrees(), 45.0, epsilon = 1e-12);
            assert_abs_diff_eq!(obs[0].rel_delay_s, 0.0);
        }
    }

    #[test]
    fn observation_units_convert() {
        let p = PathObservation::new(0.5, -1.0, 83.2e-9);
        let json = ObservationsFile::new(&[p]).to_json();
        let back = ObservationsFile::from_json(&json).unwrap();
        assert_abs_diff_eq!(back[0].aod_rad, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(back[0].aoa_rad, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back[0].rel_delay_s, 83.2e-9, epsilon = 1e-21);
    }

    #[test]
    fn fix_file_maps_nan_condition_to_null() {
        let fix = PositionFix {
            position: Point2D::new(1.0, 2.0),
            d1_m: 10.0,
            residual_m: 0.0,
            condition: f64::NAN,
            feasible: true,
            labels: vec![PathLabel::SingleBounce],
        };
        let json = FixFile::from(&fix).to_json();
        assert!(json.contains("\"condition\": null"));
        assert!(json.contains("single_bounce"));
    }

    #[test]
    fn parse_point_accepts_spaces_and_rejects_garbage() {
        assert_eq!(parse_point("1.5, -2").unwrap(), Point2D::new(1.5, -2.0));
        assert!(parse_point("1.5").is_err());
        assert!(parse_point("a,b").is_err());
    }
}
