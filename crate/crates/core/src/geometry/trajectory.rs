use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Camera, GeometryError};
use crate::ViewId;

/// One entry of a trajectory file:
/// `{"id", "fx", "fy", "cx", "cy", "width", "height", "R": [9], "t": [3]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCamera {
    pub id: ViewId,
    #[serde(flatten)]
    pub camera: Camera,
}

/// Parses a trajectory (a JSON array of cameras) and checks ids are unique.
pub fn parse_trajectory(json: &str) -> Result<Vec<NamedCamera>, GeometryError> {
    let cams: Vec<NamedCamera> = serde_json::from_str(json)?;
    let mut seen = HashSet::new();
    for c in &cams {
        if !seen.insert(&c.id) {
            return Err(GeometryError::DuplicateId(c.id.to_string()));
        }
    }
    Ok(cams)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<NamedCamera>, GeometryError> {
    parse_trajectory(&std::fs::read_to_string(path)?)
}

pub fn write_trajectory(cameras: &[NamedCamera]) -> String {
    serde_json::to_string_pretty(cameras).expect("cameras serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"[{"id":"v0","fx":100,"fy":100,"cx":32,"cy":32,"width":64,"height":64,
        "R":[1,0,0,0,1,0,0,0,1],"t":[0.5,0,0]}]"#;

    #[test]
    fn parses_and_round_trips() {
        let cams = parse_trajectory(ONE).unwrap();
        assert_eq!(cams.len(), 1);
        assert_eq!(cams[0].id.as_str(), "v0");
        assert_eq!(cams[0].camera.center().x, -0.5);
        let again = parse_trajectory(&write_trajectory(&cams)).unwrap();
        assert_eq!(cams, again);
    }

    #[test]
    fn rejects_duplicates_and_bad_rotation() {
        let two = format!("[{},{}]", &ONE[1..ONE.len() - 1], &ONE[1..ONE.len() - 1]);
        assert!(matches!(parse_trajectory(&two), Err(GeometryError::DuplicateId(_))));
        let bad = ONE.replace("\"R\":[1,0,0", "\"R\":[2,0,0");
        let err = parse_trajectory(&bad).unwrap_err();
        assert!(err.to_string().contains("rotation"), "{err}");
    }
}
