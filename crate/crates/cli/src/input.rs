use std::io::Read;
use std::path::Path;

use gaussgeo::io::{PairRecord, PointRecord, TangentRecord};
use gaussgeo::{GaussianPoint, TangentN};
use serde::Deserialize;

use crate::CliError;

/// Reads a file, or stdin for `-`.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    if path.as_os_str() == "-" {
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| CliError::Input(format!("reading stdin: {e}")))?;
    } else {
        buf = std::fs::read(path).map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?;
    }
    Ok(buf)
}

fn parse<'a, T: Deserialize<'a>>(bytes: &'a [u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Input(format!("malformed JSON: {e}")))
}

fn input_err(e: gaussgeo::Error) -> CliError {
    CliError::Input(e.to_string())
}

/// A tangent, either bare or wrapped with an optional base point and grid.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TangentInputRaw {
    Wrapped {
        tangent: TangentRecord,
        #[serde(default)]
        point: Option<PointRecord>,
        #[serde(default, alias = "tGrid")]
        t_grid: Option<Vec<f64>>,
    },
    Bare(TangentRecord),
}

#[derive(Debug)]
pub struct TangentInput {
    pub tangent: TangentN,
    pub point: Option<GaussianPoint>,
    pub t_grid: Option<Vec<f64>>,
}

pub fn tangent_input(bytes: &[u8]) -> Result<TangentInput, CliError> {
    let (tangent, point, t_grid) = match parse::<TangentInputRaw>(bytes)? {
        TangentInputRaw::Wrapped { tangent, point, t_grid } => (tangent, point, t_grid),
        TangentInputRaw::Bare(t) => (t, None, None),
    };
    let tangent = tangent.to_tangent().map_err(input_err)?;
    let point = point.map(|p| p.to_point()).transpose().map_err(input_err)?;
    if let Some(p) = &point {
        if p.dim() != tangent.dim() {
            return Err(CliError::Input(format!(
                "point has n = {} but tangent has n = {}",
                p.dim(),
                tangent.dim()
            )));
        }
    }
    if let Some(ts) = &t_grid {
        if ts.is_empty() || ts.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Input("t_grid must be a non-empty list of finite numbers".into()));
        }
    }
    Ok(TangentInput { tangent, point, t_grid })
}

pub fn pair_input(bytes: &[u8]) -> Result<(GaussianPoint, GaussianPoint), CliError> {
    parse::<PairRecord>(bytes)?.to_points().map_err(input_err)
}

pub fn point_input(bytes: &[u8]) -> Result<GaussianPoint, CliError> {
    parse::<PointRecord>(bytes)?.to_point().map_err(input_err)
}
