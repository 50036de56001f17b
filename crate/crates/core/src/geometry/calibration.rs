use std::fmt::Write as _;
use std::path::Path;

use super::{Correspondence, GeometryError};

/// Parses `px py wx wy` lines; blank lines and `#` comments are skipped.
pub fn read_correspondences(path: &Path) -> Result<Vec<Correspondence>, GeometryError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: name.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| GeometryError::Parse {
            path: name.clone(),
            line: i + 1,
            reason,
        };
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| parse_err(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != 4 {
            return Err(parse_err(format!(
                "expected 4 numbers, found {}",
                vals.len()
            )));
        }
        out.push(Correspondence {
            pixel: [vals[0], vals[1]],
            world: [vals[2], vals[3]],
        });
    }
    Ok(out)
}

pub fn write_correspondences(path: &Path, pairs: &[Correspondence]) -> Result<(), GeometryError> {
    let mut text = String::from("# px py wx wy (world in meters)\n");
    for c in pairs {
        writeln!(
            text,
            "{} {} {} {}",
            c.pixel[0], c.pixel[1], c.world[0], c.world[1]
        )
        .unwrap();
    }
    std::fs::write(path, text).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })
}
