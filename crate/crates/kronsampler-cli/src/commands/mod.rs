pub mod bench;
pub mod bound;
pub mod eval;
pub mod gen;
pub mod image;
pub mod select;

use std::path::Path;

use kronsampler::fp::FactorMatrix;
use kronsampler::{io, Error, Result};

/// Loads a comma-separated list of matrix CSV paths as factor matrices.
pub fn load_factors(spec: &str) -> Result<Vec<FactorMatrix>> {
    let paths: Vec<&str> = spec.split(',').filter(|s| !s.is_empty()).collect();
    if paths.is_empty() {
        return Err(Error::InvalidInput("no factor files given".into()));
    }
    paths
        .iter()
        .map(|p| io::read_matrix_csv(Path::new(p)).map(FactorMatrix::new))
        .collect()
}

/// Parses one `N,K` shape flag.
pub fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidInput(format!("shape '{s}' must be N,K")));
    }
    let n = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad shape dimension '{}'", parts[0])))?;
    let k = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad shape dimension '{}'", parts[1])))?;
    Ok((n, k))
}

/// Renders mode shapes as `50x10;60x20`.
pub fn shapes_label(shapes: &[(usize, usize)]) -> String {
    shapes
        .iter()
        .map(|(n, k)| format!("{n}x{k}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes text to a file, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
