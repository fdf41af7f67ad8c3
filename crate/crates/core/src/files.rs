//! Shared file output helpers: atomic writes and the value-grid / PGM raster
//! formats used by burn-probability maps and attention maps.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `bytes` to `path` atomically (temp file in the same directory, then
/// rename), so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Plain-text grid of decimals with the same header as landscape files:
/// `rows R`, `cols C`, then R rows of C values.
pub fn write_value_grid(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let mut out = String::with_capacity(values.len() * 9 + 32);
    out.push_str(&format!("rows {}\ncols {}\n", rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{:.6}", values[r * cols + c]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// 8-bit binary PGM; each value is clamped to [0,1] and scaled to 0..=255.
pub fn write_pgm(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let mut bytes = format!("P5\n{} {}\n255\n", cols, rows).into_bytes();
    bytes.extend(
        values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    write_atomic(path, &bytes)
}
