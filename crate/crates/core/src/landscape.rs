//! Grid data model: fuel catalogs, landscapes, weather scenarios, ignition
//! zones, their file formats, and nearest-neighbor shrinking.
//!
//! File formats (all plain text, human-diffable):
//! - `.grid`:  `rows R` / `cols C` / R lines of C whitespace-separated codes
//! - `.fuels`: one `code name spread_prob` triple per line
//! - `.csv`:   weather scenarios, header `id,wind_dir_deg,wind_speed`

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::files::write_atomic;
use crate::rng::Rng;

/// Fuel code reserved for non-fuel / firebreak cells. Never spreads fire.
pub const NON_FUEL: u16 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct FuelType {
    pub code: u16,
    pub name: String,
    pub spread_prob: f64,
}

/// The set of fuel codes a landscape may contain, each with a base spread
/// probability. Code 0 is always present and non-flammable.
#[derive(Clone, Debug, PartialEq)]
pub struct FuelCatalog {
    types: Vec<FuelType>, // sorted by code
}

impl FuelCatalog {
    pub fn new(mut types: Vec<FuelType>) -> Result<Self> {
        types.sort_by_key(|t| t.code);
        if types.windows(2).any(|w| w[0].code == w[1].code) {
            return Err(Error::argument("duplicate fuel code in catalog"));
        }
        match types.first() {
            Some(t) if t.code == NON_FUEL => {
                if t.spread_prob != 0.0 {
                    return Err(Error::argument("fuel code 0 must have spread_prob 0"));
                }
            }
            _ => return Err(Error::argument("catalog must define fuel code 0 (non-fuel)")),
        }
        for t in &types {
            if !(0.0..=1.0).contains(&t.spread_prob) {
                return Err(Error::argument(format!(
                    "spread_prob {} for fuel {} outside [0,1]",
                    t.spread_prob, t.code
                )));
            }
        }
        Ok(FuelCatalog { types })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[FuelType] {
        &self.types
    }

    pub fn contains(&self, code: u16) -> bool {
        self.types.binary_search_by_key(&code, |t| t.code).is_ok()
    }

    pub fn spread_prob(&self, code: u16) -> Option<f64> {
        self.types
            .binary_search_by_key(&code, |t| t.code)
            .ok()
            .map(|i| self.types[i].spread_prob)
    }

    /// Position of `code` in the sorted catalog; the state-encoding channel.
    pub fn channel_of(&self, code: u16) -> Option<usize> {
        self.types.binary_search_by_key(&code, |t| t.code).ok()
    }

    /// Parses a `.fuels` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut types = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let code = parts
                .next()
                .ok_or_else(|| Error::parse(path, line_no, "missing fuel code"))?
                .parse::<u16>()
                .map_err(|_| Error::parse(path, line_no, "fuel code is not an integer"))?;
            let name = parts
                .next()
                .ok_or_else(|| Error::parse(path, line_no, "missing fuel name"))?
                .to_string();
            let prob = parts
                .next()
                .ok_or_else(|| Error::parse(path, line_no, "missing spread probability"))?
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, "spread probability is not a number"))?;
            if parts.next().is_some() {
                return Err(Error::parse(path, line_no, "trailing tokens on fuel line"));
            }
            types.push(FuelType {
                code,
                name,
                spread_prob: prob,
            });
        }
        FuelCatalog::new(types).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::parse(path, 0, msg),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.types {
            out.push_str(&format!("{} {} {}\n", t.code, t.name, t.spread_prob));
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Rectangular grid of fuel codes in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    rows: usize,
    cols: usize,
    cells: Vec<u16>,
    catalog: FuelCatalog,
}

impl Landscape {
    pub fn new(rows: usize, cols: usize, cells: Vec<u16>, catalog: FuelCatalog) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::argument(format!(
                "landscape must be at least 2x2, got {}x{}",
                rows, cols
            )));
        }
        if cells.len() != rows * cols {
            return Err(Error::argument(format!(
                "cell count {} does not match {}x{}",
                cells.len(),
                rows,
                cols
            )));
        }
        if let Some(&bad) = cells.iter().find(|c| !catalog.contains(**c)) {
            return Err(Error::argument(format!("fuel code {} not in catalog", bad)));
        }
        Ok(Landscape {
            rows,
            cols,
            cells,
            catalog,
        })
    }

    /// Uniform grid of one fuel code.
    pub fn filled(rows: usize, cols: usize, code: u16, catalog: FuelCatalog) -> Result<Self> {
        Landscape::new(rows, cols, vec![code; rows * cols], catalog)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[u16] {
        &self.cells
    }

    pub fn catalog(&self) -> &FuelCatalog {
        &self.catalog
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.cols, idx % self.cols)
    }

    #[inline]
    pub fn code_at(&self, idx: usize) -> u16 {
        self.cells[idx]
    }

    #[inline]
    pub fn is_flammable(&self, idx: usize) -> bool {
        self.cells[idx] != NON_FUEL
    }

    #[inline]
    pub fn spread_prob_at(&self, idx: usize) -> f64 {
        self.catalog.spread_prob(self.cells[idx]).unwrap_or(0.0)
    }

    /// Converts a cell to non-fuel (firebreak placement).
    pub fn set_non_fuel(&mut self, idx: usize) {
        self.cells[idx] = NON_FUEL;
    }

    pub fn count_flammable(&self) -> usize {
        self.cells.iter().filter(|&&c| c != NON_FUEL).count()
    }

    /// FNV-1a digest of dims and cell codes; ties data files to the
    /// landscape they were generated from.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        };
        eat(self.rows as u64);
        eat(self.cols as u64);
        for &c in &self.cells {
            eat(c as u64);
        }
        h
    }

    /// Parses a `.grid` file against the given catalog.
    pub fn load(path: &Path, catalog: FuelCatalog) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();

        let rows = parse_header_line(path, lines.next(), "rows")?;
        let cols = parse_header_line(path, lines.next(), "cols")?;

        let mut cells = Vec::with_capacity(rows * cols);
        let mut data_rows = 0usize;
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut row_len = 0usize;
            for tok in line.split_whitespace() {
                let code = tok.parse::<u16>().map_err(|_| {
                    Error::parse(path, line_no, format!("non-integer cell value '{}'", tok))
                })?;
                if !catalog.contains(code) {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("unknown fuel code {}", code),
                    ));
                }
                cells.push(code);
                row_len += 1;
            }
            if row_len != cols {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("row length mismatch: expected {} values, got {}", cols, row_len),
                ));
            }
            data_rows += 1;
        }
        if data_rows != rows {
            return Err(Error::parse(
                path,
                0,
                format!("row count mismatch: header says {}, file has {}", rows, data_rows),
            ));
        }
        Landscape::new(rows, cols, cells, catalog)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("rows {}\ncols {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    out.push(' ');
                }
                out.push_str(&self.cells[r * self.cols + c].to_string());
            }
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

fn parse_header_line(
    path: &Path,
    line: Option<(usize, &str)>,
    key: &str,
) -> Result<usize> {
    let (i, line) = line.ok_or_else(|| Error::parse(path, 0, format!("missing '{}' header", key)))?;
    let line_no = i + 1;
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some(k) if k == key => {}
        _ => {
            return Err(Error::parse(
                path,
                line_no,
                format!("malformed header: expected '{} <count>'", key),
            ))
        }
    }
    let value = parts
        .next()
        .ok_or_else(|| Error::parse(path, line_no, format!("missing {} count", key)))?
        .parse::<usize>()
        .map_err(|_| Error::parse(path, line_no, format!("{} count is not an integer", key)))?;
    if parts.next().is_some() {
        return Err(Error::parse(path, line_no, "trailing tokens in header"));
    }
    Ok(value)
}

/// Wind-only weather: the direction the wind blows toward (degrees, 0 = north,
/// clockwise) and a nonnegative speed in model units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeatherScenario {
    pub wind_dir_deg: f64,
    pub wind_speed: f64,
}

impl WeatherScenario {
    pub fn new(wind_dir_deg: f64, wind_speed: f64) -> Result<Self> {
        if !wind_dir_deg.is_finite() || !wind_speed.is_finite() {
            return Err(Error::argument("weather values must be finite"));
        }
        if wind_speed < 0.0 {
            return Err(Error::argument("wind_speed must be nonnegative"));
        }
        Ok(WeatherScenario {
            wind_dir_deg: wind_dir_deg.rem_euclid(360.0),
            wind_speed,
        })
    }

    /// Parses a weather `.csv` with header `id,wind_dir_deg,wind_speed`.
    pub fn load_set(path: &Path) -> Result<Vec<WeatherScenario>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "id,wind_dir_deg,wind_speed" => {}
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    "expected header 'id,wind_dir_deg,wind_speed'",
                ))
            }
        }
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, line_no, "expected 3 comma-separated fields"));
            }
            let dir = fields[1]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, "wind_dir_deg is not a number"))?;
            let speed = fields[2]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, "wind_speed is not a number"))?;
            out.push(
                WeatherScenario::new(dir, speed)
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?,
            );
        }
        if out.is_empty() {
            return Err(Error::parse(path, 0, "weather file has no scenarios"));
        }
        Ok(out)
    }

    pub fn save_set(path: &Path, scenarios: &[WeatherScenario]) -> Result<()> {
        let mut out = String::from("id,wind_dir_deg,wind_speed\n");
        for (i, w) in scenarios.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i, w.wind_dir_deg, w.wind_speed));
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Disc of candidate ignition cells around a center.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IgnitionZone {
    pub center: (usize, usize),
    pub radius: usize,
}

impl IgnitionZone {
    pub fn new(center: (usize, usize), radius: usize) -> Self {
        IgnitionZone { center, radius }
    }

    /// Checks that every cell of the disc lies inside an `rows` x `cols` grid.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let (r, c) = self.center;
        if r >= rows || c >= cols {
            return Err(Error::argument("ignition center outside grid"));
        }
        if r < self.radius || c < self.radius || r + self.radius >= rows || c + self.radius >= cols
        {
            return Err(Error::argument(
                "ignition disc extends outside the grid",
            ));
        }
        Ok(())
    }

    /// All cell indices within Euclidean distance `radius` of the center.
    pub fn cells(&self, cols: usize) -> Vec<usize> {
        let (cr, cc) = (self.center.0 as isize, self.center.1 as isize);
        let rad = self.radius as isize;
        let rad2 = rad * rad;
        let mut out = Vec::new();
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                if dr * dr + dc * dc <= rad2 {
                    out.push(((cr + dr) as usize) * cols + (cc + dc) as usize);
                }
            }
        }
        out
    }
}

/// Nearest-neighbor downscaling with the pixel-center mapping
/// `src = floor((dst + 0.5) * old / new)`.
pub fn shrink_nearest(l: &Landscape, new_rows: usize, new_cols: usize) -> Result<Landscape> {
    if new_rows == 0 || new_cols == 0 {
        return Err(Error::argument("target dimensions must be nonzero"));
    }
    if new_rows > l.rows() || new_cols > l.cols() {
        return Err(Error::argument(
            "target dimensions exceed source dimensions",
        ));
    }
    let mut cells = Vec::with_capacity(new_rows * new_cols);
    for i in 0..new_rows {
        let src_r = ((i as f64 + 0.5) * l.rows() as f64 / new_rows as f64).floor() as usize;
        for j in 0..new_cols {
            let src_c = ((j as f64 + 0.5) * l.cols() as f64 / new_cols as f64).floor() as usize;
            cells.push(l.code_at(l.index(src_r, src_c)));
        }
    }
    Landscape::new(new_rows, new_cols, cells, l.catalog().clone())
}

/// Uniform draw of a flammable cell from an ignition disc. Resamples over
/// non-fuel cells and fails if the zone contains no flammable cell at all.
pub fn sample_ignition(l: &Landscape, zone: &IgnitionZone, rng: &mut Rng) -> Result<usize> {
    zone.validate(l.rows(), l.cols())?;
    let cells = zone.cells(l.cols());
    if !cells.iter().any(|&i| l.is_flammable(i)) {
        return Err(Error::state("ignition zone fully non-flammable"));
    }
    // The flammability precheck guarantees termination; the bound is a
    // backstop against contract regressions.
    for _ in 0..100_000 {
        let candidate = cells[rng.next_below(cells.len())];
        if l.is_flammable(candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::state("ignition resampling bound exhausted"))
}

/// Uniform draw from a nonempty scenario set.
pub fn sample_weather(scenarios: &[WeatherScenario], rng: &mut Rng) -> Result<WeatherScenario> {
    if scenarios.is_empty() {
        return Err(Error::argument("weather scenario set is empty"));
    }
    Ok(scenarios[rng.next_below(scenarios.len())])
}

#[cfg(test)]
pub(crate) fn test_catalog() -> FuelCatalog {
    FuelCatalog::new(vec![
        FuelType {
            code: 0,
            name: "nonfuel".into(),
            spread_prob: 0.0,
        },
        FuelType {
            code: 1,
            name: "grass".into(),
            spread_prob: 0.5,
        },
        FuelType {
            code: 2,
            name: "brush".into(),
            spread_prob: 0.3,
        },
        FuelType {
            code: 3,
            name: "timber".into(),
            spread_prob: 0.2,
        },
    ])
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("fb_landscape_tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn wide_catalog() -> FuelCatalog {
        // codes 0..=15, code i spreads with prob i/20
        FuelCatalog::new(
            (0u16..16)
                .map(|i| FuelType {
                    code: i,
                    name: format!("f{}", i),
                    spread_prob: if i == 0 { 0.0 } else { i as f64 / 20.0 },
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn load_2x2_grid() {
        let path = tmp("small.grid");
        fs::write(&path, "rows 2\ncols 2\n1 1\n1 0\n").unwrap();
        let l = Landscape::load(&path, test_catalog()).unwrap();
        assert_eq!(l.rows(), 2);
        assert_eq!(l.cols(), 2);
        assert_eq!(l.cells(), &[1, 1, 1, 0]);
    }

    #[test]
    fn row_count_mismatch_is_an_error() {
        let path = tmp("short.grid");
        fs::write(&path, "rows 3\ncols 2\n1 1\n1 0\n").unwrap();
        let err = Landscape::load(&path, test_catalog()).unwrap_err();
        assert!(err.to_string().contains("row count mismatch"), "{err}");
    }

    #[test]
    fn row_length_mismatch_names_line() {
        let path = tmp("ragged.grid");
        fs::write(&path, "rows 2\ncols 3\n1 1 1\n1 0\n").unwrap();
        let err = Landscape::load(&path, test_catalog()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":4:"), "{msg}");
        assert!(msg.contains("row length mismatch"), "{msg}");
    }

    #[test]
    fn non_integer_cell_is_an_error() {
        let path = tmp("alpha.grid");
        fs::write(&path, "rows 2\ncols 2\n1 x\n1 0\n").unwrap();
        let err = Landscape::load(&path, test_catalog()).unwrap_err();
        assert!(err.to_string().contains("non-integer cell"), "{err}");
    }

    #[test]
    fn unknown_fuel_code_is_an_error() {
        let path = tmp("unknown.grid");
        fs::write(&path, "rows 2\ncols 2\n1 9\n1 0\n").unwrap();
        let err = Landscape::load(&path, test_catalog()).unwrap_err();
        assert!(err.to_string().contains("unknown fuel code 9"), "{err}");
    }

    #[test]
    fn load_20x20_grid() {
        let path = tmp("large.grid");
        let mut body = String::from("rows 20\ncols 20\n");
        for _ in 0..20 {
            body.push_str(&"1 ".repeat(19));
            body.push_str("1\n");
        }
        fs::write(&path, body).unwrap();
        let l = Landscape::load(&path, test_catalog()).unwrap();
        assert_eq!(l.n_cells(), 400);
    }

    #[test]
    fn save_load_round_trip_is_identity() {
        let mut rng = Rng::seeded(3);
        let catalog = test_catalog();
        let cells: Vec<u16> = (0..12 * 9).map(|_| rng.next_below(4) as u16).collect();
        let l = Landscape::new(12, 9, cells, catalog.clone()).unwrap();
        let path = tmp("roundtrip.grid");
        l.save(&path).unwrap();
        let back = Landscape::load(&path, catalog).unwrap();
        assert_eq!(l, back);
    }

    #[test]
    fn shrink_identity_when_same_dims() {
        let l = Landscape::filled(4, 6, 2, test_catalog()).unwrap();
        let s = shrink_nearest(&l, 4, 6).unwrap();
        assert_eq!(l, s);
    }

    #[test]
    fn shrink_constant_grid_stays_constant() {
        let l = Landscape::filled(8, 8, 3, test_catalog()).unwrap();
        let s = shrink_nearest(&l, 3, 5).unwrap();
        assert!(s.cells().iter().all(|&c| c == 3));
    }

    #[test]
    fn shrink_4x4_to_2x2_picks_center_cells() {
        // Distinct codes 0..15; the center rule picks sources (1,1),(1,3),(3,1),(3,3).
        let cells: Vec<u16> = (0u16..16).collect();
        let l = Landscape::new(4, 4, cells, wide_catalog()).unwrap();
        let s = shrink_nearest(&l, 2, 2).unwrap();
        assert_eq!(s.cells(), &[5, 7, 13, 15]);
    }

    #[test]
    fn shrink_output_codes_subset_of_input() {
        let mut rng = Rng::seeded(17);
        for _ in 0..50 {
            let rows = 2 + rng.next_below(14);
            let cols = 2 + rng.next_below(14);
            let cells: Vec<u16> = (0..rows * cols).map(|_| rng.next_below(4) as u16).collect();
            let l = Landscape::new(rows, cols, cells, test_catalog()).unwrap();
            let nr = 1 + rng.next_below(rows);
            let nc = 1 + rng.next_below(cols);
            if nr < 2 || nc < 2 {
                continue;
            }
            let s = shrink_nearest(&l, nr, nc).unwrap();
            for &c in s.cells() {
                assert!(l.cells().contains(&c));
            }
        }
    }

    #[test]
    fn shrink_rejects_zero_dims() {
        let l = Landscape::filled(4, 4, 1, test_catalog()).unwrap();
        assert!(shrink_nearest(&l, 0, 2).is_err());
    }

    #[test]
    fn ignition_radius_zero_returns_center() {
        let l = Landscape::filled(5, 5, 1, test_catalog()).unwrap();
        let zone = IgnitionZone::new((2, 2), 0);
        let mut rng = Rng::seeded(1);
        for _ in 0..20 {
            assert_eq!(sample_ignition(&l, &zone, &mut rng).unwrap(), l.index(2, 2));
        }
    }

    #[test]
    fn ignition_disc_containment_20x20_radius_4() {
        let l = Landscape::filled(20, 20, 1, test_catalog()).unwrap();
        let zone = IgnitionZone::new((10, 10), 4);
        let mut rng = Rng::seeded(5);
        for _ in 0..1000 {
            let idx = sample_ignition(&l, &zone, &mut rng).unwrap();
            let (r, c) = l.coords(idx);
            let d2 = (r as i64 - 10).pow(2) + (c as i64 - 10).pow(2);
            assert!(d2 <= 16, "cell ({r},{c}) outside radius 4");
        }
    }

    #[test]
    fn ignition_disc_containment_40x40_radius_9() {
        let l = Landscape::filled(40, 40, 1, test_catalog()).unwrap();
        let zone = IgnitionZone::new((20, 20), 9);
        let mut rng = Rng::seeded(6);
        for _ in 0..1000 {
            let idx = sample_ignition(&l, &zone, &mut rng).unwrap();
            let (r, c) = l.coords(idx);
            let d2 = (r as i64 - 20).pow(2) + (c as i64 - 20).pow(2);
            assert!(d2 <= 81);
        }
    }

    #[test]
    fn ignition_never_returns_non_fuel() {
        let mut l = Landscape::filled(9, 9, 1, test_catalog()).unwrap();
        // checker out most of the disc
        for idx in IgnitionZone::new((4, 4), 2).cells(9) {
            if idx % 2 == 0 {
                l.set_non_fuel(idx);
            }
        }
        let zone = IgnitionZone::new((4, 4), 2);
        let mut rng = Rng::seeded(9);
        for _ in 0..500 {
            let idx = sample_ignition(&l, &zone, &mut rng).unwrap();
            assert!(l.is_flammable(idx));
        }
    }

    #[test]
    fn ignition_fully_non_flammable_is_an_error() {
        let mut l = Landscape::filled(7, 7, 1, test_catalog()).unwrap();
        for idx in IgnitionZone::new((3, 3), 1).cells(7) {
            l.set_non_fuel(idx);
        }
        let err = sample_ignition(&l, &IgnitionZone::new((3, 3), 1), &mut Rng::seeded(1));
        assert!(err.unwrap_err().to_string().contains("fully non-flammable"));
    }

    #[test]
    fn weather_singleton_always_returned() {
        let w = WeatherScenario::new(90.0, 2.0).unwrap();
        let mut rng = Rng::seeded(2);
        for _ in 0..10 {
            assert_eq!(sample_weather(&[w], &mut rng).unwrap(), w);
        }
    }

    #[test]
    fn weather_two_scenarios_balanced() {
        let a = WeatherScenario::new(0.0, 1.0).unwrap();
        let b = WeatherScenario::new(180.0, 2.0).unwrap();
        let mut rng = Rng::seeded(4);
        let mut count_a = 0usize;
        for _ in 0..10_000 {
            if sample_weather(&[a, b], &mut rng).unwrap() == a {
                count_a += 1;
            }
        }
        let freq = count_a as f64 / 10_000.0;
        assert!((0.45..=0.55).contains(&freq), "freq {freq}");
    }

    #[test]
    fn weather_empty_set_is_an_error() {
        assert!(sample_weather(&[], &mut Rng::seeded(1)).is_err());
    }

    #[test]
    fn weather_direction_normalized() {
        let w = WeatherScenario::new(-90.0, 1.0).unwrap();
        assert_eq!(w.wind_dir_deg, 270.0);
        let w = WeatherScenario::new(720.0, 1.0).unwrap();
        assert_eq!(w.wind_dir_deg, 0.0);
    }

    #[test]
    fn weather_csv_round_trip() {
        let path = tmp("weather.csv");
        let set = vec![
            WeatherScenario::new(45.0, 1.5).unwrap(),
            WeatherScenario::new(270.0, 0.0).unwrap(),
        ];
        WeatherScenario::save_set(&path, &set).unwrap();
        assert_eq!(WeatherScenario::load_set(&path).unwrap(), set);
    }

    #[test]
    fn catalog_requires_code_zero() {
        let err = FuelCatalog::new(vec![FuelType {
            code: 1,
            name: "grass".into(),
            spread_prob: 0.4,
        }]);
        assert!(err.is_err());
    }

    #[test]
    fn zone_validation_rejects_overflow() {
        assert!(IgnitionZone::new((1, 5), 2).validate(10, 10).is_err());
        assert!(IgnitionZone::new((5, 5), 2).validate(10, 10).is_ok());
    }
}
