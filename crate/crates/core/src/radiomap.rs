//! Gridded radio environment: per-cell per-gNB SINR, serving-cell selection
//! and handover detection.
//!
//! Maps come from two sources: a CSV export (see [`load_map`]) or the
//! synthetic generator ([`generate_synthetic_map`]) which stands in for a
//! ray tracer with free-space path loss plus configurable shadow regions.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

/// SINR assigned to cells with no usable signal. Keeps rewards finite and
/// network inputs bounded.
pub const SINR_FLOOR_DB: f64 = -40.0;

/// Speed of light, m/s.
const C: f64 = 299_792_458.0;

/// Thermal noise density, dBm/Hz.
const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("cell index ({cx}, {cy}) out of range for {width}x{height} map")]
    OutOfRange {
        cx: usize,
        cy: usize,
        width: usize,
        height: usize,
    },
}

/// A ground base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbSite {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub height_m: f64,
    pub tx_power_dbm: f64,
}

/// Immutable gridded radio map. `sinr_db` holds one entry per
/// (cell_x, cell_y, gnb), indexed via [`RadioMap::sinr_at`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMap {
    pub width_cells: usize,
    pub height_cells: usize,
    pub cell_size_m: f64,
    pub uav_altitude_m: f64,
    pub gnbs: Vec<GnbSite>,
    sinr_db: Vec<f64>,
}

/// Radio conditions at one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRadioInfo {
    pub serving_gnb: u32,
    pub best_sinr_db: f64,
    pub per_gnb_sinr_db: Vec<f64>,
}

/// Axis-aligned block of cells with extra propagation loss, emulating
/// blockage from tall buildings. Bounds are inclusive cell indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShadowRegion {
    pub cx_min: usize,
    pub cy_min: usize,
    pub cx_max: usize,
    pub cy_max: usize,
    pub loss_db: f64,
}

impl ShadowRegion {
    pub fn contains(&self, cx: usize, cy: usize) -> bool {
        cx >= self.cx_min && cx <= self.cx_max && cy >= self.cy_min && cy <= self.cy_max
    }
}

/// Configuration for the synthetic map generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MapGenConfig {
    pub width_cells: usize,
    pub height_cells: usize,
    pub cell_size_m: f64,
    pub uav_altitude_m: f64,
    pub gnbs: Vec<GnbSite>,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    #[serde(default)]
    pub shadow_regions: Vec<ShadowRegion>,
    /// Log-normal shadow fading sigma in dB; 0 disables fading.
    #[serde(default)]
    pub fading_sigma_db: f64,
    pub seed: u64,
}

impl Default for MapGenConfig {
    /// 20x20 grid, 50 m spacing, five gNBs at roughly 450 m ISD with a
    /// central shadowed block.
    fn default() -> Self {
        Self {
            width_cells: 20,
            height_cells: 20,
            cell_size_m: 50.0,
            uav_altitude_m: 150.0,
            gnbs: vec![
                GnbSite { id: 0, x_m: 225.0, y_m: 225.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 1, x_m: 775.0, y_m: 225.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 2, x_m: 500.0, y_m: 500.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 3, x_m: 225.0, y_m: 775.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 4, x_m: 775.0, y_m: 775.0, height_m: 25.0, tx_power_dbm: 23.0 },
            ],
            carrier_hz: 28.0e9,
            bandwidth_hz: 400.0e6,
            noise_figure_db: 3.0,
            shadow_regions: vec![ShadowRegion {
                cx_min: 5,
                cy_min: 5,
                cx_max: 14,
                cy_max: 14,
                loss_db: 30.0,
            }],
            fading_sigma_db: 0.0,
            seed: 0,
        }
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// SINR in dB from received power, interferer powers and noise power, all in
/// dBm. Computed in the linear power domain; an empty interference list means
/// zero interference.
pub fn compute_sinr_db(
    rx_power_dbm: f64,
    interference_powers_dbm: &[f64],
    noise_power_dbm: f64,
) -> f64 {
    let signal = dbm_to_mw(rx_power_dbm);
    let interference: f64 = interference_powers_dbm.iter().map(|&p| dbm_to_mw(p)).sum();
    let noise = dbm_to_mw(noise_power_dbm);
    10.0 * (signal / (noise + interference)).log10()
}

/// Thermal noise power in dBm for a given bandwidth and receiver noise figure.
pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Free-space path loss in dB at distance `d_m` for carrier `freq_hz`.
pub fn fspl_db(d_m: f64, freq_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d_m * freq_hz / C).log10()
}

impl RadioMap {
    pub fn new(
        width_cells: usize,
        height_cells: usize,
        cell_size_m: f64,
        uav_altitude_m: f64,
        gnbs: Vec<GnbSite>,
        sinr_db: Vec<f64>,
    ) -> Result<Self, MapError> {
        if width_cells == 0 || height_cells == 0 || width_cells * height_cells < 2 {
            return Err(MapError::Validation(format!(
                "grid must have at least 2 cells, got {width_cells}x{height_cells}"
            )));
        }
        if gnbs.is_empty() {
            return Err(MapError::Validation("map must have at least one gNB".into()));
        }
        let mut ids: Vec<u32> = gnbs.iter().map(|g| g.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != gnbs.len() {
            return Err(MapError::Validation("duplicate gNB ids".into()));
        }
        if gnbs.iter().any(|g| !g.tx_power_dbm.is_finite()) {
            return Err(MapError::Validation("non-finite gNB tx power".into()));
        }
        let expected = width_cells * height_cells * gnbs.len();
        if sinr_db.len() != expected {
            return Err(MapError::Validation(format!(
                "sinr grid has {} entries, expected {expected}",
                sinr_db.len()
            )));
        }
        if let Some(v) = sinr_db.iter().find(|v| !v.is_finite()) {
            return Err(MapError::Validation(format!("non-finite SINR entry {v}")));
        }
        Ok(Self {
            width_cells,
            height_cells,
            cell_size_m,
            uav_altitude_m,
            gnbs,
            sinr_db,
        })
    }

    pub fn num_gnbs(&self) -> usize {
        self.gnbs.len()
    }

    pub fn in_range(&self, cx: usize, cy: usize) -> bool {
        cx < self.width_cells && cy < self.height_cells
    }

    fn index(&self, cx: usize, cy: usize, gnb: usize) -> usize {
        (cx * self.height_cells + cy) * self.gnbs.len() + gnb
    }

    /// SINR in dB at a cell for one gNB (by position in `gnbs`, not id).
    pub fn sinr_at(&self, cx: usize, cy: usize, gnb: usize) -> f64 {
        self.sinr_db[self.index(cx, cy, gnb)]
    }

    /// Center of a cell in map coordinates.
    pub fn cell_center_m(&self, cx: usize, cy: usize) -> (f64, f64) {
        (
            (cx as f64 + 0.5) * self.cell_size_m,
            (cy as f64 + 0.5) * self.cell_size_m,
        )
    }

    /// Serving gNB, best SINR and the full per-gNB SINR vector at a cell.
    /// Ties go to the lowest gNB id.
    pub fn cell_info(&self, cx: usize, cy: usize) -> Result<CellRadioInfo, MapError> {
        if !self.in_range(cx, cy) {
            return Err(MapError::OutOfRange {
                cx,
                cy,
                width: self.width_cells,
                height: self.height_cells,
            });
        }
        let per_gnb: Vec<f64> = (0..self.gnbs.len())
            .map(|g| self.sinr_at(cx, cy, g))
            .collect();
        // gnbs are stored sorted by id, so the first maximum wins ties.
        let mut best = 0usize;
        for (g, &v) in per_gnb.iter().enumerate() {
            if v > per_gnb[best] {
                best = g;
            }
        }
        Ok(CellRadioInfo {
            serving_gnb: self.gnbs[best].id,
            best_sinr_db: per_gnb[best],
            per_gnb_sinr_db: per_gnb,
        })
    }

    /// True iff the serving gNB differs between the two cells.
    pub fn is_handover(
        &self,
        from_cell: (usize, usize),
        to_cell: (usize, usize),
    ) -> Result<bool, MapError> {
        let a = self.cell_info(from_cell.0, from_cell.1)?;
        let b = self.cell_info(to_cell.0, to_cell.1)?;
        Ok(a.serving_gnb != b.serving_gnb)
    }

    /// Minimum best-SINR over all cells; the reward shift is derived from it.
    pub fn min_best_sinr_db(&self) -> f64 {
        let mut min = f64::INFINITY;
        for cx in 0..self.width_cells {
            for cy in 0..self.height_cells {
                let info = self.cell_info(cx, cy).expect("index in range");
                if info.best_sinr_db < min {
                    min = info.best_sinr_db;
                }
            }
        }
        min
    }
}

/// Build a map from free-space path loss at the 3-D gNB-to-UAV distance,
/// minus per-region shadowing, with every non-serving gNB as an interferer.
/// Deterministic for a fixed seed.
pub fn generate_synthetic_map(config: &MapGenConfig) -> Result<RadioMap, MapError> {
    if config.gnbs.is_empty() {
        return Err(MapError::Validation("generator requires at least one gNB".into()));
    }
    if config.width_cells == 0 || config.height_cells == 0 {
        return Err(MapError::Validation("grid dimensions must be positive".into()));
    }
    let mut gnbs = config.gnbs.clone();
    gnbs.sort_by_key(|g| g.id);

    let noise_dbm = noise_power_dbm(config.bandwidth_hz, config.noise_figure_db);
    let n = gnbs.len();
    let mut rng = SeededRng::new(config.seed);
    let mut sinr = vec![0.0; config.width_cells * config.height_cells * n];

    for cx in 0..config.width_cells {
        for cy in 0..config.height_cells {
            let ux = (cx as f64 + 0.5) * config.cell_size_m;
            let uy = (cy as f64 + 0.5) * config.cell_size_m;
            let shadow_loss: f64 = config
                .shadow_regions
                .iter()
                .filter(|r| r.contains(cx, cy))
                .map(|r| r.loss_db)
                .sum();

            let rx_dbm: Vec<f64> = gnbs
                .iter()
                .map(|g| {
                    let dx = ux - g.x_m;
                    let dy = uy - g.y_m;
                    let dz = config.uav_altitude_m - g.height_m;
                    let d = (dx * dx + dy * dy + dz * dz).sqrt();
                    let fading = if config.fading_sigma_db > 0.0 {
                        config.fading_sigma_db * standard_normal(&mut rng)
                    } else {
                        0.0
                    };
                    g.tx_power_dbm - fspl_db(d, config.carrier_hz) - shadow_loss + fading
                })
                .collect();

            for serving in 0..n {
                let interferers: Vec<f64> = rx_dbm
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| *g != serving)
                    .map(|(_, &p)| p)
                    .collect();
                let v = compute_sinr_db(rx_dbm[serving], &interferers, noise_dbm);
                let idx = (cx * config.height_cells + cy) * n + serving;
                sinr[idx] = v.max(SINR_FLOOR_DB);
            }
        }
    }

    RadioMap::new(
        config.width_cells,
        config.height_cells,
        config.cell_size_m,
        config.uav_altitude_m,
        gnbs,
        sinr,
    )
}

fn standard_normal(rng: &mut SeededRng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Serialize a map in the `skyroute-map v1` CSV format.
pub fn map_to_string(map: &RadioMap) -> String {
    let mut out = String::new();
    out.push_str("# skyroute-map v1\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        map.width_cells,
        map.height_cells,
        map.cell_size_m,
        map.uav_altitude_m,
        map.gnbs.len()
    );
    for g in &map.gnbs {
        let _ = writeln!(
            out,
            "gnb,{},{},{},{},{}",
            g.id, g.x_m, g.y_m, g.height_m, g.tx_power_dbm
        );
    }
    for cx in 0..map.width_cells {
        for cy in 0..map.height_cells {
            for (g, site) in map.gnbs.iter().enumerate() {
                let _ = writeln!(out, "cell,{cx},{cy},{},{}", site.id, map.sinr_at(cx, cy, g));
            }
        }
    }
    out
}

pub fn save_map(map: &RadioMap, path: &Path) -> Result<(), MapError> {
    std::fs::write(path, map_to_string(map)).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_map(path: &Path) -> Result<RadioMap, MapError> {
    let text = std::fs::read_to_string(path).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map(&text)
}

pub fn parse_map(text: &str) -> Result<RadioMap, MapError> {
    let mut lines = text.lines().enumerate();

    let (_, magic) = lines
        .next()
        .ok_or_else(|| MapError::Parse { line: 1, msg: "empty file".into() })?;
    if magic.trim() != "# skyroute-map v1" {
        return Err(MapError::Parse {
            line: 1,
            msg: format!("expected '# skyroute-map v1', got '{magic}'"),
        });
    }

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| MapError::Parse { line: 2, msg: "missing dimensions header".into() })?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 5 {
        return Err(MapError::Parse {
            line: line_no + 1,
            msg: format!("expected 5 header fields, got {}", parts.len()),
        });
    }
    let width: usize = parse_field(parts[0], line_no + 1, "width_cells")?;
    let height: usize = parse_field(parts[1], line_no + 1, "height_cells")?;
    let cell_size: f64 = parse_field(parts[2], line_no + 1, "cell_size_m")?;
    let altitude: f64 = parse_field(parts[3], line_no + 1, "uav_altitude_m")?;
    let num_gnbs: usize = parse_field(parts[4], line_no + 1, "num_gnbs")?;

    let mut gnbs = Vec::with_capacity(num_gnbs);
    for _ in 0..num_gnbs {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| MapError::Parse { line: 0, msg: "missing gNB line".into() })?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 || f[0] != "gnb" {
            return Err(MapError::Parse {
                line: line_no + 1,
                msg: format!("expected 'gnb,<id>,<x>,<y>,<height>,<tx_power>', got '{line}'"),
            });
        }
        gnbs.push(GnbSite {
            id: parse_field(f[1], line_no + 1, "gnb id")?,
            x_m: parse_field(f[2], line_no + 1, "gnb x")?,
            y_m: parse_field(f[3], line_no + 1, "gnb y")?,
            height_m: parse_field(f[4], line_no + 1, "gnb height")?,
            tx_power_dbm: parse_field(f[5], line_no + 1, "gnb tx power")?,
        });
    }
    gnbs.sort_by_key(|g| g.id);
    let id_to_slot: std::collections::HashMap<u32, usize> =
        gnbs.iter().enumerate().map(|(i, g)| (g.id, i)).collect();

    let mut sinr = vec![f64::NAN; width * height * num_gnbs];
    let mut seen = vec![false; width * height * num_gnbs];
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 || f[0] != "cell" {
            return Err(MapError::Parse {
                line: line_no + 1,
                msg: format!("expected 'cell,<cx>,<cy>,<gnb_id>,<sinr_db>', got '{line}'"),
            });
        }
        let cx: usize = parse_field(f[1], line_no + 1, "cx")?;
        let cy: usize = parse_field(f[2], line_no + 1, "cy")?;
        let gnb_id: u32 = parse_field(f[3], line_no + 1, "gnb_id")?;
        let v: f64 = parse_field(f[4], line_no + 1, "sinr_db")?;
        if cx >= width || cy >= height {
            return Err(MapError::Parse {
                line: line_no + 1,
                msg: format!("cell ({cx}, {cy}) outside {width}x{height} grid"),
            });
        }
        let slot = *id_to_slot.get(&gnb_id).ok_or_else(|| MapError::Parse {
            line: line_no + 1,
            msg: format!("unknown gNB id {gnb_id}"),
        })?;
        let idx = (cx * height + cy) * num_gnbs + slot;
        if seen[idx] {
            return Err(MapError::Parse {
                line: line_no + 1,
                msg: format!("duplicate entry for cell ({cx}, {cy}) gNB {gnb_id}"),
            });
        }
        seen[idx] = true;
        sinr[idx] = v;
    }

    if let Some(missing) = seen.iter().position(|&s| !s) {
        let gnb = missing % num_gnbs;
        let cell = missing / num_gnbs;
        let cx = cell / height;
        let cy = cell % height;
        return Err(MapError::Validation(format!(
            "missing SINR entry for cell ({cx}, {cy}) gNB {}",
            gnbs[gnb].id
        )));
    }

    RadioMap::new(width, height, cell_size, altitude, gnbs, sinr)
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, MapError> {
    s.trim().parse().map_err(|_| MapError::Parse {
        line,
        msg: format!("invalid {what}: '{s}'"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_gnb_config() -> MapGenConfig {
        MapGenConfig {
            width_cells: 10,
            height_cells: 10,
            gnbs: vec![GnbSite {
                id: 0,
                x_m: 250.0,
                y_m: 250.0,
                height_m: 25.0,
                tx_power_dbm: 23.0,
            }],
            shadow_regions: vec![],
            ..MapGenConfig::default()
        }
    }

    #[test]
    fn sinr_equal_signal_and_noise_no_interference() {
        assert!((compute_sinr_db(-60.0, &[], -60.0)).abs() < 1e-12);
    }

    #[test]
    fn sinr_matches_linear_domain_oracle() {
        // -60 dBm signal, one -70 dBm interferer, noise chosen so that
        // sigma + I doubles I alone (noise = interference = 1e-7 mW).
        let expected = 10.0 * (1e-6_f64 / 2e-7).log10();
        assert!((compute_sinr_db(-60.0, &[-70.0], -70.0) - expected).abs() < 1e-9);

        // -50 dBm signal, two -80 dBm interferers, Table-style noise floor.
        let noise = -84.98;
        let lin = 1e-5_f64 / (2.0 * 1e-8 + 10f64.powf(noise / 10.0));
        let expected = 10.0 * lin.log10();
        assert!((compute_sinr_db(-50.0, &[-80.0, -80.0], noise) - expected).abs() < 1e-9);
    }

    #[test]
    fn noise_floor_matches_hand_computation() {
        // -174 + 10log10(400 MHz) + 3 dB NF
        let v = noise_power_dbm(400.0e6, 3.0);
        assert!((v - (-174.0 + 10.0 * 4.0e8_f64.log10() + 3.0)).abs() < 1e-12);
        assert!((v - (-84.979)).abs() < 0.01);
    }

    #[test]
    fn single_gnb_sinr_decreases_with_distance() {
        let cfg = single_gnb_config();
        let map = generate_synthetic_map(&cfg).unwrap();
        let (gx, gy) = (cfg.gnbs[0].x_m, cfg.gnbs[0].y_m);
        let mut by_distance: Vec<(f64, f64)> = Vec::new();
        for cx in 0..10 {
            for cy in 0..10 {
                let (ux, uy) = map.cell_center_m(cx, cy);
                let dz = cfg.uav_altitude_m - cfg.gnbs[0].height_m;
                let d = ((ux - gx).powi(2) + (uy - gy).powi(2) + dz * dz).sqrt();
                by_distance.push((d, map.sinr_at(cx, cy, 0)));
            }
        }
        by_distance.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in by_distance.windows(2) {
            if w[1].0 > w[0].0 + 1e-9 {
                assert!(w[1].1 < w[0].1, "SINR must strictly decrease with distance");
            }
        }
    }

    #[test]
    fn symmetric_gnbs_give_mirror_symmetric_field() {
        let cfg = MapGenConfig {
            width_cells: 20,
            height_cells: 20,
            gnbs: vec![
                GnbSite { id: 0, x_m: 300.0, y_m: 500.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 1, x_m: 700.0, y_m: 500.0, height_m: 25.0, tx_power_dbm: 23.0 },
            ],
            shadow_regions: vec![],
            ..MapGenConfig::default()
        };
        let map = generate_synthetic_map(&cfg).unwrap();
        for cx in 0..20 {
            for cy in 0..20 {
                let mirror = 19 - cx;
                assert!((map.sinr_at(cx, cy, 0) - map.sinr_at(mirror, cy, 1)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn central_shadow_lowers_center_relative_to_edges() {
        let map = generate_synthetic_map(&MapGenConfig::default()).unwrap();
        let mut center = Vec::new();
        let mut edge = Vec::new();
        for cx in 0..20 {
            for cy in 0..20 {
                let best = map.cell_info(cx, cy).unwrap().best_sinr_db;
                if (5..=14).contains(&cx) && (5..=14).contains(&cy) {
                    center.push(best);
                } else {
                    edge.push(best);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&center) < mean(&edge) - 10.0);
    }

    #[test]
    fn generator_is_deterministic() {
        let mut cfg = MapGenConfig::default();
        cfg.fading_sigma_db = 4.0;
        cfg.seed = 99;
        let a = generate_synthetic_map(&cfg).unwrap();
        let b = generate_synthetic_map(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_rejects_bad_config() {
        let mut cfg = MapGenConfig::default();
        cfg.gnbs.clear();
        assert!(generate_synthetic_map(&cfg).is_err());
        let cfg = MapGenConfig { width_cells: 0, ..MapGenConfig::default() };
        assert!(generate_synthetic_map(&cfg).is_err());
    }

    #[test]
    fn cell_info_ties_break_to_lowest_id() {
        let map = RadioMap::new(
            2,
            1,
            50.0,
            150.0,
            vec![
                GnbSite { id: 0, x_m: 0.0, y_m: 0.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 1, x_m: 0.0, y_m: 0.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 2, x_m: 0.0, y_m: 0.0, height_m: 25.0, tx_power_dbm: 23.0 },
            ],
            vec![3.0, 3.0, 1.0, 2.0, 5.0, 0.0],
        )
        .unwrap();
        let info = map.cell_info(0, 0).unwrap();
        assert_eq!(info.serving_gnb, 0);
        assert_eq!(info.best_sinr_db, 3.0);
        let info = map.cell_info(1, 0).unwrap();
        assert_eq!(info.serving_gnb, 1);
    }

    #[test]
    fn cell_info_matches_linear_scan_on_random_map() {
        let map = generate_synthetic_map(&MapGenConfig::default()).unwrap();
        for cx in 0..map.width_cells {
            for cy in 0..map.height_cells {
                let info = map.cell_info(cx, cy).unwrap();
                let mut best = f64::NEG_INFINITY;
                let mut best_id = u32::MAX;
                for (g, site) in map.gnbs.iter().enumerate() {
                    let v = map.sinr_at(cx, cy, g);
                    if v > best {
                        best = v;
                        best_id = site.id;
                    }
                }
                assert_eq!(info.serving_gnb, best_id);
                assert_eq!(info.best_sinr_db, best);
            }
        }
    }

    #[test]
    fn handover_detection() {
        let cfg = single_gnb_config();
        let map = generate_synthetic_map(&cfg).unwrap();
        assert!(!map.is_handover((0, 0), (0, 0)).unwrap());
        assert!(!map.is_handover((0, 0), (9, 9)).unwrap());

        // Two gNBs dominating opposite halves.
        let cfg = MapGenConfig {
            width_cells: 10,
            height_cells: 10,
            cell_size_m: 50.0,
            gnbs: vec![
                GnbSite { id: 0, x_m: 100.0, y_m: 250.0, height_m: 25.0, tx_power_dbm: 23.0 },
                GnbSite { id: 1, x_m: 400.0, y_m: 250.0, height_m: 25.0, tx_power_dbm: 23.0 },
            ],
            shadow_regions: vec![],
            ..MapGenConfig::default()
        };
        let map = generate_synthetic_map(&cfg).unwrap();
        assert!(map.is_handover((0, 5), (9, 5)).unwrap());
        assert!(map.is_handover((2, 5), (3, 5)).is_ok());
        assert!(map.is_handover((10, 0), (0, 0)).is_err());
    }

    #[test]
    fn save_load_round_trip_is_identity() {
        let map = generate_synthetic_map(&MapGenConfig::default()).unwrap();
        let parsed = parse_map(&map_to_string(&map)).unwrap();
        assert_eq!(map, parsed);
    }

    #[test]
    fn load_names_first_missing_cell() {
        let map = generate_synthetic_map(&MapGenConfig {
            width_cells: 2,
            height_cells: 2,
            gnbs: single_gnb_config().gnbs,
            shadow_regions: vec![],
            ..MapGenConfig::default()
        })
        .unwrap();
        let text = map_to_string(&map);
        let dropped: String = text
            .lines()
            .filter(|l| *l != "cell,1,0,0,".to_owned() + &map.sinr_at(1, 0, 0).to_string())
            .map(|l| format!("{l}\n"))
            .collect();
        let err = parse_map(&dropped).unwrap_err();
        match err {
            MapError::Validation(msg) => assert!(msg.contains("(1, 0)"), "{msg}"),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn load_reports_parse_error_with_line() {
        let map = generate_synthetic_map(&single_gnb_config()).unwrap();
        let mut text = map_to_string(&map);
        text.push_str("cell,0,0,zero,nonsense\n");
        match parse_map(&text) {
            Err(MapError::Parse { line, .. }) => assert!(line > 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn fixture_20x20x5_loads_with_expected_dims() {
        let map = generate_synthetic_map(&MapGenConfig::default()).unwrap();
        let text = map_to_string(&map);
        let data_rows = text.lines().filter(|l| l.starts_with("cell,")).count();
        assert_eq!(data_rows, 2000);
        let parsed = parse_map(&text).unwrap();
        assert_eq!(parsed.width_cells, 20);
        assert_eq!(parsed.height_cells, 20);
        assert_eq!(parsed.num_gnbs(), 5);
    }
}
