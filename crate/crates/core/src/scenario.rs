//! System configuration, cell geometry, user drops and large-scale fading.
//!
//! The target cell is always index 0 and sits at the origin. Co-channel
//! cells form the first interfering ring at the reuse distance
//! `D = r * sqrt(3 * reuse)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::RngStream;
use crate::{db_to_linear, Error, Result};

/// All scenario constants. Powers are linear and normalized to unit noise
/// variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// L: target cell plus co-channel cells (at most 7).
    pub cells: usize,
    /// K: users per cell.
    pub users: usize,
    /// M: base station antennas.
    pub antennas: usize,
    /// τ: pilot length in symbols.
    pub pilot_length: usize,
    /// P: total pilot power budget per cell.
    pub total_pilot_power: f64,
    /// μ = ρ_max K / P.
    pub mu: f64,
    /// ρ_u: per-user data power.
    pub data_power: f64,
    /// Γ: frequency reuse factor, one of 1, 3, 7.
    pub reuse: u32,
    /// Cell radius in meters.
    pub cell_radius: f64,
    /// Shadowing standard deviation in dB.
    pub shadowing_db: f64,
    pub path_loss_exponent: f64,
    /// Reference distance r_min of the path-loss law, meters.
    pub reference_distance: f64,
    /// Total bandwidth in Hz.
    pub bandwidth: f64,
    /// (T_s - T_p) / T_s.
    pub slot_fraction: f64,
    /// T_u. Only the ratio T_u / T_o matters.
    pub useful_symbol: f64,
    /// T_o.
    pub symbol_interval: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    /// Channel-estimation and rate comparison setting: seven cells, ten
    /// users, 200 antennas, P = 40 dB, μ = 3, ρ_u = 20 dB.
    fn default() -> Self {
        Self {
            cells: 7,
            users: 10,
            antennas: 200,
            pilot_length: 10,
            total_pilot_power: db_to_linear(40.0),
            mu: 3.0,
            data_power: db_to_linear(20.0),
            reuse: 1,
            cell_radius: 500.0,
            shadowing_db: 8.0,
            path_loss_exponent: 3.8,
            reference_distance: 200.0,
            bandwidth: 20.0e6,
            slot_fraction: 3.0 / 7.0,
            useful_symbol: 66.7,
            symbol_interval: 71.4,
            seed: 1,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "cells",
    "users",
    "antennas",
    "pilot_length",
    "total_pilot_power",
    "mu",
    "data_power",
    "reuse",
    "cell_radius",
    "shadowing_db",
    "path_loss_exponent",
    "reference_distance",
    "bandwidth",
    "slot_fraction",
    "useful_symbol",
    "symbol_interval",
    "seed",
];

impl SystemConfig {
    /// Three-user verification setting: P/K = 30 dB, μ = 1.5, M = 200, τ = K.
    pub fn three_user() -> Self {
        Self {
            users: 3,
            pilot_length: 3,
            total_pilot_power: 3.0 * db_to_linear(30.0),
            mu: 1.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.cells == 0 || self.cells > 7 {
            return fail(format!("cells must be in 1..=7, got {}", self.cells));
        }
        if self.users < 2 {
            return fail(format!("users must be at least 2, got {}", self.users));
        }
        if self.antennas < 2 {
            return fail(format!("antennas must be at least 2, got {}", self.antennas));
        }
        if self.pilot_length < self.users {
            return fail(format!(
                "pilot_length {} shorter than user count {}",
                self.pilot_length, self.users
            ));
        }
        for (name, v) in [
            ("total_pilot_power", self.total_pilot_power),
            ("data_power", self.data_power),
            ("cell_radius", self.cell_radius),
            ("path_loss_exponent", self.path_loss_exponent),
            ("reference_distance", self.reference_distance),
            ("bandwidth", self.bandwidth),
            ("slot_fraction", self.slot_fraction),
            ("useful_symbol", self.useful_symbol),
            ("symbol_interval", self.symbol_interval),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.shadowing_db.is_finite() && self.shadowing_db >= 0.0) {
            return fail(format!("shadowing_db must be >= 0, got {}", self.shadowing_db));
        }
        if self.slot_fraction > 1.0 {
            return fail(format!("slot_fraction must be <= 1, got {}", self.slot_fraction));
        }
        check_reuse(self.reuse)?;
        self.check_mu()
    }

    /// μ must lie in [3/2, (K+1)/2]; the upper end guarantees
    /// (K-1) ρ_min + ρ_max <= P.
    pub fn check_mu(&self) -> Result<()> {
        let hi = (self.users as f64 + 1.0) / 2.0;
        if !(self.mu >= 1.5 && self.mu <= hi) {
            return Err(Error::Config(format!(
                "mu = {} outside [1.5, {}] for K = {}",
                self.mu, hi, self.users
            )));
        }
        Ok(())
    }

    /// ρ_min = P / (2K).
    pub fn rho_min(&self) -> f64 {
        self.total_pilot_power / (2.0 * self.users as f64)
    }

    /// ρ_max = μ P / K.
    pub fn rho_max(&self) -> f64 {
        self.mu * self.total_pilot_power / self.users as f64
    }

    /// Equal per-user pilot power P / K.
    pub fn equal_power(&self) -> f64 {
        self.total_pilot_power / self.users as f64
    }

    /// (B/Γ)((T_s-T_p)/T_s)(T_u/T_o), the bits/s multiplier of log2(1+SINR).
    pub fn rate_prefactor(&self) -> f64 {
        (self.bandwidth / self.reuse as f64)
            * self.slot_fraction
            * (self.useful_symbol / self.symbol_interval)
    }

    /// Parses the `key = value` config format. Unknown keys are errors;
    /// missing keys keep their default. Power keys accept a `dB` suffix.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut pilot_length_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::Parse(format!("line {}: invalid {what} for `{key}`: `{value}`", lineno + 1))
            };
            let int = || value.parse::<usize>().map_err(|_| bad("integer"));
            let real = || value.parse::<f64>().map_err(|_| bad("number"));
            let power = || parse_power(value).ok_or_else(|| bad("power"));
            match key {
                "cells" => cfg.cells = int()?,
                "users" => cfg.users = int()?,
                "antennas" => cfg.antennas = int()?,
                "pilot_length" => {
                    cfg.pilot_length = int()?;
                    pilot_length_set = true;
                }
                "total_pilot_power" => cfg.total_pilot_power = power()?,
                "mu" => cfg.mu = real()?,
                "data_power" => cfg.data_power = power()?,
                "reuse" => cfg.reuse = value.parse().map_err(|_| bad("integer"))?,
                "cell_radius" => cfg.cell_radius = real()?,
                "shadowing_db" => cfg.shadowing_db = real()?,
                "path_loss_exponent" => cfg.path_loss_exponent = real()?,
                "reference_distance" => cfg.reference_distance = real()?,
                "bandwidth" => cfg.bandwidth = real()?,
                "slot_fraction" => cfg.slot_fraction = parse_fraction(value).ok_or_else(|| bad("fraction"))?,
                "useful_symbol" => cfg.useful_symbol = real()?,
                "symbol_interval" => cfg.symbol_interval = real()?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key `{key}` (expected one of {})",
                        lineno + 1,
                        CONFIG_KEYS.join(", ")
                    )))
                }
            }
        }
        if !pilot_length_set {
            cfg.pilot_length = cfg.users;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Writes every field in the format read by [`SystemConfig::from_kv_str`].
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cells = {}", self.cells);
        let _ = writeln!(out, "users = {}", self.users);
        let _ = writeln!(out, "antennas = {}", self.antennas);
        let _ = writeln!(out, "pilot_length = {}", self.pilot_length);
        let _ = writeln!(out, "total_pilot_power = {}", self.total_pilot_power);
        let _ = writeln!(out, "mu = {}", self.mu);
        let _ = writeln!(out, "data_power = {}", self.data_power);
        let _ = writeln!(out, "reuse = {}", self.reuse);
        let _ = writeln!(out, "cell_radius = {}", self.cell_radius);
        let _ = writeln!(out, "shadowing_db = {}", self.shadowing_db);
        let _ = writeln!(out, "path_loss_exponent = {}", self.path_loss_exponent);
        let _ = writeln!(out, "reference_distance = {}", self.reference_distance);
        let _ = writeln!(out, "bandwidth = {}", self.bandwidth);
        let _ = writeln!(out, "slot_fraction = {}", self.slot_fraction);
        let _ = writeln!(out, "useful_symbol = {}", self.useful_symbol);
        let _ = writeln!(out, "symbol_interval = {}", self.symbol_interval);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }
}

fn parse_power(value: &str) -> Option<f64> {
    let v = value.trim();
    match v.strip_suffix("dB").or_else(|| v.strip_suffix("db")) {
        Some(db) => db.trim().parse::<f64>().ok().map(db_to_linear),
        None => v.parse().ok(),
    }
}

fn parse_fraction(value: &str) -> Option<f64> {
    match value.split_once('/') {
        Some((n, d)) => Some(n.trim().parse::<f64>().ok()? / d.trim().parse::<f64>().ok()?),
        None => value.parse().ok(),
    }
}

fn check_reuse(reuse: u32) -> Result<()> {
    match reuse {
        1 | 3 | 7 => Ok(()),
        other => Err(Error::Config(format!("unsupported reuse factor {other} (expected 1, 3 or 7)"))),
    }
}

/// Planar point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Cell centers. Index 0 is the target cell at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLayout {
    pub centers: Vec<Point>,
    pub radius: f64,
    /// Distance from the target center to each co-channel center.
    pub reuse_distance: f64,
}

impl CellLayout {
    pub fn target_index(&self) -> usize {
        0
    }

    /// Whether `p` lies in the hexagon of `cell`. Hexagons are pointy-top
    /// (a vertex straight up) with circumradius equal to the cell radius,
    /// so the 60°-spaced ring of centers tiles without overlap.
    pub fn contains(&self, cell: usize, p: &Point) -> bool {
        in_hexagon(&self.centers[cell], self.radius, p)
    }
}

fn in_hexagon(center: &Point, radius: f64, p: &Point) -> bool {
    let dx = (p.x - center.x).abs();
    let dy = (p.y - center.y).abs();
    let apothem = radius * 3f64.sqrt() / 2.0;
    let eps = 1e-9 * radius;
    dx <= apothem + eps && dy + dx / 3f64.sqrt() <= radius + eps
}

/// Target at the origin plus up to six co-channel cells at angles 60°·i on
/// a ring of radius `r sqrt(3Γ)`.
pub fn build_layout(cfg: &SystemConfig) -> Result<CellLayout> {
    check_reuse(cfg.reuse)?;
    if cfg.cells == 0 || cfg.cells > 7 {
        return Err(Error::Config(format!("cells must be in 1..=7, got {}", cfg.cells)));
    }
    let d = cfg.cell_radius * (3.0 * cfg.reuse as f64).sqrt();
    let mut centers = vec![Point::default()];
    centers.extend((0..cfg.cells - 1).map(|i| {
        let a = PI / 3.0 * i as f64;
        Point::new(d * a.cos(), d * a.sin())
    }));
    Ok(CellLayout {
        centers,
        radius: cfg.cell_radius,
        reuse_distance: d,
    })
}

/// Uniform user positions inside each cell's hexagon, by rejection from the
/// bounding box. Returned as `[cell][user]`.
pub fn drop_users(cfg: &SystemConfig, layout: &CellLayout, rng: &mut RngStream) -> Vec<Vec<Point>> {
    let r = layout.radius;
    let apothem = r * 3f64.sqrt() / 2.0;
    layout
        .centers
        .iter()
        .map(|c| {
            (0..cfg.users)
                .map(|_| loop {
                    let p = Point::new(
                        c.x + rng.random_range(-apothem..apothem),
                        c.y + rng.random_range(-r..r),
                    );
                    if in_hexagon(c, r, &p) {
                        break p;
                    }
                })
                .collect()
        })
        .collect()
}

/// `1 / (1 + (d / r_min)^γ)`, the distance part of β.
pub fn path_gain(distance: f64, reference_distance: f64, exponent: f64) -> f64 {
    1.0 / (1.0 + (distance / reference_distance).powf(exponent))
}

/// Large-scale fading β[j][l][k] between user k of cell l and BS j.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleRealization {
    cells: usize,
    users: usize,
    /// Number of BS slices held. Generated drops hold all L; fixtures hold 1.
    targets: usize,
    beta: Vec<f64>,
    pub user_positions: Option<Vec<Vec<Point>>>,
    /// 10 log10 z per entry, same layout as `beta`.
    pub shadowing_db: Option<Vec<f64>>,
}

impl LargeScaleRealization {
    /// Wraps a tensor laid out as `[target][cell][user]`.
    pub fn from_tensor(targets: usize, cells: usize, users: usize, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != targets * cells * users || targets == 0 || cells == 0 || users == 0 {
            return Err(Error::Parse(format!(
                "beta tensor of length {} does not match {targets}x{cells}x{users}",
                beta.len()
            )));
        }
        if let Some(bad) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Domain(format!("large-scale coefficient {bad} is not positive and finite")));
        }
        Ok(Self {
            cells,
            users,
            targets,
            beta,
            user_positions: None,
            shadowing_db: None,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn beta(&self, j: usize, l: usize, k: usize) -> f64 {
        self.beta[(j * self.cells + l) * self.users + k]
    }

    /// β_{0lk} as seen from the target BS.
    pub fn target_slice(&self) -> BetaSlice {
        self.slice(0)
    }

    pub fn slice(&self, j: usize) -> BetaSlice {
        assert!(j < self.targets, "slice {j} not held (targets = {})", self.targets);
        let n = self.cells * self.users;
        BetaSlice {
            cells: self.cells,
            users: self.users,
            values: self.beta[j * n..(j + 1) * n].to_vec(),
        }
    }
}

/// Draws β for every (BS, cell, user) triple:
/// `β = z / (1 + (d/r_min)^γ)` with `10 log10 z ~ N(0, σ²)`.
pub fn large_scale(
    cfg: &SystemConfig,
    layout: &CellLayout,
    positions: &[Vec<Point>],
    rng: &mut RngStream,
) -> Result<LargeScaleRealization> {
    let cells = layout.centers.len();
    let users = cfg.users;
    if positions.len() != cells || positions.iter().any(|p| p.len() != users) {
        return Err(Error::Domain("user positions do not match the layout".into()));
    }
    let shadow = Normal::new(0.0, cfg.shadowing_db).map_err(|e| Error::Config(e.to_string()))?;
    let mut beta = Vec::with_capacity(cells * cells * users);
    let mut shadowing_db = Vec::with_capacity(cells * cells * users);
    for bs in &layout.centers {
        for cell_users in positions {
            for p in cell_users {
                let s_db = if cfg.shadowing_db > 0.0 { shadow.sample(rng) } else { 0.0 };
                let d = bs.distance(p);
                beta.push(db_to_linear(s_db) * path_gain(d, cfg.reference_distance, cfg.path_loss_exponent));
                shadowing_db.push(s_db);
            }
        }
    }
    let mut real = LargeScaleRealization::from_tensor(cells, cells, users, beta)?;
    real.user_positions = Some(positions.to_vec());
    real.shadowing_db = Some(shadowing_db);
    Ok(real)
}

/// Parses the fixture CSV: header `user_1,...,user_K`, one row per cell.
pub fn parse_beta_csv(text: &str) -> Result<LargeScaleRealization> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse("fixture has no header row".into()));
    }
    for (i, name) in header.iter().enumerate() {
        if name != format!("user_{}", i + 1) {
            return Err(Error::Parse(format!("header column {} is `{name}`, expected `user_{}`", i + 1, i + 1)));
        }
    }
    let users = header.len();
    let mut values = Vec::new();
    let mut cells = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() != users {
            return Err(Error::Parse(format!("row {} has {} columns, expected {users}", cells + 1, record.len())));
        }
        for field in record.iter() {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", cells + 1)))?,
            );
        }
        cells += 1;
    }
    if cells == 0 {
        return Err(Error::Parse("fixture has no data rows".into()));
    }
    LargeScaleRealization::from_tensor(1, cells, users, values)
}

/// Loads the target-cell slice from a fixture file. Geometry is bypassed.
pub fn load_beta_fixture(path: impl AsRef<Path>) -> Result<LargeScaleRealization> {
    parse_beta_csv(&std::fs::read_to_string(path)?)
}

/// Writes slice `j` in the fixture format.
pub fn beta_slice_csv(real: &LargeScaleRealization, j: usize) -> String {
    let slice = real.slice(j);
    let mut out = (1..=slice.users)
        .map(|k| format!("user_{k}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for l in 0..slice.cells {
        let row = (0..slice.users)
            .map(|k| format!("{}", slice.get(l, k)))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn save_beta_fixture(real: &LargeScaleRealization, j: usize, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, beta_slice_csv(real, j))?;
    Ok(())
}

/// Target-BS view β_{0lk}, laid out `[cell][user]`. Cell 0 is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSlice {
    cells: usize,
    users: usize,
    values: Vec<f64>,
}

impl BetaSlice {
    /// Builds from rows indexed `[cell][user]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let users = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != users) {
            return Err(Error::Domain("ragged beta rows".into()));
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        LargeScaleRealization::from_tensor(1, rows.len(), users, values).map(|r| r.target_slice())
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.values[l * self.users + k]
    }

    /// β_{00k}: user k's gain to its own BS.
    pub fn own(&self, k: usize) -> f64 {
        self.get(0, k)
    }

    /// β_{0lk} over l for pilot index k.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.cells).map(|l| self.get(l, k)).collect()
    }

    /// Σ_l Σ_n β_{0ln}.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Pilot powers ρ_{lk}, laid out `[cell][user]`. Row 0 is the target cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix {
    cells: usize,
    users: usize,
    values: Vec<f64>,
}

impl PowerMatrix {
    pub fn uniform(cells: usize, users: usize, power: f64) -> Self {
        Self {
            cells,
            users,
            values: vec![power; cells * users],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let users = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || users == 0 || rows.iter().any(|r| r.len() != users) {
            return Err(Error::Domain("power rows must be non-empty and rectangular".into()));
        }
        if rows.iter().flatten().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("pilot powers must be finite and nonnegative".into()));
        }
        Ok(Self {
            cells: rows.len(),
            users,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.values[l * self.users + k]
    }

    pub fn set(&mut self, l: usize, k: usize, power: f64) {
        self.values[l * self.users + k] = power;
    }

    pub fn target_row(&self) -> &[f64] {
        &self.values[..self.users]
    }

    /// Replaces the target cell's powers, keeping the other cells fixed.
    pub fn with_target(&self, target: &[f64]) -> Self {
        assert_eq!(target.len(), self.users);
        let mut out = self.clone();
        out.values[..self.users].copy_from_slice(target);
        out
    }

    /// ρ_{lk} over l for pilot index k.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.cells).map(|l| self.get(l, k)).collect()
    }
}
