//! Problem data: ports, vessels, contracts, prices, and the on-disk bundle.
//!
//! An [`Instance`] is validated once at construction and is immutable
//! afterwards. Ports and contracts are addressed by position internally; the
//! string ids only matter at the file boundary.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid {entity}: {message}")]
    Invariant { entity: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invariant(entity: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Invariant {
        entity: entity.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    Buy,
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelMode {
    LngOnly,
    FuelOnly,
    Combined,
}

impl FuelMode {
    pub const ALL: [FuelMode; 3] = [FuelMode::LngOnly, FuelMode::FuelOnly, FuelMode::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            FuelMode::LngOnly => "lng_only",
            FuelMode::FuelOnly => "fuel_only",
            FuelMode::Combined => "combined",
        }
    }
}

impl fmt::Display for FuelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FuelMode {
    type Err = String;

    /// Accepts the snake-case names and the spelled-out table labels
    /// ("LNG only", "Fuel only", "Combined").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        match norm.as_str() {
            "lng_only" | "lng" => Ok(FuelMode::LngOnly),
            "fuel_only" | "fuel" => Ok(FuelMode::FuelOnly),
            "combined" | "both" => Ok(FuelMode::Combined),
            _ => Err(format!("unknown fuel mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub id: String,
    pub kind: ContractKind,
    pub port: String,
    /// First servable day.
    pub release: u32,
    /// Last servable day (inclusive).
    pub deadline: u32,
    pub v_min: f64,
    pub v_max: f64,
    /// Price per m³, one entry per day of the window starting at `release`.
    pub unit_price: Vec<f64>,
}

impl Contract {
    pub fn days(&self) -> RangeInclusive<u32> {
        self.release..=self.deadline
    }

    pub fn window_len(&self) -> u32 {
        self.deadline - self.release + 1
    }

    /// Window midpoint, rounded down on odd-length windows.
    pub fn midpoint(&self) -> u32 {
        self.release + (self.deadline - self.release) / 2
    }

    pub fn price_on(&self, day: u32) -> Option<f64> {
        day.checked_sub(self.release)
            .and_then(|k| self.unit_price.get(k as usize))
            .copied()
    }

    pub fn is_buy(&self) -> bool {
        self.kind == ContractKind::Buy
    }
}

/// One row of a vessel consumption table. Rates are per hour of sailing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionRow {
    pub fuel_mode: FuelMode,
    pub laden: bool,
    pub speed: f64,
    /// LNG-equivalent propulsion consumption, m³/h.
    pub consumption: f64,
    /// Cargo evaporation while sailing, m³/h.
    pub boil_off: f64,
    /// Cost of the non-LNG fuel component, money/h.
    pub fuel_cost_rate: f64,
}

fn default_fill() -> f64 {
    0.985
}

fn default_zone() -> (f64, f64) {
    (0.25, 0.75)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vessel {
    pub id: String,
    pub capacity: f64,
    #[serde(default = "default_fill")]
    pub fill_fraction: f64,
    /// Open band of onboard volume (as capacity fractions) forbidden at sea.
    #[serde(default = "default_zone")]
    pub forbidden_zone: (f64, f64),
    /// Stored in the bundle's consumption CSV, not in the JSON document.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub consumption_table: Vec<ConsumptionRow>,
    /// Boil-off while idling or operating in port, m³/day.
    pub idle_boil_off: f64,
    pub rent_start: u32,
    pub rent_end: u32,
    pub initial_port: String,
    pub final_port: String,
    pub initial_volume: f64,
    /// LNG kept aboard after each discharge to fuel the ballast leg.
    /// Defaults to [`Vessel::heel`]'s derived value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve_heel: Option<f64>,
}

impl Vessel {
    pub fn low_volume(&self) -> f64 {
        self.forbidden_zone.0 * self.capacity
    }

    pub fn high_volume(&self) -> f64 {
        self.forbidden_zone.1 * self.capacity
    }

    pub fn max_volume(&self) -> f64 {
        self.fill_fraction * self.capacity
    }

    /// Heel volume retained after discharges.
    pub fn heel(&self) -> f64 {
        self.reserve_heel.unwrap_or_else(|| {
            self.initial_volume
                .max(0.10 * self.capacity)
                .min(self.low_volume())
        })
    }

    pub fn fuel_modes(&self) -> Vec<FuelMode> {
        FuelMode::ALL
            .into_iter()
            .filter(|m| self.consumption_table.iter().any(|r| r.fuel_mode == *m))
            .collect()
    }

    /// Sorted, de-duplicated speeds available for `(mode, laden)`.
    pub fn speeds(&self, mode: FuelMode, laden: bool) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .consumption_table
            .iter()
            .filter(|r| r.fuel_mode == mode && r.laden == laden)
            .map(|r| r.speed)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn row(&self, mode: FuelMode, laden: bool, speed: f64) -> Option<&ConsumptionRow> {
        self.consumption_table
            .iter()
            .find(|r| r.fuel_mode == mode && r.laden == laden && r.speed == speed)
    }

    pub fn max_speed(&self) -> f64 {
        self.consumption_table
            .iter()
            .map(|r| r.speed)
            .fold(0.0, f64::max)
    }

    /// True when `volume` lies strictly inside the forbidden band.
    pub fn in_forbidden_band(&self, volume: f64) -> bool {
        volume > self.low_volume() && volume < self.high_volume()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub from: String,
    pub to: String,
    pub nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceEntry {
    pub port: String,
    pub day: u32,
    pub price: f64,
}

/// Plain, serializable form of an instance. Validation happens in
/// [`Instance::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceData {
    pub horizon_days: u32,
    pub ports: Vec<Port>,
    pub vessels: Vec<Vessel>,
    pub contracts: Vec<Contract>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distances: Vec<DistanceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prices: Vec<PriceEntry>,
}

/// Validated, indexed problem instance.
#[derive(Debug, Clone)]
pub struct Instance {
    data: InstanceData,
    port_index: HashMap<String, usize>,
    contract_index: HashMap<String, usize>,
    contract_port: Vec<usize>,
    vessel_ports: Vec<(usize, usize)>,
    /// Dense symmetric distance matrix, row-major over port positions.
    dist: Vec<f64>,
    /// Free price per `(port, day)`, row-major over port positions.
    free: Vec<f64>,
    max_capacity: f64,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl Instance {
    pub fn new(data: InstanceData) -> Result<Self, InstanceError> {
        let h = data.horizon_days;
        if h == 0 {
            return Err(invariant("instance", "horizon_days must be positive"));
        }
        let mut port_index = HashMap::new();
        for (i, p) in data.ports.iter().enumerate() {
            if port_index.insert(p.id.clone(), i).is_some() {
                return Err(invariant(format!("port `{}`", p.id), "duplicate id"));
            }
        }
        let np = data.ports.len();
        let port_of = |entity: &str, id: &str| {
            port_index
                .get(id)
                .copied()
                .ok_or_else(|| invariant(entity, format!("unknown port `{id}`")))
        };

        let mut dist = vec![f64::NAN; np * np];
        for i in 0..np {
            dist[i * np + i] = 0.0;
        }
        for e in &data.distances {
            let ent = format!("distance `{}`-`{}`", e.from, e.to);
            let a = port_of(&ent, &e.from)?;
            let b = port_of(&ent, &e.to)?;
            if !(e.nm.is_finite() && e.nm >= 0.0) {
                return Err(invariant(ent, "distance must be finite and non-negative"));
            }
            if a == b && e.nm != 0.0 {
                return Err(invariant(ent, "distance from a port to itself must be 0"));
            }
            for (x, y) in [(a, b), (b, a)] {
                let slot = &mut dist[x * np + y];
                if !slot.is_nan() && *slot != e.nm {
                    return Err(invariant(ent, "asymmetric or conflicting entries"));
                }
                *slot = e.nm;
            }
        }
        if let Some(k) = dist.iter().position(|d| d.is_nan()) {
            return Err(invariant(
                format!("distance `{}`-`{}`", data.ports[k / np].id, data.ports[k % np].id),
                "missing entry",
            ));
        }

        let mut free = vec![f64::NAN; np * h as usize];
        for e in &data.prices {
            let ent = format!("price `{}` day {}", e.port, e.day);
            let p = port_of(&ent, &e.port)?;
            if e.day >= h {
                return Err(invariant(ent, "day outside the horizon"));
            }
            if !(e.price.is_finite() && e.price >= 0.0) {
                return Err(invariant(ent, "price must be finite and non-negative"));
            }
            free[p * h as usize + e.day as usize] = e.price;
        }
        if let Some(k) = free.iter().position(|x| x.is_nan()) {
            return Err(invariant(
                format!(
                    "price `{}` day {}",
                    data.ports[k / h as usize].id,
                    k % h as usize
                ),
                "missing free price",
            ));
        }

        let mut contract_index = HashMap::new();
        let mut contract_port = Vec::with_capacity(data.contracts.len());
        for (i, c) in data.contracts.iter().enumerate() {
            let ent = format!("contract `{}`", c.id);
            if contract_index.insert(c.id.clone(), i).is_some() {
                return Err(invariant(ent, "duplicate id"));
            }
            contract_port.push(port_of(&ent, &c.port)?);
            if c.deadline < c.release {
                return Err(invariant(ent, "deadline before release date"));
            }
            if c.deadline >= h {
                return Err(invariant(ent, "window extends past the horizon"));
            }
            if !(c.v_min >= 0.0 && c.v_min <= c.v_max && c.v_max.is_finite()) {
                return Err(invariant(ent, "volume bounds must satisfy 0 <= v_min <= v_max"));
            }
            if c.unit_price.len() != c.window_len() as usize {
                return Err(invariant(ent, "one unit price per window day is required"));
            }
            if c.unit_price.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(invariant(ent, "unit prices must be finite and non-negative"));
            }
        }

        let mut vessel_ports = Vec::with_capacity(data.vessels.len());
        let mut seen = HashMap::new();
        for v in &data.vessels {
            let ent = format!("vessel `{}`", v.id);
            if seen.insert(v.id.clone(), ()).is_some() {
                return Err(invariant(ent, "duplicate id"));
            }
            vessel_ports.push((port_of(&ent, &v.initial_port)?, port_of(&ent, &v.final_port)?));
            let (lo, hi) = v.forbidden_zone;
            if !(v.capacity > 0.0 && 0.0 < lo && lo < hi && hi < v.fill_fraction && v.fill_fraction <= 1.0) {
                return Err(invariant(
                    ent,
                    "need capacity > 0 and 0 < low < high < fill_fraction <= 1",
                ));
            }
            if v.consumption_table.is_empty() {
                return Err(invariant(ent, "empty consumption table"));
            }
            for r in &v.consumption_table {
                if !(r.speed > 0.0 && r.consumption >= 0.0 && r.boil_off >= 0.0 && r.fuel_cost_rate >= 0.0) {
                    return Err(invariant(ent, format!("bad consumption row at {} kn", r.speed)));
                }
            }
            for m in v.fuel_modes() {
                for laden in [true, false] {
                    if v.speeds(m, laden).is_empty() {
                        return Err(invariant(
                            ent,
                            format!("mode {m} lacks {} rows", if laden { "laden" } else { "ballast" }),
                        ));
                    }
                }
            }
            if v.idle_boil_off < 0.0 {
                return Err(invariant(ent, "negative idle boil-off"));
            }
            if v.rent_start > v.rent_end || v.rent_end >= h {
                return Err(invariant(ent, "rent interval must lie within the horizon"));
            }
            if v.initial_volume < 0.0 || v.initial_volume > v.max_volume() {
                return Err(invariant(ent, "initial volume outside [0, fill capacity]"));
            }
            if v.in_forbidden_band(v.initial_volume) {
                return Err(invariant(ent, "initial volume inside the forbidden band"));
            }
            if let Some(hh) = v.reserve_heel {
                if !(hh >= 0.0 && hh <= v.low_volume()) {
                    return Err(invariant(ent, "reserve heel must lie in [0, low band]"));
                }
            }
        }
        let max_capacity = data.vessels.iter().map(|v| v.capacity).fold(0.0, f64::max);
        Ok(Self {
            data,
            port_index,
            contract_index,
            contract_port,
            vessel_ports,
            dist,
            free,
            max_capacity,
        })
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    pub fn horizon_days(&self) -> u32 {
        self.data.horizon_days
    }

    pub fn ports(&self) -> &[Port] {
        &self.data.ports
    }

    pub fn vessels(&self) -> &[Vessel] {
        &self.data.vessels
    }

    pub fn contracts(&self) -> &[Contract] {
        &self.data.contracts
    }

    pub fn contract(&self, c: usize) -> &Contract {
        &self.data.contracts[c]
    }

    pub fn vessel(&self, v: usize) -> &Vessel {
        &self.data.vessels[v]
    }

    pub fn port_index(&self, id: &str) -> Option<usize> {
        self.port_index.get(id).copied()
    }

    pub fn contract_index(&self, id: &str) -> Option<usize> {
        self.contract_index.get(id).copied()
    }

    pub fn vessel_index(&self, id: &str) -> Option<usize> {
        self.data.vessels.iter().position(|v| v.id == id)
    }

    /// Port position of contract `c`.
    pub fn contract_port(&self, c: usize) -> usize {
        self.contract_port[c]
    }

    /// `(initial, final)` port positions of vessel `v`.
    pub fn vessel_ports(&self, v: usize) -> (usize, usize) {
        self.vessel_ports[v]
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.data.ports.len() + b]
    }

    pub fn free_price(&self, port: usize, day: u32) -> f64 {
        self.free[port * self.data.horizon_days as usize + day as usize]
    }

    pub fn max_capacity(&self) -> f64 {
        self.max_capacity
    }

    /// A sell whose minimum volume is below a quarter of the largest hull.
    pub fn is_small(&self, c: usize) -> bool {
        let k = &self.data.contracts[c];
        k.kind == ContractKind::Sell && k.v_min < 0.25 * self.max_capacity
    }

    /// Small, or with a non-trivial volume range.
    pub fn is_flexible(&self, c: usize) -> bool {
        self.is_small(c) || self.data.contracts[c].v_min < self.data.contracts[c].v_max
    }

    pub fn max_sell_price(&self) -> f64 {
        self.data
            .contracts
            .iter()
            .filter(|c| c.kind == ContractKind::Sell)
            .flat_map(|c| c.unit_price.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn max_unit_price(&self) -> f64 {
        self.data
            .contracts
            .iter()
            .flat_map(|c| c.unit_price.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Parses a self-contained JSON document (tables embedded).
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let data: InstanceData = serde_json::from_str(text).map_err(|e| InstanceError::Parse {
            location: format!("json line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        Self::new(data)
    }

    /// Reads a self-contained JSON document from any byte source.
    pub fn from_reader(mut source: impl std::io::Read) -> Result<Self, InstanceError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.data).expect("instance data serializes")
    }
}

pub const BUNDLE_JSON: &str = "instance.json";
pub const BUNDLE_CONSUMPTION: &str = "consumption.csv";
pub const BUNDLE_DISTANCES: &str = "distances.csv";
pub const BUNDLE_PRICES: &str = "prices.csv";

#[derive(Serialize, Deserialize)]
struct ConsumptionCsv {
    vessel_name: String,
    fuel_mode: String,
    is_laden: String,
    speed_knots: f64,
    consumption_m3_per_hour: f64,
    boil_off_m3_per_hour: f64,
    fuel_cost_per_hour: f64,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "yes" | "true" | "1" | "y" => Some(true),
        "no" | "false" | "0" | "n" => Some(false),
        _ => None,
    }
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, InstanceError> {
    let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| {
        InstanceError::Parse {
            location: name.clone(),
            message: e.to_string(),
        }
    })?;
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e| InstanceError::Parse {
                location: match e.position() {
                    Some(p) => format!("{name} line {}", p.line()),
                    None => name.clone(),
                },
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), InstanceError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| std::io::Error::other(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a bundle directory: `instance.json` plus the consumption,
/// distance and price CSV tables.
pub fn load_bundle(dir: &Path) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(dir.join(BUNDLE_JSON))?;
    let mut data: InstanceData = serde_json::from_str(&text).map_err(|e| InstanceError::Parse {
        location: format!("{BUNDLE_JSON} line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;

    let rows: Vec<ConsumptionCsv> = read_csv(&dir.join(BUNDLE_CONSUMPTION))?;
    for (k, r) in rows.into_iter().enumerate() {
        let location = format!("{BUNDLE_CONSUMPTION} row {}", k + 1);
        let fuel_mode = r.fuel_mode.parse().map_err(|message| InstanceError::Parse {
            location: location.clone(),
            message,
        })?;
        let laden = parse_flag(&r.is_laden).ok_or_else(|| InstanceError::Parse {
            location: location.clone(),
            message: format!("bad laden flag `{}`", r.is_laden),
        })?;
        let v = data
            .vessels
            .iter_mut()
            .find(|v| v.id == r.vessel_name)
            .ok_or_else(|| invariant(location, format!("unknown vessel `{}`", r.vessel_name)))?;
        v.consumption_table.push(ConsumptionRow {
            fuel_mode,
            laden,
            speed: r.speed_knots,
            consumption: r.consumption_m3_per_hour,
            boil_off: r.boil_off_m3_per_hour,
            fuel_cost_rate: r.fuel_cost_per_hour,
        });
    }
    data.distances = read_csv(&dir.join(BUNDLE_DISTANCES))?;
    data.prices = read_csv(&dir.join(BUNDLE_PRICES))?;
    Instance::new(data)
}

/// Writes `instance` as a bundle directory (created if missing).
///
/// Output is canonical: loading and saving again reproduces identical bytes.
pub fn save_bundle(instance: &Instance, dir: &Path) -> Result<(), InstanceError> {
    std::fs::create_dir_all(dir)?;
    let mut doc = instance.data.clone();
    doc.distances.clear();
    doc.prices.clear();
    let mut rows = Vec::new();
    for v in &mut doc.vessels {
        for r in std::mem::take(&mut v.consumption_table) {
            rows.push(ConsumptionCsv {
                vessel_name: v.id.clone(),
                fuel_mode: r.fuel_mode.to_string(),
                is_laden: if r.laden { "yes" } else { "no" }.into(),
                speed_knots: r.speed,
                consumption_m3_per_hour: r.consumption,
                boil_off_m3_per_hour: r.boil_off,
                fuel_cost_per_hour: r.fuel_cost_rate,
            });
        }
    }
    let mut json = serde_json::to_string_pretty(&doc).expect("instance data serializes");
    json.push('\n');
    std::fs::write(dir.join(BUNDLE_JSON), json)?;
    write_csv(&dir.join(BUNDLE_CONSUMPTION), rows)?;

    let ports = instance.ports();
    let mut dists = Vec::new();
    for a in 0..ports.len() {
        for b in a + 1..ports.len() {
            dists.push(DistanceEntry {
                from: ports[a].id.clone(),
                to: ports[b].id.clone(),
                nm: instance.distance(a, b),
            });
        }
    }
    write_csv(&dir.join(BUNDLE_DISTANCES), dists)?;

    let h = instance.horizon_days();
    let prices = (0..ports.len()).flat_map(|p| {
        (0..h).map(move |d| PriceEntry {
            port: ports[p].id.clone(),
            day: d,
            price: instance.free_price(p, d),
        })
    });
    write_csv(&dir.join(BUNDLE_PRICES), prices)?;
    Ok(())
}

/// Small hand-built instances used by tests, examples and benches.
pub mod fixtures {
    use super::*;

    /// Consumption rows of the "Seal" example vessel (LNG only, laden).
    pub const SEAL_LADEN: [(f64, f64, f64); 10] = [
        (20.5, 9.73e-6, 8.29e-6),
        (20.0, 9.06e-6, 8.29e-6),
        (19.5, 8.52e-6, 8.29e-6),
        (19.0, 8.02e-6, 8.29e-6),
        (18.5, 7.53e-6, 8.29e-6),
        (18.0, 7.07e-6, 8.29e-6),
        (17.5, 6.70e-6, 6.78e-6),
        (17.0, 6.34e-6, 6.78e-6),
        (16.5, 6.01e-6, 6.78e-6),
        (16.0, 5.73e-6, 6.78e-6),
    ];

    pub fn seal() -> Vessel {
        let mut table = Vec::new();
        for laden in [true, false] {
            for (s, c, b) in SEAL_LADEN {
                table.push(ConsumptionRow {
                    fuel_mode: FuelMode::LngOnly,
                    laden,
                    speed: s,
                    consumption: c,
                    boil_off: b,
                    fuel_cost_rate: 0.0,
                });
            }
        }
        Vessel {
            id: "Seal".into(),
            capacity: 170_000.0,
            fill_fraction: 0.985,
            forbidden_zone: (0.25, 0.75),
            consumption_table: table,
            idle_boil_off: 120.0,
            rent_start: 0,
            rent_end: 59,
            initial_port: "A".into(),
            final_port: "A".into(),
            initial_volume: 5_000.0,
            reserve_heel: None,
        }
    }

    pub fn contract(id: &str, kind: ContractKind, port: &str, r: u32, d: u32, lo: f64, hi: f64, price: f64) -> Contract {
        Contract {
            id: id.into(),
            kind,
            port: port.into(),
            release: r,
            deadline: d,
            v_min: lo,
            v_max: hi,
            unit_price: vec![price; (d - r + 1) as usize],
        }
    }

    /// One vessel, one buy at port A, one sell at port B.
    pub fn minimal() -> InstanceData {
        let h = 60;
        let ports = vec![
            Port { id: "A".into(), name: "Alpha".into() },
            Port { id: "B".into(), name: "Beta".into() },
        ];
        let mut prices = Vec::new();
        for p in ["A", "B"] {
            for d in 0..h {
                prices.push(PriceEntry { port: p.into(), day: d, price: 200.0 });
            }
        }
        InstanceData {
            horizon_days: h,
            ports,
            vessels: vec![seal()],
            contracts: vec![
                contract("b1", ContractKind::Buy, "A", 2, 3, 130_000.0, 160_000.0, 200.0),
                contract("s1", ContractKind::Sell, "B", 20, 22, 100_000.0, 150_000.0, 500.0),
            ],
            distances: vec![DistanceEntry { from: "A".into(), to: "B".into(), nm: 3000.0 }],
            prices,
        }
    }
}
