//! Seeded synthetic instances and the flexibility-reduction transform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{
    ConsumptionRow, Contract, ContractKind, DistanceEntry, FuelMode, Instance, InstanceData,
    InstanceError, Port, PriceEntry, Vessel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_vessels: usize,
    pub n_buy: usize,
    pub n_sell: usize,
    /// Minimum share of sells drawn as small contracts.
    pub small_fraction: f64,
    pub horizon_days: u32,
    pub n_ports: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_vessels: 4,
            n_buy: 52,
            n_sell: 200,
            small_fraction: 0.665,
            horizon_days: 885,
            n_ports: 12,
        }
    }
}

/// Error for out-of-range generator parameters.
#[derive(Debug, thiserror::Error)]
#[error("generator parameter `{name}`: {message}")]
pub struct ParamError {
    pub name: &'static str,
    pub message: String,
}

fn check(cond: bool, name: &'static str, message: &str) -> Result<(), ParamError> {
    if cond {
        Ok(())
    } else {
        Err(ParamError {
            name,
            message: message.into(),
        })
    }
}

const HULLS: [f64; 3] = [145_000.0, 160_000.0, 174_000.0];
const SPEEDS: [f64; 10] = [16.0, 16.5, 17.0, 17.5, 18.0, 18.5, 19.0, 19.5, 20.0, 20.5];
/// Marine gas oil cost per m³ of LNG-equivalent propulsion energy.
const FUEL_OIL_PRICE: f64 = 330.0;

fn consumption_table(rng: &mut ChaCha8Rng, capacity: f64) -> Vec<ConsumptionRow> {
    // Propulsion scales with the cube of speed around a 19 kn design point.
    let design = 5.4 * (capacity / 160_000.0) * rng.gen_range(0.9..1.1);
    let mut rows = Vec::new();
    for mode in FuelMode::ALL {
        for laden in [true, false] {
            let hull = if laden { 1.0 } else { 0.88 };
            let evap = if laden { 0.0010 } else { 0.0004 } * capacity / 24.0;
            for s in SPEEDS {
                let prop = design * hull * (s / 19.0).powi(3);
                let (lng, cost) = match mode {
                    FuelMode::LngOnly => (prop, 0.0),
                    FuelMode::FuelOnly => (prop, prop * FUEL_OIL_PRICE),
                    FuelMode::Combined => (0.6 * prop, 0.4 * prop * FUEL_OIL_PRICE),
                };
                rows.push(ConsumptionRow {
                    fuel_mode: mode,
                    laden,
                    speed: s,
                    consumption: round_to(lng, 1e-4),
                    boil_off: round_to(evap, 1e-4),
                    fuel_cost_rate: round_to(cost, 1e-2),
                });
            }
        }
    }
    rows
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Draws a window length in extra days: mostly single-day windows.
fn window_extra(rng: &mut ChaCha8Rng) -> u32 {
    let u: f64 = rng.gen();
    if u < 0.55 {
        0
    } else if u < 0.75 {
        1
    } else if u < 0.9 {
        2
    } else {
        3
    }
}

/// Generates a synthetic instance. Identical seeds give identical instances.
///
/// Ports sit on a plane split into a supply region and a demand region.
/// Buys are placed at supply ports below the local free price and sells at
/// demand ports above it, so profitable buy→sell pairs exist.
pub fn generate_instance(seed: u64, p: &GeneratorParams) -> Result<Instance, InstanceError> {
    let bad = |e: ParamError| InstanceError::Invariant {
        entity: "generator parameters".into(),
        message: e.to_string(),
    };
    check(p.n_vessels > 0, "n_vessels", "must be positive").map_err(bad)?;
    check(p.n_buy > 0, "n_buy", "must be positive").map_err(bad)?;
    check(p.n_sell > 0, "n_sell", "must be positive").map_err(bad)?;
    check(p.n_ports >= 2, "n_ports", "need at least two ports").map_err(bad)?;
    check(p.horizon_days >= 10, "horizon_days", "must be at least 10").map_err(bad)?;
    check(
        (0.0..=1.0).contains(&p.small_fraction),
        "small_fraction",
        "must lie in [0, 1]",
    )
    .map_err(bad)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = p.horizon_days;

    let n_supply = (p.n_ports / 3).max(1);
    let mut coords = Vec::<(f64, f64)>::with_capacity(p.n_ports);
    let mut ports = Vec::with_capacity(p.n_ports);
    let mut premium = Vec::with_capacity(p.n_ports);
    for i in 0..p.n_ports {
        let supply = i < n_supply;
        let x = if supply {
            rng.gen_range(0.0..1800.0)
        } else {
            rng.gen_range(1500.0..5200.0)
        };
        coords.push((x, rng.gen_range(0.0..2600.0)));
        ports.push(Port {
            id: format!("P{i:02}"),
            name: format!("{} {i}", if supply { "Supply" } else { "Market" }),
        });
        premium.push(if supply {
            rng.gen_range(-0.12..-0.04)
        } else {
            rng.gen_range(0.04..0.16)
        });
    }
    let mut distances = Vec::new();
    for a in 0..p.n_ports {
        for b in a + 1..p.n_ports {
            let (dx, dy) = (coords[a].0 - coords[b].0, coords[a].1 - coords[b].1);
            distances.push(DistanceEntry {
                from: ports[a].id.clone(),
                to: ports[b].id.clone(),
                nm: (dx * dx + dy * dy).sqrt().round(),
            });
        }
    }

    // Shared market level with seasonality and a bounded random walk.
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut walk = 0.0f64;
    let mut level = Vec::with_capacity(h as usize);
    for d in 0..h {
        walk = (walk + rng.gen_range(-2.0..2.0)).clamp(-25.0, 25.0);
        let season = 25.0 * ((d as f64) * std::f64::consts::TAU / 365.0 + phase).sin();
        level.push(230.0 + season + walk);
    }
    let mut prices = Vec::with_capacity(p.n_ports * h as usize);
    for (i, port) in ports.iter().enumerate() {
        let wobble = rng.gen_range(0.0..std::f64::consts::TAU);
        for d in 0..h {
            let local = 1.0 + premium[i] + 0.01 * ((d as f64) / 9.0 + wobble).sin();
            prices.push(PriceEntry {
                port: port.id.clone(),
                day: d,
                price: round_to(level[d as usize] * local, 0.01),
            });
        }
    }
    let free = |port: usize, day: u32| level[day as usize] * (1.0 + premium[port]);

    let mut vessels = Vec::with_capacity(p.n_vessels);
    for k in 0..p.n_vessels {
        let capacity = HULLS[rng.gen_range(0..HULLS.len())];
        let start = rng.gen_range(0..n_supply);
        let end = rng.gen_range(0..p.n_ports);
        vessels.push(Vessel {
            id: format!("V{k}"),
            capacity,
            fill_fraction: 0.985,
            forbidden_zone: (0.25, 0.75),
            consumption_table: consumption_table(&mut rng, capacity),
            idle_boil_off: round_to(0.0008 * capacity, 0.1),
            rent_start: 0,
            rent_end: h - 1,
            initial_port: ports[start].id.clone(),
            final_port: ports[end].id.clone(),
            initial_volume: round_to(rng.gen_range(0.05..0.10) * capacity, 1.0),
            reserve_heel: None,
        });
    }
    let cap_max = vessels.iter().map(|v| v.capacity).fold(0.0, f64::max);
    let cap_min = vessels.iter().map(|v| v.capacity).fold(f64::INFINITY, f64::min);

    let mut contracts = Vec::with_capacity(p.n_buy + p.n_sell);
    let window = |rng: &mut ChaCha8Rng| {
        let extra = window_extra(rng);
        let r = rng.gen_range(0..h - extra);
        (r, r + extra)
    };
    for i in 0..p.n_buy {
        let port = rng.gen_range(0..n_supply);
        let (r, d) = window(&mut rng);
        let v_max = round_to(rng.gen_range(0.80..0.97) * cap_min, 100.0);
        let v_min = if rng.gen_bool(0.2) {
            v_max
        } else {
            round_to(v_max * rng.gen_range(0.82..0.98), 100.0)
        };
        let discount = rng.gen_range(0.90..0.99);
        contracts.push(Contract {
            id: format!("B{i:03}"),
            kind: ContractKind::Buy,
            port: ports[port].id.clone(),
            release: r,
            deadline: d,
            v_min,
            v_max,
            unit_price: (r..=d).map(|day| round_to(free(port, day) * discount, 0.01)).collect(),
        });
    }
    let n_small = ((p.small_fraction * p.n_sell as f64).ceil() as usize).min(p.n_sell);
    for i in 0..p.n_sell {
        let port = rng.gen_range(n_supply..p.n_ports);
        let (r, d) = window(&mut rng);
        let small = i < n_small;
        let (v_min, v_max, markup) = if small {
            let lo = round_to(rng.gen_range(0.02..0.12) * cap_max, 100.0);
            let hi = round_to(lo * rng.gen_range(1.2..2.2), 100.0);
            (lo, hi, rng.gen_range(1.06..1.22))
        } else {
            let hi = round_to(rng.gen_range(0.62..0.95) * cap_max, 100.0);
            let lo = if rng.gen_bool(0.2) {
                hi
            } else {
                round_to(hi * rng.gen_range(0.5..0.95), 100.0).max(0.25 * cap_max).min(hi)
            };
            (lo, hi, rng.gen_range(1.0..1.12))
        };
        contracts.push(Contract {
            id: format!("S{i:03}"),
            kind: ContractKind::Sell,
            port: ports[port].id.clone(),
            release: r,
            deadline: d,
            v_min,
            v_max,
            unit_price: (r..=d).map(|day| round_to(free(port, day) * markup, 0.01)).collect(),
        });
    }
    // Interleave small and big sells so ids carry no information.
    let sells = &mut contracts[p.n_buy..];
    sells.shuffle(&mut rng);
    for (i, c) in sells.iter_mut().enumerate() {
        c.id = format!("S{i:03}");
    }

    Instance::new(InstanceData {
        horizon_days: h,
        ports,
        vessels,
        contracts,
        distances,
        prices,
    })
}

/// Share of flexible contracts among all contracts.
pub fn flexible_share(instance: &Instance) -> f64 {
    let n = instance.contracts().len();
    if n == 0 {
        return 0.0;
    }
    (0..n).filter(|&c| instance.is_flexible(c)).count() as f64 / n as f64
}

/// Reduces volume flexibility to approximately `keep_fraction`.
///
/// Flexible contracts get a seeded priority; the `k` highest keep their
/// bounds and every other one has `v_min` raised to `v_max`. Sells that are
/// still small after that are dropped. `k` minimizes the distance between the
/// resulting flexible share and `keep_fraction` (ties to smaller `k`), so the
/// kept sets are nested across fractions.
pub fn restrict_flexibility(instance: &Instance, keep_fraction: f64, seed: u64) -> Instance {
    let keep_fraction = keep_fraction.clamp(0.0, 1.0);
    let n = instance.contracts().len();
    let mut flexible: Vec<usize> = (0..n).filter(|&c| instance.is_flexible(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    flexible.shuffle(&mut rng);

    let cap_max = instance.max_capacity();
    // A frozen contract is dropped iff it is a sell whose v_max is small.
    let dropped_if_frozen = |c: usize| {
        let k = instance.contract(c);
        k.kind == ContractKind::Sell && k.v_max < 0.25 * cap_max
    };
    let total_dropped = flexible.iter().filter(|&&c| dropped_if_frozen(c)).count();
    let mut best_k = 0;
    let mut best_err = f64::INFINITY;
    let mut dropped = total_dropped;
    for k in 0..=flexible.len() {
        if k > 0 && dropped_if_frozen(flexible[k - 1]) {
            dropped -= 1;
        }
        let remaining = n - dropped;
        let share = if remaining == 0 {
            0.0
        } else {
            k as f64 / remaining as f64
        };
        let err = (share - keep_fraction).abs();
        if err < best_err - 1e-12 {
            best_err = err;
            best_k = k;
        }
    }
    if best_k == flexible.len() {
        return instance.clone();
    }

    let mut data = instance.data().clone();
    let frozen: std::collections::HashSet<usize> = flexible[best_k..].iter().copied().collect();
    let mut keep = Vec::with_capacity(n);
    for (i, c) in data.contracts.iter_mut().enumerate() {
        if frozen.contains(&i) {
            c.v_min = c.v_max;
            if dropped_if_frozen(i) {
                keep.push(false);
                continue;
            }
        }
        keep.push(true);
    }
    let mut it = keep.into_iter();
    data.contracts.retain(|_| it.next().unwrap_or(true));
    Instance::new(data).expect("restriction preserves instance invariants")
}
