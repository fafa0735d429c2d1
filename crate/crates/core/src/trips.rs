//! Trip enumeration and per-trip metrics.
//!
//! Day conventions used throughout the crate: an operation at a contract
//! occupies the whole service day `d`, i.e. hours `[24d, 24(d+1))`. A vessel
//! leaving a contract served on day `d` departs at hour `24(d+1)` and must
//! reach the next contract served on day `e` by hour `24e`. Every trip also
//! pays idle boil-off for the remainder of the time until the end of the
//! destination's operation day, so consecutive trips tile the rent period.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{ContractKind, FuelMode, Instance, Vessel};
use crate::parallel::{self, Parallelism};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TripError {
    #[error("vessel {vessel} has no {mode} row (laden: {laden}) at {speed} kn")]
    MissingRow {
        vessel: String,
        mode: FuelMode,
        laden: bool,
        speed: f64,
    },
}

/// Moving time in days between the window midpoints of two contracts,
/// minus the day spent operating. Negative values mean the pair cannot be
/// served in that order.
pub fn travel_time(ci: &crate::instance::Contract, cj: &crate::instance::Contract) -> i64 {
    let half = |c: &crate::instance::Contract| i64::from((c.deadline - c.release) / 2);
    i64::from(cj.release) - i64::from(ci.release) + half(cj) - half(ci) - 1
}

/// Smallest table speed covering `distance` within `time_days`.
///
/// A zero distance is always coverable at the slowest speed, even with no
/// time available.
pub fn select_speed(
    vessel: &Vessel,
    mode: FuelMode,
    laden: bool,
    distance: f64,
    time_days: f64,
) -> Option<f64> {
    pick_speed(&vessel.speeds(mode, laden), distance, 24.0 * time_days)
}

/// Relative slack when comparing a table speed to the required one.
const SPEED_SLACK: f64 = 1e-12;

pub(crate) fn pick_speed(sorted: &[f64], distance: f64, hours: f64) -> Option<f64> {
    let slowest = *sorted.first()?;
    if distance <= 0.0 {
        return Some(slowest);
    }
    if hours <= 0.0 {
        return None;
    }
    let need = distance / hours;
    sorted.iter().copied().find(|&s| s >= need * (1.0 - SPEED_SLACK))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burn {
    /// LNG leaving the tank, m³.
    pub lng_used: f64,
    /// Cost of non-LNG fuel.
    pub fuel_cost: f64,
}

/// LNG and fuel-oil use of one leg.
///
/// In `fuel_only` mode propulsion runs on oil, so the tank only loses
/// boil-off; the other modes draw the row's LNG-equivalent consumption too.
pub fn leg_burn(
    vessel: &Vessel,
    mode: FuelMode,
    laden: bool,
    speed: f64,
    sail_hours: f64,
    idle_hours: f64,
) -> Result<Burn, TripError> {
    let row = vessel
        .row(mode, laden, speed)
        .ok_or_else(|| TripError::MissingRow {
            vessel: vessel.id.clone(),
            mode,
            laden,
            speed,
        })?;
    let per_hour = match mode {
        FuelMode::FuelOnly => row.boil_off,
        FuelMode::LngOnly | FuelMode::Combined => row.consumption + row.boil_off,
    };
    let fuel_cost = match mode {
        FuelMode::LngOnly => 0.0,
        FuelMode::FuelOnly | FuelMode::Combined => sail_hours * row.fuel_cost_rate,
    };
    Ok(Burn {
        lng_used: sail_hours * per_hour + idle_hours * vessel.idle_boil_off / 24.0,
        fuel_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripKind {
    Initial,
    Laden,
    Ballast,
    Final,
}

impl TripKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TripKind::Initial => "initial",
            TripKind::Laden => "laden",
            TripKind::Ballast => "ballast",
            TripKind::Final => "final",
        }
    }
}

/// Where a trip starts or ends. Terminal days are the rent start for an
/// origin and the last rent day for a destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Terminal { port: usize, day: u32 },
    Contract { contract: usize, day: u32 },
}

impl Endpoint {
    pub fn day(&self) -> u32 {
        match *self {
            Endpoint::Terminal { day, .. } | Endpoint::Contract { day, .. } => day,
        }
    }

    pub fn contract(&self) -> Option<usize> {
        match *self {
            Endpoint::Contract { contract, .. } => Some(contract),
            Endpoint::Terminal { .. } => None,
        }
    }

    pub fn port(&self, instance: &Instance) -> usize {
        match *self {
            Endpoint::Terminal { port, .. } => port,
            Endpoint::Contract { contract, .. } => instance.contract_port(contract),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: usize,
    pub kind: TripKind,
    pub vessel: usize,
    pub start: Endpoint,
    pub end: Endpoint,
    pub fuel_mode: FuelMode,
    pub speed: f64,
    pub sail_hours: f64,
    pub idle_hours: f64,
    pub lng_burn: f64,
    pub fuel_cost: f64,
    /// Volume loaded at the buy of a laden trip.
    pub buy_volume: f64,
    /// Volume delivered at the sell of a laden trip.
    pub traded_volume: f64,
    /// Excess discharged beyond the sell's maximum on a laden trip.
    pub waste: f64,
    /// Out-of-contract LNG bought at the destination buy to restore the heel.
    pub free_purchase: f64,
    pub profit: f64,
    /// Over-delivery `w_t`.
    pub over_delivery: f64,
    /// Multi-destination potential `y_t`.
    pub potential: u32,
}

impl Trip {
    pub fn laden(&self) -> bool {
        self.kind == TripKind::Laden
    }
}

/// Trip profit recomputed from the trip's volumes and the instance prices.
pub fn trip_profit(trip: &Trip, instance: &Instance) -> f64 {
    let price = |e: &Endpoint| {
        let c = e.contract().expect("contract endpoint");
        instance
            .contract(c)
            .price_on(e.day())
            .expect("service day inside window")
    };
    let free = |e: &Endpoint| instance.free_price(e.port(instance), e.day());
    match trip.kind {
        TripKind::Laden => {
            price(&trip.end) * trip.traded_volume
                - price(&trip.start) * trip.buy_volume
                - trip.fuel_cost
        }
        TripKind::Initial | TripKind::Ballast => {
            -trip.fuel_cost - free(&trip.end) * trip.free_purchase
        }
        TripKind::Final => -trip.fuel_cost,
    }
}

/// Over-delivery of a laden trip: what remains of the minimum purchase after
/// burn when the sell takes its maximum.
pub fn over_delivery(buy_min: f64, sell_max: f64, burn: f64) -> f64 {
    (buy_min - sell_max - burn).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyParams {
    /// Penalty per m³ of over-delivery.
    pub over_delivery_penalty: f64,
    /// Reward per insertable small sell.
    pub potential_reward: f64,
}

impl PenaltyParams {
    pub fn new(o: f64, r: f64) -> Self {
        Self {
            over_delivery_penalty: o,
            potential_reward: r,
        }
    }
}

/// Penalized trip value.
pub fn penalize(trip: &Trip, params: &PenaltyParams) -> f64 {
    trip.profit - params.over_delivery_penalty * trip.over_delivery
        + params.potential_reward * f64::from(trip.potential)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[derive(Default)]
pub struct TripConfig {
    /// Drop laden and ballast trips that would wait more than this many
    /// days beyond the minimum sailing time. `None` keeps every trip.
    pub max_idle_days: Option<f64>,
    pub parallelism: Parallelism,
}


/// Index key: (vessel, contract, service day).
pub type NodeKey = (usize, usize, u32);

#[derive(Debug, Clone, Default)]
pub struct TripSet {
    pub trips: Vec<Trip>,
    /// Laden trips touching each contract.
    pub by_contract: Vec<Vec<usize>>,
    /// Trips arriving at a (vessel, contract, day) node.
    pub arrivals: BTreeMap<NodeKey, Vec<usize>>,
    /// Trips departing a (vessel, contract, day) node.
    pub departures: BTreeMap<NodeKey, Vec<usize>>,
    pub initial: Vec<Vec<usize>>,
    pub finals: Vec<Vec<usize>>,
}

impl TripSet {
    /// Builds the index structures. Trip ids are reassigned to positions.
    pub fn from_trips(n_contracts: usize, n_vessels: usize, mut trips: Vec<Trip>) -> Self {
        let mut set = TripSet {
            by_contract: vec![Vec::new(); n_contracts],
            initial: vec![Vec::new(); n_vessels],
            finals: vec![Vec::new(); n_vessels],
            ..Default::default()
        };
        for (i, t) in trips.iter_mut().enumerate() {
            t.id = i;
            if t.kind == TripKind::Laden {
                for e in [t.start, t.end] {
                    if let Some(c) = e.contract() {
                        set.by_contract[c].push(i);
                    }
                }
            }
            match t.kind {
                TripKind::Initial => set.initial[t.vessel].push(i),
                TripKind::Final => set.finals[t.vessel].push(i),
                _ => {}
            }
            if let Endpoint::Contract { contract, day } = t.end {
                set.arrivals.entry((t.vessel, contract, day)).or_default().push(i);
            }
            if let Endpoint::Contract { contract, day } = t.start {
                set.departures.entry((t.vessel, contract, day)).or_default().push(i);
            }
        }
        set.trips = trips;
        set
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    /// Every (vessel, contract, day) node touched by some trip, sorted.
    pub fn nodes(&self) -> Vec<NodeKey> {
        let mut keys: Vec<NodeKey> = self
            .arrivals
            .keys()
            .chain(self.departures.keys())
            .copied()
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    pub fn penalized(&self, params: &PenaltyParams) -> Vec<f64> {
        self.trips.iter().map(|t| penalize(t, params)).collect()
    }

    /// Largest `|P_t|` and `y_t`, used to scale the default tuning grid.
    pub fn metric_ranges(&self) -> (f64, u32) {
        let p = self.trips.iter().map(|t| t.profit.abs()).fold(0.0, f64::max);
        let y = self.trips.iter().map(|t| t.potential).max().unwrap_or(0);
        (p, y)
    }

    /// One CSV row per trip with all fields and metrics.
    pub fn write_csv<W: Write>(&self, instance: &Instance, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id", "kind", "vessel", "start", "start_day", "end", "end_day", "fuel_mode",
            "speed", "sail_hours", "idle_hours", "lng_burn", "fuel_cost", "buy_volume",
            "traded_volume", "waste", "free_purchase", "profit", "over_delivery", "potential",
        ])?;
        let name = |e: &Endpoint| match *e {
            Endpoint::Terminal { port, .. } => format!("port:{}", instance.ports()[port].id),
            Endpoint::Contract { contract, .. } => instance.contract(contract).id.clone(),
        };
        for t in &self.trips {
            w.write_record([
                t.id.to_string(),
                t.kind.as_str().to_string(),
                instance.vessel(t.vessel).id.clone(),
                name(&t.start),
                t.start.day().to_string(),
                name(&t.end),
                t.end.day().to_string(),
                t.fuel_mode.as_str().to_string(),
                t.speed.to_string(),
                t.sail_hours.to_string(),
                t.idle_hours.to_string(),
                t.lng_burn.to_string(),
                t.fuel_cost.to_string(),
                t.buy_volume.to_string(),
                t.traded_volume.to_string(),
                t.waste.to_string(),
                t.free_purchase.to_string(),
                t.profit.to_string(),
                t.over_delivery.to_string(),
                t.potential.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Small sells with their midpoint day and port, for the potential count.
#[derive(Debug, Clone)]
struct SmallSell {
    contract: usize,
    port: usize,
    day: u32,
}

fn small_sells(instance: &Instance) -> Vec<SmallSell> {
    (0..instance.contracts().len())
        .filter(|&c| instance.is_small(c))
        .map(|c| SmallSell {
            contract: c,
            port: instance.contract_port(c),
            day: instance.contract(c).midpoint(),
        })
        .collect()
}

/// Counts small sells a vessel could visit between two endpoints, each
/// checked on its own with a start→small→end detour at maximum speed.
fn potential_between(
    instance: &Instance,
    smalls: &[SmallSell],
    vmax: f64,
    start: Endpoint,
    end: Endpoint,
) -> u32 {
    let (ps, ds) = (start.port(instance), start.day());
    let (pe, de) = (end.port(instance), end.day());
    let own = [start.contract(), end.contract()];
    smalls
        .iter()
        .filter(|s| {
            if own.contains(&Some(s.contract)) || s.day <= ds || s.day >= de {
                return false;
            }
            let before = 24.0 * f64::from(s.day - ds - 1);
            let after = 24.0 * f64::from(de - s.day - 1);
            instance.distance(ps, s.port) / vmax <= before
                && instance.distance(s.port, pe) / vmax <= after
        })
        .count() as u32
}

/// Multi-destination potential of a laden or ballast trip.
pub fn multi_destination_potential(trip: &Trip, instance: &Instance) -> u32 {
    if matches!(trip.kind, TripKind::Initial | TripKind::Final) {
        return 0;
    }
    let vmax = instance.vessel(trip.vessel).max_speed();
    potential_between(instance, &small_sells(instance), vmax, trip.start, trip.end)
}

/// Enumerates all feasible trips with default settings.
pub fn generate_trips(instance: &Instance) -> TripSet {
    generate_trips_with(instance, &TripConfig::default())
}

/// Enumerates all feasible trips; vessels are processed independently.
pub fn generate_trips_with(instance: &Instance, cfg: &TripConfig) -> TripSet {
    let smalls = small_sells(instance);
    let vessels: Vec<usize> = (0..instance.vessels().len()).collect();
    let per_vessel = parallel::map(&vessels, cfg.parallelism, |&v| {
        VesselTrips::new(instance, v, cfg, &smalls).generate()
    });
    let mut trips: Vec<Trip> = per_vessel.into_iter().flatten().collect();
    trips.sort_by(|a, b| {
        (a.vessel, a.kind, a.start, a.end, a.fuel_mode)
            .cmp(&(b.vessel, b.kind, b.start, b.end, b.fuel_mode))
    });
    TripSet::from_trips(instance.contracts().len(), instance.vessels().len(), trips)
}

/// Absolute tolerance on volumes, m³.
const VOL_EPS: f64 = 1e-6;

struct VesselTrips<'a> {
    inst: &'a Instance,
    v: usize,
    vessel: &'a Vessel,
    cfg: &'a TripConfig,
    smalls: &'a [SmallSell],
    heel: f64,
    vmax: f64,
    buys: Vec<usize>,
    sells: Vec<usize>,
    out: Vec<Trip>,
}

/// Sailing facts of one leg at its selected speed.
struct Sailing {
    speed: f64,
    sail: f64,
    idle: f64,
    burn: Burn,
}

impl<'a> VesselTrips<'a> {
    fn new(inst: &'a Instance, v: usize, cfg: &'a TripConfig, smalls: &'a [SmallSell]) -> Self {
        let vessel = inst.vessel(v);
        let kind_of = |k: ContractKind| {
            (0..inst.contracts().len())
                .filter(|&c| inst.contract(c).kind == k)
                .collect::<Vec<_>>()
        };
        Self {
            inst,
            v,
            vessel,
            cfg,
            smalls,
            heel: vessel.heel(),
            vmax: vessel.max_speed(),
            buys: kind_of(ContractKind::Buy),
            sells: kind_of(ContractKind::Sell),
            out: Vec::new(),
        }
    }

    fn rent_days(&self, c: usize) -> impl Iterator<Item = u32> + '_ {
        let k = self.inst.contract(c);
        let lo = k.release.max(self.vessel.rent_start);
        let hi = k.deadline.min(self.vessel.rent_end);
        lo..=hi
    }

    /// Selects the speed for a leg with `budget` sailing hours and computes
    /// its burn, with `span` hours from departure to the end of the trip.
    fn sail(
        &self,
        speeds: &[f64],
        mode: FuelMode,
        laden: bool,
        distance: f64,
        budget: f64,
        span: f64,
    ) -> Option<Sailing> {
        let speed = pick_speed(speeds, distance, budget)?;
        let sail = if distance > 0.0 { distance / speed } else { 0.0 };
        let idle = (span - sail).max(0.0);
        let burn = leg_burn(self.vessel, mode, laden, speed, sail, idle).ok()?;
        Some(Sailing {
            speed,
            sail,
            idle,
            burn,
        })
    }

    fn idle_ok(&self, budget: f64, sail: f64) -> bool {
        self.cfg
            .max_idle_days
            .is_none_or(|k| (budget - sail) / 24.0 <= k + 1e-9)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: TripKind,
        start: Endpoint,
        end: Endpoint,
        mode: FuelMode,
        s: &Sailing,
        volumes: [f64; 4],
        profit: f64,
        over_delivery: f64,
    ) {
        let potential = match kind {
            TripKind::Laden | TripKind::Ballast => {
                potential_between(self.inst, self.smalls, self.vmax, start, end)
            }
            _ => 0,
        };
        let [buy_volume, traded_volume, waste, free_purchase] = volumes;
        self.out.push(Trip {
            id: 0,
            kind,
            vessel: self.v,
            start,
            end,
            fuel_mode: mode,
            speed: s.speed,
            sail_hours: s.sail,
            idle_hours: s.idle,
            lng_burn: s.burn.lng_used,
            fuel_cost: s.burn.fuel_cost,
            buy_volume,
            traded_volume,
            waste,
            free_purchase,
            profit,
            over_delivery,
            potential,
        });
    }

    fn generate(mut self) -> Vec<Trip> {
        for mode in self.vessel.fuel_modes() {
            let laden = self.vessel.speeds(mode, true);
            let ballast = self.vessel.speeds(mode, false);
            if !ballast.is_empty() {
                self.initial_trips(mode, &ballast);
                self.ballast_trips(mode, &ballast);
                self.final_trips(mode, &ballast);
            }
            if !laden.is_empty() {
                self.laden_trips(mode, &laden);
            }
        }
        self.out
    }

    fn initial_trips(&mut self, mode: FuelMode, speeds: &[f64]) {
        let vs = self.vessel;
        if vs.initial_volume > vs.low_volume() + VOL_EPS {
            return;
        }
        let (p0, _) = self.inst.vessel_ports(self.v);
        let t0 = vs.rent_start;
        for b in self.buys.clone() {
            let pb = self.inst.contract_port(b);
            let dist = self.inst.distance(p0, pb);
            for d in self.rent_days(b).collect::<Vec<_>>() {
                let budget = 24.0 * f64::from(d - t0);
                let span = 24.0 * f64::from(d + 1 - t0);
                let Some(s) = self.sail(speeds, mode, false, dist, budget, span) else {
                    continue;
                };
                let left = vs.initial_volume - s.burn.lng_used;
                let topup = self.heel - left;
                if left < -VOL_EPS || topup < -VOL_EPS {
                    continue;
                }
                let topup = topup.max(0.0);
                let profit = -s.burn.fuel_cost - self.inst.free_price(pb, d) * topup;
                self.push(
                    TripKind::Initial,
                    Endpoint::Terminal { port: p0, day: t0 },
                    Endpoint::Contract { contract: b, day: d },
                    mode,
                    &s,
                    [0.0, 0.0, 0.0, topup],
                    profit,
                    0.0,
                );
            }
        }
    }

    fn laden_trips(&mut self, mode: FuelMode, speeds: &[f64]) {
        let vs = self.vessel;
        let h = self.heel;
        for b in self.buys.clone() {
            let kb = self.inst.contract(b);
            if kb.v_min > vs.max_volume() - h + VOL_EPS {
                continue;
            }
            let pb = self.inst.contract_port(b);
            for db in self.rent_days(b).collect::<Vec<_>>() {
                let ub = kb.price_on(db).unwrap_or(0.0);
                for s in self.sells.clone() {
                    let ks = self.inst.contract(s);
                    let ps = self.inst.contract_port(s);
                    let dist = self.inst.distance(pb, ps);
                    for ds in self.rent_days(s).filter(|&x| x > db).collect::<Vec<_>>() {
                        let budget = 24.0 * f64::from(ds - db - 1);
                        let span = 24.0 * f64::from(ds - db);
                        let Some(sl) = self.sail(speeds, mode, true, dist, budget, span) else {
                            continue;
                        };
                        if !self.idle_ok(budget, sl.sail) {
                            continue;
                        }
                        let burn = sl.burn.lng_used;
                        let eff_min = kb.v_min.max(vs.high_volume() - h + burn);
                        let lo = eff_min.max(ks.v_min + burn);
                        let hi = kb.v_max.min(vs.max_volume() - h);
                        if lo > hi + VOL_EPS {
                            continue;
                        }
                        let us = ks.price_on(ds).unwrap_or(0.0);
                        let vb = if us > ub {
                            hi.min(ks.v_max + burn).max(lo)
                        } else {
                            lo
                        };
                        let vsell = ks.v_max.min(vb - burn);
                        let waste = (vb - burn - vsell).max(0.0);
                        let profit = us * vsell - ub * vb - sl.burn.fuel_cost;
                        let w = over_delivery(eff_min, ks.v_max, burn);
                        self.push(
                            TripKind::Laden,
                            Endpoint::Contract { contract: b, day: db },
                            Endpoint::Contract { contract: s, day: ds },
                            mode,
                            &sl,
                            [vb, vsell, waste, 0.0],
                            profit,
                            w,
                        );
                    }
                }
            }
        }
    }

    fn ballast_trips(&mut self, mode: FuelMode, speeds: &[f64]) {
        let h = self.heel;
        for s in self.sells.clone() {
            let ps = self.inst.contract_port(s);
            for ds in self.rent_days(s).collect::<Vec<_>>() {
                for b in self.buys.clone() {
                    let pb = self.inst.contract_port(b);
                    let dist = self.inst.distance(ps, pb);
                    for db in self.rent_days(b).filter(|&x| x > ds).collect::<Vec<_>>() {
                        let budget = 24.0 * f64::from(db - ds - 1);
                        let span = 24.0 * f64::from(db - ds);
                        let Some(sl) = self.sail(speeds, mode, false, dist, budget, span) else {
                            continue;
                        };
                        if !self.idle_ok(budget, sl.sail) || sl.burn.lng_used > h + VOL_EPS {
                            continue;
                        }
                        let burn = sl.burn.lng_used;
                        let profit = -sl.burn.fuel_cost - self.inst.free_price(pb, db) * burn;
                        self.push(
                            TripKind::Ballast,
                            Endpoint::Contract { contract: s, day: ds },
                            Endpoint::Contract { contract: b, day: db },
                            mode,
                            &sl,
                            [0.0, 0.0, 0.0, burn],
                            profit,
                            0.0,
                        );
                    }
                }
            }
        }
    }

    fn final_trips(&mut self, mode: FuelMode, speeds: &[f64]) {
        let (_, pf) = self.inst.vessel_ports(self.v);
        let end_day = self.vessel.rent_end;
        for s in self.sells.clone() {
            let ps = self.inst.contract_port(s);
            let dist = self.inst.distance(ps, pf);
            for ds in self.rent_days(s).collect::<Vec<_>>() {
                let budget = 24.0 * f64::from(end_day - ds);
                // No idle burn after arriving at the final port.
                let Some(sl) = self.sail(speeds, mode, false, dist, budget, 0.0) else {
                    continue;
                };
                if sl.burn.lng_used > self.heel + VOL_EPS {
                    continue;
                }
                self.push(
                    TripKind::Final,
                    Endpoint::Contract { contract: s, day: ds },
                    Endpoint::Terminal { port: pf, day: end_day },
                    mode,
                    &sl,
                    [0.0; 4],
                    -sl.burn.fuel_cost,
                    0.0,
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::{self, SEAL_LADEN};
    use crate::instance::{Contract, InstanceData};

    fn c(r: u32, d: u32) -> Contract {
        fixtures::contract("x", ContractKind::Buy, "A", r, d, 0.0, 1.0, 1.0)
    }

    #[test]
    fn travel_time_examples() {
        assert_eq!(travel_time(&c(0, 1), &c(10, 11)), 9);
        assert_eq!(travel_time(&c(0, 0), &c(0, 0)), -1);
        assert_eq!(travel_time(&c(5, 9), &c(6, 6)), -2);
    }

    #[test]
    fn speed_selection_rounds_up_to_table() {
        let v = fixtures::seal();
        // 18.2 kn needed: 18.2 * 24 * 2 nm over two days.
        let s = select_speed(&v, FuelMode::LngOnly, true, 18.2 * 48.0, 2.0);
        assert_eq!(s, Some(18.5));
        assert_eq!(select_speed(&v, FuelMode::LngOnly, true, 0.0, 0.0), Some(16.0));
        assert_eq!(select_speed(&v, FuelMode::LngOnly, true, 21.0 * 24.0, 1.0), None);
        assert_eq!(select_speed(&v, FuelMode::LngOnly, true, 20.5 * 24.0, 1.0), Some(20.5));
        assert_eq!(select_speed(&v, FuelMode::FuelOnly, true, 100.0, 1.0), None);
    }

    #[test]
    fn burn_from_table_row() {
        let v = fixtures::seal();
        let b = leg_burn(&v, FuelMode::LngOnly, true, 20.0, 100.0, 0.0).unwrap();
        assert_eq!(b.lng_used, 100.0 * (9.06e-6 + 8.29e-6));
        assert_eq!(b.fuel_cost, 0.0);
        let idle = leg_burn(&v, FuelMode::LngOnly, true, 20.0, 0.0, 24.0).unwrap();
        assert_eq!(idle.lng_used, v.idle_boil_off);
        assert_eq!(idle.fuel_cost, 0.0);
        assert!(leg_burn(&v, FuelMode::LngOnly, true, 19.75, 1.0, 0.0).is_err());
    }

    #[test]
    fn fuel_only_burns_boil_off_and_pays_oil() {
        let mut v = fixtures::seal();
        for (s, cons, boil) in SEAL_LADEN {
            v.consumption_table.push(crate::instance::ConsumptionRow {
                fuel_mode: FuelMode::FuelOnly,
                laden: true,
                speed: s,
                consumption: cons,
                boil_off: boil,
                fuel_cost_rate: 1000.0 * cons,
            });
        }
        let b = leg_burn(&v, FuelMode::FuelOnly, true, 17.0, 50.0, 0.0).unwrap();
        assert_eq!(b.lng_used, 50.0 * 6.78e-6);
        assert_eq!(b.fuel_cost, 50.0 * 1000.0 * 6.34e-6);
        assert!(b.fuel_cost > 0.0);
    }

    #[test]
    fn over_delivery_and_penalty_arithmetic() {
        assert_eq!(over_delivery(140e3, 130e3, 2e3), 8e3);
        assert_eq!(over_delivery(100e3, 120e3, 0.0), 0.0);
        assert_eq!(over_delivery(122e3, 120e3, 2e3), 0.0);
        let mut t = sample_trip();
        t.profit = 100.0;
        t.over_delivery = 2.0;
        t.potential = 3;
        assert_eq!(penalize(&t, &PenaltyParams::new(10.0, 5.0)), 95.0);
        assert_eq!(penalize(&t, &PenaltyParams::default()), 100.0);
        assert!(penalize(&t, &PenaltyParams::new(11.0, 5.0)) < 95.0);
    }

    fn sample_trip() -> Trip {
        Trip {
            id: 0,
            kind: TripKind::Laden,
            vessel: 0,
            start: Endpoint::Contract { contract: 0, day: 0 },
            end: Endpoint::Contract { contract: 1, day: 1 },
            fuel_mode: FuelMode::LngOnly,
            speed: 16.0,
            sail_hours: 0.0,
            idle_hours: 0.0,
            lng_burn: 0.0,
            fuel_cost: 0.0,
            buy_volume: 0.0,
            traded_volume: 0.0,
            waste: 0.0,
            free_purchase: 0.0,
            profit: 0.0,
            over_delivery: 0.0,
            potential: 0,
        }
    }

    fn minimal() -> Instance {
        Instance::new(fixtures::minimal()).unwrap()
    }

    #[test]
    fn minimal_fixture_hand_enumeration() {
        let inst = minimal();
        let set = generate_trips(&inst);
        let v = inst.vessel(0);
        // 3000 nm needs 3000/20.5 = 146.3 h at most; with service days
        // b1 in {2,3} and s1 in {20,21,22}, every pair has at least 16 days.
        let laden: Vec<&Trip> = set.trips.iter().filter(|t| t.kind == TripKind::Laden).collect();
        assert_eq!(laden.len(), 6);
        for t in &laden {
            // Slowest speed suffices.
            assert_eq!(t.speed, 16.0);
            let budget = 24.0 * f64::from(t.end.day() - t.start.day());
            let sail = 3000.0 / 16.0;
            assert!((t.sail_hours - sail).abs() < 1e-9);
            assert!((t.idle_hours - (budget - sail)).abs() < 1e-9);
            let burn = sail * (5.73e-6 + 6.78e-6) + (budget - sail) * 120.0 / 24.0;
            assert!((t.lng_burn - burn).abs() < 1e-9);
            let h = v.heel();
            // Sell price beats buy price, so load up to the sell's reach.
            let vb = (160_000.0f64).min(0.985 * 170_000.0 - h).min(150_000.0 + burn);
            assert!((t.buy_volume - vb).abs() < 1e-9);
            assert!((t.traded_volume - 150_000.0f64.min(vb - burn)).abs() < 1e-9);
            let p = 500.0 * t.traded_volume - 200.0 * t.buy_volume;
            assert!((t.profit - p).abs() < 1e-6);
            assert_eq!(trip_profit(t, &inst), t.profit);
        }
        // Initial trips reach b1 on days 2 or 3 from port A (distance 0).
        assert_eq!(set.initial[0].len(), 2);
        // Final trips from s1 back to A: 3000 nm within 24*(59-ds) hours.
        assert_eq!(set.finals[0].len(), 3);
        assert!(set.trips.iter().all(|t| t.kind != TripKind::Ballast));
        assert_eq!(set.len(), 11);
    }

    #[test]
    fn sell_before_buy_gives_no_laden_trip() {
        let mut data = fixtures::minimal();
        data.contracts[1].release = 0;
        data.contracts[1].deadline = 1;
        data.contracts[1].unit_price = vec![500.0; 2];
        let inst = Instance::new(data).unwrap();
        let set = generate_trips(&inst);
        assert!(set.trips.iter().all(|t| t.kind != TripKind::Laden));
    }

    #[test]
    fn oversized_buy_appears_in_no_trip() {
        let mut data = fixtures::minimal();
        data.contracts[0].v_min = 0.99 * 170_000.0;
        data.contracts[0].v_max = 0.99 * 170_000.0;
        let inst = Instance::new(data).unwrap();
        let set = generate_trips(&inst);
        assert!(set.by_contract[0].is_empty());
        assert!(set.by_contract[1].is_empty());
    }

    #[test]
    fn zero_distance_laden_trip_burns_idle_only() {
        let mut data = fixtures::minimal();
        data.contracts[1].port = "A".into();
        data.contracts[1].release = 5;
        data.contracts[1].deadline = 5;
        data.contracts[1].unit_price = vec![500.0];
        data.contracts[0].release = 3;
        data.contracts[0].unit_price = vec![200.0];
        let inst = Instance::new(data).unwrap();
        let set = generate_trips(&inst);
        let t = set
            .trips
            .iter()
            .find(|t| t.kind == TripKind::Laden)
            .expect("laden trip");
        // Buy on day 3, sell on day 5: two whole days between operations.
        assert_eq!(t.sail_hours, 0.0);
        assert_eq!(t.idle_hours, 48.0);
        assert_eq!(t.lng_burn, 2.0 * 120.0);
    }

    #[test]
    fn potential_counts_reachable_small_sells() {
        let inst = minimal();
        let set = generate_trips(&inst);
        assert!(set.trips.iter().all(|t| t.potential == 0));

        let mut data = fixtures::minimal();
        // Small sell at B midway... B is the sell port, so use a third port
        // on the direct route: A-C 1500, C-B 1500.
        data.ports.push(crate::instance::Port { id: "C".into(), name: "Gamma".into() });
        data.distances.push(crate::instance::DistanceEntry { from: "A".into(), to: "C".into(), nm: 1500.0 });
        data.distances.push(crate::instance::DistanceEntry { from: "B".into(), to: "C".into(), nm: 1500.0 });
        for d in 0..60 {
            data.prices.push(crate::instance::PriceEntry { port: "C".into(), day: d, price: 200.0 });
        }
        data.contracts.push(fixtures::contract("small", ContractKind::Sell, "C", 10, 12, 5_000.0, 10_000.0, 600.0));
        // Closes before any buy: never counted.
        data.contracts.push(fixtures::contract("early", ContractKind::Sell, "C", 0, 1, 5_000.0, 10_000.0, 600.0));
        let inst = Instance::new(data).unwrap();
        let set = generate_trips(&inst);
        let laden: Vec<&Trip> = set
            .trips
            .iter()
            .filter(|t| t.kind == TripKind::Laden && t.end.contract() == Some(1))
            .collect();
        assert!(!laden.is_empty());
        for t in laden {
            assert_eq!(t.potential, 1);
            assert_eq!(multi_destination_potential(t, &inst), 1);
        }
    }

    #[test]
    fn index_sets_partition_endpoints() {
        let inst = crate::generator::generate_instance(
            3,
            &crate::generator::GeneratorParams {
                n_vessels: 2,
                n_buy: 6,
                n_sell: 12,
                small_fraction: 0.5,
                horizon_days: 120,
                n_ports: 5,
            },
        )
        .unwrap();
        let set = generate_trips(&inst);
        assert!(!set.is_empty());
        let mut seen_arr = vec![0; set.len()];
        let mut seen_dep = vec![0; set.len()];
        for (&(v, c, d), ts) in &set.arrivals {
            for &t in ts {
                assert_eq!(set.trips[t].vessel, v);
                assert_eq!(set.trips[t].end, Endpoint::Contract { contract: c, day: d });
                seen_arr[t] += 1;
            }
        }
        for (&(v, c, d), ts) in &set.departures {
            for &t in ts {
                assert_eq!(set.trips[t].vessel, v);
                assert_eq!(set.trips[t].start, Endpoint::Contract { contract: c, day: d });
                seen_dep[t] += 1;
            }
        }
        for t in &set.trips {
            let arr = usize::from(t.kind != TripKind::Final);
            let dep = usize::from(t.kind != TripKind::Initial);
            assert_eq!(seen_arr[t.id], arr);
            assert_eq!(seen_dep[t.id], dep);
            assert!(t.end.day() > t.start.day() || t.kind == TripKind::Initial);
            assert!(t.over_delivery >= 0.0);
            if t.kind != TripKind::Laden {
                assert_eq!(t.over_delivery, 0.0);
            }
            assert_eq!(trip_profit(t, &inst), t.profit);
            assert_eq!(penalize(t, &PenaltyParams::default()), t.profit);
        }
    }

    #[test]
    fn generation_is_deterministic_across_parallelism() {
        let inst = crate::generator::generate_instance(
            11,
            &crate::generator::GeneratorParams {
                n_vessels: 3,
                n_buy: 5,
                n_sell: 10,
                small_fraction: 0.5,
                horizon_days: 100,
                n_ports: 5,
            },
        )
        .unwrap();
        let seq = generate_trips_with(
            &inst,
            &TripConfig { parallelism: Parallelism::Sequential, ..Default::default() },
        );
        let par = generate_trips(&inst);
        assert_eq!(seq.trips, par.trips);
    }

    #[test]
    fn idle_filter_only_removes_trips() {
        let inst = crate::generator::generate_instance(
            5,
            &crate::generator::GeneratorParams {
                n_vessels: 1,
                n_buy: 6,
                n_sell: 12,
                small_fraction: 0.5,
                horizon_days: 150,
                n_ports: 5,
            },
        )
        .unwrap();
        let all = generate_trips(&inst);
        let few = generate_trips_with(
            &inst,
            &TripConfig { max_idle_days: Some(3.0), ..Default::default() },
        );
        assert!(few.len() < all.len());
        for t in &few.trips {
            assert!(all.trips.iter().any(|u| u.start == t.start
                && u.end == t.end
                && u.fuel_mode == t.fuel_mode
                && u.vessel == t.vessel));
        }
    }

    #[test]
    fn empty_fleet_has_no_trips() {
        let mut data: InstanceData = fixtures::minimal();
        data.vessels[0].rent_end = 1;
        let inst = Instance::new(data).unwrap();
        let set = generate_trips(&inst);
        assert!(set.trips.iter().all(|t| t.kind != TripKind::Laden));
    }
}
