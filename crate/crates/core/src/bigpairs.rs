//! Arc-flow selection of big buy/sell pairs over a penalized trip set.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use lngplan_milp::{solve, Comparator, MilpModel, ModelBuilder, Sense, SolveOptions, SolveStatus, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::schedule::{CallSite, Leg, PortCall, Schedule, VesselPlan};
use crate::trips::{penalize, Endpoint, PenaltyParams, Trip, TripKind, TripSet};

/// Objective coefficients are expressed in millions.
pub(crate) const MONEY_SCALE: f64 = 1e6;

#[derive(Debug, Error)]
pub enum BigPairsError {
    #[error("big-pairs model ended with status {0:?}")]
    Solver(SolveStatus),
    #[error("route extraction failed for vessel {vessel}: {message}")]
    Route { vessel: usize, message: String },
}

/// Builds the selection model with one binary per trip, in trip order.
pub fn build_big_pairs_model(trips: &TripSet, params: &PenaltyParams) -> MilpModel {
    let mut b = ModelBuilder::new(Sense::Maximize);
    let x: Vec<VarId> = trips
        .trips
        .iter()
        .map(|t| b.binary(format!("x{}", t.id)).expect("unique trip ids"))
        .collect();
    for (t, &xt) in trips.trips.iter().zip(&x) {
        b.objective(xt, penalize(t, params) / MONEY_SCALE);
    }
    for (c, ts) in trips.by_contract.iter().enumerate() {
        if ts.len() > 1 {
            b.constraint(format!("once_{c}"), ts.iter().map(|&t| (x[t], 1.0)), Comparator::Le, 1.0);
        }
    }
    let empty = Vec::new();
    for (v, c, d) in trips.nodes() {
        let arr = trips.arrivals.get(&(v, c, d)).unwrap_or(&empty);
        let dep = trips.departures.get(&(v, c, d)).unwrap_or(&empty);
        let terms = arr
            .iter()
            .map(|&t| (x[t], 1.0))
            .chain(dep.iter().map(|&t| (x[t], -1.0)));
        b.constraint(format!("flow_{v}_{c}_{d}"), terms, Comparator::Eq, 0.0);
    }
    for v in 0..trips.initial.len() {
        let ini = &trips.initial[v];
        let fin = &trips.finals[v];
        if ini.is_empty() && fin.is_empty() {
            continue;
        }
        let terms = ini
            .iter()
            .map(|&t| (x[t], 1.0))
            .chain(fin.iter().map(|&t| (x[t], -1.0)));
        b.constraint(format!("edge_{v}"), terms, Comparator::Le, 0.0);
        if !fin.is_empty() {
            b.constraint(format!("final_{v}"), fin.iter().map(|&t| (x[t], 1.0)), Comparator::Le, 1.0);
        }
    }
    b.finish()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BigPairSolution {
    /// Selected trip ids, ascending.
    pub chosen: Vec<usize>,
    /// Per vessel: initial, alternating laden/ballast, final trip ids.
    pub routes: Vec<Vec<usize>>,
    pub penalized_objective: f64,
    /// Sum of unpenalized trip profits.
    pub profit: f64,
    pub status: SolveStatus,
    pub nodes: u64,
    /// Trips left after the exact reductions.
    pub model_trips: usize,
}

impl BigPairSolution {
    pub fn empty(n_vessels: usize) -> Self {
        Self {
            chosen: Vec::new(),
            routes: vec![Vec::new(); n_vessels],
            penalized_objective: 0.0,
            profit: 0.0,
            status: SolveStatus::Optimal,
            nodes: 0,
            model_trips: 0,
        }
    }

    /// Laden and ballast trips of vessel `v` in route order.
    pub fn pairs<'t>(&self, trips: &'t TripSet, v: usize) -> Vec<&'t Trip> {
        self.routes[v]
            .iter()
            .map(|&t| &trips.trips[t])
            .filter(|t| matches!(t.kind, TripKind::Laden | TripKind::Ballast))
            .collect()
    }

    /// Contracts visited by any vessel.
    pub fn visited(&self, trips: &TripSet) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .chosen
            .iter()
            .flat_map(|&t| [trips.trips[t].start.contract(), trips.trips[t].end.contract()])
            .flatten()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn all_overdelivery_free(&self, trips: &TripSet) -> bool {
        self.chosen.iter().all(|&t| trips.trips[t].over_delivery <= 0.0)
    }

    /// Chosen trips and routes as JSON.
    pub fn write_report<W: Write>(&self, instance: &Instance, trips: &TripSet, out: W) -> serde_json::Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            id: usize,
            kind: &'a str,
            vessel: &'a str,
            from: String,
            from_day: u32,
            to: String,
            to_day: u32,
            fuel_mode: &'a str,
            profit: f64,
            over_delivery: f64,
            potential: u32,
        }
        #[derive(Serialize)]
        struct Report<'a> {
            status: SolveStatus,
            penalized_objective: f64,
            profit: f64,
            nodes: u64,
            model_trips: usize,
            routes: BTreeMap<&'a str, Vec<Row<'a>>>,
        }
        let name = |e: &Endpoint| match *e {
            Endpoint::Terminal { port, .. } => instance.ports()[port].id.clone(),
            Endpoint::Contract { contract, .. } => instance.contract(contract).id.clone(),
        };
        let mut routes = BTreeMap::new();
        for (v, r) in self.routes.iter().enumerate() {
            let rows = r
                .iter()
                .map(|&t| {
                    let t = &trips.trips[t];
                    Row {
                        id: t.id,
                        kind: t.kind.as_str(),
                        vessel: &instance.vessel(v).id,
                        from: name(&t.start),
                        from_day: t.start.day(),
                        to: name(&t.end),
                        to_day: t.end.day(),
                        fuel_mode: t.fuel_mode.as_str(),
                        profit: t.profit,
                        over_delivery: t.over_delivery,
                        potential: t.potential,
                    }
                })
                .collect();
            routes.insert(instance.vessel(v).id.as_str(), rows);
        }
        serde_json::to_writer_pretty(
            out,
            &Report {
                status: self.status,
                penalized_objective: self.penalized_objective,
                profit: self.profit,
                nodes: self.nodes,
                model_trips: self.model_trips,
                routes,
            },
        )
    }
}

/// Trip ids that can appear in some feasible selection with the best
/// value among fuel-mode variants of the same endpoints.
///
/// Variants sharing vessel, kind and endpoints occupy exactly the same
/// constraints, so only the most valuable one can matter. A chosen trip
/// always lies on a chain from an initial to a final trip because days
/// strictly increase along trips, so trips off every such chain are dropped.
pub fn reduce_trips(trips: &TripSet, values: &[f64]) -> Vec<usize> {
    let mut best: HashMap<(usize, TripKind, Endpoint, Endpoint), usize> = HashMap::new();
    for t in &trips.trips {
        let key = (t.vessel, t.kind, t.start, t.end);
        match best.get(&key) {
            Some(&o) if values[o] >= values[t.id] => {}
            _ => {
                best.insert(key, t.id);
            }
        }
    }
    let mut keep = vec![false; trips.len()];
    for &t in best.values() {
        keep[t] = true;
    }

    // Forward pass in order of start day.
    let mut order: Vec<usize> = (0..trips.len()).filter(|&t| keep[t]).collect();
    order.sort_by_key(|&t| (trips.trips[t].start.day(), trips.trips[t].end.day(), t));
    let node = |e: &Endpoint, v: usize| e.contract().map(|c| (v, c, e.day()));
    let mut reached = std::collections::HashSet::new();
    let mut fwd = vec![false; trips.len()];
    for &t in &order {
        let tr = &trips.trips[t];
        let ok = tr.kind == TripKind::Initial
            || node(&tr.start, tr.vessel).is_some_and(|n| reached.contains(&n));
        if ok {
            fwd[t] = true;
            if let Some(n) = node(&tr.end, tr.vessel) {
                reached.insert(n);
            }
        }
    }
    // Backward pass in decreasing end day.
    let mut back_reached = std::collections::HashSet::new();
    let mut bwd = vec![false; trips.len()];
    for &t in order.iter().rev() {
        let tr = &trips.trips[t];
        if !fwd[t] {
            continue;
        }
        let ok = tr.kind == TripKind::Final
            || node(&tr.end, tr.vessel).is_some_and(|n| back_reached.contains(&n));
        if ok {
            bwd[t] = true;
            if let Some(n) = node(&tr.start, tr.vessel) {
                back_reached.insert(n);
            }
        }
    }
    (0..trips.len()).filter(|&t| keep[t] && fwd[t] && bwd[t]).collect()
}

#[derive(Debug, Clone)]
pub struct BigPairsOptions {
    pub solve: SolveOptions,
    /// Apply [`reduce_trips`] before building the model.
    pub reduce: bool,
}

impl Default for BigPairsOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            reduce: true,
        }
    }
}

pub fn solve_big_pairs(
    instance: &Instance,
    trips: &TripSet,
    params: &PenaltyParams,
    opts: &BigPairsOptions,
) -> Result<BigPairSolution, BigPairsError> {
    let n_vessels = instance.vessels().len();
    let values = trips.penalized(params);
    let kept: Vec<usize> = if opts.reduce {
        reduce_trips(trips, &values)
    } else {
        (0..trips.len()).collect()
    };
    if kept.is_empty() {
        return Ok(BigPairSolution::empty(n_vessels));
    }
    let sub = TripSet::from_trips(
        instance.contracts().len(),
        n_vessels,
        kept.iter().map(|&t| trips.trips[t].clone()).collect(),
    );
    let model = build_big_pairs_model(&sub, params);
    let mut so = opts.solve.clone();
    if so.initial_solution.is_none() {
        // Leaving every vessel idle is always feasible.
        so.initial_solution = Some(vec![0.0; model.num_vars()]);
    }
    let sol = solve(&model, &so);
    if !sol.status.has_solution() {
        return Err(BigPairsError::Solver(sol.status));
    }
    let mut chosen: Vec<usize> = (0..sub.len())
        .filter(|&i| sol.values[i] > 0.5)
        .map(|i| kept[i])
        .collect();
    chosen.sort_unstable();
    let routes = extract_routes(trips, &chosen, n_vessels)?;
    let penalized_objective = chosen.iter().map(|&t| values[t]).sum();
    let profit = chosen.iter().map(|&t| trips.trips[t].profit).sum();
    Ok(BigPairSolution {
        chosen,
        routes,
        penalized_objective,
        profit,
        status: sol.status,
        nodes: sol.nodes,
        model_trips: sub.len(),
    })
}

/// Follows each vessel's chosen trips from its initial trip.
pub fn extract_routes(trips: &TripSet, chosen: &[usize], n_vessels: usize) -> Result<Vec<Vec<usize>>, BigPairsError> {
    let is_chosen: std::collections::HashSet<usize> = chosen.iter().copied().collect();
    let mut routes = vec![Vec::new(); n_vessels];
    let mut used = 0;
    for (v, route) in routes.iter_mut().enumerate() {
        let starts: Vec<usize> = trips.initial[v].iter().copied().filter(|t| is_chosen.contains(t)).collect();
        if starts.is_empty() {
            continue;
        }
        if starts.len() > 1 {
            return Err(BigPairsError::Route { vessel: v, message: "several initial trips".into() });
        }
        let mut cur = starts[0];
        loop {
            route.push(cur);
            let t = &trips.trips[cur];
            let Endpoint::Contract { contract, day } = t.end else { break };
            let next: Vec<usize> = trips
                .departures
                .get(&(v, contract, day))
                .map(|ds| ds.iter().copied().filter(|d| is_chosen.contains(d)).collect())
                .unwrap_or_default();
            match next.as_slice() {
                [n] => cur = *n,
                _ => {
                    return Err(BigPairsError::Route {
                        vessel: v,
                        message: format!("{} departures after trip {cur}", next.len()),
                    })
                }
            }
        }
        used += route.len();
    }
    if used != chosen.len() {
        return Err(BigPairsError::Route {
            vessel: n_vessels,
            message: format!("{} chosen trips are off every route", chosen.len() - used),
        });
    }
    Ok(routes)
}

/// Turns a route of trips into timed calls with the volumes planned at
/// trip generation.
pub fn lift_schedule(instance: &Instance, trips: &TripSet, sol: &BigPairSolution) -> Schedule {
    let mut schedule = Schedule::empty("bigpairs");
    for (v, route) in sol.routes.iter().enumerate() {
        let vessel = instance.vessel(v);
        let mut plan = VesselPlan {
            vessel: vessel.id.clone(),
            calls: Vec::new(),
            legs: Vec::new(),
        };
        if route.is_empty() {
            schedule.vessels.push(plan);
            continue;
        }
        let port_id = |p: usize| instance.ports()[p].id.clone();
        let (p0, _) = instance.vessel_ports(v);
        plan.calls.push(PortCall {
            site: CallSite::Start,
            port: port_id(p0),
            day: vessel.rent_start,
            volume_before: vessel.initial_volume,
            traded: 0.0,
            free_purchase: 0.0,
            over_delivery: 0.0,
            volume_after: vessel.initial_volume,
        });
        let mut onboard = vessel.initial_volume;
        for (i, &tid) in route.iter().enumerate() {
            let t = &trips.trips[tid];
            plan.legs.push(Leg {
                fuel_mode: t.fuel_mode,
                speed: t.speed,
                laden: t.kind == TripKind::Laden,
                sail_hours: t.sail_hours,
                idle_hours: t.idle_hours,
                lng_burn: t.lng_burn,
                fuel_cost: t.fuel_cost,
            });
            let before = onboard - t.lng_burn;
            let (site, traded, free, waste, after) = match t.kind {
                TripKind::Initial | TripKind::Ballast => {
                    let load = route
                        .get(i + 1)
                        .map(|&n| trips.trips[n].buy_volume)
                        .unwrap_or(0.0);
                    let c = t.end.contract().expect("buy endpoint");
                    let site = CallSite::Contract { id: instance.contract(c).id.clone() };
                    (site, load, t.free_purchase, 0.0, before + t.free_purchase + load)
                }
                TripKind::Laden => {
                    let c = t.end.contract().expect("sell endpoint");
                    let site = CallSite::Contract { id: instance.contract(c).id.clone() };
                    (site, t.traded_volume, 0.0, t.waste, before - t.traded_volume - t.waste)
                }
                TripKind::Final => (CallSite::End, 0.0, 0.0, 0.0, before),
            };
            plan.calls.push(PortCall {
                site,
                port: port_id(t.end.port(instance)),
                day: t.end.day(),
                volume_before: before,
                traded,
                free_purchase: free,
                over_delivery: waste,
                volume_after: after,
            });
            onboard = after;
        }
        schedule.vessels.push(plan);
    }
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures;
    use crate::trips::generate_trips;

    #[test]
    fn empty_trip_set_gives_empty_model() {
        let set = TripSet::from_trips(0, 0, Vec::new());
        let m = build_big_pairs_model(&set, &PenaltyParams::default());
        assert_eq!(m.num_vars(), 0);
        assert_eq!(m.num_constraints(), 0);
    }

    #[test]
    fn one_binary_per_trip_and_flow_rows_per_day() {
        let inst = Instance::new(fixtures::minimal()).unwrap();
        let set = generate_trips(&inst);
        let m = build_big_pairs_model(&set, &PenaltyParams::default());
        assert_eq!(m.num_binaries(), set.len());
        // The sell is servable on 3 days: one flow row per day for the vessel.
        let rows = m
            .constraints()
            .iter()
            .filter(|c| c.name.starts_with("flow_0_1_"))
            .count();
        assert_eq!(rows, 3);
    }

    #[test]
    fn single_pair_fixture_takes_the_pair() {
        let inst = Instance::new(fixtures::minimal()).unwrap();
        let set = generate_trips(&inst);
        let sol = solve_big_pairs(&inst, &set, &PenaltyParams::default(), &BigPairsOptions::default()).unwrap();
        assert_eq!(sol.routes[0].len(), 3);
        let kinds: Vec<TripKind> = sol.routes[0].iter().map(|&t| set.trips[t].kind).collect();
        assert_eq!(kinds, vec![TripKind::Initial, TripKind::Laden, TripKind::Final]);
        let sum: f64 = sol.chosen.iter().map(|&t| set.trips[t].profit).sum();
        assert!((sol.profit - sum).abs() < 1e-9);
        // Brute force over all subsets of the 11 trips.
        let model = build_big_pairs_model(&set, &PenaltyParams::default());
        let mut best = 0.0f64;
        for mask in 0u32..(1 << set.len()) {
            let vals: Vec<f64> = (0..set.len()).map(|i| f64::from((mask >> i) & 1)).collect();
            if model.is_feasible(&vals, 1e-9) {
                best = best.max(model.objective_value(&vals));
            }
        }
        assert!((sol.penalized_objective / MONEY_SCALE - best).abs() < 1e-6);
    }

    #[test]
    fn unprofitable_pair_leaves_vessel_idle() {
        let mut data = fixtures::minimal();
        data.contracts[1].unit_price = vec![50.0; 3];
        let inst = Instance::new(data).unwrap();
        let set = generate_trips(&inst);
        let sol = solve_big_pairs(&inst, &set, &PenaltyParams::default(), &BigPairsOptions::default()).unwrap();
        assert!(sol.chosen.is_empty());
        assert_eq!(sol.penalized_objective, 0.0);
    }

    fn assert_lift_is_clean(inst: &Instance, set: &TripSet, sol: &BigPairSolution) {
        use crate::validator::{evaluate_profit, validate, Mode};
        let sched = lift_schedule(inst, set, sol);
        let report = validate(&sched, inst, Mode::Main).unwrap();
        assert!(report.is_empty(), "{}", report.to_json());
        let p = evaluate_profit(&sched, inst).unwrap();
        assert!((p.net - sol.profit).abs() < 1e-6 * sol.profit.abs().max(1.0), "{} vs {}", p.net, sol.profit);
    }

    #[test]
    fn lifted_pair_passes_validation() {
        let inst = Instance::new(fixtures::minimal()).unwrap();
        let set = generate_trips(&inst);
        let sol = solve_big_pairs(&inst, &set, &PenaltyParams::default(), &BigPairsOptions::default()).unwrap();
        assert_lift_is_clean(&inst, &set, &sol);
    }

    #[test]
    fn generated_fleet_lifts_cleanly() {
        use crate::generator::{generate_instance, GeneratorParams};
        use crate::trips::{generate_trips_with, TripConfig};
        let params = GeneratorParams {
            n_vessels: 2,
            n_buy: 10,
            n_sell: 30,
            horizon_days: 200,
            ..GeneratorParams::default()
        };
        let inst = generate_instance(11, &params).unwrap();
        let cfg = TripConfig { max_idle_days: Some(30.0), ..TripConfig::default() };
        let set = generate_trips_with(&inst, &cfg);
        let sol = solve_big_pairs(&inst, &set, &PenaltyParams::new(1e3, 0.0), &BigPairsOptions::default()).unwrap();
        assert!(sol.status.has_solution());
        assert!(!sol.chosen.is_empty());
        assert_lift_is_clean(&inst, &set, &sol);
    }
}
