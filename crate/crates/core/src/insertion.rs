//! Small-discharge insertion around a fixed sequence of big trades.
//!
//! The big buys and sells chosen by the arc-flow model stay fixed, but their
//! volumes become continuous. Between each pair of consecutive big calls the
//! vessel may detour through unassigned small sells visited on their window
//! midpoints. Because every pair is entirely laden or entirely in ballast and
//! the onboard volume only falls while sailing, bounding the volume at the
//! two ends of a pair keeps the whole segment out of the sloshing band.
//!
//! The initial and final trips are treated as ballast pairs too, so small
//! sells can also be picked up on the way out of delivery or towards
//! redelivery.

use std::collections::{BTreeMap, HashMap};

use lngplan_milp::{solve, Comparator, MilpModel, ModelBuilder, Sense, SolveOptions, SolveStatus, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigpairs::{lift_schedule, BigPairSolution, MONEY_SCALE};
use crate::instance::{ContractKind, FuelMode, Instance, Vessel};
use crate::schedule::{CallSite, Leg, PortCall, Schedule, VesselPlan};
use crate::trips::{leg_burn, pick_speed, Endpoint, TripKind, TripSet};

/// Volumes inside the model are in thousands of m³.
const VOL_SCALE: f64 = 1e3;
/// Money per model unit of volume: u $/m³ becomes u * VOL_SCALE / MONEY_SCALE.
const PRICE_SCALE: f64 = VOL_SCALE / MONEY_SCALE;
/// Audit tolerance in model volume units (1e-3 m³).
const AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "node", content = "contract", rename_all = "snake_case")]
pub enum Node {
    /// The pair's first call (start terminal or big contract).
    Head,
    /// The pair's last call (big contract or end terminal).
    Tail,
    /// An inserted small sell, by contract index.
    Small(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbLeg {
    pub from: Node,
    pub to: Node,
    pub speed: f64,
    pub sail_hours: f64,
    pub idle_hours: f64,
    pub lng_burn: f64,
    pub fuel_cost: f64,
}

/// One trip of the big-pairs route together with its detour options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbPair {
    pub trip: usize,
    pub kind: TripKind,
    pub laden: bool,
    pub fuel_mode: FuelMode,
    pub head: Endpoint,
    pub tail: Endpoint,
    /// Candidate small sells as (contract, visit day), in day order.
    pub smalls: Vec<(usize, u32)>,
    /// Direct arc first, then every detour arc.
    pub legs: Vec<NbLeg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselNeighborhood {
    pub vessel: usize,
    /// Initial trip, alternating laden and ballast trips, final trip.
    /// Empty for a vessel left idle by the big-pairs model.
    pub pairs: Vec<NbPair>,
    /// LNG needed for the direct sail to redelivery.
    pub final_requirement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub vessels: Vec<VesselNeighborhood>,
    /// Unassigned sells that allow small volumes.
    pub pool: Vec<usize>,
}

impl Neighborhood {
    /// Small sells that appear as a candidate in at least one pair.
    pub fn reachable_smalls(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .vessels
            .iter()
            .flat_map(|v| v.pairs.iter())
            .flat_map(|p| p.smalls.iter().map(|&(c, _)| c))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn num_legs(&self) -> usize {
        self.vessels.iter().flat_map(|v| v.pairs.iter()).map(|p| p.legs.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityBound {
    /// Laden volume capped at the fill fraction of the tank.
    #[default]
    Fill,
    /// Laden volume capped at the nominal tank volume.
    Nominal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InsertionOptions {
    /// Over-delivery penalty per m³; defaults to ten times the highest sell price.
    pub omega: Option<f64>,
    pub capacity: CapacityBound,
    /// Keep at most this many small candidates per pair, preferring higher
    /// price times maximum volume. `None` keeps all time-feasible ones.
    pub max_candidates_per_pair: Option<usize>,
    pub solve: SolveOptions,
}

impl Default for InsertionOptions {
    fn default() -> Self {
        Self {
            omega: None,
            capacity: CapacityBound::Fill,
            max_candidates_per_pair: None,
            solve: SolveOptions::default().with_node_limit(5_000),
        }
    }
}

impl InsertionOptions {
    pub fn omega(&self, instance: &Instance) -> f64 {
        self.omega.unwrap_or_else(|| 10.0 * instance.max_sell_price())
    }
}

#[derive(Debug, Error)]
pub enum InsertionError {
    #[error("insertion model ended with status {0:?}")]
    Solver(SolveStatus),
    #[error("vessel {vessel}: {message}")]
    Neighborhood { vessel: usize, message: String },
}

/// Departure hour from an endpoint.
fn depart_hour(e: &Endpoint, first: bool) -> f64 {
    if first {
        24.0 * f64::from(e.day())
    } else {
        24.0 * f64::from(e.day() + 1)
    }
}

/// Latest arrival hour and the hour the stay ends (None at redelivery).
fn arrival_window(e: &Endpoint, last: bool) -> (f64, Option<f64>) {
    let d = f64::from(e.day());
    if last {
        (24.0 * (d + 1.0), None)
    } else {
        (24.0 * d, Some(24.0 * (d + 1.0)))
    }
}

struct LegMaker<'a> {
    inst: &'a Instance,
    vessel: &'a Vessel,
    mode: FuelMode,
    laden: bool,
    speeds: Vec<f64>,
}

impl LegMaker<'_> {
    /// Slowest table speed that connects the two stops in time.
    fn make(&self, from: Node, from_port: usize, depart: f64, to: Node, to_port: usize, window: (f64, Option<f64>)) -> Option<NbLeg> {
        let (deadline, close) = window;
        let hours = deadline - depart;
        if hours < 0.0 {
            return None;
        }
        let dist = self.inst.distance(from_port, to_port);
        let speed = pick_speed(&self.speeds, dist, hours)?;
        let sail = if dist > 0.0 { dist / speed } else { 0.0 };
        let idle = close.map_or(0.0, |c| c - depart - sail);
        let burn = leg_burn(self.vessel, self.mode, self.laden, speed, sail, idle).ok()?;
        Some(NbLeg {
            from,
            to,
            speed,
            sail_hours: sail,
            idle_hours: idle,
            lng_burn: burn.lng_used,
            fuel_cost: burn.fuel_cost,
        })
    }
}

/// Builds the detour options around every trip of a big-pairs solution.
pub fn derive_neighborhood(
    instance: &Instance,
    trips: &TripSet,
    big: &BigPairSolution,
    max_candidates_per_pair: Option<usize>,
) -> Result<Neighborhood, InsertionError> {
    let served: std::collections::HashSet<usize> = big.visited(trips).into_iter().collect();
    let pool: Vec<usize> = (0..instance.contracts().len())
        .filter(|&c| !served.contains(&c) && !instance.contract(c).is_buy() && instance.is_small(c))
        .collect();
    let mut vessels = Vec::with_capacity(instance.vessels().len());
    for v in 0..instance.vessels().len() {
        let vessel = instance.vessel(v);
        let route = big.routes.get(v).map(Vec::as_slice).unwrap_or(&[]);
        let mut pairs = Vec::with_capacity(route.len());
        for &tid in route {
            let t = &trips.trips[tid];
            let first = t.kind == TripKind::Initial;
            let last = t.kind == TripKind::Final;
            let maker = LegMaker {
                inst: instance,
                vessel,
                mode: t.fuel_mode,
                laden: t.laden(),
                speeds: vessel.speeds(t.fuel_mode, t.laden()),
            };
            let head_port = t.start.port(instance);
            let tail_port = t.end.port(instance);
            let depart = depart_hour(&t.start, first);
            let tail_window = arrival_window(&t.end, last);
            let direct = maker
                .make(Node::Head, head_port, depart, Node::Tail, tail_port, tail_window)
                .ok_or_else(|| InsertionError::Neighborhood {
                    vessel: v,
                    message: format!("trip {tid} cannot be sailed directly"),
                })?;
            let mut legs = vec![direct];
            // Small candidates that fit between head and tail.
            let mut smalls = Vec::new();
            let mut to_small = Vec::new();
            let mut from_small = Vec::new();
            for &c in &pool {
                let con = instance.contract(c);
                let m = con.midpoint();
                if m < vessel.rent_start || m > vessel.rent_end {
                    continue;
                }
                let port = instance.contract_port(c);
                let w = arrival_window(&Endpoint::Contract { contract: c, day: m }, false);
                let Some(a) = maker.make(Node::Head, head_port, depart, Node::Small(c), port, w) else {
                    continue;
                };
                let Some(b) = maker.make(Node::Small(c), port, 24.0 * f64::from(m + 1), Node::Tail, tail_port, tail_window) else {
                    continue;
                };
                smalls.push((c, m));
                to_small.push(a);
                from_small.push(b);
            }
            if let Some(k) = max_candidates_per_pair {
                if smalls.len() > k {
                    let mut order: Vec<usize> = (0..smalls.len()).collect();
                    let score = |i: usize| {
                        let con = instance.contract(smalls[i].0);
                        con.price_on(smalls[i].1).unwrap_or(0.0) * con.v_max
                    };
                    order.sort_by(|&i, &j| score(j).total_cmp(&score(i)).then(i.cmp(&j)));
                    order.truncate(k);
                    order.sort_unstable();
                    smalls = order.iter().map(|&i| smalls[i]).collect();
                    to_small = order.iter().map(|&i| to_small[i].clone()).collect();
                    from_small = order.iter().map(|&i| from_small[i].clone()).collect();
                }
            }
            let mut idx: Vec<usize> = (0..smalls.len()).collect();
            idx.sort_by_key(|&i| (smalls[i].1, smalls[i].0));
            let smalls: Vec<(usize, u32)> = idx.iter().map(|&i| smalls[i]).collect();
            legs.extend(idx.iter().map(|&i| to_small[i].clone()));
            for (i, &(ci, mi)) in smalls.iter().enumerate() {
                let pi = instance.contract_port(ci);
                for &(cj, mj) in &smalls[i + 1..] {
                    let pj = instance.contract_port(cj);
                    let w = arrival_window(&Endpoint::Contract { contract: cj, day: mj }, false);
                    if let Some(l) = maker.make(Node::Small(ci), pi, 24.0 * f64::from(mi + 1), Node::Small(cj), pj, w) {
                        legs.push(l);
                    }
                }
            }
            legs.extend(idx.iter().map(|&i| from_small[i].clone()));
            pairs.push(NbPair {
                trip: tid,
                kind: t.kind,
                laden: t.laden(),
                fuel_mode: t.fuel_mode,
                head: t.start,
                tail: t.end,
                smalls,
                legs,
            });
        }
        let final_requirement = pairs.last().map_or(0.0, |p| p.legs[0].lng_burn);
        vessels.push(VesselNeighborhood {
            vessel: v,
            pairs,
            final_requirement,
        });
    }
    Ok(Neighborhood { vessels, pool })
}

/// Variable handles of a built insertion model.
#[derive(Debug, Clone)]
pub struct InsertionModel {
    pub model: MilpModel,
    /// Per vessel, per pair: onboard volume after the head call and on arrival at the tail.
    pub start: Vec<Vec<VarId>>,
    pub end: Vec<Vec<VarId>>,
    /// Per vessel, per pair: one binary per leg, aligned with `NbPair::legs`.
    pub legs: Vec<Vec<Vec<VarId>>>,
    /// Per vessel, per pair: one volume per small candidate, aligned with `NbPair::smalls`.
    pub small_volume: Vec<Vec<Vec<VarId>>>,
    /// Per big contract served: traded volume, free purchase, over-delivery.
    pub big_volume: BTreeMap<usize, VarId>,
    pub free: BTreeMap<usize, VarId>,
    pub waste: BTreeMap<usize, VarId>,
    pub omega: f64,
}

fn laden_bounds(vessel: &Vessel, laden: bool, cap: CapacityBound) -> (f64, f64) {
    if laden {
        let top = match cap {
            CapacityBound::Fill => vessel.max_volume(),
            CapacityBound::Nominal => vessel.capacity,
        };
        (vessel.high_volume(), top)
    } else {
        (0.0, vessel.low_volume())
    }
}

pub fn build_insertion_model(nb: &Neighborhood, instance: &Instance, opts: &InsertionOptions) -> InsertionModel {
    let omega = opts.omega(instance);
    let mut b = ModelBuilder::new(Sense::Maximize);
    let mut im = InsertionModel {
        model: MilpModel::default(),
        start: Vec::new(),
        end: Vec::new(),
        legs: Vec::new(),
        small_volume: Vec::new(),
        big_volume: BTreeMap::new(),
        free: BTreeMap::new(),
        waste: BTreeMap::new(),
        omega,
    };
    // Entries and exits of each small sell across the whole fleet.
    let mut small_in: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
    let mut small_out: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
    let dup = "unique insertion variable names";
    for vn in &nb.vessels {
        let v = vn.vessel;
        let vessel = instance.vessel(v);
        let mut starts = Vec::new();
        let mut ends = Vec::new();
        let mut vlegs = Vec::new();
        let mut vsmall = Vec::new();
        for (p, pair) in vn.pairs.iter().enumerate() {
            let (lo, hi) = laden_bounds(vessel, pair.laden, opts.capacity);
            let s = b.continuous(format!("S_{v}_{p}"), lo / VOL_SCALE, hi / VOL_SCALE).expect(dup);
            let e = b.continuous(format!("E_{v}_{p}"), lo / VOL_SCALE, hi / VOL_SCALE).expect(dup);
            let ls: Vec<VarId> = (0..pair.legs.len())
                .map(|k| b.binary(format!("l_{v}_{p}_{k}")).expect(dup))
                .collect();
            for (k, leg) in pair.legs.iter().enumerate() {
                if leg.fuel_cost != 0.0 {
                    b.objective(ls[k], -leg.fuel_cost / MONEY_SCALE);
                }
            }
            let out_of = |n: Node| -> Vec<VarId> {
                pair.legs.iter().zip(&ls).filter(|(l, _)| l.from == n).map(|(_, &x)| x).collect()
            };
            let into = |n: Node| -> Vec<VarId> {
                pair.legs.iter().zip(&ls).filter(|(l, _)| l.to == n).map(|(_, &x)| x).collect()
            };
            b.constraint(format!("leave_{v}_{p}"), out_of(Node::Head).into_iter().map(|x| (x, 1.0)), Comparator::Eq, 1.0);
            b.constraint(format!("enter_{v}_{p}"), into(Node::Tail).into_iter().map(|x| (x, 1.0)), Comparator::Eq, 1.0);
            let mut qs = Vec::with_capacity(pair.smalls.len());
            for &(c, day) in &pair.smalls {
                let con = instance.contract(c);
                let q = b.continuous(format!("q_{v}_{p}_{c}"), 0.0, con.v_max / VOL_SCALE).expect(dup);
                b.objective(q, con.price_on(day).unwrap_or(0.0) * PRICE_SCALE);
                let ins = into(Node::Small(c));
                let outs = out_of(Node::Small(c));
                b.constraint(
                    format!("pass_{v}_{p}_{c}"),
                    ins.iter().map(|&x| (x, 1.0)).chain(outs.iter().map(|&x| (x, -1.0))),
                    Comparator::Eq,
                    0.0,
                );
                b.constraint(
                    format!("qmin_{v}_{p}_{c}"),
                    outs.iter().map(|&x| (x, con.v_min / VOL_SCALE)).chain([(q, -1.0)]),
                    Comparator::Le,
                    0.0,
                );
                b.constraint(
                    format!("qmax_{v}_{p}_{c}"),
                    outs.iter().map(|&x| (x, -con.v_max / VOL_SCALE)).chain([(q, 1.0)]),
                    Comparator::Le,
                    0.0,
                );
                small_in.entry(c).or_default().extend(ins);
                small_out.entry(c).or_default().extend(outs);
                qs.push(q);
            }
            // Onboard volume falls by the small discharges and the burn of the chosen legs.
            let terms = [(e, 1.0), (s, -1.0)]
                .into_iter()
                .chain(qs.iter().map(|&q| (q, 1.0)))
                .chain(pair.legs.iter().zip(&ls).map(|(l, &x)| (x, l.lng_burn / VOL_SCALE)));
            b.constraint(format!("burn_{v}_{p}"), terms, Comparator::Eq, 0.0);
            starts.push(s);
            ends.push(e);
            vlegs.push(ls);
            vsmall.push(qs);
        }
        // Volume carried across each call joining two pairs.
        for (p, pair) in vn.pairs.iter().enumerate() {
            match pair.head {
                Endpoint::Terminal { .. } => {
                    b.constraint(
                        format!("delivery_{v}"),
                        [(starts[p], 1.0)],
                        Comparator::Eq,
                        vessel.initial_volume / VOL_SCALE,
                    );
                }
                Endpoint::Contract { contract: c, day } => {
                    let con = instance.contract(c);
                    let port = instance.contract_port(c);
                    let vc = b
                        .continuous(format!("V_{c}"), con.v_min / VOL_SCALE, con.v_max / VOL_SCALE)
                        .expect(dup);
                    let top = laden_bounds(vessel, true, opts.capacity).1 / VOL_SCALE;
                    let fc = b.continuous(format!("F_{c}"), 0.0, top).expect(dup);
                    let price = con.price_on(day).unwrap_or(0.0) * PRICE_SCALE;
                    b.objective(fc, -instance.free_price(port, day) * PRICE_SCALE);
                    let mut terms = vec![(starts[p], 1.0), (ends[p - 1], -1.0), (fc, -1.0)];
                    match con.kind {
                        ContractKind::Buy => {
                            b.objective(vc, -price);
                            terms.push((vc, -1.0));
                        }
                        ContractKind::Sell => {
                            b.objective(vc, price);
                            let wc = b.continuous(format!("W_{c}"), 0.0, top).expect(dup);
                            b.objective(wc, -omega * PRICE_SCALE);
                            terms.push((vc, 1.0));
                            terms.push((wc, 1.0));
                            im.waste.insert(c, wc);
                        }
                    }
                    b.constraint(format!("carry_{v}_{p}"), terms, Comparator::Eq, 0.0);
                    im.big_volume.insert(c, vc);
                    im.free.insert(c, fc);
                }
            }
        }
        im.start.push(starts);
        im.end.push(ends);
        im.legs.push(vlegs);
        im.small_volume.push(vsmall);
    }
    for (c, xs) in &small_out {
        if xs.len() > 1 {
            b.constraint(format!("once_out_{c}"), xs.iter().map(|&x| (x, 1.0)), Comparator::Le, 1.0);
        }
    }
    for (c, xs) in &small_in {
        if xs.len() > 1 {
            b.constraint(format!("once_in_{c}"), xs.iter().map(|&x| (x, 1.0)), Comparator::Le, 1.0);
        }
    }
    im.model = b.finish();
    im
}

/// Money terms of an insertion solution, in currency units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub big_sales: f64,
    pub big_purchases: f64,
    pub free_lng: f64,
    pub small_sales: f64,
    pub fuel: f64,
    pub over_delivery_volume: f64,
    /// Artificial penalty: omega times the over-delivered volume.
    pub penalty: f64,
}

impl ObjectiveBreakdown {
    /// Real money earned, without the artificial penalty.
    pub fn profit(&self) -> f64 {
        self.big_sales + self.small_sales - self.big_purchases - self.free_lng - self.fuel
    }

    /// The model objective in currency units.
    pub fn objective(&self) -> f64 {
        self.profit() - self.penalty
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub start_volume: f64,
    pub end_volume: f64,
    /// Indices into `NbPair::legs`, in sailing order.
    pub legs: Vec<usize>,
    /// Small sells served in this pair with their volumes.
    pub smalls: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsertionSolution {
    pub schedule: Schedule,
    pub status: SolveStatus,
    pub nodes: u64,
    pub breakdown: ObjectiveBreakdown,
    /// Solver objective converted back to currency units.
    pub solver_objective: f64,
    /// Headline profit (breakdown without the penalty).
    pub profit: f64,
    pub pairs: Vec<Vec<PairOutcome>>,
    pub num_binaries: usize,
}

/// Model point reproducing the lifted big-pairs schedule: direct arcs,
/// no small sells, trip-generation volumes.
pub fn lifted_point(nb: &Neighborhood, im: &InsertionModel, lifted: &Schedule) -> Vec<f64> {
    let mut x = vec![0.0; im.model.num_vars()];
    for (vi, vn) in nb.vessels.iter().enumerate() {
        if vn.pairs.is_empty() {
            continue;
        }
        let Some(plan) = lifted.vessels.get(vn.vessel) else { continue };
        for (p, pair) in vn.pairs.iter().enumerate() {
            x[im.legs[vi][p][0].index()] = 1.0;
            x[im.start[vi][p].index()] = plan.calls[p].volume_after / VOL_SCALE;
            x[im.end[vi][p].index()] = plan.calls[p + 1].volume_before / VOL_SCALE;
            if let Endpoint::Contract { contract: c, .. } = pair.tail {
                let call = &plan.calls[p + 1];
                x[im.big_volume[&c].index()] = call.traded / VOL_SCALE;
                x[im.free[&c].index()] = call.free_purchase / VOL_SCALE;
                if let Some(w) = im.waste.get(&c) {
                    x[w.index()] = call.over_delivery / VOL_SCALE;
                }
            }
        }
    }
    x
}

/// Builds the neighborhood model, warm-starts it from the big-pairs point
/// and turns the optimum into a schedule.
pub fn solve_insertion(
    instance: &Instance,
    trips: &TripSet,
    big: &BigPairSolution,
    opts: &InsertionOptions,
) -> Result<(Neighborhood, InsertionSolution), InsertionError> {
    let nb = derive_neighborhood(instance, trips, big, opts.max_candidates_per_pair)?;
    let lifted = lift_schedule(instance, trips, big);
    let sol = solve_neighborhood(&nb, instance, Some(&lifted), opts)?;
    Ok((nb, sol))
}

pub fn solve_neighborhood(
    nb: &Neighborhood,
    instance: &Instance,
    lifted: Option<&Schedule>,
    opts: &InsertionOptions,
) -> Result<InsertionSolution, InsertionError> {
    let im = build_insertion_model(nb, instance, opts);
    let mut solve_opts = opts.solve.clone();
    if solve_opts.initial_solution.is_none() {
        if let Some(l) = lifted {
            let x = lifted_point(nb, &im, l);
            if im.model.is_feasible(&x, 1e-7) {
                solve_opts.initial_solution = Some(x);
            }
        }
    }
    let sol = solve(&im.model, &solve_opts);
    if !sol.status.has_solution() {
        return Err(InsertionError::Solver(sol.status));
    }
    let mut out = extract(nb, instance, &im, &sol.values);
    out.status = sol.status;
    out.nodes = sol.nodes;
    out.solver_objective = sol.objective * MONEY_SCALE;
    Ok(out)
}

fn chosen(v: f64) -> bool {
    v > 0.5
}

/// Snaps tiny solver noise to zero so reported volumes are non-negative.
fn vol(values: &[f64], id: VarId) -> f64 {
    let x = values[id.index()] * VOL_SCALE;
    if x.abs() < 1e-9 {
        0.0
    } else {
        x
    }
}

fn extract(nb: &Neighborhood, instance: &Instance, im: &InsertionModel, values: &[f64]) -> InsertionSolution {
    let mut schedule = Schedule::empty("insertion");
    let mut bd = ObjectiveBreakdown::default();
    let mut outcomes = Vec::with_capacity(nb.vessels.len());
    let port_id = |p: usize| instance.ports()[p].id.clone();
    for (vi, vn) in nb.vessels.iter().enumerate() {
        let vessel = instance.vessel(vn.vessel);
        let mut plan = VesselPlan {
            vessel: vessel.id.clone(),
            calls: Vec::new(),
            legs: Vec::new(),
        };
        let mut pouts = Vec::with_capacity(vn.pairs.len());
        if vn.pairs.is_empty() {
            schedule.vessels.push(plan);
            outcomes.push(pouts);
            continue;
        }
        let (p0, _) = instance.vessel_ports(vn.vessel);
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
        for (p, pair) in vn.pairs.iter().enumerate() {
            let lx = &im.legs[vi][p];
            let mut next: HashMap<Node, usize> = HashMap::new();
            for (k, leg) in pair.legs.iter().enumerate() {
                if chosen(values[lx[k].index()]) {
                    next.insert(leg.from, k);
                }
            }
            let mut at = Node::Head;
            let mut path = Vec::new();
            let mut served = Vec::new();
            while at != Node::Tail {
                let k = next[&at];
                path.push(k);
                let leg = &pair.legs[k];
                plan.legs.push(Leg {
                    fuel_mode: pair.fuel_mode,
                    speed: leg.speed,
                    laden: pair.laden,
                    sail_hours: leg.sail_hours,
                    idle_hours: leg.idle_hours,
                    lng_burn: leg.lng_burn,
                    fuel_cost: leg.fuel_cost,
                });
                bd.fuel += leg.fuel_cost;
                let before = onboard - leg.lng_burn;
                let call = match leg.to {
                    Node::Small(c) => {
                        let i = pair.smalls.iter().position(|&(s, _)| s == c).expect("candidate");
                        let day = pair.smalls[i].1;
                        let q = vol(values, im.small_volume[vi][p][i]);
                        bd.small_sales += instance.contract(c).price_on(day).unwrap_or(0.0) * q;
                        served.push((c, q));
                        PortCall {
                            site: CallSite::Contract { id: instance.contract(c).id.clone() },
                            port: port_id(instance.contract_port(c)),
                            day,
                            volume_before: before,
                            traded: q,
                            free_purchase: 0.0,
                            over_delivery: 0.0,
                            volume_after: before - q,
                        }
                    }
                    Node::Tail => match pair.tail {
                        Endpoint::Terminal { port, day } => PortCall {
                            site: CallSite::End,
                            port: port_id(port),
                            day,
                            volume_before: before,
                            traded: 0.0,
                            free_purchase: 0.0,
                            over_delivery: 0.0,
                            volume_after: before,
                        },
                        Endpoint::Contract { contract: c, day } => {
                            let con = instance.contract(c);
                            let port = instance.contract_port(c);
                            let v = vol(values, im.big_volume[&c]);
                            let f = vol(values, im.free[&c]);
                            let w = im.waste.get(&c).map_or(0.0, |&w| vol(values, w));
                            let price = con.price_on(day).unwrap_or(0.0);
                            bd.free_lng += instance.free_price(port, day) * f;
                            let after = if con.is_buy() {
                                bd.big_purchases += price * v;
                                before + v + f
                            } else {
                                bd.big_sales += price * v;
                                bd.over_delivery_volume += w;
                                before - v - w + f
                            };
                            PortCall {
                                site: CallSite::Contract { id: con.id.clone() },
                                port: port_id(port),
                                day,
                                volume_before: before,
                                traded: v,
                                free_purchase: f,
                                over_delivery: w,
                                volume_after: after,
                            }
                        }
                    },
                    Node::Head => unreachable!("no arc enters the head"),
                };
                onboard = call.volume_after;
                plan.calls.push(call);
                at = leg.to;
            }
            pouts.push(PairOutcome {
                start_volume: vol(values, im.start[vi][p]),
                end_volume: vol(values, im.end[vi][p]),
                legs: path,
                smalls: served,
            });
        }
        schedule.vessels.push(plan);
        outcomes.push(pouts);
    }
    bd.penalty = im.omega * bd.over_delivery_volume;
    schedule.penalty = bd.penalty;
    InsertionSolution {
        schedule,
        status: SolveStatus::Optimal,
        nodes: 0,
        breakdown: bd,
        solver_objective: bd.objective(),
        profit: bd.profit(),
        pairs: outcomes,
        num_binaries: im.model.num_binaries(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    /// Arrival volume differs from start volume less discharges and burn.
    Telescoping,
    /// A pair's end volumes leave its band.
    Band,
    /// The last pair does not keep enough LNG, or ends above the low band.
    FinalVolume,
    /// A small sell is served twice or entered without leaving.
    SmallService,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub kind: AuditKind,
    pub vessel: usize,
    pub pair: usize,
    pub measured: f64,
    pub bound: f64,
}

/// Re-checks the volume identities and bounds of an insertion solution
/// using only the neighborhood data and the reported outcomes.
pub fn audit(nb: &Neighborhood, instance: &Instance, sol: &InsertionSolution, cap: CapacityBound) -> Vec<AuditFailure> {
    let mut out = Vec::new();
    let tol = AUDIT_TOL * VOL_SCALE;
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (vi, vn) in nb.vessels.iter().enumerate() {
        let vessel = instance.vessel(vn.vessel);
        for (p, (pair, po)) in vn.pairs.iter().zip(&sol.pairs[vi]).enumerate() {
            let fail = |kind, measured, bound| AuditFailure {
                kind,
                vessel: vn.vessel,
                pair: p,
                measured,
                bound,
            };
            let burn: f64 = po.legs.iter().map(|&k| pair.legs[k].lng_burn).sum();
            let sold: f64 = po.smalls.iter().map(|&(_, q)| q).sum();
            let expect = po.start_volume - sold - burn;
            if (po.end_volume - expect).abs() > tol {
                out.push(fail(AuditKind::Telescoping, po.end_volume, expect));
            }
            let (lo, hi) = laden_bounds(vessel, pair.laden, cap);
            for x in [po.start_volume, po.end_volume] {
                if x < lo - tol || x > hi + tol {
                    out.push(fail(AuditKind::Band, x, if x < lo { lo } else { hi }));
                }
            }
            if po.end_volume > po.start_volume + tol {
                out.push(fail(AuditKind::Band, po.end_volume, po.start_volume));
            }
            // Path must be connected from head to tail.
            let mut at = Node::Head;
            for &k in &po.legs {
                if pair.legs[k].from != at {
                    out.push(fail(AuditKind::SmallService, k as f64, 0.0));
                }
                at = pair.legs[k].to;
            }
            if at != Node::Tail {
                out.push(fail(AuditKind::SmallService, po.legs.len() as f64, 0.0));
            }
            for &(c, q) in &po.smalls {
                *seen.entry(c).or_default() += 1;
                let con = instance.contract(c);
                if q < con.v_min - tol || q > con.v_max + tol {
                    out.push(fail(AuditKind::SmallService, q, con.v_max));
                }
            }
        }
        if let (Some(po), Some(pair)) = (sol.pairs[vi].last(), vn.pairs.last()) {
            // Arrival at redelivery keeps a non-negative heel below the band.
            let bad = pair.kind != TripKind::Final || po.end_volume < -tol || po.end_volume > vessel.low_volume() + tol;
            if bad {
                out.push(AuditFailure {
                    kind: AuditKind::FinalVolume,
                    vessel: vn.vessel,
                    pair: vn.pairs.len() - 1,
                    measured: po.end_volume,
                    bound: vessel.low_volume(),
                });
            }
        }
    }
    for (c, n) in seen {
        if n > 1 {
            out.push(AuditFailure {
                kind: AuditKind::SmallService,
                vessel: usize::MAX,
                pair: c,
                measured: n as f64,
                bound: 1.0,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigpairs::{solve_big_pairs, BigPairsOptions};
    use crate::instance::fixtures;
    use crate::trips::{generate_trips, PenaltyParams};
    use crate::validator::{evaluate_profit, validate, Mode};

    fn pipeline(data: crate::instance::InstanceData) -> (Instance, TripSet, BigPairSolution) {
        let inst = Instance::new(data).unwrap();
        let set = generate_trips(&inst);
        let big = solve_big_pairs(&inst, &set, &PenaltyParams::default(), &BigPairsOptions::default()).unwrap();
        (inst, set, big)
    }

    fn check(inst: &Instance, nb: &Neighborhood, sol: &InsertionSolution) {
        let report = validate(&sol.schedule, inst, Mode::Main).unwrap();
        assert!(report.is_empty(), "{}", report.to_json());
        assert!(audit(nb, inst, sol, CapacityBound::Fill).is_empty());
        let p = evaluate_profit(&sol.schedule, inst).unwrap();
        assert!((p.net - sol.profit).abs() < 1e-6 * p.net.abs().max(1.0));
        assert!((sol.breakdown.objective() - sol.solver_objective).abs() < 1e-6 * sol.solver_objective.abs().max(1e3));
    }

    #[test]
    fn no_small_sells_reduces_to_volume_lp() {
        let (inst, set, big) = pipeline(fixtures::minimal());
        let (nb, sol) = solve_insertion(&inst, &set, &big, &InsertionOptions::default()).unwrap();
        assert!(nb.pool.is_empty());
        assert!(nb.vessels[0].pairs.iter().all(|p| p.legs.len() == 1));
        assert!(sol.profit >= big.profit - 1e-6);
        check(&inst, &nb, &sol);
    }

    /// Minimal fixture plus a small sell at port C, midway between A and B,
    /// open only on day 11.
    fn with_small(price: f64) -> crate::instance::InstanceData {
        let mut data = fixtures::minimal();
        data.ports.push(crate::instance::Port { id: "C".into(), name: "Gamma".into() });
        for d in 0..data.horizon_days {
            data.prices.push(crate::instance::PriceEntry { port: "C".into(), day: d, price: 200.0 });
        }
        data.distances.push(crate::instance::DistanceEntry { from: "A".into(), to: "C".into(), nm: 1500.0 });
        data.distances.push(crate::instance::DistanceEntry { from: "C".into(), to: "B".into(), nm: 1500.0 });
        data.contracts.push(fixtures::contract("s2", ContractKind::Sell, "C", 11, 11, 0.0, 8_000.0, price));
        data
    }

    #[test]
    fn one_candidate_gives_three_detour_legs() {
        let (inst, set, big) = pipeline(with_small(600.0));
        let nb = derive_neighborhood(&inst, &set, &big, None).unwrap();
        assert_eq!(nb.pool, vec![2]);
        let laden = nb.vessels[0].pairs.iter().find(|p| p.laden).unwrap();
        assert_eq!(laden.smalls, vec![(2, 11)]);
        // Direct arc, head to small, small to tail.
        assert_eq!(laden.legs.len(), 3);
    }

    #[test]
    fn profitable_small_sell_is_inserted() {
        let (inst, set, big) = pipeline(with_small(600.0));
        let (nb, sol) = solve_insertion(&inst, &set, &big, &InsertionOptions::default()).unwrap();
        let served: Vec<&str> = sol.schedule.served_contracts();
        assert!(served.contains(&"s2"), "{served:?}");
        assert!(sol.profit > big.profit);
        check(&inst, &nb, &sol);
    }

    #[test]
    fn growing_the_pool_never_hurts() {
        let (inst, set, big) = pipeline(with_small(600.0));
        let mut nb = derive_neighborhood(&inst, &set, &big, None).unwrap();
        let lifted = lift_schedule(&inst, &set, &big);
        let full = solve_neighborhood(&nb, &inst, Some(&lifted), &InsertionOptions::default()).unwrap();
        for pair in nb.vessels.iter_mut().flat_map(|v| v.pairs.iter_mut()) {
            pair.smalls.clear();
            pair.legs.truncate(1);
        }
        let empty = solve_neighborhood(&nb, &inst, Some(&lifted), &InsertionOptions::default()).unwrap();
        assert!(full.solver_objective >= empty.solver_objective - 1e-6);
    }

    #[test]
    fn unreachable_small_is_filtered() {
        let mut data = with_small(600.0);
        data.distances.retain(|d| d.to != "B" || d.from != "C");
        data.distances.push(crate::instance::DistanceEntry { from: "C".into(), to: "B".into(), nm: 9000.0 });
        let (inst, set, big) = pipeline(data);
        let nb = derive_neighborhood(&inst, &set, &big, None).unwrap();
        assert!(nb.reachable_smalls().is_empty());
    }
}
