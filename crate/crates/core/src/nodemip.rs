//! Node-based formulation: each vessel visits contracts at numbered steps.
//!
//! This model is simpler than the main pipeline. Vessels burn LNG only, they
//! arrive on window midpoints, they have no delivery or redelivery terminals,
//! and boil-off does not depend on load. Volumes are signed: purchases are
//! positive and sales negative. It serves as a baseline and, at desk scale,
//! as an exact reference. A rolling-window decomposition handles horizons
//! that are too long for one solve.

use std::collections::BTreeSet;

use lngplan_milp::{solve, Comparator, MilpModel, ModelBuilder, Sense, SolveOptions, SolveStatus, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{ContractKind, FuelMode, Instance};
use crate::schedule::{CallSite, Leg, PortCall, Schedule, VesselPlan};

const VOL_SCALE: f64 = 1e3;
const MONEY_SCALE: f64 = 1e6;

/// Precomputed tables and index sets of the node model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModelSets {
    pub midpoint: Vec<u32>,
    /// Days available for moving from `i` to `j` (one day is spent operating).
    pub travel_days: Vec<Vec<i64>>,
    /// `[k][i][j]`: slowest sufficient speed, or 0 when the move is impossible.
    pub speed: Vec<Vec<Vec<f64>>>,
    /// `[k][i][j]`: daily LNG use at that speed.
    pub rate: Vec<Vec<Vec<f64>>>,
    /// Daily boil-off of a vessel that is not moving.
    pub idle_rate: Vec<f64>,
    /// Contracts a vessel can never serve because of its tank size.
    pub impossible: Vec<BTreeSet<usize>>,
    /// `[k][i]`: contracts that cannot directly follow `i`.
    pub successor_forbidden: Vec<Vec<BTreeSet<usize>>>,
    /// `[k][i]`: contracts that cannot be visited at any step after `i`.
    pub always_forbidden: Vec<Vec<BTreeSet<usize>>>,
    /// Contracts that cannot be a vessel's first visit.
    pub not_first: Vec<BTreeSet<usize>>,
    /// Sells without a minimum volume.
    pub slots: BTreeSet<usize>,
}

impl NodeModelSets {
    pub fn feasible(&self, k: usize, i: usize, j: usize) -> bool {
        self.speed[k][i][j] > 0.0
    }

    /// Whether `j` may not directly follow `i`.
    pub fn blocked(&self, k: usize, i: usize, j: usize) -> bool {
        self.always_forbidden[k][i].contains(&j) || self.successor_forbidden[k][i].contains(&j)
    }

    /// LNG used between the operations at `i` and `j`, boil-off during the
    /// operation included.
    pub fn burn(&self, k: usize, i: usize, j: usize) -> f64 {
        self.rate[k][i][j] * self.travel_days[i][j] as f64 + self.idle_rate[k]
    }

    /// Longest chain of contracts that vessel `k` could visit in order.
    pub fn longest_chain(&self, k: usize) -> usize {
        let n = self.midpoint.len();
        let mut order: Vec<usize> = (0..n).filter(|i| !self.impossible[k].contains(i)).collect();
        order.sort_by_key(|&i| (self.midpoint[i], i));
        let mut best = vec![0usize; n];
        let mut overall = 0;
        for (a, &j) in order.iter().enumerate() {
            let mut b = usize::from(!self.not_first[k].contains(&j));
            for &i in &order[..a] {
                if best[i] > 0 && !self.blocked(k, i, j) {
                    b = b.max(best[i] + 1);
                }
            }
            best[j] = b;
            overall = overall.max(b);
        }
        overall
    }
}

/// Signed volume bounds in the node model's convention.
pub fn signed_bounds(instance: &Instance, c: usize) -> (f64, f64) {
    let con = instance.contract(c);
    match con.kind {
        ContractKind::Buy => (con.v_min, con.v_max),
        ContractKind::Sell => (-con.v_max, -con.v_min),
    }
}

/// Computes every table and set the model needs.
pub fn build_node_sets(instance: &Instance) -> NodeModelSets {
    let n = instance.contracts().len();
    let nv = instance.vessels().len();
    let midpoint: Vec<u32> = instance.contracts().iter().map(|c| c.midpoint()).collect();
    let travel_days: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| i64::from(midpoint[j]) - i64::from(midpoint[i]) - 1).collect())
        .collect();
    let bounds: Vec<(f64, f64)> = (0..n).map(|c| signed_bounds(instance, c)).collect();
    let is_buy: Vec<bool> = instance.contracts().iter().map(|c| c.is_buy()).collect();
    let mut speed = Vec::with_capacity(nv);
    let mut rate = Vec::with_capacity(nv);
    let mut idle_rate = Vec::with_capacity(nv);
    let mut impossible = Vec::with_capacity(nv);
    let mut successor_forbidden = Vec::with_capacity(nv);
    let mut always_forbidden = Vec::with_capacity(nv);
    let mut not_first = Vec::with_capacity(nv);
    for vessel in instance.vessels() {
        let table: Vec<(f64, f64)> = {
            let mut t: Vec<(f64, f64)> = vessel
                .consumption_table
                .iter()
                .filter(|r| r.fuel_mode == FuelMode::LngOnly && r.laden)
                .map(|r| (r.speed, 24.0 * (r.consumption + r.boil_off)))
                .collect();
            t.sort_by(|a, b| a.0.total_cmp(&b.0));
            t
        };
        let vmax = table.last().map_or(0.0, |r| r.0);
        let full = vessel.fill_fraction * vessel.capacity;
        let band = vessel.forbidden_zone.0 * vessel.capacity;
        let mut sp = vec![vec![0.0; n]; n];
        let mut rt = vec![vec![0.0; n]; n];
        let mut m_sets = vec![BTreeSet::new(); n];
        let mut a_sets = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in 0..n {
                let t = travel_days[i][j];
                let chosen = if i == j || t < 0 || table.is_empty() {
                    None
                } else {
                    let dist = instance.distance(instance.contract_port(i), instance.contract_port(j));
                    if dist <= 0.0 {
                        table.first().copied()
                    } else if t == 0 {
                        None
                    } else {
                        let need = dist / (24.0 * t as f64);
                        if need > vmax {
                            None
                        } else {
                            table.iter().copied().find(|r| r.0 >= need)
                        }
                    }
                };
                let Some((s, r)) = chosen else {
                    a_sets[i].insert(j);
                    continue;
                };
                sp[i][j] = s;
                rt[i][j] = r;
                let travel = r * t as f64;
                let (lo_i, hi_i) = bounds[i];
                let (lo_j, hi_j) = bounds[j];
                let two_buys = is_buy[i] && is_buy[j] && lo_i + lo_j - travel > full;
                let two_sells = !is_buy[i] && !is_buy[j] && hi_i.abs() + hi_j.abs() + travel > full;
                if two_buys || two_sells || travel > band {
                    m_sets[i].insert(j);
                }
            }
        }
        let imp: BTreeSet<usize> = (0..n)
            .filter(|&c| if is_buy[c] { bounds[c].0 > full } else { bounds[c].1.abs() > full })
            .collect();
        let nf: BTreeSet<usize> = (0..n).filter(|&c| !is_buy[c] || bounds[c].0 > full).collect();
        speed.push(sp);
        rate.push(rt);
        idle_rate.push(vessel.idle_boil_off);
        impossible.push(imp);
        successor_forbidden.push(m_sets);
        always_forbidden.push(a_sets);
        not_first.push(nf);
    }
    let slots = (0..n).filter(|&c| !is_buy[c] && bounds[c].1 == 0.0).collect();
    NodeModelSets {
        midpoint,
        travel_days,
        speed,
        rate,
        idle_rate,
        impossible,
        successor_forbidden,
        always_forbidden,
        not_first,
        slots,
    }
}

/// Route positions per vessel: enough steps for the densest feasible chain,
/// never more than the number of contracts.
pub fn default_steps(instance: &Instance, sets: &NodeModelSets) -> usize {
    let n = instance.contracts().len();
    let mut min_gap = i64::MAX;
    for k in 0..instance.vessels().len() {
        for i in 0..n {
            for j in 0..n {
                if sets.feasible(k, i, j) {
                    min_gap = min_gap.min(sets.travel_days[i][j] + 1);
                }
            }
        }
    }
    let by_time = if min_gap == i64::MAX {
        1
    } else {
        (i64::from(instance.horizon_days()) + min_gap - 1) / min_gap.max(1)
    };
    let chain = (0..instance.vessels().len()).map(|k| sets.longest_chain(k)).max().unwrap_or(0);
    (by_time as usize).min(n).min(chain).max(1)
}

/// Where a vessel starts a (sub)problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselStart {
    /// Onboard load before the first step.
    pub load: f64,
    /// A contract already served and booked elsewhere, fixed at step 0 with
    /// its signed volume.
    pub anchor: Option<(usize, f64)>,
}

/// Handles of a built node model.
#[derive(Debug, Clone)]
pub struct NodeModel {
    pub model: MilpModel,
    pub n_steps: usize,
    /// `[k][q]`: (contract, x, V) for every allowed visit.
    pub visits: Vec<Vec<Vec<(usize, VarId, VarId)>>>,
    /// `[k][q]` for q in 0..=n_steps.
    pub load: Vec<Vec<VarId>>,
    pub kappa: Vec<Vec<VarId>>,
    pub num_products: usize,
}

/// Builds the model over the contracts flagged in `active` (all when `None`).
pub fn build_node_model(
    instance: &Instance,
    sets: &NodeModelSets,
    n_steps: usize,
    starts: &[VesselStart],
    active: Option<&[bool]>,
) -> NodeModel {
    let n = instance.contracts().len();
    let n_steps = n_steps.max(1);
    let is_active = |c: usize| active.is_none_or(|a| a[c]);
    let mut b = ModelBuilder::new(Sense::Maximize);
    let dup = "unique node-model names";
    let mut visits = Vec::new();
    let mut loads = Vec::new();
    let mut kappas = Vec::new();
    let mut per_contract: Vec<Vec<VarId>> = vec![Vec::new(); n];
    let anchors: BTreeSet<usize> = starts.iter().filter_map(|s| s.anchor.map(|a| a.0)).collect();
    let mut num_products = 0;
    for (k, vessel) in instance.vessels().iter().enumerate() {
        let cap = vessel.capacity / VOL_SCALE;
        let high = vessel.forbidden_zone.1 * vessel.capacity / VOL_SCALE;
        let low = vessel.forbidden_zone.0 * vessel.capacity / VOL_SCALE;
        let full = vessel.fill_fraction * vessel.capacity / VOL_SCALE;
        let start = starts[k];
        let mut vk: Vec<Vec<(usize, VarId, VarId)>> = Vec::with_capacity(n_steps);
        for q in 0..n_steps {
            let mut row = Vec::new();
            for i in 0..n {
                let anchored_here = start.anchor.is_some_and(|a| a.0 == i);
                let allowed = if let Some((a, _)) = start.anchor {
                    if q == 0 {
                        i == a
                    } else {
                        is_active(i) && !anchors.contains(&i)
                    }
                } else {
                    is_active(i) && !anchors.contains(&i) && !(q == 0 && sets.not_first[k].contains(&i))
                };
                if !allowed || (sets.impossible[k].contains(&i) && !anchored_here) {
                    continue;
                }
                let x = b.binary(format!("x_{i}_{k}_{q}")).expect(dup);
                let (lo, hi) = signed_bounds(instance, i);
                let (vlo, vhi) = if lo >= 0.0 { (0.0, hi) } else { (lo, 0.0) };
                let v = b.continuous(format!("V_{i}_{k}_{q}"), vlo / VOL_SCALE, vhi / VOL_SCALE).expect(dup);
                if anchored_here && q == 0 {
                    let vol = start.anchor.expect("anchor").1 / VOL_SCALE;
                    b.constraint(format!("anchor_x_{k}"), [(x, 1.0)], Comparator::Eq, 1.0);
                    b.constraint(format!("anchor_v_{k}"), [(v, 1.0)], Comparator::Eq, vol);
                } else {
                    let price = instance.contract(i).price_on(sets.midpoint[i]).unwrap_or(0.0);
                    b.objective(v, -price * VOL_SCALE / MONEY_SCALE);
                    let upper = if sets.slots.contains(&i) { -sets.idle_rate[k] / VOL_SCALE } else { hi / VOL_SCALE };
                    b.constraint(format!("vlo_{i}_{k}_{q}"), [(x, lo / VOL_SCALE), (v, -1.0)], Comparator::Le, 0.0);
                    b.constraint(format!("vhi_{i}_{k}_{q}"), [(v, 1.0), (x, -upper)], Comparator::Le, 0.0);
                    per_contract[i].push(x);
                }
                row.push((i, x, v));
            }
            vk.push(row);
        }
        // One contract per step, and no gaps once the vessel stops.
        for q in 0..n_steps {
            if vk[q].len() > 1 {
                b.constraint(format!("one_{k}_{q}"), vk[q].iter().map(|&(_, x, _)| (x, 1.0)), Comparator::Le, 1.0);
            }
            if q + 1 < n_steps && !vk[q + 1].is_empty() {
                let terms = vk[q + 1]
                    .iter()
                    .map(|&(_, x, _)| (x, 1.0))
                    .chain(vk[q].iter().map(|&(_, x, _)| (x, -1.0)));
                b.constraint(format!("stop_{k}_{q}"), terms, Comparator::Le, 0.0);
            }
        }
        // Forbidden successors and forbidden later visits.
        for q in 0..n_steps {
            for &(i, xi, _) in &vk[q] {
                if q + 1 < n_steps {
                    for &(j, xj, _) in &vk[q + 1] {
                        if sets.successor_forbidden[k][i].contains(&j) {
                            b.constraint(format!("succ_{k}_{i}_{j}_{q}"), [(xi, 1.0), (xj, 1.0)], Comparator::Le, 1.0);
                        }
                    }
                }
                for (q2, row) in vk.iter().enumerate().skip(q + 1) {
                    for &(j, xj, _) in row {
                        if sets.always_forbidden[k][i].contains(&j) {
                            b.constraint(format!("after_{k}_{i}_{j}_{q}_{q2}"), [(xi, 1.0), (xj, 1.0)], Comparator::Le, 1.0);
                        }
                    }
                }
            }
        }
        // Loads: L_0 fixed, L_{q+1} = L_q + trades at q - burn of the move q -> q+1.
        let lk: Vec<VarId> = (0..=n_steps)
            .map(|q| b.continuous(format!("L_{k}_{q}"), 0.0, cap).expect(dup))
            .collect();
        b.constraint(format!("load0_{k}"), [(lk[0], 1.0)], Comparator::Eq, start.load / VOL_SCALE);
        for q in 0..n_steps {
            let mut terms: Vec<(VarId, f64)> = vec![(lk[q + 1], 1.0), (lk[q], -1.0)];
            terms.extend(vk[q].iter().map(|&(_, _, v)| (v, -1.0)));
            if q + 1 < n_steps {
                for &(i, xi, _) in &vk[q] {
                    for &(j, xj, _) in &vk[q + 1] {
                        if sets.blocked(k, i, j) {
                            continue;
                        }
                        let z = b.binary(format!("z_{i}_{j}_{k}_{q}")).expect(dup);
                        num_products += 1;
                        b.constraint(format!("za_{i}_{j}_{k}_{q}"), [(z, 1.0), (xi, -1.0)], Comparator::Le, 0.0);
                        b.constraint(format!("zb_{i}_{j}_{k}_{q}"), [(z, 1.0), (xj, -1.0)], Comparator::Le, 0.0);
                        b.constraint(format!("zc_{i}_{j}_{k}_{q}"), [(z, -1.0), (xi, 1.0), (xj, 1.0)], Comparator::Le, 1.0);
                        terms.push((z, sets.burn(k, i, j) / VOL_SCALE));
                    }
                }
            }
            b.constraint(format!("load_{k}_{q}"), terms, Comparator::Eq, 0.0);
            // Volume right after the operation stays inside the tank.
            let after: Vec<(VarId, f64)> = std::iter::once((lk[q], 1.0)).chain(vk[q].iter().map(|&(_, _, v)| (v, 1.0))).collect();
            b.constraint(format!("tank_lo_{k}_{q}"), after.clone(), Comparator::Ge, 0.0);
            b.constraint(format!("tank_hi_{k}_{q}"), after, Comparator::Le, cap);
        }
        let kk: Vec<VarId> = (0..=n_steps).map(|q| b.binary(format!("kappa_{k}_{q}")).expect(dup)).collect();
        for q in 0..=n_steps {
            b.constraint(format!("band_lo_{k}_{q}"), [(lk[q], 1.0), (kk[q], -high)], Comparator::Ge, 0.0);
            b.constraint(format!("band_hi_{k}_{q}"), [(lk[q], 1.0), (kk[q], -(full - low))], Comparator::Le, low);
        }
        visits.push(vk);
        loads.push(lk);
        kappas.push(kk);
    }
    for (i, xs) in per_contract.iter().enumerate() {
        if xs.len() > 1 {
            b.constraint(format!("once_{i}"), xs.iter().map(|&x| (x, 1.0)), Comparator::Le, 1.0);
        }
    }
    NodeModel {
        model: b.finish(),
        n_steps,
        visits,
        load: loads,
        kappa: kappas,
        num_products,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeVisit {
    pub contract: usize,
    /// Signed traded volume, m³.
    pub volume: f64,
    /// Load on arrival, m³.
    pub load_before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSolution {
    pub status: SolveStatus,
    /// Objective in currency units, anchored visits excluded.
    pub objective: f64,
    pub nodes: u64,
    pub routes: Vec<Vec<NodeVisit>>,
    /// Load after the last operation, per vessel.
    pub final_load: Vec<f64>,
    /// Initial load per vessel.
    pub initial_load: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct NodeOptions {
    /// Route positions per vessel; `None` uses [`default_steps`].
    pub n_steps: Option<usize>,
    pub solve: SolveOptions,
}


#[derive(Debug, Error)]
pub enum NodeError {
    #[error("node model ended with status {0:?}")]
    Solver(SolveStatus),
}

fn extract(instance: &Instance, sets: &NodeModelSets, nm: &NodeModel, values: &[f64], starts: &[VesselStart]) -> (Vec<Vec<NodeVisit>>, Vec<f64>) {
    let mut routes = Vec::new();
    let mut finals = Vec::new();
    for k in 0..instance.vessels().len() {
        let mut route: Vec<NodeVisit> = Vec::new();
        let mut load = starts[k].load;
        let mut prev: Option<usize> = None;
        for q in 0..nm.n_steps {
            let Some(&(i, _, v)) = nm.visits[k][q].iter().find(|&&(_, x, _)| values[x.index()] > 0.5) else {
                break;
            };
            if let Some(p) = prev {
                load -= sets.burn(k, p, i);
            }
            let raw = values[v.index()] * VOL_SCALE;
            let volume = if raw.abs() < 1e-9 { 0.0 } else { raw };
            route.push(NodeVisit {
                contract: i,
                volume,
                load_before: load,
            });
            load += volume;
            prev = Some(i);
        }
        routes.push(route);
        finals.push(load);
    }
    (routes, finals)
}

fn solve_window(
    instance: &Instance,
    sets: &NodeModelSets,
    n_steps: usize,
    starts: &[VesselStart],
    active: Option<&[bool]>,
    opts: &SolveOptions,
) -> Result<NodeSolution, NodeError> {
    let nm = build_node_model(instance, sets, n_steps, starts, active);
    let sol = solve(&nm.model, opts);
    if !sol.status.has_solution() {
        return Err(NodeError::Solver(sol.status));
    }
    let (routes, final_load) = extract(instance, sets, &nm, &sol.values, starts);
    Ok(NodeSolution {
        status: sol.status,
        objective: sol.objective * MONEY_SCALE,
        nodes: sol.nodes,
        routes,
        final_load,
        initial_load: starts.iter().map(|s| s.load).collect(),
    })
}

/// Solves the whole horizon in one model.
pub fn solve_full(instance: &Instance, opts: &NodeOptions) -> Result<NodeSolution, NodeError> {
    let sets = build_node_sets(instance);
    let n_steps = opts.n_steps.unwrap_or_else(|| default_steps(instance, &sets));
    let starts: Vec<VesselStart> = instance
        .vessels()
        .iter()
        .map(|v| VesselStart {
            load: v.initial_volume,
            anchor: None,
        })
        .collect();
    solve_window(instance, &sets, n_steps, &starts, None, &opts.solve)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposedSolution {
    /// Combined routes; the objective counts every committed visit once.
    pub solution: NodeSolution,
    pub window_statuses: Vec<SolveStatus>,
}

/// Solves consecutive windows of `window_days`. Each vessel's route is cut
/// after its last purchase in a window; that purchase becomes the fixed
/// first visit of the next window and its load carries over. Sales after
/// the cut are given up.
pub fn solve_decomposed(instance: &Instance, window_days: u32, opts: &NodeOptions) -> Result<DecomposedSolution, NodeError> {
    let sets = build_node_sets(instance);
    let n = instance.contracts().len();
    let nv = instance.vessels().len();
    let window_days = window_days.max(1);
    let n_windows = instance.horizon_days().div_ceil(window_days).max(1);
    let mut starts: Vec<VesselStart> = instance
        .vessels()
        .iter()
        .map(|v| VesselStart {
            load: v.initial_volume,
            anchor: None,
        })
        .collect();
    let initial_load: Vec<f64> = starts.iter().map(|s| s.load).collect();
    let mut committed: Vec<Vec<NodeVisit>> = vec![Vec::new(); nv];
    let mut statuses = Vec::new();
    let mut nodes = 0;
    let mut final_load = initial_load.clone();
    for w in 0..n_windows {
        let lo = w * window_days;
        let hi = lo + window_days;
        let active: Vec<bool> = (0..n).map(|c| (lo..hi).contains(&sets.midpoint[c])).collect();
        let n_steps = opts.n_steps.unwrap_or_else(|| {
            let count = active.iter().filter(|&&a| a).count();
            (default_steps(instance, &sets).min(count) + 1).max(1)
        });
        let sol = solve_window(instance, &sets, n_steps, &starts, Some(&active), &opts.solve)?;
        statuses.push(sol.status);
        nodes += sol.nodes;
        let last = w + 1 == n_windows;
        for k in 0..nv {
            let route = &sol.routes[k];
            let skip = usize::from(starts[k].anchor.is_some());
            let keep = if last {
                route.len()
            } else {
                route
                    .iter()
                    .rposition(|v| instance.contract(v.contract).is_buy())
                    .map_or(0, |p| p + 1)
            };
            if keep > skip {
                committed[k].extend(route[skip..keep].iter().copied());
            }
            if keep > 0 {
                let anchor = route[keep - 1];
                starts[k] = VesselStart {
                    load: anchor.load_before,
                    anchor: Some((anchor.contract, anchor.volume)),
                };
            }
            if last {
                final_load[k] = sol.final_load[k];
            }
        }
        if last {
            // Vessels whose committed route ends in an earlier window keep the
            // load right after their last visit.
            for k in 0..nv {
                if sol.routes[k].is_empty() {
                    final_load[k] = committed[k].last().map_or(initial_load[k], |v| v.load_before + v.volume);
                }
            }
        }
    }
    let objective = committed
        .iter()
        .flatten()
        .map(|v| -instance.contract(v.contract).price_on(sets.midpoint[v.contract]).unwrap_or(0.0) * v.volume)
        .sum();
    let worst = statuses
        .iter()
        .copied()
        .find(|s| !matches!(s, SolveStatus::Optimal))
        .unwrap_or(SolveStatus::Optimal);
    Ok(DecomposedSolution {
        solution: NodeSolution {
            status: worst,
            objective,
            nodes,
            routes: committed,
            final_load,
            initial_load,
        },
        window_statuses: statuses,
    })
}

/// Re-checks a node solution against the model rules without a solver.
/// Returns one message per broken rule.
pub fn check_node_solution(instance: &Instance, sets: &NodeModelSets, sol: &NodeSolution) -> Vec<String> {
    let tol = 1e-6 * VOL_SCALE;
    let mut errs = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, route) in sol.routes.iter().enumerate() {
        let vessel = instance.vessel(k);
        let cap = vessel.capacity;
        let low = vessel.forbidden_zone.0 * cap;
        let high = vessel.forbidden_zone.1 * cap;
        let full = vessel.fill_fraction * cap;
        let in_band = |x: f64| (x >= -tol && x <= low + tol) || (x >= high - tol && x <= full + tol);
        let mut load = sol.initial_load[k];
        for (q, v) in route.iter().enumerate() {
            let i = v.contract;
            if !seen.insert(i) {
                errs.push(format!("contract {i} visited twice"));
            }
            if sets.impossible[k].contains(&i) {
                errs.push(format!("vessel {k} serves impossible contract {i}"));
            }
            if q == 0 && sets.not_first[k].contains(&i) {
                errs.push(format!("vessel {k} starts at forbidden first contract {i}"));
            }
            if q > 0 {
                let p = route[q - 1].contract;
                if sets.blocked(k, p, i) {
                    errs.push(format!("vessel {k}: {i} cannot follow {p}"));
                }
                load -= sets.burn(k, p, i);
            }
            for earlier in &route[..q] {
                if sets.always_forbidden[k][earlier.contract].contains(&i) {
                    errs.push(format!("vessel {k}: {i} unreachable after {}", earlier.contract));
                }
            }
            if (v.load_before - load).abs() > tol {
                errs.push(format!("vessel {k} step {q}: load {} expected {load}", v.load_before));
            }
            if !in_band(v.load_before) {
                errs.push(format!("vessel {k} step {q}: arrival load {} in sloshing band", v.load_before));
            }
            let (lo, hi) = signed_bounds(instance, i);
            let hi = if sets.slots.contains(&i) { -sets.idle_rate[k] } else { hi };
            if v.volume < lo - tol || v.volume > hi + tol {
                errs.push(format!("contract {i}: volume {} outside [{lo}, {hi}]", v.volume));
            }
            load += v.volume;
            if load < -tol || load > cap + tol {
                errs.push(format!("vessel {k} step {q}: load after trade {load} outside tank"));
            }
        }
        if !in_band(load) {
            errs.push(format!("vessel {k}: final load {load} in sloshing band"));
        }
    }
    errs
}

/// Objective recomputed from the visits.
pub fn node_objective(instance: &Instance, sol: &NodeSolution) -> f64 {
    sol.routes
        .iter()
        .flatten()
        .map(|v| {
            let c = instance.contract(v.contract);
            -c.price_on(c.midpoint()).unwrap_or(0.0) * v.volume
        })
        .sum()
}

/// Converts routes into a schedule for the validator's appendix mode.
pub fn to_schedule(instance: &Instance, sets: &NodeModelSets, sol: &NodeSolution, provenance: &str) -> Schedule {
    let mut schedule = Schedule::empty(provenance);
    for (k, route) in sol.routes.iter().enumerate() {
        let vessel = instance.vessel(k);
        let mut plan = VesselPlan {
            vessel: vessel.id.clone(),
            calls: Vec::new(),
            legs: Vec::new(),
        };
        for (q, v) in route.iter().enumerate() {
            let i = v.contract;
            if q > 0 {
                let p = route[q - 1].contract;
                let dist = instance.distance(instance.contract_port(p), instance.contract_port(i));
                let speed = sets.speed[k][p][i];
                let sail = if dist > 0.0 { dist / speed } else { 0.0 };
                let after_prev = route[q - 1].load_before + route[q - 1].volume;
                plan.legs.push(Leg {
                    fuel_mode: FuelMode::LngOnly,
                    speed,
                    laden: after_prev >= vessel.forbidden_zone.1 * vessel.capacity - 1e-3,
                    sail_hours: sail,
                    idle_hours: (24.0 * (sets.travel_days[p][i] + 1) as f64 - sail).max(0.0),
                    lng_burn: sets.burn(k, p, i),
                    fuel_cost: 0.0,
                });
            }
            let c = instance.contract(i);
            plan.calls.push(PortCall {
                site: CallSite::Contract { id: c.id.clone() },
                port: c.port.clone(),
                day: sets.midpoint[i],
                volume_before: v.load_before,
                traded: v.volume.abs(),
                free_purchase: 0.0,
                over_delivery: 0.0,
                volume_after: v.load_before + v.volume,
            });
        }
        schedule.vessels.push(plan);
    }
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures;
    use crate::validator::{evaluate_profit, validate, Mode};

    fn minimal() -> Instance {
        Instance::new(fixtures::minimal()).unwrap()
    }

    #[test]
    fn oversize_buy_is_impossible() {
        let mut data = fixtures::minimal();
        data.contracts[0].v_min = 0.99 * 170_000.0;
        data.contracts[0].v_max = 0.995 * 170_000.0;
        let inst = Instance::new(data).unwrap();
        let sets = build_node_sets(&inst);
        assert!(sets.impossible[0].contains(&0));
        assert!(sets.not_first[0].contains(&0));
    }

    #[test]
    fn backwards_pair_is_always_forbidden() {
        let sets = build_node_sets(&minimal());
        // The sell's midpoint (21) precedes nothing; the buy (2) cannot follow it.
        assert!(sets.travel_days[1][0] < 0);
        assert!(sets.always_forbidden[0][1].contains(&0));
        assert!(sets.feasible(0, 0, 1));
        assert_eq!(sets.travel_days[0][1], 21 - 2 - 1);
    }

    #[test]
    fn two_large_buys_cannot_follow_each_other() {
        let mut data = fixtures::minimal();
        data.contracts[1] = fixtures::contract("b2", ContractKind::Buy, "A", 10, 10, 90_000.0, 100_000.0, 200.0);
        let inst = Instance::new(data).unwrap();
        let sets = build_node_sets(&inst);
        // 130k + 90k minus a few hundred m³ of boil-off exceeds 0.985 * 170k.
        assert!(sets.successor_forbidden[0][0].contains(&1));
    }

    #[test]
    fn variable_count_for_one_pair() {
        let inst = minimal();
        let sets = build_node_sets(&inst);
        let starts = [VesselStart { load: 5_000.0, anchor: None }];
        let nm = build_node_model(&inst, &sets, 2, &starts, None);
        // Step 0 admits only the buy; step 1 admits both contracts.
        assert_eq!(nm.visits[0][0].len(), 1);
        assert_eq!(nm.visits[0][1].len(), 2);
        assert_eq!(nm.num_products, 1);
        // x and V per visit, one product, 3 loads, 3 band indicators.
        assert_eq!(nm.model.num_vars(), 2 * 3 + 1 + 3 + 3);
    }

    #[test]
    fn single_pair_is_taken() {
        let inst = minimal();
        let sol = solve_full(&inst, &NodeOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let route: Vec<usize> = sol.routes[0].iter().map(|v| v.contract).collect();
        assert_eq!(route, vec![0, 1]);
        let buy = sol.routes[0][0].volume;
        let sell = sol.routes[0][1].volume;
        assert!((sol.objective - (500.0 * -sell - 200.0 * buy)).abs() < 1e-3);
        let sets = build_node_sets(&inst);
        assert!(check_node_solution(&inst, &sets, &sol).is_empty());
        let sched = to_schedule(&inst, &sets, &sol, "node");
        let r = validate(&sched, &inst, Mode::Appendix).unwrap();
        assert!(r.is_empty(), "{}", r.to_json());
        let p = evaluate_profit(&sched, &inst).unwrap();
        assert!((p.net - sol.objective).abs() < 1e-3);
    }

    #[test]
    fn infeasible_pairs_give_empty_routes() {
        let mut data = fixtures::minimal();
        data.distances[0].nm = 100_000.0;
        let inst = Instance::new(data).unwrap();
        let sol = solve_full(&inst, &NodeOptions::default()).unwrap();
        assert!(sol.routes[0].is_empty());
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn single_window_matches_full() {
        let inst = minimal();
        let full = solve_full(&inst, &NodeOptions::default()).unwrap();
        let dec = solve_decomposed(&inst, 365, &NodeOptions::default()).unwrap();
        assert!((full.objective - dec.solution.objective).abs() < 1e-6);
        assert_eq!(full.routes.len(), dec.solution.routes.len());
        for (a, b) in full.routes.iter().zip(&dec.solution.routes) {
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.contract, y.contract);
                assert!((x.volume - y.volume).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn idle_first_window_keeps_initial_state() {
        let inst = minimal();
        // Nothing has its midpoint in days 0..2, so window one is empty.
        let dec = solve_decomposed(&inst, 2, &NodeOptions::default()).unwrap();
        assert_eq!(dec.window_statuses.len(), 30);
        assert_eq!(dec.solution.initial_load[0], 5_000.0);
        let sets = build_node_sets(&inst);
        assert!(check_node_solution(&inst, &sets, &dec.solution).is_empty());
    }
}
