//! End-to-end runs: trip generation, penalty tuning, big-pairs selection,
//! small-discharge insertion, the node-model baselines, and the flexibility
//! sweep. Every reported profit is recomputed by the validator.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use lngplan_milp::{SolveOptions, SolveStatus};
use serde::{Deserialize, Serialize};

use crate::bigpairs::{lift_schedule, solve_big_pairs, BigPairSolution, BigPairsOptions};
use crate::generator::restrict_flexibility;
use crate::insertion::{audit, solve_insertion, CapacityBound, InsertionOptions, InsertionSolution, Neighborhood};
use crate::instance::{Instance, InstanceError};
use crate::nodemip::{build_node_sets, solve_decomposed, solve_full, to_schedule, NodeOptions};
use crate::parallel::Parallelism;
use crate::schedule::Schedule;
use crate::trips::{generate_trips_with, PenaltyParams, TripConfig, TripSet};
use crate::ttopt::{optimize, Grid2D, OptResult, TtOptions};
use crate::validator::{evaluate_profit, validate, Mode, ProfitBreakdown};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Bigpairs,
    SingleLns,
    MultistartLns,
    NodeMip,
    NodeDecomposed,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Bigpairs => "bigpairs",
            Approach::SingleLns => "single_lns",
            Approach::MultistartLns => "multistart_lns",
            Approach::NodeMip => "node_mip",
            Approach::NodeDecomposed => "node_decomposed",
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bigpairs" => Ok(Approach::Bigpairs),
            "single_lns" => Ok(Approach::SingleLns),
            "multistart_lns" => Ok(Approach::MultistartLns),
            "node_mip" => Ok(Approach::NodeMip),
            "node_decomposed" => Ok(Approach::NodeDecomposed),
            other => Err(format!("unknown approach `{other}`")),
        }
    }
}

/// What the penalty search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningObjective {
    /// Validator profit of the insertion schedule.
    #[default]
    Headline,
    /// The same profit minus the over-delivery penalty.
    Penalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub budget: usize,
    pub rank: usize,
    /// Points per axis of the (O, R) grid.
    pub grid_size: usize,
    /// Largest O; defaults to twice the highest unit price.
    pub o_max: Option<f64>,
    /// Largest R; defaults to max |P_t| / max(1, max y_t).
    pub r_max: Option<f64>,
    pub objective: TuningObjective,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            budget: 32,
            rank: 1,
            grid_size: 16,
            o_max: None,
            r_max: None,
            objective: TuningObjective::Headline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeConfig {
    pub n_steps: Option<usize>,
    pub window_days: u32,
    pub node_limit: u64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            n_steps: None,
            window_days: 182,
            node_limit: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub instance: Option<std::path::PathBuf>,
    pub approaches: Vec<Approach>,
    /// Trip generation drops trips waiting longer than this; `None` keeps all.
    pub max_idle_days: Option<f64>,
    pub tuning: TuningConfig,
    pub bigpairs_node_limit: u64,
    pub insertion_node_limit: u64,
    pub insertion_candidates: Option<usize>,
    /// Over-delivery penalty ω; defaults to ten times the highest sell price.
    pub omega: Option<f64>,
    /// Overrides every vessel's fill fraction.
    pub fill_fraction: Option<f64>,
    pub capacity: CapacityBound,
    pub node: NodeConfig,
    pub seed: u64,
    /// Keep fractions for the flexibility sweep.
    pub keep_fractions: Vec<f64>,
    pub parallelism: Parallelism,
    /// Replace the tuning budget by a wall-clock limit in seconds.
    pub wallclock: Option<f64>,
    pub output_dir: Option<std::path::PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            instance: None,
            approaches: vec![Approach::Bigpairs, Approach::SingleLns, Approach::MultistartLns],
            max_idle_days: Some(30.0),
            tuning: TuningConfig::default(),
            bigpairs_node_limit: 200_000,
            insertion_node_limit: 200,
            insertion_candidates: Some(6),
            omega: None,
            fill_fraction: None,
            capacity: CapacityBound::Fill,
            node: NodeConfig::default(),
            seed: 0,
            keep_fractions: vec![0.25, 0.5, 0.75, 1.0],
            parallelism: Parallelism::default(),
            wallclock: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("fill_fraction must lie in (0, 1]")]
    FillFraction,
    #[error("keep fraction {0} outside [0, 1]")]
    KeepFraction(f64),
}

impl RunConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.tuning.budget == 0 && self.wallclock.is_none() {
            return Err(ConfigError::NotPositive("tuning.budget"));
        }
        if self.tuning.grid_size == 0 {
            return Err(ConfigError::NotPositive("tuning.grid_size"));
        }
        if self.tuning.rank == 0 {
            return Err(ConfigError::NotPositive("tuning.rank"));
        }
        if self.bigpairs_node_limit == 0 || self.insertion_node_limit == 0 || self.node.node_limit == 0 {
            return Err(ConfigError::NotPositive("node limits"));
        }
        if self.node.window_days == 0 {
            return Err(ConfigError::NotPositive("node.window_days"));
        }
        if self.wallclock.is_some_and(|w| w.is_nan() || w <= 0.0) {
            return Err(ConfigError::NotPositive("wallclock"));
        }
        if let Some(f) = self.fill_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ConfigError::FillFraction);
            }
        }
        if let Some(&f) = self.keep_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(ConfigError::KeepFraction(f));
        }
        Ok(())
    }

    fn trip_config(&self) -> TripConfig {
        TripConfig {
            max_idle_days: self.max_idle_days,
            parallelism: self.parallelism,
        }
    }

    fn bigpairs_options(&self) -> BigPairsOptions {
        BigPairsOptions {
            solve: SolveOptions::default().with_node_limit(self.bigpairs_node_limit),
            reduce: true,
        }
    }

    fn insertion_options(&self) -> InsertionOptions {
        InsertionOptions {
            omega: self.omega,
            capacity: self.capacity,
            max_candidates_per_pair: self.insertion_candidates,
            solve: SolveOptions::default().with_node_limit(self.insertion_node_limit),
        }
    }

    fn node_options(&self) -> NodeOptions {
        NodeOptions {
            n_steps: self.node.n_steps,
            solve: SolveOptions::default().with_node_limit(self.node.node_limit),
        }
    }
}

/// Applies instance-level overrides from the config.
pub fn prepare_instance(instance: &Instance, config: &RunConfig) -> Result<Instance, InstanceError> {
    match config.fill_fraction {
        None => Ok(instance.clone()),
        Some(f) => {
            let mut data = instance.data().clone();
            for v in &mut data.vessels {
                v.fill_fraction = f;
            }
            Instance::new(data)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproachReport {
    pub approach: Approach,
    /// Validator profit of the schedule; `None` when a stage failed.
    pub profit: Option<f64>,
    pub breakdown: Option<ProfitBreakdown>,
    /// Search time in seconds, preprocessing excluded.
    pub runtime_s: f64,
    pub statuses: Vec<SolveStatus>,
    /// (O, R) of the reported schedule, for trip-based approaches.
    pub params: Option<(f64, f64)>,
    pub evaluations: Option<usize>,
    pub violations: usize,
    pub error: Option<StageError>,
    pub schedule_path: Option<String>,
    #[serde(skip)]
    pub schedule: Option<Schedule>,
    #[serde(skip)]
    pub trace: Option<OptResult>,
}

impl ApproachReport {
    fn failed(approach: Approach, stage: &str, message: String, started: Instant) -> Self {
        Self {
            approach,
            profit: None,
            breakdown: None,
            runtime_s: started.elapsed().as_secs_f64(),
            statuses: Vec::new(),
            params: None,
            evaluations: None,
            violations: 0,
            error: Some(StageError {
                stage: stage.into(),
                message,
            }),
            schedule_path: None,
            schedule: None,
            trace: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.error.is_none() && self.violations == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub n_contracts: usize,
    pub n_vessels: usize,
    pub n_trips: usize,
    /// Trip generation time in seconds.
    pub preprocessing_s: f64,
    pub approaches: Vec<ApproachReport>,
}

impl RunReport {
    pub fn get(&self, a: Approach) -> Option<&ApproachReport> {
        self.approaches.iter().find(|r| r.approach == a)
    }

    pub fn profit(&self, a: Approach) -> Option<f64> {
        self.get(a).and_then(|r| r.profit)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One big-pairs plus insertion run at fixed penalties.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub params: (f64, f64),
    pub big: BigPairSolution,
    pub big_schedule: Schedule,
    pub neighborhood: Neighborhood,
    pub insertion: InsertionSolution,
    /// Validator profit of the insertion schedule.
    pub profit: f64,
    pub penalized: f64,
}

/// Runs the trip-based approaches against one trip set, caching every
/// (O, R) evaluation so repeated points are solved once.
pub struct Evaluator<'a> {
    instance: &'a Instance,
    trips: &'a TripSet,
    big_opts: BigPairsOptions,
    ins_opts: InsertionOptions,
    omega: f64,
    cache: Mutex<HashMap<(u64, u64), Result<Evaluation, String>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(instance: &'a Instance, trips: &'a TripSet, config: &RunConfig) -> Self {
        let ins_opts = config.insertion_options();
        Self {
            instance,
            trips,
            big_opts: config.bigpairs_options(),
            omega: ins_opts.omega(instance),
            ins_opts,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn evaluate(&self, o: f64, r: f64) -> Result<Evaluation, String> {
        let key = (o.to_bits(), r.to_bits());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let out = self.compute(o, r);
        self.cache.lock().expect("cache lock").insert(key, out.clone());
        out
    }

    /// Every successful evaluation so far, ordered by (O, R).
    pub fn evaluations(&self) -> Vec<Evaluation> {
        let cache = self.cache.lock().expect("cache lock");
        let mut out: Vec<Evaluation> = cache.values().filter_map(|e| e.as_ref().ok()).cloned().collect();
        out.sort_by(|a, b| a.params.0.total_cmp(&b.params.0).then(a.params.1.total_cmp(&b.params.1)));
        out
    }

    fn compute(&self, o: f64, r: f64) -> Result<Evaluation, String> {
        let big = solve_big_pairs(self.instance, self.trips, &PenaltyParams::new(o, r), &self.big_opts)
            .map_err(|e| format!("bigpairs: {e}"))?;
        let big_schedule = lift_schedule(self.instance, self.trips, &big);
        let (nb, insertion) = solve_insertion(self.instance, self.trips, &big, &self.ins_opts)
            .map_err(|e| format!("insertion: {e}"))?;
        let failures = audit(&nb, self.instance, &insertion, self.ins_opts.capacity);
        if let Some(f) = failures.first() {
            return Err(format!("insertion audit: {f:?}"));
        }
        let profit = evaluate_profit(&insertion.schedule, self.instance)
            .map_err(|e| format!("profit: {e}"))?
            .net;
        let penalized = profit - self.omega * insertion.schedule.total_over_delivery();
        log::debug!("evaluated O={o} R={r}: profit {profit:.0}");
        Ok(Evaluation {
            params: (o, r),
            big,
            big_schedule,
            neighborhood: nb,
            insertion,
            profit,
            penalized,
        })
    }
}

/// Default tuning grid scaled to the instance.
pub fn default_grid(instance: &Instance, trips: &TripSet, tuning: &TuningConfig) -> Grid2D {
    let (p_max, y_max) = trips.metric_ranges();
    let o_max = tuning.o_max.unwrap_or(2.0 * instance.max_unit_price());
    let r_max = tuning.r_max.unwrap_or(p_max / f64::from(y_max.max(1)));
    Grid2D::log_grid(o_max, r_max, tuning.grid_size)
}

fn finish(
    approach: Approach,
    instance: &Instance,
    schedule: Schedule,
    mode: Mode,
    started: Instant,
    statuses: Vec<SolveStatus>,
) -> ApproachReport {
    let report = validate(&schedule, instance, mode);
    let profit = evaluate_profit(&schedule, instance);
    match (report, profit) {
        (Ok(v), Ok(p)) => {
            if !v.is_empty() {
                log::warn!("{} schedule has {} violations", approach.as_str(), v.len());
            }
            ApproachReport {
                approach,
                profit: Some(p.net),
                breakdown: Some(p),
                runtime_s: started.elapsed().as_secs_f64(),
                statuses,
                params: None,
                evaluations: None,
                violations: v.len(),
                error: None,
                schedule_path: None,
                schedule: Some(schedule),
                trace: None,
            }
        }
        (Err(e), _) | (_, Err(e)) => ApproachReport::failed(approach, "validate", e.to_string(), started),
    }
}

/// Multistart search. `seed_schedule`, when given and valid, competes with
/// the searched schedules.
fn multistart(
    instance: &Instance,
    trips: &TripSet,
    eval: &Evaluator<'_>,
    config: &RunConfig,
    seed_schedule: Option<&Schedule>,
) -> ApproachReport {
    let started = Instant::now();
    let grid = default_grid(instance, trips, &config.tuning);
    let deadline = config.wallclock.map(|w| started + Duration::from_secs_f64(w));
    let budget = if deadline.is_some() { grid.len() } else { config.tuning.budget };
    let tt = TtOptions {
        budget,
        rank: config.tuning.rank,
        seed: config.seed,
        parallelism: config.parallelism,
    };
    let objective = config.tuning.objective;
    let result = optimize(
        |o, r| {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Err("wall-clock limit reached".to_string());
            }
            eval.evaluate(o, r).map(|e| match objective {
                TuningObjective::Headline => e.profit,
                TuningObjective::Penalized => e.penalized,
            })
        },
        &grid,
        &tt,
    );
    if result.evaluations_used == 0 {
        let msg = result.error.clone().unwrap_or_else(|| "no evaluation".into());
        return ApproachReport::failed(Approach::MultistartLns, "tuning", msg, started);
    }
    let best = match eval.evaluate(result.best_point.0, result.best_point.1) {
        Ok(e) => e,
        Err(e) => return ApproachReport::failed(Approach::MultistartLns, "tuning", e, started),
    };
    let mut schedule = best.insertion.schedule.clone();
    let mut params = Some(best.params);
    if let Some(seed) = seed_schedule {
        let clean = validate(seed, instance, Mode::Main).is_ok_and(|v| v.is_empty());
        let seed_profit = evaluate_profit(seed, instance).map(|p| p.net).unwrap_or(f64::NEG_INFINITY);
        if clean && seed_profit > best.profit {
            schedule = seed.clone();
            params = None;
        }
    }
    let statuses = vec![best.big.status, best.insertion.status];
    let mut rep = finish(Approach::MultistartLns, instance, schedule, Mode::Main, started, statuses);
    rep.params = params;
    rep.evaluations = Some(result.evaluations_used);
    if let Some(msg) = &result.error {
        log::info!("tuning stopped early: {msg}");
    }
    rep.trace = Some(result);
    rep
}

/// Runs the requested approaches on one instance.
pub fn run(instance: &Instance, config: &RunConfig) -> RunReport {
    run_seeded(instance, config, None).0
}

/// Like [`run`], also returning every big-pairs plus insertion evaluation
/// the trip-based approaches performed.
pub fn run_detailed(instance: &Instance, config: &RunConfig) -> (RunReport, Vec<Evaluation>) {
    run_seeded(instance, config, None)
}

fn run_seeded(
    instance: &Instance,
    config: &RunConfig,
    seed_schedule: Option<&Schedule>,
) -> (RunReport, Vec<Evaluation>) {
    let pre = Instant::now();
    let needs_trips = config
        .approaches
        .iter()
        .any(|a| matches!(a, Approach::Bigpairs | Approach::SingleLns | Approach::MultistartLns));
    let trips = if needs_trips {
        generate_trips_with(instance, &config.trip_config())
    } else {
        TripSet::default()
    };
    let preprocessing_s = pre.elapsed().as_secs_f64();
    let eval = Evaluator::new(instance, &trips, config);
    let mut approaches = Vec::new();
    for &a in &config.approaches {
        let started = Instant::now();
        let rep = match a {
            Approach::Bigpairs | Approach::SingleLns => match eval.evaluate(0.0, 0.0) {
                Ok(e) => {
                    let (schedule, statuses) = if a == Approach::Bigpairs {
                        (e.big_schedule.clone(), vec![e.big.status])
                    } else {
                        (e.insertion.schedule.clone(), vec![e.big.status, e.insertion.status])
                    };
                    let mut r = finish(a, instance, schedule, Mode::Main, started, statuses);
                    r.params = Some((0.0, 0.0));
                    r
                }
                Err(msg) => ApproachReport::failed(a, msg.split(':').next().unwrap_or("lns"), msg.clone(), started),
            },
            Approach::MultistartLns => multistart(instance, &trips, &eval, config, seed_schedule),
            Approach::NodeMip => match solve_full(instance, &config.node_options()) {
                Ok(sol) => {
                    let sets = build_node_sets(instance);
                    let s = to_schedule(instance, &sets, &sol, "node_mip");
                    finish(a, instance, s, Mode::Appendix, started, vec![sol.status])
                }
                Err(e) => ApproachReport::failed(a, "node_mip", e.to_string(), started),
            },
            Approach::NodeDecomposed => {
                match solve_decomposed(instance, config.node.window_days, &config.node_options()) {
                    Ok(dec) => {
                        let sets = build_node_sets(instance);
                        let s = to_schedule(instance, &sets, &dec.solution, "node_decomposed");
                        finish(a, instance, s, Mode::Appendix, started, dec.window_statuses)
                    }
                    Err(e) => ApproachReport::failed(a, "node_decomposed", e.to_string(), started),
                }
            }
        };
        approaches.push(rep);
    }
    let report = RunReport {
        n_contracts: instance.contracts().len(),
        n_vessels: instance.vessels().len(),
        n_trips: trips.len(),
        preprocessing_s,
        approaches,
    };
    (report, eval.evaluations())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub approach: String,
    pub profit: f64,
}

/// Flexibility sweep over `config.keep_fractions` in ascending order.
///
/// Restricted instances are nested, so a schedule that is valid at a lower
/// fraction remains a candidate for the multistart at the next one.
pub fn sweep(instance: &Instance, config: &RunConfig) -> Vec<SweepRow> {
    let mut fractions = config.keep_fractions.clone();
    fractions.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    let mut carried: Option<Schedule> = None;
    for f in fractions {
        let inst = restrict_flexibility(instance, f, config.seed);
        let (report, _) = run_seeded(&inst, config, carried.as_ref());
        for a in &report.approaches {
            if let (Some(p), true) = (a.profit, a.is_valid()) {
                rows.push(SweepRow {
                    fraction: f,
                    approach: a.approach.as_str().into(),
                    profit: p,
                });
            }
        }
        if let Some(best) = report.get(Approach::MultistartLns).filter(|r| r.is_valid()) {
            carried = best.schedule.clone();
        }
    }
    rows
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
