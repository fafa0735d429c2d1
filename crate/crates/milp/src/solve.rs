//! Depth-first branch-and-bound over LP relaxations.
//!
//! The relaxation engine is microlp's bounded revised simplex; each branch
//! fixes one binary and re-optimizes the parent basis with the dual simplex.
//! Node order, variable selection and tie-breaking are fully deterministic.

use std::rc::Rc;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
use serde::{Deserialize, Serialize};

use crate::model::{Comparator, MilpModel, Sense, VarKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Maximum number of LP relaxations solved (root included).
    pub node_limit: u64,
    /// Feasibility and integrality tolerance.
    pub tolerance: f64,
    /// Stop once `(bound - incumbent) <= relative_gap * max(1, |incumbent|)`.
    pub relative_gap: f64,
    /// Optional wall-clock limit; disables the determinism guarantee when hit.
    #[serde(default)]
    pub time_limit: Option<Duration>,
    /// Known feasible assignment used as the starting incumbent.
    #[serde(skip)]
    pub initial_solution: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
            tolerance: 1e-6,
            relative_gap: 0.0,
            time_limit: None,
            initial_solution: None,
        }
    }
}

impl SolveOptions {
    pub fn with_node_limit(mut self, n: u64) -> Self {
        self.node_limit = n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped by the relative-gap criterion.
    Feasible { gap: f64 },
    Infeasible,
    Unbounded,
    /// Node or time budget exhausted; `gap` is infinite when no incumbent exists.
    BudgetExhausted { gap: f64 },
}

impl SolveStatus {
    pub fn has_solution(&self) -> bool {
        match self {
            SolveStatus::Optimal | SolveStatus::Feasible { .. } => true,
            SolveStatus::BudgetExhausted { gap } => gap.is_finite(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// One value per model variable; empty when no assignment is available.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven bound on the optimum (in the model's sense).
    pub bound: f64,
    pub nodes: u64,
}

impl MilpSolution {
    fn without_assignment(status: SolveStatus, nodes: u64) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            bound: f64::NAN,
            nodes,
        }
    }

    pub fn value(&self, var: crate::VarId) -> f64 {
        self.values[var.0]
    }
}

/// Internal maximization view: the search always maximizes `sign * objective`.
struct Relaxation {
    problem: Problem,
    vars: Vec<microlp::Variable>,
    sign: f64,
}

impl Relaxation {
    fn new(model: &MilpModel) -> Self {
        Self::with_fixes(model, &[], false)
    }

    /// Relaxation with the listed variables pinned to a value. Pinned
    /// columns are substituted into the right-hand sides, which keeps
    /// degenerate rows out of the basis when a node is re-solved cold.
    /// Rows left without terms are dropped; callers check them first.
    /// `reverse_rows` changes the pivoting order, which is enough to get
    /// past a singular factorization on some degenerate nodes.
    fn with_fixes(model: &MilpModel, fixes: &[(usize, f64)], reverse_rows: bool) -> Self {
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let sign = match model.sense() {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut obj = vec![0.0; model.num_vars()];
        for &(v, c) in model.objective() {
            obj[v.0] += sign * c;
        }
        let fixed = pinned(model, fixes);
        let vars = model
            .variables()
            .iter()
            .zip(&obj)
            .enumerate()
            .map(|(i, (v, &c))| {
                let bounds = fixed[i].map_or((v.lower, v.upper), |x| (x, x));
                problem.add_var(c, bounds)
            })
            .collect::<Vec<_>>();
        let mut rows: Vec<&crate::Constraint> = model.constraints().iter().collect();
        if reverse_rows {
            rows.reverse();
        }
        for c in rows {
            let expr: Vec<(microlp::Variable, f64)> = c
                .terms
                .iter()
                .filter(|t| fixed[t.0 .0].is_none())
                .map(|&(v, k)| (vars[v.0], k))
                .collect();
            if expr.is_empty() {
                continue;
            }
            let op = match c.cmp {
                Comparator::Le => ComparisonOp::Le,
                Comparator::Ge => ComparisonOp::Ge,
                Comparator::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(expr.as_slice(), op, c.rhs - pinned_sum(c, &fixed));
        }
        Self {
            problem,
            vars,
            sign,
        }
    }
}

fn pinned(model: &MilpModel, fixes: &[(usize, f64)]) -> Vec<Option<f64>> {
    let mut fixed = vec![None; model.num_vars()];
    for &(i, x) in fixes {
        fixed[i] = Some(x);
    }
    fixed
}

fn pinned_sum(c: &crate::Constraint, fixed: &[Option<f64>]) -> f64 {
    c.terms.iter().filter_map(|&(v, k)| fixed[v.0].map(|x| k * x)).sum()
}

/// Solves a node from scratch after a warm start broke down.
fn cold_solve(model: &MilpModel, fixes: &[(usize, f64)], tol: f64) -> NodeLp {
    let fixed = pinned(model, fixes);
    for c in model.constraints() {
        if c.terms.iter().all(|t| fixed[t.0 .0].is_some()) && !c.cmp.holds(pinned_sum(c, &fixed), c.rhs, tol) {
            return NodeLp::Infeasible;
        }
    }
    match classify(Relaxation::with_fixes(model, fixes, false).problem.solve()) {
        NodeLp::Unbounded | NodeLp::Failed => classify(Relaxation::with_fixes(model, fixes, true).problem.solve()),
        done => done,
    }
}

enum NodeLp {
    Solved(microlp::Solution),
    Infeasible,
    Unbounded,
    Failed,
}

fn classify(res: Result<SolveOutcome, microlp::Error>) -> NodeLp {
    match res {
        Ok(out) => match out.into_solution() {
            Ok(s) => NodeLp::Solved(s),
            Err(_) => NodeLp::Failed,
        },
        Err(microlp::Error::Infeasible) => NodeLp::Infeasible,
        Err(microlp::Error::Unbounded) => NodeLp::Unbounded,
        Err(_) => NodeLp::Failed,
    }
}

struct Pending {
    parent: Rc<microlp::Solution>,
    /// Binary fixings from the root down to this node, including its own.
    fixes: Vec<(usize, f64)>,
    var: usize,
    value: f64,
    parent_bound: f64,
}

struct Search<'a> {
    model: &'a MilpModel,
    relax: Relaxation,
    binaries: Vec<usize>,
    opts: &'a SolveOptions,
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: u64,
    started: Instant,
}

impl<'a> Search<'a> {
    fn out_of_budget(&self) -> bool {
        self.nodes >= self.opts.node_limit
            || self
                .opts
                .time_limit
                .is_some_and(|lim| self.started.elapsed() >= lim)
    }

    fn incumbent_value(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::NEG_INFINITY, |(v, _)| *v)
    }

    /// Node bound is worth exploring only if it can beat the incumbent.
    fn promising(&self, bound: f64) -> bool {
        match &self.incumbent {
            None => true,
            Some((inc, _)) => {
                let slack = self.opts.tolerance.max(self.opts.relative_gap * inc.abs().max(1.0));
                bound > inc + slack
            }
        }
    }

    fn values_of(&self, sol: &microlp::Solution) -> Vec<f64> {
        self.relax.vars.iter().map(|&v| sol.var_value_raw(v)).collect()
    }

    /// Most fractional binary, ties broken by lowest index.
    fn branching_var(&self, values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let f = (values[j] - values[j].floor()).min(values[j].ceil() - values[j]);
            if f > self.opts.tolerance && best.is_none_or(|(_, bf)| f > bf + 1e-12) {
                best = Some((j, f));
            }
        }
        best.map(|b| b.0)
    }

    fn offer(&mut self, mut values: Vec<f64>, sol: microlp::Solution) {
        for &j in &self.binaries {
            values[j] = values[j].round();
        }
        if !self.model.is_feasible(&values, self.opts.tolerance) {
            // Rounding drift: re-optimize continuous part with binaries pinned.
            let mut s = sol;
            for &j in &self.binaries {
                match s.fix_var(self.relax.vars[j], values[j]).map(|o| o.into_solution()) {
                    Ok(Ok(next)) => s = next,
                    _ => return,
                }
            }
            values = self.values_of(&s);
            for &j in &self.binaries {
                values[j] = values[j].round();
            }
            if !self.model.is_feasible(&values, self.opts.tolerance) {
                return;
            }
        }
        let obj = self.relax.sign * self.model.objective_value(&values);
        if obj > self.incumbent_value() {
            self.incumbent = Some((obj, values));
        }
    }
}

/// Solves `model` to optimality within the budget in `opts`.
pub fn solve(model: &MilpModel, opts: &SolveOptions) -> MilpSolution {
    let sign = match model.sense() {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    for c in model.constraints() {
        if c.terms.is_empty() && !c.cmp.holds(0.0, c.rhs, opts.tolerance) {
            return MilpSolution::without_assignment(SolveStatus::Infeasible, 0);
        }
    }
    if model.num_vars() == 0 {
        return MilpSolution {
            status: SolveStatus::Optimal,
            values: Vec::new(),
            objective: 0.0,
            bound: 0.0,
            nodes: 0,
        };
    }

    let binaries = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let mut search = Search {
        model,
        relax: Relaxation::new(model),
        binaries,
        opts,
        incumbent: None,
        nodes: 0,
        started: Instant::now(),
    };
    if let Some(init) = &opts.initial_solution {
        if model.is_feasible(init, opts.tolerance) {
            let mut v = init.clone();
            for &j in &search.binaries {
                v[j] = v[j].round();
            }
            search.incumbent = Some((sign * model.objective_value(&v), v));
        }
    }

    search.nodes += 1;
    let root = match classify(search.relax.problem.solve()) {
        NodeLp::Solved(s) => s,
        NodeLp::Infeasible => {
            return MilpSolution::without_assignment(SolveStatus::Infeasible, 1);
        }
        NodeLp::Unbounded => {
            return MilpSolution::without_assignment(SolveStatus::Unbounded, 1);
        }
        NodeLp::Failed => {
            return finish(search, f64::INFINITY, false);
        }
    };

    let mut stack: Vec<Pending> = Vec::new();
    let mut current = Some((root, Vec::new()));
    let mut exhausted = false;
    // Bound of subtrees dropped because no LP solve succeeded.
    let mut lost_bound = f64::NEG_INFINITY;
    let mut gap_stop_bound = f64::NEG_INFINITY;

    loop {
        if let Some((sol, fixes)) = current.take() {
            let bound = sol.objective();
            if search.promising(bound) {
                let values = search.values_of(&sol);
                match search.branching_var(&values) {
                    None => search.offer(values, sol),
                    Some(j) => {
                        let up_first = values[j] >= 0.5;
                        let (first, second) = if up_first { (1.0, 0.0) } else { (0.0, 1.0) };
                        let parent = Rc::new(sol);
                        let mut second_fixes = fixes.clone();
                        second_fixes.push((j, second));
                        let mut first_fixes = fixes;
                        first_fixes.push((j, first));
                        stack.push(Pending {
                            parent: Rc::clone(&parent),
                            fixes: second_fixes,
                            var: j,
                            value: second,
                            parent_bound: bound,
                        });
                        stack.push(Pending {
                            parent,
                            fixes: first_fixes,
                            var: j,
                            value: first,
                            parent_bound: bound,
                        });
                    }
                }
            }
        }

        if opts.relative_gap > 0.0 {
            if let Some((inc, _)) = &search.incumbent {
                let open = open_bound(&stack);
                if open - inc <= opts.relative_gap * inc.abs().max(1.0) {
                    gap_stop_bound = gap_stop_bound.max(open);
                    stack.clear();
                }
            }
        }

        let Some(next) = stack.pop() else { break };
        if !search.promising(next.parent_bound) {
            continue;
        }
        if search.out_of_budget() {
            stack.push(next);
            exhausted = true;
            break;
        }
        search.nodes += 1;
        let parent = Rc::try_unwrap(next.parent).unwrap_or_else(|rc| (*rc).clone());
        let mut outcome = classify(parent.fix_var(search.relax.vars[next.var], next.value));
        if matches!(outcome, NodeLp::Unbounded | NodeLp::Failed) {
            // A relaxation with finite root cannot become unbounded after
            // fixing, so either answer is a warm-start breakdown.
            outcome = cold_solve(model, &next.fixes, opts.tolerance);
        }
        match outcome {
            NodeLp::Solved(s) => current = Some((s, next.fixes)),
            NodeLp::Infeasible => {}
            NodeLp::Unbounded | NodeLp::Failed => {
                lost_bound = lost_bound.max(next.parent_bound);
                exhausted = true;
            }
        }
    }

    let open = if exhausted {
        open_bound(&stack).max(lost_bound).max(search.incumbent_value())
    } else {
        search.incumbent_value().max(gap_stop_bound)
    };
    finish(search, open, exhausted)
}

fn open_bound(stack: &[Pending]) -> f64 {
    stack
        .iter()
        .map(|p| p.parent_bound)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn finish(search: Search<'_>, open_bound: f64, exhausted: bool) -> MilpSolution {
    let sign = search.relax.sign;
    let nodes = search.nodes;
    let gap_tol = search.opts.relative_gap;
    match search.incumbent {
        None => {
            if exhausted {
                MilpSolution::without_assignment(
                    SolveStatus::BudgetExhausted { gap: f64::INFINITY },
                    nodes,
                )
            } else {
                MilpSolution::without_assignment(SolveStatus::Infeasible, nodes)
            }
        }
        Some((obj, values)) => {
            let bound = open_bound.max(obj);
            let gap = (bound - obj) / obj.abs().max(1.0);
            let status = if exhausted {
                SolveStatus::BudgetExhausted { gap }
            } else if gap_tol > 0.0 && gap > 0.0 {
                SolveStatus::Feasible { gap }
            } else {
                SolveStatus::Optimal
            };
            MilpSolution {
                status,
                values,
                objective: sign * obj,
                bound: sign * bound,
                nodes,
            }
        }
    }
}
