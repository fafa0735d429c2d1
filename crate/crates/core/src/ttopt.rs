//! Budgeted black-box maximization over a two-parameter grid.
//!
//! The objective is viewed as an unknown matrix `A[i][j] = f(o_i, r_j)`. The
//! search alternates between evaluating whole columns and whole rows, choosing
//! the next rows (columns) with the maximum-volume rule applied to what has
//! been seen so far. After each sweep the skeleton approximation
//! `A[:, J] A[I, J]^+ A[I, :]` proposes unevaluated points that it predicts to
//! be best. When the cross stops moving, the search restarts from fresh
//! random columns. Every value comes from a real evaluation, results are
//! cached, and the evaluation order does not depend on the budget, so a
//! larger budget always extends a smaller one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::{self, Parallelism};

/// A swap must grow the submatrix volume by this factor to be taken.
const MAXVOL_THRESHOLD: f64 = 1.0 + 1e-2;
const MAXVOL_MAX_SWEEPS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid axis `{0}` is empty")]
    Empty(&'static str),
    #[error("grid axis `{0}` must be strictly increasing and non-negative")]
    Order(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    o_values: Vec<f64>,
    r_values: Vec<f64>,
}

fn check_axis(name: &'static str, v: &[f64]) -> Result<(), GridError> {
    if v.is_empty() {
        return Err(GridError::Empty(name));
    }
    let sorted = v.windows(2).all(|w| w[0] < w[1]);
    if !sorted || v[0] < 0.0 || !v.iter().all(|x| x.is_finite()) {
        return Err(GridError::Order(name));
    }
    Ok(())
}

impl Grid2D {
    pub fn new(o_values: Vec<f64>, r_values: Vec<f64>) -> Result<Self, GridError> {
        check_axis("o_values", &o_values)?;
        check_axis("r_values", &r_values)?;
        Ok(Self { o_values, r_values })
    }

    /// Zero followed by `n - 1` log-spaced points from `max / 1000` to `max`.
    /// A non-positive `max` collapses the axis to `[0]`.
    pub fn log_axis(max: f64, n: usize) -> Vec<f64> {
        if max <= 0.0 || !max.is_finite() || n <= 1 {
            return vec![0.0];
        }
        let lo = max * 1e-3;
        let steps = n - 1;
        let mut v = vec![0.0];
        for k in 0..steps {
            let t = if steps == 1 { 1.0 } else { k as f64 / (steps - 1) as f64 };
            v.push(lo * (max / lo).powf(t));
        }
        v
    }

    /// Square grid with both axes built by [`Grid2D::log_axis`].
    pub fn log_grid(o_max: f64, r_max: f64, n: usize) -> Self {
        Self::new(Self::log_axis(o_max, n), Self::log_axis(r_max, n)).expect("log axes are valid")
    }

    pub fn o_values(&self) -> &[f64] {
        &self.o_values
    }

    pub fn r_values(&self) -> &[f64] {
        &self.r_values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.o_values.len(), self.r_values.len())
    }

    pub fn len(&self) -> usize {
        self.o_values.len() * self.r_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.o_values[i], self.r_values[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maxvol {
    /// Selected rows, ascending.
    pub rows: Vec<usize>,
    /// The matrix had lower column rank than its width; remaining rows were
    /// filled by descending row norm.
    pub rank_deficient: bool,
}

/// Picks `k = ncols` rows of `a` whose square submatrix has (locally)
/// maximal absolute determinant.
pub fn maxvol(a: &DMatrix<f64>) -> Maxvol {
    let (n, k) = a.shape();
    if k >= n {
        return Maxvol {
            rows: (0..n).collect(),
            rank_deficient: k > n,
        };
    }
    if k == 0 {
        return Maxvol {
            rows: Vec::new(),
            rank_deficient: false,
        };
    }
    // Starting rows from Gaussian elimination with partial pivoting.
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut m = a.clone();
    let mut rows: Vec<usize> = Vec::with_capacity(k);
    let mut deficient = false;
    for j in 0..k {
        let pick = (0..n)
            .filter(|i| !rows.contains(i))
            .max_by(|&x, &y| m[(x, j)].abs().total_cmp(&m[(y, j)].abs()).then(y.cmp(&x)));
        let Some(p) = pick.filter(|&p| m[(p, j)].abs() > 1e-12 * scale) else {
            deficient = true;
            break;
        };
        rows.push(p);
        let pivot_row = m.row(p).clone_owned();
        for r in 0..n {
            if r != p {
                let factor = m[(r, j)] / pivot_row[j];
                if factor != 0.0 {
                    for c in j..k {
                        m[(r, c)] -= factor * pivot_row[c];
                    }
                }
            }
        }
    }
    if deficient {
        let mut rest: Vec<usize> = (0..n).filter(|i| !rows.contains(i)).collect();
        rest.sort_by(|&x, &y| a.row(y).norm().total_cmp(&a.row(x).norm()).then(x.cmp(&y)));
        rows.extend(rest.into_iter().take(k - rows.len()));
        rows.sort_unstable();
        return Maxvol {
            rows,
            rank_deficient: true,
        };
    }
    for _ in 0..MAXVOL_MAX_SWEEPS {
        let sub = DMatrix::from_fn(k, k, |r, c| a[(rows[r], c)]);
        let Some(inv) = sub.try_inverse() else { break };
        let b = a * inv;
        let mut best = (0, 0, 0.0f64);
        for i in 0..n {
            for j in 0..k {
                let v = b[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= MAXVOL_THRESHOLD {
            break;
        }
        rows[best.1] = best.0;
    }
    rows.sort_unstable();
    Maxvol {
        rows,
        rank_deficient: false,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TtOptions {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Number of rows and columns in each cross.
    pub rank: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for TtOptions {
    fn default() -> Self {
        Self {
            budget: 32,
            rank: 2,
            seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub eval_index: usize,
    pub i: usize,
    pub j: usize,
    pub o: f64,
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_point: (f64, f64),
    pub best_index: (usize, usize),
    pub best_value: f64,
    pub evaluations_used: usize,
    pub trace: Vec<TraceEntry>,
    /// Some maxvol call fell back to norm-based row selection.
    pub rank_deficient: bool,
    /// Message of the evaluation error that stopped the search early.
    pub error: Option<String>,
}

impl OptResult {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["o", "r", "value", "eval_index"])?;
        for t in &self.trace {
            w.write_record([t.o.to_string(), t.r.to_string(), t.value.to_string(), t.eval_index.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Search<'g, F> {
    grid: &'g Grid2D,
    f: F,
    budget: usize,
    mode: Parallelism,
    values: BTreeMap<(usize, usize), f64>,
    trace: Vec<TraceEntry>,
    error: Option<String>,
    rank_deficient: bool,
}

impl<F, E> Search<'_, F>
where
    F: Fn(f64, f64) -> Result<f64, E> + Sync,
    E: Display + Send,
{
    fn stopped(&self) -> bool {
        self.error.is_some() || self.trace.len() >= self.budget || self.values.len() >= self.grid.len()
    }

    /// Evaluates the new points of `points` in order; returns how many were new.
    fn eval(&mut self, points: &[(usize, usize)]) -> usize {
        let mut fresh = Vec::new();
        let mut seen = BTreeSet::new();
        for &p in points {
            if !self.values.contains_key(&p) && seen.insert(p) {
                fresh.push(p);
            }
        }
        fresh.truncate(self.budget.saturating_sub(self.trace.len()));
        if self.error.is_some() || fresh.is_empty() {
            return 0;
        }
        let grid = self.grid;
        let f = &self.f;
        let results = parallel::map(&fresh, self.mode, |&(i, j)| {
            let (o, r) = grid.point(i, j);
            f(o, r).map_err(|e| e.to_string())
        });
        let mut added = 0;
        for (&(i, j), res) in fresh.iter().zip(results) {
            match res {
                Ok(value) => {
                    let (o, r) = grid.point(i, j);
                    self.values.insert((i, j), value);
                    self.trace.push(TraceEntry {
                        eval_index: self.trace.len(),
                        i,
                        j,
                        o,
                        r,
                        value,
                    });
                    added += 1;
                }
                Err(msg) => {
                    self.error = Some(msg);
                    break;
                }
            }
        }
        added
    }

    fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.values.get(&(i, j)).copied()
    }

    /// Values shifted to be positive so the largest magnitude marks the maximum.
    fn shifted(&self, raw: DMatrix<f64>) -> DMatrix<f64> {
        let lo = self.values.values().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let eps = 1e-9 * (hi - lo).abs().max(1.0);
        raw.map(|x| x - lo + eps)
    }

    fn column_block(&self, cols: &[usize]) -> Option<DMatrix<f64>> {
        let n = self.grid.shape().0;
        let mut m = DMatrix::zeros(n, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            for i in 0..n {
                m[(i, c)] = self.value(i, j)?;
            }
        }
        Some(m)
    }

    fn row_block_t(&self, rows: &[usize]) -> Option<DMatrix<f64>> {
        let n = self.grid.shape().1;
        let mut m = DMatrix::zeros(n, rows.len());
        for (c, &i) in rows.iter().enumerate() {
            for j in 0..n {
                m[(j, c)] = self.value(i, j)?;
            }
        }
        Some(m)
    }

    /// Best unevaluated points predicted by the skeleton approximation.
    fn proposals(&self, rows: &[usize], cols: &[usize], count: usize) -> Vec<(usize, usize)> {
        let (Some(c), Some(rt)) = (self.column_block(cols), self.row_block_t(rows)) else {
            return Vec::new();
        };
        let p = DMatrix::from_fn(rows.len(), cols.len(), |a, b| c[(rows[a], b)]);
        let scale = p.amax().max(f64::MIN_POSITIVE);
        let Ok(pinv) = p.pseudo_inverse(1e-10 * scale) else {
            return Vec::new();
        };
        let approx = &c * pinv * rt.transpose();
        let mut cand: Vec<((usize, usize), f64)> = Vec::new();
        let (n1, n2) = self.grid.shape();
        for i in 0..n1 {
            for j in 0..n2 {
                if !self.values.contains_key(&(i, j)) {
                    cand.push(((i, j), approx[(i, j)]));
                }
            }
        }
        cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        cand.into_iter().take(count).map(|(p, _)| p).collect()
    }
}

/// Maximizes `f` over `grid` with at most `opts.budget` evaluations.
///
/// The grid origin `(0, 0)` is always evaluated first.
pub fn optimize<F, E>(f: F, grid: &Grid2D, opts: &TtOptions) -> OptResult
where
    F: Fn(f64, f64) -> Result<f64, E> + Sync,
    E: Display + Send,
{
    let (n1, n2) = grid.shape();
    let rank = opts.rank.clamp(1, n1.min(n2));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut s = Search {
        grid,
        f,
        budget: opts.budget,
        mode: opts.parallelism,
        values: BTreeMap::new(),
        trace: Vec::new(),
        error: None,
        rank_deficient: false,
    };
    s.eval(&[(0, 0)]);
    let mut used_cols: BTreeSet<usize> = BTreeSet::new();
    let mut visited: BTreeSet<(Vec<usize>, Vec<usize>)> = BTreeSet::new();
    let mut cols = {
        let mut others: Vec<usize> = (1..n2).collect();
        others.shuffle(&mut rng);
        let mut c: Vec<usize> = std::iter::once(0).chain(others.into_iter().take(rank - 1)).collect();
        c.sort_unstable();
        c
    };
    while !s.stopped() {
        used_cols.extend(cols.iter().copied());
        let mut added = s.eval(&cols.iter().flat_map(|&j| (0..n1).map(move |i| (i, j))).collect::<Vec<_>>());
        if s.stopped() {
            break;
        }
        let c = s.column_block(&cols).expect("columns evaluated");
        let mv = maxvol(&s.shifted(c));
        s.rank_deficient |= mv.rank_deficient;
        let rows = mv.rows;
        added += s.eval(&rows.iter().flat_map(|&i| (0..n2).map(move |j| (i, j))).collect::<Vec<_>>());
        if s.stopped() {
            break;
        }
        let rt = s.row_block_t(&rows).expect("rows evaluated");
        let mv = maxvol(&s.shifted(rt));
        s.rank_deficient |= mv.rank_deficient;
        let next_cols = mv.rows;
        let props = s.proposals(&rows, &cols, rank);
        added += s.eval(&props);
        let state = (rows.clone(), next_cols.clone());
        let stuck = next_cols == cols || added == 0 || !visited.insert(state);
        cols = if stuck {
            // Restart on columns that still hold unevaluated points.
            let mut open: Vec<usize> = (0..n2)
                .filter(|&j| (0..n1).any(|i| !s.values.contains_key(&(i, j))))
                .collect();
            if open.is_empty() {
                break;
            }
            let fresh: Vec<usize> = open.iter().copied().filter(|j| !used_cols.contains(j)).collect();
            if fresh.len() >= rank {
                open = fresh;
            }
            open.shuffle(&mut rng);
            open.truncate(rank);
            open.sort_unstable();
            open
        } else {
            next_cols
        };
    }
    let best = s
        .trace
        .iter()
        .fold(None::<&TraceEntry>, |acc, t| match acc {
            Some(b) if b.value >= t.value => Some(b),
            _ => Some(t),
        })
        .cloned();
    let (best_point, best_index, best_value) = match best {
        Some(b) => ((b.o, b.r), (b.i, b.j), b.value),
        None => (grid.point(0, 0), (0, 0), f64::NEG_INFINITY),
    };
    OptResult {
        best_point,
        best_index,
        best_value,
        evaluations_used: s.trace.len(),
        trace: s.trace,
        rank_deficient: s.rank_deficient,
        error: s.error,
    }
}
