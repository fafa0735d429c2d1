//! Bridge to an external MILP solver: write LP, run a command, read back a
//! `var value` solution file.
//!
//! Solution-file grammar, one entry per line:
//!
//! ```text
//! # comment
//! <lp-name> <value>
//! ```
//!
//! Variables absent from the file are taken as zero. The returned assignment
//! is re-verified against the model before it is reported as feasible.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::lp_format::{export_lp, lp_names};
use crate::model::MilpModel;
use crate::solve::{MilpSolution, SolveStatus};
use crate::MilpError;

/// Command template; `{lp}` and `{sol}` in `args` are replaced by file paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalSolver {
    pub program: String,
    pub args: Vec<String>,
}

pub fn parse_solution_file(text: &str) -> Result<HashMap<String, f64>, MilpError> {
    let mut out = HashMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(MilpError::Parse {
                line: no + 1,
                message: "expected `name value`".into(),
            });
        };
        let v: f64 = val.parse().map_err(|_| MilpError::Parse {
            line: no + 1,
            message: format!("bad value `{val}`"),
        })?;
        out.insert(name.to_string(), v);
    }
    Ok(out)
}

/// Maps a parsed solution onto model variable order.
pub fn assignment_from_names(
    model: &MilpModel,
    values: &HashMap<String, f64>,
) -> Result<Vec<f64>, MilpError> {
    let names = lp_names(model);
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut out = vec![0.0; model.num_vars()];
    for (n, v) in values {
        let i = index
            .get(n.as_str())
            .ok_or_else(|| MilpError::UnknownVariable(n.clone()))?;
        out[*i] = *v;
    }
    Ok(out)
}

impl ExternalSolver {
    pub fn solve_in(&self, model: &MilpModel, dir: &Path, tol: f64) -> Result<MilpSolution, MilpError> {
        let lp: PathBuf = dir.join("model.lp");
        let sol: PathBuf = dir.join("model.sol");
        std::fs::write(&lp, export_lp(model))?;
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                a.replace("{lp}", &lp.to_string_lossy())
                    .replace("{sol}", &sol.to_string_lossy())
            })
            .collect();
        let status = Command::new(&self.program).args(&args).status()?;
        if !status.success() {
            return Err(MilpError::External(format!("`{}` exited with {status}", self.program)));
        }
        let text = std::fs::read_to_string(&sol)?;
        let values = assignment_from_names(model, &parse_solution_file(&text)?)?;
        if !model.is_feasible(&values, tol) {
            return Err(MilpError::External(format!(
                "external assignment violates the model by {:.3e}",
                model.max_violation(&values)
            )));
        }
        let objective = model.objective_value(&values);
        Ok(MilpSolution {
            status: SolveStatus::Feasible { gap: f64::INFINITY },
            values,
            objective,
            bound: f64::NAN,
            nodes: 0,
        })
    }
}
