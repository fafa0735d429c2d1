use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::MilpError;

/// Index of a variable inside a [`MilpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    #[serde(alias = "<=")]
    Le,
    #[serde(alias = ">=")]
    Ge,
    #[serde(alias = "=")]
    Eq,
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Comparator::Le => lhs <= rhs + tol,
            Comparator::Ge => lhs >= rhs - tol,
            Comparator::Eq => (lhs - rhs).abs() <= tol,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Comparator,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }
}

/// A mixed-integer linear program with binary and continuous variables.
///
/// Models are immutable once built; use [`ModelBuilder`] or
/// [`MilpModel::build`] to construct one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MilpModel {
    sense: Sense,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
}

impl MilpModel {
    /// Builds a model from a declarative description, resolving names.
    pub fn build(spec: &ModelSpec) -> Result<Self, MilpError> {
        let mut b = ModelBuilder::new(spec.sense);
        for v in &spec.variables {
            match v.kind {
                VarKind::Binary => b.binary(&v.name)?,
                VarKind::Continuous => b.continuous(
                    &v.name,
                    v.lower.unwrap_or(0.0),
                    v.upper.unwrap_or(f64::INFINITY),
                )?,
            };
        }
        for (i, c) in spec.constraints.iter().enumerate() {
            let terms = c
                .terms
                .iter()
                .map(|(n, coef)| Ok((b.lookup(n)?, *coef)))
                .collect::<Result<Vec<_>, MilpError>>()?;
            let name = c.name.clone().unwrap_or_else(|| format!("c{i}"));
            b.constraint(name, terms, c.cmp, c.rhs);
        }
        for (n, coef) in &spec.objective {
            let id = b.lookup(n)?;
            b.objective(id, *coef);
        }
        Ok(b.finish())
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest violation of any bound, integrality requirement or constraint.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind == VarKind::Binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            let lhs = c.activity(values);
            let viol = match c.cmp {
                Comparator::Le => lhs - c.rhs,
                Comparator::Ge => c.rhs - lhs,
                Comparator::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        values.len() == self.variables.len() && self.max_violation(values) <= tol
    }
}

/// Incremental constructor for [`MilpModel`].
#[derive(Debug, Default)]
pub struct ModelBuilder {
    model: MilpModel,
    names: HashMap<String, VarId>,
}

impl ModelBuilder {
    pub fn new(sense: Sense) -> Self {
        Self {
            model: MilpModel {
                sense,
                ..MilpModel::default()
            },
            names: HashMap::new(),
        }
    }

    fn push(&mut self, var: Variable) -> Result<VarId, MilpError> {
        if self.names.contains_key(&var.name) {
            return Err(MilpError::DuplicateVariable(var.name));
        }
        if var.lower.is_nan() || var.upper.is_nan() || var.lower > var.upper {
            return Err(MilpError::InvalidBounds {
                name: var.name,
                lower: var.lower,
                upper: var.upper,
            });
        }
        let id = VarId(self.model.variables.len());
        self.names.insert(var.name.clone(), id);
        self.model.variables.push(var);
        Ok(id)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<VarId, MilpError> {
        self.push(Variable {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        })
    }

    pub fn continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, MilpError> {
        self.push(Variable {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
        })
    }

    pub fn lookup(&self, name: &str) -> Result<VarId, MilpError> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| MilpError::UnknownVariable(name.to_string()))
    }

    /// Adds a constraint. Repeated variables in `terms` are merged.
    pub fn constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        cmp: Comparator,
        rhs: f64,
    ) -> usize {
        let terms = merge_terms(terms);
        debug_assert!(terms.iter().all(|(v, _)| v.0 < self.model.variables.len()));
        self.model.constraints.push(Constraint {
            name: name.into(),
            terms,
            cmp,
            rhs,
        });
        self.model.constraints.len() - 1
    }

    /// Adds `coef` to the objective coefficient of `var`.
    pub fn objective(&mut self, var: VarId, coef: f64) {
        self.model.objective.push((var, coef));
    }

    pub fn num_vars(&self) -> usize {
        self.model.variables.len()
    }

    pub fn finish(mut self) -> MilpModel {
        let mut obj = merge_terms(std::mem::take(&mut self.model.objective));
        obj.retain(|t| t.1 != 0.0);
        obj.sort_by_key(|t| t.0);
        self.model.objective = obj;
        self.model
    }
}

fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = terms.into_iter().collect();
    out.sort_by_key(|t| t.0);
    out.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    out.retain(|t| t.1 != 0.0);
    out
}

/// Declarative, name-based model description (e.g. deserialized from JSON).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub sense: Sense,
    #[serde(default)]
    pub variables: Vec<VarSpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub objective: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    pub kind: VarKind,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub terms: Vec<(String, f64)>,
    pub cmp: Comparator,
    pub rhs: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, kind: VarKind) -> VarSpec {
        VarSpec {
            name: name.into(),
            kind,
            lower: None,
            upper: None,
        }
    }

    #[test]
    fn empty_spec_builds_empty_model() {
        let m = MilpModel::build(&ModelSpec::default()).unwrap();
        assert_eq!(m.num_vars(), 0);
        assert_eq!(m.num_constraints(), 0);
    }

    #[test]
    fn duplicate_variable_is_rejected() {
        let spec = ModelSpec {
            variables: vec![var("x", VarKind::Binary), var("x", VarKind::Continuous)],
            ..Default::default()
        };
        assert!(matches!(
            MilpModel::build(&spec),
            Err(MilpError::DuplicateVariable(n)) if n == "x"
        ));
    }

    #[test]
    fn unknown_reference_is_rejected() {
        let spec = ModelSpec {
            variables: vec![var("x", VarKind::Binary)],
            constraints: vec![ConstraintSpec {
                name: None,
                terms: vec![("y".into(), 1.0)],
                cmp: Comparator::Le,
                rhs: 1.0,
            }],
            ..Default::default()
        };
        assert!(matches!(
            MilpModel::build(&spec),
            Err(MilpError::UnknownVariable(n)) if n == "y"
        ));
    }

    #[test]
    fn knapsack_spec_has_two_binaries_one_row() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{
                "sense": "maximize",
                "variables": [{"name": "a", "kind": "binary"}, {"name": "b", "kind": "binary"}],
                "constraints": [{"terms": [["a", 5.0], ["b", 4.0]], "cmp": "le", "rhs": 8.0}],
                "objective": [["a", 6.0], ["b", 10.0]]
            }"#,
        )
        .unwrap();
        let m = MilpModel::build(&spec).unwrap();
        assert_eq!(m.num_binaries(), 2);
        assert_eq!(m.num_constraints(), 1);
        assert_eq!(m.variable(VarId(0)).upper, 1.0);
    }

    #[test]
    fn repeated_terms_merge() {
        let mut b = ModelBuilder::new(Sense::Maximize);
        let x = b.continuous("x", 0.0, 1.0).unwrap();
        b.constraint("c", [(x, 1.0), (x, 2.0)], Comparator::Le, 3.0);
        let m = b.finish();
        assert_eq!(m.constraints()[0].terms, vec![(x, 3.0)]);
    }
}
