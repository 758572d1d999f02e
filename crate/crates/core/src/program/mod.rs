//! Intermediate representation for linear and convex quadratic programs.
//!
//! A [`ConvexProgram`] is a flat vector of variables grouped into named
//! [`VariableBlock`]s, a linear + quadratic cost `c'x + ½x'Qx + k`, and a list
//! of sparse rows of sense `=`, `≥` or `≤`. Blocks tagged
//! [`BlockRole::Parameter`] hold values owned by someone else (a rival's
//! sales, a market price); they are substituted out before solving and get no
//! stationarity condition in the KKT system.

mod complementarity;
mod kkt;
mod lp_format;
mod solution;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use complementarity::{
    encode_complementarity, BigMDiagnostic, ComplementarityPair, MixedIntegerProgram, PairStatus,
};
pub use kkt::{kkt_residuals, KktResiduals};
pub use lp_format::write_lp_listing;
pub use solution::{Solution, SolveReport, SolveStatus};

/// Index of a variable inside one program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Index of a block inside one program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(pub usize);

/// Index of a row inside one program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockRole {
    Decision,
    Parameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableBlock {
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub unit: String,
    pub role: BlockRole,
}

impl VariableBlock {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Eq => "=",
            Sense::Ge => ">=",
            Sense::Le => "<=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub family: u32,
    /// Index into [`ConvexProgram::coupling_ids`] when the row is shared with
    /// other programs and its dual is a common price.
    pub coupling: Option<u32>,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Signed slack: `a'x - b` for `≥`, `b - a'x` for `≤`, `a'x - b` for `=`.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Ge | Sense::Eq => act - self.rhs,
            Sense::Le => self.rhs - act,
        }
    }

    pub fn scale(&self) -> f64 {
        self.terms.iter().fold(1.0_f64, |m, &(_, a)| m.max(a.abs()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("duplicate block name `{0}`")]
    DuplicateBlock(String),
    #[error("indefinite quadratic term (smallest eigenvalue {0:.3e})")]
    IndefiniteQuadratic(f64),
    #[error("invalid bounds on `{block}[{index}]`: {lower} > {upper}")]
    InvalidBounds {
        block: String,
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("parameter block `{0}` must have equal lower and upper bounds")]
    UnfixedParameter(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("duplicate coupling dual identity `{0}`")]
    DuplicateCoupling(String),
    #[error("empty block `{0}`")]
    EmptyBlock(String),
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
}

/// A validated linear/quadratic program.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    name: String,
    blocks: Vec<VariableBlock>,
    offsets: Vec<usize>,
    linear: Vec<f64>,
    /// Upper-triangular entries `(i, j, q)` of the symmetric Hessian `Q`.
    quadratic: Vec<(usize, usize, f64)>,
    constant: f64,
    rows: Vec<Row>,
    families: Vec<String>,
    coupling_ids: Vec<String>,
}

impl ConvexProgram {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn blocks(&self) -> &[VariableBlock] {
        &self.blocks
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &[(usize, usize, f64)] {
        &self.quadratic
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn family(&self, row: &Row) -> &str {
        &self.families[row.family as usize]
    }

    pub fn coupling_ids(&self) -> &[String] {
        &self.coupling_ids
    }

    pub fn coupling_name(&self, row: &Row) -> Option<&str> {
        row.coupling.map(|c| self.coupling_ids[c as usize].as_str())
    }

    pub fn block_id(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn block(&self, id: BlockId) -> &VariableBlock {
        &self.blocks[id.0]
    }

    pub fn block_offset(&self, id: BlockId) -> usize {
        self.offsets[id.0]
    }

    pub fn var(&self, id: BlockId, i: usize) -> VarId {
        debug_assert!(i < self.blocks[id.0].len());
        VarId(self.offsets[id.0] + i)
    }

    /// Variable range of the named block.
    pub fn block_range(&self, name: &str) -> Result<std::ops::Range<usize>, ProgramError> {
        let id = self
            .block_id(name)
            .ok_or_else(|| ProgramError::UnknownBlock(name.to_string()))?;
        let start = self.offsets[id.0];
        Ok(start..start + self.blocks[id.0].len())
    }

    /// Slice of `x` belonging to the named block.
    pub fn block_values<'a>(&self, name: &str, x: &'a [f64]) -> Result<&'a [f64], ProgramError> {
        Ok(&x[self.block_range(name)?])
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.lower.iter().copied())
            .collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.upper.iter().copied())
            .collect()
    }

    /// Per-variable flag: true for decision variables.
    pub fn decision_mask(&self) -> Vec<bool> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat(b.role == BlockRole::Decision).take(b.len()))
            .collect()
    }

    /// Values of every parameter variable (NaN for decision variables).
    pub fn parameter_values(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let param = b.role == BlockRole::Parameter;
                b.lower
                    .iter()
                    .map(move |&v| if param { v } else { f64::NAN })
            })
            .collect()
    }

    /// Replace the values of a parameter block.
    pub fn set_parameter(&mut self, name: &str, values: &[f64]) -> Result<(), ProgramError> {
        let id = self
            .block_id(name)
            .ok_or_else(|| ProgramError::UnknownBlock(name.to_string()))?;
        let block = &mut self.blocks[id.0];
        if block.role != BlockRole::Parameter {
            return Err(ProgramError::UnfixedParameter(name.to_string()));
        }
        if values.len() != block.len() {
            return Err(ProgramError::DimensionMismatch(format!(
                "parameter `{name}` has {} entries, got {}",
                block.len(),
                values.len()
            )));
        }
        block.lower.copy_from_slice(values);
        block.upper.copy_from_slice(values);
        Ok(())
    }

    /// `c'x + ½x'Qx + k`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|&(i, j, q)| {
                if i == j {
                    0.5 * q * x[i] * x[i]
                } else {
                    q * x[i] * x[j]
                }
            })
            .sum();
        lin + quad + self.constant
    }

    /// `Qx + c`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear.clone();
        for &(i, j, q) in &self.quadratic {
            g[i] += q * x[j];
            if i != j {
                g[j] += q * x[i];
            }
        }
        g
    }

    /// Human-readable name of variable `j`, e.g. `ga.sales[3]`.
    pub fn var_name(&self, j: usize) -> String {
        let b = self.offsets.partition_point(|&o| o <= j) - 1;
        format!("{}[{}]", self.blocks[b].name, j - self.offsets[b])
    }

    pub fn block_of(&self, j: usize) -> &VariableBlock {
        let b = self.offsets.partition_point(|&o| o <= j) - 1;
        &self.blocks[b]
    }

    pub fn row_name(&self, r: usize) -> String {
        format!("{}#{}", self.families[self.rows[r].family as usize], r)
    }

    /// Replaces the linear cost vector, keeping the quadratic part.
    pub fn set_linear_cost(&mut self, linear: Vec<f64>) -> Result<(), ProgramError> {
        if linear.len() != self.num_vars() {
            return Err(ProgramError::DimensionMismatch(format!(
                "cost has {} entries, program has {} variables",
                linear.len(),
                self.num_vars()
            )));
        }
        self.linear = linear;
        Ok(())
    }

    /// Drops the quadratic cost and constant, leaving a pure feasibility or
    /// linear program.
    pub fn clear_quadratic(&mut self) {
        self.quadratic.clear();
        self.constant = 0.0;
    }

    /// Removes quadratic entries that touch a parameter variable, i.e. the
    /// payments priced by someone else.
    pub fn drop_parameter_terms(&mut self) {
        let decision = self.decision_mask();
        self.quadratic
            .retain(|&(i, j, _)| decision[i] && decision[j]);
    }

    pub(crate) fn set_row_sense(&mut self, r: usize, sense: Sense) {
        self.rows[r].sense = sense;
    }

    pub(crate) fn set_var_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        let b = self.offsets.partition_point(|&o| o <= j) - 1;
        let i = j - self.offsets[b];
        self.blocks[b].lower[i] = lower;
        self.blocks[b].upper[i] = upper;
    }

    /// Rebuild through a builder so callers can extend a validated program.
    pub fn to_builder(&self) -> ProgramBuilder {
        let mut b = ProgramBuilder::new(&self.name);
        b.absorb(self, "");
        b
    }
}

/// Incremental constructor for [`ConvexProgram`].
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    name: String,
    blocks: Vec<VariableBlock>,
    offsets: Vec<usize>,
    n: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    constant: f64,
    rows: Vec<Row>,
    families: Vec<String>,
    family_index: HashMap<String, u32>,
    coupling_ids: Vec<String>,
}

impl ProgramBuilder {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Decision block with uniform bounds.
    pub fn block(&mut self, name: &str, len: usize, lower: f64, upper: f64, unit: &str) -> BlockId {
        self.block_with_bounds(name, vec![lower; len], vec![upper; len], unit)
    }

    pub fn block_with_bounds(
        &mut self,
        name: &str,
        lower: Vec<f64>,
        upper: Vec<f64>,
        unit: &str,
    ) -> BlockId {
        self.push_block(VariableBlock {
            name: name.to_string(),
            lower,
            upper,
            unit: unit.to_string(),
            role: BlockRole::Decision,
        })
    }

    /// Parameter block fixed at `values`.
    pub fn parameter(&mut self, name: &str, values: Vec<f64>, unit: &str) -> BlockId {
        self.push_block(VariableBlock {
            name: name.to_string(),
            lower: values.clone(),
            upper: values,
            unit: unit.to_string(),
            role: BlockRole::Parameter,
        })
    }

    fn push_block(&mut self, block: VariableBlock) -> BlockId {
        let id = BlockId(self.blocks.len());
        self.offsets.push(self.n);
        self.n += block.len().max(block.upper.len());
        self.linear.resize(self.n, 0.0);
        self.blocks.push(block);
        id
    }

    pub fn var(&self, id: BlockId, i: usize) -> VarId {
        assert!(
            i < self.blocks[id.0].len(),
            "index {i} out of range for block `{}`",
            self.blocks[id.0].name
        );
        VarId(self.offsets[id.0] + i)
    }

    pub fn vars(&self, id: BlockId) -> impl Iterator<Item = VarId> + '_ {
        let start = self.offsets[id.0];
        (0..self.blocks[id.0].len()).map(move |i| VarId(start + i))
    }

    pub fn block_len(&self, id: BlockId) -> usize {
        self.blocks[id.0].len()
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        let b = self.offsets.partition_point(|&o| o <= v.0) - 1;
        let i = v.0 - self.offsets[b];
        self.blocks[b].lower[i] = lower;
        self.blocks[b].upper[i] = upper;
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        let b = self.offsets.partition_point(|&o| o <= v.0) - 1;
        let i = v.0 - self.offsets[b];
        (self.blocks[b].lower[i], self.blocks[b].upper[i])
    }

    /// Adds `c·x_v` to the objective.
    pub fn cost(&mut self, v: VarId, c: f64) {
        self.linear[v.0] += c;
    }

    /// Adds `coef·x_i·x_j` (or `coef·x_i²` when `i == j`) to the objective.
    pub fn quadratic(&mut self, i: VarId, j: VarId, coef: f64) {
        let (a, b) = if i.0 <= j.0 { (i.0, j.0) } else { (j.0, i.0) };
        let q = if a == b { 2.0 * coef } else { coef };
        *self.quadratic.entry((a, b)).or_insert(0.0) += q;
    }

    pub fn add_constant(&mut self, k: f64) {
        self.constant += k;
    }

    fn family_id(&mut self, family: &str) -> u32 {
        if let Some(&id) = self.family_index.get(family) {
            return id;
        }
        let id = self.families.len() as u32;
        self.families.push(family.to_string());
        self.family_index.insert(family.to_string(), id);
        id
    }

    pub fn row(&mut self, family: &str, terms: &[(VarId, f64)], sense: Sense, rhs: f64) -> RowId {
        let fam = self.family_id(family);
        let id = RowId(self.rows.len());
        self.rows.push(Row {
            terms: terms
                .iter()
                .filter(|(_, a)| *a != 0.0)
                .map(|&(v, a)| (v.0, a))
                .collect(),
            sense,
            rhs,
            family: fam,
            coupling: None,
        });
        id
    }

    /// A row whose dual is shared with other programs under `dual_id`.
    pub fn coupling_row(
        &mut self,
        family: &str,
        dual_id: &str,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> RowId {
        let id = self.row(family, terms, sense, rhs);
        let c = self.coupling_ids.len() as u32;
        self.coupling_ids.push(dual_id.to_string());
        self.rows[id.0].coupling = Some(c);
        id
    }

    /// Copies every block, cost and row of `other` into this builder. Block
    /// names get `prefix` prepended. Returns the variable offset of `other`.
    pub fn absorb(&mut self, other: &ConvexProgram, prefix: &str) -> usize {
        let base = self.n;
        for b in &other.blocks {
            let mut nb = b.clone();
            nb.name = format!("{prefix}{}", b.name);
            self.push_block(nb);
        }
        for (j, &c) in other.linear.iter().enumerate() {
            self.linear[base + j] += c;
        }
        for &(i, j, q) in &other.quadratic {
            *self.quadratic.entry((base + i, base + j)).or_insert(0.0) += q;
        }
        self.constant += other.constant;
        for row in &other.rows {
            let fam = self.family_id(&format!("{prefix}{}", other.families[row.family as usize]));
            let coupling = row.coupling.map(|c| {
                let id = self.coupling_ids.len() as u32;
                self.coupling_ids
                    .push(format!("{prefix}{}", other.coupling_ids[c as usize]));
                id
            });
            self.rows.push(Row {
                terms: row.terms.iter().map(|&(j, a)| (base + j, a)).collect(),
                sense: row.sense,
                rhs: row.rhs,
                family: fam,
                coupling,
            });
        }
        base
    }

    pub fn build(self) -> Result<ConvexProgram, ProgramError> {
        let mut names = HashSet::new();
        for b in &self.blocks {
            if b.is_empty() {
                return Err(ProgramError::EmptyBlock(b.name.clone()));
            }
            if b.lower.len() != b.upper.len() {
                return Err(ProgramError::DimensionMismatch(format!(
                    "block `{}` has {} lower and {} upper bounds",
                    b.name,
                    b.lower.len(),
                    b.upper.len()
                )));
            }
            if !names.insert(b.name.as_str()) {
                return Err(ProgramError::DuplicateBlock(b.name.clone()));
            }
            for (i, (&lo, &hi)) in b.lower.iter().zip(&b.upper).enumerate() {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(ProgramError::InvalidBounds {
                        block: b.name.clone(),
                        index: i,
                        lower: lo,
                        upper: hi,
                    });
                }
                if b.role == BlockRole::Parameter && (lo != hi || !lo.is_finite()) {
                    return Err(ProgramError::UnfixedParameter(b.name.clone()));
                }
            }
        }
        if self.linear.iter().any(|c| !c.is_finite()) || !self.constant.is_finite() {
            return Err(ProgramError::NonFinite("linear cost".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() || row.terms.iter().any(|(_, a)| !a.is_finite()) {
                return Err(ProgramError::NonFinite(format!(
                    "row {} ({})",
                    r, self.families[row.family as usize]
                )));
            }
            if let Some(&(j, _)) = row.terms.iter().find(|(j, _)| *j >= self.n) {
                return Err(ProgramError::DimensionMismatch(format!(
                    "row {r} references variable {j} of {}",
                    self.n
                )));
            }
        }
        let mut seen = HashSet::new();
        for c in &self.coupling_ids {
            if !seen.insert(c.as_str()) {
                return Err(ProgramError::DuplicateCoupling(c.clone()));
            }
        }
        let quadratic: Vec<(usize, usize, f64)> = self
            .quadratic
            .into_iter()
            .filter(|(_, q)| *q != 0.0)
            .map(|((i, j), q)| (i, j, q))
            .collect();
        if quadratic.iter().any(|&(_, _, q)| !q.is_finite()) {
            return Err(ProgramError::NonFinite("quadratic cost".into()));
        }
        let program = ConvexProgram {
            name: self.name,
            blocks: self.blocks,
            offsets: self.offsets,
            linear: self.linear,
            quadratic,
            constant: self.constant,
            rows: self.rows,
            families: self.families,
            coupling_ids: self.coupling_ids,
        };
        check_psd(&program)?;
        Ok(program)
    }
}

/// The Hessian restricted to decision variables must be positive semidefinite.
fn check_psd(p: &ConvexProgram) -> Result<(), ProgramError> {
    let decision = p.decision_mask();
    let mut involved: Vec<usize> = p
        .quadratic
        .iter()
        .filter(|&&(i, j, _)| decision[i] && decision[j])
        .flat_map(|&(i, j, _)| [i, j])
        .collect();
    involved.sort_unstable();
    involved.dedup();
    if involved.is_empty() {
        return Ok(());
    }
    let pos: HashMap<usize, usize> = involved.iter().enumerate().map(|(k, &j)| (j, k)).collect();
    let n = involved.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut scale = 0.0_f64;
    for &(i, j, q) in &p.quadratic {
        if let (Some(&a), Some(&b)) = (pos.get(&i), pos.get(&j)) {
            m[(a, b)] += q;
            if a != b {
                m[(b, a)] += q;
            }
            scale = scale.max(q.abs());
        }
    }
    let min_eig = m.symmetric_eigenvalues().min();
    if min_eig < -1e-10 * scale.max(1.0) {
        return Err(ProgramError::IndefiniteQuadratic(min_eig));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_variable_linear_program() {
        let mut b = ProgramBuilder::new("toy");
        let x = b.block("x", 2, 0.0, f64::INFINITY, "MW");
        for i in 0..2 {
            let v = b.var(x, i);
            b.cost(v, 1.0);
        }
        let p = b.build().unwrap();
        assert_eq!(p.num_vars(), 2);
        assert_eq!(p.objective_value(&[2.0, 3.0]), 5.0);
    }

    #[test]
    fn indefinite_diagonal_is_rejected() {
        let mut b = ProgramBuilder::new("bad");
        let x = b.block("x", 2, f64::NEG_INFINITY, f64::INFINITY, "");
        let (x0, x1) = (b.var(x, 0), b.var(x, 1));
        b.quadratic(x0, x0, 1.0);
        b.quadratic(x1, x1, -1.0);
        let err = b.build().unwrap_err();
        assert!(matches!(err, ProgramError::IndefiniteQuadratic(_)));
        assert!(err.to_string().contains("indefinite quadratic term"));
    }

    #[test]
    fn cross_term_with_parameter_does_not_count_towards_convexity() {
        // own² / k + own·rival / k is convex in `own` even though the full
        // 2×2 matrix [[2/k, 1/k], [1/k, 0]] is indefinite.
        let mut b = ProgramBuilder::new("cournot");
        let own = b.block("own", 1, 0.0, f64::INFINITY, "t");
        let rival = b.parameter("rival", vec![5.0], "t");
        let (o, r) = (b.var(own, 0), b.var(rival, 0));
        b.quadratic(o, o, 1.0 / 35.0);
        b.quadratic(o, r, 1.0 / 35.0);
        assert!(b.build().is_ok());
    }

    #[test]
    fn duplicate_block_names_are_rejected() {
        let mut b = ProgramBuilder::new("dup");
        b.block("x", 1, 0.0, 1.0, "");
        b.block("x", 1, 0.0, 1.0, "");
        assert_eq!(
            b.build().unwrap_err(),
            ProgramError::DuplicateBlock("x".into())
        );
    }

    #[test]
    fn crossed_bounds_are_rejected() {
        let mut b = ProgramBuilder::new("bounds");
        b.block("x", 1, 2.0, 1.0, "");
        assert!(matches!(b.build(), Err(ProgramError::InvalidBounds { .. })));
    }

    #[test]
    fn out_of_range_row_is_a_dimension_mismatch() {
        let mut b = ProgramBuilder::new("rows");
        b.block("x", 1, 0.0, 1.0, "");
        b.row("r", &[(VarId(3), 1.0)], Sense::Ge, 0.0);
        assert!(matches!(b.build(), Err(ProgramError::DimensionMismatch(_))));
    }

    #[test]
    fn gradient_matches_quadratic_form() {
        let mut b = ProgramBuilder::new("q");
        let x = b.block("x", 2, f64::NEG_INFINITY, f64::INFINITY, "");
        let (x0, x1) = (b.var(x, 0), b.var(x, 1));
        b.quadratic(x0, x0, 1.5);
        b.quadratic(x0, x1, 0.5);
        b.quadratic(x1, x1, 1.0);
        b.cost(x1, -2.0);
        let p = b.build().unwrap();
        let g = p.gradient(&[1.0, 2.0]);
        // d/dx0 (1.5 x0² + 0.5 x0 x1) = 3 x0 + 0.5 x1
        assert!((g[0] - 4.0).abs() < 1e-12);
        // d/dx1 (0.5 x0 x1 + x1² − 2 x1) = 0.5 x0 + 2 x1 − 2
        assert!((g[1] - (0.5 + 4.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn absorb_prefixes_names_and_shifts_indices() {
        let mut inner = ProgramBuilder::new("inner");
        let y = inner.block("y", 2, 0.0, 1.0, "");
        let (y0, y1) = (inner.var(y, 0), inner.var(y, 1));
        inner.coupling_row("clear", "price", &[(y0, 1.0), (y1, -1.0)], Sense::Eq, 0.0);
        let inner = inner.build().unwrap();

        let mut outer = ProgramBuilder::new("outer");
        outer.block("x", 3, 0.0, 1.0, "");
        let off = outer.absorb(&inner, "sub.");
        let p = outer.build().unwrap();
        assert_eq!(off, 3);
        assert_eq!(p.block_range("sub.y").unwrap(), 3..5);
        assert_eq!(p.rows()[0].terms, vec![(3, 1.0), (4, -1.0)]);
        assert_eq!(p.coupling_name(&p.rows()[0]), Some("sub.price"));
    }
}
