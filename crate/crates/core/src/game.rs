//! Generalized Nash games over [`ConvexProgram`] players.
//!
//! Each player owns a program. Its parameter blocks are either linked to
//! other players' decisions (summed elementwise) or to a market price, or
//! left as constants. [`Game::solve`] stacks every player's KKT conditions,
//! encodes complementarity with binaries and solves the resulting
//! mixed-integer feasibility problem. Rows that share a coupling identity
//! across players are stated once and carry one multiplier.
//!
//! When the game has an exact potential (symmetric cross terms), the
//! potential QP is solved first and its active set seeds the binaries.

use std::collections::{BTreeMap, HashMap};

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Stopwatch;
use crate::program::{
    encode_complementarity, kkt_residuals, BlockRole, ComplementarityPair, ConvexProgram,
    KktResiduals, MixedIntegerProgram, ProgramBuilder, ProgramError, RowId, Sense, Solution,
    SolveReport, SolveStatus, VarId,
};
use crate::solver::{fixed_assignment_program, solve, solve_mip, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("player `{player}` has no block `{block}`")]
    UnknownBlock { player: String, block: String },
    #[error("block `{player}.{block}` has length {got}, expected {expected}")]
    LengthMismatch {
        player: String,
        block: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown market `{0}`")]
    UnknownMarket(String),
    #[error("player `{0}` links a parameter to its own decisions")]
    SelfLink(String),
    #[error("no equilibrium: {0}")]
    Infeasible(String),
    #[error("solver failed with status {0}")]
    SolverFailure(SolveStatus),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Reference to a block of a named player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRef {
    pub player: String,
    pub block: String,
}

impl BlockRef {
    pub fn new(player: &str, block: &str) -> Self {
        Self {
            player: player.to_string(),
            block: block.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Link {
    /// Elementwise sum of other players' decision blocks.
    Sum(Vec<BlockRef>),
    /// The price of a market.
    Price(String),
}

#[derive(Debug, Clone)]
pub struct Player {
    pub name: String,
    pub program: ConvexProgram,
    pub links: Vec<(String, Link)>,
}

/// Clearing condition `Σ buyers = Σ sellers`; its multiplier is the price.
///
/// With `free_disposal` the market may be oversupplied, in which case the
/// price is zero, and prices are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub name: String,
    pub len: usize,
    pub buyers: Vec<BlockRef>,
    pub sellers: Vec<BlockRef>,
    pub free_disposal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundKind {
    Lower,
    Upper,
    Fixed,
}

#[derive(Debug, Clone)]
struct GlobalRow {
    terms: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
    family: String,
}

/// Potential program with its primal rows and clearing rows.
type Potential = (ConvexProgram, Vec<RowId>, Vec<RowId>);

/// Result of [`Game::solve`].
#[derive(Debug, Clone)]
pub struct GameSolution {
    /// Per player: primal point (parameters filled in) and multipliers.
    pub players: Vec<Solution>,
    pub prices: BTreeMap<String, Vec<f64>>,
    pub residuals: Vec<KktResiduals>,
    pub assignment: Vec<bool>,
    pub nodes: usize,
    pub binaries: usize,
    pub seconds: f64,
    pub hinted: bool,
    /// The stacked system, kept for stability probes.
    mip: MixedIntegerProgram,
    global: Vec<f64>,
}

impl GameSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.max()).fold(0.0, f64::max)
    }

    pub fn global_point(&self) -> &[f64] {
        &self.global
    }
}

pub struct Game {
    players: Vec<Player>,
    markets: Vec<Market>,
    index: HashMap<String, usize>,
    /// Global column of each decision variable, per player.
    column: Vec<Vec<Option<usize>>>,
    n_primal: usize,
    price_offset: BTreeMap<String, usize>,
    n_vars: usize,
}

impl Game {
    pub fn new(players: Vec<Player>, markets: Vec<Market>) -> Result<Self, GameError> {
        let index: HashMap<String, usize> = players
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();
        let mut column = Vec::with_capacity(players.len());
        let mut n = 0;
        for p in &players {
            let mask = p.program.decision_mask();
            column.push(
                mask.iter()
                    .map(|&d| {
                        d.then(|| {
                            n += 1;
                            n - 1
                        })
                    })
                    .collect(),
            );
        }
        let n_primal = n;
        let mut price_offset = BTreeMap::new();
        for m in &markets {
            price_offset.insert(m.name.clone(), n);
            n += m.len;
        }
        let game = Self {
            players,
            markets,
            index,
            column,
            n_primal,
            price_offset,
            n_vars: n,
        };
        game.check_links()?;
        Ok(game)
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    fn player(&self, name: &str) -> Result<usize, GameError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GameError::UnknownPlayer(name.to_string()))
    }

    fn block_range(
        &self,
        r: &BlockRef,
        expected: usize,
    ) -> Result<(usize, std::ops::Range<usize>), GameError> {
        let p = self.player(&r.player)?;
        let range =
            self.players[p]
                .program
                .block_range(&r.block)
                .map_err(|_| GameError::UnknownBlock {
                    player: r.player.clone(),
                    block: r.block.clone(),
                })?;
        if range.len() != expected {
            return Err(GameError::LengthMismatch {
                player: r.player.clone(),
                block: r.block.clone(),
                expected,
                got: range.len(),
            });
        }
        Ok((p, range))
    }

    fn check_links(&self) -> Result<(), GameError> {
        for (pi, p) in self.players.iter().enumerate() {
            for (block, link) in &p.links {
                let len = p
                    .program
                    .block_range(block)
                    .map_err(|_| GameError::UnknownBlock {
                        player: p.name.clone(),
                        block: block.clone(),
                    })?
                    .len();
                match link {
                    Link::Sum(refs) => {
                        for r in refs {
                            let (q, _) = self.block_range(r, len)?;
                            if q == pi {
                                return Err(GameError::SelfLink(p.name.clone()));
                            }
                        }
                    }
                    Link::Price(m) => {
                        let market = self
                            .markets
                            .iter()
                            .find(|x| &x.name == m)
                            .ok_or_else(|| GameError::UnknownMarket(m.clone()))?;
                        if market.len != len {
                            return Err(GameError::LengthMismatch {
                                player: p.name.clone(),
                                block: block.clone(),
                                expected: market.len,
                                got: len,
                            });
                        }
                    }
                }
            }
        }
        for m in &self.markets {
            for r in m.buyers.iter().chain(&m.sellers) {
                self.block_range(r, m.len)?;
            }
        }
        Ok(())
    }

    /// Global column of `player.block[i]`.
    pub fn column_of(&self, player: &str, block: &str, i: usize) -> Result<usize, GameError> {
        let p = self.player(player)?;
        let range =
            self.players[p]
                .program
                .block_range(block)
                .map_err(|_| GameError::UnknownBlock {
                    player: player.to_string(),
                    block: block.to_string(),
                })?;
        self.column[p][range.start + i].ok_or_else(|| GameError::UnknownBlock {
            player: player.to_string(),
            block: block.to_string(),
        })
    }

    pub fn price_column(&self, market: &str, i: usize) -> Result<usize, GameError> {
        self.price_offset
            .get(market)
            .map(|o| o + i)
            .ok_or_else(|| GameError::UnknownMarket(market.to_string()))
    }

    /// Linear expression (global columns) and constant for variable `j` of player `p`.
    fn expression(&self, p: usize, j: usize) -> (Vec<(usize, f64)>, f64) {
        if let Some(c) = self.column[p][j] {
            return (vec![(c, 1.0)], 0.0);
        }
        let prog = &self.players[p].program;
        let blk = prog.block_of(j);
        let start = prog.block_range(&blk.name).expect("own block").start;
        let i = j - start;
        match self.players[p].links.iter().find(|(b, _)| *b == blk.name) {
            Some((_, Link::Sum(refs))) => {
                let terms = refs
                    .iter()
                    .map(|r| {
                        let q = self.index[&r.player];
                        let range = self.players[q]
                            .program
                            .block_range(&r.block)
                            .expect("checked");
                        (
                            self.column[q][range.start + i].expect("decision block"),
                            1.0,
                        )
                    })
                    .collect();
                (terms, 0.0)
            }
            Some((_, Link::Price(m))) => (vec![(self.price_offset[m] + i, 1.0)], 0.0),
            None => (Vec::new(), blk.lower[i]),
        }
    }

    fn is_price_param(&self, p: usize, j: usize) -> bool {
        let prog = &self.players[p].program;
        let name = &prog.block_of(j).name;
        matches!(
            self.players[p].links.iter().find(|(b, _)| b == name),
            Some((_, Link::Price(_)))
        )
    }

    /// Primal rows with parameters substituted; shared coupling ids appear once.
    fn global_rows(&self) -> (Vec<GlobalRow>, Vec<Vec<usize>>) {
        let mut rows = Vec::new();
        let mut row_map = Vec::with_capacity(self.players.len());
        let mut by_id: HashMap<String, usize> = HashMap::new();
        for (p, player) in self.players.iter().enumerate() {
            let prog = &player.program;
            let mut map = Vec::with_capacity(prog.num_rows());
            for row in prog.rows() {
                if let Some(id) = prog.coupling_name(row) {
                    if let Some(&g) = by_id.get(id) {
                        map.push(g);
                        continue;
                    }
                    by_id.insert(id.to_string(), rows.len());
                }
                let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
                let mut rhs = row.rhs;
                for &(j, a) in &row.terms {
                    let (expr, constant) = self.expression(p, j);
                    rhs -= a * constant;
                    for (c, w) in expr {
                        *terms.entry(c).or_insert(0.0) += a * w;
                    }
                }
                map.push(rows.len());
                rows.push(GlobalRow {
                    terms: terms.into_iter().filter(|(_, a)| *a != 0.0).collect(),
                    sense: row.sense,
                    rhs,
                    family: format!("{}.{}", player.name, prog.family(row)),
                });
            }
            row_map.push(map);
        }
        (rows, row_map)
    }

    fn primal_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::NEG_INFINITY; self.n_vars];
        let mut hi = vec![f64::INFINITY; self.n_vars];
        for (p, player) in self.players.iter().enumerate() {
            let (l, h) = (player.program.lower_bounds(), player.program.upper_bounds());
            for (j, c) in self.column[p].iter().enumerate() {
                if let Some(c) = c {
                    lo[*c] = l[j];
                    hi[*c] = h[j];
                }
            }
        }
        for m in self.markets.iter().filter(|m| m.free_disposal) {
            let o = self.price_offset[&m.name];
            lo[o..o + m.len].fill(0.0);
        }
        (lo, hi)
    }

    fn clearing_terms(&self, m: &Market, i: usize) -> Vec<(usize, f64)> {
        let mut terms = Vec::new();
        for (refs, sign) in [(&m.buyers, 1.0), (&m.sellers, -1.0)] {
            for r in refs.iter() {
                let q = self.index[&r.player];
                let range = self.players[q]
                    .program
                    .block_range(&r.block)
                    .expect("checked");
                terms.push((self.column[q][range.start + i].expect("decision"), sign));
            }
        }
        terms
    }

    /// Stacked KKT system as a mixed-integer feasibility program.
    fn kkt_system(&self, options: &SolverOptions) -> Result<KktSystem, GameError> {
        let (rows, row_map) = self.global_rows();
        let (lo, hi) = self.primal_bounds();
        let mut b = ProgramBuilder::new("game.kkt");
        for player in &self.players {
            for blk in player.program.blocks() {
                if blk.role == BlockRole::Decision {
                    b.block_with_bounds(
                        &format!("{}.{}", player.name, blk.name),
                        blk.lower.clone(),
                        blk.upper.clone(),
                        &blk.unit,
                    );
                }
            }
        }
        for m in &self.markets {
            let floor = if m.free_disposal {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            b.block(
                &format!("price.{}", m.name),
                m.len,
                floor,
                f64::INFINITY,
                "price",
            );
        }
        debug_assert_eq!(b.num_vars(), self.n_vars);

        let row_mult_lo: Vec<f64> = rows
            .iter()
            .map(|r| {
                if r.sense == Sense::Eq {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            })
            .collect();
        let n_rows = rows.len();
        let row_mult = (n_rows > 0).then(|| {
            b.block_with_bounds(
                "mult.rows",
                row_mult_lo,
                vec![f64::INFINITY; n_rows],
                "dual",
            )
        });

        let mut bound_entries: Vec<(usize, usize, BoundKind)> = Vec::new();
        for (p, player) in self.players.iter().enumerate() {
            let (l, h) = (player.program.lower_bounds(), player.program.upper_bounds());
            for j in 0..player.program.num_vars() {
                if self.column[p][j].is_none() {
                    continue;
                }
                if l[j] == h[j] {
                    bound_entries.push((p, j, BoundKind::Fixed));
                    continue;
                }
                if l[j].is_finite() {
                    bound_entries.push((p, j, BoundKind::Lower));
                }
                if h[j].is_finite() {
                    bound_entries.push((p, j, BoundKind::Upper));
                }
            }
        }
        let bound_mult = (!bound_entries.is_empty()).then(|| {
            let lo = bound_entries
                .iter()
                .map(|e| {
                    if e.2 == BoundKind::Fixed {
                        f64::NEG_INFINITY
                    } else {
                        0.0
                    }
                })
                .collect();
            b.block_with_bounds(
                "mult.bounds",
                lo,
                vec![f64::INFINITY; bound_entries.len()],
                "dual",
            )
        });

        let mut pairs = Vec::new();
        let default_m = options.default_big_m;
        let slack_m = |terms: &[(usize, f64)], sense: Sense, rhs: f64| -> f64 {
            let (mut amin, mut amax) = (0.0, 0.0);
            for &(c, a) in terms {
                let (l, h) = (lo[c], hi[c]);
                if a > 0.0 {
                    amin += a * l;
                    amax += a * h;
                } else {
                    amin += a * h;
                    amax += a * l;
                }
            }
            let range = match sense {
                Sense::Ge => amax - rhs,
                _ => rhs - amin,
            };
            if range.is_finite() && range > 0.0 {
                range.min(default_m) * 1.01 + 1e-6
            } else {
                default_m
            }
        };

        for (g, row) in rows.iter().enumerate() {
            let terms: Vec<(VarId, f64)> = row.terms.iter().map(|&(c, a)| (VarId(c), a)).collect();
            let id = b.row(&row.family, &terms, row.sense, row.rhs);
            if row.sense != Sense::Eq {
                pairs.push(ComplementarityPair {
                    row: id,
                    multiplier: b.var(row_mult.expect("rows exist"), g),
                    slack_big_m: slack_m(&row.terms, row.sense, row.rhs),
                    multiplier_big_m: default_m,
                    switch: format!("{}#{}", row.family, g),
                });
            }
        }
        for (k, &(p, j, kind)) in bound_entries.iter().enumerate() {
            let c = self.column[p][j].expect("decision");
            let (l, h) = (
                self.players[p].program.lower_bounds()[j],
                self.players[p].program.upper_bounds()[j],
            );
            let (sense, rhs) = match kind {
                BoundKind::Lower => (Sense::Ge, l),
                BoundKind::Upper => (Sense::Le, h),
                BoundKind::Fixed => continue,
            };
            let id = b.row("bound", &[(VarId(c), 1.0)], sense, rhs);
            pairs.push(ComplementarityPair {
                row: id,
                multiplier: b.var(bound_mult.expect("bounds exist"), k),
                slack_big_m: if (h - l).is_finite() {
                    (h - l) * 1.01 + 1e-6
                } else {
                    default_m
                },
                multiplier_big_m: default_m,
                switch: format!(
                    "{}.{}",
                    self.players[p].name,
                    self.players[p].program.var_name(j)
                ),
            });
        }

        // Stationarity of every decision variable.
        let mut bounds_of: HashMap<(usize, usize), Vec<(usize, BoundKind)>> = HashMap::new();
        for (k, &(p, j, kind)) in bound_entries.iter().enumerate() {
            bounds_of.entry((p, j)).or_default().push((k, kind));
        }
        for (p, player) in self.players.iter().enumerate() {
            let prog = &player.program;
            let nv = prog.num_vars();
            let mut stat: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nv];
            let mut constant: Vec<f64> = prog.linear().to_vec();
            let add = |stat: &mut Vec<BTreeMap<usize, f64>>,
                       constant: &mut Vec<f64>,
                       j: usize,
                       k: usize,
                       q: f64| {
                if self.column[p][j].is_none() {
                    return;
                }
                let (expr, c) = self.expression(p, k);
                constant[j] += q * c;
                for (col, w) in expr {
                    *stat[j].entry(col).or_insert(0.0) += q * w;
                }
            };
            for &(i, j, q) in prog.quadratic() {
                add(&mut stat, &mut constant, i, j, q);
                if i != j {
                    add(&mut stat, &mut constant, j, i, q);
                }
            }
            let mult = row_mult
                .map(|m| b.vars(m).collect::<Vec<_>>())
                .unwrap_or_default();
            for (r, row) in prog.rows().iter().enumerate() {
                let sign = if row.sense == Sense::Ge { -1.0 } else { 1.0 };
                let g = row_map[p][r];
                for &(j, a) in &row.terms {
                    if self.column[p][j].is_some() {
                        *stat[j].entry(mult[g].0).or_insert(0.0) += sign * a;
                    }
                }
            }
            for j in 0..nv {
                if self.column[p][j].is_none() {
                    continue;
                }
                if let Some(list) = bounds_of.get(&(p, j)) {
                    for &(k, kind) in list {
                        let v = b.var(bound_mult.expect("bounds exist"), k);
                        let s = if kind == BoundKind::Upper { 1.0 } else { -1.0 };
                        *stat[j].entry(v.0).or_insert(0.0) += s;
                    }
                }
                let terms: Vec<(VarId, f64)> = stat[j]
                    .iter()
                    .filter(|(_, a)| **a != 0.0)
                    .map(|(&c, &a)| (VarId(c), a))
                    .collect();
                b.row(
                    &format!("{}.stationarity", player.name),
                    &terms,
                    Sense::Eq,
                    -constant[j],
                );
            }
        }

        for m in &self.markets {
            let o = self.price_offset[&m.name];
            for i in 0..m.len {
                let raw = self.clearing_terms(m, i);
                let family = format!("clearing.{}", m.name);
                if m.free_disposal {
                    // Σ sellers − Σ buyers ≥ 0 against a nonnegative price.
                    let terms: Vec<(VarId, f64)> =
                        raw.iter().map(|&(c, a)| (VarId(c), -a)).collect();
                    let id = b.row(&family, &terms, Sense::Ge, 0.0);
                    let neg: Vec<(usize, f64)> = raw.iter().map(|&(c, a)| (c, -a)).collect();
                    pairs.push(ComplementarityPair {
                        row: id,
                        multiplier: VarId(o + i),
                        slack_big_m: slack_m(&neg, Sense::Ge, 0.0),
                        multiplier_big_m: default_m,
                        switch: format!("{family}[{i}]"),
                    });
                } else {
                    let terms: Vec<(VarId, f64)> =
                        raw.iter().map(|&(c, a)| (VarId(c), a)).collect();
                    b.row(&family, &terms, Sense::Eq, 0.0);
                }
            }
        }

        let program = b.build()?;
        let mip = encode_complementarity(&pairs, &program)?;
        Ok(KktSystem {
            mip,
            row_map,
            bound_entries,
            row_mult_offset: row_mult.map(|m| program.block_offset(m)),
            bound_mult_offset: bound_mult.map(|m| program.block_offset(m)),
        })
    }

    /// Sum of objectives with each cross-player term counted once and price
    /// payments replaced by clearing rows. `None` when cross terms are not
    /// symmetric.
    fn potential(&self) -> Result<Option<Potential>, GameError> {
        let (rows, _) = self.global_rows();
        let (lo, hi) = self.primal_bounds();
        let mut b = ProgramBuilder::new("game.potential");
        b.block_with_bounds(
            "x",
            lo[..self.n_primal].to_vec(),
            hi[..self.n_primal].to_vec(),
            "",
        );
        let mut cross: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (p, player) in self.players.iter().enumerate() {
            let prog = &player.program;
            for (j, &c) in prog.linear().iter().enumerate() {
                if let Some(col) = self.column[p][j] {
                    b.cost(VarId(col), c);
                }
            }
            for &(i, j, q) in prog.quadratic() {
                let (ci, cj) = (self.column[p][i], self.column[p][j]);
                match (ci, cj) {
                    (Some(a), Some(bb)) => {
                        if a == bb {
                            b.quadratic(VarId(a), VarId(a), 0.5 * q);
                        } else {
                            b.quadratic(VarId(a), VarId(bb), q);
                        }
                    }
                    (Some(own), None) | (None, Some(own)) => {
                        let other = if ci.is_some() { j } else { i };
                        if self.is_price_param(p, other) {
                            continue;
                        }
                        let (expr, constant) = self.expression(p, other);
                        b.cost(VarId(own), q * constant);
                        for (col, w) in expr {
                            *cross.entry((own, col)).or_insert(0.0) += q * w;
                        }
                    }
                    (None, None) => {}
                }
            }
        }
        for (&(a, c), &q) in &cross {
            let back = cross.get(&(c, a)).copied().unwrap_or(f64::NAN);
            if !((q - back).abs() <= 1e-12 * q.abs().max(1.0)) {
                debug!("cross term ({a}, {c}) has no symmetric partner; no potential");
                return Ok(None);
            }
            if a < c {
                b.quadratic(VarId(a), VarId(c), q);
            }
        }
        let mut primal = Vec::with_capacity(rows.len());
        for row in &rows {
            let terms: Vec<(VarId, f64)> = row.terms.iter().map(|&(c, a)| (VarId(c), a)).collect();
            if terms.iter().any(|(v, _)| v.0 >= self.n_primal) {
                // Rows involving prices have no potential counterpart.
                return Ok(None);
            }
            primal.push(b.row(&row.family, &terms, row.sense, row.rhs));
        }
        let mut clearing = Vec::new();
        for m in &self.markets {
            let sense = if m.free_disposal {
                Sense::Le
            } else {
                Sense::Eq
            };
            for i in 0..m.len {
                let terms: Vec<(VarId, f64)> = self
                    .clearing_terms(m, i)
                    .into_iter()
                    .map(|(c, a)| (VarId(c), a))
                    .collect();
                clearing.push(b.row(&format!("clearing.{}", m.name), &terms, sense, 0.0));
            }
        }
        match b.build() {
            Ok(p) => Ok(Some((p, primal, clearing))),
            Err(ProgramError::IndefiniteQuadratic(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Binary hint from the potential QP: a pair is switched on when its
    /// multiplier exceeds its slack.
    fn hint(
        &self,
        sys: &KktSystem,
        options: &SolverOptions,
    ) -> Result<Option<Vec<bool>>, GameError> {
        let Some((pot, primal, clearing)) = self.potential()? else {
            return Ok(None);
        };
        let sol = solve(&pot, options);
        if !sol.status().is_optimal() {
            debug!("potential QP not solved: {}", sol.status());
            return Ok(None);
        }
        let mut point = vec![0.0; sys.mip.program.num_vars()];
        point[..self.n_primal].copy_from_slice(&sol.x);
        let mut k = 0;
        for m in &self.markets {
            let o = self.price_offset[&m.name];
            for i in 0..m.len {
                point[o + i] = sol.dual(clearing[k]);
                k += 1;
            }
        }
        if let Some(o) = sys.row_mult_offset {
            for (g, r) in primal.iter().enumerate() {
                point[o + g] = sol.dual(*r);
            }
        }
        if let Some(o) = sys.bound_mult_offset {
            for (k, &(p, j, kind)) in sys.bound_entries.iter().enumerate() {
                let c = self.column[p][j].expect("decision");
                point[o + k] = match kind {
                    BoundKind::Lower => sol.lower_duals[c],
                    BoundKind::Upper => sol.upper_duals[c],
                    BoundKind::Fixed => sol.lower_duals[c] - sol.upper_duals[c],
                };
            }
        }
        let rows = sys.mip.program.rows();
        Ok(Some(
            sys.mip
                .pairs
                .iter()
                .map(|ps| {
                    let slack = rows[ps.pair.row.0].slack(&point).max(0.0);
                    point[ps.pair.multiplier.0] > slack
                })
                .collect(),
        ))
    }

    /// Solves the stacked KKT system.
    pub fn solve(&self, options: &SolverOptions) -> Result<GameSolution, GameError> {
        let watch = Stopwatch::start();
        let sys = self.kkt_system(options)?;
        let hint = self.hint(&sys, options)?;
        let mip_sol = solve_mip(&sys.mip, options, hint.as_deref());
        match mip_sol.status() {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(GameError::Infeasible(self.attribute(options))),
            s => return Err(GameError::SolverFailure(s)),
        }
        for d in &mip_sol.big_m {
            log::warn!("big-M saturation: {d}");
        }
        let global = mip_sol.solution.x.clone();
        let mut players = Vec::with_capacity(self.players.len());
        let mut residuals = Vec::with_capacity(self.players.len());
        for p in 0..self.players.len() {
            let (prog, sol) = self.player_solution(&sys, p, &global)?;
            residuals.push(kkt_residuals(&prog, &sol)?);
            players.push(sol);
        }
        let prices = self
            .markets
            .iter()
            .map(|m| {
                let o = self.price_offset[&m.name];
                (m.name.clone(), global[o..o + m.len].to_vec())
            })
            .collect();
        Ok(GameSolution {
            players,
            prices,
            residuals,
            assignment: mip_sol.assignment.clone(),
            nodes: mip_sol.nodes,
            binaries: sys.mip.binaries.len(),
            seconds: watch.seconds(),
            hinted: hint.is_some(),
            mip: sys.mip,
            global,
        })
    }

    /// A player's program with linked parameters set from `global`, plus its
    /// primal-dual point.
    fn player_solution(
        &self,
        sys: &KktSystem,
        p: usize,
        global: &[f64],
    ) -> Result<(ConvexProgram, Solution), GameError> {
        let mut prog = self.players[p].program.clone();
        let n = prog.num_vars();
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let (expr, c) = self.expression(p, j);
                c + expr.iter().map(|&(col, w)| w * global[col]).sum::<f64>()
            })
            .collect();
        let names: Vec<String> = self.players[p]
            .links
            .iter()
            .map(|(b, _)| b.clone())
            .collect();
        for name in names {
            let range = prog.block_range(&name)?;
            prog.set_parameter(&name, &x[range])?;
        }
        let row_duals = prog
            .rows()
            .iter()
            .enumerate()
            .map(|(r, _)| {
                sys.row_mult_offset
                    .map_or(0.0, |o| global[o + sys.row_map[p][r]])
            })
            .collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        if let Some(o) = sys.bound_mult_offset {
            for (k, &(q, j, kind)) in sys.bound_entries.iter().enumerate() {
                if q != p {
                    continue;
                }
                let v = global[o + k];
                match kind {
                    BoundKind::Lower => lower[j] = v,
                    BoundKind::Upper => upper[j] = v,
                    BoundKind::Fixed if v >= 0.0 => lower[j] = v,
                    BoundKind::Fixed => upper[j] = -v,
                }
            }
        }
        let objective = prog.objective_value(&x);
        let sol = Solution {
            x,
            row_duals,
            lower_duals: lower,
            upper_duals: upper,
            report: SolveReport {
                status: SolveStatus::Optimal,
                objective,
                iterations: 0,
                seconds: 0.0,
                reduced_accuracy: false,
            },
        };
        Ok((prog, sol))
    }

    /// Names players whose own program is infeasible at default parameters.
    fn attribute(&self, options: &SolverOptions) -> String {
        let bad: Vec<&str> = self
            .players
            .iter()
            .filter(|p| {
                let mut q = p.program.clone();
                q.clear_quadratic();
                q.set_linear_cost(vec![0.0; q.num_vars()]).is_ok()
                    && solve(&q, options).status() == SolveStatus::Infeasible
            })
            .map(|p| p.name.as_str())
            .collect();
        if bad.is_empty() {
            "stacked KKT system infeasible although every player's feasible set is nonempty".into()
        } else {
            format!("infeasible block(s): {}", bad.join(", "))
        }
    }

    /// Minimum and maximum of `Σ coef·global[col]` over all equilibria that
    /// share the solution's complementarity pattern.
    pub fn objective_range(
        &self,
        sol: &GameSolution,
        terms: &[(usize, f64)],
        options: &SolverOptions,
    ) -> Result<(f64, f64), GameError> {
        let mut lp = fixed_assignment_program(&sol.mip, &sol.assignment);
        let mut out = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut c = vec![0.0; lp.num_vars()];
            for &(col, a) in terms {
                c[col] += sign * a;
            }
            lp.set_linear_cost(c)?;
            let s = solve(&lp, options);
            if !s.status().is_optimal() {
                return Err(GameError::SolverFailure(s.status()));
            }
            out[k] = sign * s.objective();
        }
        Ok((out[0], out[1]))
    }
}

struct KktSystem {
    mip: MixedIntegerProgram,
    row_map: Vec<Vec<usize>>,
    bound_entries: Vec<(usize, usize, BoundKind)>,
    row_mult_offset: Option<usize>,
    bound_mult_offset: Option<usize>,
}
