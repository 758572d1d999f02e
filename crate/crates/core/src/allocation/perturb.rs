use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{allocate_pcam, AllocationInput, AllocationResult};
use crate::equilibrium::{EquilibriumError, EquilibriumResult, Pipeline};
use crate::market::Mechanism;

/// One pinned trading volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub volume_t: f64,
    pub carbon_price_cny_per_t: f64,
    /// Chain revenue including carbon sales, CNY.
    pub chain_total_cny: f64,
    /// Member revenues after the proposed allocation, CNY.
    pub member_cny: [f64; 3],
    pub allocation: AllocationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub baseline_cny: [f64; 3],
    /// Rows sorted by volume; failures carry their message.
    pub rows: Vec<Result<PerturbationRow, String>>,
}

impl PerturbationReport {
    fn column(&self, f: impl Fn(&PerturbationRow) -> f64) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.as_ref().ok().map(&f)).collect()
    }

    /// Whether chain total, RG, HP and RA revenues are each nondecreasing in
    /// volume, allowing `rel_tol` relative slack. `None` when a row failed.
    pub fn nondecreasing(&self, rel_tol: f64) -> Option<[bool; 4]> {
        let cols = [
            self.column(|r| r.chain_total_cny)?,
            self.column(|r| r.member_cny[0])?,
            self.column(|r| r.member_cny[1])?,
            self.column(|r| r.member_cny[2])?,
        ];
        Some(cols.map(|c| {
            c.windows(2)
                .all(|w| w[1] >= w[0] - rel_tol * w[0].abs().max(1.0))
        }))
    }
}

/// Re-solves the market with the chain's allowance sales pinned at each
/// volume and allocates the carbon revenue by the proposed scheme against
/// the no-trading baseline.
pub fn perturb_ir(
    pipeline: &Pipeline,
    volumes_t: &[f64],
) -> Result<PerturbationReport, EquilibriumError> {
    let baseline = pipeline.run(Mechanism::CapOnly)?.revenues.members();
    let mut volumes = volumes_t.to_vec();
    volumes.sort_by(f64::total_cmp);
    let options = pipeline.scenario().solver.clone();
    let rows = volumes
        .par_iter()
        .map(|&v| {
            let result = pipeline
                .run(Mechanism::Pinned { volume_t: v })
                .map_err(|e| format!("volume {v} t: {e}"))?;
            row(&result, v, baseline, &options).map_err(|e| format!("volume {v} t: {e}"))
        })
        .collect();
    Ok(PerturbationReport {
        baseline_cny: baseline,
        rows,
    })
}

fn row(
    result: &EquilibriumResult,
    volume_t: f64,
    baseline: [f64; 3],
    options: &crate::solver::SolverOptions,
) -> Result<PerturbationRow, super::AllocationError> {
    let input = AllocationInput {
        traded_t: result.outer.traded_t,
        carbon_price_cny_per_t: result.outer.carbon_price_cny_per_t,
        baseline_cny: baseline,
        revenue_cny: result.revenues.members(),
    };
    let allocation = allocate_pcam(&input, options)?;
    Ok(PerturbationRow {
        volume_t,
        carbon_price_cny_per_t: input.carbon_price_cny_per_t,
        chain_total_cny: result.revenues.chain_total(),
        member_cny: allocation.revenues_cny(&input),
        allocation,
    })
}
