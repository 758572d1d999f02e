use std::f64::consts::SQRT_2;

use super::{add_battery, names, ModelError, RenewableFleet, ResProfile, RgParams, TimeGrid};
use crate::program::{BlockId, ConvexProgram, ProgramBuilder, Sense, VarId};
use crate::units;

struct Unit {
    bus: usize,
    active: BlockId,
    reactive: BlockId,
}

/// Renewable generator for week `week`: WT/PV dispatch at each attachment,
/// its battery, the radial network and the two electricity sales.
///
/// Blocks: `sell_hp`, `sell_ra` (100 MW), parameter prices
/// `price_electricity_hp` and `price_electricity_ra` (1e4 CNY per 100 MWh).
pub fn build_rg(
    params: &RgParams,
    profile: &ResProfile,
    grid: &TimeGrid,
    week: usize,
) -> Result<ConvexProgram, ModelError> {
    grid.validate()?;
    params.validate()?;
    profile.validate(grid, params.wt.capacity_mw, params.pv.capacity_mw)?;
    let net = &params.network;
    let tau = grid.intervals_per_week;
    let dt = grid.step_h;
    let range = grid.week_range(week);

    let mut b = ProgramBuilder::new("rg");
    let mut units_at_bus: Vec<Unit> = Vec::new();
    for (kind, fleet, series) in [
        ("wt", &params.wt, &profile.wind_mw[range.clone()]),
        ("pv", &params.pv, &profile.solar_mw[range.clone()]),
    ] {
        add_fleet(&mut b, kind, fleet, series, net, &mut units_at_bus)?;
    }

    let bes = add_battery(&mut b, "bes", &params.bes, tau, dt);
    let bes_bus = net.bus_index(&params.bes_bus)?;
    let sell_hp = b.block(names::RG_SELL_HP, tau, 0.0, f64::INFINITY, "100 MW");
    let sell_ra = b.block(names::RG_SELL_RA, tau, 0.0, f64::INFINITY, "100 MW");
    let price_hp = b.parameter(names::PRICE_E_HP, vec![0.0; tau], "1e4 CNY/100 MWh");
    let price_ra = b.parameter(names::PRICE_E_RA, vec![0.0; tau], "1e4 CNY/100 MWh");
    let (hp_bus, ra_bus) = (
        net.bus_index(&params.hp_bus)?,
        net.bus_index(&params.ra_bus)?,
    );

    let nb = net.buses.len();
    let branch_p = b.block(
        "branch_p",
        net.branches.len() * tau,
        f64::NEG_INFINITY,
        f64::INFINITY,
        "100 MW",
    );
    let branch_q = b.block(
        "branch_q",
        net.branches.len() * tau,
        f64::NEG_INFINITY,
        f64::INFINITY,
        "100 Mvar",
    );
    let vsq = b.block_with_bounds(
        "voltage_sq",
        (0..tau)
            .flat_map(|_| net.buses.iter().map(|bus| bus.vsq_min))
            .collect(),
        (0..tau)
            .flat_map(|_| net.buses.iter().map(|bus| bus.vsq_max))
            .collect(),
        "p.u.",
    );
    let compensated: Vec<usize> = (0..nb)
        .filter(|&i| net.buses[i].var_comp_mvar > 0.0)
        .collect();
    let var_comp = (!compensated.is_empty()).then(|| {
        let hi: Vec<f64> = (0..tau)
            .flat_map(|_| {
                compensated
                    .iter()
                    .map(|&i| units::power(net.buses[i].var_comp_mvar))
            })
            .collect();
        let lo = hi.iter().map(|h| -h).collect();
        b.block_with_bounds("var_comp", lo, hi, "100 Mvar")
    });

    let ends: Vec<(usize, usize)> = net
        .branches
        .iter()
        .map(|br| Ok((net.bus_index(&br.from)?, net.bus_index(&br.to)?)))
        .collect::<Result<_, ModelError>>()?;

    for t in 0..tau {
        let (shp, sra) = (b.var(sell_hp, t), b.var(sell_ra, t));
        b.quadratic(shp, b.var(price_hp, t), -dt);
        b.quadratic(sra, b.var(price_ra, t), -dt);

        let mut p_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nb];
        let mut q_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nb];
        for (k, &(from, to)) in ends.iter().enumerate() {
            let (pf, qf) = (
                b.var(branch_p, t * ends.len() + k),
                b.var(branch_q, t * ends.len() + k),
            );
            p_terms[from].push((pf, 1.0));
            p_terms[to].push((pf, -1.0));
            q_terms[from].push((qf, 1.0));
            q_terms[to].push((qf, -1.0));
            let br = &net.branches[k];
            b.row(
                "rg.voltage_drop",
                &[
                    (b.var(vsq, t * nb + to), 1.0),
                    (b.var(vsq, t * nb + from), -1.0),
                    (pf, 2.0 * br.r_pu),
                    (qf, 2.0 * br.x_pu),
                ],
                Sense::Eq,
                0.0,
            );
        }
        for u in &units_at_bus {
            p_terms[u.bus].push((b.var(u.active, t), -1.0));
            q_terms[u.bus].push((b.var(u.reactive, t), -1.0));
        }
        p_terms[bes_bus].push((b.var(bes.discharge, t), -1.0));
        p_terms[bes_bus].push((b.var(bes.charge, t), 1.0));
        q_terms[bes_bus].push((b.var(bes.reactive, t), -1.0));
        p_terms[hp_bus].push((shp, 1.0));
        p_terms[ra_bus].push((sra, 1.0));
        if let Some(vc) = var_comp {
            for (k, &i) in compensated.iter().enumerate() {
                q_terms[i].push((b.var(vc, t * compensated.len() + k), -1.0));
            }
        }
        for i in 0..nb {
            b.row("rg.bus_p", &p_terms[i], Sense::Eq, 0.0);
            b.row("rg.bus_q", &q_terms[i], Sense::Eq, 0.0);
        }
    }
    Ok(b.build()?)
}

fn add_fleet(
    b: &mut ProgramBuilder,
    kind: &str,
    fleet: &RenewableFleet,
    available_mw: &[f64],
    net: &super::RadialNetwork,
    out: &mut Vec<Unit>,
) -> Result<(), ModelError> {
    for att in &fleet.attachments {
        let rated = units::power(fleet.capacity_mw * att.share);
        let avail: Vec<f64> = available_mw
            .iter()
            .map(|&p| units::power(p * att.share))
            .collect();
        let name = format!("{kind}[{}]", att.bus);
        let active = b.block_with_bounds(&name, vec![0.0; avail.len()], avail, "100 MW");
        let reactive = b.block(
            &format!("{kind}_q[{}]", att.bus),
            available_mw.len(),
            -rated,
            rated,
            "100 Mvar",
        );
        for t in 0..available_mw.len() {
            let (p, q) = (b.var(active, t), b.var(reactive, t));
            let fam = format!("rg.{kind}.apparent");
            b.row(&fam, &[(p, 1.0), (q, 1.0)], Sense::Le, SQRT_2 * rated);
            b.row(&fam, &[(p, 1.0), (q, -1.0)], Sense::Le, SQRT_2 * rated);
        }
        out.push(Unit {
            bus: net.bus_index(&att.bus)?,
            active,
            reactive,
        });
    }
    Ok(())
}
