use rayon::prelude::*;

use super::search;
use super::solver::{equilibria, reconcile, social_optimum, worst, Landscape};
use super::GameConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFlag {
    /// No equilibrium was found for this cell.
    NoEquilibrium,
    /// Costs are not both positive, so the ratio is meaningless.
    PoaUndefined,
}

impl SweepFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepFlag::NoEquilibrium => "no_equilibrium",
            SweepFlag::PoaUndefined => "poa_undefined",
        }
    }
}

/// One `(c, gamma)` cell. Missing values are `None`, never placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub c: f64,
    pub gamma: f64,
    /// Probability of the worst (highest-cost) equilibrium.
    pub p_ne: Option<f64>,
    pub p_opt: Option<f64>,
    pub u_ne: Option<f64>,
    pub u_opt: Option<f64>,
    pub poa: Option<f64>,
    pub flags: Vec<SweepFlag>,
}

fn cell(landscape: &Landscape, cfg: &GameConfig) -> Result<SweepRow> {
    let opt = social_optimum(landscape, cfg)?;
    let mut row = SweepRow {
        c: cfg.c,
        gamma: cfg.gamma,
        p_ne: None,
        p_opt: Some(opt.p_opt),
        u_ne: None,
        u_opt: Some(opt.utility),
        poa: None,
        flags: Vec::new(),
    };
    let ne_set = match equilibria(landscape, cfg) {
        Ok(set) => set,
        Err(Error::NoEquilibrium) => {
            row.flags.push(SweepFlag::NoEquilibrium);
            row.flags.push(SweepFlag::PoaUndefined);
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let worst = worst(&ne_set).ok_or(Error::NoEquilibrium)?;
    let opt = reconcile(opt, &ne_set);
    row.p_ne = Some(worst.p_star);
    row.u_ne = Some(worst.utility_at_ne);
    row.p_opt = Some(opt.p_opt);
    row.u_opt = Some(opt.utility);
    let (cost_ne, cost_opt) = (-worst.utility_at_ne, -opt.utility);
    if cost_ne > 0.0 && cost_opt > 0.0 {
        row.poa = Some(cost_ne / cost_opt);
    } else {
        row.flags.push(SweepFlag::PoaUndefined);
    }
    Ok(row)
}

/// Equilibrium, optimum and PoA for every `(c, gamma)` pair, `c` major.
///
/// Cells run in parallel; the output order follows the input grids.
pub fn sweep(
    cfg_base: &GameConfig,
    c_values: &[f64],
    gamma_values: &[f64],
) -> Result<Vec<SweepRow>> {
    if c_values.is_empty() || gamma_values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs non-empty c and gamma lists".into(),
        ));
    }
    let landscape = Landscape::new(cfg_base)?;
    let cells: Vec<(f64, f64)> = c_values
        .iter()
        .flat_map(|&c| gamma_values.iter().map(move |&g| (c, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(c, gamma)| cell(&landscape, &cfg_base.with_costs(c, gamma)))
        .collect()
}

/// Incentive weight giving the highest worst-equilibrium participation at
/// cost `at_c`; ties go to the smaller weight.
pub fn best_gamma(cfg_base: &GameConfig, gamma_values: &[f64], at_c: f64) -> Result<f64> {
    if gamma_values.is_empty() {
        return Err(Error::InvalidConfig(
            "best_gamma needs a non-empty list".into(),
        ));
    }
    let landscape = Landscape::new(cfg_base)?;
    let scored: Vec<(f64, Option<f64>)> = gamma_values
        .par_iter()
        .map(|&gamma| {
            let cfg = cfg_base.with_costs(at_c, gamma);
            match equilibria(&landscape, &cfg) {
                Ok(set) => Ok((gamma, worst(&set).map(|e| e.p_star))),
                Err(Error::NoEquilibrium) => Ok((gamma, None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64)> = None;
    for (gamma, p) in scored.into_iter().filter_map(|(g, p)| p.map(|p| (g, p))) {
        best = match best {
            None => Some((gamma, p)),
            Some((bg, bp)) => {
                if search::improves(p, bp) || (!search::improves(bp, p) && gamma < bg) {
                    Some((gamma, p))
                } else {
                    Some((bg, bp))
                }
            }
        };
    }
    best.map(|(g, _)| g).ok_or(Error::NoEquilibrium)
}
