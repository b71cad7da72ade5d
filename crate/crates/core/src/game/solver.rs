use super::search;
use super::{incentive, incentive_slope, GameConfig, ResponseCurve};
use crate::pbdist::pmf_from_probs;
use crate::{Error, Result};

/// Where an equilibrium sits in the strategy interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Interior,
    BoundaryZero,
    BoundaryOne,
}

impl EquilibriumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumKind::Interior => "interior",
            EquilibriumKind::BoundaryZero => "boundary_zero",
            EquilibriumKind::BoundaryOne => "boundary_one",
        }
    }
}

/// A symmetric Nash equilibrium: every node plays `p_star`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumResult {
    pub p_star: f64,
    pub utility_at_ne: f64,
    /// Marginal utility at `p_star`.
    pub residual: f64,
    pub kind: EquilibriumKind,
}

impl EquilibriumResult {
    pub fn cost(&self) -> f64 {
        -self.utility_at_ne
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialOptimum {
    pub p_opt: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoAReport {
    pub cost_worst_ne: f64,
    pub cost_optimum: f64,
    pub poa: f64,
    pub ne_set: Vec<EquilibriumResult>,
    pub p_opt: f64,
    /// Probability of the highest-cost equilibrium.
    pub p_worst_ne: f64,
}

/// Duration functionals of symmetric profiles, tabulated on the solver grid.
///
/// Depends only on `(N, d, grid_points)`, so one landscape serves every
/// `(c, gamma)` pair of a sweep.
pub(crate) struct Landscape {
    n: usize,
    values: Vec<f64>,
    ps: Vec<f64>,
    expected: Vec<f64>,
    curves: Vec<ResponseCurve>,
}

impl Landscape {
    pub(crate) fn new(cfg: &GameConfig) -> Result<Self> {
        cfg.validate()?;
        let values = cfg.dm.values(cfg.n)?;
        let ps = search::grid(0.0, 1.0, cfg.grid_points);
        let mut expected = Vec::with_capacity(ps.len());
        let mut curves = Vec::with_capacity(ps.len());
        for &p in &ps {
            expected.push(Self::expected_for(cfg.n, &values, p)?);
            curves.push(Self::curve_for(cfg.n, &values, p)?);
        }
        Ok(Self {
            n: cfg.n,
            values,
            ps,
            expected,
            curves,
        })
    }

    fn expected_for(n: usize, values: &[f64], p: f64) -> Result<f64> {
        Ok(pmf_from_probs(&vec![p; n])?.expectation(values))
    }

    fn curve_for(n: usize, values: &[f64], p: f64) -> Result<ResponseCurve> {
        Ok(ResponseCurve::new(
            &pmf_from_probs(&vec![p; n - 1])?,
            values,
        ))
    }

    fn expected(&self, p: f64) -> f64 {
        Self::expected_for(self.n, &self.values, p).unwrap_or(f64::NAN)
    }

    /// Response curve of one node when all others play `p`.
    fn curve(&self, p: f64) -> Result<ResponseCurve> {
        Self::curve_for(self.n, &self.values, p)
    }

    fn spacing(&self) -> f64 {
        1.0 / (self.ps.len() - 1) as f64
    }
}

/// Symmetric utility when every node plays `p`.
pub fn symmetric_utility(p: f64, cfg: &GameConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.gamma > 0.0 && p == 0.0 {
        return Err(Error::Domain(
            "p = 0 is outside the strategy set when gamma > 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let values = cfg.dm.values(cfg.n)?;
    let e = Landscape::expected_for(cfg.n, &values, p)?;
    Ok(-e + incentive(p, cfg.gamma, cfg.p_min) - cfg.c * p)
}

/// All symmetric Nash equilibria, sorted by `p`.
///
/// Candidates are sign changes of the marginal utility along the symmetric
/// diagonal (refined by bisection), plus `p = 1` and, without an incentive,
/// `p = 0`. A candidate is kept only if playing it is a global best response
/// to everyone else playing it.
pub fn solve_symmetric_ne(cfg: &GameConfig) -> Result<Vec<EquilibriumResult>> {
    let landscape = Landscape::new(cfg)?;
    equilibria(&landscape, cfg)
}

pub(crate) fn equilibria(l: &Landscape, cfg: &GameConfig) -> Result<Vec<EquilibriumResult>> {
    cfg.validate()?;
    let marginal_with = |curve: &ResponseCurve, p: f64| {
        -curve.duration_slope() + incentive_slope(p, cfg.gamma, cfg.p_min) - cfg.c
    };
    let marginal = |p: f64| {
        l.curve(p)
            .map(|curve| marginal_with(&curve, p))
            .unwrap_or(f64::NAN)
    };

    let g = l.ps.len();
    let m: Vec<f64> = (0..g)
        .map(|j| marginal_with(&l.curves[j], l.ps[j]))
        .collect();

    let mut candidates = Vec::new();
    if cfg.gamma == 0.0 {
        candidates.push(0.0);
    }
    for j in 1..g - 1 {
        if m[j] == 0.0 {
            // Isolated exact zeros only: a flat run means every point ties,
            // which the boundary candidates already represent.
            if m[j - 1] != 0.0 && m[j + 1] != 0.0 {
                candidates.push(l.ps[j]);
            }
            continue;
        }
        let next = m[j + 1];
        if j + 1 < g - 1 && next != 0.0 && (m[j] < 0.0) != (next < 0.0) {
            candidates.push(search::bisect(
                l.ps[j],
                l.ps[j + 1],
                cfg.refine_tol,
                marginal,
            ));
        }
    }
    candidates.push(1.0);

    let match_window = 10.0 * l.spacing();
    let mut found: Vec<EquilibriumResult> = Vec::new();
    for p in candidates {
        let curve = l.curve(p)?;
        let own = curve.utility(p, cfg);
        let (br, u_br) = curve.best(cfg);
        let tol = 1e-9 * u_br.abs().max(1.0);
        if !(own >= u_br - tol || (br - p).abs() <= match_window) {
            continue;
        }
        if !own.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "utility at p = {p} is {own}"
            )));
        }
        let kind = if p == 0.0 {
            EquilibriumKind::BoundaryZero
        } else if p == 1.0 {
            EquilibriumKind::BoundaryOne
        } else {
            EquilibriumKind::Interior
        };
        if found
            .iter()
            .any(|e| (e.p_star - p).abs() <= 10.0 * cfg.refine_tol)
        {
            continue;
        }
        found.push(EquilibriumResult {
            p_star: p,
            utility_at_ne: own,
            residual: marginal_with(&curve, p),
            kind,
        });
    }
    found.sort_by(|a, b| a.p_star.total_cmp(&b.p_star));
    if found.is_empty() {
        return Err(Error::NoEquilibrium);
    }
    Ok(found)
}

/// Symmetric probability maximizing the common utility.
pub fn solve_social_optimum(cfg: &GameConfig) -> Result<SocialOptimum> {
    let landscape = Landscape::new(cfg)?;
    social_optimum(&landscape, cfg)
}

pub(crate) fn social_optimum(l: &Landscape, cfg: &GameConfig) -> Result<SocialOptimum> {
    cfg.validate()?;
    let objective = |p: f64| -l.expected(p) + incentive(p, cfg.gamma, cfg.p_min) - cfg.c * p;
    let mut xs = l.ps.clone();
    let mut es = l.expected.clone();
    let floor = cfg.strategy_floor();
    if floor > 0.0 {
        xs[0] = floor;
        es[0] = l.expected(floor);
    }
    let ys: Vec<f64> = xs
        .iter()
        .zip(&es)
        .map(|(&p, &e)| -e + incentive(p, cfg.gamma, cfg.p_min) - cfg.c * p)
        .collect();
    let (p_opt, utility) = search::maximize(&xs, &ys, cfg.refine_tol, objective);
    if !utility.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "optimum utility is {utility}"
        )));
    }
    Ok(SocialOptimum { p_opt, utility })
}

/// Worst-equilibrium cost over optimal cost, with `cost = -utility`.
pub fn price_of_anarchy(cfg: &GameConfig) -> Result<PoAReport> {
    let landscape = Landscape::new(cfg)?;
    let ne_set = equilibria(&landscape, cfg)?;
    let opt = social_optimum(&landscape, cfg)?;
    poa_from(ne_set, opt)
}

/// The highest-cost equilibrium; ties go to the smaller `p`.
pub(crate) fn worst(ne_set: &[EquilibriumResult]) -> Option<EquilibriumResult> {
    let mut it = ne_set.iter();
    let mut worst = *it.next()?;
    for e in it {
        if search::improves(e.cost(), worst.cost()) {
            worst = *e;
        }
    }
    Some(worst)
}

/// The optimum is at least as good as any equilibrium; if the search missed
/// that by round-off, the equilibrium point is the better optimizer.
pub(crate) fn reconcile(opt: SocialOptimum, ne_set: &[EquilibriumResult]) -> SocialOptimum {
    ne_set.iter().fold(opt, |best, e| {
        if e.utility_at_ne > best.utility {
            SocialOptimum {
                p_opt: e.p_star,
                utility: e.utility_at_ne,
            }
        } else {
            best
        }
    })
}

pub(crate) fn poa_from(ne_set: Vec<EquilibriumResult>, opt: SocialOptimum) -> Result<PoAReport> {
    let worst = worst(&ne_set).ok_or(Error::NoEquilibrium)?;
    let opt = reconcile(opt, &ne_set);
    let cost_worst_ne = worst.cost();
    let cost_optimum = -opt.utility;
    if !(cost_optimum > 0.0) || !(cost_worst_ne > 0.0) {
        return Err(Error::UndefinedPoa(format!(
            "non-positive cost (equilibrium {cost_worst_ne}, optimum {cost_optimum})"
        )));
    }
    Ok(PoAReport {
        cost_worst_ne,
        cost_optimum,
        poa: cost_worst_ne / cost_optimum,
        ne_set,
        p_opt: opt.p_opt,
        p_worst_ne: worst.p_star,
    })
}
