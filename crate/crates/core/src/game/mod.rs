//! The participation game.
//!
//! Each node `i` picks `p_i` and receives
//!
//! ```text
//! u_i = -E[D] - gamma * ln(AoI(p_i)) - c * p_i,    AoI(p) = 1/p - 1/2
//! ```
//!
//! where `E[D]` is the expected number of rounds under the Poisson-Binomial
//! participant count. Because `E[D]` is affine in any single `p_i`, a node's
//! utility against fixed opponents is linear in `p_i` plus the concave
//! incentive term, which makes best responses cheap and exact.

mod search;
mod solver;
mod sweep;

use crate::empirics::DurationModel;
use crate::pbdist::{self, ProbabilityProfile};
use crate::{Error, Result};

pub use solver::{
    price_of_anarchy, solve_social_optimum, solve_symmetric_ne, symmetric_utility, EquilibriumKind,
    EquilibriumResult, PoAReport, SocialOptimum,
};
pub use sweep::{best_gamma, sweep, SweepFlag, SweepRow};

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_REFINE_TOL: f64 = 1e-8;
pub const DEFAULT_P_MIN: f64 = 1e-6;

/// One game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    /// Number of nodes.
    pub n: usize,
    /// Participation cost per unit probability.
    pub c: f64,
    /// Weight of the Age-of-Information incentive.
    pub gamma: f64,
    pub dm: DurationModel,
    pub grid_points: usize,
    pub refine_tol: f64,
    /// Smallest probability fed to the logarithm when `gamma > 0`.
    pub p_min: f64,
}

impl GameConfig {
    pub fn new(n: usize, c: f64, gamma: f64, dm: DurationModel) -> Self {
        Self {
            n,
            c,
            gamma,
            dm,
            grid_points: DEFAULT_GRID_POINTS,
            refine_tol: DEFAULT_REFINE_TOL,
            p_min: DEFAULT_P_MIN,
        }
    }

    pub fn with_costs(&self, c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 {
            return fail("N must be at least 1".into());
        }
        if self.dm.n() < self.n {
            return fail(format!(
                "duration model covers k <= {}, game has N = {}",
                self.dm.n(),
                self.n
            ));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return fail(format!(
                "cost factor c = {} must be finite and >= 0",
                self.c
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return fail(format!(
                "incentive weight gamma = {} must be finite and >= 0",
                self.gamma
            ));
        }
        if self.grid_points < 11 {
            return fail(format!("grid_points = {} must be >= 11", self.grid_points));
        }
        if !(self.refine_tol > 0.0) {
            return fail(format!("refine_tol = {} must be > 0", self.refine_tol));
        }
        if !(self.p_min > 0.0 && self.p_min < 1.0) {
            return fail(format!("p_min = {} must lie in (0, 1)", self.p_min));
        }
        Ok(())
    }

    /// Lowest admissible strategy: `p_min` with an incentive, 0 otherwise.
    pub fn strategy_floor(&self) -> f64 {
        if self.gamma > 0.0 {
            self.p_min
        } else {
            0.0
        }
    }

    fn check_profile(&self, profile: &ProbabilityProfile) -> Result<()> {
        if profile.len() != self.n {
            return Err(Error::InvalidConfig(format!(
                "profile has {} nodes, game has N = {}",
                profile.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Expected Age of Information under per-round participation probability `p`.
pub fn aoi(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("AoI needs p in (0, 1], got {p}")));
    }
    Ok(1.0 / p - 0.5)
}

/// `-gamma * ln(AoI(max(p, p_min)))`, zero when `gamma == 0`.
pub(crate) fn incentive(p: f64, gamma: f64, p_min: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let q = p.max(p_min);
    -gamma * (1.0 / q - 0.5).ln()
}

/// Derivative of [`incentive`]: `2 gamma / (p (2 - p))`.
pub(crate) fn incentive_slope(p: f64, gamma: f64, p_min: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let q = p.max(p_min);
    2.0 * gamma / (q * (2.0 - q))
}

/// Utility of node `i` under `profile`.
pub fn utility(profile: &ProbabilityProfile, i: usize, cfg: &GameConfig) -> Result<f64> {
    cfg.validate()?;
    cfg.check_profile(profile)?;
    let p = profile.get(i)?;
    if cfg.gamma > 0.0 && p == 0.0 {
        return Err(Error::Domain(
            "p = 0 is outside the strategy set when gamma > 0".into(),
        ));
    }
    let duration = pbdist::expected_duration(profile, &cfg.dm)?;
    Ok(-duration + incentive(p, cfg.gamma, cfg.p_min) - cfg.c * p)
}

/// Analytic `du_i / dp_i`.
pub fn marginal_utility(profile: &ProbabilityProfile, i: usize, cfg: &GameConfig) -> Result<f64> {
    cfg.validate()?;
    cfg.check_profile(profile)?;
    let p = profile.get(i)?;
    let grad = pbdist::duration_gradient(profile, i, &cfg.dm)?;
    Ok(-grad + incentive_slope(p, cfg.gamma, cfg.p_min) - cfg.c)
}

/// Node `i`'s utility as a function of its own probability, opponents fixed:
/// `u(p) = -(base + p * slope) + incentive(p) - c p`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResponseCurve {
    base: f64,
    slope: f64,
}

impl ResponseCurve {
    /// From the PMF of the other nodes' participant count and `d(0..=N)`.
    pub(crate) fn new(others: &pbdist::Pmf, values: &[f64]) -> Self {
        Self {
            base: others.expectation(values),
            slope: pbdist::forward_difference_expectation(others, values),
        }
    }

    pub(crate) fn duration_slope(&self) -> f64 {
        self.slope
    }

    pub(crate) fn utility(&self, p: f64, cfg: &GameConfig) -> f64 {
        -(self.base + p * self.slope) + incentive(p, cfg.gamma, cfg.p_min) - cfg.c * p
    }

    /// Grid scan plus golden-section refinement; ties go to the smaller `p`.
    pub(crate) fn best(&self, cfg: &GameConfig) -> (f64, f64) {
        let xs = search::grid(cfg.strategy_floor(), 1.0, cfg.grid_points);
        let ys: Vec<f64> = xs.iter().map(|&p| self.utility(p, cfg)).collect();
        search::maximize(&xs, &ys, cfg.refine_tol, |p| self.utility(p, cfg))
    }
}

/// Utility-maximizing `p_i` against the other entries of `profile`.
pub fn best_response(i: usize, profile: &ProbabilityProfile, cfg: &GameConfig) -> Result<f64> {
    cfg.validate()?;
    cfg.check_profile(profile)?;
    let values = cfg.dm.values(cfg.n)?;
    let others = pbdist::poibin_pmf_excluding(profile, i)?;
    Ok(ResponseCurve::new(&others, &values).best(cfg).0)
}
