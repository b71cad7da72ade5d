//! Seeded Monte-Carlo simulation of the participation process.
//!
//! Every rep draws from its own ChaCha8 stream keyed by `(seed, rep)`, so
//! results do not depend on how reps are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

use crate::empirics::DurationModel;
use crate::energy::{EnergyModel, EnergyParams, WifiParams, JOULES_PER_WH};
use crate::pbdist::ProbabilityProfile;
use crate::{Error, Result};

/// Progress at or above this counts as converged.
const PROGRESS_DONE: f64 = 1.0 - 1e-12;

/// How the number of rounds to convergence is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvergenceMode {
    /// Duration fixed by the participant count of the first round.
    StaticDraw,
    /// Each round with `k` participants contributes `1 / d(k)` of the work.
    #[default]
    Progress,
}

impl ConvergenceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvergenceMode::StaticDraw => "static",
            ConvergenceMode::Progress => "progress",
        }
    }

    /// Human-readable note on the stand-in convergence rule.
    pub fn describe(self) -> &'static str {
        match self {
            ConvergenceMode::StaticDraw => {
                "static: duration d(m) fixed by the first-round participant count m"
            }
            ConvergenceMode::Progress => {
                "progress: each round with k participants adds 1/d(k) toward convergence"
            }
        }
    }
}

impl fmt::Display for ConvergenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConvergenceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "static" | "static_draw" => Ok(ConvergenceMode::StaticDraw),
            "progress" => Ok(ConvergenceMode::Progress),
            other => Err(format!("unknown simulation mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub profile: ProbabilityProfile,
    pub dm: DurationModel,
    pub ep: EnergyParams,
    pub wifi: WifiParams,
    pub mode: ConvergenceMode,
    pub seed: u64,
    pub max_rounds: usize,
    pub reps: usize,
}

impl SimConfig {
    /// Defaults: progress mode, seed 0, one rep, `max_rounds = ceil(10 * d_cap)`.
    pub fn new(profile: ProbabilityProfile, dm: DurationModel) -> Self {
        let max_rounds = default_max_rounds(&dm);
        Self {
            profile,
            dm,
            ep: EnergyParams::default(),
            wifi: WifiParams::default(),
            mode: ConvergenceMode::default(),
            seed: 0,
            max_rounds,
            reps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidConfig("max_rounds must be at least 1".into()));
        }
        if self.profile.len() > self.dm.n() {
            return Err(Error::InvalidConfig(format!(
                "profile has {} nodes but the duration model covers k <= {}",
                self.profile.len(),
                self.dm.n()
            )));
        }
        self.ep.validate()?;
        self.wifi.validate()
    }
}

pub fn default_max_rounds(dm: &DurationModel) -> usize {
    (10.0 * dm.d_cap()).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub rounds: usize,
    /// Joules.
    pub energy_total: f64,
    pub per_node_energy: Vec<f64>,
    pub participants_per_round: Vec<usize>,
    pub truncated: bool,
}

impl SimResult {
    pub fn energy_wh(&self) -> f64 {
        self.energy_total / JOULES_PER_WH
    }
}

/// Single run on stream 0 of `cfg.seed`.
pub fn simulate_run(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let model = EnergyModel::new(cfg.ep, &cfg.wifi)?;
    run_rep(cfg, &model, 0)
}

fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Integer rounds with expectation `d`: floor plus a Bernoulli on the fraction.
fn round_unbiased<R: Rng + ?Sized>(d: f64, rng: &mut R) -> usize {
    let base = d.floor();
    let frac = d - base;
    base as usize + usize::from(frac > 0.0 && rng.random::<f64>() < frac)
}

struct Tally<'a> {
    model: &'a EnergyModel,
    per_node: Vec<f64>,
    counts: Vec<usize>,
}

impl<'a> Tally<'a> {
    /// Play one round: draw participation and training times, book energy.
    fn round<R: Rng + ?Sized>(&mut self, probs: &[f64], rng: &mut R) -> Result<usize> {
        let idle = self.model.idle_round().total;
        let t_train = self.model.params().t_train;
        let mut k = 0;
        for (acc, &p) in self.per_node.iter_mut().zip(probs) {
            if rng.random::<f64>() < p {
                k += 1;
                let t = t_train.sample(rng);
                *acc += self.model.node_round_energy(true, t)?.total;
            } else {
                *acc += idle;
            }
        }
        self.counts.push(k);
        Ok(k)
    }
}

fn run_rep(cfg: &SimConfig, model: &EnergyModel, rep: u64) -> Result<SimResult> {
    let mut rng = rep_rng(cfg.seed, rep);
    let probs = cfg.profile.probs();
    let mut tally = Tally {
        model,
        per_node: vec![0.0; probs.len()],
        counts: Vec::new(),
    };
    let truncated = match cfg.mode {
        ConvergenceMode::StaticDraw => {
            let m = tally.round(probs, &mut rng)?;
            let d = round_unbiased(cfg.dm.eval(m as f64)?, &mut rng).max(1);
            let rounds = d.min(cfg.max_rounds);
            for _ in 1..rounds {
                tally.round(probs, &mut rng)?;
            }
            d > cfg.max_rounds
        }
        ConvergenceMode::Progress => {
            let mut progress = 0.0;
            loop {
                if tally.counts.len() == cfg.max_rounds {
                    break true;
                }
                let k = tally.round(probs, &mut rng)?;
                let d = if k == 0 {
                    cfg.dm.d_cap()
                } else {
                    cfg.dm.eval(k as f64)?
                };
                progress += 1.0 / d;
                if progress >= PROGRESS_DONE {
                    break false;
                }
            }
        }
    };
    Ok(SimResult {
        rounds: tally.counts.len(),
        energy_total: tally.per_node.iter().sum(),
        per_node_energy: tally.per_node,
        participants_per_round: tally.counts,
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSummary {
    pub reps: usize,
    pub completed: usize,
    pub truncation_rate: f64,
    pub mean_rounds: f64,
    pub std_rounds: f64,
    pub mean_energy_wh: f64,
    pub std_energy_wh: f64,
    /// False when every run hit `max_rounds`.
    pub valid: bool,
}

impl SimSummary {
    /// Standard error of the mean round count.
    pub fn se_rounds(&self) -> f64 {
        if self.completed == 0 {
            f64::NAN
        } else {
            self.std_rounds / (self.completed as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub runs: Vec<SimResult>,
    pub summary: SimSummary,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `cfg.reps` independent runs, rep `r` on stream `r`. Statistics are over
/// completed runs only.
pub fn monte_carlo(cfg: &SimConfig) -> Result<MonteCarlo> {
    cfg.validate()?;
    let model = EnergyModel::new(cfg.ep, &cfg.wifi)?;
    let runs = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(cfg, &model, rep))
        .collect::<Result<Vec<_>>>()?;
    let done: Vec<&SimResult> = runs.iter().filter(|r| !r.truncated).collect();
    let rounds: Vec<f64> = done.iter().map(|r| r.rounds as f64).collect();
    let energy: Vec<f64> = done.iter().map(|r| r.energy_wh()).collect();
    let (mean_rounds, std_rounds) = mean_std(&rounds);
    let (mean_energy_wh, std_energy_wh) = mean_std(&energy);
    let summary = SimSummary {
        reps: runs.len(),
        completed: done.len(),
        truncation_rate: (runs.len() - done.len()) as f64 / runs.len() as f64,
        mean_rounds,
        std_rounds,
        mean_energy_wh,
        std_energy_wh,
        valid: !done.is_empty(),
    };
    Ok(MonteCarlo { runs, summary })
}
