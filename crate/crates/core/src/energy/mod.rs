//! Energy accounting per node, per round and per run.
//!
//! A participating node trains for `T_train`, uploads once, then idles until
//! the round deadline; a non-participant idles for the whole round. All
//! energies are in joules.

mod airtime;

pub use airtime::{airtime, airtime_breakdown, AirtimeBreakdown, WifiParams, BITS_PER_MB};

use rand::Rng;
use std::iter::Sum;
use std::ops::Add;

use crate::empirics::EmpiricalRow;
use crate::{Error, Result};

pub const JOULES_PER_WH: f64 = 3600.0;

/// Hardware power during training, fitted on the averaged measurement table.
pub const DEFAULT_P_HW: f64 = 176.2;
pub const DEFAULT_P_IDLE: f64 = 96.85;
pub const DEFAULT_P_TX_DBM: f64 = 9.0;
pub const DEFAULT_T_ROUND: f64 = 10.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Distribution of a participant's local training time, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainTime {
    Constant(f64),
    Uniform { min: f64, max: f64 },
}

impl TrainTime {
    pub fn mean(&self) -> f64 {
        match *self {
            TrainTime::Constant(t) => t,
            TrainTime::Uniform { min, max } => 0.5 * (min + max),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TrainTime::Constant(t) => t,
            TrainTime::Uniform { min, max } if min == max => min,
            TrainTime::Uniform { min, max } => rng.random_range(min..=max),
        }
    }

    fn validate(&self, t_round: f64) -> Result<()> {
        let (lo, hi) = match *self {
            TrainTime::Constant(t) => (t, t),
            TrainTime::Uniform { min, max } => (min, max),
        };
        if !(lo > 0.0 && lo <= hi && hi <= t_round) {
            return Err(Error::InvalidConfig(format!(
                "training time range [{lo}, {hi}] must lie in (0, {t_round}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Average hardware power while training, W.
    pub p_hw: f64,
    pub p_idle: f64,
    /// Transmit power, W.
    pub p_tx: f64,
    /// Round deadline, s.
    pub t_round: f64,
    pub t_train: TrainTime,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            p_hw: DEFAULT_P_HW,
            p_idle: DEFAULT_P_IDLE,
            p_tx: dbm_to_watts(DEFAULT_P_TX_DBM),
            t_round: DEFAULT_T_ROUND,
            t_train: TrainTime::Uniform { min: 5.0, max: 9.0 },
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_hw", self.p_hw),
            ("p_idle", self.p_idle),
            ("p_tx", self.p_tx),
            ("t_round", self.t_round),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "energy {name} = {v} must be positive"
                )));
            }
        }
        self.t_train.validate(self.t_round)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub train: f64,
    pub tx: f64,
    pub idle: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(train: f64, tx: f64, idle: f64) -> Self {
        Self {
            train,
            tx,
            idle,
            total: train + tx + idle,
        }
    }
}

impl Add for EnergyBreakdown {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.train + rhs.train,
            self.tx + rhs.tx,
            self.idle + rhs.idle,
        )
    }
}

impl Sum for EnergyBreakdown {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Upload energy, identical for every node and round.
pub fn tx_energy(wifi: &WifiParams, ep: &EnergyParams) -> Result<f64> {
    Ok(ep.p_tx * airtime(wifi)?)
}

/// One node that joined a round, with its training time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participation {
    pub node: usize,
    pub t_train: f64,
}

/// Participants of one round out of `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub n: usize,
    pub participants: Vec<Participation>,
}

/// Energy parameters with the upload energy resolved once.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    params: EnergyParams,
    airtime_s: f64,
    tx_j: f64,
}

impl EnergyModel {
    pub fn new(params: EnergyParams, wifi: &WifiParams) -> Result<Self> {
        params.validate()?;
        let airtime_s = airtime(wifi)?;
        Ok(Self {
            params,
            airtime_s,
            tx_j: params.p_tx * airtime_s,
        })
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn airtime(&self) -> f64 {
        self.airtime_s
    }

    pub fn tx_energy(&self) -> f64 {
        self.tx_j
    }

    /// Energy of a node that sits the round out.
    pub fn idle_round(&self) -> EnergyBreakdown {
        EnergyBreakdown::new(0.0, 0.0, self.params.p_idle * self.params.t_round)
    }

    pub fn node_round_energy(&self, participating: bool, t_train: f64) -> Result<EnergyBreakdown> {
        if !participating {
            return Ok(self.idle_round());
        }
        let ep = &self.params;
        if t_train > ep.t_round {
            return Err(Error::ContributionDiscarded {
                t_train,
                t_round: ep.t_round,
            });
        }
        if !(t_train > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "training time {t_train} must be positive"
            )));
        }
        Ok(EnergyBreakdown::new(
            ep.p_hw * t_train,
            self.tx_j,
            ep.p_idle * (ep.t_round - t_train),
        ))
    }

    /// Sum over participants plus idle energy of everyone else.
    pub fn round_energy(
        &self,
        n: usize,
        participants: &[Participation],
    ) -> Result<EnergyBreakdown> {
        let mut seen = vec![false; n];
        let mut total = EnergyBreakdown::default();
        for part in participants {
            match seen.get_mut(part.node) {
                None => {
                    return Err(Error::IndexOutOfRange {
                        index: part.node,
                        len: n,
                    })
                }
                Some(true) => {
                    return Err(Error::InvalidConfig(format!(
                        "node {} listed twice in one round",
                        part.node
                    )))
                }
                Some(flag) => *flag = true,
            }
            total = total + self.node_round_energy(true, part.t_train)?;
        }
        let idle_nodes = (n - participants.len()) as f64;
        let idle = self.idle_round();
        Ok(total + EnergyBreakdown::new(0.0, 0.0, idle_nodes * idle.idle))
    }

    pub fn run_energy(&self, rounds: &[RoundRecord]) -> Result<EnergyBreakdown> {
        rounds
            .iter()
            .map(|r| self.round_energy(r.n, &r.participants))
            .sum()
    }

    /// Expected energy of `rounds` rounds with `n` nodes each joining with
    /// probability `p`, joules.
    pub fn expected_run_energy(&self, n: usize, p: f64, rounds: f64) -> f64 {
        let ep = &self.params;
        let t = ep.t_train.mean();
        let participant = ep.p_hw * t + self.tx_j + ep.p_idle * (ep.t_round - t);
        let idle = ep.p_idle * ep.t_round;
        rounds * n as f64 * (p * participant + (1.0 - p) * idle)
    }
}

/// Convenience wrapper resolving the airtime for a single call.
pub fn node_round_energy(
    participating: bool,
    ep: &EnergyParams,
    t_train: f64,
    wifi: &WifiParams,
) -> Result<EnergyBreakdown> {
    EnergyModel::new(*ep, wifi)?.node_round_energy(participating, t_train)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub p: f64,
    pub rounds: f64,
    pub observed_wh: f64,
    pub predicted_wh: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: EnergyParams,
    pub rows: Vec<CalibrationRow>,
}

impl Calibration {
    /// Fraction of rows whose relative error is within `tol`.
    pub fn fraction_within(&self, tol: f64) -> f64 {
        let hits = self
            .rows
            .iter()
            .filter(|r| r.rel_error.abs() <= tol)
            .count();
        hits as f64 / self.rows.len() as f64
    }
}

/// Fit `p_hw` so that the expected run energy at each row's `p` and measured
/// round count matches its energy, by least squares.
///
/// The mean training time enters only through `t_train * (p_hw - p_idle)`,
/// so it cannot be fitted jointly with `p_hw` and is kept from `ep0`.
pub fn calibrate_energy_params(
    rows: &[EmpiricalRow],
    ep0: &EnergyParams,
    wifi: &WifiParams,
    n: usize,
) -> Result<Calibration> {
    if rows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let model = EnergyModel::new(*ep0, wifi)?;
    let t = ep0.t_train.mean();
    let nf = n as f64;
    // energy_wh = offset + slope * p_hw per row
    let terms: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let scale = r.d_mean * nf / JOULES_PER_WH;
            let offset = scale * (ep0.p_idle * ep0.t_round + r.p * (model.tx_j - ep0.p_idle * t));
            (offset, scale * r.p * t)
        })
        .collect();
    let sbb: f64 = terms.iter().map(|(_, b)| b * b).sum();
    if !(sbb > 0.0) {
        return Err(Error::InfeasibleCalibration(
            "no row has participating nodes".into(),
        ));
    }
    let sb: f64 = rows
        .iter()
        .zip(&terms)
        .map(|(r, (a, b))| b * (r.e_mean - a))
        .sum();
    let p_hw = sb / sbb;
    if !(p_hw > 0.0 && p_hw.is_finite()) {
        return Err(Error::InfeasibleCalibration(format!(
            "least-squares hardware power {p_hw} W is not positive"
        )));
    }
    let params = EnergyParams { p_hw, ..*ep0 };
    let calibrated = EnergyModel::new(params, wifi)?;
    let rows = rows
        .iter()
        .map(|r| {
            let predicted_wh = calibrated.expected_run_energy(n, r.p, r.d_mean) / JOULES_PER_WH;
            CalibrationRow {
                p: r.p,
                rounds: r.d_mean,
                observed_wh: r.e_mean,
                predicted_wh,
                rel_error: (predicted_wh - r.e_mean) / r.e_mean,
            }
        })
        .collect();
    Ok(Calibration { params, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirics::{load_empirical_table, TableKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> EnergyModel {
        EnergyModel::new(EnergyParams::default(), &WifiParams::default()).unwrap()
    }

    #[test]
    fn dbm_conversion() {
        assert_abs_diff_eq!(dbm_to_watts(9.0), 7.943e-3, epsilon = 1e-6);
        assert_abs_diff_eq!(dbm_to_watts(30.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(watts_to_dbm(dbm_to_watts(9.0)), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn tx_energy_for_one_second() {
        // Pick the payload so the airtime is exactly one second, then compare.
        let wifi = WifiParams::default();
        let ep = EnergyParams::default();
        let t = airtime(&wifi).unwrap();
        assert_abs_diff_eq!(tx_energy(&wifi, &ep).unwrap() / t, 7.943e-3, epsilon = 1e-6);
        let a = tx_energy(&wifi, &ep).unwrap();
        let b = tx_energy(&wifi, &ep).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn zero_payload_energy_is_overhead() {
        let wifi = WifiParams {
            model_size_bits: 0.0,
            ..Default::default()
        };
        let e = tx_energy(&wifi, &EnergyParams::default()).unwrap();
        let overhead = airtime_breakdown(&wifi).unwrap().overhead();
        assert_abs_diff_eq!(e, dbm_to_watts(9.0) * overhead, epsilon = 1e-15);
    }

    #[test]
    fn idle_node() {
        let e = model().node_round_energy(false, 0.0).unwrap();
        assert_eq!(e.idle, 968.5);
        assert_eq!(e.total, 968.5);
        assert_eq!((e.train, e.tx), (0.0, 0.0));
    }

    #[test]
    fn participant_components() {
        let m = model();
        let e = m.node_round_energy(true, 10.0).unwrap();
        assert_eq!(e.idle, 0.0);
        let e = m.node_round_energy(true, 6.5).unwrap();
        assert_eq!(e.train, DEFAULT_P_HW * 6.5);
        assert_eq!(e.tx, m.tx_energy());
        assert_abs_diff_eq!(e.total, e.train + e.tx + e.idle, epsilon = 1e-12);
    }

    #[test]
    fn late_upload_is_discarded() {
        assert!(matches!(
            model().node_round_energy(true, 10.5),
            Err(Error::ContributionDiscarded { .. })
        ));
    }

    #[test]
    fn round_examples() {
        let m = model();
        assert_abs_diff_eq!(
            m.round_energy(7, &[]).unwrap().total,
            7.0 * 968.5,
            epsilon = 1e-9
        );

        let all: Vec<Participation> = (0..4)
            .map(|node| Participation { node, t_train: 7.0 })
            .collect();
        let one = m.node_round_energy(true, 7.0).unwrap();
        assert_abs_diff_eq!(
            m.round_energy(4, &all).unwrap().total,
            4.0 * one.total,
            epsilon = 1e-9
        );

        let e = m
            .round_energy(
                2,
                &[Participation {
                    node: 1,
                    t_train: 5.0,
                }],
            )
            .unwrap();
        let want = 968.5 + (DEFAULT_P_HW * 5.0 + m.tx_energy() + 96.85 * 5.0);
        assert_abs_diff_eq!(e.total, want, epsilon = 1e-9);
    }

    #[test]
    fn round_rejects_bad_participants() {
        let m = model();
        assert!(m
            .round_energy(
                2,
                &[Participation {
                    node: 2,
                    t_train: 5.0
                }]
            )
            .is_err());
        let dup = [
            Participation {
                node: 0,
                t_train: 5.0,
            },
            Participation {
                node: 0,
                t_train: 6.0,
            },
        ];
        assert!(m.round_energy(2, &dup).is_err());
    }

    #[test]
    fn run_examples() {
        let m = model();
        assert_eq!(m.run_energy(&[]).unwrap().total, 0.0);
        let r = RoundRecord {
            n: 3,
            participants: vec![Participation {
                node: 2,
                t_train: 6.0,
            }],
        };
        let single = m.round_energy(3, &r.participants).unwrap().total;
        let five = m.run_energy(&vec![r; 5]).unwrap().total;
        assert_abs_diff_eq!(five, 5.0 * single, epsilon = 1e-9);
    }

    #[test]
    fn all_idle_is_minimal_and_monotone() {
        let m = model();
        let mut last = m.round_energy(10, &[]).unwrap().total;
        for k in 1..=10 {
            let parts: Vec<Participation> = (0..k)
                .map(|node| Participation { node, t_train: 7.0 })
                .collect();
            let e = m.round_energy(10, &parts).unwrap().total;
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn calibration_recovers_synthetic_power() {
        let truth = EnergyParams {
            p_hw: 212.5,
            ..Default::default()
        };
        let wifi = WifiParams::default();
        let m = EnergyModel::new(truth, &wifi).unwrap();
        let rows: Vec<EmpiricalRow> = [(0.1, 70.0), (0.3, 50.0), (0.5, 42.0), (0.7, 38.0)]
            .iter()
            .map(|&(p, d)| EmpiricalRow {
                p,
                d_mean: d,
                d_std: 0.0,
                e_mean: m.expected_run_energy(50, p, d) / JOULES_PER_WH,
                e_std: 0.0,
                source: TableKind::Averaged,
            })
            .collect();
        let cal = calibrate_energy_params(&rows, &EnergyParams::default(), &wifi, 50).unwrap();
        assert!((cal.params.p_hw - 212.5).abs() / 212.5 < 0.01);
        assert!(cal.rows.iter().all(|r| r.rel_error.abs() < 1e-9));
    }

    #[test]
    fn calibration_single_row_exact() {
        let rows = &load_empirical_table(TableKind::Averaged)[21..22];
        let cal =
            calibrate_energy_params(rows, &EnergyParams::default(), &WifiParams::default(), 50)
                .unwrap();
        assert_abs_diff_eq!(cal.rows[0].predicted_wh, rows[0].e_mean, epsilon = 1e-9);
    }

    #[test]
    fn calibration_on_averaged_table() {
        let rows = load_empirical_table(TableKind::Averaged);
        let cal =
            calibrate_energy_params(&rows, &EnergyParams::default(), &WifiParams::default(), 50)
                .unwrap();
        assert!(cal.fraction_within(0.15) >= 0.8, "{:?}", cal.rows);
        // Default hardware power is this fit, rounded.
        assert!(
            (cal.params.p_hw - DEFAULT_P_HW).abs() < 1.0,
            "{}",
            cal.params.p_hw
        );
    }

    #[test]
    fn calibration_infeasible() {
        let row = EmpiricalRow {
            p: 0.5,
            d_mean: 40.0,
            d_std: 0.0,
            e_mean: 1.0,
            e_std: 0.0,
            source: TableKind::Averaged,
        };
        assert!(matches!(
            calibrate_energy_params(&[row], &EnergyParams::default(), &WifiParams::default(), 50),
            Err(Error::InfeasibleCalibration(_))
        ));
        assert!(
            calibrate_energy_params(&[], &EnergyParams::default(), &WifiParams::default(), 50)
                .is_err()
        );
    }

    #[test]
    fn train_time_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dist = TrainTime::Uniform { min: 5.0, max: 9.0 };
        for _ in 0..1000 {
            let t = dist.sample(&mut rng);
            assert!((5.0..=9.0).contains(&t));
        }
        assert_eq!(TrainTime::Constant(4.0).sample(&mut rng), 4.0);
        assert!(EnergyParams {
            t_train: TrainTime::Uniform {
                min: 5.0,
                max: 11.0
            },
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn run_total_is_order_independent(
            parts in prop::collection::vec(prop::collection::btree_set(0usize..6, 0..=6), 0..12),
            t in 0.5f64..10.0,
        ) {
            let m = model();
            let rounds: Vec<RoundRecord> = parts
                .iter()
                .map(|set| RoundRecord { n: 6, participants: set.iter().map(|&node| Participation { node, t_train: t }).collect() })
                .collect();
            let forward = m.run_energy(&rounds).unwrap();
            let mut reversed = rounds.clone();
            reversed.reverse();
            let backward = m.run_energy(&reversed).unwrap();
            prop_assert!((forward.total - backward.total).abs() <= 1e-9 * forward.total.max(1.0));
            prop_assert!(forward.train >= 0.0 && forward.tx >= 0.0 && forward.idle >= 0.0);
            prop_assert!((forward.total - (forward.train + forward.tx + forward.idle)).abs() <= 1e-9 * forward.total.max(1.0));
        }
    }
}
