use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::EmpiricalRow;
use crate::{Error, Result};

pub const DEFAULT_DEGREE: usize = 3;
pub const MAX_DEGREE: usize = 6;
/// Lower bound on the per-row standard deviation used for weights, in rounds.
pub const SIGMA_FLOOR: f64 = 0.5;
/// Smallest duration a model can report, in rounds.
pub const D_FLOOR: f64 = 1.0;
/// Normal draws per row in resampling mode.
pub const DEFAULT_RESAMPLES: usize = 20;

const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Weighted least squares on the row means, weights `1 / max(sd, SIGMA_FLOOR)^2`.
    DeterministicWls,
    /// Ordinary least squares on `samples_per_row` normal draws per row.
    StochasticResample { seed: u64, samples_per_row: usize },
}

/// Expected rounds to convergence as a polynomial in the participant count,
/// clamped to `[D_FLOOR, d_cap]` over the domain `k in [0, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationModel {
    coefficients: Vec<f64>,
    n: usize,
    d_cap: f64,
    fit_mode: Option<FitMode>,
}

impl DurationModel {
    /// Model from ascending-power coefficients in `k`.
    pub fn from_coefficients(coefficients: Vec<f64>, n: usize, d_cap: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(
                "duration polynomial needs finite coefficients".into(),
            ));
        }
        if n == 0 {
            return Err(Error::InvalidConfig("duration domain needs N >= 1".into()));
        }
        if !(d_cap >= D_FLOOR) {
            return Err(Error::InvalidConfig(format!(
                "duration cap {d_cap} below floor {D_FLOOR}"
            )));
        }
        Ok(Self {
            coefficients,
            n,
            d_cap,
            fit_mode: None,
        })
    }

    /// Same polynomial with a different cap.
    pub fn with_d_cap(mut self, d_cap: f64) -> Result<Self> {
        if !(d_cap >= D_FLOOR) {
            return Err(Error::InvalidConfig(format!(
                "duration cap {d_cap} below floor {D_FLOOR}"
            )));
        }
        self.d_cap = d_cap;
        Ok(self)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Upper end of the `k` domain.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_floor(&self) -> f64 {
        D_FLOOR
    }

    pub fn d_cap(&self) -> f64 {
        self.d_cap
    }

    pub fn fit_mode(&self) -> Option<FitMode> {
        self.fit_mode
    }

    /// Unclamped polynomial value.
    pub fn raw(&self, k: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * k + c)
    }

    /// Clamped duration at `k` participants.
    pub fn eval(&self, k: f64) -> Result<f64> {
        if !(k >= -1e-9 && k <= self.n as f64 + 1e-9) {
            return Err(Error::OutOfDomain { k, max: self.n });
        }
        let v = self.raw(k.clamp(0.0, self.n as f64));
        Ok(if v.is_nan() {
            self.d_cap
        } else {
            v.clamp(D_FLOOR, self.d_cap)
        })
    }

    /// `d(0), d(1), ..., d(n)`.
    pub fn values(&self, n: usize) -> Result<Vec<f64>> {
        (0..=n).map(|k| self.eval(k as f64)).collect()
    }

    /// Fitted minus observed duration at each row's `k = n * p`.
    pub fn residuals(&self, rows: &[EmpiricalRow]) -> Result<Vec<Residual>> {
        rows.iter()
            .map(|r| {
                let k = self.n as f64 * r.p;
                let fitted = self.eval(k)?;
                Ok(Residual {
                    p: r.p,
                    k,
                    observed: r.d_mean,
                    fitted,
                    residual: fitted - r.d_mean,
                    sigma: r.d_std.max(SIGMA_FLOOR),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub p: f64,
    pub k: f64,
    pub observed: f64,
    pub fitted: f64,
    pub residual: f64,
    /// Standard deviation used for weighting (floored).
    pub sigma: f64,
}

/// Fit `d(k)` on the rows with `k = n * p`.
pub fn fit_duration_model(
    rows: &[EmpiricalRow],
    n: usize,
    degree: usize,
    mode: FitMode,
) -> Result<DurationModel> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidDegree(degree));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    if rows.len() < degree + 1 {
        return Err(Error::InsufficientData {
            needed: degree + 1,
            got: rows.len(),
        });
    }

    // (x = k / n = p, y, weight); fitting in p keeps the Vandermonde matrix well scaled.
    let points: Vec<(f64, f64, f64)> = match mode {
        FitMode::DeterministicWls => rows
            .iter()
            .map(|r| (r.p, r.d_mean, r.d_std.max(SIGMA_FLOOR).powi(-2)))
            .collect(),
        FitMode::StochasticResample {
            seed,
            samples_per_row,
        } => {
            if samples_per_row == 0 {
                return Err(Error::InvalidConfig(
                    "resample count must be positive".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::with_capacity(rows.len() * samples_per_row);
            for r in rows {
                let normal = Normal::new(r.d_mean, r.d_std)
                    .map_err(|e| Error::InvalidConfig(format!("row p={}: {e}", r.p)))?;
                for _ in 0..samples_per_row {
                    pts.push((r.p, normal.sample(&mut rng), 1.0));
                }
            }
            pts
        }
    };

    let scaled = weighted_polyfit(&points, degree)?;
    let coefficients = scaled
        .iter()
        .enumerate()
        .map(|(j, a)| a / (n as f64).powi(j as i32))
        .collect();
    let d_max = rows.iter().map(|r| r.d_mean).fold(f64::MIN, f64::max);
    Ok(DurationModel {
        coefficients,
        n,
        d_cap: (2.0 * d_max).max(D_FLOOR),
        fit_mode: Some(mode),
    })
}

/// Weighted least-squares polynomial coefficients, ascending powers.
fn weighted_polyfit(points: &[(f64, f64, f64)], degree: usize) -> Result<Vec<f64>> {
    let cols = degree + 1;
    let design = DMatrix::from_fn(points.len(), cols, |r, c| {
        let (x, _, w) = points[r];
        w.sqrt() * x.powi(c as i32)
    });
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|&(_, y, w)| w.sqrt() * y));
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv <= RANK_TOL * max_sv {
        return Err(Error::RankDeficient);
    }
    let solution = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;
    Ok(solution.iter().copied().collect())
}

/// `energy_wh = slope * rounds + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLinearModel {
    pub slope: f64,
    pub intercept: f64,
}

impl EnergyLinearModel {
    pub fn predict(&self, rounds: f64) -> f64 {
        self.slope * rounds + self.intercept
    }
}

/// Ordinary least squares of `e_mean` on `d_mean`.
pub fn fit_energy_linear(rows: &[EmpiricalRow]) -> Result<EnergyLinearModel> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: rows.len(),
        });
    }
    let n = rows.len() as f64;
    let mean_d = rows.iter().map(|r| r.d_mean).sum::<f64>() / n;
    let mean_e = rows.iter().map(|r| r.e_mean).sum::<f64>() / n;
    let sxx: f64 = rows.iter().map(|r| (r.d_mean - mean_d).powi(2)).sum();
    let sxy: f64 = rows
        .iter()
        .map(|r| (r.d_mean - mean_d) * (r.e_mean - mean_e))
        .sum();
    if sxx <= f64::EPSILON * mean_d.abs().max(1.0) {
        return Err(Error::SingularFit("all rounds values identical".into()));
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::SingularFit(format!(
            "energy slope {slope} is not positive"
        )));
    }
    Ok(EnergyLinearModel {
        slope,
        intercept: mean_e - slope * mean_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirics::{load_empirical_table, TableKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn synthetic(points: &[(f64, f64)]) -> Vec<EmpiricalRow> {
        points
            .iter()
            .map(|&(p, d)| EmpiricalRow {
                p,
                d_mean: d,
                d_std: 1.0,
                e_mean: 17.5 * d,
                e_std: 0.0,
                source: TableKind::Averaged,
            })
            .collect()
    }

    fn paper_model() -> DurationModel {
        fit_duration_model(
            &load_empirical_table(TableKind::Averaged),
            50,
            3,
            FitMode::DeterministicWls,
        )
        .unwrap()
    }

    /// Normal equations solved by Gaussian elimination, independent of the SVD path.
    #[allow(clippy::needless_range_loop)]
    fn normal_equations_fit(rows: &[EmpiricalRow], n: f64, degree: usize) -> Vec<f64> {
        let m = degree + 1;
        let mut a = vec![vec![0.0; m + 1]; m];
        for r in rows {
            let w = r.d_std.max(SIGMA_FLOOR).powi(-2);
            let k = n * r.p;
            for i in 0..m {
                for j in 0..m {
                    a[i][j] += w * k.powi((i + j) as i32);
                }
                a[i][m] += w * k.powi(i as i32) * r.d_mean;
            }
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for row in 0..m {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for c in col..=m {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..m).map(|i| a[i][m] / a[i][i]).collect()
    }

    #[test]
    fn constant_rows_give_constant_model() {
        let rows = synthetic(&[(0.1, 40.0), (0.3, 40.0), (0.6, 40.0)]);
        let dm = fit_duration_model(&rows, 50, 0, FitMode::DeterministicWls).unwrap();
        assert_eq!(dm.degree(), 0);
        for k in [0.0, 7.5, 50.0] {
            assert_abs_diff_eq!(dm.eval(k).unwrap(), 40.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn wls_matches_normal_equations() {
        let rows = load_empirical_table(TableKind::Averaged);
        let dm = paper_model();
        let oracle = normal_equations_fit(&rows, 50.0, 3);
        for (k, want) in [5.0, 12.0, 25.0, 34.5, 45.0]
            .iter()
            .map(|&k| (k, oracle.iter().rev().fold(0.0, |acc, c| acc * k + c)))
        {
            assert_abs_diff_eq!(dm.raw(k), want, epsilon = 1e-6 * want.abs());
        }
    }

    #[test]
    fn paper_fit_neighbourhoods() {
        let dm = paper_model();
        let at_069 = dm.eval(34.5).unwrap();
        assert!((30.0..=45.0).contains(&at_069), "{at_069}");
        let at_05 = dm.eval(25.0).unwrap();
        assert!((35.0..=46.0).contains(&at_05), "{at_05}");
        assert_abs_diff_eq!(dm.d_cap(), 149.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_residuals_within_three_sigma() {
        let rows = load_empirical_table(TableKind::Averaged);
        for r in paper_model().residuals(&rows).unwrap() {
            assert!(r.residual.abs() <= 3.0 * r.sigma, "{r:?}");
        }
    }

    #[test]
    fn resample_is_reproducible() {
        let rows = load_empirical_table(TableKind::Averaged);
        let mode = FitMode::StochasticResample {
            seed: 7,
            samples_per_row: DEFAULT_RESAMPLES,
        };
        let a = fit_duration_model(&rows, 50, 3, mode).unwrap();
        let b = fit_duration_model(&rows, 50, 3, mode).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        let c = fit_duration_model(
            &rows,
            50,
            3,
            FitMode::StochasticResample {
                seed: 8,
                samples_per_row: DEFAULT_RESAMPLES,
            },
        )
        .unwrap();
        assert_ne!(a.coefficients(), c.coefficients());
    }

    #[test]
    fn cap_applies_outside_the_data() {
        // steep quartic: explodes at small k
        let dm = DurationModel::from_coefficients(vec![400.0, -60.0, 1.0], 50, 149.0).unwrap();
        assert_eq!(dm.eval(0.0).unwrap(), 149.0);
        assert_eq!(dm.eval(4.0).unwrap(), 149.0);
        assert_eq!(dm.eval(30.0).unwrap(), 1.0);
    }

    #[test]
    fn fit_errors() {
        let rows = synthetic(&[(0.1, 40.0), (0.3, 41.0)]);
        assert_eq!(
            fit_duration_model(&rows, 50, 2, FitMode::DeterministicWls),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        );
        assert_eq!(
            fit_duration_model(&rows, 50, 7, FitMode::DeterministicWls),
            Err(Error::InvalidDegree(7))
        );
        let repeated = synthetic(&[(0.2, 40.0), (0.2, 41.0), (0.2, 42.0)]);
        assert_eq!(
            fit_duration_model(&repeated, 50, 2, FitMode::DeterministicWls),
            Err(Error::RankDeficient)
        );
    }

    #[test]
    fn eval_domain() {
        let dm = paper_model();
        assert!(matches!(dm.eval(-0.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(dm.eval(50.5), Err(Error::OutOfDomain { .. })));
        assert!(dm.eval(50.0).is_ok());
        assert!(dm.values(51).is_err());
    }

    #[test]
    fn energy_line_exact() {
        let rows = vec![
            EmpiricalRow {
                p: 0.1,
                d_mean: 10.0,
                d_std: 0.0,
                e_mean: 100.0,
                e_std: 0.0,
                source: TableKind::SingleSeed,
            },
            EmpiricalRow {
                p: 0.2,
                d_mean: 20.0,
                d_std: 0.0,
                e_mean: 200.0,
                e_std: 0.0,
                source: TableKind::SingleSeed,
            },
        ];
        let line = fit_energy_linear(&rows).unwrap();
        assert_abs_diff_eq!(line.slope, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(line.intercept, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn energy_line_errors() {
        let row = EmpiricalRow {
            p: 0.1,
            d_mean: 10.0,
            d_std: 0.0,
            e_mean: 100.0,
            e_std: 0.0,
            source: TableKind::SingleSeed,
        };
        assert!(matches!(
            fit_energy_linear(&[row]),
            Err(Error::InsufficientData { .. })
        ));
        let same = vec![
            row,
            EmpiricalRow {
                e_mean: 120.0,
                ..row
            },
        ];
        assert!(matches!(
            fit_energy_linear(&same),
            Err(Error::SingularFit(_))
        ));
    }

    #[test]
    fn energy_line_on_single_seed_table() {
        let rows = load_empirical_table(TableKind::SingleSeed);
        // Independent oracle: Pearson correlation and the ratio of means.
        let n = rows.len() as f64;
        let md = rows.iter().map(|r| r.d_mean).sum::<f64>() / n;
        let me = rows.iter().map(|r| r.e_mean).sum::<f64>() / n;
        let cov: f64 = rows.iter().map(|r| (r.d_mean - md) * (r.e_mean - me)).sum();
        let vd: f64 = rows.iter().map(|r| (r.d_mean - md).powi(2)).sum();
        let ve: f64 = rows.iter().map(|r| (r.e_mean - me).powi(2)).sum();
        let pearson = cov / (vd * ve).sqrt();
        assert!(pearson > 0.9, "{pearson}");

        let line = fit_energy_linear(&rows).unwrap();
        assert_abs_diff_eq!(line.slope, pearson * (ve / vd).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(line.predict(md), me, epsilon = 1e-9);
        let at_32 = line.predict(32.0);
        assert!((at_32 - 612.04).abs() <= 0.15 * 612.04, "{at_32}");
    }

    proptest! {
        #[test]
        fn eval_stays_clamped(
            coefs in prop::collection::vec(-1e3f64..1e3, 1..=5),
            k in 0.0f64..=50.0,
        ) {
            let dm = DurationModel::from_coefficients(coefs, 50, 149.0).unwrap();
            let v = dm.eval(k).unwrap();
            prop_assert!((1.0..=149.0).contains(&v));
        }
    }
}
