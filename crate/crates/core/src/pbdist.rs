//! Poisson-Binomial distribution of the number of participating nodes.
//!
//! The PMF is evaluated through the discrete Fourier transform of the
//! characteristic function,
//!
//! ```text
//! P[m] = 1/(N+1) * sum_n exp(-i 2 pi n m / (N+1)) * prod_k (p_k (exp(i 2 pi n / (N+1)) - 1) + 1)
//! ```
//!
//! which costs O(N^2) and is exact up to complex round-off.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::empirics::DurationModel;
use crate::{Error, Result};

/// Largest profile accepted by the O(N^2) transform.
pub const MAX_NODES: usize = 10_000;

/// Raw masses in `(-NEGATIVE_MASS_TOL, 0)` are round-off and get clamped.
pub const NEGATIVE_MASS_TOL: f64 = 1e-9;

/// Largest imaginary residue tolerated when taking the real part of a mass.
pub const IMAG_RESIDUE_TOL: f64 = 1e-7;

/// Per-node participation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityProfile {
    probs: Vec<f64>,
}

impl ProbabilityProfile {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if probs.len() > MAX_NODES {
            return Err(Error::ProfileTooLarge(probs.len()));
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidProbability { index, value });
        }
        Ok(Self { probs })
    }

    /// Every node at the same probability `p`.
    pub fn symmetric(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> Result<f64> {
        self.probs.get(i).copied().ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.probs.len(),
        })
    }

    /// Copy of the profile with node `i` moved to probability `p`.
    pub fn with(&self, i: usize, p: f64) -> Result<Self> {
        self.get(i)?;
        let mut probs = self.probs.clone();
        probs[i] = p;
        Self::new(probs)
    }
}

/// Probability mass over the participant count `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    mass: Vec<f64>,
}

impl Pmf {
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(m, w)| m as f64 * w)
            .sum()
    }

    /// `sum_m values[m] * P[m]`; `values` must cover the whole support.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        debug_assert!(values.len() >= self.mass.len());
        self.mass.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// PMF of the number of participants for the whole profile.
pub fn poibin_pmf(profile: &ProbabilityProfile) -> Result<Pmf> {
    pmf_from_probs(profile.probs())
}

/// PMF of the number of participants among all nodes except `i`.
///
/// Evaluated by a direct transform on the reduced profile; the result has
/// length N (support `0..=N-1`).
pub fn poibin_pmf_excluding(profile: &ProbabilityProfile, i: usize) -> Result<Pmf> {
    profile.get(i)?;
    let others: Vec<f64> = profile
        .probs()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &p)| p)
        .collect();
    pmf_from_probs(&others)
}

/// Expected number of rounds, `sum_k d(k) P[m = k]`.
pub fn expected_duration(profile: &ProbabilityProfile, dm: &DurationModel) -> Result<f64> {
    let values = dm.values(profile.len())?;
    Ok(poibin_pmf(profile)?.expectation(&values))
}

/// Partial derivative of [`expected_duration`] with respect to `p_i`.
///
/// The expectation is affine in `p_i`:
/// `E = sum_k Q_k [(1 - p_i) d(k) + p_i d(k+1)]` with `Q` the PMF of the
/// other nodes, so the derivative is `sum_k (d(k+1) - d(k)) Q_k`.
pub fn duration_gradient(
    profile: &ProbabilityProfile,
    i: usize,
    dm: &DurationModel,
) -> Result<f64> {
    let values = dm.values(profile.len())?;
    let others = poibin_pmf_excluding(profile, i)?;
    Ok(forward_difference_expectation(&others, &values))
}

/// `sum_k (values[k+1] - values[k]) * pmf[k]`.
pub(crate) fn forward_difference_expectation(pmf: &Pmf, values: &[f64]) -> f64 {
    pmf.mass()
        .iter()
        .enumerate()
        .map(|(k, q)| (values[k + 1] - values[k]) * q)
        .sum()
}

pub(crate) fn pmf_from_probs(probs: &[f64]) -> Result<Pmf> {
    let n = probs.len();
    if n == 0 {
        return Ok(Pmf { mass: vec![1.0] });
    }
    let size = n + 1;
    let roots: Vec<Complex64> = (0..size)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / size as f64))
        .collect();

    // Characteristic function sampled at the (N+1)-th roots of unity.
    let chi: Vec<Complex64> = roots
        .iter()
        .map(|&z| {
            probs.iter().fold(Complex64::new(1.0, 0.0), |acc, &p| {
                acc * (p * (z - 1.0) + 1.0)
            })
        })
        .collect();

    let mut mass = Vec::with_capacity(size);
    for m in 0..size {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in chi.iter().enumerate() {
            // exp(-i 2 pi j m / size) is the conjugate of root (j*m mod size)
            acc += roots[(j * m) % size].conj() * c;
        }
        acc /= size as f64;
        if acc.im.abs() > IMAG_RESIDUE_TOL {
            return Err(Error::NumericalFailure(format!(
                "imaginary residue {:e} at m = {m}",
                acc.im
            )));
        }
        if acc.re < -NEGATIVE_MASS_TOL {
            return Err(Error::NumericalFailure(format!(
                "negative mass {:e} at m = {m}",
                acc.re
            )));
        }
        mass.push(acc.re.max(0.0));
    }
    let total: f64 = mass.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NumericalFailure(format!("mass sums to {total}")));
    }
    mass.iter_mut().for_each(|w| *w /= total);
    Ok(Pmf { mass })
}
