//! Per-unit orthogonal scores for the linear welfare families (additive and
//! Atkinson IOp). The treat-arm score combines the identifying conditional
//! mean with an inverse-propensity residual correction; the correction
//! vanishes under the direct method and carries the full weight under plain
//! inverse propensity weighting.

use super::Identification;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::util::mean;

/// Cross-fitted (or oracle) per-unit nuisance values for linear scores.
#[derive(Debug, Clone)]
pub struct LinearNuisances {
    /// gamma(1, X_i), each unit scored by a fit that excludes it.
    pub gamma1: Vec<f64>,
    /// gamma(0, X_i).
    pub gamma0: Vec<f64>,
    /// gamma(D_i, X_i).
    pub gamma_obs: Vec<f64>,
    /// Propensity e(X_i), already clamped to the trimming bounds.
    pub e: Vec<f64>,
    /// Share of raw propensity predictions that hit the clamp.
    pub clamp_share: f64,
}

impl LinearNuisances {
    pub fn from_oracle(gamma1: Vec<f64>, gamma0: Vec<f64>, gamma_obs: Vec<f64>, e: Vec<f64>) -> Self {
        LinearNuisances { gamma1, gamma0, gamma_obs, e, clamp_share: 0.0 }
    }
}

/// Per-unit scores (s1, s0): welfare of a rule pi is the mean of
/// `s1 * pi + s0 * (1 - pi)`.
#[derive(Debug, Clone)]
pub struct LinearScoreSet {
    pub s1: Vec<f64>,
    pub s0: Vec<f64>,
    pub clamped_share: f64,
}

impl LinearScoreSet {
    pub fn n(&self) -> usize {
        self.s1.len()
    }
}

/// Additive-welfare scores. Under DR this is the AIPW form:
/// `s1 = gamma1 + D (Y - gamma1) / e`, `s0 = gamma0 + (1-D)(Y - gamma0)/(1-e)`.
pub fn additive_scores(
    data: &Dataset,
    nuis: &LinearNuisances,
    ident: Identification,
) -> Result<LinearScoreSet> {
    let n = data.n();
    let y = data.outcome();
    let d = data.treatment();
    let mut s1 = Vec::with_capacity(n);
    let mut s0 = Vec::with_capacity(n);
    for i in 0..n {
        let di = d[i] as f64;
        let (e1, e0) = (nuis.e[i], 1.0 - nuis.e[i]);
        match ident {
            Identification::Dm => {
                s1.push(nuis.gamma1[i]);
                s0.push(nuis.gamma0[i]);
            }
            Identification::Ipw => {
                s1.push(di * y[i] / e1);
                s0.push((1.0 - di) * y[i] / e0);
            }
            Identification::Dr => {
                s1.push(nuis.gamma1[i] + di * (y[i] - nuis.gamma1[i]) / e1);
                s0.push(nuis.gamma0[i] + (1.0 - di) * (y[i] - nuis.gamma0[i]) / e0);
            }
        }
    }
    Ok(LinearScoreSet { s1, s0, clamped_share: nuis.clamp_share })
}

/// The Atkinson utility: `v^(1-theta)/(1-theta)` for theta in (0,1), log
/// for theta = 1.
pub fn atkinson_utility(v: f64, theta: f64) -> f64 {
    if theta == 1.0 {
        v.ln()
    } else {
        v.powf(1.0 - theta) / (1.0 - theta)
    }
}

/// Atkinson IOp scores with aversion `theta`. The correction weight is
/// `gamma(D,X)^(-theta)` times the usual inverse-propensity indicator; the
/// conditional-mean predictions are floored at 1e-6 times the mean outcome
/// before the utility and power transforms.
pub fn atkinson_scores(
    data: &Dataset,
    nuis: &LinearNuisances,
    theta: f64,
    ident: Identification,
) -> Result<LinearScoreSet> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Argument(format!("theta must lie in (0, 1], got {theta}")));
    }
    let n = data.n();
    let y = data.outcome();
    let d = data.treatment();
    let y_mean = mean(y);
    if !(y_mean > 0.0) {
        return Err(Error::Numeric(format!(
            "atkinson scores need a positive mean outcome, got {y_mean}"
        )));
    }
    let floor = 1e-6 * y_mean;
    let mut bad_units = Vec::new();
    let clampf = |v: f64, i: usize, bad: &mut Vec<usize>| -> f64 {
        let f = v.max(floor);
        if f <= 0.0 {
            bad.push(i);
        }
        f
    };
    let mut s1 = Vec::with_capacity(n);
    let mut s0 = Vec::with_capacity(n);
    for i in 0..n {
        let di = d[i] as f64;
        let (e1, e0) = (nuis.e[i], 1.0 - nuis.e[i]);
        let g1 = clampf(nuis.gamma1[i], i, &mut bad_units);
        let g0 = clampf(nuis.gamma0[i], i, &mut bad_units);
        let g_obs_floored = clampf(nuis.gamma_obs[i], i, &mut bad_units);
        let u1 = atkinson_utility(g1, theta);
        let u0 = atkinson_utility(g0, theta);
        let weight = g_obs_floored.powf(-theta);
        let resid = y[i] - nuis.gamma_obs[i];
        match ident {
            Identification::Dm => {
                s1.push(u1);
                s0.push(u0);
            }
            Identification::Ipw => {
                s1.push(u1 * di / e1);
                s0.push(u0 * (1.0 - di) / e0);
            }
            Identification::Dr => {
                s1.push(u1 + weight * di * resid / e1);
                s0.push(u0 + weight * (1.0 - di) * resid / e0);
            }
        }
    }
    if !bad_units.is_empty() {
        bad_units.truncate(5);
        return Err(Error::Numeric(format!(
            "gamma predictions non-positive after flooring at units {bad_units:?}"
        )));
    }
    Ok(LinearScoreSet { s1, s0, clamped_share: nuis.clamp_share })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(y: Vec<f64>, d: Vec<u8>) -> Dataset {
        let n = y.len();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Dataset::new(y, d, vec![x], vec!["x1".into()], None, &[]).unwrap()
    }

    #[test]
    fn additive_zero_residual_reduces_to_gamma() {
        // D_i = 1 and Y_i = gamma(1, X_i) exactly.
        let data = toy(vec![3.0, 4.0], vec![1, 1]);
        let nuis = LinearNuisances::from_oracle(
            vec![3.0, 4.0],
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![0.5, 0.5],
        );
        let s = additive_scores(&data, &nuis, Identification::Dr).unwrap();
        assert_eq!(s.s1, vec![3.0, 4.0]);
        assert_eq!(s.s0, vec![1.0, 2.0]);
    }

    #[test]
    fn additive_plug_in_arithmetic() {
        // e = 0.5, gamma = 0, D = 1, Y = 2 -> s1 = 4, s0 = 0.
        let data = toy(vec![2.0, 2.0], vec![1, 1]);
        let nuis = LinearNuisances::from_oracle(
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.5, 0.5],
        );
        let s = additive_scores(&data, &nuis, Identification::Dr).unwrap();
        assert_eq!(s.s1, vec![4.0, 4.0]);
        assert_eq!(s.s0, vec![0.0, 0.0]);
    }

    #[test]
    fn atkinson_log_zero_residual() {
        // theta = 1 with zero residuals: s1 = log gamma(1, X).
        let data = toy(vec![4.0, 9.0], vec![1, 0]);
        let nuis = LinearNuisances::from_oracle(
            vec![4.0, 8.0],
            vec![2.0, 9.0],
            vec![4.0, 9.0],
            vec![0.5, 0.5],
        );
        let s = atkinson_scores(&data, &nuis, 1.0, Identification::Dr).unwrap();
        assert!((s.s1[0] - 4.0f64.ln()).abs() < 1e-12);
        assert!((s.s1[1] - 8.0f64.ln()).abs() < 1e-12);
        assert!((s.s0[1] - 9.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn atkinson_power_plug_in_arithmetic() {
        // theta = 0.5, gamma = 4, e = 0.5, D = 1, Y = 6:
        // U(4) = 4, correction = 4^(-1/2) * (6 - 4) / 0.5 = 2, s1 = 6.
        let data = toy(vec![6.0, 6.0], vec![1, 1]);
        let nuis = LinearNuisances::from_oracle(
            vec![4.0, 4.0],
            vec![4.0, 4.0],
            vec![4.0, 4.0],
            vec![0.5, 0.5],
        );
        let s = atkinson_scores(&data, &nuis, 0.5, Identification::Dr).unwrap();
        assert!((s.s1[0] - 6.0).abs() < 1e-12);
        assert!((s.s0[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn atkinson_rejects_nonpositive_mean_outcome() {
        let data = toy(vec![-1.0, -2.0], vec![1, 0]);
        let nuis = LinearNuisances::from_oracle(
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        );
        assert!(matches!(
            atkinson_scores(&data, &nuis, 0.5, Identification::Dr),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn ipw_additive_identity_under_randomization() {
        // e = 0.5: mean of s1 equals 2 * mean(D * Y).
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let d = vec![1, 0, 1, 0];
        let data = toy(y.clone(), d.clone());
        let nuis = LinearNuisances::from_oracle(
            vec![0.0; 4],
            vec![0.0; 4],
            vec![0.0; 4],
            vec![0.5; 4],
        );
        let s = additive_scores(&data, &nuis, Identification::Ipw).unwrap();
        let mean_s1 = s.s1.iter().sum::<f64>() / 4.0;
        let mean_dy =
            y.iter().zip(&d).map(|(&yi, &di)| yi * di as f64).sum::<f64>() / 4.0;
        assert!((mean_s1 - 2.0 * mean_dy).abs() < 1e-12);
    }
}
