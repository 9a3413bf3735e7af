//! Synthetic data-generating processes with known potential-outcome laws,
//! plus oracle nuisance values (closed-form conditional means under the
//! Gaussian noise) for identification and orthogonality experiments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scores::{LinearNuisances, PairNuisances, WelfareFamily};
use crate::ustat::pair_from_index;
use crate::util::{derived_rng, normal_cdf, normal_pdf, sgn};

/// Covariate law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum CovariateLaw {
    Uniform { dim: usize, low: f64, high: f64 },
}

impl CovariateLaw {
    pub fn dim(&self) -> usize {
        match self {
            CovariateLaw::Uniform { dim, .. } => *dim,
        }
    }
}

/// True propensity function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PropensityFn {
    Constant { p: f64 },
    /// intercept + slope * x[feature]
    Affine { intercept: f64, slope: f64, feature: usize },
}

impl PropensityFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            PropensityFn::Constant { p } => p,
            PropensityFn::Affine { intercept, slope, feature } => intercept + slope * x[feature],
        }
    }
}

/// True conditional outcome mean for one arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeanFn {
    Affine { intercept: f64, coefs: Vec<f64> },
    /// Affine plus a level shift where x[step_feature] > step_at.
    AffineStep {
        intercept: f64,
        coefs: Vec<f64>,
        step_feature: usize,
        step_at: f64,
        step_size: f64,
    },
}

impl MeanFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFn::Affine { intercept, coefs } => {
                intercept + coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            }
            MeanFn::AffineStep { intercept, coefs, step_feature, step_at, step_size } => {
                let base =
                    intercept + coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
                base + if x[*step_feature] > *step_at { *step_size } else { 0.0 }
            }
        }
    }
}

/// Coupling of the parental outcome to the control mean:
/// X1 = weight * gamma0(x) + Normal(0, noise_sd^2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParentalLink {
    pub weight: f64,
    pub noise_sd: f64,
}

/// A fully specified synthetic DGP. All randomness is derived from the
/// seed passed at draw time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub covariates: CovariateLaw,
    pub propensity: PropensityFn,
    pub control_mean: MeanFn,
    pub treated_mean: MeanFn,
    /// Standard deviation of the additive Gaussian outcome noise.
    pub noise_sd: f64,
    #[serde(default)]
    pub parental: Option<ParentalLink>,
}

impl DgpSpec {
    /// Reference DGP: X ~ U[0,1]^2, e(x) = 0.25 + 0.5 x1,
    /// gamma0 = x1 + x2, gamma1 = x1 + x2 + 1 - 2 * 1(x1 > 0.7)
    /// (a sign-switching effect), noise sd 0.25,
    /// X1 = gamma0(x) + Normal(0, 0.1^2).
    pub fn reference() -> Self {
        DgpSpec {
            name: "reference".into(),
            covariates: CovariateLaw::Uniform { dim: 2, low: 0.0, high: 1.0 },
            propensity: PropensityFn::Affine { intercept: 0.25, slope: 0.5, feature: 0 },
            control_mean: MeanFn::Affine { intercept: 0.0, coefs: vec![1.0, 1.0] },
            treated_mean: MeanFn::AffineStep {
                intercept: 1.0,
                coefs: vec![1.0, 1.0],
                step_feature: 0,
                step_at: 0.7,
                step_size: -2.0,
            },
            noise_sd: 0.25,
            parental: Some(ParentalLink { weight: 1.0, noise_sd: 0.1 }),
        }
    }

    /// Reference DGP shifted up by 3 so outcomes stay strictly positive;
    /// used for the Atkinson (log/power) experiments.
    pub fn positive_reference() -> Self {
        let mut spec = DgpSpec::reference();
        spec.name = "positive".into();
        if let MeanFn::Affine { intercept, .. } = &mut spec.control_mean {
            *intercept += 3.0;
        }
        if let MeanFn::AffineStep { intercept, .. } = &mut spec.treated_mean {
            *intercept += 3.0;
        }
        spec
    }

    /// Randomized assignment with a constant effect of 2; handy for AIPW
    /// equivalence checks.
    pub fn randomized() -> Self {
        DgpSpec {
            name: "randomized".into(),
            covariates: CovariateLaw::Uniform { dim: 2, low: 0.0, high: 1.0 },
            propensity: PropensityFn::Constant { p: 0.5 },
            control_mean: MeanFn::Affine { intercept: 0.0, coefs: vec![1.0, 1.0] },
            treated_mean: MeanFn::Affine { intercept: 2.0, coefs: vec![1.0, 1.0] },
            noise_sd: 0.25,
            parental: Some(ParentalLink { weight: 1.0, noise_sd: 0.1 }),
        }
    }

    /// Rank-dependence demo: the treated arm tracks x1 tightly (strong
    /// association with the parental outcome), the control arm only
    /// loosely. Treating the low-x1 region lifts those outcomes above the
    /// untreated high-x1 region, which scrambles the ranking and lets
    /// shallow trees push the Kendall tau below either constant rule.
    pub fn kendall_demo() -> Self {
        DgpSpec {
            name: "kendall".into(),
            covariates: CovariateLaw::Uniform { dim: 2, low: 0.0, high: 1.0 },
            propensity: PropensityFn::Constant { p: 0.5 },
            control_mean: MeanFn::Affine { intercept: 0.0, coefs: vec![1.0, 0.0] },
            treated_mean: MeanFn::Affine { intercept: 1.5, coefs: vec![3.0, 0.0] },
            noise_sd: 1.3,
            parental: Some(ParentalLink { weight: 1.0, noise_sd: 0.25 }),
        }
    }

    /// Look up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "reference" => Ok(DgpSpec::reference()),
            "positive" => Ok(DgpSpec::positive_reference()),
            "randomized" => Ok(DgpSpec::randomized()),
            "kendall" => Ok(DgpSpec::kendall_demo()),
            other => Err(Error::Config(format!(
                "unknown DGP preset '{other}' (expected reference | positive | randomized | kendall)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.covariates.dim()
    }

    /// Analytic propensity bounds over the covariate support; validation
    /// requires them strictly inside (0, 1).
    pub fn validate(&self) -> Result<()> {
        let CovariateLaw::Uniform { dim, low, high } = &self.covariates;
        if *dim == 0 || low >= high {
            return Err(Error::Argument("degenerate covariate law".into()));
        }
        let (emin, emax) = match self.propensity {
            PropensityFn::Constant { p } => (p, p),
            PropensityFn::Affine { intercept, slope, feature } => {
                if feature >= *dim {
                    return Err(Error::Argument("propensity feature out of range".into()));
                }
                let a = intercept + slope * low;
                let b = intercept + slope * high;
                (a.min(b), a.max(b))
            }
        };
        if !(emin > 0.0 && emax < 1.0) {
            return Err(Error::Argument(format!(
                "propensity range [{emin}, {emax}] must lie strictly inside (0, 1)"
            )));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::Argument("noise_sd must be non-negative".into()));
        }
        Ok(())
    }

    pub fn true_e(&self, x: &[f64]) -> f64 {
        self.propensity.eval(x)
    }

    pub fn true_gamma(&self, arm: u8, x: &[f64]) -> f64 {
        if arm == 1 {
            self.treated_mean.eval(x)
        } else {
            self.control_mean.eval(x)
        }
    }
}

/// Hidden truths carried alongside a drawn sample.
#[derive(Debug, Clone)]
pub struct Truth {
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma0: Vec<f64>,
    pub e: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DrawnSample {
    pub data: Dataset,
    pub truth: Truth,
}

/// Draw an i.i.d. sample of size `n`; the observed outcome is the potential
/// outcome of the realized arm. Reproducible for a fixed (spec, n, seed).
pub fn draw_sample(spec: &DgpSpec, n: usize, seed: u64) -> Result<DrawnSample> {
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2, got {n}")));
    }
    spec.validate()?;
    let dim = spec.dim();
    let CovariateLaw::Uniform { low, high, .. } = spec.covariates;
    let mut rng = derived_rng(seed, 0xD6A_0001);
    let normal = StandardNormal;

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); dim];
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut x1 = Vec::with_capacity(n);
    let mut truth = Truth {
        y1: Vec::with_capacity(n),
        y0: Vec::with_capacity(n),
        gamma1: Vec::with_capacity(n),
        gamma0: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
    };
    let mut x = vec![0.0; dim];
    for _ in 0..n {
        for (j, slot) in x.iter_mut().enumerate() {
            *slot = rng.random_range(low..high);
            columns[j].push(*slot);
        }
        let e = spec.true_e(&x);
        let g1 = spec.true_gamma(1, &x);
        let g0 = spec.true_gamma(0, &x);
        let di = (rng.random_range(0.0..1.0) < e) as u8;
        let eps1: f64 = normal.sample(&mut rng);
        let eps0: f64 = normal.sample(&mut rng);
        let y1 = g1 + spec.noise_sd * eps1;
        let y0 = g0 + spec.noise_sd * eps0;
        y.push(if di == 1 { y1 } else { y0 });
        d.push(di);
        if let Some(link) = &spec.parental {
            let epsp: f64 = normal.sample(&mut rng);
            x1.push(link.weight * g0 + link.noise_sd * epsp);
        }
        truth.y1.push(y1);
        truth.y0.push(y0);
        truth.gamma1.push(g1);
        truth.gamma0.push(g0);
        truth.e.push(e);
    }
    let names: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
    let data = Dataset::new(
        y,
        d,
        columns,
        names,
        if spec.parental.is_some() { Some(x1) } else { None },
        &[],
    )?;
    Ok(DrawnSample { data, truth })
}

/// Oracle per-unit nuisance values from the truths (no cross-fitting).
pub fn oracle_linear_nuisances(sample: &DrawnSample) -> LinearNuisances {
    let t = &sample.truth;
    let gamma_obs: Vec<f64> = sample
        .data
        .treatment()
        .iter()
        .enumerate()
        .map(|(i, &d)| if d == 1 { t.gamma1[i] } else { t.gamma0[i] })
        .collect();
    LinearNuisances::from_oracle(t.gamma1.clone(), t.gamma0.clone(), gamma_obs, t.e.clone())
}

/// Mean absolute difference of two independent normals N(mu_a, s^2),
/// N(mu_b, s^2): with delta = mu_a - mu_b and sd = sqrt(2) s,
/// E|A - B| = delta (2 Phi(delta/sd) - 1) + 2 sd phi(delta/sd).
fn expected_abs_gaussian_diff(delta: f64, pooled_sd: f64) -> f64 {
    if pooled_sd == 0.0 {
        return delta.abs();
    }
    let z = delta / pooled_sd;
    delta * (2.0 * normal_cdf(z) - 1.0) + 2.0 * pooled_sd * normal_pdf(z)
}

/// E[sgn(A - B)] for the same pair of normals.
fn expected_sgn_gaussian_diff(delta: f64, pooled_sd: f64) -> f64 {
    if pooled_sd == 0.0 {
        return sgn(delta);
    }
    2.0 * normal_cdf(delta / pooled_sd) - 1.0
}

/// Oracle pair nuisances for a family: true propensities, true outcome
/// means, and (for the Gini and Kendall kernels) the closed-form pairwise
/// conditional means implied by the Gaussian noise.
pub fn oracle_pair_nuisances(
    spec: &DgpSpec,
    sample: &DrawnSample,
    family: &WelfareFamily,
) -> Result<PairNuisances> {
    let t = &sample.truth;
    let n = sample.data.n();
    let n_pairs = n * (n - 1) / 2;
    let gamma_of = |arm: u8, i: usize| if arm == 1 { t.gamma1[i] } else { t.gamma0[i] };
    match family {
        WelfareFamily::IopGini => Ok(PairNuisances::from_oracle(
            t.e.clone(),
            Some((t.gamma1.clone(), t.gamma0.clone())),
            None,
        )),
        WelfareFamily::Gini => {
            let pooled = std::f64::consts::SQRT_2 * spec.noise_sd;
            let mut phi: [Vec<f64>; 4] = Default::default();
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let vals: Vec<f64> = (0..n_pairs)
                        .into_par_iter()
                        .map(|p| {
                            let (i, j) = pair_from_index(n, p);
                            let (ga, gb) = (gamma_of(a, i), gamma_of(b, j));
                            0.5 * (ga + gb - expected_abs_gaussian_diff(ga - gb, pooled))
                        })
                        .collect();
                    phi[(a * 2 + b) as usize] = vals;
                }
            }
            Ok(PairNuisances::from_oracle(t.e.clone(), None, Some(phi)))
        }
        WelfareFamily::KendallTau { .. } => {
            let link = spec.parental.as_ref().ok_or_else(|| {
                Error::Config("kendall oracle needs a parental link in the DGP".into())
            })?;
            let pooled_y = std::f64::consts::SQRT_2 * spec.noise_sd;
            let pooled_p = std::f64::consts::SQRT_2 * link.noise_sd;
            let mut phi: [Vec<f64>; 4] = Default::default();
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let vals: Vec<f64> = (0..n_pairs)
                        .into_par_iter()
                        .map(|p| {
                            let (i, j) = pair_from_index(n, p);
                            let sy =
                                expected_sgn_gaussian_diff(gamma_of(a, i) - gamma_of(b, j), pooled_y);
                            let sp = expected_sgn_gaussian_diff(
                                link.weight * (t.gamma0[i] - t.gamma0[j]),
                                pooled_p,
                            );
                            sp * sy
                        })
                        .collect();
                    phi[(a * 2 + b) as usize] = vals;
                }
            }
            Ok(PairNuisances::from_oracle(t.e.clone(), None, Some(phi)))
        }
        _ => Err(Error::Argument(format!(
            "{} is not a pairwise welfare family",
            family.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_unit_effect() {
        let spec = DgpSpec {
            name: "unit".into(),
            covariates: CovariateLaw::Uniform { dim: 1, low: 0.0, high: 1.0 },
            propensity: PropensityFn::Constant { p: 0.5 },
            control_mean: MeanFn::Affine { intercept: 0.0, coefs: vec![0.0] },
            treated_mean: MeanFn::Affine { intercept: 1.0, coefs: vec![0.0] },
            noise_sd: 0.0,
            parental: None,
        };
        let s = draw_sample(&spec, 50, 1).unwrap();
        for i in 0..50 {
            let y = s.data.outcome()[i];
            if s.data.treatment()[i] == 1 {
                assert_eq!(y, 1.0);
            } else {
                assert_eq!(y, 0.0);
            }
        }
    }

    #[test]
    fn treated_share_near_half_under_randomization() {
        let spec = DgpSpec::randomized();
        let s = draw_sample(&spec, 10_000, 7).unwrap();
        let share = s.data.n_treated() as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&share), "share {share}");
    }

    #[test]
    fn same_seed_reproduces_sample() {
        let spec = DgpSpec::reference();
        let a = draw_sample(&spec, 100, 11).unwrap();
        let b = draw_sample(&spec, 100, 11).unwrap();
        assert_eq!(a.data.outcome(), b.data.outcome());
        assert_eq!(a.data.treatment(), b.data.treatment());
        assert_eq!(a.data.parental_outcome(), b.data.parental_outcome());
        let c = draw_sample(&spec, 100, 12).unwrap();
        assert_ne!(a.data.outcome(), c.data.outcome());
    }

    #[test]
    fn reference_propensity_within_bounds() {
        let spec = DgpSpec::reference();
        spec.validate().unwrap();
        let s = draw_sample(&spec, 200, 3).unwrap();
        assert!(s.truth.e.iter().all(|&e| (0.25..=0.75).contains(&e)));
    }

    #[test]
    fn gaussian_abs_diff_formula_against_quadrature() {
        // Midpoint quadrature over a fine grid as an independent oracle.
        for &(delta, sd) in &[(0.0, 1.0), (0.5, 0.7), (-1.2, 0.3)] {
            let truth = expected_abs_gaussian_diff(delta, sd);
            let mut acc = 0.0;
            let m = 20_000;
            for k in 0..m {
                let z = -8.0 + 16.0 * (k as f64 + 0.5) / m as f64;
                acc += (delta + sd * z).abs() * normal_pdf(z) * (16.0 / m as f64);
            }
            assert!((truth - acc).abs() < 1e-4, "delta={delta} sd={sd}: {truth} vs {acc}");
        }
    }
}
