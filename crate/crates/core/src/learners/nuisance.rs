//! Cross-fitted nuisance estimation: conditional outcome means, propensity
//! scores and pairwise conditional means, each trained on data excluding the
//! fold (or pair fold) where its predictions are used.

use rand::seq::index::sample as index_sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LearnerSettings, Regressor, RowMatrix};
use crate::data::{Dataset, FoldAssignment, PairFoldAssignment};
use crate::error::{Error, Result};
use crate::ustat::pair_from_index;
use crate::util::derived_rng;

/// First-stage configuration: learner, trimming and the cap on pairwise
/// training sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSettings {
    pub learner: LearnerSettings,
    /// Propensity trimming constant; predictions are clamped to
    /// [trim, 1 - trim].
    #[serde(default = "default_trim")]
    pub trim: f64,
    /// Cap on the number of ordered pairs used to train each pairwise
    /// regression; larger complements are subsampled (seeded).
    #[serde(default = "default_pair_cap")]
    pub pair_cap: usize,
    /// Number of unit-level folds L (= K for pair folds).
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Master seed for fold assignment and subsampling.
    #[serde(default)]
    pub seed: u64,
}

fn default_trim() -> f64 {
    0.01
}

fn default_pair_cap() -> usize {
    50_000
}

fn default_folds() -> usize {
    5
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            learner: LearnerSettings::default(),
            trim: default_trim(),
            pair_cap: default_pair_cap(),
            folds: default_folds(),
            seed: 0,
        }
    }
}

impl FitSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.trim > 0.0 && self.trim < 0.5) {
            return Err(Error::Argument(format!("trim must lie in (0, 0.5), got {}", self.trim)));
        }
        if self.pair_cap == 0 {
            return Err(Error::Argument("pair_cap must be positive".into()));
        }
        Ok(())
    }
}

fn gather_matrix(data: &Dataset, units: &[u32], cols: &[usize]) -> RowMatrix {
    let mut m = RowMatrix::with_capacity(units.len(), cols.len());
    let mut row = Vec::with_capacity(cols.len());
    for &u in units {
        row.clear();
        data.gather_row(u as usize, cols, &mut row);
        m.push_row(&row);
    }
    m
}

fn fit_two_arms(
    data: &Dataset,
    training: &[u32],
    cols: &[usize],
    settings: &FitSettings,
    fold_label: &str,
) -> Result<[Box<dyn Regressor>; 2]> {
    let learner = settings.learner.build();
    let mut arms: Vec<Box<dyn Regressor>> = Vec::with_capacity(2);
    for arm in 0..2u8 {
        let units: Vec<u32> =
            training.iter().copied().filter(|&u| data.treatment()[u as usize] == arm).collect();
        if units.is_empty() {
            return Err(Error::Estimation(format!(
                "training complement of {fold_label} has no units with D={arm}"
            )));
        }
        let x = gather_matrix(data, &units, cols);
        let y: Vec<f64> = units.iter().map(|&u| data.outcome()[u as usize]).collect();
        arms.push(learner.fit(&x, &y)?);
    }
    let treated = arms.pop().unwrap();
    let control = arms.pop().unwrap();
    Ok([control, treated])
}

/// Per-fold fitted outcome regressions, one pair (control, treated) per
/// unit-level fold, each trained on that fold's complement.
pub struct GammaFit {
    folds: FoldAssignment,
    feature_cols: Vec<usize>,
    per_fold: Vec<[Box<dyn Regressor>; 2]>,
}

impl GammaFit {
    /// Predict gamma(d, x) with the fit belonging to `fold`.
    pub fn predict(&self, fold: usize, d: u8, x: &[f64]) -> f64 {
        self.per_fold[fold][d as usize].predict_one(x)
    }

    pub fn feature_cols(&self) -> &[usize] {
        &self.feature_cols
    }

    /// Cross-fitted per-unit predictions (gamma1, gamma0, gamma at the
    /// observed treatment), each unit scored by its own fold's fit.
    pub fn unit_values(&self, data: &Dataset) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = data.n();
        let rows: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::with_capacity(self.feature_cols.len());
                data.gather_row(i, &self.feature_cols, &mut row);
                let l = self.folds.group_of(i);
                (self.predict(l, 1, &row), self.predict(l, 0, &row))
            })
            .collect();
        let gamma1: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let gamma0: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let gamma_obs: Vec<f64> = (0..n)
            .map(|i| if data.treatment()[i] == 1 { gamma1[i] } else { gamma0[i] })
            .collect();
        (gamma1, gamma0, gamma_obs)
    }
}

/// Fit the conditional mean gamma(d, x) on each fold complement, separately
/// on the treated and control subsamples.
pub fn fit_gamma(
    data: &Dataset,
    folds: &FoldAssignment,
    settings: &FitSettings,
    feature_cols: &[usize],
) -> Result<GammaFit> {
    settings.validate()?;
    let per_fold: Vec<[Box<dyn Regressor>; 2]> = (0..folds.n_groups())
        .map(|l| {
            let training = folds.complement(l);
            fit_two_arms(data, &training, feature_cols, settings, &format!("fold {l}"))
        })
        .collect::<Result<_>>()?;
    Ok(GammaFit { folds: folds.clone(), feature_cols: feature_cols.to_vec(), per_fold })
}

/// Per-fold fitted propensity regressions.
pub struct PropensityFit {
    folds: FoldAssignment,
    feature_cols: Vec<usize>,
    trim: f64,
    per_fold: Vec<Box<dyn Regressor>>,
}

impl PropensityFit {
    /// Predict e(x) with the fit belonging to `fold`, clamped to
    /// [trim, 1 - trim].
    pub fn predict(&self, fold: usize, x: &[f64]) -> f64 {
        self.per_fold[fold].predict_one(x).clamp(self.trim, 1.0 - self.trim)
    }

    /// Cross-fitted clamped per-unit propensities and the share of units
    /// whose raw prediction was clamped.
    pub fn unit_values(&self, data: &Dataset) -> (Vec<f64>, f64) {
        let n = data.n();
        let raw: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::with_capacity(self.feature_cols.len());
                data.gather_row(i, &self.feature_cols, &mut row);
                self.per_fold[self.folds.group_of(i)].predict_one(&row)
            })
            .collect();
        let clamped =
            raw.iter().filter(|&&e| e < self.trim || e > 1.0 - self.trim).count() as f64;
        let e = raw.iter().map(|&v| v.clamp(self.trim, 1.0 - self.trim)).collect();
        (e, clamped / n as f64)
    }
}

/// Fit the propensity e(x) = P(D = 1 | x) on each fold complement by
/// regressing the binary treatment on the covariates.
pub fn fit_propensity(
    data: &Dataset,
    folds: &FoldAssignment,
    settings: &FitSettings,
) -> Result<PropensityFit> {
    settings.validate()?;
    let cols: Vec<usize> = (0..data.k()).collect();
    let per_fold: Vec<Box<dyn Regressor>> = (0..folds.n_groups())
        .map(|l| {
            let training = folds.complement(l);
            let x = gather_matrix(data, &training, &cols);
            let y: Vec<f64> =
                training.iter().map(|&u| data.treatment()[u as usize] as f64).collect();
            settings.learner.build().fit(&x, &y)
        })
        .collect::<Result<_>>()?;
    Ok(PropensityFit { folds: folds.clone(), feature_cols: cols, trim: settings.trim, per_fold })
}

/// Cross-fitted predictions of E[Y | x_cols] (no treatment split), one fit
/// per fold complement; used for the descriptive IOp of a sample.
pub fn fit_outcome_mean(
    data: &Dataset,
    folds: &FoldAssignment,
    settings: &FitSettings,
    feature_cols: &[usize],
) -> Result<Vec<f64>> {
    settings.validate()?;
    let fits: Vec<Box<dyn Regressor>> = (0..folds.n_groups())
        .map(|l| {
            let training = folds.complement(l);
            let x = gather_matrix(data, &training, feature_cols);
            let y: Vec<f64> = training.iter().map(|&u| data.outcome()[u as usize]).collect();
            settings.learner.build().fit(&x, &y)
        })
        .collect::<Result<_>>()?;
    Ok((0..data.n())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(feature_cols.len());
            data.gather_row(i, feature_cols, &mut row);
            fits[folds.group_of(i)].predict_one(&row)
        })
        .collect())
}

/// A pairwise regression target g(Z_u, Z_v) evaluated on dataset rows.
pub trait PairTarget: Send + Sync {
    fn eval(&self, data: &Dataset, u: usize, v: usize) -> f64;
}

impl<F: Fn(&Dataset, usize, usize) -> f64 + Send + Sync> PairTarget for F {
    fn eval(&self, data: &Dataset, u: usize, v: usize) -> f64 {
        self(data, u, v)
    }
}

/// Per-pair-fold fitted pairwise conditional means, one regression per
/// treatment combination (a, b), trained on stacked training pairs drawn
/// from the fold's complement groups.
pub struct PhiFit {
    feature_cols: Vec<usize>,
    per_fold: Vec<[Box<dyn Regressor>; 4]>,
}

impl PhiFit {
    /// Predict phi_ab(x_i, x_j) with the fit of the pair fold owning (i, j).
    pub fn predict(
        &self,
        pair_folds: &PairFoldAssignment,
        data: &Dataset,
        a: u8,
        b: u8,
        i: usize,
        j: usize,
    ) -> f64 {
        let fold = pair_folds.fold_of_pair(i, j);
        let mut row = Vec::with_capacity(2 * self.feature_cols.len());
        data.gather_row(i, &self.feature_cols, &mut row);
        data.gather_row(j, &self.feature_cols, &mut row);
        self.per_fold[fold][(a * 2 + b) as usize].predict_one(&row)
    }

    /// Cross-fitted phi values for every pair i < j and every (a, b); slot
    /// layout is a*2 + b.
    pub fn pair_values(&self, data: &Dataset, pair_folds: &PairFoldAssignment) -> [Vec<f64>; 4] {
        let n = data.n();
        let n_pairs = n * (n - 1) / 2;
        let mut out: [Vec<f64>; 4] = Default::default();
        for a in 0..2u8 {
            for b in 0..2u8 {
                let vals: Vec<f64> = (0..n_pairs)
                    .into_par_iter()
                    .map(|p| {
                        let (i, j) = pair_from_index(n, p);
                        let fold = pair_folds.fold_of_pair(i, j);
                        let mut row = Vec::with_capacity(2 * self.feature_cols.len());
                        data.gather_row(i, &self.feature_cols, &mut row);
                        data.gather_row(j, &self.feature_cols, &mut row);
                        self.per_fold[fold][(a * 2 + b) as usize].predict_one(&row)
                    })
                    .collect();
                out[(a * 2 + b) as usize] = vals;
            }
        }
        out
    }
}

/// Enumerate or subsample ordered training pairs (u, v), u != v, with
/// D_u = a and D_v = b, drawn from the complement units.
fn training_pairs(
    arm_a: &[u32],
    arm_b: &[u32],
    same_arm: bool,
    cap: usize,
    seed: u64,
    stream: u64,
) -> Vec<(u32, u32)> {
    let total = if same_arm {
        arm_a.len() * arm_a.len().saturating_sub(1)
    } else {
        arm_a.len() * arm_b.len()
    };
    let decode = |t: usize| -> (u32, u32) {
        if same_arm {
            let m = arm_a.len();
            let u_pos = t / (m - 1);
            let rem = t % (m - 1);
            let v_pos = if rem >= u_pos { rem + 1 } else { rem };
            (arm_a[u_pos], arm_a[v_pos])
        } else {
            (arm_a[t / arm_b.len()], arm_b[t % arm_b.len()])
        }
    };
    if total <= cap {
        (0..total).map(decode).collect()
    } else {
        let mut rng = derived_rng(seed, 0x9A1C ^ stream);
        let mut chosen: Vec<usize> = index_sample(&mut rng, total, cap).into_iter().collect();
        chosen.sort_unstable();
        chosen.into_iter().map(decode).collect()
    }
}

/// Fit the pairwise conditional mean of `target` for each pair fold and
/// each treatment combination (a, b), on stacked features (x_u, x_v).
///
/// Pair cross-fitting needs at least 3 unit groups: with K = 2 the triangle
/// fold excludes every unit and leaves nothing to train on.
pub fn fit_phi(
    data: &Dataset,
    pair_folds: &PairFoldAssignment,
    settings: &FitSettings,
    target: &dyn PairTarget,
    feature_cols: &[usize],
) -> Result<PhiFit> {
    settings.validate()?;
    let units = pair_folds.units();
    let per_fold: Vec<[Box<dyn Regressor>; 4]> = pair_folds
        .folds()
        .iter()
        .enumerate()
        .map(|(fold_id, fold)| {
            let training = units.complement_of(&fold.excluded_groups);
            let mut arms: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
            for &u in &training {
                arms[data.treatment()[u as usize] as usize].push(u);
            }
            let mut fits: Vec<Box<dyn Regressor>> = Vec::with_capacity(4);
            for a in 0..2usize {
                for b in 0..2usize {
                    let pairs = training_pairs(
                        &arms[a],
                        &arms[b],
                        a == b,
                        settings.pair_cap,
                        settings.seed,
                        (fold_id * 4 + a * 2 + b) as u64,
                    );
                    if pairs.is_empty() {
                        return Err(Error::Estimation(format!(
                            "no training pairs with (D_i, D_j) = ({a}, {b}) in the complement \
                             of pair fold {fold_id}"
                        )));
                    }
                    let mut x = RowMatrix::with_capacity(pairs.len(), 2 * feature_cols.len());
                    let mut t = Vec::with_capacity(pairs.len());
                    let mut row = Vec::with_capacity(2 * feature_cols.len());
                    for &(u, v) in &pairs {
                        row.clear();
                        data.gather_row(u as usize, feature_cols, &mut row);
                        data.gather_row(v as usize, feature_cols, &mut row);
                        x.push_row(&row);
                        t.push(target.eval(data, u as usize, v as usize));
                    }
                    fits.push(settings.learner.build().fit(&x, &t)?);
                }
            }
            let f11 = fits.pop().unwrap();
            let f10 = fits.pop().unwrap();
            let f01 = fits.pop().unwrap();
            let f00 = fits.pop().unwrap();
            Ok([f00, f01, f10, f11])
        })
        .collect::<Result<_>>()?;
    Ok(PhiFit { feature_cols: feature_cols.to_vec(), per_fold })
}

/// Per-unit nuisance values evaluated under each pair fold's fit. Values are
/// stored as `[fold][unit]`; the entry for (fold, unit) is only meaningful
/// when the unit belongs to one of the fold's excluded groups, but every
/// entry is filled so downstream lookups are unconditional.
pub struct PairUnitValues {
    pub by_fold: Vec<Vec<f64>>,
}

impl PairUnitValues {
    pub fn get(&self, fold: usize, unit: usize) -> f64 {
        self.by_fold[fold][unit]
    }
}

/// Cross-fitted per-pair-fold nuisances for pair scores: propensities,
/// optionally outcome means (for the IOp kernel) and the clamp share.
pub struct PairFoldNuisances {
    pub e: PairUnitValues,
    pub gamma1: Option<PairUnitValues>,
    pub gamma0: Option<PairUnitValues>,
    pub clamp_share: f64,
}

/// Fit propensities (and, when `gamma_cols` is given, outcome means) under
/// every pair fold, training each fit on the complement of the fold's
/// excluded groups.
pub fn fit_pair_nuisances(
    data: &Dataset,
    pair_folds: &PairFoldAssignment,
    settings: &FitSettings,
    gamma_cols: Option<&[usize]>,
) -> Result<PairFoldNuisances> {
    settings.validate()?;
    let units = pair_folds.units();
    let all_cols: Vec<usize> = (0..data.k()).collect();
    let n = data.n();

    let mut e_by_fold = Vec::with_capacity(pair_folds.n_folds());
    let mut g1_by_fold = Vec::new();
    let mut g0_by_fold = Vec::new();
    let mut clamped = 0usize;
    let mut evaluated = 0usize;

    for (fold_id, fold) in pair_folds.folds().iter().enumerate() {
        let training = units.complement_of(&fold.excluded_groups);
        // Propensity.
        let x = gather_matrix(data, &training, &all_cols);
        let y: Vec<f64> = training.iter().map(|&u| data.treatment()[u as usize] as f64).collect();
        let e_fit = settings.learner.build().fit(&x, &y)?;
        let raw: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::with_capacity(all_cols.len());
                data.gather_row(i, &all_cols, &mut row);
                e_fit.predict_one(&row)
            })
            .collect();
        clamped += raw.iter().filter(|&&v| v < settings.trim || v > 1.0 - settings.trim).count();
        evaluated += n;
        e_by_fold.push(
            raw.into_iter().map(|v| v.clamp(settings.trim, 1.0 - settings.trim)).collect(),
        );

        if let Some(cols) = gamma_cols {
            let arms = fit_two_arms(data, &training, cols, settings, &format!("pair fold {fold_id}"))?;
            let vals: Vec<(f64, f64)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut row = Vec::with_capacity(cols.len());
                    data.gather_row(i, cols, &mut row);
                    (arms[1].predict_one(&row), arms[0].predict_one(&row))
                })
                .collect();
            g1_by_fold.push(vals.iter().map(|v| v.0).collect::<Vec<f64>>());
            g0_by_fold.push(vals.iter().map(|v| v.1).collect::<Vec<f64>>());
        }
    }

    Ok(PairFoldNuisances {
        e: PairUnitValues { by_fold: e_by_fold },
        gamma1: gamma_cols.map(|_| PairUnitValues { by_fold: g1_by_fold }),
        gamma0: gamma_cols.map(|_| PairUnitValues { by_fold: g0_by_fold }),
        clamp_share: clamped as f64 / evaluated.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_pair_folds, make_unit_folds};
    use crate::learners::LearnerKind;
    use rand::Rng;

    fn settings(kind: LearnerKind) -> FitSettings {
        FitSettings {
            learner: LearnerSettings { learner: kind, ..Default::default() },
            ..Default::default()
        }
    }

    /// Y = X + D with zero noise.
    fn linear_dgp(n: usize, seed: u64) -> Dataset {
        let mut rng = derived_rng(seed, 1);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let d: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + d[i] as f64).collect();
        Dataset::new(y, d, vec![x], vec!["x1".into()], None, &[]).unwrap()
    }

    #[test]
    fn gamma_recovers_noiseless_linear_dgp_with_1nn() {
        let data = linear_dgp(100, 5);
        let folds = make_unit_folds(100, 5, 0).unwrap();
        let mut s = settings(LearnerKind::Knn);
        s.learner.k = Some(1);
        let fit = fit_gamma(&data, &folds, &s, &[0]).unwrap();
        // Held-out grid: max abs error below 0.1 for both arms.
        for q in 0..20 {
            let x = 0.025 + q as f64 * 0.05;
            for l in 0..5 {
                assert!((fit.predict(l, 1, &[x]) - (x + 1.0)).abs() < 0.1);
                assert!((fit.predict(l, 0, &[x]) - x).abs() < 0.1);
            }
        }
    }

    #[test]
    fn gamma_constant_outcome() {
        let n = 40;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let d: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let data =
            Dataset::new(vec![7.0; n], d, vec![x], vec!["x1".into()], None, &[]).unwrap();
        let folds = make_unit_folds(n, 4, 0).unwrap();
        for kind in [LearnerKind::Kernel, LearnerKind::Knn, LearnerKind::Forest] {
            let fit = fit_gamma(&data, &folds, &settings(kind), &[0]).unwrap();
            let (g1, g0, _) = fit.unit_values(&data);
            for i in 0..n {
                assert!((g1[i] - 7.0).abs() < 1e-9, "{kind:?}");
                assert!((g0[i] - 7.0).abs() < 1e-9, "{kind:?}");
            }
        }
    }

    #[test]
    fn gamma_all_treated_complement_is_estimation_error() {
        let n = 10;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        // Only unit 0 is control; the fold containing it has an all-treated
        // complement.
        let mut d = vec![1u8; n];
        d[0] = 0;
        let data = Dataset::new(
            (0..n).map(|i| i as f64).collect(),
            d,
            vec![x],
            vec!["x1".into()],
            None,
            &[],
        )
        .unwrap();
        let folds = make_unit_folds(n, 5, 0).unwrap();
        let err = match fit_gamma(&data, &folds, &settings(LearnerKind::Knn), &[0]) {
            Err(e) => e,
            Ok(_) => panic!("expected estimation error"),
        };
        assert!(matches!(err, Error::Estimation(_)));
        assert!(err.to_string().contains("fold"));
    }

    #[test]
    fn propensity_is_always_clamped() {
        let data = linear_dgp(60, 9);
        let folds = make_unit_folds(60, 3, 0).unwrap();
        let mut s = settings(LearnerKind::Knn);
        s.trim = 0.1;
        let fit = fit_propensity(&data, &folds, &s).unwrap();
        let (e, _) = fit.unit_values(&data);
        assert!(e.iter().all(|&v| (0.1..=0.9).contains(&v)));
    }

    #[test]
    fn randomized_propensity_recovered_within_band() {
        // P(D=1|X) = 0.5: at n=500 the fitted propensity sits in
        // [0.4, 0.6] for at least 95% of the evaluation points.
        let n = 500;
        let mut rng = derived_rng(31, 0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let d: Vec<u8> = (0..n).map(|_| u8::from(rng.random_range(0.0..1.0) < 0.5)).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i]).collect();
        let data = Dataset::new(y, d, vec![x], vec!["x1".into()], None, &[]).unwrap();
        let folds = make_unit_folds(n, 5, 0).unwrap();
        let fit = fit_propensity(&data, &folds, &settings(LearnerKind::Kernel)).unwrap();
        let (e, _) = fit.unit_values(&data);
        let inside = e.iter().filter(|&&v| (0.4..=0.6).contains(&v)).count();
        assert!(
            inside as f64 >= 0.95 * n as f64,
            "only {inside}/{n} propensities inside [0.4, 0.6]"
        );
    }

    #[test]
    fn logistic_propensity_recovered_with_kernel_learner() {
        let n = 2000;
        let mut rng = derived_rng(33, 0);
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.5..2.5)).collect();
        let d: Vec<u8> = (0..n)
            .map(|i| u8::from(rng.random_range(0.0..1.0) < sigmoid(x[i])))
            .collect();
        let y: Vec<f64> = (0..n).map(|i| x[i]).collect();
        let truth: Vec<f64> = x.iter().map(|&v| sigmoid(v)).collect();
        let data = Dataset::new(y, d, vec![x], vec!["x1".into()], None, &[]).unwrap();
        let folds = make_unit_folds(n, 5, 0).unwrap();
        let fit = fit_propensity(&data, &folds, &settings(LearnerKind::Kernel)).unwrap();
        let (e, _) = fit.unit_values(&data);
        let mae =
            e.iter().zip(&truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
        assert!(mae < 0.05, "mean abs error {mae}");
    }

    #[test]
    fn invalid_trim_is_argument_error() {
        let data = linear_dgp(20, 2);
        let folds = make_unit_folds(20, 2, 0).unwrap();
        let mut s = settings(LearnerKind::Knn);
        s.trim = 0.7;
        assert!(matches!(fit_propensity(&data, &folds, &s), Err(Error::Argument(_))));
    }

    #[test]
    fn phi_recovers_pair_mean_of_deterministic_outcome() {
        // Y = X exactly; target (Y_u + Y_v) / 2 should be recovered as a
        // function of the stacked features.
        let n = 200;
        let mut rng = derived_rng(3, 0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let d: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
        let y = x.clone();
        let data = Dataset::new(y, d, vec![x], vec!["x1".into()], None, &[]).unwrap();
        let units = make_unit_folds(n, 3, 1).unwrap();
        let pf = make_pair_folds(units).unwrap();
        let mut s = settings(LearnerKind::Knn);
        s.learner.k = Some(2);
        let target = |d: &Dataset, u: usize, v: usize| (d.outcome()[u] + d.outcome()[v]) / 2.0;
        let fit = fit_phi(&data, &pf, &s, &target, &[0]).unwrap();
        let mut worst: f64 = 0.0;
        for p in 0..data.n_pairs() {
            let (i, j) = pair_from_index(n, p);
            let truth = (data.outcome()[i] + data.outcome()[j]) / 2.0;
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let err = (fit.predict(&pf, &data, a, b, i, j) - truth).abs();
                    worst = worst.max(err);
                }
            }
        }
        assert!(worst < 0.1, "worst phi error {worst}");
    }

    #[test]
    fn phi_constant_target_is_constant() {
        let data = linear_dgp(40, 11);
        let units = make_unit_folds(40, 4, 1).unwrap();
        let pf = make_pair_folds(units).unwrap();
        let target = |_: &Dataset, _: usize, _: usize| 1.0;
        let fit = fit_phi(&data, &pf, &settings(LearnerKind::Kernel), &target, &[0]).unwrap();
        let vals = fit.pair_values(&data, &pf);
        for ab in 0..4 {
            assert!(vals[ab].iter().all(|&v| (v - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn phi_without_matching_pairs_is_estimation_error() {
        // All units treated except one control: no (0,0) ordered pairs in
        // complements that exclude the control's group.
        let n = 10;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut d = vec![1u8; n];
        d[0] = 0;
        let data = Dataset::new(
            (0..n).map(|i| i as f64).collect(),
            d,
            vec![x],
            vec!["x1".into()],
            None,
            &[],
        )
        .unwrap();
        let units = make_unit_folds(n, 2, 0).unwrap();
        let pf = make_pair_folds(units).unwrap();
        let target = |_: &Dataset, _: usize, _: usize| 1.0;
        let err = match fit_phi(&data, &pf, &settings(LearnerKind::Knn), &target, &[0]) {
            Err(e) => e,
            Ok(_) => panic!("expected estimation error"),
        };
        assert!(matches!(err, Error::Estimation(_)));
    }

    #[test]
    fn cross_fitting_never_uses_own_fold_targets() {
        // Poison one unit's outcome: predictions made under the fold that
        // contains the poisoned unit must not move, while at least one other
        // fold's fit must move.
        let n = 60;
        let data = linear_dgp(n, 21);
        let folds = make_unit_folds(n, 3, 4).unwrap();
        let s = settings(LearnerKind::Kernel);
        let base = fit_gamma(&data, &folds, &s, &[0]).unwrap();

        let victim = folds.members(0)[0] as usize;
        let mut y = data.outcome().to_vec();
        y[victim] += 1.0e6;
        let poisoned = Dataset::new(
            y,
            data.treatment().to_vec(),
            vec![data.column(0).to_vec()],
            vec!["x1".into()],
            None,
            &[],
        )
        .unwrap();
        let alt = fit_gamma(&poisoned, &folds, &s, &[0]).unwrap();

        let probe = [0.5f64];
        let d_arm = data.treatment()[victim];
        // Fold 0 excludes the victim from training: unchanged.
        assert_eq!(base.predict(0, d_arm, &probe), alt.predict(0, d_arm, &probe));
        // Folds 1 and 2 train on the victim: the poison must show up.
        let moved = (1..3).any(|l| {
            (base.predict(l, d_arm, &probe) - alt.predict(l, d_arm, &probe)).abs() > 1.0
        });
        assert!(moved);
    }
}
