//! Nadaraya-Watson kernel regression with a Gaussian product kernel and a
//! per-dimension rule-of-thumb bandwidth.

use super::{Learner, Regressor, RowMatrix};
use crate::error::{Error, Result};

/// Local-constant kernel regression. The default bandwidth in dimension j is
/// `1.06 * sd_j * m^(-1/(4+d))`; an explicit bandwidth applies to every
/// dimension.
#[derive(Debug, Clone, Copy)]
pub struct NadarayaWatson {
    bandwidth: Option<f64>,
}

impl NadarayaWatson {
    pub fn new(bandwidth: Option<f64>) -> Self {
        NadarayaWatson { bandwidth }
    }
}

struct FittedKernel {
    x: RowMatrix,
    y: Vec<f64>,
    inv_h: Vec<f64>,
}

impl Learner for NadarayaWatson {
    fn fit(&self, x: &RowMatrix, y: &[f64]) -> Result<Box<dyn Regressor>> {
        let m = x.n_rows();
        if m == 0 || m != y.len() {
            return Err(Error::Estimation(format!(
                "kernel fit needs matching non-empty data, got {m} rows and {} targets",
                y.len()
            )));
        }
        let d = x.n_cols();
        let mut inv_h = Vec::with_capacity(d);
        for j in 0..d {
            let h = match self.bandwidth {
                Some(h) if h > 0.0 => h,
                Some(h) => {
                    return Err(Error::Argument(format!("bandwidth must be positive, got {h}")))
                }
                None => {
                    let mean = (0..m).map(|i| x.row(i)[j]).sum::<f64>() / m as f64;
                    let var =
                        (0..m).map(|i| (x.row(i)[j] - mean).powi(2)).sum::<f64>() / m as f64;
                    let sd = var.sqrt();
                    if sd > 0.0 {
                        1.06 * sd * (m as f64).powf(-1.0 / (4.0 + d as f64))
                    } else {
                        1.0 // constant column: any bandwidth gives equal weights
                    }
                }
            };
            inv_h.push(1.0 / h);
        }
        Ok(Box::new(FittedKernel { x: x.clone(), y: y.to_vec(), inv_h }))
    }
}

impl Regressor for FittedKernel {
    fn predict_one(&self, q: &[f64]) -> f64 {
        let m = self.x.n_rows();
        // Log-weights shifted by their maximum so the weight sum is >= 1
        // and the prediction stays finite for any query.
        let mut logw = Vec::with_capacity(m);
        let mut max_lw = f64::NEG_INFINITY;
        for i in 0..m {
            let xi = self.x.row(i);
            let mut s = 0.0;
            for (j, &inv) in self.inv_h.iter().enumerate() {
                let z = (q[j] - xi[j]) * inv;
                s -= 0.5 * z * z;
            }
            if s > max_lw {
                max_lw = s;
            }
            logw.push(s);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            let w = (logw[i] - max_lw).exp();
            num += w * self.y[i];
            den += w;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_predicts_constant() {
        let x = RowMatrix::from_rows(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
        let fit = NadarayaWatson::new(None).fit(&x, &[3.0, 3.0, 3.0]).unwrap();
        assert!((fit.predict_one(&[0.3]) - 3.0).abs() < 1e-12);
        assert!((fit.predict_one(&[10.0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_smooth_function() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let x = RowMatrix::from_rows(rows).unwrap();
        let fit = NadarayaWatson::new(Some(0.03)).fit(&x, &y).unwrap();
        for q in [0.1, 0.5, 0.9] {
            assert!((fit.predict_one(&[q]) - (2.0 * q + 1.0)).abs() < 0.05);
        }
    }

    #[test]
    fn far_query_stays_finite() {
        let x = RowMatrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let fit = NadarayaWatson::new(Some(0.01)).fit(&x, &[1.0, 2.0]).unwrap();
        let p = fit.predict_one(&[1e6]);
        assert!(p.is_finite());
    }
}
