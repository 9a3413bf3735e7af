//! k-nearest-neighbour regression with deterministic index tie-breaks.

use super::{Learner, Regressor, RowMatrix};
use crate::error::{Error, Result};

/// kNN regression. The default neighbour count for m training rows is
/// ceil(sqrt(ceil(m^(2/3)))).
#[derive(Debug, Clone, Copy)]
pub struct Knn {
    k: Option<usize>,
}

impl Knn {
    pub fn new(k: Option<usize>) -> Self {
        Knn { k }
    }

    pub fn default_k(m: usize) -> usize {
        let inner = (m as f64).powf(2.0 / 3.0).ceil();
        (inner.sqrt().ceil() as usize).max(1)
    }
}

struct FittedKnn {
    x: RowMatrix,
    y: Vec<f64>,
    k: usize,
}

impl Learner for Knn {
    fn fit(&self, x: &RowMatrix, y: &[f64]) -> Result<Box<dyn Regressor>> {
        let m = x.n_rows();
        if m == 0 || m != y.len() {
            return Err(Error::Estimation(format!(
                "knn fit needs matching non-empty data, got {m} rows and {} targets",
                y.len()
            )));
        }
        let k = match self.k {
            Some(0) => return Err(Error::Argument("k must be at least 1".into())),
            Some(k) => k.min(m),
            None => Knn::default_k(m).min(m),
        };
        Ok(Box::new(FittedKnn { x: x.clone(), y: y.to_vec(), k }))
    }
}

impl Regressor for FittedKnn {
    fn predict_one(&self, q: &[f64]) -> f64 {
        let m = self.x.n_rows();
        let mut scored: Vec<(f64, u32)> = Vec::with_capacity(m);
        for i in 0..m {
            let xi = self.x.row(i);
            let mut d2 = 0.0;
            for j in 0..q.len() {
                let dz = q[j] - xi[j];
                d2 += dz * dz;
            }
            scored.push((d2, i as u32));
        }
        let k = self.k.min(m);
        // Ties broken by index so the neighbour set is a total-order prefix.
        scored.select_nth_unstable_by(k - 1, |a, b| {
            a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
        });
        let mut acc = 0.0;
        for &(_, i) in &scored[..k] {
            acc += self.y[i as usize];
        }
        acc / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_nn_is_exact_on_training_grid() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..50).map(|i| (i * i) as f64).collect();
        let x = RowMatrix::from_rows(rows).unwrap();
        let fit = Knn::new(Some(1)).fit(&x, &y).unwrap();
        assert_eq!(fit.predict_one(&[7.0]), 49.0);
        assert_eq!(fit.predict_one(&[7.4]), 49.0);
    }

    #[test]
    fn default_k_grows_slowly() {
        assert_eq!(Knn::default_k(1), 1);
        assert_eq!(Knn::default_k(1000), 10);
    }

    #[test]
    fn constant_target() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let x = RowMatrix::from_rows(rows).unwrap();
        let fit = Knn::new(None).fit(&x, &[4.0; 10]).unwrap();
        assert_eq!(fit.predict_one(&[3.3]), 4.0);
    }
}
