use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, LocalLoss};
use crate::error::{CadenError, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl MlpShape {
    /// `hidden·inputs + hidden + outputs·hidden + outputs`
    pub fn num_params(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
    }

    /// He-normal weights, zero biases.
    pub fn init_params<S: Scalar>(&self, seed: u64) -> Vec<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = Normal::new(0.0, (2.0 / self.inputs as f64).sqrt()).expect("positive fan-in");
        let w2 = Normal::new(0.0, (2.0 / self.hidden as f64).sqrt()).expect("positive fan-in");
        let mut p = Vec::with_capacity(self.num_params());
        p.extend((0..self.hidden * self.inputs).map(|_| S::of(w1.sample(&mut rng))));
        p.extend((0..self.hidden).map(|_| S::zero()));
        p.extend((0..self.outputs * self.hidden).map(|_| S::of(w2.sample(&mut rng))));
        p.extend((0..self.outputs).map(|_| S::zero()));
        p
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        [w1, b1, w2, b2]
    }
}

/// Two fully connected layers, ReLU hidden activation, softmax cross-entropy
/// averaged over the shard, plus `(l2/2)‖x‖²`.
///
/// Parameter layout: `W1` (hidden × inputs, row-major), `b1`, `W2`
/// (outputs × hidden, row-major), `b2`.
#[derive(Debug, Clone)]
pub struct Mlp<S> {
    shape: MlpShape,
    data: Dataset<S>,
    l2: S,
}

struct Forward<S> {
    pre: Vec<S>,
    hidden: Vec<S>,
    logits: Vec<S>,
}

impl<S: Scalar> Mlp<S> {
    pub fn new(shape: MlpShape, data: Dataset<S>, l2: S) -> Result<Self> {
        if data.num_features() != shape.inputs || data.num_classes() != shape.outputs {
            return Err(CadenError::InvalidParameter(format!(
                "dataset has {} features / {} classes, network expects {} / {}",
                data.num_features(),
                data.num_classes(),
                shape.inputs,
                shape.outputs
            )));
        }
        if data.is_empty() {
            return Err(CadenError::InvalidParameter("empty shard".into()));
        }
        Ok(Mlp { shape, data, l2 })
    }

    pub fn shape(&self) -> MlpShape {
        self.shape
    }

    fn forward(&self, x: &[S], input: &[S]) -> Forward<S> {
        let MlpShape { inputs, hidden, outputs } = self.shape;
        let [w1, b1, w2, b2] = self.shape.offsets();
        let pre: Vec<S> = (0..hidden)
            .map(|h| crate::vec_ops::dot(&x[w1 + h * inputs..w1 + (h + 1) * inputs], input) + x[b1 + h])
            .collect();
        let act: Vec<S> = pre.iter().map(|&v| v.max(S::zero())).collect();
        let logits = (0..outputs)
            .map(|o| crate::vec_ops::dot(&x[w2 + o * hidden..w2 + (o + 1) * hidden], &act) + x[b2 + o])
            .collect();
        Forward { pre, hidden: act, logits }
    }
}

fn log_sum_exp<S: Scalar>(v: &[S]) -> S {
    let m = v.iter().copied().fold(S::neg_infinity(), S::max);
    m + v.iter().map(|&z| (z - m).exp()).sum::<S>().ln()
}

impl<S: Scalar> LocalLoss<S> for Mlp<S> {
    fn dim(&self) -> usize {
        self.shape.num_params()
    }

    fn value(&self, x: &[S]) -> S {
        let ce: S = self
            .data
            .samples()
            .map(|(input, label)| {
                let fw = self.forward(x, input);
                log_sum_exp(&fw.logits) - fw.logits[label]
            })
            .sum();
        ce / S::of(self.data.len() as f64) + S::of(0.5) * self.l2 * crate::vec_ops::norm_sq(x)
    }

    fn gradient_into(&self, x: &[S], grad: &mut [S]) {
        self.value_and_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[S], grad: &mut [S]) -> S {
        let MlpShape { inputs, hidden, outputs } = self.shape;
        let [w1, b1, w2, b2] = self.shape.offsets();
        grad.iter_mut().for_each(|g| *g = S::zero());
        let inv_n = S::one() / S::of(self.data.len() as f64);
        let mut ce = S::zero();
        let mut delta_out = vec![S::zero(); outputs];
        let mut delta_hidden = vec![S::zero(); hidden];
        for (input, label) in self.data.samples() {
            let fw = self.forward(x, input);
            let lse = log_sum_exp(&fw.logits);
            ce += lse - fw.logits[label];
            for (o, d) in delta_out.iter_mut().enumerate() {
                *d = ((fw.logits[o] - lse).exp() - if o == label { S::one() } else { S::zero() }) * inv_n;
            }
            delta_hidden.iter_mut().for_each(|d| *d = S::zero());
            for (o, &d) in delta_out.iter().enumerate() {
                let row = w2 + o * hidden;
                crate::vec_ops::axpy(d, &fw.hidden, &mut grad[row..row + hidden]);
                grad[b2 + o] += d;
                crate::vec_ops::axpy(d, &x[row..row + hidden], &mut delta_hidden);
            }
            for (h, d) in delta_hidden.iter().enumerate() {
                if fw.pre[h] > S::zero() {
                    let row = w1 + h * inputs;
                    crate::vec_ops::axpy(*d, input, &mut grad[row..row + inputs]);
                    grad[b1 + h] += *d;
                }
            }
        }
        crate::vec_ops::axpy(self.l2, x, grad);
        ce * inv_n + S::of(0.5) * self.l2 * crate::vec_ops::norm_sq(x)
    }

    fn predict(&self, x: &[S], features: &[S]) -> Option<usize> {
        let logits = self.forward(x, features).logits;
        // First maximum wins, so an all-equal output predicts class 0.
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        Some(best)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{finite_difference, relative_error};
    use super::super::{accuracy, eval_gradient, gaussian_blobs, BlobSpec};
    use super::*;
    use rand::{Rng, SeedableRng};

    fn net(seed: u64) -> Mlp<f64> {
        let data = gaussian_blobs(BlobSpec { samples: 30, classes: 3, features: 4, ..Default::default() }, seed);
        Mlp::new(MlpShape { inputs: 4, hidden: 6, outputs: 3 }, data, 1e-3).unwrap()
    }

    #[test]
    fn parameter_count() {
        let s = MlpShape { inputs: 8, hidden: 40, outputs: 3 };
        assert_eq!(s.num_params(), 483);
        assert_eq!(s.init_params::<f64>(0).len(), 483);
        assert_eq!(net(0).dim(), 4 * 6 + 6 + 3 * 6 + 3);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = net(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let mut x: Vec<f64> = f.shape().init_params(trial);
            for v in x.iter_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
            let g = eval_gradient(&f, &x).unwrap();
            let err = relative_error(&g, &finite_difference(&f, &x));
            assert!(err <= 1e-5, "trial {trial}: relative error {err}");
            let mut g2 = vec![0.0; x.len()];
            let v = f.value_and_gradient(&x, &mut g2);
            assert!((v - f.value(&x)).abs() <= 1e-12 * v.abs());
            assert!(relative_error(&g, &g2) <= 1e-12);
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn zero_weights_predict_uniformly() {
        let data: Dataset<f64> =
            gaussian_blobs(BlobSpec { samples: 1000, classes: 10, features: 5, ..Default::default() }, 2);
        let f = Mlp::new(MlpShape { inputs: 5, hidden: 4, outputs: 10 }, data.clone(), 0.0).unwrap();
        let zero = vec![0.0; f.dim()];
        assert!((f.value(&zero) - 10f64.ln()).abs() < 1e-12);
        let acc = accuracy(&f, &zero, &data).unwrap();
        assert!((acc - 0.1).abs() <= 0.03);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let data: Dataset<f64> = gaussian_blobs(BlobSpec::default(), 0);
        assert!(Mlp::new(MlpShape { inputs: 3, hidden: 4, outputs: 3 }, data, 0.0).is_err());
    }
}
