use super::LocalLoss;
use crate::error::{check_dim, CadenError, Result};
use crate::vec_ops::{axpy, dist_sq};
use crate::Scalar;

/// Steps shorter than this make the difference quotient meaningless; such pairs are skipped.
const MIN_STEP: f64 = 1e-15;

/// Full-gradient warm-up followed by a small-step probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzProbe<S> {
    pub warm_epochs: usize,
    pub warm_lr: S,
    pub probe_epochs: usize,
    pub probe_lr: S,
}

impl<S: Scalar> Default for LipschitzProbe<S> {
    fn default() -> Self {
        LipschitzProbe { warm_epochs: 20, warm_lr: S::of(0.1), probe_epochs: 10, probe_lr: S::of(1e-7) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate<S> {
    /// Largest `‖∇f(x⁺) − ∇f(x)‖ / ‖x⁺ − x‖` over consecutive probe iterates.
    pub l_hat: S,
    /// Final probe iterate, used as the algorithm's starting point.
    pub x_init: Vec<S>,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Runs `warm_epochs` gradient steps at `warm_lr`, then `probe_epochs` at
/// `probe_lr`, recording the maximum gradient difference quotient over the
/// probe phase.
pub fn estimate_lipschitz<S: Scalar, L: LocalLoss<S> + ?Sized>(
    f: &L,
    x0: &[S],
    probe: &LipschitzProbe<S>,
) -> Result<LipschitzEstimate<S>> {
    check_dim(f.dim(), x0.len())?;
    if !(probe.probe_lr > S::zero()) || !(probe.warm_lr > S::zero()) {
        return Err(CadenError::InvalidParameter("learning rates must be positive".into()));
    }
    let mut x = x0.to_vec();
    let mut g = vec![S::zero(); x.len()];
    for _ in 0..probe.warm_epochs {
        f.gradient_into(&x, &mut g);
        axpy(-probe.warm_lr, &g, &mut x);
    }

    f.gradient_into(&x, &mut g);
    let mut x_next = x.clone();
    let mut g_next = g.clone();
    let mut best = S::zero();
    let (mut used, mut skipped) = (0, 0);
    for _ in 0..probe.probe_epochs {
        x_next.copy_from_slice(&x);
        axpy(-probe.probe_lr, &g, &mut x_next);
        f.gradient_into(&x_next, &mut g_next);
        let step = dist_sq(&x_next, &x).sqrt();
        if step < S::of(MIN_STEP) {
            skipped += 1;
        } else {
            used += 1;
            best = best.max(dist_sq(&g_next, &g).sqrt() / step);
        }
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut g, &mut g_next);
    }
    if used == 0 {
        return Err(CadenError::LipschitzUndefined);
    }
    Ok(LipschitzEstimate { l_hat: best, x_init: x, pairs_used: used, pairs_skipped: skipped })
}

#[cfg(test)]
mod tests {
    use super::super::{gaussian_blobs, BlobSpec, Mlp, MlpShape, Quadratic};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn probe_only(epochs: usize) -> LipschitzProbe<f64> {
        LipschitzProbe { warm_epochs: 0, warm_lr: 0.1, probe_epochs: epochs, probe_lr: 1e-7 }
    }

    #[test]
    fn stiff_direction_dominates() {
        // Starting mostly along the stiff axis, the quotient ‖Q²x‖/‖Qx‖ is just below 10.
        let f = Quadratic::diagonal(&[1.0, 10.0], vec![0.0, 0.0]).unwrap();
        let est = estimate_lipschitz(&f, &[0.1, 1.0], &probe_only(10)).unwrap();
        assert!(est.l_hat >= 9.99 && est.l_hat <= 10.0, "{}", est.l_hat);
        assert_eq!(est.pairs_used, 10);
    }

    #[test]
    fn identity_quotients_are_one() {
        let f = Quadratic::<f64>::isotropic(vec![1.0, -2.0, 0.5]);
        let est = estimate_lipschitz(&f, &[3.0, 3.0, 3.0], &LipschitzProbe::default()).unwrap();
        assert!((est.l_hat - 1.0).abs() < 1e-9);
    }

    #[test]
    fn never_exceeds_largest_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let diag: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..20.0)).collect();
            let top = diag.iter().copied().fold(0.0, f64::max);
            let f = Quadratic::diagonal(&diag, vec![0.0; 4]).unwrap();
            let x0: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let probe = LipschitzProbe { warm_epochs: 3, warm_lr: 0.01, probe_epochs: 10, probe_lr: 1e-7 };
            let est = estimate_lipschitz(&f, &x0, &probe).unwrap();
            assert!(est.l_hat <= top + 1e-9);
        }
    }

    #[test]
    fn stalled_probe_is_an_error() {
        let f = Quadratic::isotropic(vec![0.0, 0.0]);
        assert!(matches!(
            estimate_lipschitz(&f, &[0.0, 0.0], &probe_only(5)),
            Err(CadenError::LipschitzUndefined)
        ));
    }

    #[test]
    fn mlp_estimate_is_finite() {
        let shape = MlpShape { inputs: 4, hidden: 8, outputs: 3 };
        let data = gaussian_blobs::<f64>(BlobSpec { samples: 60, classes: 3, features: 4, ..Default::default() }, 3);
        let f = Mlp::new(shape, data, 0.0).unwrap();
        let est = estimate_lipschitz(&f, &shape.init_params(1), &LipschitzProbe::default()).unwrap();
        assert!(est.l_hat > 0.0 && est.l_hat.is_finite());
        assert_eq!(est.x_init.len(), shape.num_params());
    }
}
