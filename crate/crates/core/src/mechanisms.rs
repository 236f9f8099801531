//! Primitive noise mechanisms and a Renyi-divergence utility.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

/// Global sensitivity of a query under the given norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub value: f64,
    pub norm: Norm,
}

impl Sensitivity {
    pub fn l1(value: f64) -> Self {
        Self { value, norm: Norm::L1 }
    }

    pub fn l2(value: f64) -> Self {
        Self { value, norm: Norm::L2 }
    }

    fn require(&self, norm: Norm) -> Result<()> {
        if self.norm != norm {
            return Err(invalid(format!("expected {norm:?} sensitivity, got {:?}", self.norm)));
        }
        if !(self.value > 0.0 && self.value.is_finite()) {
            return Err(invalid("sensitivity must be finite and > 0"));
        }
        Ok(())
    }
}

/// `beta = sensitivity / epsilon`.
pub fn laplace_scale(sens: Sensitivity, epsilon: f64) -> Result<f64> {
    sens.require(Norm::L1)?;
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    Ok(sens.value / epsilon)
}

/// One Laplace(0, scale) draw by inverting the CDF of a uniform draw.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u = loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if u != -0.5 {
            break u;
        }
    };
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Adds independent Laplace noise of scale `sens / epsilon` to every value.
pub fn laplace_perturb<R: Rng + ?Sized>(
    values: &[f64],
    sens: Sensitivity,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let scale = laplace_scale(sens, epsilon)?;
    if scale == 0.0 {
        return Ok(values.to_vec());
    }
    Ok(values.iter().map(|v| v + sample_laplace(scale, rng)).collect())
}

/// Adds independent Gaussian noise of standard deviation `sens * sigma`.
pub fn gaussian_perturb<R: Rng + ?Sized>(
    values: &[f64],
    sens: Sensitivity,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    sens.require(Norm::L2)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise multiplier must be > 0, got {sigma}")));
    }
    let std = sens.value * sigma;
    Ok(values
        .iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v + std * z
        })
        .collect())
}

/// Exponential-mechanism selection probabilities,
/// `Pr(i) ∝ exp(epsilon * u_i / (2 sens))`, normalized in log space.
pub fn exponential_probs(utilities: &[f64], sens: Sensitivity, epsilon: f64) -> Result<Vec<f64>> {
    if utilities.is_empty() {
        return Err(invalid("exponential mechanism needs at least one candidate"));
    }
    sens.require(Norm::L1)?;
    if !(epsilon >= 0.0) {
        return Err(invalid("epsilon must be >= 0"));
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite("utilities"));
    }
    let logits: Vec<f64> = utilities
        .iter()
        .map(|u| epsilon * u / (2.0 * sens.value))
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `D_alpha(p || q) = ln(sum_x q(x) (p(x)/q(x))^alpha) / (alpha - 1)`.
///
/// Returns `+inf` when `p` puts mass where `q` has none.
pub fn renyi_divergence(p: &[f64], q: &[f64], alpha: f64) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(invalid("distributions must share a non-empty support"));
    }
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(invalid("Renyi order must be > 1"));
    }
    for dist in [p, q] {
        let total: f64 = dist.iter().sum();
        if dist.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(invalid("not a probability distribution"));
        }
    }
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        sum += qi * (pi / qi).powf(alpha);
    }
    Ok((sum.ln() / (alpha - 1.0)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplace_scale_is_sensitivity_over_epsilon() {
        assert_eq!(laplace_scale(Sensitivity::l1(1.0), 2.0).unwrap(), 0.5);
        assert!(laplace_scale(Sensitivity::l1(1.0), 0.0).is_err());
        assert!(laplace_scale(Sensitivity::l2(1.0), 1.0).is_err());
    }

    #[test]
    fn laplace_without_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = [0.1, 0.7, -3.0];
        assert_eq!(laplace_perturb(&v, Sensitivity::l1(1.0), f64::INFINITY, &mut rng).unwrap(), v);
    }

    #[test]
    fn laplace_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let zeros = vec![0.0; n];
        let noisy = laplace_perturb(&zeros, Sensitivity::l1(1.0), 2.0, &mut rng).unwrap();
        let var = noisy.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var - 0.5).abs() / 0.5 < 0.02, "var = {var}");
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let consts = vec![3.0; n];
        let noisy = gaussian_perturb(&consts, Sensitivity::l2(1.0), 2.0, &mut rng).unwrap();
        let mean = noisy.iter().sum::<f64>() / n as f64;
        let std = (noisy.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((std - 2.0).abs() / 2.0 < 0.01, "std = {std}");
        assert!((mean - 3.0).abs() < 3.0 * 2.0 / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn gaussian_small_sigma_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = [1.0, 2.0];
        let out = gaussian_perturb(&v, Sensitivity::l2(1.0), 1e-300, &mut rng).unwrap();
        assert_eq!(out, v);
        assert!(gaussian_perturb(&v, Sensitivity::l2(1.0), 0.0, &mut rng).is_err());
        assert!(gaussian_perturb(&v, Sensitivity::l1(1.0), 1.0, &mut rng).is_err());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let v = vec![0.0; 64];
        let a = laplace_perturb(&v, Sensitivity::l1(1.0), 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = laplace_perturb(&v, Sensitivity::l1(1.0), 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let c = gaussian_perturb(&v, Sensitivity::l2(1.0), 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let d = gaussian_perturb(&v, Sensitivity::l2(1.0), 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn exponential_dilution_example() {
        let p = exponential_probs(&[0.1, 0.5, 1.0], Sensitivity::l1(1.0), 0.01).unwrap();
        for (got, want) in p.iter().zip([0.3325, 0.3333, 0.3342]) {
            assert!((got - want).abs() <= 5e-4, "{p:?}");
        }
    }

    #[test]
    fn exponential_degenerate_cases() {
        let u = [0.3, 5.0, -2.0, 1.0];
        let p = exponential_probs(&u, Sensitivity::l1(1.0), 0.0).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let p = exponential_probs(&[2.0; 5], Sensitivity::l1(0.5), 3.0).unwrap();
        assert!(p.iter().all(|x| (x - 0.2).abs() < 1e-15));
        let p = exponential_probs(&[0.0, 1e6], Sensitivity::l1(1.0), 100.0).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
        assert!(exponential_probs(&[], Sensitivity::l1(1.0), 1.0).is_err());
    }

    #[test]
    fn renyi_examples() {
        let p = [0.2, 0.3, 0.5];
        assert!(renyi_divergence(&p, &p, 3.0).unwrap().abs() < 1e-15);
        let d = renyi_divergence(&[1.0, 0.0], &[0.5, 0.5], 2.0).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-15);
        assert_eq!(renyi_divergence(&[0.5, 0.5], &[1.0, 0.0], 2.0).unwrap(), f64::INFINITY);
        assert!(renyi_divergence(&p, &p, 1.0).is_err());
        assert!(renyi_divergence(&[0.5, 0.6], &p[..2], 2.0).is_err());
    }

    #[test]
    fn renyi_nondecreasing_in_order() {
        let p = [0.6, 0.3, 0.1];
        let q = [0.2, 0.5, 0.3];
        let ds: Vec<f64> = [1.1, 1.5, 2.0, 4.0, 10.0, 50.0]
            .iter()
            .map(|&a| renyi_divergence(&p, &q, a).unwrap())
            .collect();
        assert!(ds.windows(2).all(|w| w[1] >= w[0]), "{ds:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn exponential_probs_is_a_shift_invariant_distribution(
                u in proptest::collection::vec(-10.0f64..10.0, 1..20),
                eps in 0.0f64..20.0,
                shift in -100.0f64..100.0,
            ) {
                let sens = Sensitivity::l1(1.0);
                let p = exponential_probs(&u, sens, eps).unwrap();
                prop_assert!(p.iter().all(|x| *x >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let shifted: Vec<f64> = u.iter().map(|x| x + shift).collect();
                let ps = exponential_probs(&shifted, sens, eps).unwrap();
                for (a, b) in p.iter().zip(&ps) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
