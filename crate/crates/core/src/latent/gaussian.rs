use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Lower bound applied to encoder variances after exponentiation.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Diagonal Gaussian given by its mean and per-dimension log-variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.len() != log_var.len() {
            return Err(Error::DimensionMismatch {
                what: "gaussian log-variance",
                expected: mean.len(),
                actual: log_var.len(),
            });
        }
        if mean.iter().chain(&log_var).any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence("gaussian parameters".into()));
        }
        Ok(GaussianParams { mean, log_var })
    }

    /// Isotropic Gaussian with the given variance.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if variance <= 0.0 {
            return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
        }
        let lv = vec![variance.ln(); mean.len()];
        GaussianParams::new(mean, lv)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.log_var.iter().map(|lv| lv.exp().max(VARIANCE_FLOOR)).collect()
    }
}

/// `KL(q || N(prior_mean, prior_var I))`, summed over dimensions:
/// `log(s_p / s_q) + (s_q^2 + (m_q - m_p)^2) / (2 s_p^2) - 1/2` per dimension.
pub fn kl_gaussian(q: &GaussianParams, prior_mean: &[f64], prior_var: f64) -> Result<f64> {
    if prior_mean.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            what: "prior mean",
            expected: q.dim(),
            actual: prior_mean.len(),
        });
    }
    if !(prior_var > 0.0) {
        return Err(Error::InvalidArgument(format!("prior variance must be positive, got {prior_var}")));
    }
    let log_pv = prior_var.ln();
    let kl = q
        .mean
        .iter()
        .zip(q.variance())
        .zip(prior_mean)
        .map(|((&mq, vq), &mp)| 0.5 * (log_pv - vq.ln()) + (vq + (mq - mp) * (mq - mp)) / (2.0 * prior_var) - 0.5)
        .sum::<f64>();
    // the closed form is >= 0; clip rounding noise around zero
    Ok(kl.max(0.0))
}

/// Reparameterized draw `mean + sigma * eps`, `eps ~ N(0, I)`.
pub fn sample_gaussian<R: Rng + ?Sized>(params: &GaussianParams, rng: &mut R) -> Vec<f64> {
    params
        .mean
        .iter()
        .zip(params.variance())
        .map(|(&m, v)| {
            let eps: f64 = StandardNormal.sample(rng);
            m + v.sqrt() * eps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn kl_examples() {
        let q = GaussianParams::isotropic(vec![0.3, -0.2], 1.7).unwrap();
        assert!(kl_gaussian(&q, &[0.3, -0.2], 1.7).unwrap().abs() <= 1e-12);
        let q = GaussianParams::new(vec![1.0], vec![0.0]).unwrap();
        assert!((kl_gaussian(&q, &[0.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(kl_gaussian(&q, &[0.0], 0.0).is_err());
        assert!(kl_gaussian(&q, &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_floored() {
        let p = GaussianParams::new(vec![1.0, -2.0], vec![-60.0, -60.0]).unwrap();
        let s = sample_gaussian(&p, &mut seeded(1));
        assert_eq!(s, sample_gaussian(&p, &mut seeded(1)));
        // sigma = sqrt(1e-6) at the floor
        assert!((s[0] - 1.0).abs() < 1e-2 && (s[1] + 2.0).abs() < 1e-2);
    }

    #[test]
    fn sample_moments_law_of_large_numbers() {
        let p = GaussianParams::new(vec![2.0, -1.0, 0.5], vec![(4.0f64).ln(), (0.25f64).ln(), 0.0]).unwrap();
        let mut rng = seeded(77);
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let s = sample_gaussian(&p, &mut rng);
            for i in 0..3 {
                sum[i] += s[i];
                sq[i] += s[i] * s[i];
            }
        }
        let var = p.variance();
        for i in 0..3 {
            let m = sum[i] / n as f64;
            let v = sq[i] / n as f64 - m * m;
            assert!((m - p.mean[i]).abs() <= 0.01 * p.mean[i].abs(), "mean {i}: {m}");
            assert!((v - var[i]).abs() <= 0.01 * var[i], "var {i}: {v}");
        }
    }

    proptest::proptest! {
        #[test]
        fn kl_nonnegative_and_zero_iff_equal(
            mq in proptest::collection::vec(-3.0f64..3.0, 4),
            lv in proptest::collection::vec(-3.0f64..3.0, 4),
            mp in proptest::collection::vec(-3.0f64..3.0, 4),
            pv in 0.1f64..4.0,
        ) {
            let q = GaussianParams::new(mq.clone(), lv.clone()).unwrap();
            let kl = kl_gaussian(&q, &mp, pv).unwrap();
            proptest::prop_assert!(kl >= 0.0);
            let same = GaussianParams::new(mp.clone(), vec![pv.ln(); 4]).unwrap();
            proptest::prop_assert!(kl_gaussian(&same, &mp, pv).unwrap() <= 1e-9);
            let dist: f64 = mq.iter().zip(&mp).map(|(a, b)| (a - b).abs()).sum::<f64>()
                + lv.iter().map(|l| (l - pv.ln()).abs()).sum::<f64>();
            if dist > 1e-3 {
                proptest::prop_assert!(kl > 0.0);
            }
        }
    }
}
