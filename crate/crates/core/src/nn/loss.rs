use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Lower bound applied to probabilities inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-30;

/// Numerically stable softmax: the maximum is subtracted before
/// exponentiation, so no entry can overflow.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "softmax input entry {i} is {}",
            v[i]
        )));
    }
    let mut out = v.to_vec();
    softmax_inplace(&mut out);
    Ok(out)
}

/// In-place variant without the finiteness check; callers guarantee it.
pub fn softmax_inplace(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Cross-entropy value plus the number of target-supported entries whose
/// probability had to be raised to [`PROB_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub value: f64,
    pub floored: usize,
}

/// Categorical cross-entropy `−Σ sᵢ ln pᵢ` in nats.
pub fn cross_entropy(target: &[f64], predicted: &[f64]) -> Result<CrossEntropy> {
    if target.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "cross-entropy length mismatch: target {} vs predicted {}",
            target.len(),
            predicted.len()
        )));
    }
    let mut value = 0.0;
    let mut floored = 0;
    for (&s, &p) in target.iter().zip(predicted) {
        if s == 0.0 {
            continue;
        }
        let p = if p < PROB_FLOOR {
            floored += 1;
            PROB_FLOOR
        } else {
            p
        };
        value -= s * p.ln();
    }
    Ok(CrossEntropy { value, floored })
}

/// Mean cross-entropy over the rows of a batch.
pub fn mean_cross_entropy(targets: &Matrix, predicted: &Matrix) -> Result<CrossEntropy> {
    if targets.shape() != predicted.shape() {
        return Err(Error::Shape {
            context: "mean_cross_entropy",
            left_rows: targets.rows(),
            left_cols: targets.cols(),
            right_rows: predicted.rows(),
            right_cols: predicted.cols(),
        });
    }
    let mut total = 0.0;
    let mut floored = 0;
    for (s, p) in targets.iter_rows().zip(predicted.iter_rows()) {
        let ce = cross_entropy(s, p)?;
        total += ce.value;
        floored += ce.floored;
    }
    Ok(CrossEntropy {
        value: total / targets.rows() as f64,
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar softmax evaluated term by term without max-subtraction.
    fn naive_softmax(v: &[f64]) -> Vec<f64> {
        let z: f64 = v.iter().map(|x| x.exp()).sum();
        v.iter().map(|x| x.exp() / z).collect()
    }

    #[test]
    fn uniform_on_equal_inputs() {
        assert_eq!(softmax(&[0.0; 4]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn ratio_two() {
        let c = 3.7;
        let p = softmax(&[c, c + 2f64.ln()]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn matches_direct_evaluation() {
        let p = softmax(&[1.0, 1.0, 2.0]).unwrap();
        let oracle = naive_softmax(&[1.0, 1.0, 2.0]);
        for (a, b) in p.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        let frozen = [
            0.211_941_557_617_085_4,
            0.211_941_557_617_085_4,
            0.576_116_884_765_829_1,
        ];
        for (a, b) in p.iter().zip(&frozen) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn large_inputs_do_not_overflow() {
        let p = softmax(&[1000.0, 1000.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(
            softmax(&[0.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn cross_entropy_examples() {
        let mut s = vec![0.0; 8];
        s[3] = 1.0;
        let uniform = vec![1.0 / 8.0; 8];
        let ce = cross_entropy(&s, &uniform).unwrap();
        assert!((ce.value - 8f64.ln()).abs() < 1e-15);

        let gdr = [0.5, 0.0, 0.5, 0.0];
        let ce = cross_entropy(&gdr, &gdr).unwrap();
        assert!((ce.value - 2f64.ln()).abs() < 1e-15);

        let p = [0.05, 0.9, 0.05];
        let ce = cross_entropy(&[0.0, 1.0, 0.0], &p).unwrap();
        assert!((ce.value - 0.105_360_515_657_826_3).abs() < 1e-15);
        assert_eq!(ce.floored, 0);
    }

    #[test]
    fn zero_probability_is_floored_and_flagged() {
        let ce = cross_entropy(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(ce.floored, 1);
        assert!((ce.value - (-PROB_FLOOR.ln())).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn prob_vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-5.0f64..5.0, len).prop_map(|v| naive_softmax(&v))
        }

        proptest! {
            #[test]
            fn sums_to_one_and_shift_invariant(
                v in prop::collection::vec(-50.0f64..50.0, 1..20),
                c in -100.0f64..100.0,
            ) {
                let p = softmax(&v).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
                let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
                let q = softmax(&shifted).unwrap();
                for (a, b) in p.iter().zip(&q) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }

            #[test]
            fn gibbs_inequality((s, p) in (2usize..12).prop_flat_map(|n| (prob_vector(n), prob_vector(n)))) {
                let cross = cross_entropy(&s, &p).unwrap().value;
                let entropy = cross_entropy(&s, &s).unwrap().value;
                prop_assert!(cross - entropy >= -1e-12);
            }
        }
    }
}
