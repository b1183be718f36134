use crate::error::{Error, Result};
use crate::tensor::{binary_cross_entropy, Element, Tensor};

fn check_lengths(n: usize, labels: usize, valid: usize) -> Result<()> {
    if labels != n || valid != n {
        return Err(Error::Usage(format!("{n} scores, {labels} labels, {valid} mask entries")));
    }
    Ok(())
}

/// Mean clamped binary cross-entropy over valid edges.
pub fn bce_loss<T: Element>(scores: &Tensor<T>, labels: &[u8], valid: &[bool]) -> Result<f64> {
    check_lengths(scores.numel(), labels.len(), valid.len())?;
    let y: Vec<T> = labels.iter().map(|&l| T::from_f64(l as f64)).collect();
    Ok(binary_cross_entropy(scores.data(), &y, valid)?.as_f64())
}

/// Area under the ROC curve as the exact rank statistic
/// `(concordant + ties / 2) / (positives * negatives)` over valid entries.
pub fn auc(scores: &[f64], labels: &[u8], valid: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), labels.len(), valid.len())?;
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(scores.len());
    for i in 0..scores.len() {
        if valid[i] {
            if scores[i].is_nan() {
                return Err(Error::Data(format!("score {i} is NaN")));
            }
            pairs.push((scores[i], labels[i] == 1));
        }
    }
    let positives = pairs.iter().filter(|p| p.1).count() as f64;
    let negatives = pairs.len() as f64 - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes among valid edges ({positives} positive, {negatives} negative)"
        )));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut concordant, mut ties, mut neg_below) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0.0, 0.0);
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 {
                pos += 1.0;
            } else {
                neg += 1.0;
            }
            j += 1;
        }
        concordant += pos * neg_below;
        ties += pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok((concordant + 0.5 * ties) / (positives * negatives))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(n: usize) -> Vec<bool> {
        vec![true; n]
    }

    #[test]
    fn half_probability_costs_ln2() {
        let s = Tensor::<f64>::from_f64(&[2], &[0.5, 0.5]).unwrap();
        assert!((bce_loss(&s, &[1, 0], &all(2)).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let exact = Tensor::<f64>::from_f64(&[2], &[1.0, 0.0]).unwrap();
        assert!(bce_loss(&exact, &[1, 0], &all(2)).unwrap() < 1e-6);
        assert!(bce_loss(&s, &[1, 0], &[false, false]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0], &all(2)).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.3], &[1, 0, 1], &all(3)).unwrap(), 0.5);
        assert_eq!(auc(&[0.4; 5], &[1, 0, 1, 0, 0], &all(5)).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1], &all(2)), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn masked_entries_are_ignored() {
        let a = auc(&[0.9, 0.1, 0.95], &[1, 0, 0], &[true, true, false]).unwrap();
        assert_eq!(a, 1.0);
    }
}
