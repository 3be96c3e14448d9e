//! Classification scores, ROC analysis, the 0/1 bias indicator and
//! correctness-based ensemble diversity measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which class(es) precision, recall and F1 are computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Average {
    /// One designated positive class.
    Binary(usize),
    /// Unweighted mean over `0..n_classes`.
    Macro(usize),
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(ratio(hits, truth.len()))
}

/// `(tp, fp, fn)` for one class.
fn confusion(pred: &[usize], truth: &[usize], class: usize) -> (usize, usize, usize) {
    pred.iter().zip(truth).fold((0, 0, 0), |(tp, fp, fnn), (&p, &t)| {
        match (p == class, t == class) {
            (true, true) => (tp + 1, fp, fnn),
            (true, false) => (tp, fp + 1, fnn),
            (false, true) => (tp, fp, fnn + 1),
            (false, false) => (tp, fp, fnn),
        }
    })
}

fn per_class(
    pred: &[usize],
    truth: &[usize],
    average: Average,
    score: impl Fn(usize, usize, usize) -> f64,
) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    Ok(match average {
        Average::Binary(c) => {
            let (tp, fp, fnn) = confusion(pred, truth, c);
            score(tp, fp, fnn)
        }
        Average::Macro(k) => {
            if k == 0 {
                return Ok(0.0);
            }
            (0..k)
                .map(|c| {
                    let (tp, fp, fnn) = confusion(pred, truth, c);
                    score(tp, fp, fnn)
                })
                .sum::<f64>()
                / k as f64
        }
    })
}

pub fn precision(pred: &[usize], truth: &[usize], average: Average) -> Result<f64> {
    per_class(pred, truth, average, |tp, fp, _| ratio(tp, tp + fp))
}

pub fn recall(pred: &[usize], truth: &[usize], average: Average) -> Result<f64> {
    per_class(pred, truth, average, |tp, _, fnn| ratio(tp, tp + fnn))
}

pub fn f1(pred: &[usize], truth: &[usize], average: Average) -> Result<f64> {
    per_class(pred, truth, average, |tp, fp, fnn| ratio(2 * tp, 2 * tp + fp + fnn))
}

/// ROC curve points `(fpr, tpr)` from the highest threshold down, one point
/// per distinct score, starting at `(0, 0)`.
pub fn roc_curve(scores: &[f64], truth: &[usize], positive: usize) -> Result<Vec<(f64, f64)>> {
    check_lengths(scores.len(), truth.len())?;
    let pos = truth.iter().filter(|&&t| t == positive).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        if truth[i] == positive {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    Ok(points)
}

/// Area under the ROC curve with tied scores counted as one half
/// (identical to the trapezoidal area of [`roc_curve`]).
pub fn roc_auc(scores: &[f64], truth: &[usize], positive: usize) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    let pos = truth.iter().filter(|&&t| t == positive).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks (1-based), summed over positives.
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let midrank = (k + 1 + end) as f64 / 2.0;
        rank_sum += midrank * order[k..end].iter().filter(|&&i| truth[i] == positive).count() as f64;
        k = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// One-vs-rest AUC per class; `scores[c][i]` is the score of class `c` for sample `i`.
/// Classes absent from `truth` (or present everywhere) yield `None`.
pub fn roc_auc_ovr(scores: &[Vec<f64>], truth: &[usize]) -> Result<Vec<Option<f64>>> {
    scores
        .iter()
        .enumerate()
        .map(|(c, s)| match roc_auc(s, truth, c) {
            Ok(v) => Ok(Some(v)),
            Err(Error::SingleClass) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// 0 when the prediction is right, 1 otherwise.
pub fn bias_indicator(prediction: usize, truth: usize) -> u8 {
    u8::from(prediction != truth)
}

/// Per-learner predictions (rows) against a shared truth vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    predictions: Vec<Vec<usize>>,
    truth: Vec<usize>,
    n_classes: usize,
}

impl PredictionMatrix {
    pub fn new(predictions: Vec<Vec<usize>>, truth: Vec<usize>, n_classes: usize) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::TooFewLearners { needed: 1, found: 0 });
        }
        for row in &predictions {
            check_lengths(row.len(), truth.len())?;
        }
        Ok(Self {
            predictions,
            truth,
            n_classes,
        })
    }

    pub fn predictions(&self) -> &[Vec<usize>] {
        &self.predictions
    }

    pub fn truth(&self) -> &[usize] {
        &self.truth
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_learners(&self) -> usize {
        self.predictions.len()
    }

    /// `correct[l][j]`: learner `l` is right on sample `j`.
    pub fn correctness(&self) -> Vec<Vec<bool>> {
        self.predictions
            .iter()
            .map(|row| row.iter().zip(&self.truth).map(|(p, t)| p == t).collect())
            .collect()
    }
}

/// Mean 0/1 error over every (learner, sample) cell.
pub fn average_ensemble_bias(m: &PredictionMatrix) -> f64 {
    let cells = m.n_learners() * m.truth.len();
    let errors: usize = m
        .predictions
        .iter()
        .map(|row| {
            row.iter()
                .zip(&m.truth)
                .map(|(&p, &t)| usize::from(bias_indicator(p, t)))
                .sum::<usize>()
        })
        .sum();
    ratio(errors, cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub q_statistic: f64,
    pub disagreement: f64,
    pub double_fault: f64,
    pub kohavi_wolpert: f64,
    pub entropy: f64,
    pub generalized_diversity: f64,
}

/// The six Kuncheva-Whitaker measures over learner correctness.
///
/// Pairwise measures are averaged over all unordered learner pairs; a pair
/// whose Q denominator vanishes contributes 0. Generalized diversity is 0
/// when no learner ever errs.
pub fn diversity_measures(m: &PredictionMatrix) -> Result<DiversityReport> {
    let l = m.n_learners();
    if l < 2 {
        return Err(Error::TooFewLearners { needed: 2, found: l });
    }
    let n = m.truth.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let correct = m.correctness();

    let (mut q, mut dis, mut df) = (0.0, 0.0, 0.0);
    for i in 0..l {
        for k in i + 1..l {
            let (mut n11, mut n10, mut n01, mut n00) = (0usize, 0usize, 0usize, 0usize);
            for j in 0..n {
                match (correct[i][j], correct[k][j]) {
                    (true, true) => n11 += 1,
                    (true, false) => n10 += 1,
                    (false, true) => n01 += 1,
                    (false, false) => n00 += 1,
                }
            }
            let num = (n11 * n00) as f64 - (n01 * n10) as f64;
            let den = (n11 * n00) as f64 + (n01 * n10) as f64;
            q += if den == 0.0 { 0.0 } else { num / den };
            dis += (n01 + n10) as f64 / n as f64;
            df += n00 as f64 / n as f64;
        }
    }
    let pairs = (l * (l - 1) / 2) as f64;

    let lf = l as f64;
    let votes: Vec<usize> = (0..n).map(|j| (0..l).filter(|&i| correct[i][j]).count()).collect();
    let kw = votes.iter().map(|&v| (v * (l - v)) as f64).sum::<f64>() / (n as f64 * lf * lf);
    let entropy_den = (l - l.div_ceil(2)) as f64;
    let entropy = votes.iter().map(|&v| v.min(l - v) as f64 / entropy_den).sum::<f64>() / n as f64;

    // p(1), p(2): chance that one / two distinct random learners fail on a random sample.
    let (mut p1, mut p2) = (0.0, 0.0);
    for &v in &votes {
        let fails = (l - v) as f64;
        p1 += fails / lf;
        p2 += fails * (fails - 1.0) / (lf * (lf - 1.0));
    }
    p1 /= n as f64;
    p2 /= n as f64;
    let gd = if p1 == 0.0 { 0.0 } else { 1.0 - p2 / p1 };

    Ok(DiversityReport {
        q_statistic: q / pairs,
        disagreement: dis / pairs,
        double_fault: df / pairs,
        kohavi_wolpert: kw,
        entropy,
        generalized_diversity: gd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_classifier_scores_one() {
        let t = [0, 1, 1, 0, 1];
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        for avg in [Average::Binary(1), Average::Macro(2)] {
            assert_eq!(precision(&t, &t, avg).unwrap(), 1.0);
            assert_eq!(recall(&t, &t, avg).unwrap(), 1.0);
            assert_eq!(f1(&t, &t, avg).unwrap(), 1.0);
        }
    }

    #[test]
    fn binary_confusion_arithmetic() {
        let truth = [1, 1, 0, 0];
        let pred = [1, 0, 0, 0];
        let avg = Average::Binary(1);
        assert_eq!(precision(&pred, &truth, avg).unwrap(), 1.0);
        assert_eq!(recall(&pred, &truth, avg).unwrap(), 0.5);
        assert_abs_diff_eq!(f1(&pred, &truth, avg).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_division_is_zero() {
        let truth = [1, 0];
        let pred = [0, 0];
        assert_eq!(precision(&pred, &truth, Average::Binary(1)).unwrap(), 0.0);
        assert_eq!(f1(&pred, &truth, Average::Binary(1)).unwrap(), 0.0);
        assert!(matches!(accuracy(&[0], &[0, 1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn macro_f1_averages_classes() {
        let truth = [0, 1, 2, 2];
        let pred = [0, 2, 2, 2];
        // class0 f1 1, class1 f1 0, class2 p=2/3 r=1 f1=0.8
        assert_abs_diff_eq!(f1(&pred, &truth, Average::Macro(3)).unwrap(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0], 1).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &[1, 0, 1, 0], 1).unwrap(), 0.5);
        assert_abs_diff_eq!(roc_auc(&[0.9, 0.8, 0.4, 0.1], &[1, 0, 1, 0], 1).unwrap(), 0.75, epsilon = 1e-15);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1], 1), Err(Error::SingleClass)));
    }

    #[test]
    fn curve_area_matches_auc() {
        let scores = [0.9, 0.8, 0.8, 0.4, 0.1, 0.4];
        let truth = [1, 0, 1, 1, 0, 0];
        let pts = roc_curve(&scores, &truth, 1).unwrap();
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert_abs_diff_eq!(area, roc_auc(&scores, &truth, 1).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn ovr_skips_absent_classes() {
        let scores = vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.0, 0.0]];
        let out = roc_auc_ovr(&scores, &[0, 1]).unwrap();
        assert_eq!(out, vec![Some(1.0), Some(1.0), None]);
    }

    #[test]
    fn bias_examples() {
        assert_eq!(bias_indicator(1, 1), 0);
        assert_eq!(bias_indicator(0, 1), 1);
        let m = PredictionMatrix::new(vec![vec![0, 1], vec![0, 0]], vec![0, 1], 2).unwrap();
        assert_eq!(average_ensemble_bias(&m), 0.25);
        let perfect = PredictionMatrix::new(vec![vec![0, 1]; 3], vec![0, 1], 2).unwrap();
        assert_eq!(average_ensemble_bias(&perfect), 0.0);
        let wrong = PredictionMatrix::new(vec![vec![1, 0]; 3], vec![0, 1], 2).unwrap();
        assert_eq!(average_ensemble_bias(&wrong), 1.0);
    }

    #[test]
    fn identical_correct_learners_show_no_diversity() {
        let m = PredictionMatrix::new(vec![vec![0, 1, 1]; 4], vec![0, 1, 1], 2).unwrap();
        let r = diversity_measures(&m).unwrap();
        assert_eq!((r.disagreement, r.double_fault, r.kohavi_wolpert, r.entropy), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(
            diversity_measures(&PredictionMatrix::new(vec![vec![0]], vec![0], 2).unwrap()),
            Err(Error::TooFewLearners { .. })
        ));
    }

    #[test]
    fn complementary_errors() {
        // learner 0 wrong on sample 0, learner 1 wrong on samples 1 and 2
        let m = PredictionMatrix::new(vec![vec![1, 1, 0, 0], vec![0, 0, 1, 0]], vec![0, 1, 0, 0], 2).unwrap();
        let r = diversity_measures(&m).unwrap();
        assert_eq!(r.double_fault, 0.0);
        assert_eq!(r.disagreement, 0.75);
        assert_eq!(r.q_statistic, -1.0);
        assert_eq!(r.generalized_diversity, 1.0);
    }

    #[test]
    fn fixed_three_by_five_matrix() {
        // correctness rows: 11010, 10110, 01111 (hand-worked below)
        let truth = vec![0, 0, 0, 0, 0];
        let rows = [[1, 1, 0, 1, 0], [1, 0, 1, 1, 0], [0, 1, 1, 1, 1]];
        let preds = rows.iter().map(|r| r.iter().map(|&c| 1 - c).collect()).collect();
        let r = diversity_measures(&PredictionMatrix::new(preds, truth, 2).unwrap()).unwrap();
        // pairs (0,1): n11=2 n10=1 n01=1 n00=1 -> Q=(2-1)/(2+1)=1/3, dis 2/5, df 1/5
        // (0,2): n11=2 n10=1 n01=2 n00=0 -> Q=-1, dis 3/5, df 0
        // (1,2): n11=2 n10=1 n01=2 n00=0 -> Q=-1, dis 3/5, df 0
        assert_abs_diff_eq!(r.q_statistic, (1.0 / 3.0 - 2.0) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.disagreement, 8.0 / 15.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.double_fault, 1.0 / 15.0, epsilon = 1e-15);
        // correct votes per sample: 2,2,2,3,1
        assert_abs_diff_eq!(r.kohavi_wolpert, (2.0 + 2.0 + 2.0 + 0.0 + 2.0) / 45.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.entropy, 4.0 / 5.0, epsilon = 1e-15);
        // failures per sample: 1,1,1,0,2 -> p1 = 5/15, p2 = (2*1)/(3*2)/5 = 1/15
        assert_abs_diff_eq!(r.generalized_diversity, 1.0 - (1.0 / 15.0) / (1.0 / 3.0), epsilon = 1e-15);
    }

    fn random_matrix() -> impl Strategy<Value = PredictionMatrix> {
        (2usize..6, 1usize..21, 2usize..4).prop_flat_map(|(l, n, k)| {
            (
                proptest::collection::vec(proptest::collection::vec(0..k, n), l),
                proptest::collection::vec(0..k, n),
            )
                .prop_map(move |(p, t)| PredictionMatrix::new(p, t, k).unwrap())
        })
    }

    proptest! {
        #[test]
        fn report_within_bounds(m in random_matrix()) {
            let r = diversity_measures(&m).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r.q_statistic));
            for v in [r.disagreement, r.double_fault, r.entropy, r.generalized_diversity] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
            prop_assert!((0.0..=0.25).contains(&r.kohavi_wolpert));
        }

        #[test]
        fn pairwise_measures_are_order_free(m in random_matrix()) {
            let mut rev = m.predictions().to_vec();
            rev.reverse();
            let a = diversity_measures(&m).unwrap();
            let b = diversity_measures(&PredictionMatrix::new(rev, m.truth().to_vec(), m.n_classes()).unwrap()).unwrap();
            prop_assert!((a.q_statistic - b.q_statistic).abs() < 1e-12);
            prop_assert!((a.disagreement - b.disagreement).abs() < 1e-12);
            prop_assert!((a.double_fault - b.double_fault).abs() < 1e-12);
        }

        #[test]
        fn self_pair_q_is_one(row in proptest::collection::vec(0usize..2, 2..20), truth in proptest::collection::vec(0usize..2, 20)) {
            let truth = truth[..row.len()].to_vec();
            let m = PredictionMatrix::new(vec![row.clone(), row], truth, 2).unwrap();
            let c = &m.correctness()[0];
            let r = diversity_measures(&m).unwrap();
            if c.iter().any(|&x| x) && c.iter().any(|&x| !x) {
                prop_assert_eq!(r.q_statistic, 1.0);
            }
            prop_assert_eq!(r.disagreement, 0.0);
        }

        #[test]
        fn duplicating_learners_keeps_kw(m in random_matrix()) {
            let mut doubled = m.predictions().to_vec();
            doubled.extend_from_slice(m.predictions());
            let d = PredictionMatrix::new(doubled, m.truth().to_vec(), m.n_classes()).unwrap();
            let (a, b) = (diversity_measures(&m).unwrap(), diversity_measures(&d).unwrap());
            prop_assert!((a.kohavi_wolpert - b.kohavi_wolpert).abs() < 1e-12);
            if m.n_learners() % 2 == 0 {
                prop_assert!((a.entropy - b.entropy).abs() < 1e-12);
            }
        }

        #[test]
        fn auc_invariant_under_monotone_maps(
            scores in proptest::collection::vec(0u8..6, 2..30),
            truth in proptest::collection::vec(0usize..2, 30),
        ) {
            let truth = &truth[..scores.len()];
            prop_assume!(truth.contains(&0) && truth.contains(&1));
            let s: Vec<f64> = scores.iter().map(|&v| f64::from(v) / 5.0).collect();
            let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc(&s, truth, 1).unwrap(), roc_auc(&warped, truth, 1).unwrap());
        }
    }
}
