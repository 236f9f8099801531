//! Acquisition scores oriented so that higher means more informative.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mechanisms::Sensitivity;

/// Probabilities below this contribute nothing to entropy terms.
pub const PROB_FLOOR: f64 = 1e-12;
pub const ENTROPY_CLIP: f64 = 0.8;
pub const BALD_CLIP: f64 = 0.5;

/// Model output for one point. In multiclass mode the entries form a
/// distribution over classes; in multilabel mode each entry is an
/// independent per-label probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
    multilabel: bool,
}

impl ProbVector {
    pub fn multiclass(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("class probabilities sum to {total}")));
        }
        Ok(Self { probs, multilabel: false })
    }

    pub fn multilabel(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        Ok(Self { probs, multilabel: true })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    pub fn is_multilabel(&self) -> bool {
        self.multilabel
    }
}

fn check_entries(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 {
        return Err(invalid("need at least two classes"));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("probabilities must lie in [0, 1]"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acquisition {
    LeastConfidence,
    Margin,
    Entropy,
    Bald,
}

impl Acquisition {
    /// Global sensitivity of the unclipped score for `classes` outputs.
    pub fn sensitivity(self, classes: usize, multilabel: bool) -> f64 {
        match self {
            Acquisition::LeastConfidence if multilabel => 0.5,
            Acquisition::LeastConfidence => 1.0 - 1.0 / classes as f64,
            Acquisition::Margin | Acquisition::Entropy | Acquisition::Bald => 1.0,
        }
    }

    pub fn default_clip(self) -> Option<f64> {
        match self {
            Acquisition::Entropy => Some(ENTROPY_CLIP),
            Acquisition::Bald => Some(BALD_CLIP),
            _ => None,
        }
    }
}

/// `1 - max_c p_c`; multilabel averages `1 - max(p, 1 - p)` over labels.
pub fn least_confidence(p: &ProbVector) -> f64 {
    if p.multilabel {
        let sum: f64 = p.probs.iter().map(|&x| 1.0 - x.max(1.0 - x)).sum();
        return sum / p.classes() as f64;
    }
    let max = p.probs.iter().copied().fold(0.0, f64::max);
    (1.0 - max).max(0.0)
}

/// `1 - (p_(1) - p_(2))` for the two largest class probabilities.
pub fn min_margin(p: &ProbVector) -> Result<f64> {
    if p.multilabel {
        return Err(Error::MarginMultilabel);
    }
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for &x in &p.probs {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    Ok((1.0 - (first - second)).clamp(0.0, 1.0))
}

fn plogp(p: f64) -> f64 {
    if p < PROB_FLOOR {
        0.0
    } else {
        p * p.log2()
    }
}

fn binary_entropy(p: f64) -> f64 {
    -(plogp(p) + plogp(1.0 - p))
}

fn normalized_entropy(probs: &[f64]) -> f64 {
    let h: f64 = -probs.iter().map(|&p| plogp(p)).sum::<f64>();
    (h / (probs.len() as f64).log2()).clamp(0.0, 1.0)
}

/// Shannon entropy in bits divided by `log2 C`; multilabel averages the
/// per-label binary entropies.
pub fn entropy(p: &ProbVector) -> f64 {
    if p.multilabel {
        let sum: f64 = p.probs.iter().map(|&x| binary_entropy(x)).sum();
        return (sum / p.classes() as f64).clamp(0.0, 1.0);
    }
    normalized_entropy(&p.probs)
}

/// Monte-Carlo BALD: entropy of the mean prediction minus the mean
/// per-pass entropy, both normalized.
pub fn bald_mc(passes: &[ProbVector]) -> Result<f64> {
    if passes.len() < 2 {
        return Err(invalid("BALD needs at least two stochastic passes"));
    }
    let c = passes[0].classes();
    let multilabel = passes[0].multilabel;
    if passes.iter().any(|p| p.classes() != c || p.multilabel != multilabel) {
        return Err(invalid("all passes must share the class count and mode"));
    }
    let j = passes.len() as f64;
    let mut mean = vec![0.0; c];
    for p in passes {
        for (m, x) in mean.iter_mut().zip(&p.probs) {
            *m += x / j;
        }
    }
    let mean = if multilabel {
        ProbVector { probs: mean.into_iter().map(|x| x.clamp(0.0, 1.0)).collect(), multilabel }
    } else {
        ProbVector { probs: mean, multilabel }
    };
    let expected: f64 = passes.iter().map(entropy).sum::<f64>() / j;
    Ok((entropy(&mean) - expected).max(0.0))
}

/// Scores for a set of pool points together with their sensitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub sensitivity: Sensitivity,
    pub clip_value: Option<f64>,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, sensitivity: f64) -> Result<Self> {
        if !(sensitivity > 0.0) {
            return Err(invalid("score sensitivity must be > 0"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
        if scores.iter().any(|s| *s < 0.0 || *s > sensitivity + 1e-12) {
            return Err(invalid(format!("scores must lie in [0, {sensitivity}]")));
        }
        Ok(Self { scores, sensitivity: Sensitivity::l1(sensitivity), clip_value: None })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scores per point from either single predictions or, for BALD, stacks
/// of stochastic passes.
pub fn score_points(kind: Acquisition, outputs: &[Vec<ProbVector>]) -> Result<ScoreVector> {
    let first = outputs
        .first()
        .and_then(|o| o.first())
        .ok_or_else(|| invalid("no model outputs to score"))?;
    let (c, multilabel) = (first.classes(), first.multilabel);
    let scores = outputs
        .iter()
        .map(|passes| {
            let single = passes.first().ok_or_else(|| invalid("missing model output"))?;
            match kind {
                Acquisition::LeastConfidence => Ok(least_confidence(single)),
                Acquisition::Margin => min_margin(single),
                Acquisition::Entropy => Ok(entropy(single)),
                Acquisition::Bald => bald_mc(passes),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreVector::new(scores, kind.sensitivity(c, multilabel))
}

/// Caps every score at `clip_value` and lowers the sensitivity to match.
pub fn clip_scores(sv: &ScoreVector, clip_value: f64) -> Result<ScoreVector> {
    if !(clip_value > 0.0 && clip_value <= sv.sensitivity.value) {
        return Err(invalid(format!(
            "clip value {clip_value} outside (0, {}]",
            sv.sensitivity.value
        )));
    }
    Ok(ScoreVector {
        scores: sv.scores.iter().map(|s| s.min(clip_value)).collect(),
        sensitivity: Sensitivity::l1(clip_value),
        clip_value: Some(clip_value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mc(p: &[f64]) -> ProbVector {
        ProbVector::multiclass(p.to_vec()).unwrap()
    }

    fn uniform(c: usize) -> ProbVector {
        mc(&vec![1.0 / c as f64; c])
    }

    fn one_hot(c: usize, i: usize) -> ProbVector {
        let mut p = vec![0.0; c];
        p[i] = 1.0;
        mc(&p)
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::multiclass(vec![1.0]).is_err());
        assert!(ProbVector::multiclass(vec![0.6, 0.6]).is_err());
        assert!(ProbVector::multiclass(vec![1.2, -0.2]).is_err());
        assert!(ProbVector::multilabel(vec![0.9, 0.9, 0.1]).is_ok());
    }

    #[test]
    fn least_confidence_examples() {
        assert!((least_confidence(&uniform(10)) - 0.9).abs() < 1e-12);
        assert!((Acquisition::LeastConfidence.sensitivity(10, false) - 0.9).abs() < 1e-12);
        assert_eq!(least_confidence(&one_hot(4, 2)), 0.0);
        assert!((least_confidence(&mc(&[0.7, 0.2, 0.1])) - 0.3).abs() < 1e-12);
        let ml = ProbVector::multilabel(vec![0.5, 1.0]).unwrap();
        assert!((least_confidence(&ml) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn margin_examples() {
        assert_eq!(min_margin(&one_hot(3, 0)).unwrap(), 0.0);
        assert!((min_margin(&uniform(5)).unwrap() - 1.0).abs() < 1e-12);
        assert!((min_margin(&mc(&[0.5, 0.3, 0.2])).unwrap() - 0.8).abs() < 1e-12);
        let ml = ProbVector::multilabel(vec![0.5, 0.5]).unwrap();
        let err = min_margin(&ml).unwrap_err();
        assert_eq!(err.to_string(), "margin undefined for multilabel");
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&uniform(7)) - 1.0).abs() < 1e-12);
        assert_eq!(entropy(&one_hot(3, 1)), 0.0);
        let h = entropy(&mc(&[0.7, 0.2, 0.1]));
        // -(0.7 log2 0.7 + 0.2 log2 0.2 + 0.1 log2 0.1) / log2 3
        let oracle = -(0.7f64 * 0.7f64.ln() + 0.2 * 0.2f64.ln() + 0.1 * 0.1f64.ln()) / 3f64.ln();
        assert!((h - oracle).abs() < 1e-12);
        assert!((h - 0.7299).abs() < 1e-4, "{h}");
        let ml = ProbVector::multilabel(vec![0.5, 0.0]).unwrap();
        assert!((entropy(&ml) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn entropy_normalized_for_every_class_count() {
        for c in 2..=100 {
            assert!((entropy(&uniform(c)) - 1.0).abs() < 1e-12, "C = {c}");
        }
    }

    #[test]
    fn bald_examples() {
        let same = vec![mc(&[0.3, 0.7]); 4];
        assert_eq!(bald_mc(&same).unwrap(), 0.0);
        let split = [one_hot(2, 0), one_hot(2, 1)];
        assert!((bald_mc(&split).unwrap() - 1.0).abs() < 1e-12);
        let passes = [mc(&[0.9, 0.1]), mc(&[0.5, 0.5])];
        let h = |p: f64| -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        let oracle = h(0.7) - (h(0.9) + h(0.5)) / 2.0;
        let got = bald_mc(&passes).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 0.1468).abs() < 1e-3, "{got}");
        assert!(bald_mc(&passes[..1]).is_err());
        assert!(bald_mc(&[mc(&[0.5, 0.5]), uniform(3)]).is_err());
    }

    #[test]
    fn clipping() {
        let sv = ScoreVector::new(vec![0.95, 0.3], 1.0).unwrap();
        let clipped = clip_scores(&sv, 0.8).unwrap();
        assert_eq!(clipped.scores, vec![0.8, 0.3]);
        assert_eq!(clipped.sensitivity.value, 0.8);
        assert_eq!(clipped.clip_value, Some(0.8));
        let sv = ScoreVector::new(vec![0.9], 1.0).unwrap();
        assert_eq!(clip_scores(&sv, 0.5).unwrap().scores, vec![0.5]);
        assert_eq!(clip_scores(&sv, 1.0).unwrap().scores, sv.scores);
        assert!(clip_scores(&sv, 1.5).is_err());
        assert!(clip_scores(&sv, 0.0).is_err());
    }

    #[test]
    fn score_points_uses_declared_sensitivity() {
        let outs = vec![vec![mc(&[0.7, 0.2, 0.1])], vec![uniform(3)]];
        let sv = score_points(Acquisition::LeastConfidence, &outs).unwrap();
        assert!((sv.sensitivity.value - 2.0 / 3.0).abs() < 1e-12);
        assert!((sv.scores[1] - 2.0 / 3.0).abs() < 1e-12);
        let outs = vec![vec![mc(&[0.9, 0.1]), mc(&[0.5, 0.5])]];
        let sv = score_points(Acquisition::Bald, &outs).unwrap();
        assert!((sv.scores[0] - 0.1468).abs() < 1e-3);
    }

    #[test]
    fn uniform_beats_one_hot() {
        for c in 2..12 {
            let u = uniform(c);
            for i in 0..c {
                let h = one_hot(c, i);
                assert!(least_confidence(&u) > least_confidence(&h));
                assert!(min_margin(&u).unwrap() > min_margin(&h).unwrap());
                assert!(entropy(&u) > entropy(&h));
                let bu = bald_mc(&[one_hot(c, 0), one_hot(c, 1)]).unwrap();
                let bh = bald_mc(&[h.clone(), h.clone()]).unwrap();
                assert!(bu > bh);
            }
        }
        let ml_u = ProbVector::multilabel(vec![0.5; 3]).unwrap();
        let ml_h = ProbVector::multilabel(vec![1.0, 0.0, 1.0]).unwrap();
        assert!(least_confidence(&ml_u) > least_confidence(&ml_h));
        assert!(entropy(&ml_u) > entropy(&ml_h));
    }

    fn distribution(c: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, c).prop_map(|w| {
            let total: f64 = w.iter().sum::<f64>() + 1e-300;
            let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
            if total < 1e-12 {
                p = vec![1.0 / w.len() as f64; w.len()];
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn scores_stay_in_range(p in distribution(2..12)) {
            let v = mc(&p);
            let c = v.classes();
            let lc = least_confidence(&v);
            prop_assert!((0.0..=Acquisition::LeastConfidence.sensitivity(c, false) + 1e-12).contains(&lc));
            let m = min_margin(&v).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
            let h = entropy(&v);
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn bald_in_range(passes in proptest::collection::vec(distribution(3..4), 2..6)) {
            let passes: Vec<ProbVector> = passes.iter().map(|p| mc(p)).collect();
            let b = bald_mc(&passes).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
        }

        #[test]
        fn multilabel_scores_in_range(p in proptest::collection::vec(0.0f64..=1.0, 2..8)) {
            let v = ProbVector::multilabel(p).unwrap();
            prop_assert!((0.0..=0.5).contains(&least_confidence(&v)));
            prop_assert!((0.0..=1.0).contains(&entropy(&v)));
        }
    }

    proptest! {
        #[test]
        fn scores_are_permutation_invariant(
            p in distribution(2..10),
            q in distribution(2..10),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = p.len();
            let q = if q.len() == c { q } else { p.iter().rev().copied().collect() };
            let mut perm: Vec<usize> = (0..c).collect();
            perm.shuffle(&mut rng);
            let permute = |v: &[f64]| mc(&perm.iter().map(|&i| v[i]).collect::<Vec<_>>());
            let (a, b) = (mc(&p), permute(&p));
            prop_assert!((least_confidence(&a) - least_confidence(&b)).abs() < 1e-12);
            prop_assert!((min_margin(&a).unwrap() - min_margin(&b).unwrap()).abs() < 1e-12);
            prop_assert!((entropy(&a) - entropy(&b)).abs() < 1e-12);
            let bald_a = bald_mc(&[mc(&p), mc(&q)]).unwrap();
            let bald_b = bald_mc(&[permute(&p), permute(&q)]).unwrap();
            prop_assert!((bald_a - bald_b).abs() < 1e-12);
        }
    }
}
