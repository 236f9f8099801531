//! Private top-k selection over acquisition scores and selection-quality
//! metrics against the exact top-k.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::Accountant;
use crate::acquisition::{clip_scores, ScoreVector};
use crate::error::{invalid, Result};
use crate::mechanisms::{exponential_probs, gaussian_perturb, laplace_perturb, Sensitivity};

pub const DEFAULT_SUBSAMPLE_P: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// No noise; exact top-k. Diagnostic only, not private.
    Exact,
    Laplace,
    ClippedLaplace,
    Gaussian,
    SubsampledGaussian,
}

impl Mechanism {
    pub const PRIVATE: [Mechanism; 4] = [
        Mechanism::Laplace,
        Mechanism::ClippedLaplace,
        Mechanism::Gaussian,
        Mechanism::SubsampledGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Exact => "exact",
            Mechanism::Laplace => "laplace",
            Mechanism::ClippedLaplace => "clipped_laplace",
            Mechanism::Gaussian => "gaussian",
            Mechanism::SubsampledGaussian => "subsampled_gaussian",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        [Mechanism::Exact]
            .into_iter()
            .chain(Self::PRIVATE)
            .find(|m| m.name() == name)
            .ok_or_else(|| invalid(format!("unknown mechanism '{name}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub eps_phase: f64,
    pub mechanism: Mechanism,
    #[serde(default)]
    pub clip_value: Option<f64>,
    /// Overrides the calibrated Gaussian noise multiplier; must be at least
    /// as large as the calibrated value.
    #[serde(default)]
    pub gaussian_sigma: Option<f64>,
    #[serde(default)]
    pub subsample_p: Option<f64>,
    /// Slack used to calibrate the Gaussian variants.
    pub delta: f64,
}

impl SelectionConfig {
    pub fn new(k: usize, eps_phase: f64, mechanism: Mechanism, delta: f64) -> Self {
        Self {
            k,
            eps_phase,
            mechanism,
            clip_value: None,
            gaussian_sigma: None,
            subsample_p: None,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("query size k must be >= 1"));
        }
        if self.mechanism != Mechanism::Exact && !(self.eps_phase > 0.0) {
            return Err(invalid("selection epsilon must be > 0"));
        }
        if self.mechanism == Mechanism::ClippedLaplace && self.clip_value.is_none() {
            return Err(invalid("clipped_laplace requires clip_value"));
        }
        if let Some(p) = self.subsample_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid("subsample_p must lie in (0, 1]"));
            }
        }
        if matches!(self.mechanism, Mechanism::Gaussian | Mechanism::SubsampledGaussian)
            && !(self.delta > 0.0 && self.delta < 1.0)
        {
            return Err(invalid("Gaussian selection needs delta in (0, 1)"));
        }
        Ok(())
    }

    pub fn subsample_rate(&self) -> f64 {
        self.subsample_p.unwrap_or(DEFAULT_SUBSAMPLE_P)
    }

    /// Noise multiplier for the Gaussian variants.
    pub fn noise_multiplier(&self, acc: &Accountant) -> Result<f64> {
        let q = match self.mechanism {
            Mechanism::Gaussian => 1.0,
            Mechanism::SubsampledGaussian => self.subsample_rate(),
            _ => return Err(invalid("noise multiplier only applies to Gaussian selection")),
        };
        let calibrated = acc.get_noise_multiplier(self.eps_phase, self.delta, &[1], &[q])?;
        match self.gaussian_sigma {
            Some(s) if s < calibrated => Err(invalid(format!(
                "gaussian_sigma {s} is below the calibrated {calibrated}"
            ))),
            Some(s) => Ok(s),
            None => Ok(calibrated),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Positions into the scored vector, best first.
    pub selected: Vec<usize>,
    /// Perturbed scores; `-inf` for points outside the subsample.
    pub noisy_scores: Vec<f64>,
    /// How many picks were filled at random because the subsample was
    /// smaller than k.
    pub filled: usize,
}

/// Indices of the k largest values, ties broken by the random keys.
fn top_k_by(values: &[f64], keys: &[u64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |&a: &usize, &b: &usize| {
        values[b].total_cmp(&values[a]).then(keys[a].cmp(&keys[b]))
    };
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

/// Exact top-k with ties broken by position, used as the reference set.
pub fn exact_topk(scores: &[f64], k: usize) -> Vec<usize> {
    let keys: Vec<u64> = (0..scores.len() as u64).collect();
    top_k_by(scores, &keys, k.min(scores.len()))
}

/// A validated selection configuration with its noise calibration done
/// once up front.
#[derive(Debug, Clone)]
pub struct Selector {
    cfg: SelectionConfig,
    sigma: Option<f64>,
}

impl Selector {
    pub fn new(cfg: &SelectionConfig, acc: &Accountant) -> Result<Self> {
        cfg.validate()?;
        let sigma = match cfg.mechanism {
            Mechanism::Gaussian | Mechanism::SubsampledGaussian => Some(cfg.noise_multiplier(acc)?),
            _ => None,
        };
        Ok(Self { cfg: cfg.clone(), sigma })
    }

    pub fn config(&self) -> &SelectionConfig {
        &self.cfg
    }

    pub fn noise_multiplier(&self) -> Option<f64> {
        self.sigma
    }

    /// Perturbs every score with the configured mechanism and returns the
    /// k largest noisy scores.
    pub fn select<R: Rng + ?Sized>(&self, scores: &ScoreVector, rng: &mut R) -> Result<SelectionOutcome> {
        let cfg = &self.cfg;
        let n = scores.len();
        if n < cfg.k {
            return Err(invalid(format!("only {n} candidates for k = {}", cfg.k)));
        }
        let sens = scores.sensitivity.value;
        let sigma = self.sigma.unwrap_or(0.0);
        let mut candidates: Vec<usize> = (0..n).collect();
        let noisy = match cfg.mechanism {
            Mechanism::Exact => scores.scores.clone(),
            Mechanism::Laplace => laplace_perturb(&scores.scores, Sensitivity::l1(sens), cfg.eps_phase, rng)?,
            Mechanism::ClippedLaplace => {
                let clipped = clip_scores(scores, cfg.clip_value.unwrap_or(sens))?;
                laplace_perturb(&clipped.scores, clipped.sensitivity, cfg.eps_phase, rng)?
            }
            Mechanism::Gaussian => gaussian_perturb(&scores.scores, Sensitivity::l2(sens), sigma, rng)?,
            Mechanism::SubsampledGaussian => {
                let p = cfg.subsample_rate();
                candidates = (0..n).filter(|_| rng.random::<f64>() < p).collect();
                let picked: Vec<f64> = candidates.iter().map(|&i| scores.scores[i]).collect();
                let perturbed = gaussian_perturb(&picked, Sensitivity::l2(sens), sigma, rng)?;
                let mut full = vec![f64::NEG_INFINITY; n];
                for (&i, v) in candidates.iter().zip(perturbed) {
                    full[i] = v;
                }
                full
            }
        };
        Ok(finish(noisy, candidates, cfg.k, rng))
    }
}

/// One-shot form of [`Selector::select`].
pub fn private_topk<R: Rng + ?Sized>(
    scores: &ScoreVector,
    cfg: &SelectionConfig,
    acc: &Accountant,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    Selector::new(cfg, acc)?.select(scores, rng)
}

fn finish<R: Rng + ?Sized>(noisy: Vec<f64>, candidates: Vec<usize>, k: usize, rng: &mut R) -> SelectionOutcome {
    let n = noisy.len();
    let keys: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let take = k.min(candidates.len());
    let cand_values: Vec<f64> = candidates.iter().map(|&i| noisy[i]).collect();
    let cand_keys: Vec<u64> = candidates.iter().map(|&i| keys[i]).collect();
    let mut selected: Vec<usize> = top_k_by(&cand_values, &cand_keys, take)
        .into_iter()
        .map(|j| candidates[j])
        .collect();
    let filled = k - take;
    if filled > 0 {
        let chosen: HashSet<usize> = candidates.iter().copied().collect();
        let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
        selected.extend(index::sample(rng, rest.len(), filled).into_iter().map(|j| rest[j]));
    }
    SelectionOutcome { selected, noisy_scores: noisy, filled }
}

/// Uniform random choice of k positions out of n.
pub fn random_selection<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(invalid(format!("cannot pick {k} of {n}")));
    }
    Ok(index::sample(rng, n, k).into_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub accuracy: f64,
    pub iou: f64,
    pub mse: f64,
}

/// Overlap with the exact top-k and the mean squared gap between the sorted
/// true scores of the selection and of the exact top-k.
pub fn selection_metrics(selected: &[usize], scores_true: &[f64], k: usize) -> Result<SelectionMetrics> {
    if selected.len() != k || k == 0 {
        return Err(invalid(format!("selection has {} points, expected k = {k}", selected.len())));
    }
    if selected.iter().any(|&i| i >= scores_true.len()) {
        return Err(invalid("selected index out of range"));
    }
    let top = exact_topk(scores_true, k);
    let top_set: HashSet<usize> = top.iter().copied().collect();
    let sel_set: HashSet<usize> = selected.iter().copied().collect();
    let inter = sel_set.intersection(&top_set).count() as f64;
    let union = sel_set.union(&top_set).count() as f64;
    let mut sel_scores: Vec<f64> = selected.iter().map(|&i| scores_true[i]).collect();
    sel_scores.sort_unstable_by(|a, b| b.total_cmp(a));
    let mse = sel_scores
        .iter()
        .zip(top.iter().map(|&i| scores_true[i]))
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / k as f64;
    Ok(SelectionMetrics { accuracy: inter / k as f64, iou: inter / union, mse })
}

/// Exponential-mechanism probabilities for one diversity pick when the
/// selection budget is split evenly across k picks.
pub fn coreset_dilution_demo(distances: &[f64], eps_sel: f64, k: usize) -> Result<Vec<f64>> {
    if !(eps_sel > 0.0) || k == 0 {
        return Err(invalid("need eps_sel > 0 and k >= 1"));
    }
    exponential_probs(distances, Sensitivity::l1(1.0), eps_sel / k as f64)
}

/// Reference score distribution for mechanism comparisons: independent
/// uniform scores on [0, 1] with sensitivity 1.
pub fn reference_scores<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ScoreVector> {
    ScoreVector::new((0..n).map(|_| rng.random::<f64>()).collect(), 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub pool_size: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub delta: f64,
    pub clip_value: f64,
    pub subsample_p: f64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            pool_size: 1000,
            k: 100,
            trials: 1000,
            seed: 0,
            delta: 1e-5,
            clip_value: 0.8,
            subsample_p: DEFAULT_SUBSAMPLE_P,
        }
    }
}

/// One row of a mechanism sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mechanism: String,
    pub epsilon: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub iou_mean: f64,
    pub mse_mean: f64,
}

impl BenchRow {
    pub fn accuracy_stderr(&self, trials: usize) -> f64 {
        self.accuracy_std / (trials as f64).sqrt()
    }
}

fn summarize(name: &str, epsilon: f64, metrics: &[SelectionMetrics]) -> BenchRow {
    let n = metrics.len() as f64;
    let acc_mean = metrics.iter().map(|m| m.accuracy).sum::<f64>() / n;
    let var = metrics.iter().map(|m| (m.accuracy - acc_mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    BenchRow {
        mechanism: name.to_string(),
        epsilon,
        accuracy_mean: acc_mean,
        accuracy_std: var.sqrt(),
        iou_mean: metrics.iter().map(|m| m.iou).sum::<f64>() / n,
        mse_mean: metrics.iter().map(|m| m.mse).sum::<f64>() / n,
    }
}

/// Monte-Carlo selection quality of `mechanism` (or uniform random choice
/// when `None`) at one epsilon on fresh reference scores per trial.
pub fn bench_mechanism(mechanism: Option<Mechanism>, epsilon: f64, params: &BenchParams) -> Result<BenchRow> {
    if params.trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let selector = match mechanism {
        Some(m) => {
            let cfg = SelectionConfig {
                clip_value: Some(params.clip_value),
                subsample_p: Some(params.subsample_p),
                ..SelectionConfig::new(params.k, epsilon, m, params.delta)
            };
            Some(Selector::new(&cfg, &Accountant::default())?)
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut metrics = Vec::with_capacity(params.trials);
    for _ in 0..params.trials {
        let scores = reference_scores(params.pool_size, &mut rng)?;
        let selected = match &selector {
            None => random_selection(params.pool_size, params.k, &mut rng)?,
            Some(sel) => sel.select(&scores, &mut rng)?.selected,
        };
        metrics.push(selection_metrics(&selected, &scores.scores, params.k)?);
    }
    let name = mechanism.map_or("random", Mechanism::name);
    Ok(summarize(name, epsilon, &metrics))
}
