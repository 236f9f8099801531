//! The active-learning loop: plan the schedule, then alternate DP-SGD
//! training with private selection, keeping every privacy charge in a
//! group ledger that is audited at the end.

mod data;
mod report;

pub use data::{load_csv, make_synthetic, DataPool, DataSource, TrainingSet, TEST_FRACTION};
pub use report::{audit_log, emit_report, AuditOutcome, REPORT_TOLERANCE};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::Accountant;
use crate::acquisition::{clip_scores, score_points, Acquisition, ProbVector};
use crate::error::{invalid, Error, Result};
use crate::schedule::{
    amplify_with, audit, compare_summaries, continual_plan_with, naive_plan_with, noise_reduction_plan_with,
    AmplifiedPlan, ContinualPlan, GroupLedger, GroupSummary, LedgerHeader, LedgerSummary, NaivePlan, PoolConfig,
    TrainingSchedule, TrajectoryPoint, BUDGET_SLACK,
};
use crate::selection::{random_selection, selection_metrics, Mechanism, SelectionConfig, SelectionMetrics, Selector};
use crate::trainer::{accuracy, mc_dropout_passes, train_phase, Examples, Model, ModelSpec, TrainPhaseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Naive,
    StepAmplification,
    NoiseReduction,
    Continual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionMode {
    LeastConfidence,
    Margin,
    Entropy,
    Bald,
    /// Uniform choice from the pool; charges no selection budget.
    Random,
}

impl AcquisitionMode {
    pub fn scorer(self) -> Option<Acquisition> {
        match self {
            AcquisitionMode::LeastConfidence => Some(Acquisition::LeastConfidence),
            AcquisitionMode::Margin => Some(Acquisition::Margin),
            AcquisitionMode::Entropy => Some(Acquisition::Entropy),
            AcquisitionMode::Bald => Some(Acquisition::Bald),
            AcquisitionMode::Random => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    #[serde(default = "default_mechanism")]
    pub mechanism: Mechanism,
    /// Score clip; defaults to the acquisition's own clip when it has one.
    #[serde(default)]
    pub clip_value: Option<f64>,
    #[serde(default)]
    pub gaussian_sigma: Option<f64>,
    #[serde(default)]
    pub subsample_p: Option<f64>,
    /// Exact top-k with no selection charge. Not private; flagged in reports.
    #[serde(default)]
    pub non_private: bool,
}

fn default_mechanism() -> Mechanism {
    Mechanism::Laplace
}

impl Default for SelectionSpec {
    fn default() -> Self {
        Self {
            mechanism: default_mechanism(),
            clip_value: None,
            gaussian_sigma: None,
            subsample_p: None,
            non_private: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
}

fn default_clip() -> f64 {
    1.0
}

fn default_learning_rate() -> f64 {
    0.5
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self { clip: default_clip(), learning_rate: default_learning_rate() }
    }
}

fn default_bald_passes() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub pool: PoolConfig,
    pub epsilon: f64,
    /// Defaults to `1 / labeling_budget`.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub eps_sel: f64,
    pub acquisition: AcquisitionMode,
    #[serde(default)]
    pub selection: SelectionSpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub strategy: Strategy,
    #[serde(default)]
    pub training: TrainingParams,
    #[serde(default = "default_bald_passes")]
    pub bald_passes: usize,
    pub data: DataSource,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.pool.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be finite and > 0"));
        }
        if !(self.eps_sel >= 0.0 && self.eps_sel < self.epsilon) {
            return Err(invalid("eps_sel must lie in [0, epsilon)"));
        }
        let delta = self.delta();
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        let scored = self.acquisition != AcquisitionMode::Random && !self.selection.non_private;
        if scored && self.eps_sel == 0.0 && self.pool.selection_phases() > 0 {
            return Err(invalid("private score-based selection needs eps_sel > 0"));
        }
        if self.acquisition == AcquisitionMode::Bald && self.bald_passes < 2 {
            return Err(invalid("BALD needs at least two passes"));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / self.pool.labeling_budget as f64)
    }

    /// Whether selection runs through a noise mechanism and is charged.
    pub fn charges_selection(&self) -> bool {
        self.acquisition != AcquisitionMode::Random && !self.selection.non_private && self.eps_sel > 0.0
    }

    /// Selection budget the ledger is charged with.
    pub fn charged_eps_sel(&self) -> f64 {
        if self.charges_selection() {
            self.eps_sel
        } else {
            0.0
        }
    }

    fn clip_value(&self) -> Option<f64> {
        self.selection.clip_value.or_else(|| self.acquisition.scorer().and_then(Acquisition::default_clip))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plan {
    Naive(NaivePlan),
    Amplified(AmplifiedPlan),
    Continual(ContinualPlan),
}

impl Plan {
    pub fn schedule(&self) -> TrainingSchedule {
        match self {
            Plan::Naive(p) => p.schedule(),
            Plan::Amplified(p) => p.schedule(),
            Plan::Continual(p) => p.schedule(),
        }
    }
}

/// A plan, its schedule, and the totals the accountant predicts for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub strategy: Strategy,
    pub epsilon: f64,
    pub delta: f64,
    pub eps_sel: f64,
    pub plan: Plan,
    pub schedule: TrainingSchedule,
    /// Predicted total epsilon per `[phase][group]` for groups that exist
    /// by that phase.
    pub predicted_totals: Vec<Vec<f64>>,
}

/// Builds the schedule for `strategy` and checks it keeps every group
/// within budget.
pub fn plan_for(
    acc: &Accountant,
    pool: &PoolConfig,
    strategy: Strategy,
    epsilon: f64,
    delta: f64,
    eps_sel: f64,
) -> Result<PlanReport> {
    let naive = naive_plan_with(acc, pool, epsilon, delta)?;
    let plan = match strategy {
        Strategy::Naive => Plan::Naive(naive),
        Strategy::StepAmplification => Plan::Amplified(amplify_with(acc, &naive, delta, eps_sel)?),
        Strategy::NoiseReduction => Plan::Amplified(noise_reduction_plan_with(acc, &naive, delta, eps_sel)?),
        Strategy::Continual => Plan::Continual(continual_plan_with(acc, &naive, delta, eps_sel)?),
    };
    let schedule = plan.schedule();
    let groups = pool.group_sizes().len();
    let t = pool.selection_phases();
    let per_phase = if t == 0 { 0.0 } else { eps_sel / t as f64 };
    let training = schedule.predicted_training_epsilon(acc, delta, groups)?;
    let predicted_totals: Vec<Vec<f64>> = training
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().take(i + 1).enumerate().map(|(g, e)| e + g as f64 * per_phase).collect())
        .collect();
    if let Some(last) = predicted_totals.last() {
        for (g, total) in last.iter().enumerate() {
            if *total > epsilon + BUDGET_SLACK {
                return Err(invalid(format!(
                    "{strategy:?} plan would leave group {g} at epsilon {total:.6} above the budget {epsilon}"
                )));
            }
        }
    }
    Ok(PlanReport { strategy, epsilon, delta, eps_sel, plan, schedule, predicted_totals })
}

pub fn plan_from_config(config: &RunConfig) -> Result<PlanReport> {
    config.validate()?;
    plan_for(
        &Accountant::default(),
        &config.pool,
        config.strategy,
        config.epsilon,
        config.delta(),
        config.charged_eps_sel(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub k: usize,
    pub mechanism: String,
    pub eps: f64,
    /// Against the exact top-k of the unclipped scores; absent for random
    /// selection.
    pub metrics: Option<SelectionMetrics>,
    pub filled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: usize,
    pub train_size: usize,
    pub test_accuracy: f64,
    /// The selection that follows this training phase.
    pub selection: Option<SelectionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub passed: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    ActiveLearning,
    RandomSubset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: RunKind,
    pub seed: u64,
    pub strategy: Strategy,
    pub acquisition: AcquisitionMode,
    pub mechanism: Option<Mechanism>,
    pub non_private_selection: bool,
    pub epsilon: f64,
    pub delta: f64,
    pub eps_sel: f64,
    pub eps_sel_charged: f64,
    pub plan: PlanReport,
    pub phases: Vec<PhaseReport>,
    /// Per-group privacy loss tracked by the run itself.
    pub accounting: LedgerSummary,
    pub audit: AuditVerdict,
    pub final_test_accuracy: f64,
    pub labeled_class_counts: Vec<usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub ledger: GroupLedger,
}

/// The run's own bookkeeping, kept separately from the event log so the
/// audit has something independent to compare against.
struct RunAccount {
    histories: Vec<crate::accountant::RdpCurve>,
    trained: Vec<bool>,
    selection: Vec<f64>,
    trajectories: Vec<Vec<TrajectoryPoint>>,
}

impl RunAccount {
    fn new(acc: &Accountant, groups: usize) -> Self {
        Self {
            histories: vec![acc.zero(); groups],
            trained: vec![false; groups],
            selection: Vec::new(),
            trajectories: vec![Vec::new(); groups],
        }
    }

    fn train(&mut self, acc: &Accountant, group: usize, sigma: f64, q: f64, steps: u64) -> Result<()> {
        self.histories[group].add_assign(&acc.phase_curve(sigma, q, steps)?)?;
        self.trained[group] = true;
        Ok(())
    }

    fn end_phase(&mut self, acc: &Accountant, phase: usize, delta: f64) -> Result<()> {
        for g in 0..self.histories.len() {
            let training = if self.trained[g] { acc.epsilon(&self.histories[g], delta)? } else { 0.0 };
            let selection: f64 = self.selection.iter().take((phase - 1).min(g)).fold(0.0, |acc, e| acc + e);
            self.trajectories[g].push(TrajectoryPoint {
                phase,
                selection_epsilon: selection,
                training_epsilon: training,
                total_epsilon: selection + training,
            });
        }
        Ok(())
    }

    fn summary(self, budget: f64, sizes: &[usize]) -> LedgerSummary {
        let total_sel: f64 = self.selection.iter().fold(0.0, |acc, e| acc + e);
        let groups = self
            .trajectories
            .into_iter()
            .enumerate()
            .map(|(g, trajectory)| {
                let selection: f64 = self.selection.iter().take(g).fold(0.0, |acc, e| acc + e);
                let training = trajectory.last().map_or(0.0, |p| p.training_epsilon);
                GroupSummary {
                    group: g as u32,
                    size: sizes[g],
                    selection_epsilon: selection,
                    training_epsilon: training,
                    total_epsilon: selection + training,
                    trajectory,
                }
            })
            .collect();
        LedgerSummary { epsilon_budget: budget, groups, unselected_epsilon: total_sel }
    }
}

fn model_outputs<R: rand::Rng + ?Sized>(
    model: &Model,
    pool: &DataPool,
    candidates: &[usize],
    bald_passes: Option<usize>,
    rng: &mut R,
) -> Result<Vec<Vec<ProbVector>>> {
    candidates
        .iter()
        .map(|&i| match bald_passes {
            Some(j) => mc_dropout_passes(model, pool.row(i), j, rng),
            None => Ok(vec![ProbVector::multiclass(model.predict_proba(pool.row(i))?)?]),
        })
        .collect()
}

/// Runs the full loop: train phase `i`, score the pool, privately select
/// query batch `i`, label it, and finally train phase `T + 1`.
pub fn run_dp_al(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let pool = config.data.load(config.seed)?;
    run_on_pool(config, pool, RunKind::ActiveLearning)
}

/// Labels `B` uniformly drawn points up front and trains once on them at
/// the full budget with `q = b / B`.
pub fn baseline_random_subset(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let budget = config.pool.labeling_budget;
    let single = RunConfig {
        pool: PoolConfig {
            initial_labeled: budget,
            labeling_budget: budget,
            query_size: 1,
            query_schedule: None,
            ..config.pool.clone()
        },
        delta: Some(config.delta()),
        eps_sel: 0.0,
        acquisition: AcquisitionMode::Random,
        strategy: Strategy::Naive,
        ..config.clone()
    };
    let pool = config.data.load(config.seed)?;
    run_on_pool(&single, pool, RunKind::RandomSubset)
}

fn run_on_pool(config: &RunConfig, mut pool: DataPool, kind: RunKind) -> Result<RunOutput> {
    let cfg = &config.pool;
    if pool.len() < cfg.labeling_budget {
        return Err(invalid(format!(
            "pool has {} points, labeling budget is {}",
            pool.len(),
            cfg.labeling_budget
        )));
    }
    let acc = Accountant::default();
    let delta = config.delta();
    let eps_charged = config.charged_eps_sel();
    let plan = plan_for(&acc, cfg, config.strategy, config.epsilon, delta, eps_charged)?;
    let t = cfg.selection_phases();
    let query_sizes = cfg.query_sizes();
    let group_sizes = cfg.group_sizes();
    let eps_phase = if t == 0 { 0.0 } else { eps_charged / t as f64 };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ledger = GroupLedger::new(LedgerHeader {
        epsilon: config.epsilon,
        delta,
        eps_sel: eps_charged,
        selection_phases: t,
        group_sizes: group_sizes.clone(),
    })?;
    let mut account = RunAccount::new(&acc, group_sizes.len());
    let initial: Vec<usize> = index::sample(&mut rng, pool.len(), cfg.initial_labeled).into_vec();
    pool.label(&initial, 0)?;

    let mut model = Model::new(&config.model, pool.dims(), pool.classes(), &mut rng)?;
    let scorer = config.acquisition.scorer();
    let selector = match (scorer, config.selection.non_private) {
        (Some(_), true) => Some(Selector::new(
            &SelectionConfig::new(1, f64::INFINITY, Mechanism::Exact, delta),
            &acc,
        )?),
        (Some(_), false) if t > 0 => {
            let sel_cfg = SelectionConfig {
                clip_value: config.clip_value(),
                gaussian_sigma: config.selection.gaussian_sigma,
                subsample_p: config.selection.subsample_p,
                ..SelectionConfig::new(1, eps_phase, config.selection.mechanism, delta)
            };
            Some(Selector::new(&sel_cfg, &acc)?)
        }
        _ => None,
    };

    let mut phases = Vec::with_capacity(t + 1);
    for (idx, segments) in plan.schedule.phases.iter().enumerate() {
        let phase = idx + 1;
        let set = pool.training_set();
        let train_size = set.labels.len();
        let examples = Examples::new(&set.features, set.dims, &set.labels, &set.groups)?;
        for seg in segments {
            let batch = seg.expected_batch(&group_sizes);
            let spec = TrainPhaseSpec {
                steps: seg.steps,
                sigma: seg.sigma,
                clip: config.training.clip,
                expected_batch: if batch > 0.0 { batch } else { cfg.expected_batch as f64 },
                rates: seg.rates.clone(),
                learning_rate: config.training.learning_rate,
            };
            train_phase(&mut model, &examples, &spec, phase, &mut ledger, &mut rng)?;
            if seg.steps > 0 {
                for (g, &q) in seg.rates.iter().enumerate() {
                    if q > 0.0 {
                        account.train(&acc, g, seg.sigma, q, seg.steps)?;
                    }
                }
            }
        }
        account.end_phase(&acc, phase, delta)?;
        let test_accuracy = accuracy(&model, pool.test_features(), pool.test_labels())?;

        let mut selection = None;
        if phase <= t {
            let k = query_sizes[idx];
            let unlabeled = pool.unlabeled();
            let report = match (scorer, &selector) {
                (Some(kind), Some(selector)) => {
                    let passes = (kind == Acquisition::Bald).then_some(config.bald_passes);
                    let outputs = model_outputs(&model, &pool, &unlabeled, passes, &mut rng)?;
                    let raw = score_points(kind, &outputs)?;
                    let scored = match config.clip_value() {
                        Some(c) if c < raw.sensitivity.value => clip_scores(&raw, c)?,
                        _ => raw.clone(),
                    };
                    let sel_cfg = SelectionConfig { k, ..selector.config().clone() };
                    let selector = Selector::new(&sel_cfg, &acc)?;
                    let outcome = selector.select(&scored, &mut rng)?;
                    let metrics = selection_metrics(&outcome.selected, &raw.scores, k)?;
                    let picked: Vec<usize> = outcome.selected.iter().map(|&j| unlabeled[j]).collect();
                    pool.label(&picked, phase as u32)?;
                    SelectionReport {
                        k,
                        mechanism: sel_cfg.mechanism.name().to_string(),
                        eps: if config.charges_selection() { eps_phase } else { 0.0 },
                        metrics: Some(metrics),
                        filled: outcome.filled,
                    }
                }
                _ => {
                    let chosen = random_selection(unlabeled.len(), k, &mut rng)?;
                    let picked: Vec<usize> = chosen.iter().map(|&j| unlabeled[j]).collect();
                    pool.label(&picked, phase as u32)?;
                    SelectionReport { k, mechanism: "random".into(), eps: 0.0, metrics: None, filled: 0 }
                }
            };
            let charge = if config.charges_selection() { eps_phase } else { 0.0 };
            ledger.record_select(phase, charge)?;
            account.selection.push(charge);
            selection = Some(report);
        }
        phases.push(PhaseReport { phase, train_size, test_accuracy, selection });
    }
    debug_assert_eq!(pool.labeled().len(), cfg.initial_labeled + query_sizes.iter().sum::<usize>());

    let accounting = account.summary(config.epsilon, &group_sizes);
    let audited = audit(&ledger, &acc)?;
    let mut violations = audited.violations.clone();
    violations.extend(compare_summaries(&audited.summary, &accounting, REPORT_TOLERANCE));
    if !violations.is_empty() {
        return Err(Error::AuditFailed(violations.join("; ")));
    }

    let mut notes = Vec::new();
    if config.selection.non_private && scorer.is_some() {
        notes.push("selection ran without noise and was not charged; this run is not private".to_string());
    }
    if kind == RunKind::RandomSubset {
        notes.push("random-subset baseline: one training phase over the whole labeling budget".to_string());
    }
    let report = RunReport {
        kind,
        seed: config.seed,
        strategy: config.strategy,
        acquisition: config.acquisition,
        mechanism: scorer.map(|_| if config.selection.non_private { Mechanism::Exact } else { config.selection.mechanism }),
        non_private_selection: config.selection.non_private && scorer.is_some(),
        epsilon: config.epsilon,
        delta,
        eps_sel: config.eps_sel,
        eps_sel_charged: eps_charged,
        final_test_accuracy: phases.last().map_or(0.0, |p| p.test_accuracy),
        plan,
        phases,
        accounting,
        audit: AuditVerdict { passed: true, violations: Vec::new() },
        labeled_class_counts: pool.labeled_class_counts(),
        notes,
    };
    Ok(RunOutput { report, ledger })
}
