//! Training schedules across active-learning phases.
//!
//! Phase `i` (1-based, `1..=T+1`) trains on every group labeled so far.
//! Group 0 is the initial labeled set; group `g >= 1` is the batch labeled
//! by selection phase `g` and first trains in phase `g + 1`. The naive plan
//! trains every group at one shared rate; the amplified variants give the
//! newest group its own, larger rate so that all groups finish each phase at
//! the same cumulative privacy loss.

mod ledger;

pub use ledger::{
    audit, compare_summaries, AuditReport, GroupLedger, GroupSummary, LedgerEvent, LedgerHeader,
    LedgerSummary, TrajectoryPoint, BUDGET_SLACK,
};

use serde::{Deserialize, Serialize};

use crate::accountant::{Accountant, RdpCurve};
use crate::error::{invalid, Error, Result};

/// Relative tolerance on the expected batch size after fine-tuning sigma.
pub const BATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub initial_labeled: usize,
    pub query_size: usize,
    pub labeling_budget: usize,
    pub expected_batch: usize,
    pub epochs_per_phase: usize,
    pub pool_size: usize,
    /// Uneven per-phase query sizes; overrides `query_size` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_schedule: Option<Vec<usize>>,
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.labeling_budget < self.initial_labeled {
            return Err(invalid("labeling budget smaller than the initial labeled set"));
        }
        if self.query_size == 0 {
            return Err(invalid("query size must be >= 1"));
        }
        if self.expected_batch == 0 || self.expected_batch > self.initial_labeled {
            return Err(invalid("expected batch must lie in [1, initial_labeled]"));
        }
        if self.epochs_per_phase == 0 {
            return Err(invalid("epochs per phase must be >= 1"));
        }
        if let Some(sizes) = &self.query_schedule {
            if sizes.contains(&0) {
                return Err(invalid("query schedule entries must be >= 1"));
            }
            if sizes.iter().sum::<usize>() > self.labeling_budget - self.initial_labeled {
                return Err(invalid("query schedule exceeds the labeling budget"));
            }
        }
        let labeled_total = self.initial_labeled + self.query_sizes().iter().sum::<usize>();
        if self.pool_size + self.initial_labeled < labeled_total {
            return Err(invalid("pool too small for the labeling budget"));
        }
        Ok(())
    }

    /// `k_g` for selection phases `g = 1..=T`.
    pub fn query_sizes(&self) -> Vec<usize> {
        match &self.query_schedule {
            Some(sizes) => sizes.clone(),
            None => {
                let t = (self.labeling_budget - self.initial_labeled) / self.query_size;
                vec![self.query_size; t]
            }
        }
    }

    /// Number of selection phases `T`.
    pub fn selection_phases(&self) -> usize {
        self.query_sizes().len()
    }

    /// Group sizes: the initial set followed by each query batch.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.initial_labeled];
        sizes.extend(self.query_sizes());
        sizes
    }

    /// `|D_i|` for training phases `i = 1..=T+1`.
    pub fn dataset_sizes(&self) -> Vec<usize> {
        let mut acc = 0;
        self.group_sizes()
            .into_iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaivePhase {
    pub phase: usize,
    pub dataset_size: usize,
    pub q: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaivePlan {
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: f64,
    pub expected_batch: usize,
    pub group_sizes: Vec<usize>,
    pub phases: Vec<NaivePhase>,
}

impl NaivePlan {
    pub fn steps(&self) -> Vec<u64> {
        self.phases.iter().map(|p| p.steps).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.q).collect()
    }

    pub fn schedule(&self) -> TrainingSchedule {
        let phases = self
            .phases
            .iter()
            .map(|p| {
                vec![Segment {
                    steps: p.steps,
                    sigma: self.sigma,
                    rates: vec![p.q; p.phase],
                }]
            })
            .collect();
        TrainingSchedule { phases }
    }
}

/// `q_i = b / |D_i|`, `n_i = floor(e |D_i| / b)`, one shared sigma.
pub fn naive_plan(cfg: &PoolConfig, epsilon: f64, delta: f64) -> Result<NaivePlan> {
    naive_plan_with(&Accountant::default(), cfg, epsilon, delta)
}

pub fn naive_plan_with(acc: &Accountant, cfg: &PoolConfig, epsilon: f64, delta: f64) -> Result<NaivePlan> {
    cfg.validate()?;
    let b = cfg.expected_batch as f64;
    let phases: Vec<NaivePhase> = cfg
        .dataset_sizes()
        .into_iter()
        .enumerate()
        .map(|(idx, size)| NaivePhase {
            phase: idx + 1,
            dataset_size: size,
            q: b / size as f64,
            steps: (cfg.epochs_per_phase * size / cfg.expected_batch) as u64,
        })
        .collect();
    let steps: Vec<u64> = phases.iter().map(|p| p.steps).collect();
    let rates: Vec<f64> = phases.iter().map(|p| p.q).collect();
    let sigma = acc.get_noise_multiplier(epsilon, delta, &steps, &rates)?;
    Ok(NaivePlan {
        epsilon,
        delta,
        sigma,
        expected_batch: cfg.expected_batch,
        group_sizes: cfg.group_sizes(),
        phases,
    })
}

/// `eps_i^cum`: composed loss of phases `1..=i` under the naive plan.
pub fn per_phase_cumulative_budgets(plan: &NaivePlan, delta: f64) -> Result<Vec<f64>> {
    per_phase_cumulative_budgets_with(&Accountant::default(), plan, delta)
}

pub fn per_phase_cumulative_budgets_with(acc: &Accountant, plan: &NaivePlan, delta: f64) -> Result<Vec<f64>> {
    let mut history = acc.zero();
    plan.phases
        .iter()
        .map(|p| {
            history.add_assign(&acc.phase_curve(plan.sigma, p.q, p.steps)?)?;
            acc.epsilon(&history, delta)
        })
        .collect()
}

/// One phase of a two-rate plan. Phase 1 has no new group; its `q_new`
/// mirrors `q_old` and `new_size` is zero.
///
/// Old groups that entered with different selection losses need slightly
/// different rates to land on the same total; `old_rates[g]` holds group
/// `g`'s rate and `q_old` is their size-weighted mean, so
/// `q_old * old_size + q_new * new_size` is the expected batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplifiedPhase {
    pub phase: usize,
    pub steps: u64,
    pub sigma: f64,
    pub q_old: f64,
    pub q_new: f64,
    pub old_rates: Vec<f64>,
    pub old_size: usize,
    pub new_size: usize,
    pub target_epsilon: f64,
    pub expected_batch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplifiedPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub eps_sel: f64,
    pub base_sigma: f64,
    pub expected_batch: usize,
    pub group_sizes: Vec<usize>,
    pub phases: Vec<AmplifiedPhase>,
}

impl AmplifiedPlan {
    pub fn schedule(&self) -> TrainingSchedule {
        let phases = self
            .phases
            .iter()
            .map(|p| {
                let mut rates = p.old_rates.clone();
                if p.phase >= 2 {
                    rates.push(p.q_new);
                }
                vec![Segment {
                    steps: p.steps,
                    sigma: p.sigma,
                    rates,
                }]
            })
            .collect();
        TrainingSchedule { phases }
    }
}

/// A stretch of steps at fixed per-group rates. `rates[g]` is group `g`'s
/// Poisson rate; zero means the group sits the segment out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub steps: u64,
    pub sigma: f64,
    pub rates: Vec<f64>,
}

impl Segment {
    pub fn expected_batch(&self, group_sizes: &[usize]) -> f64 {
        self.rates
            .iter()
            .zip(group_sizes)
            .map(|(q, &s)| q * s as f64)
            .sum()
    }
}

/// What the trainer runs: per training phase, a list of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub phases: Vec<Vec<Segment>>,
}

impl TrainingSchedule {
    /// Training epsilon of every group after each phase, as the accountant
    /// predicts it from the schedule alone. Indexed `[phase][group]`.
    pub fn predicted_training_epsilon(&self, acc: &Accountant, delta: f64, groups: usize) -> Result<Vec<Vec<f64>>> {
        let mut histories = vec![acc.zero(); groups];
        let mut trained = vec![false; groups];
        let mut out = Vec::with_capacity(self.phases.len());
        for segments in &self.phases {
            for seg in segments {
                for (g, &q) in seg.rates.iter().enumerate() {
                    if q > 0.0 && seg.steps > 0 {
                        histories[g].add_assign(&acc.phase_curve(seg.sigma, q, seg.steps)?)?;
                        trained[g] = true;
                    }
                }
            }
            let row = histories
                .iter()
                .zip(&trained)
                .map(|(h, &t)| if t { acc.epsilon(h, delta) } else { Ok(0.0) })
                .collect::<Result<Vec<_>>>()?;
            out.push(row);
        }
        Ok(out)
    }
}

/// Per-group state while a two-rate plan is being solved.
struct GroupState {
    size: usize,
    selection_loss: f64,
    history: RdpCurve,
}

struct PhaseSolver<'a> {
    acc: &'a Accountant,
    delta: f64,
    target: f64,
    old: &'a [GroupState],
    new: &'a GroupState,
    phase: usize,
}

struct PhaseRates {
    old_rates: Vec<f64>,
    q_old: f64,
    q_new: f64,
    batch: f64,
}

impl PhaseSolver<'_> {
    fn rates(&self, sigma: f64, steps: u64) -> Result<PhaseRates> {
        let old_rates = self
            .old
            .iter()
            .map(|g| {
                let budget = self.target - g.selection_loss;
                Ok(self.acc.sample_rate_after(budget, self.delta, &g.history, sigma, steps)?.q)
            })
            .collect::<Result<Vec<f64>>>()?;
        let budget = self.target - self.new.selection_loss;
        if budget <= 0.0 {
            return Err(Error::SelectionExhaustsTraining {
                phase: self.phase,
                remaining: budget,
            });
        }
        let q_new = self
            .acc
            .sample_rate_after(budget, self.delta, &self.new.history, sigma, steps)?
            .q;
        let old_size: usize = self.old.iter().map(|g| g.size).sum();
        let old_batch: f64 = old_rates.iter().zip(self.old).map(|(q, g)| q * g.size as f64).sum();
        let batch = old_batch + q_new * self.new.size as f64;
        Ok(PhaseRates {
            q_old: old_batch / old_size as f64,
            old_rates,
            q_new,
            batch,
        })
    }

    /// Largest step count whose expected batch is still at least `b`, or 1.
    fn search_steps(&self, sigma: f64, start: u64, b: f64) -> Result<u64> {
        let at_least = |n: u64| -> Result<bool> { Ok(self.rates(sigma, n)?.batch >= b) };
        let start = start.max(1);
        if !at_least(start)? {
            // shrink: find the largest n < start with batch >= b
            let (mut lo, mut hi) = (0u64, start);
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if at_least(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(lo.max(1));
        }
        let (mut lo, mut hi) = (start, start.saturating_mul(2));
        while at_least(hi)? {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi > start.saturating_mul(1 << 20) {
                return Err(invalid("step search diverged"));
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if at_least(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Sigma at which the expected batch matches `b`, for fixed steps.
    fn tune_sigma(&self, sigma: f64, steps: u64, b: f64) -> Result<(f64, PhaseRates)> {
        let at = |s: f64| self.rates(s, steps);
        let first = at(sigma)?;
        if ((first.batch - b) / b).abs() <= BATCH_TOLERANCE {
            return Ok((sigma, first));
        }
        // expected batch grows with sigma
        let (mut lo, mut hi) = if first.batch > b {
            let mut lo = sigma;
            loop {
                lo *= 0.8;
                if at(lo)?.batch < b {
                    break (lo, sigma);
                }
                if lo < crate::accountant::SIGMA_BRACKET.0 {
                    return Err(invalid("sigma fine-tune left its bracket"));
                }
            }
        } else {
            let mut hi = sigma;
            loop {
                hi *= 1.25;
                if at(hi)?.batch >= b {
                    break (sigma, hi);
                }
                if hi > crate::accountant::SIGMA_BRACKET.1 {
                    return Err(invalid("sigma fine-tune left its bracket"));
                }
            }
        };
        let mut best = at(hi)?;
        let mut best_sigma = hi;
        for _ in 0..crate::accountant::MAX_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            let r = at(mid)?;
            let done = ((r.batch - b) / b).abs() <= BATCH_TOLERANCE || hi - lo <= 1e-15 * hi;
            let below = r.batch < b;
            if (r.batch - b).abs() < (best.batch - b).abs() {
                best_sigma = mid;
                best = r;
            }
            if done {
                break;
            }
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((best_sigma, best))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum StepMode {
    Amplify,
    KeepSteps,
}

fn two_rate_plan(
    acc: &Accountant,
    plan: &NaivePlan,
    delta: f64,
    eps_sel: f64,
    mode: StepMode,
) -> Result<AmplifiedPlan> {
    if !(eps_sel >= 0.0) {
        return Err(invalid("selection budget must be >= 0"));
    }
    let selection_phases = plan.phases.len() - 1;
    let per_phase_sel = if selection_phases == 0 { 0.0 } else { eps_sel / selection_phases as f64 };
    let targets = per_phase_cumulative_budgets_with(acc, plan, delta)?;
    let b = plan.expected_batch as f64;

    let mut groups: Vec<GroupState> = plan
        .group_sizes
        .iter()
        .enumerate()
        .map(|(g, &size)| GroupState {
            size,
            selection_loss: g as f64 * per_phase_sel,
            history: acc.zero(),
        })
        .collect();

    let mut phases = Vec::with_capacity(plan.phases.len());
    let first = &plan.phases[0];
    groups[0].history = acc.phase_curve(plan.sigma, first.q, first.steps)?;
    phases.push(AmplifiedPhase {
        phase: 1,
        steps: first.steps,
        sigma: plan.sigma,
        q_old: first.q,
        q_new: first.q,
        old_rates: vec![first.q],
        old_size: groups[0].size,
        new_size: 0,
        target_epsilon: targets[0],
        expected_batch: first.q * groups[0].size as f64,
    });

    for (idx, naive) in plan.phases.iter().enumerate().skip(1) {
        let (old, rest) = groups.split_at_mut(idx);
        let new = &mut rest[0];
        let solver = PhaseSolver {
            acc,
            delta,
            target: targets[idx],
            old,
            new,
            phase: naive.phase,
        };
        let steps = match mode {
            StepMode::Amplify => solver.search_steps(plan.sigma, naive.steps, b)?,
            StepMode::KeepSteps => naive.steps,
        };
        let (sigma, rates) = solver.tune_sigma(plan.sigma, steps, b)?;
        let old_size = old.iter().map(|g| g.size).sum();
        for (g, &q) in old.iter_mut().zip(&rates.old_rates) {
            g.history.add_assign(&acc.phase_curve(sigma, q, steps)?)?;
        }
        new.history = acc.phase_curve(sigma, rates.q_new, steps)?;
        phases.push(AmplifiedPhase {
            phase: naive.phase,
            steps,
            sigma,
            q_old: rates.q_old,
            q_new: rates.q_new,
            old_rates: rates.old_rates,
            old_size,
            new_size: new.size,
            target_epsilon: targets[idx],
            expected_batch: rates.batch,
        });
    }

    Ok(AmplifiedPlan {
        epsilon: plan.epsilon,
        delta,
        eps_sel,
        base_sigma: plan.sigma,
        expected_batch: plan.expected_batch,
        group_sizes: plan.group_sizes.clone(),
        phases,
    })
}

/// Step amplification: per phase, solve a shared old-group rate and a
/// new-group rate that land every group on the naive cumulative budget,
/// then raise the step count until the expected batch drops to `b` and
/// nudge sigma to close the remaining gap.
///
/// New groups enter with `g * eps_sel / T` already spent on selection and
/// are given correspondingly less training budget.
pub fn amplify(plan: &NaivePlan, delta: f64, eps_sel: f64) -> Result<AmplifiedPlan> {
    two_rate_plan(&Accountant::default(), plan, delta, eps_sel, StepMode::Amplify)
}

pub fn amplify_with(acc: &Accountant, plan: &NaivePlan, delta: f64, eps_sel: f64) -> Result<AmplifiedPlan> {
    two_rate_plan(acc, plan, delta, eps_sel, StepMode::Amplify)
}

/// Two-rate plan that keeps the naive step counts and only solves sigma.
pub fn noise_reduction_plan(plan: &NaivePlan, delta: f64, eps_sel: f64) -> Result<AmplifiedPlan> {
    two_rate_plan(&Accountant::default(), plan, delta, eps_sel, StepMode::KeepSteps)
}

pub fn noise_reduction_plan_with(acc: &Accountant, plan: &NaivePlan, delta: f64, eps_sel: f64) -> Result<AmplifiedPlan> {
    two_rate_plan(acc, plan, delta, eps_sel, StepMode::KeepSteps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualPhase {
    pub phase: usize,
    pub sigma: f64,
    /// Steps trained on the new group alone, at `prefix_q`.
    pub prefix_steps: u64,
    pub prefix_q: f64,
    /// Steps trained on everything at the uniform rate `joint_q`.
    pub joint_steps: u64,
    pub joint_q: f64,
    pub old_size: usize,
    pub new_size: usize,
    pub target_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub eps_sel: f64,
    pub sigma: f64,
    pub expected_batch: usize,
    pub group_sizes: Vec<usize>,
    pub phases: Vec<ContinualPhase>,
}

impl ContinualPlan {
    pub fn schedule(&self) -> TrainingSchedule {
        let phases = self
            .phases
            .iter()
            .map(|p| {
                let mut segments = Vec::new();
                if p.prefix_steps > 0 {
                    let mut rates = vec![0.0; p.phase];
                    rates[p.phase - 1] = p.prefix_q;
                    segments.push(Segment {
                        steps: p.prefix_steps,
                        sigma: p.sigma,
                        rates,
                    });
                }
                segments.push(Segment {
                    steps: p.joint_steps,
                    sigma: p.sigma,
                    rates: vec![p.joint_q; p.phase],
                });
                segments
            })
            .collect();
        TrainingSchedule { phases }
    }
}

/// Largest `n` in `0..=upper` with `ok(n)`, for `ok` monotone decreasing
/// and `ok(0)` assumed true.
fn largest_ok(upper: u64, mut ok: impl FnMut(u64) -> Result<bool>) -> Result<u64> {
    if ok(upper)? {
        return Ok(upper);
    }
    let (mut lo, mut hi) = (0u64, upper);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Continual variant: each phase first trains on the new group alone until
/// it catches up with the old groups, then trains jointly at the naive rate.
pub fn continual_plan(plan: &NaivePlan, delta: f64, eps_sel: f64) -> Result<ContinualPlan> {
    continual_plan_with(&Accountant::default(), plan, delta, eps_sel)
}

pub fn continual_plan_with(acc: &Accountant, plan: &NaivePlan, delta: f64, eps_sel: f64) -> Result<ContinualPlan> {
    if !(eps_sel >= 0.0) {
        return Err(invalid("selection budget must be >= 0"));
    }
    let selection_phases = plan.phases.len() - 1;
    let per_phase_sel = if selection_phases == 0 { 0.0 } else { eps_sel / selection_phases as f64 };
    let targets = per_phase_cumulative_budgets_with(acc, plan, delta)?;
    let b = plan.expected_batch as f64;
    let sigma = plan.sigma;
    let group_sizes = plan.group_sizes.clone();
    let mut histories: Vec<RdpCurve> = vec![acc.zero(); group_sizes.len()];
    let within = |h: &RdpCurve, extra: &[RdpCurve], budget: f64| -> Result<bool> {
        if extra.iter().all(|e| e.values().iter().all(|v| *v == 0.0)) {
            return Ok(true);
        }
        let mut total = h.clone();
        for e in extra {
            total.add_assign(e)?;
        }
        Ok(acc.epsilon(&total, delta)? <= budget)
    };

    let mut phases = Vec::with_capacity(plan.phases.len());
    for (idx, naive) in plan.phases.iter().enumerate() {
        let new_group = idx;
        let new_size = if idx == 0 { 0 } else { group_sizes[new_group] };
        let old_size: usize = group_sizes[..idx.max(1)].iter().sum();
        let joint_q = naive.q;
        let sel = new_group as f64 * per_phase_sel;

        let (prefix_steps, prefix_q) = if idx == 0 || new_size == 0 {
            (0, 0.0)
        } else {
            let prefix_q = (b / new_size as f64).min(1.0);
            let new_hist = &histories[new_group];
            let catch_up = targets[idx - 1] - sel;
            if targets[idx] - sel <= 0.0 {
                return Err(Error::SelectionExhaustsTraining {
                    phase: naive.phase,
                    remaining: targets[idx] - sel,
                });
            }
            if catch_up <= 0.0 {
                (0, 0.0)
            } else {
                // one step past the last one that fits, at a rate trimmed so
                // the prefix lands exactly on the catch-up budget
                let m = largest_ok(u64::MAX >> 12, |m| {
                    let prefix = acc.phase_curve(sigma, prefix_q, m)?;
                    within(new_hist, std::slice::from_ref(&prefix), catch_up)
                })? + 1;
                let r = acc.sample_rate_after(catch_up, delta, new_hist, sigma, m)?;
                (m, r.q.min(prefix_q))
            }
        };
        if prefix_steps > 0 {
            let prefix = acc.phase_curve(sigma, prefix_q, prefix_steps)?;
            histories[new_group].add_assign(&prefix)?;
        }
        // the uniform joint segment must keep every group inside its budget
        let joint_steps = largest_ok(naive.steps, |n| {
            let joint = acc.phase_curve(sigma, joint_q, n)?;
            for (g, h) in histories.iter().enumerate().take(idx + 1) {
                let budget = targets[idx] - g as f64 * per_phase_sel;
                if !within(h, std::slice::from_ref(&joint), budget + 1e-12)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })?;
        let joint = acc.phase_curve(sigma, joint_q, joint_steps)?;
        for h in histories.iter_mut().take(idx + 1) {
            h.add_assign(&joint)?;
        }
        phases.push(ContinualPhase {
            phase: naive.phase,
            sigma,
            prefix_steps,
            prefix_q,
            joint_steps,
            joint_q,
            old_size,
            new_size,
            target_epsilon: targets[idx],
        });
    }
    Ok(ContinualPlan {
        epsilon: plan.epsilon,
        delta,
        eps_sel,
        sigma,
        expected_batch: plan.expected_batch,
        group_sizes,
        phases,
    })
}

#[cfg(test)]
mod tests;
