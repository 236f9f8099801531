use super::*;

fn appendix_config() -> PoolConfig {
    PoolConfig {
        initial_labeled: 10_000,
        query_size: 3_750,
        labeling_budget: 25_000,
        expected_batch: 4_096,
        epochs_per_phase: 30,
        pool_size: 50_000,
        query_schedule: None,
    }
}

fn small_config() -> PoolConfig {
    PoolConfig {
        initial_labeled: 200,
        query_size: 100,
        labeling_budget: 600,
        expected_batch: 50,
        epochs_per_phase: 5,
        pool_size: 2_000,
        query_schedule: None,
    }
}

const DELTA: f64 = 4e-4;

fn totals(schedule: &TrainingSchedule, delta: f64, groups: usize, sel_per_phase: f64) -> Vec<Vec<f64>> {
    let training = schedule
        .predicted_training_epsilon(&Accountant::default(), delta, groups)
        .unwrap();
    training
        .into_iter()
        .enumerate()
        .map(|(idx, row)| {
            // groups that have trained by phase idx+1 are 0..=idx
            row.into_iter()
                .take(idx + 1)
                .enumerate()
                .map(|(g, e)| e + g as f64 * sel_per_phase)
                .collect()
        })
        .collect()
}

fn spread(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::MIN, f64::max);
    let min = row.iter().copied().fold(f64::MAX, f64::min);
    max - min
}

#[test]
fn naive_rates_and_steps_for_appendix_config() {
    let plan = naive_plan(&appendix_config(), 8.0, DELTA).unwrap();
    let expected_q = [0.4096, 0.297891, 0.234057, 0.192753, 0.16384];
    for (p, q) in plan.phases.iter().zip(expected_q) {
        assert!((p.q - q).abs() < 1e-6, "{} vs {}", p.q, q);
    }
    assert_eq!(plan.steps(), vec![73, 100, 128, 155, 183]);
    assert!(plan.rates().windows(2).all(|w| w[1] < w[0]));
    assert!(plan.steps().windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn published_multiplier_matches_delta_1e5() {
    // This accountant reproduces the published multiplier 4.08 at delta = 1e-5.
    let plan = naive_plan(&appendix_config(), 8.0, 1e-5).unwrap();
    assert!((plan.sigma - 4.08).abs() / 4.08 < 0.01, "sigma = {}", plan.sigma);
}

#[test]
fn single_selection_phase() {
    let mut cfg = small_config();
    cfg.query_size = cfg.labeling_budget - cfg.initial_labeled;
    let plan = naive_plan(&cfg, 8.0, DELTA).unwrap();
    assert_eq!(cfg.selection_phases(), 1);
    assert_eq!(plan.phases.len(), 2);
}

#[test]
fn config_validation() {
    let mut cfg = small_config();
    cfg.labeling_budget = 100;
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.expected_batch = 201;
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.query_size = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.query_schedule = Some(vec![300, 300]);
    assert!(cfg.validate().is_err());
    cfg.query_schedule = Some(vec![250, 100, 50]);
    assert_eq!(cfg.dataset_sizes(), vec![200, 450, 550, 600]);
}

#[test]
fn cumulative_budgets_shape() {
    let plan = naive_plan(&appendix_config(), 8.0, DELTA).unwrap();
    let cum = per_phase_cumulative_budgets(&plan, DELTA).unwrap();
    assert_eq!(cum.len(), 5);
    assert!(cum.windows(2).all(|w| w[1] > w[0]));
    let last = *cum.last().unwrap();
    assert!((8.0 * 0.999..=8.0).contains(&last));
    let increments: Vec<f64> = cum.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(increments.iter().all(|d| *d > 0.0));
    assert!(increments.windows(2).all(|w| w[1] < w[0]), "{increments:?}");
}

fn check_two_rate(plan: &NaivePlan, amp: &AmplifiedPlan, eps_sel: f64) {
    let t = plan.phases.len() - 1;
    let sel = eps_sel / t as f64;
    let b = plan.expected_batch as f64;
    for p in &amp.phases {
        let batch = p.q_old * p.old_size as f64 + p.q_new * p.new_size as f64;
        assert!(((batch - b) / b).abs() <= 1e-6, "phase {}: batch {batch}", p.phase);
        if p.phase >= 2 {
            assert!(p.q_new >= p.q_old, "phase {}", p.phase);
        }
    }
    let rows = totals(&amp.schedule(), plan.delta, plan.group_sizes.len(), sel);
    for (row, p) in rows.iter().zip(&amp.phases) {
        assert!(spread(row) <= 0.01 * plan.epsilon, "phase {}: {row:?}", p.phase);
        assert!(row.iter().all(|e| (e - p.target_epsilon).abs() <= 0.01 * p.target_epsilon));
        assert!(row.iter().all(|e| *e <= plan.epsilon + BUDGET_SLACK));
    }
}

#[test]
fn step_amplification_without_selection_cost() {
    let plan = naive_plan(&appendix_config(), 8.0, DELTA).unwrap();
    let amp = amplify(&plan, DELTA, 0.0).unwrap();
    check_two_rate(&plan, &amp, 0.0);
    for (a, n) in amp.phases.iter().zip(&plan.phases).skip(1) {
        assert!(a.q_new > a.q_old);
        assert!(a.steps >= n.steps);
    }
    assert_eq!(amp.phases[0].steps, plan.phases[0].steps);
}

#[test]
fn step_amplification_with_selection_cost() {
    let cfg = small_config();
    let plan = naive_plan(&cfg, 8.0, DELTA).unwrap();
    let amp = amplify(&plan, DELTA, 2.0).unwrap();
    check_two_rate(&plan, &amp, 2.0);
}

#[test]
fn plans_are_deterministic() {
    let plan = naive_plan(&small_config(), 8.0, DELTA).unwrap();
    let a = amplify(&plan, DELTA, 1.0).unwrap();
    let b = amplify(&plan, DELTA, 1.0).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn selection_budget_can_exhaust_training() {
    let plan = naive_plan(&small_config(), 8.0, DELTA).unwrap();
    let err = amplify(&plan, DELTA, 40.0).unwrap_err();
    assert!(matches!(err, Error::SelectionExhaustsTraining { phase: 2, .. }), "{err}");
}

#[test]
fn noise_reduction_keeps_steps() {
    let plan = naive_plan(&small_config(), 8.0, DELTA).unwrap();
    let nr = noise_reduction_plan(&plan, DELTA, 0.0).unwrap();
    let steps: Vec<u64> = nr.phases.iter().map(|p| p.steps).collect();
    assert_eq!(steps, plan.steps());
    check_two_rate(&plan, &nr, 0.0);
    assert!(nr.phases.iter().skip(1).all(|p| p.sigma < plan.sigma));
}

#[test]
fn continual_catches_up_then_trains_jointly() {
    let plan = naive_plan(&small_config(), 8.0, DELTA).unwrap();
    let c = continual_plan(&plan, DELTA, 0.0).unwrap();
    let acc = Accountant::default();
    let cum = per_phase_cumulative_budgets(&plan, DELTA).unwrap();
    // after the prefix the new group sits within 1% of the old groups
    let mut new_hist = acc.zero();
    for p in c.phases.iter().skip(1) {
        new_hist = acc.zero();
        if p.prefix_steps > 0 {
            new_hist = acc.phase_curve(p.sigma, p.prefix_q, p.prefix_steps).unwrap();
        }
        let caught_up = acc.epsilon(&new_hist, DELTA).unwrap();
        assert!((cum[p.phase - 2] - caught_up).abs() <= 0.01 * plan.epsilon, "phase {}", p.phase);
    }
    assert!(new_hist.values().iter().any(|v| *v > 0.0));
    let rows = totals(&c.schedule(), DELTA, plan.group_sizes.len(), 0.0);
    assert!(rows.last().unwrap().iter().all(|e| *e <= plan.epsilon + BUDGET_SLACK));
    assert!(c.schedule().phases.iter().skip(1).all(|segs| segs.len() == 2));
}

#[test]
fn continual_without_new_points_is_naive() {
    let mut cfg = small_config();
    cfg.query_size = 1;
    cfg.labeling_budget = cfg.initial_labeled;
    let plan = naive_plan(&cfg, 8.0, DELTA).unwrap();
    let c = continual_plan(&plan, DELTA, 0.0).unwrap();
    assert_eq!(c.schedule(), plan.schedule());
}
