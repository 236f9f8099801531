//! Renyi-DP accounting for Poisson-subsampled Gaussian mechanisms.
//!
//! Privacy loss is tracked as an [`RdpCurve`] over a fixed grid of Renyi
//! orders. Curves from phases with different `(sigma, q, steps)` compose by
//! element-wise addition and are converted to an `(epsilon, delta)` pair only
//! at the end. The inverse problems (noise multiplier for a target budget,
//! sampling rate for a target budget) are solved by bisection.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Bound, Error, Result};

/// Bracket for the noise-multiplier search.
pub const SIGMA_BRACKET: (f64, f64) = (1e-3, 1e4);
/// Bracket for the sampling-rate search.
pub const Q_BRACKET: (f64, f64) = (1e-9, 1.0);
/// Relative width at which the bisections stop.
pub const SOLVER_TOLERANCE: f64 = 1e-12;
/// Hard cap on bisection iterations.
pub const MAX_ITERATIONS: usize = 200;

const MAX_ORDER: usize = 256;

/// `{1.5, 1.75, 2, 2.25, 2.5, 3, 3.5, 4, 5, ..., 63, 128, 256}`.
pub fn default_orders() -> Vec<f64> {
    let mut orders = vec![1.5, 1.75, 2.0, 2.25, 2.5, 3.0, 3.5];
    orders.extend((4..=63).map(f64::from));
    orders.extend([128.0, 256.0]);
    orders
}

fn validate_orders(orders: &[f64]) -> Result<()> {
    if orders.is_empty() {
        return Err(invalid("empty order grid"));
    }
    if !orders.iter().all(|&a| a.is_finite() && a > 1.0) {
        return Err(invalid("Renyi orders must be finite and > 1"));
    }
    if !orders.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("Renyi orders must be strictly increasing"));
    }
    if orders.iter().any(|a| a.ceil() as usize > MAX_ORDER) {
        return Err(invalid(format!("Renyi orders above {MAX_ORDER} unsupported")));
    }
    Ok(())
}

/// Privacy loss as a function of the Renyi order.
///
/// An entry of `+inf` marks an order where the bound is unusable; such
/// orders are skipped by [`rdp_to_dp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    orders: Vec<f64>,
    values: Vec<f64>,
}

impl RdpCurve {
    pub fn new(orders: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_orders(&orders)?;
        if orders.len() != values.len() {
            return Err(invalid("orders and values differ in length"));
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(invalid("RDP values must be non-negative"));
        }
        Ok(Self { orders, values })
    }

    pub fn zero(orders: &[f64]) -> Result<Self> {
        Self::new(orders.to_vec(), vec![0.0; orders.len()])
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether the order at `idx` carries a finite bound.
    pub fn is_usable(&self, idx: usize) -> bool {
        self.values[idx].is_finite()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { v * factor })
            .collect();
        Self {
            orders: self.orders.clone(),
            values,
        }
    }

    pub fn add_assign(&mut self, other: &RdpCurve) -> Result<()> {
        if self.orders != other.orders {
            return Err(Error::GridMismatch);
        }
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += o;
        }
        Ok(())
    }
}

/// `steps` applications of a Poisson-subsampled Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPhaseEvent {
    pub sigma: f64,
    pub q: f64,
    pub steps: u64,
}

impl GaussianPhaseEvent {
    pub fn new(sigma: f64, q: f64, steps: u64) -> Result<Self> {
        let event = Self { sigma, q, steps };
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid(format!("noise multiplier must be > 0, got {}", self.sigma)));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(invalid(format!("sampling rate must lie in (0, 1], got {}", self.q)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta: f64,
    pub best_order: f64,
}

fn ln_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(MAX_ORDER + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=MAX_ORDER {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln(e^c - 1)` for `c > 0`.
fn ln_expm1(c: f64) -> f64 {
    if c > 40.0 {
        c + (-(-c).exp()).ln_1p()
    } else {
        c.exp_m1().ln()
    }
}

/// `ln(1 + e^x)`.
fn ln1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// One-step RDP at integer order `alpha` of the Poisson-subsampled Gaussian.
///
/// The binomial moment `A = sum_j C(a,j) (1-q)^(a-j) q^j exp(j(j-1)/(2 s^2))`
/// is rewritten as `1 + S` with `S = sum_{j>=2} C(a,j) (1-q)^(a-j) q^j
/// expm1(j(j-1)/(2 s^2))`; every term of `S` is positive, so `ln S` is taken
/// with a max-shifted log-sum-exp and `ln A = ln1p(S)` keeps full relative
/// precision even when `S` is tiny.
fn rdp_one_step_integer(sigma: f64, q: f64, alpha: usize) -> f64 {
    debug_assert!(alpha >= 2);
    let lf = ln_factorials();
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);

    let mut terms = Vec::with_capacity(alpha - 1);
    for j in 2..=alpha {
        let rest = alpha - j;
        let ln_binom = lf[alpha] - lf[j] - lf[rest];
        let ln_keep = if rest == 0 { 0.0 } else { rest as f64 * ln_1mq };
        let jf = j as f64;
        let t = ln_binom + ln_keep + jf * ln_q + ln_expm1(jf * (jf - 1.0) * inv_two_var);
        terms.push(t);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let ln_s = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    ln1p_exp(ln_s) / (alpha as f64 - 1.0)
}

/// Per-order RDP of `event.steps` compositions of the subsampled Gaussian.
///
/// Fractional orders are charged the bound at the next integer order, which
/// is valid because RDP is nondecreasing in the order.
pub fn rdp_subsampled_gaussian(event: &GaussianPhaseEvent, orders: &[f64]) -> Result<RdpCurve> {
    event.validate()?;
    validate_orders(orders)?;
    let values = orders
        .iter()
        .map(|&alpha| {
            if event.steps == 0 {
                return 0.0;
            }
            let per_step = rdp_one_step_integer(event.sigma, event.q, alpha.ceil() as usize);
            let total = per_step * event.steps as f64;
            if total.is_finite() {
                total
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(RdpCurve {
        orders: orders.to_vec(),
        values,
    })
}

/// Element-wise sum of curves sharing one order grid.
pub fn compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let (first, rest) = curves
        .split_first()
        .ok_or_else(|| invalid("nothing to compose"))?;
    let mut acc = first.clone();
    for c in rest {
        acc.add_assign(c)?;
    }
    Ok(acc)
}

/// `eps(a) = rdp(a) + ln((a-1)/a) - (ln delta + ln a)/(a-1)`, minimized over
/// the usable orders and clamped at zero.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<DpGuarantee> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let ln_delta = delta.ln();
    let mut best: Option<(f64, f64)> = None;
    for (&alpha, &rdp) in curve.orders.iter().zip(&curve.values) {
        if !rdp.is_finite() {
            continue;
        }
        let eps = rdp + ((alpha - 1.0) / alpha).ln() - (ln_delta + alpha.ln()) / (alpha - 1.0);
        if eps.is_finite() && best.is_none_or(|(b, _)| eps < b) {
            best = Some((eps, alpha));
        }
    }
    let (epsilon, best_order) = best.ok_or(Error::NoValidGuarantee)?;
    Ok(DpGuarantee {
        epsilon: epsilon.max(0.0),
        delta,
        best_order,
    })
}

/// `eps_sel / T`: per-phase selection budget under basic composition.
pub fn laplace_epsilon_per_phase(eps_sel: f64, phases: usize) -> Result<f64> {
    if phases == 0 {
        return Err(invalid("at least one selection phase required"));
    }
    if !(eps_sel >= 0.0) {
        return Err(invalid("selection budget must be >= 0"));
    }
    Ok(eps_sel / phases as f64)
}

/// Result of a sampling-rate search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRate {
    pub q: f64,
    /// `true` when even `q = 1` leaves budget unspent.
    pub saturated: bool,
}

/// Accountant bound to one order grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Accountant {
    orders: Vec<f64>,
}

impl Default for Accountant {
    fn default() -> Self {
        Self {
            orders: default_orders(),
        }
    }
}

impl Accountant {
    pub fn with_orders(orders: Vec<f64>) -> Result<Self> {
        validate_orders(&orders)?;
        Ok(Self { orders })
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn zero(&self) -> RdpCurve {
        RdpCurve {
            orders: self.orders.clone(),
            values: vec![0.0; self.orders.len()],
        }
    }

    pub fn phase_curve(&self, sigma: f64, q: f64, steps: u64) -> Result<RdpCurve> {
        rdp_subsampled_gaussian(&GaussianPhaseEvent::new(sigma, q, steps)?, &self.orders)
    }

    /// Heterogeneous composition of phases sharing one noise multiplier.
    pub fn history(&self, sigma: f64, steps: &[u64], qs: &[f64]) -> Result<RdpCurve> {
        if steps.len() != qs.len() {
            return Err(invalid("steps and sampling rates differ in length"));
        }
        let mut acc = self.zero();
        for (&n, &q) in steps.iter().zip(qs) {
            acc.add_assign(&self.phase_curve(sigma, q, n)?)?;
        }
        Ok(acc)
    }

    pub fn epsilon(&self, curve: &RdpCurve, delta: f64) -> Result<f64> {
        Ok(rdp_to_dp(curve, delta)?.epsilon)
    }

    pub fn get_epsilon(&self, delta: f64, sigma: f64, steps: &[u64], qs: &[f64]) -> Result<f64> {
        self.epsilon(&self.history(sigma, steps, qs)?, delta)
    }

    /// Smallest noise multiplier whose composed epsilon stays within target.
    pub fn get_noise_multiplier(
        &self,
        epsilon_target: f64,
        delta: f64,
        steps: &[u64],
        qs: &[f64],
    ) -> Result<f64> {
        if !(epsilon_target > 0.0 && epsilon_target.is_finite()) {
            return Err(invalid("target epsilon must be > 0"));
        }
        if steps.len() != qs.len() {
            return Err(invalid("steps and sampling rates differ in length"));
        }
        let eps_at = |sigma: f64| -> Result<f64> {
            match self.get_epsilon(delta, sigma, steps, qs) {
                Err(Error::NoValidGuarantee) => Ok(f64::INFINITY),
                other => other,
            }
        };
        let (mut lo, mut hi) = SIGMA_BRACKET;
        if eps_at(hi)? > epsilon_target {
            return Err(Error::Unreachable {
                parameter: "sigma",
                bound: Bound::Upper,
                value: hi,
                target: epsilon_target,
            });
        }
        if eps_at(lo)? <= epsilon_target {
            return Err(Error::Unreachable {
                parameter: "sigma",
                bound: Bound::Lower,
                value: lo,
                target: epsilon_target,
            });
        }
        // invariant: eps(lo) > target >= eps(hi)
        for _ in 0..MAX_ITERATIONS {
            if hi / lo - 1.0 <= SOLVER_TOLERANCE {
                break;
            }
            let mid = (lo * hi).sqrt();
            if eps_at(mid)? > epsilon_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Sampling rate for one more phase of `steps` at `sigma`, given the
    /// RDP already spent in `history`, such that the total hits the target.
    pub fn sample_rate_after(
        &self,
        epsilon_target: f64,
        delta: f64,
        history: &RdpCurve,
        sigma: f64,
        steps: u64,
    ) -> Result<SampleRate> {
        if !(epsilon_target > 0.0) {
            return Err(invalid("target epsilon must be > 0"));
        }
        let eps_at = |q: f64| -> Result<f64> {
            let mut total = history.clone();
            total.add_assign(&self.phase_curve(sigma, q, steps)?)?;
            match self.epsilon(&total, delta) {
                Err(Error::NoValidGuarantee) => Ok(f64::INFINITY),
                other => other,
            }
        };
        let (mut lo, mut hi) = Q_BRACKET;
        if eps_at(hi)? <= epsilon_target {
            return Ok(SampleRate {
                q: 1.0,
                saturated: true,
            });
        }
        let spent = eps_at(lo)?;
        if spent >= epsilon_target {
            return Err(Error::BudgetExhausted {
                spent,
                target: epsilon_target,
            });
        }
        // invariant: eps(lo) <= target < eps(hi)
        for _ in 0..MAX_ITERATIONS {
            if hi / lo - 1.0 <= SOLVER_TOLERANCE {
                break;
            }
            let mid = (lo * hi).sqrt();
            if eps_at(mid)? > epsilon_target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(SampleRate {
            q: lo,
            saturated: false,
        })
    }

    /// Sampling rate for the last phase listed in `steps`, with the earlier
    /// phases run at the rates in `q_history`.
    pub fn get_sample_rate(
        &self,
        epsilon_target: f64,
        delta: f64,
        sigma: f64,
        steps: &[u64],
        q_history: &[f64],
    ) -> Result<SampleRate> {
        let (&last, earlier) = steps
            .split_last()
            .ok_or_else(|| invalid("at least one phase required"))?;
        if earlier.len() != q_history.len() {
            return Err(invalid("q_history must cover all phases except the last"));
        }
        let history = self.history(sigma, earlier, q_history)?;
        self.sample_rate_after(epsilon_target, delta, &history, sigma, last)
    }
}

/// [`Accountant::get_epsilon`] on the default order grid.
pub fn get_epsilon(delta: f64, sigma: f64, steps: &[u64], qs: &[f64]) -> Result<f64> {
    Accountant::default().get_epsilon(delta, sigma, steps, qs)
}

/// [`Accountant::get_noise_multiplier`] on the default order grid.
pub fn get_noise_multiplier(epsilon_target: f64, delta: f64, steps: &[u64], qs: &[f64]) -> Result<f64> {
    Accountant::default().get_noise_multiplier(epsilon_target, delta, steps, qs)
}

/// [`Accountant::get_sample_rate`] on the default order grid.
pub fn get_sample_rate(
    epsilon_target: f64,
    delta: f64,
    sigma: f64,
    steps: &[u64],
    q_history: &[f64],
) -> Result<SampleRate> {
    Accountant::default().get_sample_rate(epsilon_target, delta, sigma, steps, q_history)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the binomial moment without any log-space tricks,
    /// usable for small orders only.
    fn naive_rdp(sigma: f64, q: f64, alpha: u32) -> f64 {
        let mut sum = 0.0;
        for j in 0..=alpha {
            let mut binom = 1.0;
            for t in 0..j {
                binom *= (alpha - t) as f64 / (t + 1) as f64;
            }
            let jf = j as f64;
            sum += binom
                * (1.0 - q).powi((alpha - j) as i32)
                * q.powi(j as i32)
                * (jf * (jf - 1.0) / (2.0 * sigma * sigma)).exp();
        }
        sum.ln() / (alpha as f64 - 1.0)
    }

    #[test]
    fn unsubsampled_gaussian_at_order_two() {
        let c = rdp_subsampled_gaussian(&GaussianPhaseEvent::new(1.0, 1.0, 1).unwrap(), &[2.0]).unwrap();
        assert!((c.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_two_closed_form_small_q() {
        let c = rdp_subsampled_gaussian(&GaussianPhaseEvent::new(1.0, 0.01, 1).unwrap(), &[2.0]).unwrap();
        let expected = (1e-4 * (1f64.exp() - 1.0)).ln_1p();
        assert!((c.values()[0] - expected).abs() / expected < 1e-12);
        assert!((c.values()[0] - 1.7181e-4).abs() < 1e-8);
        let ten = rdp_subsampled_gaussian(&GaussianPhaseEvent::new(1.0, 0.01, 10).unwrap(), &[2.0]).unwrap();
        assert!((ten.values()[0] - 10.0 * expected).abs() / expected < 1e-12);
    }

    #[test]
    fn matches_direct_sum_at_small_orders() {
        for &(sigma, q) in &[(0.8, 0.3), (2.0, 0.05), (1.2, 0.9)] {
            for alpha in 2..=8u32 {
                let got = rdp_one_step_integer(sigma, q, alpha as usize);
                let want = naive_rdp(sigma, q, alpha);
                assert!((got - want).abs() / want < 1e-10, "sigma={sigma} q={q} a={alpha}");
            }
        }
    }

    #[test]
    fn fractional_orders_round_up() {
        let ev = GaussianPhaseEvent::new(2.0, 0.1, 3).unwrap();
        let c = rdp_subsampled_gaussian(&ev, &[1.5, 2.0, 2.25, 3.0]).unwrap();
        assert_eq!(c.values()[0], c.values()[1]);
        assert_eq!(c.values()[2], c.values()[3]);
    }

    #[test]
    fn large_orders_stay_finite() {
        let ev = GaussianPhaseEvent::new(0.5, 0.5, 1).unwrap();
        let c = rdp_subsampled_gaussian(&ev, &default_orders()).unwrap();
        assert!(c.values().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn zero_steps_is_zero_curve() {
        let ev = GaussianPhaseEvent::new(1.0, 0.3, 0).unwrap();
        let c = rdp_subsampled_gaussian(&ev, &default_orders()).unwrap();
        assert_eq!(c, RdpCurve::zero(&default_orders()).unwrap());
    }

    #[test]
    fn invalid_events_rejected() {
        assert!(GaussianPhaseEvent::new(0.0, 0.5, 1).is_err());
        assert!(GaussianPhaseEvent::new(1.0, 0.0, 1).is_err());
        assert!(GaussianPhaseEvent::new(1.0, 1.5, 1).is_err());
        assert!(RdpCurve::new(vec![2.0, 1.5], vec![0.0, 0.0]).is_err());
        assert!(RdpCurve::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn compose_identities_and_mismatch() {
        let acc = Accountant::default();
        let c = acc.phase_curve(1.3, 0.2, 7).unwrap();
        assert_eq!(compose(std::slice::from_ref(&c)).unwrap(), c);
        assert_eq!(compose(&[c.clone(), acc.zero()]).unwrap(), c);
        let doubled = compose(&[c.clone(), c.clone()]).unwrap();
        for (d, v) in doubled.values().iter().zip(c.values()) {
            assert_eq!(*d, 2.0 * v);
        }
        let other = RdpCurve::zero(&[2.0, 3.0]).unwrap();
        assert!(matches!(compose(&[c, other]), Err(Error::GridMismatch)));
        assert!(compose(&[]).is_err());
    }

    #[test]
    fn zero_curve_conversion_shrinks_with_max_order() {
        let delta = 1e-5;
        let small = rdp_to_dp(&RdpCurve::zero(&[2.0, 4.0, 8.0]).unwrap(), delta).unwrap();
        let large = rdp_to_dp(&RdpCurve::zero(&[2.0, 4.0, 8.0, 64.0, 256.0]).unwrap(), delta).unwrap();
        let bound_at = |a: f64| ((a - 1.0) / a).ln() - (delta.ln() + a.ln()) / (a - 1.0);
        assert!(small.epsilon <= bound_at(8.0) + 1e-15);
        assert!(large.epsilon <= bound_at(256.0) + 1e-15);
        assert!(large.epsilon < small.epsilon);
    }

    #[test]
    fn unusable_orders_are_skipped() {
        let curve = RdpCurve::new(vec![2.0, 3.0], vec![f64::INFINITY, 0.5]).unwrap();
        let g = rdp_to_dp(&curve, 1e-5).unwrap();
        assert_eq!(g.best_order, 3.0);
        let dead = RdpCurve::new(vec![2.0], vec![f64::INFINITY]).unwrap();
        assert!(matches!(rdp_to_dp(&dead, 1e-5), Err(Error::NoValidGuarantee)));
        assert!(rdp_to_dp(&curve, 0.0).is_err());
        assert!(rdp_to_dp(&curve, 1.0).is_err());
    }

    #[test]
    fn laplace_split() {
        assert_eq!(laplace_epsilon_per_phase(2.0, 4).unwrap(), 0.5);
        assert_eq!(laplace_epsilon_per_phase(0.0, 4).unwrap(), 0.0);
        assert_eq!(laplace_epsilon_per_phase(2.0, 1).unwrap(), 2.0);
        assert!(laplace_epsilon_per_phase(2.0, 0).is_err());
    }

    #[test]
    fn noise_multiplier_round_trip() {
        let (delta, steps, qs) = (1e-5, [500u64], [0.01]);
        let sigma = get_noise_multiplier(8.0, delta, &steps, &qs).unwrap();
        let eps = get_epsilon(delta, sigma, &steps, &qs).unwrap();
        assert!((8.0 * (1.0 - 1e-3)..=8.0).contains(&eps), "eps={eps}");
    }

    #[test]
    fn noise_multiplier_bounds() {
        // a single unsubsampled step at the smallest sigma already reaches a tiny target
        let err = get_noise_multiplier(1e-9, 1e-5, &[1], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Unreachable { bound: Bound::Upper, .. }));
        let err = get_noise_multiplier(1e9, 1e-5, &[1], &[1e-6]).unwrap_err();
        assert!(matches!(err, Error::Unreachable { bound: Bound::Lower, .. }));
    }

    #[test]
    fn sample_rate_round_trip_and_flags() {
        let (delta, sigma) = (1e-4, 1.5);
        let eps = get_epsilon(delta, sigma, &[200], &[0.05]).unwrap();
        let r = get_sample_rate(eps, delta, sigma, &[200], &[]).unwrap();
        assert!(!r.saturated);
        assert!((r.q - 0.05).abs() < 1e-4);

        let huge = get_sample_rate(1e6, delta, sigma, &[200], &[]).unwrap();
        assert_eq!(huge, SampleRate { q: 1.0, saturated: true });

        let spent = get_epsilon(delta, sigma, &[200], &[0.05]).unwrap();
        let exhausted = get_sample_rate(spent, delta, sigma, &[200, 50], &[0.05]);
        assert!(matches!(exhausted, Err(Error::BudgetExhausted { .. })));
    }
}
