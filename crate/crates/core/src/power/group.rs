//! Per-group rate maximization: the strong user is served at the highest
//! admissible power, the weak user's power comes out of a Dinkelbach outer
//! loop around a Lagrangian dual ascent with gradient projection.

use serde::{Deserialize, Serialize};

use super::QoSBounds;
use crate::rate::RatePath;

/// One user's precomputed rate machinery: spectral rate curve, electrical
/// SINR coefficient (c rho^2 f^2 folded with any channel-magnitude scaling
/// the caller applies) and composite noise variance.
#[derive(Debug, Clone)]
pub struct UserPath {
    pub user_id: usize,
    pub path: RatePath,
    /// Coefficient multiplying powers inside the SINR.
    pub elec_gain: f64,
    /// Noise variance in the same units as `elec_gain * power`.
    pub sigma2: f64,
}

/// The pair of rate paths forming one group. `None` marks a virtual
/// zero-rate member appended to balance the classes.
#[derive(Debug, Clone)]
pub struct GroupChannel {
    pub weak: Option<UserPath>,
    pub strong: Option<UserPath>,
}

/// Solver tolerances and step schedule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Dinkelbach termination on |L(xi)|.
    pub tol_dink: f64,
    /// Complementary-slackness residual tolerance.
    pub comp_tol: f64,
    /// Initial multiplier step size.
    pub step_size: f64,
    /// Geometric step decay per inner iteration.
    pub step_decay: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Strict-inequality gap realizing p_w > P_s^T.
    pub delta: f64,
    /// Target-ramp steps from r_max down to r_min.
    pub ramp_steps: usize,
}

impl SolverConfig {
    /// Defaults scaled to a network power budget.
    pub fn for_power_budget(p_max: f64) -> Self {
        Self {
            tol_dink: 1e-6,
            comp_tol: 1e-4,
            step_size: 0.05,
            step_decay: 0.99,
            max_outer: 500,
            max_inner: 200,
            delta: 1e-9 * p_max,
            ramp_steps: 10,
        }
    }
}

/// Multipliers and convergence diagnostics of one Dinkelbach solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DinkelbachState {
    /// Rate-per-watt parameter at termination.
    pub xi: f64,
    /// Budget multiplier.
    pub alpha: f64,
    /// NOMA-ordering multiplier (p_w > P_s^T).
    pub mu: f64,
    /// Rate-cap multiplier.
    pub lambda_max: f64,
    /// Rate-floor multiplier.
    pub nu_min: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// |L(xi)| at the last completed outer iteration.
    pub residual: f64,
    pub converged: bool,
}

/// Why a group could not be served.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Infeasibility {
    /// Budget leaves no room for p_w > P_s^T.
    BudgetBelowThreshold,
    /// Even the full budget cannot reach the minimum rate.
    RateBelowMin,
    /// The rate cap is already exceeded at the minimum admissible power.
    RateAboveMaxAtFloor,
    /// Solver diagnostics, distinct from constraint infeasibility.
    NonConvergence(String),
}

/// Solution of one (group, budget) problem. Infeasible solutions stand in
/// for the recursion's minus-infinity sentinel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSolution {
    pub group: usize,
    pub p_w: f64,
    pub p_s: f64,
    pub rate_weak: f64,
    pub rate_strong: f64,
    /// Total consumed power p_w + p_s, watts.
    pub consumed: f64,
    pub feasible: bool,
    pub infeasibility: Option<Infeasibility>,
    #[serde(skip)]
    pub state: Option<DinkelbachState>,
    /// Rate-function evaluations spent on this solve (instrumentation).
    pub rate_evals: u64,
}

impl GroupSolution {
    pub fn total_rate(&self) -> f64 {
        self.rate_weak + self.rate_strong
    }

    fn infeasible(group: usize, why: Infeasibility, rate_evals: u64) -> Self {
        Self {
            group,
            p_w: 0.0,
            p_s: 0.0,
            rate_weak: 0.0,
            rate_strong: 0.0,
            consumed: 0.0,
            feasible: false,
            infeasibility: Some(why),
            state: None,
            rate_evals,
        }
    }
}

/// Single-user rate curve in the weak-user power variable, with evaluation
/// counting for the complexity instrumentation.
struct PowerCurve<'a> {
    path: &'a RatePath,
    /// gamma = coef * p.
    coef: f64,
    evals: u64,
}

impl<'a> PowerCurve<'a> {
    fn new(path: &'a RatePath, coef: f64) -> Self {
        Self { path, coef, evals: 0 }
    }

    fn rate(&mut self, p: f64) -> f64 {
        self.evals += 1;
        self.path.rate(self.coef * p)
    }

    fn derivative(&mut self, p: f64) -> f64 {
        self.evals += 1;
        self.path.rate_derivative(self.coef * p) * self.coef
    }

    /// Smallest power reaching `target` rate, clamped to [p_lo, p_hi].
    fn power_at_rate(&mut self, target: f64, p_lo: f64, p_hi: f64) -> f64 {
        if self.rate(p_lo) >= target {
            return p_lo;
        }
        if self.rate(p_hi) <= target {
            return p_hi;
        }
        let (mut lo, mut hi) = (p_lo, p_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.rate(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * p_hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// The rate-per-watt stationary point: R'(p) (p + p_s) = R(p), clamped
    /// to [p_lo, p_hi]. The left side minus the right is decreasing in p.
    fn ratio_peak(&mut self, p_s: f64, p_lo: f64, p_hi: f64) -> f64 {
        let excess = |c: &mut Self, p: f64| c.derivative(p) * (p + p_s) - c.rate(p);
        if excess(self, p_hi) >= 0.0 {
            return p_hi;
        }
        if excess(self, p_lo) <= 0.0 {
            return p_lo;
        }
        let (mut lo, mut hi) = (p_lo, p_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(self, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * p_hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solve d rate/dp * scale = grad for p on [p_lo, p_hi]; the derivative
    /// is strictly decreasing, so this clamps at the box edges.
    fn power_at_gradient(&mut self, scale: f64, grad: f64, p_lo: f64, p_hi: f64) -> f64 {
        if scale <= 0.0 {
            // Negative effective rate weight: the Lagrangian wants the rate
            // as low as the box allows.
            return p_lo;
        }
        if grad <= 0.0 {
            // Power is free at this multiplier state.
            return p_hi;
        }
        if self.derivative(p_lo) * scale <= grad {
            return p_lo;
        }
        if self.derivative(p_hi) * scale >= grad {
            return p_hi;
        }
        let (mut lo, mut hi) = (p_lo, p_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.derivative(mid) * scale > grad {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * p_hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Outcome of the Dinkelbach loop for the weak user at fixed p_s.
#[derive(Debug, Clone, Copy)]
pub struct WeakSolve {
    pub p_w: f64,
    pub rate: f64,
    pub state: DinkelbachState,
}

/// Dinkelbach outer loop around a projected dual ascent.
///
/// Outer: xi <- R / (p_w + p_s) until |R - xi (p_w + p_s)| <= tol_dink.
/// Inner: the KKT stationarity (1 + nu - lambda) dR/dp_w = xi + alpha - mu
/// is solved for p_w on the box [p_lo, p_hi], then the four multipliers take
/// a projected subgradient step each. The box edges realize p_w > P_s^T and
/// the budget; lambda and nu price the rate bounds.
///
/// When the demand target coincides with the rate cap the corridor collapses
/// to a single rate and the fixed point is fully determined; that case is
/// solved directly from the KKT stationarity instead of letting the two rate
/// multipliers fight over a zero-width corridor.
#[allow(clippy::too_many_arguments)]
pub fn dinkelbach_iterate(
    path: &RatePath,
    gamma_coef: f64,
    p_s: f64,
    p_s_threshold: f64,
    budget: f64,
    p_lo: f64,
    p_hi: f64,
    r_min_target: f64,
    r_max: f64,
    cfg: &SolverConfig,
    evals: &mut u64,
) -> Result<WeakSolve, Infeasibility> {
    let mut curve = PowerCurve::new(path, gamma_coef);
    let rate_tol = 1e-7 * (1.0 + r_max.abs());

    if r_min_target >= r_max - rate_tol {
        // Pinned corridor: rate = r_max exactly.
        let p = curve.power_at_rate(r_max, p_lo, p_hi);
        let rate = curve.rate(p);
        let xi = rate / (p + p_s);
        let slope = curve.derivative(p);
        let ratio = if slope > 0.0 { xi / slope } else { f64::INFINITY };
        let state = DinkelbachState {
            xi,
            alpha: 0.0,
            mu: 0.0,
            lambda_max: (1.0 - ratio).max(0.0),
            nu_min: (ratio - 1.0).max(0.0),
            outer_iterations: 1,
            inner_iterations: 1,
            residual: (rate - xi * (p + p_s)).abs(),
            converged: true,
        };
        *evals += curve.evals;
        return Ok(WeakSolve { p_w: p, rate, state });
    }

    // Warm start at the predicted fixed point: the rate-per-watt stationary
    // point, lifted to the demand target when it falls below it. The dual
    // ascent then verifies the KKT state instead of growing the rate-floor
    // multiplier from zero under a diminishing step schedule.
    let p_target = if r_min_target > 0.0 {
        curve.power_at_rate(r_min_target, p_lo, p_hi)
    } else {
        p_lo
    };
    let p_peak = curve.ratio_peak(p_s, p_lo, p_hi);
    let mut p = p_peak.clamp(p_target, p_hi);
    let mut rate = curve.rate(p);
    let mut xi = rate / (p + p_s);
    let (mut alpha, mut mu, mut lambda, mut nu) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    if p_target > p_peak {
        let slope = curve.derivative(p);
        if slope > 0.0 {
            nu = (xi / slope - 1.0).max(0.0);
        }
    }
    let mut residual = f64::INFINITY;
    let mut total_inner = 0usize;
    let mut converged = false;
    let mut outer_done = 0usize;

    let mut stalled_outers = 0usize;
    // One diminishing step schedule across the whole solve; restarting it
    // every outer pass re-excites the dual oscillations.
    let mut step = cfg.step_size;
    let step_floor = 1e-4 * cfg.step_size;
    'outer: for outer in 0..cfg.max_outer {
        outer_done = outer + 1;
        let mut inner_ok = false;
        let p_at_entry = p;
        let duals_at_entry = [mu, alpha, lambda, nu];
        for _ in 0..cfg.max_inner {
            total_inner += 1;
            let p_prev = p;
            let scale = 1.0 + nu - lambda;
            let grad = xi + alpha - mu;
            p = curve.power_at_gradient(scale, grad, p_lo, p_hi);
            rate = curve.rate(p);

            mu = (mu - step * (p - p_s_threshold)).max(0.0);
            alpha = (alpha - step * (budget - (p + p_s))).max(0.0);
            lambda = (lambda - step * (r_max - rate)).max(0.0);
            nu = (nu - step * (rate - r_min_target)).max(0.0);
            step = (step * cfg.step_decay).max(step_floor);

            if !p.is_finite() || mu > 1e15 || alpha > 1e15 || lambda > 1e15 || nu > 1e15 {
                *evals += curve.evals;
                return Err(Infeasibility::NonConvergence(
                    "multiplier divergence in the dual ascent".into(),
                ));
            }

            let comp = [
                mu * (p - p_s_threshold).abs(),
                alpha * (budget - (p + p_s)).abs(),
                lambda * (r_max - rate).abs(),
                nu * (rate - r_min_target).abs(),
            ];
            let primal_ok = rate <= r_max + rate_tol && rate >= r_min_target - rate_tol;
            let comp_ok = comp.iter().all(|&c| c <= cfg.comp_tol);
            if primal_ok && comp_ok && (p - p_prev).abs() <= 1e-10 * p_hi.max(1e-12) {
                inner_ok = true;
                break;
            }
        }

        residual = (rate - xi * (p + p_s)).abs();
        if inner_ok && residual <= cfg.tol_dink {
            converged = true;
            break 'outer;
        }
        // A full inner pass with a frozen iterate and frozen duals, or an
        // exhausted step schedule, cannot make further progress at any xi.
        let dual_moved = [mu, alpha, lambda, nu]
            .iter()
            .zip(duals_at_entry)
            .any(|(&a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()));
        let frozen = (p - p_at_entry).abs() <= 1e-9 * p_hi.max(1e-12) && !dual_moved;
        if !inner_ok && (frozen || step <= step_floor) {
            stalled_outers += 1;
            if stalled_outers >= 3 {
                *evals += curve.evals;
                return Err(Infeasibility::NonConvergence(
                    "dual ascent stalled without reaching primal feasibility".into(),
                ));
            }
        } else {
            stalled_outers = 0;
        }
        xi = rate / (p + p_s);
    }

    if !converged {
        *evals += curve.evals;
        return Err(Infeasibility::NonConvergence(format!(
            "Dinkelbach residual {residual:.3e} after {outer_done} outer iterations"
        )));
    }

    // Primal polish: snap the last iterate onto the rate cap if the dual
    // asymptote left it marginally outside. Large snaps mean the duals did
    // not actually converge.
    if rate > r_max {
        let snapped = curve.power_at_rate(r_max, p_lo, p);
        if (snapped - p).abs() > 1e-3 * p_hi.max(1e-12) {
            *evals += curve.evals;
            return Err(Infeasibility::NonConvergence(
                "rate-cap projection moved the optimizer beyond tolerance".into(),
            ));
        }
        p = snapped;
        rate = curve.rate(p);
    }

    let state = DinkelbachState {
        xi,
        alpha,
        mu,
        lambda_max: lambda,
        nu_min: nu,
        outer_iterations: outer_done,
        inner_iterations: total_inner,
        residual,
        converged,
    };
    *evals += curve.evals;
    Ok(WeakSolve { p_w: p, rate, state })
}

/// Strong user at the highest admissible power: min(P_s^T, room left by the
/// weak user's floor), pulled below the cap only when r_max binds.
fn solve_strong(
    strong: &UserPath,
    cap: f64,
    qos: &QoSBounds,
    evals: &mut u64,
) -> Result<(f64, f64), Infeasibility> {
    let coef = strong.elec_gain / strong.sigma2;
    let mut curve = PowerCurve::new(&strong.path, coef);
    let mut p_s = cap;
    let mut rate = curve.rate(p_s);
    if rate > qos.r_max {
        p_s = curve.power_at_rate(qos.r_max, 0.0, cap);
        rate = curve.rate(p_s);
    }
    *evals += curve.evals;
    if rate < qos.r_min - 1e-9 * (1.0 + qos.r_min) {
        return Err(Infeasibility::RateBelowMin);
    }
    Ok((p_s, rate))
}

/// Maximize one group's sum rate under the level budget.
///
/// The strong user is fixed first at min(P_s^T, budget - p_w floor); the
/// weak user's target ramps from r_max toward r_min until the budget admits
/// it, then the Dinkelbach loop prices the remaining constraints.
pub fn solve_group(
    group: usize,
    chan: &GroupChannel,
    budget: f64,
    qos: &QoSBounds,
    cfg: &SolverConfig,
) -> GroupSolution {
    let mut evals = 0u64;
    match (&chan.weak, &chan.strong) {
        (None, None) => GroupSolution::infeasible(group, Infeasibility::RateBelowMin, 0),
        (None, Some(strong)) => {
            let cap = qos.p_s_threshold.min(budget);
            match solve_strong(strong, cap, qos, &mut evals) {
                Err(why) => GroupSolution::infeasible(group, why, evals),
                Ok((p_s, rate_strong)) => GroupSolution {
                    group,
                    p_w: 0.0,
                    p_s,
                    rate_weak: 0.0,
                    rate_strong,
                    consumed: p_s,
                    feasible: true,
                    infeasibility: None,
                    state: None,
                    rate_evals: evals,
                },
            }
        }
        (Some(weak), strong) => {
            // Virtual strong partner: no interference, no ordering floor.
            let (p_lo, ordering_floor, p_s, rate_strong) = match strong {
                Some(s) => {
                    let p_lo = qos.p_s_threshold + cfg.delta;
                    if p_lo > budget {
                        return GroupSolution::infeasible(
                            group,
                            Infeasibility::BudgetBelowThreshold,
                            evals,
                        );
                    }
                    let cap = qos.p_s_threshold.min(budget - p_lo);
                    if cap <= 0.0 {
                        return GroupSolution::infeasible(
                            group,
                            Infeasibility::BudgetBelowThreshold,
                            evals,
                        );
                    }
                    match solve_strong(s, cap, qos, &mut evals) {
                        Err(why) => return GroupSolution::infeasible(group, why, evals),
                        Ok((p_s, r_s)) => (p_lo, qos.p_s_threshold, p_s, r_s),
                    }
                }
                None => (cfg.delta, 0.0, 0.0, 0.0),
            };

            let p_hi = budget - p_s;
            if p_hi < p_lo {
                return GroupSolution::infeasible(group, Infeasibility::BudgetBelowThreshold, evals);
            }
            let coef = weak.elec_gain / (weak.elec_gain * p_s + weak.sigma2);
            let mut probe = PowerCurve::new(&weak.path, coef);
            let best_rate = probe.rate(p_hi);
            let floor_rate = probe.rate(p_lo);
            evals += probe.evals;
            if best_rate < qos.r_min - 1e-9 * (1.0 + qos.r_min) {
                return GroupSolution::infeasible(group, Infeasibility::RateBelowMin, evals);
            }
            if floor_rate > qos.r_max + 1e-9 * (1.0 + qos.r_max) {
                return GroupSolution::infeasible(group, Infeasibility::RateAboveMaxAtFloor, evals);
            }

            // First target the budget can host.
            let steps = cfg.ramp_steps.max(1);
            let mut target = qos.r_min;
            for s in 0..=steps {
                let t = qos.r_max - s as f64 * (qos.r_max - qos.r_min) / steps as f64;
                if t <= best_rate + 1e-12 * (1.0 + best_rate.abs()) {
                    target = t.max(qos.r_min);
                    break;
                }
            }

            match dinkelbach_iterate(
                &weak.path,
                coef,
                p_s,
                ordering_floor,
                budget,
                p_lo,
                p_hi,
                target,
                qos.r_max,
                cfg,
                &mut evals,
            ) {
                Err(why) => GroupSolution::infeasible(group, why, evals),
                Ok(solve) => GroupSolution {
                    group,
                    p_w: solve.p_w,
                    p_s,
                    rate_weak: solve.rate,
                    rate_strong,
                    consumed: solve.p_w + p_s,
                    feasible: true,
                    infeasibility: None,
                    state: Some(solve.state),
                    rate_evals: evals,
                },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::grid_search_group;
    use crate::rate::OPTICAL_SINR_C;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_user(id: usize, l: usize) -> UserPath {
        UserPath {
            user_id: id,
            path: RatePath {
                prelog: 1.0 / (l as f64 + 1.0),
                eigs: vec![1.0; l],
            },
            elec_gain: OPTICAL_SINR_C,
            sigma2: 1.0,
        }
    }

    fn unit_group(l: usize) -> GroupChannel {
        GroupChannel {
            weak: Some(unit_user(0, l)),
            strong: Some(unit_user(1, l)),
        }
    }

    fn loose_qos(budget: f64) -> QoSBounds {
        QoSBounds {
            r_min: 0.0,
            r_max: 1e6,
            p_s_threshold: 0.2 * budget,
            r_min_net: 0.0,
            r_max_net: None,
        }
    }

    #[test]
    fn no_room_for_weak_user_is_infeasible() {
        let budget = 1.0;
        let mut qos = loose_qos(budget);
        // p_w alone must exceed the threshold, so the budget has no room.
        qos.p_s_threshold = 1.0;
        let sol = solve_group(0, &unit_group(4), budget, &qos, &SolverConfig::for_power_budget(budget));
        assert!(!sol.feasible);
        assert_eq!(sol.infeasibility, Some(Infeasibility::BudgetBelowThreshold));
    }

    #[test]
    fn generous_budget_loose_bounds_consumes_the_budget() {
        let budget = 2.0;
        let qos = loose_qos(budget);
        let cfg = SolverConfig::for_power_budget(budget);
        let sol = solve_group(0, &unit_group(4), budget, &qos, &cfg);
        assert!(sol.feasible);
        assert_relative_eq!(sol.consumed, budget, max_relative = 1e-6);
        assert_relative_eq!(sol.p_s, qos.p_s_threshold, max_relative = 1e-9);
        let state = sol.state.unwrap();
        assert!(state.converged);
        assert!(state.residual <= 1e-6);
    }

    #[test]
    fn unreachable_minimum_rate_is_infeasible() {
        let budget = 1.0;
        let mut qos = loose_qos(budget);
        qos.r_min = 100.0;
        qos.r_max = 200.0;
        let sol = solve_group(0, &unit_group(4), budget, &qos, &SolverConfig::for_power_budget(budget));
        assert!(!sol.feasible);
        assert_eq!(sol.infeasibility, Some(Infeasibility::RateBelowMin));
    }

    #[test]
    fn rate_cap_binds_with_positive_lambda() {
        let budget = 4.0;
        let mut qos = loose_qos(budget);
        // Cap well below the budget-limited rate.
        let probe = solve_group(0, &unit_group(4), budget, &qos, &SolverConfig::for_power_budget(budget));
        qos.r_max = 0.6 * probe.rate_weak;
        let cfg = SolverConfig::for_power_budget(budget);
        let sol = solve_group(0, &unit_group(4), budget, &qos, &cfg);
        assert!(sol.feasible);
        assert_relative_eq!(sol.rate_weak, qos.r_max, max_relative = 1e-4);
        let state = sol.state.unwrap();
        assert!(state.lambda_max > 0.0, "rate cap should price in: {state:?}");
        assert!(state.residual <= 1e-6);
        assert!(sol.consumed < budget * (1.0 - 1e-3));
    }

    #[test]
    fn multipliers_remain_nonnegative() {
        let budget = 3.0;
        let qos = QoSBounds {
            r_min: 0.05,
            r_max: 1.2,
            p_s_threshold: 0.2 * budget,
            r_min_net: 0.0,
            r_max_net: None,
        };
        let cfg = SolverConfig::for_power_budget(budget);
        let sol = solve_group(0, &unit_group(4), budget, &qos, &cfg);
        assert!(sol.feasible);
        let s = sol.state.unwrap();
        for m in [s.alpha, s.mu, s.lambda_max, s.nu_min] {
            assert!(m >= 0.0);
        }
    }

    #[test]
    fn solver_matches_grid_oracle_on_randomized_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for trial in 0..25 {
            let budget = 0.5 + 3.5 * rng.random::<f64>();
            let r_max_pick = 0.2 + 1.5 * rng.random::<f64>();
            let qos = QoSBounds {
                r_min: 0.0,
                r_max: r_max_pick,
                p_s_threshold: 0.2 * budget,
                r_min_net: 0.0,
                r_max_net: None,
            };
            let cfg = SolverConfig::for_power_budget(budget);
            let chan = unit_group(4);
            let sol = solve_group(0, &chan, budget, &qos, &cfg);
            assert!(sol.feasible, "trial {trial} infeasible");
            let oracle = grid_search_group(&chan, budget, &qos, cfg.delta, 10_000)
                .expect("oracle found no feasible point");
            assert_relative_eq!(
                sol.total_rate(),
                oracle.total_rate,
                max_relative = 1e-3
            );
            assert_relative_eq!(sol.p_w, oracle.p_w, max_relative = 2e-3);
        }
    }

    #[test]
    fn weak_only_group_serves_without_ordering_floor() {
        let budget = 1.0;
        let chan = GroupChannel {
            weak: Some(unit_user(0, 4)),
            strong: None,
        };
        // A finite demand: the virtual partner contributes nothing and the
        // weak user is driven to its target.
        let mut qos = loose_qos(budget);
        qos.r_max = 0.04;
        let sol = solve_group(0, &chan, budget, &qos, &SolverConfig::for_power_budget(budget));
        assert!(sol.feasible, "{:?}", sol.infeasibility);
        assert_eq!(sol.p_s, 0.0);
        assert_eq!(sol.rate_strong, 0.0);
        assert_relative_eq!(sol.rate_weak, qos.r_max, max_relative = 1e-3);
        assert!(sol.p_w < budget);
    }

    #[test]
    fn strong_only_group_capped_at_threshold() {
        let budget = 1.0;
        let chan = GroupChannel {
            weak: None,
            strong: Some(unit_user(1, 4)),
        };
        let qos = loose_qos(budget);
        let sol = solve_group(0, &chan, budget, &qos, &SolverConfig::for_power_budget(budget));
        assert!(sol.feasible);
        assert_relative_eq!(sol.p_s, qos.p_s_threshold, max_relative = 1e-12);
        assert_eq!(sol.p_w, 0.0);
    }
}
