//! Brute-force verification oracles: factorial matching search, grid search
//! of the per-group problem, and exhaustive enumeration of DP budget splits.
//! These deliberately avoid the solver code paths they check; the CLI
//! `oracle` subcommand and the acceptance suite both run them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grouping::{optimal_matching, WeightMatrix};
use crate::power::{
    dp_combine, solve_group, GroupChannel, GroupSolution, PowerLevels, QoSBounds, SolverConfig,
    UserPath,
};
use crate::rate::{RatePath, OPTICAL_SINR_C};

/// Best perfect matching by enumerating all row-to-column permutations.
/// Returns (column per row, total weight).
pub fn matching_brute_force(weights: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = weights.len();
    let mut used = vec![false; n];
    let mut current = vec![0usize; n];
    let mut best = vec![0usize; n];
    let mut best_total = f64::NEG_INFINITY;

    fn recurse(
        row: usize,
        n: usize,
        weights: &[Vec<f64>],
        used: &mut [bool],
        current: &mut [usize],
        best: &mut Vec<usize>,
        best_total: &mut f64,
    ) {
        if row == n {
            let total: f64 = (0..n).map(|r| weights[r][current[r]]).sum();
            if total > *best_total {
                *best_total = total;
                best.copy_from_slice(current);
            }
            return;
        }
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                current[row] = col;
                recurse(row + 1, n, weights, used, current, best, best_total);
                used[col] = false;
            }
        }
    }

    recurse(0, n, weights, &mut used, &mut current, &mut best, &mut best_total);
    (best, best_total)
}

/// Grid-search optimum of one per-group problem.
#[derive(Debug, Clone, Copy)]
pub struct GridOptimum {
    pub p_w: f64,
    pub p_s: f64,
    pub rate_weak: f64,
    pub rate_strong: f64,
    pub total_rate: f64,
}

/// Enumerate the weak-user power over a uniform grid, with the strong user
/// at the highest admissible power, and return the feasible maximizer of the
/// group rate. `None` when no grid point satisfies the constraints.
pub fn grid_search_group(
    chan: &GroupChannel,
    budget: f64,
    qos: &QoSBounds,
    delta: f64,
    points: usize,
) -> Option<GridOptimum> {
    let weak = chan.weak.as_ref()?;
    let strong = chan.strong.as_ref()?;

    let p_lo = qos.p_s_threshold + delta;
    if p_lo > budget {
        return None;
    }
    let cap = qos.p_s_threshold.min(budget - p_lo);
    if cap <= 0.0 {
        return None;
    }
    let strong_rate_at = |p: f64| strong.path.rate(strong.elec_gain * p / strong.sigma2);
    let mut p_s = cap;
    if strong_rate_at(cap) > qos.r_max {
        // Largest grid point under the cap рrate.
        p_s = (0..=points)
            .map(|i| cap * i as f64 / points as f64)
            .filter(|&p| strong_rate_at(p) <= qos.r_max)
            .fold(0.0, f64::max);
    }
    let rate_strong = strong_rate_at(p_s);
    if rate_strong < qos.r_min - 1e-9 {
        return None;
    }

    let p_hi = budget - p_s;
    if p_hi < p_lo {
        return None;
    }
    let coef = weak.elec_gain / (weak.elec_gain * p_s + weak.sigma2);
    let mut best: Option<GridOptimum> = None;
    for i in 0..=points {
        let p_w = p_lo + (p_hi - p_lo) * i as f64 / points as f64;
        let rate_weak = weak.path.rate(coef * p_w);
        if rate_weak > qos.r_max + 1e-12 || rate_weak < qos.r_min - 1e-12 {
            continue;
        }
        let total_rate = rate_weak + rate_strong;
        if best.is_none_or(|b| total_rate > b.total_rate) {
            best = Some(GridOptimum {
                p_w,
                p_s,
                rate_weak,
                rate_strong,
                total_rate,
            });
        }
    }
    best
}

/// Exhaustive enumeration of the budget splits reachable by the recursion at
/// cell (stage, t): chain start m, a menu level per served stage, sequential
/// remainder flooring. The chain may stop at stage m only on exhaustion:
/// either the remainder floors below the first level, or the next group down
/// has no feasible solution that fits it. `None` when no valid composition
/// exists.
pub fn exhaustive_split_best(
    menu: &[Vec<GroupSolution>],
    order: &[usize],
    levels: &PowerLevels,
    stage: usize,
    t: usize,
) -> Option<f64> {
    let t_count = levels.count();
    let tol = 1e-9 * levels.p_max;
    let fits = |group: usize, level: usize| {
        menu[group]
            .iter()
            .any(|sol| sol.feasible && sol.consumed <= levels.levels[level] + tol)
    };
    let mut best: Option<f64> = None;

    for m in 0..=stage {
        let n = stage - m + 1;
        let mut assignment = vec![0usize; n];
        loop {
            // Simulate newest stage first.
            let mut level = t;
            let mut total = 0.0;
            let mut valid = true;
            for st in (m..=stage).rev() {
                let sol = &menu[order[st]][assignment[st - m]];
                if !sol.feasible || sol.consumed > levels.levels[level] + tol {
                    valid = false;
                    break;
                }
                total += sol.total_rate();
                let rem = (levels.levels[level] - sol.consumed).max(0.0);
                match levels.floor_to_level(rem) {
                    Some(r) if st > m => level = r,
                    None if st > m => {
                        valid = false;
                        break;
                    }
                    floored => {
                        // st == m: the chain may only stop on exhaustion.
                        if m > 0 {
                            if let Some(r) = floored {
                                if fits(order[m - 1], r) {
                                    valid = false;
                                }
                            }
                        }
                        break;
                    }
                }
            }
            if valid && best.is_none_or(|b| total > b) {
                best = Some(total);
            }
            // Odometer over the assignment vector.
            let mut digit = 0;
            loop {
                if digit == n {
                    break;
                }
                assignment[digit] += 1;
                if assignment[digit] < t_count {
                    break;
                }
                assignment[digit] = 0;
                digit += 1;
            }
            if digit == n {
                break;
            }
        }
    }
    best
}

/// Result of one oracle equivalence suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            write!(f, "{}: PASS ({} cases)", self.name, self.cases)
        } else {
            writeln!(f, "{}: FAIL ({}/{} cases)", self.name, self.failures.len(), self.cases)?;
            for failure in &self.failures {
                writeln!(f, "  {failure}")?;
            }
            Ok(())
        }
    }
}

/// Assignment solver vs factorial enumeration on random instances, n <= 7.
pub fn matching_suite(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for case in 0..instances {
        let n = 1 + case % 7;
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 20.0).collect())
            .collect();
        let matrix = WeightMatrix {
            weak_ids: (0..n).map(Some).collect(),
            strong_ids: (n..2 * n).map(Some).collect(),
            weights: weights.clone(),
        };
        let assignment = match optimal_matching(&matrix) {
            Ok(a) => a,
            Err(e) => {
                failures.push(format!("case {case}: solver error {e}"));
                continue;
            }
        };
        // Recompute both totals in identical row-major order so equal
        // assignments compare bit-exactly.
        let mut col_of = vec![0usize; n];
        for (w, s) in assignment.real_pairs() {
            col_of[s - n] = w;
        }
        let solver_total: f64 = (0..n).map(|r| weights[r][col_of[r]]).sum();
        let (brute_cols, _) = matching_brute_force(&weights);
        let brute_total: f64 = (0..n).map(|r| weights[r][brute_cols[r]]).sum();
        if solver_total != brute_total {
            failures.push(format!(
                "case {case} (n={n}): solver {solver_total} vs brute force {brute_total}"
            ));
        }
    }
    SuiteResult {
        name: "matching vs factorial brute force",
        cases: instances,
        failures,
    }
}

fn unit_path(user_id: usize, l: usize, prelog: f64) -> UserPath {
    UserPath {
        user_id,
        path: RatePath {
            prelog,
            eigs: vec![1.0; l],
        },
        elec_gain: OPTICAL_SINR_C,
        sigma2: 1.0,
    }
}

/// Dinkelbach/KKT solver vs a 10^4-point grid search on randomized unit-channel
/// instances with P_s^T = 0.2 * budget.
pub fn solver_suite(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let l = 4;
    for case in 0..instances {
        let budget = 0.5 + 3.5 * rng.random::<f64>();
        let qos = QoSBounds {
            r_min: 0.02 * rng.random::<f64>(),
            r_max: 0.2 + 1.5 * rng.random::<f64>(),
            p_s_threshold: 0.2 * budget,
            r_min_net: 0.0,
            r_max_net: None,
        };
        let chan = GroupChannel {
            weak: Some(unit_path(0, l, 1.0 / (l as f64 + 1.0))),
            strong: Some(unit_path(1, l, 1.0 / (l as f64 + 1.0))),
        };
        let cfg = SolverConfig::for_power_budget(budget);
        let sol = solve_group(0, &chan, budget, &qos, &cfg);
        let oracle = grid_search_group(&chan, budget, &qos, cfg.delta, 10_000);
        match (sol.feasible, oracle) {
            (false, None) => {}
            (true, Some(best)) => {
                let rel = (sol.total_rate() - best.total_rate).abs() / best.total_rate.max(1e-12);
                if rel > 1e-3 {
                    failures.push(format!(
                        "case {case}: rate {} vs grid {} (rel {rel:.2e})",
                        sol.total_rate(),
                        best.total_rate
                    ));
                }
                let state = sol.state.expect("feasible pair solve carries state");
                if state.residual > 1e-6 {
                    failures.push(format!("case {case}: terminal residual {:.2e}", state.residual));
                }
                if [state.alpha, state.mu, state.lambda_max, state.nu_min]
                    .iter()
                    .any(|&m| m < 0.0)
                {
                    failures.push(format!("case {case}: negative multiplier {state:?}"));
                }
            }
            (got, _) => {
                failures.push(format!(
                    "case {case}: feasibility mismatch (solver feasible = {got})"
                ));
            }
        }
    }
    SuiteResult {
        name: "per-group solver vs grid search",
        cases: instances,
        failures,
    }
}

/// DP combination vs exhaustive budget-split enumeration for G <= 3, T <= 8.
pub fn dp_suite(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for case in 0..instances {
        let g = 1 + case % 3;
        let t = 2 + case % 7;
        let levels = match crate::power::discretize(1.0 + 7.0 * rng.random::<f64>(), t) {
            Ok(l) => l,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let menu: Vec<Vec<GroupSolution>> = (0..g)
            .map(|gi| {
                (0..t)
                    .map(|idx| {
                        let feasible = rng.random::<f64>() >= 0.2;
                        let budget = levels.levels[idx];
                        let consumed = budget * (0.3 + 0.7 * rng.random::<f64>());
                        let rate = (1.0 + consumed).ln() * (0.5 + rng.random::<f64>());
                        GroupSolution {
                            group: gi,
                            p_w: consumed * 0.8,
                            p_s: consumed * 0.2,
                            rate_weak: rate * 0.6,
                            rate_strong: rate * 0.4,
                            consumed: if feasible { consumed } else { 0.0 },
                            feasible,
                            infeasibility: None,
                            state: None,
                            rate_evals: 0,
                        }
                    })
                    .collect()
            })
            .collect();
        let order: Vec<usize> = (0..g).collect();
        let cells = dp_combine(&menu, &order, &levels);
        for stage in 0..g {
            for tt in 0..t {
                let dp_val = cells[stage][tt].map(|c| c.total_rate);
                let oracle = exhaustive_split_best(&menu, &order, &levels, stage, tt);
                let ok = match (dp_val, oracle) {
                    (None, None) => true,
                    (Some(a), Some(b)) => (a - b).abs() <= 1e-6 * b.abs().max(1e-12),
                    _ => false,
                };
                if !ok {
                    failures.push(format!(
                        "case {case} cell ({stage},{tt}): dp {dp_val:?} vs exhaustive {oracle:?}"
                    ));
                }
            }
        }
    }
    SuiteResult {
        name: "dp combine vs exhaustive splits",
        cases: instances,
        failures,
    }
}
