//! Cross-group combination: the recursive table over (groups considered,
//! power level), the three solution sets, masking, and final selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::group::{solve_group, GroupChannel, GroupSolution, SolverConfig};
use super::{power_tol, PowerLevels, QoSBounds};
use crate::error::{Error, Result};

/// One finite cell of the recursion: the newest group's chosen menu level and
/// the floored remainder handed to the previous stage (`None` when the
/// remainder fell below the first level and the chain stops).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpCell {
    pub total_rate: f64,
    pub menu_level: usize,
    pub prev_level: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserRole {
    Weak,
    Strong,
}

/// Power and achieved target rate of one served user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserAllocation {
    pub user: usize,
    pub group: usize,
    pub role: UserRole,
    pub power: f64,
    pub rate: f64,
}

/// The selected network solution (G*, t*).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Number of groups considered in the winning row (1-based).
    pub g_star: usize,
    /// Winning power-level index (0-based into the level grid).
    pub t_star: usize,
    pub network_rate: f64,
    pub consumed: f64,
    /// Groups actually served along the winning chain.
    pub groups_served: usize,
    pub allocations: Vec<UserAllocation>,
}

/// The solution sets of the dynamic allocator: the G x T rate table, the
/// K x T target-rate and power tables, and the selected column.
#[derive(Debug, Clone)]
pub struct AllocationTables {
    pub levels: PowerLevels,
    /// Stage order of the recursion (seeded shuffle of group indices).
    pub group_order: Vec<usize>,
    pub order_seed: u64,
    /// Per-group, per-level solutions (group-major, original group indexing).
    pub menu: Vec<Vec<GroupSolution>>,
    /// `cells[stage - 1][t]`; `None` is the minus-infinity sentinel.
    pub cells: Vec<Vec<Option<DpCell>>>,
    /// (weak id, strong id) per group, `None` for virtual members.
    pub group_users: Vec<(Option<usize>, Option<usize>)>,
    pub num_users: usize,
    /// Entries masked by the selection constraints.
    pub masked: Vec<Vec<bool>>,
    /// K x T target rates (0 where unserved or masked).
    pub targets: Vec<Vec<f64>>,
    /// K x T allocated powers (0 where unserved or masked).
    pub powers: Vec<Vec<f64>>,
    pub selected: Option<Selection>,
    /// Total rate-function evaluations across the menu solves.
    pub rate_evals: u64,
}

/// Solve every (group, level) subproblem, shuffle the stage order with the
/// given seed, and run the recursion.
pub fn solve_allocation(
    groups: &[GroupChannel],
    levels: &PowerLevels,
    qos: &QoSBounds,
    cfg: &SolverConfig,
    order_seed: u64,
    num_users: usize,
) -> Result<AllocationTables> {
    if groups.is_empty() {
        return Err(Error::Config("allocation needs at least one group".into()));
    }
    let menu: Vec<Vec<GroupSolution>> = groups
        .par_iter()
        .enumerate()
        .map(|(g, chan)| {
            levels
                .levels
                .iter()
                .map(|&budget| solve_group(g, chan, budget, qos, cfg))
                .collect()
        })
        .collect();
    let rate_evals = menu
        .iter()
        .flatten()
        .map(|s| s.rate_evals)
        .sum();

    // Groups with no feasible solution at any level can never be served;
    // the recursion runs over the servable ones and the rest keep zero
    // targets and powers.
    let mut group_order: Vec<usize> = (0..groups.len())
        .filter(|&g| menu[g].iter().any(|sol| sol.feasible))
        .collect();
    group_order.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));

    let cells = dp_combine(&menu, &group_order, levels);
    let t = levels.count();
    Ok(AllocationTables {
        levels: levels.clone(),
        order_seed,
        group_users: groups
            .iter()
            .map(|g| {
                (
                    g.weak.as_ref().map(|u| u.user_id),
                    g.strong.as_ref().map(|u| u.user_id),
                )
            })
            .collect(),
        num_users,
        masked: vec![vec![false; t]; group_order.len()],
        targets: vec![vec![0.0; t]; num_users],
        powers: vec![vec![0.0; t]; num_users],
        selected: None,
        group_order,
        menu,
        cells,
        rate_evals,
    })
}

/// Forward recursion over the shuffled group order.
///
/// Each stage must serve its own group out of the level budget; the floored
/// remainder funds the previous stages. The chain stops when the remainder
/// falls below the first level or the previous stage cannot host any
/// solution within it, leaving the earlier groups unserved. A group that
/// cannot fit even alone leaves the cell at the minus-infinity sentinel.
pub fn dp_combine(
    menu: &[Vec<GroupSolution>],
    order: &[usize],
    levels: &PowerLevels,
) -> Vec<Vec<Option<DpCell>>> {
    let t_count = levels.count();
    let tol = power_tol(levels.p_max);
    let mut cells: Vec<Vec<Option<DpCell>>> = Vec::with_capacity(order.len());

    for (stage, &g) in order.iter().enumerate() {
        let mut row: Vec<Option<DpCell>> = vec![None; t_count];
        for (t, cell) in row.iter_mut().enumerate() {
            let budget = levels.levels[t];
            let mut best: Option<DpCell> = None;
            for (s, sol) in menu[g].iter().enumerate() {
                if !sol.feasible || sol.consumed > budget + tol {
                    continue;
                }
                let rem = (budget - sol.consumed).max(0.0);
                let (prev_level, prev_rate) = if stage == 0 {
                    (None, 0.0)
                } else {
                    match levels.floor_to_level(rem) {
                        Some(r) => match cells[stage - 1][r] {
                            Some(prev) => (Some(r), prev.total_rate),
                            None => (None, 0.0),
                        },
                        None => (None, 0.0),
                    }
                };
                let total_rate = sol.total_rate() + prev_rate;
                if best.is_none_or(|b| total_rate > b.total_rate) {
                    best = Some(DpCell {
                        total_rate,
                        menu_level: s,
                        prev_level,
                    });
                }
            }
            *cell = best;
        }
        cells.push(row);
    }
    cells
}

impl AllocationTables {
    /// Walk the chain of one finite cell: (group index, menu level) pairs of
    /// every served group, newest stage first.
    pub fn backtrace(&self, stage: usize, t: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut cursor = Some((stage, t));
        while let Some((st, level)) = cursor {
            let Some(cell) = self.cells[st][level] else {
                break;
            };
            out.push((self.group_order[st], cell.menu_level));
            cursor = match cell.prev_level {
                Some(r) if st > 0 => Some((st - 1, r)),
                _ => None,
            };
        }
        out
    }

    /// Per-user allocations of one finite cell.
    pub fn cell_allocations(&self, stage: usize, t: usize) -> Vec<UserAllocation> {
        let mut out = Vec::new();
        for (g, s) in self.backtrace(stage, t) {
            let sol = &self.menu[g][s];
            let (weak, strong) = self.group_users[g];
            if let Some(u) = weak {
                out.push(UserAllocation {
                    user: u,
                    group: g,
                    role: UserRole::Weak,
                    power: sol.p_w,
                    rate: sol.rate_weak,
                });
            }
            if let Some(u) = strong {
                out.push(UserAllocation {
                    user: u,
                    group: g,
                    role: UserRole::Strong,
                    power: sol.p_s,
                    rate: sol.rate_strong,
                });
            }
        }
        out.sort_by_key(|a| a.user);
        out
    }

    fn cell_consumed(&self, stage: usize, t: usize) -> f64 {
        self.backtrace(stage, t)
            .iter()
            .map(|&(g, s)| self.menu[g][s].consumed)
            .sum()
    }
}

/// (rate, groups considered, level) ordering: higher rate first, then more
/// groups, then lower power.
fn better(candidate: (f64, usize, usize), best: (f64, usize, usize)) -> bool {
    if candidate.0 != best.0 {
        return candidate.0 > best.0;
    }
    if candidate.1 != best.1 {
        return candidate.1 > best.1;
    }
    candidate.2 < best.2
}

/// Mask table entries violating the network constraints, fill the target and
/// power sets, and pick (G*, t*).
pub fn select_solution(
    tables: &mut AllocationTables,
    qos: &QoSBounds,
    p_max: f64,
) -> Result<Selection> {
    let t_count = tables.levels.count();
    let stages = tables.cells.len();
    let tol = power_tol(p_max);

    for stage in 0..stages {
        for t in 0..t_count {
            let Some(cell) = tables.cells[stage][t] else {
                tables.masked[stage][t] = false;
                continue;
            };
            let consumed = tables.cell_consumed(stage, t);
            let rate = cell.total_rate;
            let over_budget = consumed > p_max + tol;
            let under_net = rate < qos.r_min_net - 1e-12;
            let over_net = qos.r_max_net.is_some_and(|hi| rate > hi + 1e-12);
            tables.masked[stage][t] = over_budget || under_net || over_net;
        }
    }

    // Column-wise best cells feed the target/power sets.
    for t in 0..t_count {
        let mut col_best: Option<(f64, usize, usize)> = None;
        for stage in 0..stages {
            if tables.masked[stage][t] {
                continue;
            }
            if let Some(cell) = tables.cells[stage][t] {
                let cand = (cell.total_rate, stage + 1, t);
                if col_best.is_none_or(|b| better(cand, b)) {
                    col_best = Some(cand);
                }
            }
        }
        if let Some((_, stage_plus_1, _)) = col_best {
            for alloc in tables.cell_allocations(stage_plus_1 - 1, t) {
                tables.targets[alloc.user][t] = alloc.rate;
                tables.powers[alloc.user][t] = alloc.power;
            }
        }
    }

    let mut best: Option<(f64, usize, usize)> = None;
    for stage in 0..stages {
        for t in 0..t_count {
            if tables.masked[stage][t] {
                continue;
            }
            if let Some(cell) = tables.cells[stage][t] {
                let cand = (cell.total_rate, stage + 1, t);
                if best.is_none_or(|b| better(cand, b)) {
                    best = Some(cand);
                }
            }
        }
    }

    let (network_rate, g_star, t_star) = best.ok_or(Error::NoFeasibleSolution)?;
    let allocations = tables.cell_allocations(g_star - 1, t_star);
    let consumed = tables.cell_consumed(g_star - 1, t_star);
    let groups_served = tables.backtrace(g_star - 1, t_star).len();
    let selection = Selection {
        g_star,
        t_star,
        network_rate,
        consumed,
        groups_served,
        allocations,
    };
    tables.selected = Some(selection.clone());
    Ok(selection)
}

fn push_cell(out: &mut String, value: Option<f64>) {
    match value {
        Some(v) => out.push_str(&format!(",{v}")),
        None => out.push(','),
    }
}

impl AllocationTables {
    /// G x T rate table; infeasible or masked cells are empty.
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("groups");
        for t in 1..=self.levels.count() {
            out.push_str(&format!(",t{t}"));
        }
        out.push('\n');
        for (stage, row) in self.cells.iter().enumerate() {
            out.push_str(&format!("{}", stage + 1));
            for (t, cell) in row.iter().enumerate() {
                let visible = cell.filter(|_| !self.masked[stage][t]);
                push_cell(&mut out, visible.map(|c| c.total_rate));
            }
            out.push('\n');
        }
        out
    }

    fn user_table_csv(&self, table: &[Vec<f64>]) -> String {
        let mut out = String::from("user");
        for t in 1..=self.levels.count() {
            out.push_str(&format!(",t{t}"));
        }
        out.push('\n');
        for (user, row) in table.iter().enumerate() {
            out.push_str(&format!("{user}"));
            for &v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// K x T target rates.
    pub fn targets_csv(&self) -> String {
        self.user_table_csv(&self.targets)
    }

    /// K x T allocated powers.
    pub fn powers_csv(&self) -> String {
        self.user_table_csv(&self.powers)
    }

    /// One-row summary of the selected solution.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("g_star,t_star,network_rate_bps_hz,consumed_w,groups_served,order_seed\n");
        if let Some(sel) = &self.selected {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                sel.g_star,
                sel.t_star + 1,
                sel.network_rate,
                sel.consumed,
                sel.groups_served,
                self.order_seed
            ));
        }
        out
    }
}
