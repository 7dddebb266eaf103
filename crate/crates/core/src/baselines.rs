//! The dynamic NOMA scheme and its four comparison schemes, sharing the
//! channel, grouping and rate machinery.

use serde::{Deserialize, Serialize};

use crate::bia::alignment_ratio;
use crate::channel::{ChannelMatrix, OpticalFrontEnd};
use crate::error::{Error, Result};
use crate::grouping::GroupPair;
use crate::power::{
    select_solution, solve_allocation, solve_group, AllocationTables, GroupChannel, PowerLevels,
    QoSBounds, SolverConfig, UserPath,
};
use crate::rate::{electrical_gain, noise_covariance, RatePath};

/// Scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    DynamicNoma,
    Baseline1,
    Baseline2,
    ConventionalNoma,
    PlainBia,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::DynamicNoma,
        SchemeId::Baseline1,
        SchemeId::Baseline2,
        SchemeId::ConventionalNoma,
        SchemeId::PlainBia,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::DynamicNoma => "dynamic_noma",
            SchemeId::Baseline1 => "baseline1",
            SchemeId::Baseline2 => "baseline2",
            SchemeId::ConventionalNoma => "conventional_noma",
            SchemeId::PlainBia => "plain_bia",
        }
    }
}

impl std::str::FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic_noma" => Ok(SchemeId::DynamicNoma),
            "baseline1" => Ok(SchemeId::Baseline1),
            "baseline2" => Ok(SchemeId::Baseline2),
            "conventional_noma" => Ok(SchemeId::ConventionalNoma),
            "plain_bia" => Ok(SchemeId::PlainBia),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected one of dynamic_noma, baseline1, baseline2, conventional_noma, plain_bia)"
            ))),
        }
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a scheme needs about one Monte Carlo drop.
#[derive(Debug)]
pub struct SchemeInput<'a> {
    /// Per-user channel matrices, indexed by user id.
    pub channels: &'a [ChannelMatrix],
    /// Per-user composite noise variances, A^2.
    pub sigma2: &'a [f64],
    pub front_end: &'a OpticalFrontEnd,
    pub p_max: f64,
    pub qos: &'a QoSBounds,
    pub solver: &'a SolverConfig,
    pub levels: &'a PowerLevels,
    /// Seed of the DP stage-order shuffle.
    pub order_seed: u64,
}

/// Per-user outcome of one scheme on one drop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeOutcome {
    pub rates_bps_hz: Vec<f64>,
    pub powers_w: Vec<f64>,
    pub consumed_w: f64,
    pub groups_served: usize,
    /// Winning power level (dynamic allocation schemes only).
    pub t_star: Option<usize>,
    /// Set when no feasible network solution existed.
    pub infeasible: bool,
    pub rate_evals: u64,
    /// Full solution sets of the dynamic allocation schemes.
    #[serde(skip)]
    pub tables: Option<AllocationTables>,
}

impl SchemeOutcome {
    fn zero(k: usize) -> Self {
        Self {
            rates_bps_hz: vec![0.0; k],
            powers_w: vec![0.0; k],
            consumed_w: 0.0,
            groups_served: 0,
            t_star: None,
            infeasible: false,
            rate_evals: 0,
            tables: None,
        }
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates_bps_hz.iter().sum()
    }
}

/// Total optical gain summed over modes and APs; the ranking proxy for
/// classification and conventional pairing.
pub fn aggregate_gain(cm: &ChannelMatrix) -> f64 {
    cm.gains.iter().sum()
}

/// Squared scalar channel of the orthogonal schemes: every AP carries the
/// group's signal (the same per-AP power convention as the precoded paths)
/// and the intensities add at the best single photodiode, so the effective
/// gain is (sum_l g)^2 at the best mode.
pub fn best_mode_gain_sq(cm: &ChannelMatrix) -> f64 {
    (0..cm.gains.nrows())
        .map(|m| {
            let s = cm.gains.row(m).sum();
            s * s
        })
        .fold(0.0, f64::max)
}

/// BIA rate path of one user: the channel matrix normalized by its Frobenius
/// magnitude feeds the log-det structure, the magnitude itself folds into
/// the SINR power coefficient so weak and strong users keep their gain
/// difference.
pub fn bia_user_path(
    user_id: usize,
    cm: &ChannelMatrix,
    sigma2: f64,
    front_end: &OpticalFrontEnd,
    cov_groups: usize,
    prelog: f64,
) -> Result<UserPath> {
    let l = cm.gains.nrows();
    let ref_sq = cm.gains.norm_squared() / l as f64;
    let a = electrical_gain(front_end);
    if ref_sq == 0.0 {
        return Ok(UserPath {
            user_id,
            path: RatePath {
                prelog,
                eigs: vec![0.0; l],
            },
            elec_gain: 0.0,
            sigma2,
        });
    }
    let h_norm = &cm.gains / ref_sq.sqrt();
    let rz = noise_covariance(cov_groups, l, 1.0);
    let path = RatePath::from_channel(&h_norm, &rz, prelog)?;
    Ok(UserPath {
        user_id,
        path,
        elec_gain: a * ref_sq,
        sigma2,
    })
}

/// Scalar best-photodiode path for the orthogonal-sharing schemes.
pub fn scalar_user_path(
    user_id: usize,
    cm: &ChannelMatrix,
    sigma2: f64,
    front_end: &OpticalFrontEnd,
    prelog: f64,
) -> UserPath {
    let h_sq = best_mode_gain_sq(cm);
    UserPath {
        user_id,
        path: RatePath::scalar(if h_sq > 0.0 { 1.0 } else { 0.0 }, prelog),
        elec_gain: electrical_gain(front_end) * h_sq,
        sigma2,
    }
}

fn group_channels(
    input: &SchemeInput,
    pairs: &[GroupPair],
    make_path: impl Fn(usize) -> Result<UserPath>,
) -> Result<Vec<GroupChannel>> {
    pairs
        .iter()
        .map(|p| {
            Ok(GroupChannel {
                weak: p.weak.map(&make_path).transpose()?,
                strong: p.strong.map(&make_path).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(|chans| {
            debug_assert_eq!(chans.len(), pairs.len());
            let _ = input;
            chans
        })
}

fn run_dynamic_allocation(
    input: &SchemeInput,
    chans: &[GroupChannel],
    k: usize,
) -> Result<SchemeOutcome> {
    let mut tables = solve_allocation(
        chans,
        input.levels,
        input.qos,
        input.solver,
        input.order_seed,
        k,
    )?;
    let rate_evals = tables.rate_evals;
    match select_solution(&mut tables, input.qos, input.p_max) {
        Ok(sel) => {
            let mut out = SchemeOutcome::zero(k);
            for alloc in &sel.allocations {
                out.rates_bps_hz[alloc.user] = alloc.rate;
                out.powers_w[alloc.user] = alloc.power;
            }
            out.consumed_w = sel.consumed;
            out.groups_served = sel.groups_served;
            out.t_star = Some(sel.t_star);
            out.rate_evals = rate_evals;
            out.tables = Some(tables);
            Ok(out)
        }
        Err(Error::NoFeasibleSolution) => {
            let mut out = SchemeOutcome::zero(k);
            out.infeasible = true;
            out.rate_evals = rate_evals;
            out.tables = Some(tables);
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// The proposed scheme: BIA outer precoder + dynamic power allocation over
/// the formed groups.
pub fn dynamic_noma(input: &SchemeInput, pairs: &[GroupPair]) -> Result<SchemeOutcome> {
    let k = input.channels.len();
    let g = pairs.len().max(1);
    let l = input.channels[0].gains.nrows();
    let prelog = alignment_ratio(l, g).as_f64();
    let chans = group_channels(input, pairs, |u| {
        bia_user_path(u, &input.channels[u], input.sigma2[u], input.front_end, g, prelog)
    })?;
    run_dynamic_allocation(input, &chans, k)
}

/// Baseline 1: BIA precoder kept, fixed per-group budget P_max / G, each
/// group maximized independently.
pub fn baseline1(input: &SchemeInput, pairs: &[GroupPair]) -> Result<SchemeOutcome> {
    let k = input.channels.len();
    let g = pairs.len().max(1);
    let l = input.channels[0].gains.nrows();
    let prelog = alignment_ratio(l, g).as_f64();
    let chans = group_channels(input, pairs, |u| {
        bia_user_path(u, &input.channels[u], input.sigma2[u], input.front_end, g, prelog)
    })?;
    let budget = input.p_max / g as f64;
    let mut out = SchemeOutcome::zero(k);
    for (gi, chan) in chans.iter().enumerate() {
        let sol = solve_group(gi, chan, budget, input.qos, input.solver);
        out.rate_evals += sol.rate_evals;
        if !sol.feasible {
            continue;
        }
        out.groups_served += 1;
        out.consumed_w += sol.consumed;
        if let Some(w) = pairs[gi].weak {
            out.rates_bps_hz[w] = sol.rate_weak;
            out.powers_w[w] = sol.p_w;
        }
        if let Some(s) = pairs[gi].strong {
            out.rates_bps_hz[s] = sol.rate_strong;
            out.powers_w[s] = sol.p_s;
        }
    }
    out.infeasible = out.groups_served == 0;
    Ok(out)
}

/// Baseline 2: dynamic power allocation kept, BIA replaced by orthogonal
/// sharing (prelog 1/G, single best reception mode per user).
pub fn baseline2(input: &SchemeInput, pairs: &[GroupPair]) -> Result<SchemeOutcome> {
    let k = input.channels.len();
    let g = pairs.len().max(1);
    let prelog = 1.0 / g as f64;
    let chans = group_channels(input, pairs, |u| {
        Ok(scalar_user_path(u, &input.channels[u], input.sigma2[u], input.front_end, prelog))
    })?;
    run_dynamic_allocation(input, &chans, k)
}

/// Conventional NOMA: groups by channel-gain difference (best with worst),
/// a fixed 0.8 / 0.2 split of the equal per-group budget, orthogonal
/// sharing among groups.
pub fn conventional_noma(input: &SchemeInput, beta_weak: f64) -> Result<SchemeOutcome> {
    let k = input.channels.len();
    if k == 0 {
        return Err(Error::Config("conventional NOMA needs at least one user".into()));
    }
    let mut by_gain: Vec<usize> = (0..k).collect();
    by_gain.sort_by(|&a, &b| {
        aggregate_gain(&input.channels[b])
            .total_cmp(&aggregate_gain(&input.channels[a]))
            .then(a.cmp(&b))
    });
    let pairs = k / 2;
    let g = pairs + (k % 2);
    let budget = input.p_max / g as f64;
    let p_w = beta_weak * budget;
    let p_s = (1.0 - beta_weak) * budget;
    let prelog = 1.0 / g as f64;

    let mut out = SchemeOutcome::zero(k);
    let mut serve = |user: usize, power: f64, interference: f64| {
        let path = scalar_user_path(user, &input.channels[user], input.sigma2[user], input.front_end, prelog);
        let gamma = path.elec_gain * power / (path.elec_gain * interference + path.sigma2);
        out.rates_bps_hz[user] = path.path.rate(gamma);
        out.powers_w[user] = power;
        out.rate_evals += 1;
    };
    for i in 0..pairs {
        let strong = by_gain[i];
        let weak = by_gain[k - 1 - i];
        serve(weak, p_w, p_s);
        serve(strong, p_s, 0.0);
    }
    if k % 2 == 1 {
        // Odd user count: the median user forms a singleton group on the
        // weak power share with no intra-group interference.
        serve(by_gain[pairs], p_w, 0.0);
    }
    out.consumed_w = input.p_max;
    out.groups_served = g;
    Ok(out)
}

/// Plain BIA over K individual users: prelog 1 / (L + K - 1), equal power
/// P_max / K, noise covariance built with G = K.
pub fn plain_bia(input: &SchemeInput) -> Result<SchemeOutcome> {
    let k = input.channels.len();
    if k == 0 {
        return Err(Error::Config("plain BIA needs at least one user".into()));
    }
    let l = input.channels[0].gains.nrows();
    let prelog = alignment_ratio(l, k).as_f64();
    let power = input.p_max / k as f64;
    let mut out = SchemeOutcome::zero(k);
    for user in 0..k {
        let path = bia_user_path(
            user,
            &input.channels[user],
            input.sigma2[user],
            input.front_end,
            k,
            prelog,
        )?;
        let gamma = if path.sigma2 > 0.0 {
            path.elec_gain * power / path.sigma2
        } else {
            0.0
        };
        out.rates_bps_hz[user] = path.path.rate(gamma);
        out.powers_w[user] = power;
        out.rate_evals += 1;
    }
    out.consumed_w = input.p_max;
    out.groups_served = 0;
    Ok(out)
}

/// Dispatch a scheme. `pairs` comes from the dynamic grouping algorithm and
/// is ignored by the schemes that form their own groups or none.
pub fn run_scheme(
    scheme: SchemeId,
    input: &SchemeInput,
    pairs: &[GroupPair],
    conventional_beta_weak: f64,
) -> Result<SchemeOutcome> {
    match scheme {
        SchemeId::DynamicNoma => dynamic_noma(input, pairs),
        SchemeId::Baseline1 => baseline1(input, pairs),
        SchemeId::Baseline2 => baseline2(input, pairs),
        SchemeId::ConventionalNoma => conventional_noma(input, conventional_beta_weak),
        SchemeId::PlainBia => plain_bia(input),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::discretize;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn synthetic_channel(user: usize, scale: f64, l: usize) -> ChannelMatrix {
        let gains = DMatrix::from_fn(l, l, |r, c| {
            scale * (1.0 + 0.3 * ((r * l + c + user) % 5) as f64)
        });
        ChannelMatrix {
            user,
            gains,
            blocked: vec![false; l],
            rank_deficient: false,
        }
    }

    fn front_end() -> OpticalFrontEnd {
        OpticalFrontEnd {
            responsivity: 1.0,
            conversion_factor: 1.0,
            bandwidth: 1.0,
        }
    }

    struct Fixture {
        channels: Vec<ChannelMatrix>,
        sigma2: Vec<f64>,
        fe: OpticalFrontEnd,
        levels: crate::power::PowerLevels,
        qos: QoSBounds,
        solver: SolverConfig,
    }

    impl Fixture {
        fn new(k: usize, l: usize, p_max: f64) -> Self {
            let channels: Vec<ChannelMatrix> = (0..k)
                .map(|u| synthetic_channel(u, if u < k / 2 { 0.4 } else { 1.0 }, l))
                .collect();
            Self {
                channels,
                sigma2: vec![1.0; k],
                fe: front_end(),
                levels: discretize(p_max, 8).unwrap(),
                qos: QoSBounds {
                    r_min: 0.0,
                    r_max: 50.0,
                    p_s_threshold: 0.1 * p_max,
                    r_min_net: 0.0,
                    r_max_net: None,
                },
                solver: SolverConfig::for_power_budget(p_max),
            }
        }

        fn input(&self) -> SchemeInput<'_> {
            SchemeInput {
                channels: &self.channels,
                sigma2: &self.sigma2,
                front_end: &self.fe,
                p_max: self.levels.p_max,
                qos: &self.qos,
                solver: &self.solver,
                levels: &self.levels,
                order_seed: 7,
            }
        }
    }

    fn one_pair() -> Vec<GroupPair> {
        vec![GroupPair { weak: Some(0), strong: Some(1), weight: 1.0 }]
    }

    #[test]
    fn baseline1_single_group_matches_dynamic_at_full_budget() {
        let fx = Fixture::new(2, 3, 2.0);
        let input = fx.input();
        let pairs = one_pair();
        let dynamic = dynamic_noma(&input, &pairs).unwrap();
        let fixed = baseline1(&input, &pairs).unwrap();
        // With one group the fixed budget is P_max, i.e. the top level.
        assert_eq!(dynamic.t_star, Some(7));
        assert_relative_eq!(dynamic.sum_rate(), fixed.sum_rate(), max_relative = 1e-6);
    }

    #[test]
    fn baseline1_respects_per_group_budget() {
        let fx = Fixture::new(4, 3, 2.0);
        let input = fx.input();
        let pairs = vec![
            GroupPair { weak: Some(0), strong: Some(2), weight: 1.0 },
            GroupPair { weak: Some(1), strong: Some(3), weight: 1.0 },
        ];
        let out = baseline1(&input, &pairs).unwrap();
        assert_eq!(out.groups_served, 2);
        let budget = input.p_max / 2.0;
        for gi in 0..2 {
            let group_power: f64 = [pairs[gi].weak.unwrap(), pairs[gi].strong.unwrap()]
                .iter()
                .map(|&u| out.powers_w[u])
                .sum();
            assert!(group_power <= budget + 1e-9);
        }
    }

    #[test]
    fn baseline2_single_group_keeps_full_prelog() {
        let fx = Fixture::new(2, 3, 2.0);
        let input = fx.input();
        let out = baseline2(&input, &one_pair()).unwrap();
        assert!(!out.infeasible);
        // One group: prelog 1; the weak user's scalar rate at its SINR.
        let path = scalar_user_path(0, &fx.channels[0], 1.0, &fx.fe, 1.0);
        let gamma = path.elec_gain * out.powers_w[0] / (path.elec_gain * out.powers_w[1] + 1.0);
        assert_relative_eq!(out.rates_bps_hz[0], (1.0 + gamma).log2(), max_relative = 1e-9);
    }

    #[test]
    fn orthogonal_vs_bia_prelog_ratio() {
        // On identical SINR inputs the two prelogs scale rates by
        // (1/G) / (1/(L+G-1)) exactly.
        let l = 4;
        let g = 3;
        let gamma = 0.9;
        let scalar = RatePath::scalar(1.0, 1.0 / g as f64);
        let bia = RatePath::scalar(1.0, alignment_ratio(l, g).as_f64());
        let expected = (1.0 / g as f64) / alignment_ratio(l, g).as_f64();
        assert_relative_eq!(scalar.rate(gamma) / bia.rate(gamma), expected, max_relative = 1e-12);
    }

    #[test]
    fn conventional_pairs_best_with_worst() {
        let mut fx = Fixture::new(4, 3, 2.0);
        for (u, scale) in [(0usize, 4.0), (1, 3.0), (2, 2.0), (3, 1.0)] {
            fx.channels[u] = synthetic_channel(0, scale, 3);
            fx.channels[u].user = u;
        }
        let input = fx.input();
        let out = conventional_noma(&input, 0.8).unwrap();
        assert_eq!(out.groups_served, 2);
        // Weak users (2, 3) get the 0.8 share of P_max / G.
        let budget = input.p_max / 2.0;
        assert_relative_eq!(out.powers_w[3], 0.8 * budget, max_relative = 1e-12);
        assert_relative_eq!(out.powers_w[0], 0.2 * budget, max_relative = 1e-12);
        assert_relative_eq!(
            out.powers_w.iter().sum::<f64>(),
            input.p_max,
            max_relative = 1e-12
        );
        assert_eq!(out.consumed_w, input.p_max);
    }

    #[test]
    fn conventional_two_users_single_pair() {
        let fx = Fixture::new(2, 3, 2.0);
        let out = conventional_noma(&fx.input(), 0.8).unwrap();
        assert_eq!(out.groups_served, 1);
        assert!(out.rates_bps_hz.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn plain_bia_prelog_and_budget() {
        let fx = Fixture::new(2, 4, 2.0);
        let input = fx.input();
        let out = plain_bia(&input).unwrap();
        assert_eq!(out.consumed_w, input.p_max);
        for &p in &out.powers_w {
            assert_relative_eq!(p, input.p_max / 2.0, max_relative = 1e-12);
        }
        // K = 1 degenerates to prelog 1/L.
        assert_relative_eq!(alignment_ratio(4, 1).as_f64(), 0.25, max_relative = 1e-15);
        // The paper's density comparison: 1/(16+20-1) < 1/(16+10-1).
        assert!(alignment_ratio(16, 20).as_f64() < alignment_ratio(16, 10).as_f64());
    }

    #[test]
    fn all_schemes_nonnegative_and_within_budget() {
        let fx = Fixture::new(6, 3, 3.0);
        let input = fx.input();
        let pairs = vec![
            GroupPair { weak: Some(0), strong: Some(3), weight: 1.0 },
            GroupPair { weak: Some(1), strong: Some(4), weight: 1.0 },
            GroupPair { weak: Some(2), strong: Some(5), weight: 1.0 },
        ];
        for scheme in SchemeId::ALL {
            let out = run_scheme(scheme, &input, &pairs, 0.8).unwrap();
            assert!(
                out.rates_bps_hz.iter().all(|&r| r >= 0.0 && r.is_finite()),
                "{scheme} produced invalid rates"
            );
            assert!(
                out.consumed_w <= input.p_max + 1e-9,
                "{scheme} overspent the budget"
            );
        }
    }
}
