//! Scenario ingestion, Monte Carlo drops, metric computation, and the sweep
//! machinery reproducing the evaluation axes.

pub mod config;
pub mod stats;
mod sweep;

pub use config::ScenarioConfig;
pub use sweep::{drop_seed, splitmix64, sweep, SweepAxis, SweepRow, SweepSpec, SweepTable};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_scheme, SchemeId, SchemeInput, SchemeOutcome};
use crate::channel::{
    apply_blockage, array_directions, build_channel_matrix_array, max_safe_power, noise_variance,
    room_aim_grid, ChannelMatrix, OpticalFrontEnd,
};
use crate::error::{Error, Result};
use crate::geometry::{
    classify_users, place_ap_grid, ClassifyRule, DetectorGeometry, UserTerminal, Vec3,
};
use crate::grouping::{build_weight_matrix, optimal_matching, GroupPair};
use crate::power::{discretize, PowerLevels, QoSBounds, SolverConfig};

/// Per-drop metrics of one scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scheme: SchemeId,
    pub seed: u64,
    pub sum_rate_bps_hz: f64,
    pub sum_rate_bps: f64,
    pub jain: f64,
    pub energy_efficiency_bits_per_j: f64,
    pub consumed_power_w: f64,
    pub groups_served: usize,
    pub t_star: Option<usize>,
    /// No feasible network solution on this drop.
    pub infeasible: bool,
    pub rate_evals: u64,
}

/// Jain's fairness index (sum r)^2 / (K sum r^2); 0 for an all-zero vector.
pub fn jain_fairness(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::Config("fairness needs a nonempty rate list".into()));
    }
    if rates.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(Error::Config("fairness needs nonnegative finite rates".into()));
    }
    let sum: f64 = rates.iter().sum();
    let sq: f64 = rates.iter().map(|&r| r * r).sum();
    if sq == 0.0 {
        return Ok(0.0);
    }
    Ok(sum * sum / (rates.len() as f64 * sq))
}

/// Bits per joule from the actually consumed power.
pub fn energy_efficiency(sum_rate_bps: f64, consumed_power_w: f64) -> f64 {
    if consumed_power_w <= 0.0 {
        return 0.0;
    }
    sum_rate_bps / consumed_power_w
}

/// All per-drop state shared by the schemes: one realization of placements,
/// blockage, channels, noise, classification and grouping.
#[derive(Debug, Clone)]
pub struct DropContext {
    pub seed: u64,
    pub users: Vec<UserTerminal>,
    pub channels: Vec<ChannelMatrix>,
    pub sigma2: Vec<f64>,
    pub weak: Vec<usize>,
    pub strong: Vec<usize>,
    pub pairs: Vec<GroupPair>,
    pub front_end: OpticalFrontEnd,
    pub p_max: f64,
    pub qos: QoSBounds,
    pub solver: SolverConfig,
    pub levels: PowerLevels,
    pub order_seed: u64,
    pub conventional_beta_weak: f64,
}

/// Network power budget after the eye-safety cap: L * L_v^2 * beam power.
pub fn effective_p_max(cfg: &ScenarioConfig) -> Result<f64> {
    let beam = cfg.beam_params()?;
    let per_beam = match cfg.eye_safety_params() {
        Some(safety) => cfg.beam_power_w.min(max_safe_power(&beam, &safety)?),
        None => cfg.beam_power_w,
    };
    let l = (cfg.ap_grid.rows * cfg.ap_grid.cols) as f64;
    let lv2 = (cfg.ap_grid.array_side * cfg.ap_grid.array_side) as f64;
    Ok(l * lv2 * per_beam)
}

fn place_users(cfg: &ScenarioConfig, l: usize, rng: &mut ChaCha8Rng) -> Result<Vec<UserTerminal>> {
    let room = cfg.room()?;
    let det = &cfg.detector;
    let m: usize = det.rings.iter().map(|r| r.count).sum();
    if m < l {
        return Err(Error::Config(format!(
            "detector has {m} photodiodes but the scenario deploys {l} APs"
        )));
    }
    let pd_area = det.pd_area_mm2 * 1e-6;
    // Stagger the ring azimuths so no two photodiodes share a direction.
    let mut elevations = Vec::with_capacity(m);
    let mut azimuths = Vec::with_capacity(m);
    for (ri, ring) in det.rings.iter().enumerate() {
        for k in 0..ring.count {
            elevations.push(ring.elevation_deg.to_radians());
            azimuths.push(
                (k as f64 / ring.count as f64 + ri as f64 * 0.137) * std::f64::consts::TAU,
            );
        }
    }
    let detector = DetectorGeometry::new(
        elevations,
        azimuths,
        pd_area,
        pd_area,
        det.filter_gain,
        det.fov_deg.to_radians(),
    )?;

    let positions: Vec<Vec3> = match &cfg.placement {
        config::PlacementCfg::Uniform => (0..cfg.num_users)
            .map(|_| {
                Vec3::new(
                    rng.random::<f64>() * room.width,
                    rng.random::<f64>() * room.depth,
                    cfg.user_height_m,
                )
            })
            .collect(),
        config::PlacementCfg::Fixed { positions } => positions
            .iter()
            .map(|&[x, y]| Vec3::new(x, y, cfg.user_height_m))
            .collect(),
    };
    positions
        .into_iter()
        .enumerate()
        .map(|(id, p)| {
            if !room.contains(&p) {
                return Err(Error::Config(format!(
                    "user {id} at ({}, {}, {}) lies outside the room",
                    p.x, p.y, p.z
                )));
            }
            Ok(UserTerminal::new(id, p, detector.clone()))
        })
        .collect()
}

/// DC received optical power with the budget spread uniformly over the APs,
/// averaged over reception modes; feeds the composite noise model and the
/// classification ranking.
fn received_power_estimate(cm: &ChannelMatrix, p_max: f64) -> f64 {
    let l = cm.gains.ncols() as f64;
    let rows = cm.gains.nrows() as f64;
    p_max / l * cm.gains.sum() / rows
}

fn form_groups(weak: &[usize], strong: &[usize], users: &[UserTerminal]) -> Result<Vec<GroupPair>> {
    if weak.is_empty() || strong.is_empty() {
        // Degenerate single-class scenario: every user is its own group.
        let singles = |ids: &[usize], is_weak: bool| {
            ids.iter()
                .map(|&id| GroupPair {
                    weak: is_weak.then_some(id),
                    strong: (!is_weak).then_some(id),
                    weight: 0.0,
                })
                .collect::<Vec<_>>()
        };
        return Ok(if weak.is_empty() {
            singles(strong, false)
        } else {
            singles(weak, true)
        });
    }
    let weak_users: Vec<&UserTerminal> = weak.iter().map(|&i| &users[i]).collect();
    let strong_users: Vec<&UserTerminal> = strong.iter().map(|&i| &users[i]).collect();
    let mut matrix = build_weight_matrix(&weak_users, &strong_users)?;
    matrix.pad_square();
    Ok(optimal_matching(&matrix)?.pairs)
}

/// Realize one Monte Carlo drop: place users, draw blockage, build channels,
/// classify, and form the groups every scheme shares.
pub fn prepare_drop(cfg: &ScenarioConfig) -> Result<DropContext> {
    cfg.validate()?;
    let room = cfg.room()?;
    let aps = place_ap_grid(&room, cfg.ap_grid.rows, cfg.ap_grid.cols, cfg.ap_grid.array_side)?;
    let l = aps.len();
    let beam = cfg.beam_params()?;
    let front_end = cfg.front_end_params();
    let noise = cfg.noise_model()?;
    let p_max = effective_p_max(cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let users = place_users(cfg, l, &mut rng)?;
    let mask = apply_blockage(&mut rng, cfg.blockage_probability, users.len(), l)?;
    let order_seed: u64 = rng.random();

    // Each AP is an array of array_side^2 VCSELs; the beams tile the
    // receiving plane so every AP reaches every user. A single-element array
    // keeps the plain down-pointing beam.
    let per_ap_dirs: Vec<Vec<Vec3>> = if cfg.ap_grid.array_side >= 2 {
        let aims = room_aim_grid(&room, cfg.ap_grid.array_side);
        aps.iter().map(|ap| array_directions(ap, &aims)).collect()
    } else {
        aps.iter().map(|ap| vec![ap.orientation]).collect()
    };
    let channels: Vec<ChannelMatrix> = users
        .iter()
        .map(|u| build_channel_matrix_array(u, &aps, &beam, &mask[u.id], &per_ap_dirs))
        .collect::<Result<_>>()?;
    let received: Vec<f64> = channels
        .iter()
        .map(|cm| received_power_estimate(cm, p_max))
        .collect();
    let sigma2: Vec<f64> = received
        .iter()
        .map(|&p| noise_variance(&front_end, &noise, p))
        .collect::<Result<_>>()?;

    let rule = cfg.classify_rule();
    let (weak, strong) = match classify_users(&users, &aps, &received, rule) {
        Ok(split) => split,
        Err(Error::EmptyClass(msg)) if rule != ClassifyRule::MedianSplit => {
            log::warn!("classification fell back to median split: {msg}");
            classify_users(&users, &aps, &received, ClassifyRule::MedianSplit)?
        }
        Err(e) => return Err(e),
    };
    let pairs = form_groups(&weak, &strong, &users)?;

    Ok(DropContext {
        seed: cfg.seed,
        users,
        channels,
        sigma2,
        weak,
        strong,
        pairs,
        front_end,
        p_max,
        qos: cfg.qos_bounds(),
        solver: SolverConfig::for_power_budget(p_max),
        levels: discretize(p_max, cfg.power_levels)?,
        order_seed,
        conventional_beta_weak: cfg.conventional_beta_weak,
    })
}

impl DropContext {
    pub fn run(&self, scheme: SchemeId) -> Result<SchemeOutcome> {
        let input = SchemeInput {
            channels: &self.channels,
            sigma2: &self.sigma2,
            front_end: &self.front_end,
            p_max: self.p_max,
            qos: &self.qos,
            solver: &self.solver,
            levels: &self.levels,
            order_seed: self.order_seed,
        };
        run_scheme(scheme, &input, &self.pairs, self.conventional_beta_weak)
    }

    pub fn metrics(&self, scheme: SchemeId, outcome: &SchemeOutcome) -> Result<MetricsRecord> {
        let sum_rate_bps_hz = outcome.sum_rate();
        let sum_rate_bps = sum_rate_bps_hz * self.front_end.bandwidth;
        Ok(MetricsRecord {
            scheme,
            seed: self.seed,
            sum_rate_bps_hz,
            sum_rate_bps,
            jain: jain_fairness(&outcome.rates_bps_hz)?,
            energy_efficiency_bits_per_j: energy_efficiency(sum_rate_bps, outcome.consumed_w),
            consumed_power_w: outcome.consumed_w,
            groups_served: outcome.groups_served,
            t_star: outcome.t_star,
            infeasible: outcome.infeasible,
            rate_evals: outcome.rate_evals,
        })
    }
}

/// Run one drop of one scheme.
pub fn run_drop(cfg: &ScenarioConfig, scheme: SchemeId) -> Result<MetricsRecord> {
    let (record, _) = run_drop_full(cfg, scheme)?;
    Ok(record)
}

/// Run one drop and keep the per-user outcome (and allocation tables when
/// the scheme produces them).
pub fn run_drop_full(cfg: &ScenarioConfig, scheme: SchemeId) -> Result<(MetricsRecord, SchemeOutcome)> {
    let ctx = prepare_drop(cfg)?;
    let outcome = ctx.run(scheme)?;
    let record = ctx.metrics(scheme, &outcome)?;
    Ok((record, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.num_users = 4;
        cfg.ap_grid = config::ApGridCfg { rows: 2, cols: 2, array_side: 8 };
        cfg.beam.waist_um = 2.0;
        cfg.qos.p_s_threshold_w = 1.5;
        cfg.power_levels = 6;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn jain_examples() {
        assert_relative_eq!(jain_fairness(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_relative_eq!(jain_fairness(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert_relative_eq!(jain_fairness(&[2.0, 1.0]).unwrap(), 0.9);
        assert_eq!(jain_fairness(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(jain_fairness(&[]).is_err());
        assert!(jain_fairness(&[-1.0]).is_err());
    }

    #[test]
    fn energy_efficiency_examples() {
        assert_relative_eq!(energy_efficiency(1e9, 1.0), 1e9);
        assert_relative_eq!(energy_efficiency(1e9, 0.5), 2e9);
        assert_eq!(energy_efficiency(0.0, 0.0), 0.0);
    }

    #[test]
    fn default_p_max_matches_grid_power() {
        let cfg = ScenarioConfig::default();
        assert_relative_eq!(effective_p_max(&cfg).unwrap(), 16.0 * 0.06, max_relative = 1e-12);
    }

    #[test]
    fn eye_safety_caps_beam_power() {
        let mut cfg = small_cfg();
        cfg.beam_power_w = 10.0;
        cfg.eye_safety = Some(config::EyeSafetyCfg {
            cornea_diameter_mm: 7.0,
            exposure_limit_w_per_m2: 10.0,
            hazard_distance_m: 0.1,
            drive_current_range_a: [1e-3, 10.0],
            dc_bias_a: 5.0,
            power_range_w: [1e-9, 1e3],
            modulation_amplitude_a: 1.0,
        });
        let capped = effective_p_max(&cfg).unwrap();
        assert!(capped < 4.0 * 10.0, "eye safety must cap the beam power");
    }

    #[test]
    fn drop_is_deterministic_per_seed() {
        let cfg = small_cfg();
        let a = run_drop(&cfg, SchemeId::DynamicNoma).unwrap();
        let b = run_drop(&cfg, SchemeId::DynamicNoma).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn small_drop_serves_users_with_nonzero_rates() {
        let cfg = small_cfg();
        let (record, outcome) = run_drop_full(&cfg, SchemeId::DynamicNoma).unwrap();
        assert!(!record.infeasible);
        assert!(record.sum_rate_bps_hz > 0.0);
        assert!(record.jain > 0.0 && record.jain <= 1.0);
        assert!(record.consumed_power_w <= effective_p_max(&cfg).unwrap() + 1e-9);
        assert!(outcome.tables.is_some());
    }

    #[test]
    fn full_blockage_yields_zero_rate_flagged_record() {
        let mut cfg = small_cfg();
        cfg.blockage_probability = 1.0;
        cfg.qos.r_min_bps_hz = 0.1;
        let record = run_drop(&cfg, SchemeId::DynamicNoma).unwrap();
        assert!(record.infeasible);
        assert_eq!(record.sum_rate_bps_hz, 0.0);
    }

    #[test]
    fn odd_user_count_runs_via_virtual_padding() {
        let mut cfg = small_cfg();
        cfg.num_users = 5;
        let record = run_drop(&cfg, SchemeId::DynamicNoma).unwrap();
        assert!(record.sum_rate_bps_hz >= 0.0);
        let ctx = prepare_drop(&cfg).unwrap();
        assert_eq!(ctx.weak.len(), 3);
        assert_eq!(ctx.strong.len(), 2);
        assert_eq!(ctx.pairs.len(), 3);
    }

    #[test]
    fn distance_rule_falls_back_when_degenerate() {
        let mut cfg = small_cfg();
        cfg.classify = config::ClassifyCfg::DistanceThreshold { d_th_m: 1e-6 };
        let ctx = prepare_drop(&cfg).unwrap();
        assert!(!ctx.weak.is_empty() && !ctx.strong.is_empty());
    }

    #[test]
    fn all_schemes_run_on_the_default_small_scenario() {
        let cfg = small_cfg();
        let ctx = prepare_drop(&cfg).unwrap();
        for scheme in SchemeId::ALL {
            let outcome = ctx.run(scheme).unwrap();
            let record = ctx.metrics(scheme, &outcome).unwrap();
            assert!(record.sum_rate_bps_hz.is_finite());
            assert!(record.sum_rate_bps_hz >= 0.0, "{scheme}");
        }
    }
}
