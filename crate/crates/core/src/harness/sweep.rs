//! Axis sweeps over the evaluation scenarios with per-drop RNG streams
//! derived from the master seed, so serial and parallel runs emit identical
//! tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{NoiseCfg, ScenarioConfig};
use super::{effective_p_max, prepare_drop, MetricsRecord};
use crate::baselines::SchemeId;
use crate::error::{Error, Result};
use crate::rate::electrical_gain;

/// Swept quantity. Values are SI (meters, watts), probabilities, counts, or
/// dB for the SNR axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NumUsers,
    Blockage,
    Snr,
    BeamWaist,
    TxPower,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "num_users" => Ok(SweepAxis::NumUsers),
            "blockage" => Ok(SweepAxis::Blockage),
            "snr" => Ok(SweepAxis::Snr),
            "beam_waist" => Ok(SweepAxis::BeamWaist),
            "tx_power" => Ok(SweepAxis::TxPower),
            other => Err(Error::Config(format!(
                "unknown sweep axis '{other}' (expected num_users, blockage, snr, beam_waist, tx_power)"
            ))),
        }
    }
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::NumUsers => "num_users",
            SweepAxis::Blockage => "blockage",
            SweepAxis::Snr => "snr",
            SweepAxis::BeamWaist => "beam_waist",
            SweepAxis::TxPower => "tx_power",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub drops: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one axis value".into()));
        }
        if self.drops == 0 {
            return Err(Error::Config("sweep needs at least one drop per point".into()));
        }
        Ok(())
    }
}

/// Aggregated row of the sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub scheme: SchemeId,
    pub mean_rate_bps_hz: f64,
    pub stderr_rate_bps_hz: f64,
    pub mean_jain: f64,
    pub mean_ee_bits_per_j: f64,
    pub mean_groups_served: f64,
    /// Mean winning level (1-based); `None` for schemes without levels.
    pub mean_t_star: Option<f64>,
}

/// Sweep output: aggregated rows plus the raw per-drop records
/// (`records[value][scheme][drop]`) for the statistical checks.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeId>,
    pub rows: Vec<SweepRow>,
    pub records: Vec<Vec<Vec<MetricsRecord>>>,
}

impl SweepTable {
    /// Per-drop sum rates of one (value, scheme) cell.
    pub fn rates_at(&self, value_idx: usize, scheme: SchemeId) -> Vec<f64> {
        let s = self.schemes.iter().position(|&x| x == scheme).expect("scheme in sweep");
        self.records[value_idx][s]
            .iter()
            .map(|r| r.sum_rate_bps_hz)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "axis,scheme,mean_rate_bps_hz,stderr_rate_bps_hz,mean_jain,mean_ee_bits_per_j,mean_groups_served,mean_t_star\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.axis_value,
                row.scheme,
                row.mean_rate_bps_hz,
                row.stderr_rate_bps_hz,
                row.mean_jain,
                row.mean_ee_bits_per_j,
                row.mean_groups_served,
                row.mean_t_star.map(|t| t.to_string()).unwrap_or_default(),
            ));
        }
        out
    }
}

/// SplitMix64; the per-drop seed derivation.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream seed of drop `index` under `master`.
pub fn drop_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64 + 1))
}

/// Apply one axis value to a copy of the base config.
pub fn apply_axis(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    match axis {
        SweepAxis::NumUsers => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!("num_users axis needs positive integers (got {value})")));
            }
            out.num_users = value as usize;
        }
        SweepAxis::Blockage => out.blockage_probability = value,
        SweepAxis::Snr => {
            // Scale the (fixed) noise variance so the median per-user SNR
            // c rho^2 f^2 P_max / (K sigma^2) hits the target in dB.
            let p_max = effective_p_max(cfg)?;
            let a = electrical_gain(&cfg.front_end_params());
            let snr_lin = 10f64.powf(value / 10.0);
            let sigma2 = a * p_max / (cfg.num_users as f64 * snr_lin);
            if sigma2 <= 0.0 || !sigma2.is_finite() {
                return Err(Error::Config(format!("SNR target {value} dB yields invalid noise")));
            }
            out.noise = NoiseCfg::FixedSigma { sigma2 };
        }
        SweepAxis::BeamWaist => out.beam.waist_um = value * 1e6,
        SweepAxis::TxPower => out.beam_power_w = value,
    }
    out.validate()?;
    Ok(out)
}

/// Run `spec.drops` drops per (axis value, scheme). Drops execute in
/// parallel; per-drop seeds come from (master seed, drop index), so the
/// output is byte-identical across thread counts and repeated runs.
pub fn sweep(cfg: &ScenarioConfig, spec: &SweepSpec, schemes: &[SchemeId]) -> Result<SweepTable> {
    spec.validate()?;
    if schemes.is_empty() {
        return Err(Error::Config("sweep needs at least one scheme".into()));
    }

    let configs: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|&v| apply_axis(cfg, spec.axis, v))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.drops).map(move |d| (v, d)))
        .collect();
    let results: Vec<Result<Vec<MetricsRecord>>> = jobs
        .par_iter()
        .map(|&(v, d)| {
            let mut drop_cfg = configs[v].clone();
            drop_cfg.seed = drop_seed(cfg.seed, d);
            let ctx = prepare_drop(&drop_cfg)?;
            schemes
                .iter()
                .map(|&scheme| {
                    let outcome = ctx.run(scheme)?;
                    ctx.metrics(scheme, &outcome)
                })
                .collect()
        })
        .collect();

    let mut records: Vec<Vec<Vec<MetricsRecord>>> =
        vec![vec![Vec::with_capacity(spec.drops); schemes.len()]; spec.values.len()];
    for (&(v, _), result) in jobs.iter().zip(results) {
        for (s, record) in result?.into_iter().enumerate() {
            records[v][s].push(record);
        }
    }

    let mut rows = Vec::with_capacity(spec.values.len() * schemes.len());
    for (v, &value) in spec.values.iter().enumerate() {
        for (s, &scheme) in schemes.iter().enumerate() {
            let cell = &records[v][s];
            let n = cell.len() as f64;
            let mean = |f: &dyn Fn(&MetricsRecord) -> f64| cell.iter().map(|r| f(r)).sum::<f64>() / n;
            let mean_rate = mean(&|r| r.sum_rate_bps_hz);
            let var = cell
                .iter()
                .map(|r| (r.sum_rate_bps_hz - mean_rate).powi(2))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            let t_stars: Vec<f64> = cell.iter().filter_map(|r| r.t_star).map(|t| (t + 1) as f64).collect();
            rows.push(SweepRow {
                axis_value: value,
                scheme,
                mean_rate_bps_hz: mean_rate,
                stderr_rate_bps_hz: (var / n).sqrt(),
                mean_jain: mean(&|r| r.jain),
                mean_ee_bits_per_j: mean(&|r| r.energy_efficiency_bits_per_j),
                mean_groups_served: mean(&|r| r.groups_served as f64),
                mean_t_star: if t_stars.is_empty() {
                    None
                } else {
                    Some(t_stars.iter().sum::<f64>() / t_stars.len() as f64)
                },
            });
        }
    }

    Ok(SweepTable {
        axis: spec.axis,
        values: spec.values.clone(),
        schemes: schemes.to_vec(),
        rows,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ApGridCfg;

    fn tiny_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.num_users = 4;
        cfg.ap_grid = ApGridCfg { rows: 2, cols: 2, array_side: 1 };
        cfg.power_levels = 4;
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn sweep_is_byte_identical_across_runs() {
        let cfg = tiny_cfg();
        let spec = SweepSpec {
            axis: SweepAxis::NumUsers,
            values: vec![2.0, 4.0],
            drops: 2,
        };
        let schemes = [SchemeId::DynamicNoma, SchemeId::PlainBia];
        let a = sweep(&cfg, &spec, &schemes).unwrap().to_csv();
        let b = sweep(&cfg, &spec, &schemes).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.lines().count() == 1 + 2 * 2);
    }

    #[test]
    fn snr_axis_sets_fixed_noise_matching_definition() {
        let cfg = tiny_cfg();
        let snr_db = 20.0;
        let adjusted = apply_axis(&cfg, SweepAxis::Snr, snr_db).unwrap();
        let NoiseCfg::FixedSigma { sigma2 } = adjusted.noise else {
            panic!("snr axis must pin the noise variance");
        };
        let a = electrical_gain(&cfg.front_end_params());
        let p_max = effective_p_max(&cfg).unwrap();
        let snr = a * p_max / (cfg.num_users as f64 * sigma2);
        assert!((10.0 * snr.log10() - snr_db).abs() < 1e-9);
    }

    #[test]
    fn beam_waist_axis_takes_si_meters() {
        let cfg = tiny_cfg();
        let adjusted = apply_axis(&cfg, SweepAxis::BeamWaist, 5e-6).unwrap();
        assert!((adjusted.beam.waist_um - 5.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_axis_values_rejected() {
        let cfg = tiny_cfg();
        assert!(apply_axis(&cfg, SweepAxis::NumUsers, 2.5).is_err());
        assert!(apply_axis(&cfg, SweepAxis::Blockage, 2.0).is_err());
    }

    #[test]
    fn drop_seeds_are_distinct_streams() {
        let seeds: Vec<u64> = (0..100).map(|i| drop_seed(42, i)).collect();
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), seeds.len());
    }
}
