//! Scenario configuration: a versioned JSON schema with strict key checking,
//! defaulting to the reference indoor setup (8 m x 8 m x 3 m room, 4 x 4
//! ceiling APs, 20 users, 60 mW per beam).

use serde::{Deserialize, Serialize};

use crate::channel::{BeamParams, EyeSafetyParams, NoiseMode, NoiseModel, OpticalFrontEnd};
use crate::error::{Error, Result};
use crate::geometry::{ClassifyRule, Room};
use crate::power::QoSBounds;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomCfg {
    pub width_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApGridCfg {
    pub rows: usize,
    pub cols: usize,
    /// VCSELs per array edge (L_v); scales AP power by L_v^2.
    pub array_side: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PlacementCfg {
    /// Uniform random positions on the receiving plane.
    Uniform,
    /// Explicit positions, one `[x, y]` pair per user, meters.
    Fixed { positions: Vec<[f64; 2]> },
}

/// One ring of photodiodes at a common elevation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorRingCfg {
    /// Polar angle from zenith, degrees.
    pub elevation_deg: f64,
    pub count: usize,
}

/// Angle-diversity receiver: rings of photodiodes whose narrow per-diode
/// cones tile the upward hemisphere, giving linearly independent channel
/// responses. The composite receiver field of view stays wide.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorCfg {
    pub rings: Vec<DetectorRingCfg>,
    /// Physical photodiode area, mm^2.
    pub pd_area_mm2: f64,
    /// Per-photodiode field of view half-angle, degrees.
    pub fov_deg: f64,
    /// Optical filter gain.
    pub filter_gain: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamCfg {
    pub waist_um: f64,
    pub wavelength_nm: f64,
    pub refractive_index: f64,
    pub theta_fwhm_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontEndCfg {
    pub responsivity_a_per_w: f64,
    pub conversion_w_per_a: f64,
    pub bandwidth_ghz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum NoiseCfg {
    /// Shot + thermal + laser intensity noise.
    Composite {
        rin_db_per_hz: f64,
        thermal_psd_a2_per_hz: f64,
    },
    /// Fixed variance in A^2.
    FixedSigma { sigma2: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyeSafetyCfg {
    pub cornea_diameter_mm: f64,
    pub exposure_limit_w_per_m2: f64,
    pub hazard_distance_m: f64,
    pub drive_current_range_a: [f64; 2],
    pub dc_bias_a: f64,
    pub power_range_w: [f64; 2],
    pub modulation_amplitude_a: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QoSCfg {
    pub r_min_bps_hz: f64,
    pub r_max_bps_hz: f64,
    pub p_s_threshold_w: f64,
    pub r_min_net_bps_hz: f64,
    pub r_max_net_bps_hz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ClassifyCfg {
    MedianSplit,
    /// Strong iff within `d_th_m` of every AP; falls back to median split
    /// when it empties a class.
    DistanceThreshold { d_th_m: f64 },
}

/// Full scenario description. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub room: RoomCfg,
    pub ap_grid: ApGridCfg,
    pub num_users: usize,
    /// Height of the receiving plane, meters.
    pub user_height_m: f64,
    pub placement: PlacementCfg,
    pub detector: DetectorCfg,
    pub beam: BeamCfg,
    pub front_end: FrontEndCfg,
    pub noise: NoiseCfg,
    /// Transmit optical power per beam, watts (capped by eye safety when
    /// configured).
    pub beam_power_w: f64,
    pub eye_safety: Option<EyeSafetyCfg>,
    pub qos: QoSCfg,
    /// Number of power levels T.
    pub power_levels: usize,
    pub blockage_probability: f64,
    /// RF uplink fraction reserved for the grouping exchange (recorded,
    /// unused by the rate model).
    pub rf_exchange_fraction: f64,
    pub classify: ClassifyCfg,
    /// Weak-user share of the conventional-NOMA fixed split.
    pub conventional_beta_weak: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            room: RoomCfg {
                width_m: 8.0,
                depth_m: 8.0,
                height_m: 3.0,
            },
            ap_grid: ApGridCfg {
                rows: 4,
                cols: 4,
                array_side: 24,
            },
            num_users: 20,
            user_height_m: 0.0,
            placement: PlacementCfg::Uniform,
            detector: DetectorCfg {
                rings: vec![
                    DetectorRingCfg { elevation_deg: 25.0, count: 7 },
                    DetectorRingCfg { elevation_deg: 60.0, count: 9 },
                ],
                pd_area_mm2: 15.0,
                fov_deg: 30.0,
                filter_gain: 1.0,
            },
            beam: BeamCfg {
                waist_um: 8.0,
                wavelength_nm: 1550.0,
                refractive_index: 1.0,
                theta_fwhm_deg: 4.0,
            },
            front_end: FrontEndCfg {
                responsivity_a_per_w: 0.9,
                conversion_w_per_a: 1.0,
                bandwidth_ghz: 1.5,
            },
            noise: NoiseCfg::Composite {
                rin_db_per_hz: -155.0,
                thermal_psd_a2_per_hz: 4e-22,
            },
            beam_power_w: 0.06,
            eye_safety: None,
            qos: QoSCfg {
                r_min_bps_hz: 0.002,
                r_max_bps_hz: 0.8,
                p_s_threshold_w: 27.0,
                r_min_net_bps_hz: 0.0,
                r_max_net_bps_hz: None,
            },
            power_levels: 20,
            blockage_probability: 0.0,
            rf_exchange_fraction: 0.2,
            classify: ClassifyCfg::MedianSplit,
            conventional_beta_weak: 0.8,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.num_users == 0 {
            return Err(Error::Config("scenario needs at least one user".into()));
        }
        if self.beam_power_w <= 0.0 {
            return Err(Error::Config("beam power must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.blockage_probability) {
            return Err(Error::Config("blockage probability outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.rf_exchange_fraction) {
            return Err(Error::Config("rf_exchange_fraction outside [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.conventional_beta_weak) || self.conventional_beta_weak <= 0.5 {
            return Err(Error::Config(
                "conventional_beta_weak must lie in (0.5, 1) so the weak user gets more power".into(),
            ));
        }
        if let PlacementCfg::Fixed { positions } = &self.placement {
            if positions.len() != self.num_users {
                return Err(Error::Config(format!(
                    "fixed placement lists {} positions for {} users",
                    positions.len(),
                    self.num_users
                )));
            }
        }
        self.room()?;
        self.beam_params()?;
        self.noise_model()?;
        self.front_end_params().validate()?;
        if let Some(safety) = self.eye_safety_params() {
            safety.validate()?;
        }
        self.qos_bounds().validate(self.num_users)?;
        Ok(())
    }

    pub fn room(&self) -> Result<Room> {
        Room::new(self.room.width_m, self.room.depth_m, self.room.height_m)
    }

    pub fn beam_params(&self) -> Result<BeamParams> {
        BeamParams::new(
            self.beam.waist_um * 1e-6,
            self.beam.wavelength_nm * 1e-9,
            self.beam.refractive_index,
            self.beam.theta_fwhm_deg.to_radians(),
        )
    }

    pub fn front_end_params(&self) -> OpticalFrontEnd {
        OpticalFrontEnd {
            responsivity: self.front_end.responsivity_a_per_w,
            conversion_factor: self.front_end.conversion_w_per_a,
            bandwidth: self.front_end.bandwidth_ghz * 1e9,
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        Ok(match self.noise {
            NoiseCfg::Composite {
                rin_db_per_hz,
                thermal_psd_a2_per_hz,
            } => {
                if thermal_psd_a2_per_hz <= 0.0 {
                    return Err(Error::Config("thermal PSD must be positive".into()));
                }
                NoiseModel {
                    rin_db_per_hz,
                    thermal_psd: thermal_psd_a2_per_hz,
                    electron_charge: crate::channel::ELECTRON_CHARGE,
                    mode: NoiseMode::Composite,
                }
            }
            NoiseCfg::FixedSigma { sigma2 } => {
                if sigma2 <= 0.0 {
                    return Err(Error::Config("fixed noise variance must be positive".into()));
                }
                NoiseModel {
                    rin_db_per_hz: 0.0,
                    thermal_psd: 0.0,
                    electron_charge: crate::channel::ELECTRON_CHARGE,
                    mode: NoiseMode::FixedSigma { sigma2 },
                }
            }
        })
    }

    pub fn eye_safety_params(&self) -> Option<EyeSafetyParams> {
        self.eye_safety.as_ref().map(|e| EyeSafetyParams {
            cornea_diameter: e.cornea_diameter_mm * 1e-3,
            exposure_limit: e.exposure_limit_w_per_m2,
            hazard_distance: e.hazard_distance_m,
            drive_current_range: e.drive_current_range_a,
            dc_bias: e.dc_bias_a,
            power_range: e.power_range_w,
            modulation_amplitude: e.modulation_amplitude_a,
        })
    }

    pub fn qos_bounds(&self) -> QoSBounds {
        QoSBounds {
            r_min: self.qos.r_min_bps_hz,
            r_max: self.qos.r_max_bps_hz,
            p_s_threshold: self.qos.p_s_threshold_w,
            r_min_net: self.qos.r_min_net_bps_hz,
            r_max_net: self.qos.r_max_net_bps_hz,
        }
    }

    pub fn classify_rule(&self) -> ClassifyRule {
        match self.classify {
            ClassifyCfg::MedianSplit => ClassifyRule::MedianSplit,
            ClassifyCfg::DistanceThreshold { d_th_m } => ClassifyRule::DistanceThreshold { d_th: d_th_m },
        }
    }
}
