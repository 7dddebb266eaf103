//! Gaussian-beam VCSEL propagation, received power, per-user channel
//! matrices, blockage, noise variance and eye-safety power limits.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{incidence_angle, irradiance_angle, AccessPoint, Room, UserTerminal, Vec3};

/// Elementary charge, coulombs.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// Gaussian beam parameters of a VCSEL transmitter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BeamParams {
    /// Beam waist, meters.
    pub w0: f64,
    /// Wavelength, meters.
    pub wavelength: f64,
    /// Refractive index of the medium (air: 1).
    pub refractive_index: f64,
    /// Full width at half maximum angle, radians.
    pub theta_fwhm: f64,
}

impl BeamParams {
    pub fn new(w0: f64, wavelength: f64, refractive_index: f64, theta_fwhm: f64) -> Result<Self> {
        if w0 <= 0.0 || wavelength <= 0.0 {
            return Err(Error::Config("beam waist and wavelength must be positive".into()));
        }
        if refractive_index < 1.0 {
            return Err(Error::Config("refractive index must be >= 1".into()));
        }
        if theta_fwhm <= 0.0 {
            return Err(Error::Config("theta_fwhm must be positive".into()));
        }
        Ok(Self {
            w0,
            wavelength,
            refractive_index,
            theta_fwhm,
        })
    }

    /// Divergence angle: theta_fwhm / sqrt(2 ln 2).
    pub fn divergence(&self) -> f64 {
        self.theta_fwhm / (2.0 * std::f64::consts::LN_2).sqrt()
    }

    /// Beam waist implied by a FWHM angle: W0 = lambda / (pi * theta_d).
    pub fn waist_from_fwhm(wavelength: f64, theta_fwhm: f64) -> f64 {
        let theta_d = theta_fwhm / (2.0 * std::f64::consts::LN_2).sqrt();
        wavelength / (std::f64::consts::PI * theta_d)
    }
}

/// Eye-safety operating constraints of a VCSEL.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EyeSafetyParams {
    /// Cornea aperture diameter, meters.
    pub cornea_diameter: f64,
    /// Maximum permissible exposure at the hazard distance, W/m^2.
    pub exposure_limit: f64,
    /// Hazard distance, meters.
    pub hazard_distance: f64,
    /// Drive current range [I_L, I_H], amperes.
    pub drive_current_range: [f64; 2],
    /// DC bias current, amperes.
    pub dc_bias: f64,
    /// Per-VCSEL drive power range [P_L, P_H], watts.
    pub power_range: [f64; 2],
    /// Peak modulation amplitude, amperes.
    pub modulation_amplitude: f64,
}

impl EyeSafetyParams {
    pub fn validate(&self) -> Result<()> {
        let [i_l, i_h] = self.drive_current_range;
        let [p_l, p_h] = self.power_range;
        if self.cornea_diameter <= 0.0
            || self.exposure_limit <= 0.0
            || self.hazard_distance <= 0.0
            || i_l <= 0.0
            || p_l <= 0.0
        {
            return Err(Error::Config("eye-safety parameters must be positive".into()));
        }
        if !(i_l < self.dc_bias && self.dc_bias < i_h) {
            return Err(Error::Config(format!(
                "DC bias {} must lie strictly inside the drive current range [{i_l}, {i_h}]",
                self.dc_bias
            )));
        }
        if p_l >= p_h {
            return Err(Error::Config("power range must satisfy P_L < P_H".into()));
        }
        let headroom = (self.dc_bias - i_l).min(i_h - self.dc_bias);
        if self.modulation_amplitude > headroom {
            return Err(Error::Config(format!(
                "modulation amplitude {} exceeds linear-region headroom {headroom}",
                self.modulation_amplitude
            )));
        }
        Ok(())
    }
}

/// Detector responsivity, conversion factor and bandwidth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OpticalFrontEnd {
    /// Detector responsivity, A/W.
    pub responsivity: f64,
    /// Electric-to-optical conversion factor, W/A.
    pub conversion_factor: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
}

impl OpticalFrontEnd {
    pub fn validate(&self) -> Result<()> {
        if self.responsivity <= 0.0 || self.conversion_factor <= 0.0 || self.bandwidth <= 0.0 {
            return Err(Error::Config("front-end parameters must be positive".into()));
        }
        Ok(())
    }
}

/// How the receiver noise variance is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Shot + thermal + laser intensity noise, scaled by bandwidth.
    Composite,
    /// A fixed, externally supplied variance in A^2.
    FixedSigma { sigma2: f64 },
}

/// Receiver noise model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Relative intensity noise of the laser, dB/Hz.
    pub rin_db_per_hz: f64,
    /// Thermal noise power spectral density, A^2/Hz.
    pub thermal_psd: f64,
    /// Elementary charge, coulombs.
    pub electron_charge: f64,
    pub mode: NoiseMode,
}

/// Per-user stacked channel over L reception modes: row m holds the optical
/// gains from the L APs seen by mode m. Blocked links are zeroed.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub user: usize,
    pub gains: DMatrix<f64>,
    pub blocked: Vec<bool>,
    /// Set when the blocked matrix has rank < L, so the rate module can
    /// degrade gracefully.
    pub rank_deficient: bool,
}

/// Rayleigh range: pi * W0^2 * n / lambda.
pub fn rayleigh_range(beam: &BeamParams) -> f64 {
    std::f64::consts::PI * beam.w0 * beam.w0 * beam.refractive_index / beam.wavelength
}

/// Beam radius at distance `d0` along the propagation axis.
pub fn beam_radius(beam: &BeamParams, d0: f64) -> Result<f64> {
    if d0 < 0.0 {
        return Err(Error::Config(format!("beam distance must be nonnegative (got {d0})")));
    }
    let ratio = d0 / rayleigh_range(beam);
    Ok(beam.w0 * (1.0 + ratio * ratio).sqrt())
}

/// Intensity of the beam at radial offset `r` on the plane at distance `d0`.
pub fn intensity(beam: &BeamParams, p_tr: f64, r: f64, d0: f64) -> Result<f64> {
    let w = beam_radius(beam, d0)?;
    let w2 = w * w;
    Ok(2.0 * p_tr / (std::f64::consts::PI * w2) * (-2.0 * r * r / w2).exp())
}

/// Optical power collected by a photodiode of radius `r_m` centered on the
/// beam axis at distance `d0`.
pub fn received_power_aligned(beam: &BeamParams, p_tr: f64, r_m: f64, d0: f64) -> Result<f64> {
    let w = beam_radius(beam, d0)?;
    Ok(p_tr * (1.0 - (-2.0 * r_m * r_m / (w * w)).exp()))
}

/// Optical gain (received power per transmitted watt) from `ap` to photodiode
/// `m` of `user` under the generalized off-axis geometry, with the FoV cut.
///
/// Returns 0 when the incidence angle exceeds the FoV or the user sits behind
/// the beam plane (phi >= pi/2).
pub fn channel_gain(
    ap: &AccessPoint,
    user: &UserTerminal,
    m: usize,
    beam: &BeamParams,
) -> Result<f64> {
    let phi = irradiance_angle(ap, user)?;
    if phi >= std::f64::consts::FRAC_PI_2 {
        return Ok(0.0);
    }
    let psi = incidence_angle(ap, user, m)?;
    if psi > user.detector.fov {
        return Ok(0.0);
    }
    let d = ap.position.sub(&user.position).norm();
    let w = beam_radius(beam, d * phi.cos())?;
    let w2 = w * w;
    let det = &user.detector;
    let radial = d * phi.sin();
    let gain = 2.0 * psi.cos() * det.pd_area_physical * det.pd_gain / (std::f64::consts::PI * w2)
        * (-2.0 * radial * radial / w2).exp();
    Ok(gain)
}

/// Relative singular-value cut for the rank flag; catches structural
/// deficiencies (blocked columns, photodiodes with no AP in view) without
/// tripping on smooth, well-posed geometry.
const RANK_EPS: f64 = 1e-12;

/// Beam aim points tiling the receiving plane: `side x side` cell centers at
/// z = 0. Every AP array points its beams at the same tiling, which is what
/// gives each user a line to every AP.
pub fn room_aim_grid(room: &Room, side: usize) -> Vec<Vec3> {
    let dx = room.width / side as f64;
    let dy = room.depth / side as f64;
    let mut aims = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            aims.push(Vec3::new(
                (c as f64 + 0.5) * dx,
                (r as f64 + 0.5) * dy,
                0.0,
            ));
        }
    }
    aims
}

/// Unit boresight directions of one AP's array elements toward the aim grid.
pub fn array_directions(ap: &AccessPoint, aims: &[Vec3]) -> Vec<Vec3> {
    aims.iter()
        .map(|aim| {
            let d = aim.sub(&ap.position);
            let n = d.norm();
            Vec3::new(d.x / n, d.y / n, d.z / n)
        })
        .collect()
}

/// Optical gain from an AP whose array elements point along `directions`,
/// averaged over the elements (received power per watt of total AP power,
/// with every element emitting the same share).
pub fn array_channel_gain(
    ap: &AccessPoint,
    user: &UserTerminal,
    m: usize,
    beam: &BeamParams,
    directions: &[Vec3],
) -> Result<f64> {
    let psi = incidence_angle(ap, user, m)?;
    if psi > user.detector.fov {
        return Ok(0.0);
    }
    let to_user = user.position.sub(&ap.position);
    let d = to_user.norm();
    let d2 = d * d;
    let mut acc = 0.0;
    for dir in directions {
        let cos_phi = dir.dot(&to_user) / d;
        if cos_phi <= 0.0 {
            continue;
        }
        let w = beam_radius(beam, d * cos_phi)?;
        let w2 = w * w;
        let r2 = d2 * (1.0 - cos_phi * cos_phi);
        let arg = 2.0 * r2 / w2;
        if arg < 45.0 {
            acc += (-arg).exp() / w2;
        }
    }
    let det = &user.detector;
    Ok(2.0 * psi.cos() * det.pd_area_physical * det.pd_gain * acc
        / (std::f64::consts::PI * directions.len() as f64))
}

fn assemble_matrix(
    user: &UserTerminal,
    l: usize,
    blocked_row: &[bool],
    mut gain_at: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<ChannelMatrix> {
    let m_total = user.detector.num_photodiodes;
    if m_total < l {
        return Err(Error::Config(format!(
            "detector has {m_total} photodiodes but the rank requirement needs at least {l}"
        )));
    }
    if blocked_row.len() != l {
        return Err(Error::Config("blockage row must have one entry per AP".into()));
    }

    let mut full = DMatrix::zeros(m_total, l);
    for m in 0..m_total {
        for col in 0..l {
            if blocked_row[col] {
                continue;
            }
            full[(m, col)] = gain_at(m, col)?;
        }
    }

    let gains = if m_total == l {
        full
    } else {
        // Reception-mode selection: greedily keep the L photodiodes whose
        // responses stay linearly independent (pivoted Gram-Schmidt on the
        // rows, largest residual first, ties by photodiode index).
        let mut residual = full.clone();
        let mut remaining: Vec<usize> = (0..m_total).collect();
        let mut keep = Vec::with_capacity(l);
        for _ in 0..l {
            let &pick = remaining
                .iter()
                .max_by(|&&a, &&b| {
                    residual
                        .row(a)
                        .norm()
                        .total_cmp(&residual.row(b).norm())
                        .then(b.cmp(&a))
                })
                .expect("rows remain");
            keep.push(pick);
            remaining.retain(|&r| r != pick);
            let pivot = residual.row(pick).clone_owned();
            let norm_sq = pivot.norm_squared();
            if norm_sq > 0.0 {
                for &r in &remaining {
                    let proj = residual.row(r).dot(&pivot) / norm_sq;
                    let update = residual.row(r) - pivot.scale(proj);
                    residual.row_mut(r).copy_from(&update);
                }
            }
        }
        keep.sort_unstable();
        DMatrix::from_fn(l, l, |r, c| full[(keep[r], c)])
    };

    let scale = gains.amax();
    let zero_line = (0..l).any(|r| gains.row(r).iter().all(|&g| g == 0.0))
        || (0..l).any(|c| gains.column(c).iter().all(|&g| g == 0.0));
    let rank_deficient = if scale == 0.0 {
        true
    } else {
        zero_line || gains.rank(RANK_EPS * scale * l as f64) < l
    };

    Ok(ChannelMatrix {
        user: user.id,
        gains,
        blocked: blocked_row.to_vec(),
        rank_deficient,
    })
}

/// Assemble the L x L channel matrix of `user` over the L APs, each treated
/// as a single beam along its boresight.
///
/// When the detector has more photodiodes than APs, the L modes with the
/// largest aggregate gain are kept (ties by photodiode index). `blocked_row`
/// gives the per-AP blockage of this user.
pub fn build_channel_matrix(
    user: &UserTerminal,
    aps: &[AccessPoint],
    beam: &BeamParams,
    blocked_row: &[bool],
) -> Result<ChannelMatrix> {
    assemble_matrix(user, aps.len(), blocked_row, |m, col| {
        channel_gain(&aps[col], user, m, beam)
    })
}

/// Assemble the channel matrix with each AP as a VCSEL array whose elements
/// point along `per_ap_directions[l]`.
pub fn build_channel_matrix_array(
    user: &UserTerminal,
    aps: &[AccessPoint],
    beam: &BeamParams,
    blocked_row: &[bool],
    per_ap_directions: &[Vec<Vec3>],
) -> Result<ChannelMatrix> {
    if per_ap_directions.len() != aps.len() {
        return Err(Error::Config("one direction set per AP required".into()));
    }
    assemble_matrix(user, aps.len(), blocked_row, |m, col| {
        array_channel_gain(&aps[col], user, m, beam, &per_ap_directions[col])
    })
}

/// Independent Bernoulli(p_block) blockage per (user, AP) link.
pub fn apply_blockage<R: Rng>(rng: &mut R, p_block: f64, k: usize, l: usize) -> Result<Vec<Vec<bool>>> {
    if !(0.0..=1.0).contains(&p_block) {
        return Err(Error::Config(format!("blockage probability {p_block} outside [0, 1]")));
    }
    Ok((0..k)
        .map(|_| (0..l).map(|_| rng.random::<f64>() < p_block).collect())
        .collect())
}

/// Receiver noise variance in A^2.
///
/// Composite mode: (2 q f P_rx + thermal_psd + 10^(rin/10) (f P_rx)^2) * B.
pub fn noise_variance(front_end: &OpticalFrontEnd, noise: &NoiseModel, p_rx: f64) -> Result<f64> {
    if p_rx < 0.0 {
        return Err(Error::Config("received power must be nonnegative".into()));
    }
    let sigma2 = match noise.mode {
        NoiseMode::FixedSigma { sigma2 } => sigma2,
        NoiseMode::Composite => {
            let photo_current = front_end.responsivity * p_rx;
            let shot = 2.0 * noise.electron_charge * photo_current;
            let rin = 10f64.powf(noise.rin_db_per_hz / 10.0) * photo_current * photo_current;
            (shot + noise.thermal_psd + rin) * front_end.bandwidth
        }
    };
    if sigma2 <= 0.0 {
        return Err(Error::Config(format!("noise variance must be positive (got {sigma2})")));
    }
    Ok(sigma2)
}

/// Corneal exposure level at the hazard distance for transmit power `p_tr`.
pub fn exposure_level(beam: &BeamParams, p_tr: f64, safety: &EyeSafetyParams) -> Result<f64> {
    let w = beam_radius(beam, safety.hazard_distance)?;
    let dc = safety.cornea_diameter;
    let aperture = std::f64::consts::PI * (dc / 2.0) * (dc / 2.0);
    Ok(p_tr / aperture * (1.0 - (-dc * dc / (2.0 * w * w)).exp()))
}

/// Maximum permissible transmit power per beam: the inverse of
/// `exposure_level` at the configured exposure limit, capped to the
/// linear-region drive range [P_L, P_H].
pub fn max_safe_power(beam: &BeamParams, safety: &EyeSafetyParams) -> Result<f64> {
    let w = beam_radius(beam, safety.hazard_distance)?;
    if w <= 0.0 || !w.is_finite() {
        return Err(Error::DegenerateGeometry(format!("beam radius {w} at hazard distance")));
    }
    let dc = safety.cornea_diameter;
    let denom = 1.0 - (-dc * dc / (2.0 * w * w)).exp();
    if denom <= 0.0 {
        return Err(Error::DegenerateGeometry("zero capture fraction at the cornea".into()));
    }
    let aperture = std::f64::consts::PI * (dc / 2.0) * (dc / 2.0);
    let p = safety.exposure_limit * aperture / denom;
    let [p_l, p_h] = safety.power_range;
    let capped = p.min(p_h);
    if capped < p_l {
        return Err(Error::Config(format!(
            "eye-safe beam power {capped} W falls below the linear-region minimum {p_l} W"
        )));
    }
    Ok(capped)
}
