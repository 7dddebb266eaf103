//! Per-user and per-group achievable rates under BIA + NOMA: SINR
//! expressions, the post-subtraction noise covariance, and the log-det rate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bia::alignment_ratio;
use crate::channel::OpticalFrontEnd;
use crate::error::{Error, Result};

/// Optical SINR scaling constant c = 1 / (2 pi e).
pub const OPTICAL_SINR_C: f64 = 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E);

/// Powers allocated to the weak and strong user of one group, watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPair {
    pub p_w: f64,
    pub p_s: f64,
}

/// Rates and SINRs of one weak/strong pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateResult {
    /// Weak-user rate, bits/s/Hz.
    pub rate_weak: f64,
    /// Strong-user rate, bits/s/Hz.
    pub rate_strong: f64,
    /// Prelog ratio applied to both users.
    pub b_ratio: f64,
    pub sinr_weak: f64,
    pub sinr_strong: f64,
}

impl RateResult {
    pub fn sum(&self) -> f64 {
        self.rate_weak + self.rate_strong
    }
}

/// Effective noise covariance after subtracting the interference sent to the
/// other G - 1 groups. Diagonal, positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    pub matrix: DMatrix<f64>,
}

impl NoiseCovariance {
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }
}

/// c rho^2 f^2, the electrical scaling in front of every power term.
pub fn electrical_gain(front_end: &OpticalFrontEnd) -> f64 {
    let rf = front_end.conversion_factor * front_end.responsivity;
    OPTICAL_SINR_C * rf * rf
}

/// NOMA SINRs of the weak and strong user.
///
/// The weak user decodes under the strong user's interference; the strong
/// user cancels the weak user's signal first.
pub fn sinr(pair: &PowerPair, front_end: &OpticalFrontEnd, sigma2: f64) -> Result<(f64, f64)> {
    if sigma2 <= 0.0 {
        return Err(Error::Config(format!("noise variance must be positive (got {sigma2})")));
    }
    let a = electrical_gain(front_end);
    let gamma_weak = a * pair.p_w / (a * pair.p_s + sigma2);
    let gamma_strong = a * pair.p_s / sigma2;
    Ok((gamma_weak, gamma_strong))
}

/// diag(G, 1, ..., 1) * sigma2 of size L: the first slot of each alignment
/// block accumulates the G - 1 subtracted interference measurements on top
/// of its own noise.
pub fn noise_covariance(g: usize, l: usize, sigma2: f64) -> NoiseCovariance {
    let mut m = DMatrix::from_diagonal_element(l, l, sigma2);
    m[(0, 0)] = g as f64 * sigma2;
    NoiseCovariance { matrix: m }
}

fn whitened(h: &DMatrix<f64>, rz: &NoiseCovariance) -> Result<DMatrix<f64>> {
    let l = h.nrows();
    if h.ncols() != l {
        return Err(Error::Config(format!(
            "channel matrix must be square (got {} x {})",
            h.nrows(),
            h.ncols()
        )));
    }
    if rz.matrix.nrows() != l {
        return Err(Error::Config("noise covariance dimension mismatch".into()));
    }
    let diag = rz.matrix.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::NotPositiveDefinite("noise covariance has a nonpositive diagonal".into()));
    }
    let mut s = h * h.transpose();
    for r in 0..l {
        for c in 0..l {
            s[(r, c)] /= (diag[r] * diag[c]).sqrt();
        }
    }
    Ok(s)
}

/// Achievable rate b * log2 det(I + gamma * H H^T R_z^{-1}), bits/s/Hz.
///
/// Evaluated through the whitened symmetric form and a Cholesky
/// factorization; rank-deficient H is allowed and simply lowers the rate.
pub fn user_rate(h: &DMatrix<f64>, gamma: f64, rz: &NoiseCovariance, b: f64) -> Result<f64> {
    if gamma < 0.0 {
        return Err(Error::Config(format!("SINR must be nonnegative (got {gamma})")));
    }
    let s = whitened(h, rz)?;
    let l = s.nrows();
    let mut a = s * gamma;
    for i in 0..l {
        a[(i, i)] += 1.0;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("I + gamma * whitened(H H^T)".into()))?;
    let log_det: f64 = (0..l).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
    Ok(b * log_det / std::f64::consts::LN_2)
}

/// Sum rate of one weak/strong pair under the BIA prelog.
///
/// `sigma2_w` and `sigma2_s` are the per-user composite noise variances; the
/// covariance shape enters in relative units since the SINRs already carry
/// the absolute noise scale.
pub fn group_sum_rate(
    pair: &PowerPair,
    h_weak: &DMatrix<f64>,
    h_strong: &DMatrix<f64>,
    front_end: &OpticalFrontEnd,
    g: usize,
    sigma2_w: f64,
    sigma2_s: f64,
) -> Result<RateResult> {
    let l = h_weak.nrows();
    let b = alignment_ratio(l, g).as_f64();
    let rz = noise_covariance(g, l, 1.0);
    let (gamma_weak, _) = sinr(pair, front_end, sigma2_w)?;
    let (_, gamma_strong) = sinr(pair, front_end, sigma2_s)?;
    let rate_weak = user_rate(h_weak, gamma_weak, &rz, b)?;
    let rate_strong = user_rate(h_strong, gamma_strong, &rz, b)?;
    Ok(RateResult {
        rate_weak,
        rate_strong,
        b_ratio: b,
        sinr_weak: gamma_weak,
        sinr_strong: gamma_strong,
    })
}

/// Precomputed spectral form of one user's rate curve: with the whitened
/// channel eigenvalues fixed, the rate is prelog * sum log2(1 + gamma * e_i).
/// This is what the per-group solver iterates on.
#[derive(Debug, Clone)]
pub struct RatePath {
    pub prelog: f64,
    pub eigs: Vec<f64>,
}

impl RatePath {
    pub fn from_channel(h: &DMatrix<f64>, rz: &NoiseCovariance, prelog: f64) -> Result<Self> {
        let s = whitened(h, rz)?;
        let eigs = s
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|&e| e.max(0.0))
            .collect();
        Ok(Self { prelog, eigs })
    }

    /// Single-mode path (orthogonal baselines): one squared channel gain.
    pub fn scalar(gain_sq: f64, prelog: f64) -> Self {
        Self {
            prelog,
            eigs: vec![gain_sq],
        }
    }

    /// Rate at SINR `gamma`, bits/s/Hz.
    pub fn rate(&self, gamma: f64) -> f64 {
        self.prelog
            * self
                .eigs
                .iter()
                .map(|&e| (1.0 + gamma * e).ln())
                .sum::<f64>()
            / std::f64::consts::LN_2
    }

    /// d rate / d gamma.
    pub fn rate_derivative(&self, gamma: f64) -> f64 {
        self.prelog
            * self
                .eigs
                .iter()
                .map(|&e| e / (1.0 + gamma * e))
                .sum::<f64>()
            / std::f64::consts::LN_2
    }
}
