//! Network inputs built from the ball state at the return moment.
//!
//! Six scalars, all normalized to [0,1]: y relative to the top and bottom
//! edges (exact complements), the rectified positive and negative vertical
//! speeds, the horizontal speed, and the flight angle against the horizontal
//! mapped so that level flight sits at 0.5. The extended vector appends a
//! candidate paddle position and its complement for the reward/intuition
//! networks.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::physics::{BallState, PhysicsConfig};

pub const FEATURE_COUNT: usize = 6;
pub const EXTENDED_FEATURE_COUNT: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("features are sampled at the return moment; the ball must be moving toward the agent")]
    BallNotTowardAgent,
}

/// The six inputs, in network order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn y_rel_top(&self) -> f64 {
        self.values[0]
    }

    pub fn y_rel_bottom(&self) -> f64 {
        self.values[1]
    }

    pub fn vy_pos(&self) -> f64 {
        self.values[2]
    }

    pub fn vy_neg(&self) -> f64 {
        self.values[3]
    }

    pub fn vx_mag(&self) -> f64 {
        self.values[4]
    }

    pub fn phi(&self) -> f64 {
        self.values[5]
    }
}

/// The six inputs plus a candidate paddle position and its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedFeatureVector {
    values: [f64; EXTENDED_FEATURE_COUNT],
}

impl ExtendedFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn candidate(&self) -> f64 {
        self.values[6]
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Encode a ball heading toward the agent.
///
/// The velocity normalizers are the physics maxima (`vy_cap`, `vx_cap`), so
/// every reachable state lands inside the unit cube with the extremes mapped
/// to exactly 0 or 1. Errors if `vel_x >= 0`.
pub fn encode_features(
    ball: &BallState,
    cfg: &PhysicsConfig,
) -> Result<FeatureVector, EncodeError> {
    if ball.vel_x >= 0.0 {
        return Err(EncodeError::BallNotTowardAgent);
    }
    let y_rel_top = clamp01(ball.pos_y);
    let y_rel_bottom = 1.0 - y_rel_top;
    let vy_pos = clamp01(ball.vel_y.max(0.0) / cfg.vy_cap());
    let vy_neg = clamp01((-ball.vel_y).max(0.0) / cfg.vy_cap());
    let vx_mag = clamp01(ball.vel_x.abs() / cfg.vx_cap());
    let phi = clamp01((ball.vel_y.atan2(ball.vel_x.abs()) + FRAC_PI_2) / PI);
    Ok(FeatureVector {
        values: [y_rel_top, y_rel_bottom, vy_pos, vy_neg, vx_mag, phi],
    })
}

/// Append a candidate paddle position and its exact complement.
///
/// Out-of-range candidates are clamped into [0,1].
pub fn extend_features(f: &FeatureVector, candidate: f64) -> ExtendedFeatureVector {
    let c = clamp01(candidate);
    let mut values = [0.0; EXTENDED_FEATURE_COUNT];
    values[..FEATURE_COUNT].copy_from_slice(&f.values);
    values[6] = c;
    values[7] = 1.0 - c;
    ExtendedFeatureVector { values }
}
