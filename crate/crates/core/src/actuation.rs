//! Motor pulley positions and rates for the four tendons.

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::continuum::{actuation_jacobian, tendon_lengths, ContinuumConfig, ContinuumParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuationParams {
    /// Motor pulley radius (m).
    pub pulley_radius: f64,
}

impl Default for ActuationParams {
    fn default() -> Self {
        Self { pulley_radius: 0.0054 }
    }
}

impl ActuationParams {
    pub fn validate(&self) -> Result<()> {
        if self.pulley_radius > 0.0 && self.pulley_radius.is_finite() {
            Ok(())
        } else {
            Err(Error::Config("pulley radius must be positive".into()))
        }
    }
}

/// `θ̇_m = J_ℓψ(ψ) ψ̇ / R`.
pub fn motor_velocities(
    psi: &ContinuumConfig,
    psi_dot: &Vector2<f64>,
    continuum: &ContinuumParams,
    params: &ActuationParams,
) -> Vector4<f64> {
    actuation_jacobian(psi, continuum) * psi_dot / params.pulley_radius
}

/// `θ_m = ℓ / R`.
pub fn motor_positions(psi: &ContinuumConfig, continuum: &ContinuumParams, params: &ActuationParams) -> Vector4<f64> {
    tendon_lengths(psi, continuum).0 / params.pulley_radius
}
