//! JSON messages exchanged with teleoperation clients.

use serde::{Deserialize, Serialize};

use crate::geometry::Pose;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseMsg {
    /// Meters.
    pub position: [f64; 3],
    /// Unit quaternion `[x, y, z, w]`.
    pub quaternion: [f64; 4],
}

impl PoseMsg {
    pub fn from_pose(p: &Pose) -> Self {
        Self {
            position: p.translation.into(),
            quaternion: p.quaternion_xyzw(),
        }
    }

    /// Normalizes the quaternion; rejects non-finite values and a
    /// quaternion too far from unit length to be a rounding artifact.
    pub fn to_pose(&self) -> Result<Pose> {
        let n = self.quaternion.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n.is_finite() && (n - 1.0).abs() < 1e-3) || !self.position.iter().all(|x| x.is_finite()) {
            return Err(Error::Protocol(
                "stylus pose must be finite with a unit quaternion".into(),
            ));
        }
        Pose::from_position_quaternion(self.position, self.quaternion)
            .ok_or_else(|| Error::Protocol("invalid stylus pose".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Clutch(bool),
    StylusPose(PoseMsg),
    SetCase(u8),
    SetScale(f64),
    Reset {},
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Protocol(format!("malformed message: {e}")))
    }
}

/// State broadcast to every client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFrame {
    pub time: f64,
    pub q_aug: [f64; 10],
    pub tip_pose: PoseMsg,
    pub desired_pose: PoseMsg,
    pub e_p: [f64; 3],
    pub e_o: [f64; 3],
    pub rcm_error: f64,
    pub case: u8,
    pub lambda: f64,
    pub motor_positions: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReply {
    pub error: String,
}
