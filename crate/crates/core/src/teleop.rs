//! Clutched mapping from stylus motion to a desired tip pose.
//!
//! When the clutch engages, the stylus and tip poses become anchors. Stylus
//! motion relative to its anchor is carried into the tip anchor frame by a
//! similarity transform, so a rotation of the stylus produces a rotation of
//! the tip by the same angle about the correspondingly mapped axis.

use serde::{Deserialize, Serialize};

use crate::geometry::Pose;
use crate::{Error, Result};

pub const MAX_SCALE: f64 = 10.0;

pub fn validate_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale <= MAX_SCALE {
        Ok(())
    } else {
        Err(Error::Config(format!("motion scale must lie in (0, {MAX_SCALE}]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutchSession {
    stylus_anchor: Pose,
    tip_anchor: Pose,
    registration: Pose,
    scale: f64,
    /// Stylus anchor expressed in the tip anchor frame.
    anchor_map: Pose,
}

impl ClutchSession {
    /// Engages the clutch at the given stylus and tip poses.
    pub fn start(stylus: &Pose, tip: &Pose, registration: &Pose, scale: f64) -> Result<Self> {
        validate_scale(scale)?;
        for p in [stylus, tip, registration] {
            if !p.is_finite() || p.orthonormality_error() > 1e-6 {
                return Err(Error::Config("clutch anchors must be valid poses".into()));
            }
        }
        let anchor_map = tip.inverse().compose(registration).compose(stylus);
        Ok(Self {
            stylus_anchor: *stylus,
            tip_anchor: *tip,
            registration: *registration,
            scale,
            anchor_map,
        })
    }

    pub fn anchor_map(&self) -> &Pose {
        &self.anchor_map
    }

    pub fn tip_anchor(&self) -> &Pose {
        &self.tip_anchor
    }

    pub fn stylus_anchor(&self) -> &Pose {
        &self.stylus_anchor
    }

    pub fn registration(&self) -> &Pose {
        &self.registration
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Stylus motion since engagement, in the stylus anchor frame, with its
    /// translation scaled.
    pub fn relative_motion(&self, stylus: &Pose) -> Pose {
        let mut rel = self.stylus_anchor.inverse().compose(stylus);
        rel.translation *= self.scale;
        rel
    }

    pub fn desired_tip_pose(&self, stylus: &Pose) -> Pose {
        let rel = self.relative_motion(stylus);
        let in_tip = self.anchor_map.compose(&rel).compose(&self.anchor_map.inverse());
        self.tip_anchor.compose(&in_tip)
    }
}

/// Clutch state machine: holds the last desired pose while disengaged.
#[derive(Debug, Clone, PartialEq)]
pub struct Teleoperator {
    pub registration: Pose,
    pub scale: f64,
    session: Option<ClutchSession>,
    desired: Pose,
}

impl Teleoperator {
    pub fn new(registration: Pose, scale: f64, initial_tip: Pose) -> Result<Self> {
        validate_scale(scale)?;
        Ok(Self {
            registration,
            scale,
            session: None,
            desired: initial_tip,
        })
    }

    pub fn engaged(&self) -> bool {
        self.session.is_some()
    }

    pub fn desired(&self) -> &Pose {
        &self.desired
    }

    /// Engages at the current stylus pose, anchoring on `tip`. The desired
    /// pose jumps to nothing: it equals `tip` at this instant.
    pub fn engage(&mut self, stylus: &Pose, tip: &Pose) -> Result<()> {
        let s = ClutchSession::start(stylus, tip, &self.registration, self.scale)?;
        self.desired = *tip;
        self.session = Some(s);
        Ok(())
    }

    /// Disengages; the desired pose is frozen at its last value.
    pub fn release(&mut self) {
        self.session = None;
    }

    /// Feeds a stylus sample; ignored while disengaged.
    pub fn update(&mut self, stylus: &Pose) -> &Pose {
        if let Some(s) = &self.session {
            self.desired = s.desired_tip_pose(stylus);
        }
        &self.desired
    }

    /// Replaces the desired pose (used on reset).
    pub fn hold(&mut self, pose: Pose) {
        self.session = None;
        self.desired = pose;
    }

    pub fn set_scale(&mut self, scale: f64) -> Result<()> {
        validate_scale(scale)?;
        self.scale = scale;
        Ok(())
    }
}
