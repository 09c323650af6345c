//! Everything around the control core, from configuration and reference
//! paths to offline runs and the live service.

pub mod check;
pub mod config;
pub mod protocol;
pub mod service;
pub mod sim;
pub mod trajectory;

pub use check::{check_jacobians, check_jacobians_against, JacobianCheck, JacobianReport};
pub use config::{InitialState, RunConfig, ServiceConfig, HOME_ARM};
pub use protocol::{ClientMessage, ErrorReply, PoseMsg, StateFrame};
pub use service::{serve, ServerHandle, TeleopService};
pub use sim::{run_simulation, write_outputs, LogRow, RunLog, RunOutcome, RunSummary};
pub use trajectory::{gen_trajectory, OrientationPolicy, PathPlane, Trajectory, TrajectoryKind, TrajectorySpec};
