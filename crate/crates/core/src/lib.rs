//! Attention-map distillation and attention-costmap planning for socially
//! compliant navigation, with a deterministic 2D simulator to exercise them.

pub mod annotate;
pub mod costmap;
pub mod distill;
pub mod frame;
pub mod kinematics;
pub mod metrics;
pub mod occupancy;
pub mod pipeline;
pub mod planner;
pub mod sim;
