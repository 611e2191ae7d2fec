//! Behavior engine for a storytelling play robot.
//!
//! The pipeline: optical-sensor samples are cut into 3-second
//! [`trajectory`] windows, summarized by convex-hull [`geometry`] features and
//! recognized by a KNN [`classifier`]. The [`planner`] tracks the
//! storytelling arc, answers recognized shapes with mirror or contrast
//! movements, and schedules [`behavior`]s that drive the actuators behind the
//! [`hal`]. The [`sim`] module provides a deterministic virtual robot with
//! trace recording and replay.

pub mod behavior;
pub mod classifier;
pub mod geometry;
pub mod hal;
pub mod planner;
pub mod sim;
pub mod text;
pub mod trajectory;
