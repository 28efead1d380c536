//! Around-device interaction sensing from corneal reflections.
//!
//! The human cornea acts as the mirror of a catadioptric system: a camera
//! near a handheld device sees the device and the user's hand reflected in
//! the eye. This crate implements the full inverse pipeline from an eye
//! image to metric positions in the device plane, together with a forward
//! ray-tracing simulator that renders ground-truthed synthetic imagery for
//! closed-loop verification:
//!
//! 1. [`limbus`] — eye-region localization and RANSAC limbus detection;
//! 2. [`eye`] — weak-perspective eye pose recovery from the limbus ellipse;
//! 3. [`unwrap`] — equirectangular unwrapping of the corneal reflection
//!    with a per-pixel reflected-ray map;
//! 4. [`scene`] — device and pointer detection in the unwrapped texture;
//! 5. [`reconstruct`] — metric interaction-plane recovery and plane
//!    coordinates of the pointer;
//! 6. [`sim`] — forward catadioptric renderer and ground truth;
//! 7. [`harness`] — pipeline orchestration, the resolution-degradation
//!    study, metrics and CSV reporting.
//!
//! See the crate examples for one runnable program per stage, and the
//! `corneal-adi` binary for the `render` / `run` / `study` / `report`
//! subcommands.

pub mod error;
pub mod eye;
pub mod geometry;
pub mod harness;
pub mod limbus;
pub mod reconstruct;
pub mod scene;
pub mod sim;
pub mod unwrap;

pub use error::{Error, Result};
