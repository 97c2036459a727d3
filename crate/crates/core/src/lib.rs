//! Hallway localization from a single camera frame and a WLAN scan.
//!
//! Corners where doorways and walls meet the floor are found in an
//! illumination-normalised chromaticity image, projected to the ground
//! plane, and matched against a floor plan inside the region a WLAN
//! fingerprint lookup allows.

pub mod corners;
pub mod fuse;
pub mod geometry;
pub mod illum;
pub mod imgcore;
pub mod segment;
pub mod synth;
pub mod wlan;
