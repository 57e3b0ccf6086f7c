//! Adaptive Kalman tracking of a mobile visible-light-positioning receiver
//! whose access points are intermittently blocked.

pub mod availability;
pub mod calibration;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod localization;
pub mod mobility;
pub mod report;
pub mod scene;
pub mod seed;
pub mod tracking;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/availability.md")]
    mod availability {}
    #[doc = include_str!("../../../book/src/localization.md")]
    mod localization {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod tracking {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
