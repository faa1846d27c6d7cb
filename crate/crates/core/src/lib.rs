//! Environment reconstruction from bistatic multipath measurements.
//!
//! Each UE reports the power, delay and azimuth angle of arrival of its
//! multipath components. For every single-bounce component the reflection
//! point and the inclination of the reflecting face are solved from geometry
//! alone; the points of all UEs are then merged into one environment point
//! cloud. An image-source simulator and deviation metrics close the loop.

pub mod cli;
pub mod daps;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Environment, LinkCondition, MpcRecord, Point2, RpEstimate, UeObservation, Wall};
