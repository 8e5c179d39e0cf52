//! Certified globally optimal inverse kinematics for revolute serial chains.

pub mod error;
pub mod kinematics;
pub mod lifting;
pub mod local;
pub mod lp;
pub mod poly;
pub mod relaxation;
pub mod pop;
pub mod bench;
pub mod bnb;

pub use error::{IkError, Result};
