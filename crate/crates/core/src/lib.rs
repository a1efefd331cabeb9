//! Non-reversible random walks on a cycle perturbed by a few random chords.
//!
//! The crate builds the perturbed cycles ([`graph`]), the transition operator
//! ([`kernel`]), exact total-variation mixing times ([`mixing`]), trajectory
//! statistics of the loop-erased track ([`walker`]), the modular spread of the
//! reachable endpoints ([`spread`]), and reproducible experiment campaigns
//! ([`harness`]).

pub mod error;
pub mod exact;
pub mod graph;
pub mod harness;
pub mod kernel;
pub mod mixing;
pub mod rng;
pub mod spread;
pub mod walker;

pub use error::{Error, Result};
pub use graph::{from_spec, sample_instance, InstanceSpec, PerturbedCycle};
pub use kernel::{step_distribution, transition_row, DistVector, WalkParams};
pub use mixing::{distance_profile, exponent_fit, mixing_time, tv_distance, MixingProfile, StartSet};
pub use walker::{run_track, DecisionEstimate, TrackStats};
