//! Anatomically constrained 3D human-pose toolkit.
//!
//! The crate bundles the illegal-angle, symmetry and bone-ratio losses with
//! exact gradients, a depth-lifting optimiser driven by those losses, a
//! sliding-window temporal refinement network, skeleton fitting, and the
//! usual pose-evaluation metrics. Synthetic motion makes everything
//! runnable without external datasets.
//!
//! ```
//! use anatomik::{losses, synth, Skeleton};
//!
//! let skeleton = Skeleton::standard();
//! let rest = synth::rest_pose(&skeleton).unwrap();
//! assert_eq!(losses::illegal_angle_loss(&rest, &skeleton).value, 0.0);
//! ```

pub mod analysis;
pub mod error;
pub mod fit;
pub mod io;
pub mod lifter;
pub mod losses;
pub mod metrics;
pub mod pose;
pub mod skeleton;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
pub use pose::{JointId, Pose2D, Pose3D, PoseSequence, Vec2, Vec3, NUM_JOINTS};
pub use skeleton::{bone_length, bone_vector, Bone, BoneId, Skeleton};

#[cfg(doctest)]
mod book;
