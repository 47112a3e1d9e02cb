//! Perception layer: phantoms, promptable segmentation, overlap metrics and
//! geometric serialization of lesion masks.

mod geometry;
mod metrics;
pub mod phantom;
mod prompt;
mod reference;

use thiserror::Error;

use crate::volume::VolumeError;

pub use geometry::{geometric_descriptors, min_distance_mm, LesionDescriptor, SegObservation};
pub use metrics::{composite_loss, dice, iou, LossWeights, LOSS_EPSILON};
pub use phantom::{make_phantom, Ellipsoid, Phantom, PhantomSpec};
pub use prompt::{ClickPoint, Prompt};
pub use reference::{
    autonomy_detect, default_detection_threshold, default_tolerance, robust_range, DetectedBox,
    ReferenceSegmenter, SegmentationBackend,
};

#[derive(Debug, Error)]
pub enum SegError {
    #[error("prompt point {at:?} outside volume dims {dims:?}")]
    PromptOutOfBounds { at: [usize; 3], dims: [usize; 3] },
    #[error("click prompt has no positive seed")]
    NoPositiveSeed,
    #[error("bad prompt: {0}")]
    BadPrompt(String),
    #[error("ellipsoid {0} extends outside the volume")]
    EllipsoidOutOfBounds(usize),
    #[error("bad phantom spec: {0}")]
    BadPhantom(String),
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch { left: [usize; 3], right: [usize; 3] },
    #[error("backend failure: {0}")]
    Backend(String),
    #[error(transparent)]
    Volume(VolumeError),
}

impl From<VolumeError> for SegError {
    fn from(e: VolumeError) -> Self {
        match e {
            VolumeError::DimMismatch { left, right } => SegError::DimMismatch { left, right },
            other => SegError::Volume(other),
        }
    }
}
