//! Error type shared by all core modules.

use thiserror::Error;

use alloc::string::String;

/// Errors produced by the algorithmic core.
///
/// Degenerate geometry (zero-area boxes) is deliberately *not* an error in
/// overlap computations; those fall back to an IoU of 0 so that noisy
/// annotations never abort a batch run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An operation that requires at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A parameter lies outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam {
        name: &'static str,
        reason: &'static str,
    },

    /// A box with zero width or height where a shape ratio is required.
    #[error("degenerate box: width and height must be positive")]
    DegenerateBox,

    /// Correlation is undefined when a series has no variance.
    #[error("constant series: correlation is undefined")]
    ConstantSeries,

    /// Clustering asked for more clusters than there are distinct points.
    #[error("cannot form {requested} clusters from {distinct} distinct points")]
    TooFewPoints { requested: usize, distinct: usize },

    /// A normalized coordinate fell outside [0, 1].
    #[error("`{name}` = {value} is outside [0, 1]")]
    OutOfUnitRange { name: &'static str, value: f64 },

    /// Coverage evaluation needs an anchor configuration for every region.
    #[error("no anchor configuration for region {region}")]
    MissingRegionConfig { region: usize },

    /// A gene value fell outside the chromosome boundaries.
    #[error("gene value {value} is outside [{min}, {max}]")]
    GeneOutOfBounds { value: f64, min: f64, max: f64 },

    /// Detections must be mapped back to the original image frame before
    /// they can be fused across models.
    #[error(
        "detections from model `{model_tag}` still carry a scale factor; de-augment them first"
    )]
    ScaledDetections { model_tag: String },
}
