use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown style {0:?}")]
    UnknownStyle(String),

    /// The gallery cannot define a direction: zero embeddings or a centroid
    /// that cancels out.
    #[error("degenerate style gallery: {0}")]
    DegenerateGallery(String),

    #[error(transparent)]
    Core(#[from] stylecurve_core::Error),

    #[error(transparent)]
    Nn(#[from] stylecurve_nn::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

impl Error {
    /// True when the root cause is a centroid too short to normalize.
    pub fn is_degenerate_centroid(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGallery(_)
                | Error::Core(stylecurve_core::Error::DegenerateCentroid { .. })
                | Error::Nn(stylecurve_nn::Error::Core(
                    stylecurve_core::Error::DegenerateCentroid { .. }
                ))
        )
    }
}
