use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mesh is not closed: {0} boundary edge(s)")]
    OpenMesh(usize),
    #[error("geometry exceeds the grid extent: {0}")]
    OutOfExtent(String),
    #[error("degenerate volume: {0}")]
    DegenerateVolume(String),
    #[error("iso-surface never crossed at iso {0}")]
    NoSurface(f64),
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("vertex {0} has no incident face")]
    IsolatedVertex(usize),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("rejection sampling exhausted after {0} draws")]
    RejectionExhausted(usize),
    #[error("interior is not a single 6-connected component ({0} components)")]
    DisconnectedInterior(usize),
    #[error("target voxel {0:?} is unreachable")]
    Unreachable([usize; 3]),
    #[error("landmark `{0}` is not within snapping distance of the interior")]
    LandmarkOutside(String),
    #[error("value out of domain: {0}")]
    DomainError(String),
    #[error("cache does not match the current model parameters")]
    StaleCache,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("boundary is empty")]
    EmptyBoundary,
    #[error("no vertices within radius {0} mm")]
    NoVerticesInRadius(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable variant name for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::GridMismatch(_) => "GridMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::OpenMesh(_) => "OpenMesh",
            Error::OutOfExtent(_) => "OutOfExtent",
            Error::DegenerateVolume(_) => "DegenerateVolume",
            Error::NoSurface(_) => "NoSurface",
            Error::EmptyMesh => "EmptyMesh",
            Error::IsolatedVertex(_) => "IsolatedVertex",
            Error::InvalidMesh(_) => "InvalidMesh",
            Error::DegenerateConfiguration(_) => "DegenerateConfiguration",
            Error::RejectionExhausted(_) => "RejectionExhausted",
            Error::DisconnectedInterior(_) => "DisconnectedInterior",
            Error::Unreachable(_) => "Unreachable",
            Error::LandmarkOutside(_) => "LandmarkOutside",
            Error::DomainError(_) => "DomainError",
            Error::StaleCache => "StaleCache",
            Error::EmptyDataset => "EmptyDataset",
            Error::EmptyBoundary => "EmptyBoundary",
            Error::NoVerticesInRadius(_) => "NoVerticesInRadius",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
