use thiserror::Error;

/// Failures raised by grid construction, state construction and observables.
#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("particle count {0} outside the supported range 1..=3")]
    ParticleCount(usize),
    #[error("points per axis {0} must be a power of two no smaller than 8")]
    PointsPerAxis(usize),
    #[error("box length {0} must be positive and finite")]
    BoxLength(f64),
    #[error("configuration grid with {0} sites exceeds the storage limit")]
    TooLarge(usize),
    #[error("packet width {width} is below four grid spacings ({min})")]
    UnderResolved { width: f64, min: f64 },
    #[error("packet centred at {center} with width {width} lies within four widths of the periodic boundary")]
    NearBoundary { center: f64, width: f64 },
    #[error("expected {expected} per-particle entries, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("amplitude array has {got} entries but the grid has {expected} sites")]
    Length { expected: usize, got: usize },
    #[error("non-finite amplitude at site {0}")]
    NonFinite(usize),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("region contains no grid points")]
    EmptyRegion,
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("superposition needs at least one component")]
    EmptySuperposition,
}

/// Failures of the binary snapshot codec.
#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing QCOL1 magic header")]
    BadMagic,
    #[error("snapshot header describes an invalid grid: {0}")]
    Grid(#[from] LatticeError),
}
