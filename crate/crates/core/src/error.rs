use thiserror::Error;

pub type Result<T> = std::result::Result<T, FddError>;

#[derive(Debug, Error)]
pub enum FddError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("wavevector ({kx:.6e}, {ky:.6e}) is not on the grid lattice")]
    OffLattice { kx: f64, ky: f64 },
    #[error("mode ({kx:.6e}, {ky:.6e}) is not in the nonredundant half-plane")]
    NotHalfPlane { kx: f64, ky: f64 },
    #[error("duplicate mode at ({kx:.6e}, {ky:.6e})")]
    DuplicateMode { kx: f64, ky: f64 },
    #[error("field integral {integral} is not 1 (tolerance {tolerance:e})")]
    NotNormalized { integral: f64, tolerance: f64 },
    #[error("spectrum violates Hermitian symmetry (relative deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("spatial frequency {lines_per_mm} lines/mm is at or above the grid Nyquist limit {nyquist_lines_per_mm:.1} lines/mm")]
    AboveNyquist {
        lines_per_mm: f64,
        nyquist_lines_per_mm: f64,
    },
    #[error("spectral grid too small: OTF cutoff {cutoff:.6e} needs half-extent above it, grid has {half_extent:.6e}")]
    GridTooSmall { cutoff: f64, half_extent: f64 },
    #[error("image canvas {have_nm:?} nm too small for five displaced images; need at least {need_nm:?} nm")]
    CanvasTooSmall { have_nm: [f64; 2], need_nm: [f64; 2] },
    #[error("empty pupil mask")]
    EmptyMask,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("negative intensity {value:e} at index {index}")]
    NegativeIntensity { index: usize, value: f64 },
    #[error("non-Hermitian operator (deviation {deviation:e})")]
    NonHermitianOperator { deviation: f64 },
    #[error("nonpositive mean image at index {index}")]
    NonPositiveMean { index: usize },
    #[error("all Wiener denominators vanish at some frequency; set a positive epsilon floor")]
    SingularWeights,
    #[error("photon budget {budget:e} is below the low-frequency floor {floor:e}: no frequency resolvable")]
    BelowBudgetFloor { budget: f64, floor: f64 },
    #[error("cutoff unreachable: k/k_c = {ratio} >= 1")]
    CutoffUnreachable { ratio: f64 },
    #[error("out-of-band annulus contains no bins")]
    EmptyAnnulus,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed field file: {0}")]
    MalformedField(String),
}
