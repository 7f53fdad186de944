use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("disc of radius {radius} centred at ({cx}, {cy}) does not fit in the region")]
    GeometryFit { cx: f64, cy: f64, radius: f64 },

    #[error("Poisson mean {0} exceeds the exact-summation cap")]
    MeanTooLarge(f64),

    #[error("configuration has an infinite label at cell {0}")]
    InfiniteLabel(usize),

    #[error("seed configuration is not certified")]
    SeedNotCertified,

    #[error("malformed configuration: {0}")]
    Malformed(String),
}
