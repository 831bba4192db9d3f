use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter is outside the domain of the operation.
    #[error("parameter `{param}` = {value} violates {bound}")]
    Domain {
        param: &'static str,
        value: f64,
        bound: &'static str,
    },

    /// Truncation left more probability mass outside the support than allowed.
    #[error("tail mass {tail:e} exceeds tolerance {tol:e}; cutoff {required_cutoff} required")]
    TailTolerance {
        tail: f64,
        tol: f64,
        required_cutoff: usize,
    },

    /// A marker is undefined for the given input (e.g. zero variance).
    #[error("marker undefined: {0}")]
    UndefinedMarker(&'static str),

    /// Instrument noise variance is at least as large as the measured variance.
    #[error("channel {channel} is noise dominated: measured variance {measured:e}, noise {noise:e}")]
    NoiseDominated {
        channel: u8,
        measured: f64,
        noise: f64,
    },

    /// No admissible solution of an inverse problem exists for the data.
    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

pub(crate) fn check_domain(
    ok: bool,
    param: &'static str,
    value: f64,
    bound: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            param,
            value,
            bound,
        })
    }
}
