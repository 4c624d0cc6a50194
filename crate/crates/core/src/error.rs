use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside its domain ({expected})")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("delay spread {delay_spread:e} s exceeds the cyclic prefix {cyclic_prefix:e} s")]
    CyclicPrefixViolated {
        delay_spread: f64,
        cyclic_prefix: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(
        "device {device} path {path} (delay {delay:e} s, doppler {doppler} Hz) is not on the grid"
    )]
    OffGrid {
        device: usize,
        path: usize,
        delay: f64,
        doppler: f64,
    },

    #[error("non-finite {quantity} at iteration {iteration}, index {index}")]
    NonFinite {
        quantity: &'static str,
        iteration: usize,
        index: usize,
    },

    #[error("matrix is not positive definite even after regularization ({0})")]
    NotPositiveDefinite(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
