//! Float functions that `core` lacks. Hosted builds (`std` feature) use the
//! platform implementations, which are markedly faster than the portable
//! ones.

#[cfg(feature = "std")]
mod imp {
    extern crate std;

    pub fn pow(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    pub fn pow(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
}

pub(crate) use imp::{floor, ln, pow, sqrt};
