//! Float helpers that resolve to `std` intrinsics when available and to
//! `libm` under `no_std`.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }

    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }

    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }

    #[inline]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }

    #[inline]
    pub fn round(x: f64) -> f64 {
        x.round()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }

    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }

    #[inline]
    pub fn round(x: f64) -> f64 {
        libm::round(x)
    }
}

pub(crate) use imp::*;
