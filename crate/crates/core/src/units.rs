//! Physical constants and the unit conversions used at interface boundaries.
//!
//! Everything inside the crate is SI (m, s, Pa, K, Hz). Readers and writers
//! convert on the way in and out.

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 0 °C in kelvin.
pub const ZERO_CELSIUS: f64 = 273.15;

pub const MM: f64 = 1e-3;
pub const UM: f64 = 1e-6;
pub const NM: f64 = 1e-9;
pub const MHZ: f64 = 1e6;
pub const PPM: f64 = 1e-6;
/// 1 mbar in pascal.
pub const MBAR: f64 = 100.0;
pub const MINUTE: f64 = 60.0;

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + ZERO_CELSIUS
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - ZERO_CELSIUS
}

/// Converts a rate in °C/min to K/s.
pub fn per_minute_to_per_second(rate: f64) -> f64 {
    rate / MINUTE
}
