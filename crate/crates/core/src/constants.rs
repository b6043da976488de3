/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Zero-field triplet transition of pentacene in para-terphenyl used as the
/// masing line, Hz.
pub const F_SPIN_HZ: f64 = 1.4495e9;

/// Pump wavelength, m.
pub const PUMP_WAVELENGTH_M: f64 = 532e-9;

/// Pump pulse duration, s.
pub const PUMP_DURATION_S: f64 = 6e-9;

/// Default scope/load impedance, Ω.
pub const DEFAULT_LOAD_OHMS: f64 = 50.0;

/// Energy of one photon at `freq_hz`.
pub fn photon_energy(freq_hz: f64) -> f64 {
    PLANCK * freq_hz
}
