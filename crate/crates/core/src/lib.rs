//! Noise-averaged single-photon scattering of a two-level emitter in a
//! waveguide under correlated dephasing noise.
//!
//! Rates and frequencies are in units of the total decay rate Γ. The crate
//! computes the Ramsey envelope C(t) of a dephasing model, the averaged
//! transmittance and reflectance obtained from it, and the inverse maps that
//! recover C(t) from measured spectra.

pub mod bloch;
pub mod error;
pub mod fano;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod mc_oracle;
pub mod noise;
pub mod quad;
pub mod ramsey;
pub mod scattering;
pub mod special;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use noise::{JumpModel, NoiseModel, Trajectory};
pub use scattering::ScatterResult;

pub use types::{
    make_grid, time_grid, Channel, ComplexSpectrum, EnvelopeCurve, EstimateWithError,
    FrequencyGrid, SpectrumKind, SystemParams, EPS_NUM,
};
