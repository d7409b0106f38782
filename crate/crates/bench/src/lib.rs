//! Shared inputs for the solver benchmarks.

use noisyqed::{make_grid, FrequencyGrid, NoiseModel, SystemParams};

pub fn params() -> SystemParams {
    SystemParams::canonical()
}

pub fn grid(n: usize) -> FrequencyGrid {
    make_grid(-6.0, 6.0, n).expect("valid grid")
}

pub fn ou() -> NoiseModel {
    NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 2.0 }
}

pub fn tlf(m: usize) -> NoiseModel {
    NoiseModel::TlfEnsemble { m, sigma: 2.0, kappa: 0.2 }
}
