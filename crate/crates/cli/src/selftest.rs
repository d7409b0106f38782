//! Fast consistency checks of the installed build.

use num_complex::Complex64;

use noisyqed::inversion::{envelope_from_transmittance, InversionOptions};
use noisyqed::noise::build_jump_model;
use noisyqed::ramsey::envelope_value;
use noisyqed::scattering::{
    scatter_from_envelope, scatter_jump, spectrum, transmittance_ou_series, transmittance_telegraph, Method,
};
use noisyqed::mc_oracle::overlap_mc;
use noisyqed::{make_grid, Channel, FrequencyGrid, NoiseModel, SystemParams};

pub struct SelfCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn noiseless() -> noisyqed::Result<SelfCheck> {
    let p = SystemParams::canonical();
    let s = spectrum(&p, &NoiseModel::noiseless(), &FrequencyGrid::single(0.0)?, Channel::Plus, Method::Auto, 1e-12)?;
    let e = (s.t()[0] - 0.1).norm();
    Ok(SelfCheck {
        name: "noiseless resonance t(0) = 0.1",
        pass: e <= 1e-12,
        detail: format!("err {e:.1e}"),
    })
}

fn telegraph() -> noisyqed::Result<SelfCheck> {
    let p = SystemParams::canonical();
    let grid = make_grid(-6.0, 6.0, 61)?;
    let m = NoiseModel::Telegraph { sigma: 2.0, kappa: 2.0 };
    let a = transmittance_telegraph(&p, 2.0, 2.0, &grid, Channel::Plus)?;
    let b = scatter_jump(&p, &build_jump_model(&m, 1024)?, &grid, Channel::Plus)?;
    let d = max_diff(a.t(), b.t());
    Ok(SelfCheck {
        name: "telegraph closed form vs jump solver",
        pass: d <= 1e-12,
        detail: format!("max diff {d:.1e}"),
    })
}

fn ou_routes() -> noisyqed::Result<SelfCheck> {
    let p = SystemParams::canonical();
    let grid = make_grid(-5.0, 5.0, 11)?;
    let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 2.0 };
    let a = transmittance_ou_series(&p, 1.0, 2.0, &grid, 1e-13, Channel::Plus)?.result;
    let b = scatter_from_envelope(&p, |t| envelope_value(&m, t), &grid, Channel::Plus)?;
    let d = max_diff(a.t(), b.t());
    Ok(SelfCheck {
        name: "OU series vs Laplace quadrature",
        pass: d <= 1e-6,
        detail: format!("max diff {d:.1e}"),
    })
}

fn monte_carlo() -> noisyqed::Result<SelfCheck> {
    let p = SystemParams::canonical();
    let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 2.0 };
    let g = transmittance_ou_series(&p, 1.0, 2.0, &FrequencyGrid::single(0.0)?, 1e-13, Channel::Plus)?
        .result
        .overlap
        .values[0];
    let e = overlap_mc(&p, &m, 0.0, 2000, 20.0, 7)?;
    let z = e.z_score(g);
    Ok(SelfCheck {
        name: "Monte Carlo overlap vs series",
        pass: z < 5.0,
        detail: format!("{z:.2} standard errors"),
    })
}

fn inversion() -> noisyqed::Result<SelfCheck> {
    let p = SystemParams::canonical();
    let grid = make_grid(-40.0, 40.0, 4096)?;
    let m = NoiseModel::White { gamma_phi: 0.3 };
    let s = spectrum(&p, &m, &grid, Channel::Plus, Method::Auto, 1e-12)?;
    let re: Vec<f64> = s.t().iter().map(|t| t.re).collect();
    let rec = envelope_from_transmittance(&p, &grid, &re, Channel::Plus, &InversionOptions::default())?;
    let e = rec
        .raw
        .times()
        .iter()
        .zip(rec.raw.values())
        .map(|(&t, c)| (c - (-0.3 * t).exp()).norm())
        .fold(0.0, f64::max);
    Ok(SelfCheck {
        name: "white-noise spectrum to envelope roundtrip",
        pass: e <= 2e-2,
        detail: format!("max err {e:.1e}"),
    })
}

pub fn run_all() -> Vec<SelfCheck> {
    let checks: [(&'static str, fn() -> noisyqed::Result<SelfCheck>); 5] = [
        ("noiseless", noiseless),
        ("telegraph", telegraph),
        ("ou", ou_routes),
        ("mc", monte_carlo),
        ("inversion", inversion),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| SelfCheck {
                name,
                pass: false,
                detail: e.to_string(),
            })
        })
        .collect()
}
