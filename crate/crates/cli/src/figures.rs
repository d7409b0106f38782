//! Datasets behind the published figures, with the captions' parameters.

use serde::Serialize;
use serde_json::json;

use noisyqed::io::{envelope_rows, scattering_rows, ScatterTable, NOISE_SPECTRUM_COLUMNS};
use noisyqed::noise::{one_over_f_components, one_over_f_ideal, Component};
use noisyqed::ramsey::envelope;
use noisyqed::scattering::{spectrum, Method};
use noisyqed::{make_grid, time_grid, Channel, NoiseModel, SystemParams};

use crate::error::CliError;
use crate::output::{Artifacts, Dataset};

pub const FIGURE_IDS: [&str; 9] = [
    "fig2c", "fig3a", "fig4a", "fig4b", "fig4c", "fig5b", "fig5c", "fig6b", "fig6c",
];

/// 1/f recipe of the 1/f figures.
pub const ONE_OVER_F_N: usize = 8;
pub const ONE_OVER_F_KAPPA_MIN: f64 = 1e-5;
pub const ONE_OVER_F_KAPPA_MAX: f64 = 10.0;
pub const ONE_OVER_F_SIGMA1: f64 = 2.0;
pub const ONE_OVER_F_ETA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum Panel {
    /// Transmittance against detuning.
    Spectrum { delta_min: f64, delta_max: f64, n: usize },
    /// Ramsey envelope against time.
    Envelope { t_max: f64, n: usize },
    /// Noise power spectrum on a log-spaced frequency axis.
    NoisePower { log10_min: f64, log10_max: f64, per_decade: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub label: &'static str,
    pub model: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure {
    pub id: &'static str,
    pub title: &'static str,
    pub params: SystemParams,
    pub panel: Panel,
    pub curves: Vec<Curve>,
}

fn ou(sigma: f64, kappa: f64) -> NoiseModel {
    NoiseModel::ColoredGaussian { sigma, kappa }
}

fn tel(sigma: f64, kappa: f64) -> NoiseModel {
    NoiseModel::Telegraph { sigma, kappa }
}

pub fn one_over_f_recipe() -> Vec<Component> {
    one_over_f_components(
        ONE_OVER_F_N,
        ONE_OVER_F_KAPPA_MIN,
        ONE_OVER_F_KAPPA_MAX,
        ONE_OVER_F_SIGMA1,
        ONE_OVER_F_ETA,
    )
    .expect("valid 1/f recipe")
}

fn one_over_f_curves() -> Vec<Curve> {
    let c = one_over_f_recipe();
    vec![
        Curve {
            label: "gaussian",
            model: NoiseModel::OneOverF {
                components: c.clone(),
                gaussian: true,
                m: 1,
            },
        },
        Curve {
            label: "non_gaussian",
            model: NoiseModel::OneOverF {
                components: c,
                gaussian: false,
                m: 1,
            },
        },
    ]
}

fn ou_curves() -> Vec<Curve> {
    let sigma = 1.0;
    vec![
        Curve {
            label: "kappa_10sigma",
            model: ou(sigma, 10.0 * sigma),
        },
        Curve {
            label: "kappa_2sigma",
            model: ou(sigma, 2.0 * sigma),
        },
        Curve {
            label: "kappa_0",
            model: ou(sigma, 0.0),
        },
    ]
}

fn telegraph_curves() -> Vec<Curve> {
    let sigma = 2.0;
    vec![
        Curve {
            label: "kappa_5sigma",
            model: tel(sigma, 5.0 * sigma),
        },
        Curve {
            label: "kappa_sigma",
            model: tel(sigma, sigma),
        },
        Curve {
            label: "kappa_0p05sigma",
            model: tel(sigma, 0.05 * sigma),
        },
    ]
}

fn tlf_curves() -> Vec<Curve> {
    let sigma = 2.0;
    [("m_2", 2), ("m_3", 3), ("m_4", 4), ("m_5", 5), ("m_10", 10)]
        .into_iter()
        .map(|(label, m)| Curve {
            label,
            model: NoiseModel::TlfEnsemble {
                m,
                sigma,
                kappa: 0.1 * sigma,
            },
        })
        .collect()
}

const SPECTRUM_WIDE: Panel = Panel::Spectrum {
    delta_min: -8.0,
    delta_max: 8.0,
    n: 481,
};
const ENVELOPE: Panel = Panel::Envelope { t_max: 10.0, n: 501 };

pub fn figure(id: &str) -> Option<Figure> {
    let params = SystemParams::canonical();
    let (id, title, panel, curves) = match id {
        "fig2c" => ("fig2c", "Ramsey envelopes, colored Gaussian noise", ENVELOPE, ou_curves()),
        "fig3a" => (
            "fig3a",
            "Transmittance, colored Gaussian noise",
            Panel::Spectrum {
                delta_min: -6.0,
                delta_max: 6.0,
                n: 481,
            },
            ou_curves(),
        ),
        "fig4a" => (
            "fig4a",
            "Noise power spectrum of the 1/f recipe",
            Panel::NoisePower {
                log10_min: -6.0,
                log10_max: 6.0,
                per_decade: 10,
            },
            one_over_f_curves()[..1].to_vec(),
        ),
        "fig4b" => (
            "fig4b",
            "Transmittance, Gaussian and non-Gaussian 1/f noise",
            Panel::Spectrum {
                delta_min: -6.0,
                delta_max: 6.0,
                n: 241,
            },
            one_over_f_curves(),
        ),
        "fig4c" => ("fig4c", "Ramsey envelopes, 1/f noise", ENVELOPE, one_over_f_curves()),
        "fig5b" => ("fig5b", "Transmittance, telegraph noise", SPECTRUM_WIDE, telegraph_curves()),
        "fig5c" => ("fig5c", "Ramsey envelopes, telegraph noise", ENVELOPE, telegraph_curves()),
        "fig6b" => ("fig6b", "Transmittance, ensembles of M fluctuators", SPECTRUM_WIDE, tlf_curves()),
        "fig6c" => ("fig6c", "Ramsey envelopes, ensembles of M fluctuators", ENVELOPE, tlf_curves()),
        _ => return None,
    };
    Some(Figure {
        id,
        title,
        params,
        panel,
        curves,
    })
}

/// Per-curve tables in the standard schemas plus a wide summary table.
pub fn figure_artifacts(fig: &Figure) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    art.extra.insert("figure".into(), serde_json::to_value(fig)?);
    match fig.panel {
        Panel::Spectrum { delta_min, delta_max, n } => {
            let grid = make_grid(delta_min, delta_max, n)?;
            let mut header = vec!["delta".to_string()];
            let mut cols = vec![grid.values().to_vec()];
            for c in &fig.curves {
                let s = spectrum(&fig.params, &c.model, &grid, Channel::Plus, Method::Auto, 1e-12)?;
                header.push(format!("abs_t_{}", c.label));
                cols.push(s.t().iter().map(|t| t.norm()).collect());
                art.datasets.push(Dataset::new(
                    format!("{}/{}", fig.id, c.label),
                    scattering_rows(&ScatterTable::from(&s)),
                ));
            }
            art.datasets.push(wide(fig.id, header, &cols));
        }
        Panel::Envelope { t_max, n } => {
            let times = time_grid(t_max, n)?;
            let mut header = vec!["t".to_string()];
            let mut cols = vec![times.clone()];
            for c in &fig.curves {
                let e = envelope(&c.model, &times)?;
                header.push(format!("C_{}", c.label));
                cols.push(e.real());
                art.datasets
                    .push(Dataset::new(format!("{}/{}", fig.id, c.label), envelope_rows(&e)));
            }
            art.datasets.push(wide(fig.id, header, &cols));
        }
        Panel::NoisePower {
            log10_min,
            log10_max,
            per_decade,
        } => {
            let comps = one_over_f_recipe();
            let model = &fig.curves[0].model;
            let n = ((log10_max - log10_min) * per_decade as f64).round() as usize;
            let rows: Vec<Vec<f64>> = (0..=n)
                .map(|k| {
                    let w = 10f64.powf(log10_min + k as f64 / per_decade as f64);
                    vec![w, model.power_spectrum(w), one_over_f_ideal(&comps, ONE_OVER_F_ETA, w)]
                })
                .collect();
            art.extra.insert(
                "axes".into(),
                json!({ "x": "log", "y": "log", "eta": ONE_OVER_F_ETA }),
            );
            art.datasets
                .push(Dataset::new(fig.id, (NOISE_SPECTRUM_COLUMNS.to_vec(), rows)));
        }
    }
    Ok(art)
}

fn wide(id: &str, header: Vec<String>, cols: &[Vec<f64>]) -> Dataset {
    let n = cols[0].len();
    Dataset {
        name: id.to_string(),
        header,
        rows: (0..n).map(|k| cols.iter().map(|c| c[k]).collect()).collect(),
    }
}
