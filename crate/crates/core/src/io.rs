//! CSV artifacts for spectra, envelopes and driven steady states.
//!
//! Numbers are written with 17 significant digits so a write/read cycle is
//! lossless.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fano::FanoResult;
use crate::scattering::ScatterResult;
use crate::types::{EnvelopeCurve, FrequencyGrid};

pub const SCATTERING_COLUMNS: [&str; 7] = ["delta", "re_t", "im_t", "re_r", "im_r", "re_rloss", "im_rloss"];
pub const Z_COLUMNS: [&str; 2] = ["z_re", "z_im"];
pub const ENVELOPE_COLUMNS: [&str; 3] = ["t", "re_C", "im_C"];
pub const NOISE_SPECTRUM_COLUMNS: [&str; 3] = ["omega", "s_exact", "s_ideal"];
pub const BLOCH_COLUMNS: [&str; 10] = [
    "delta",
    "re_hom",
    "im_hom",
    "power_trans",
    "power_refl",
    "flux_residual",
    "stderr_hom",
    "stderr_power_trans",
    "stderr_power_refl",
    "stderr_flux_residual",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        Error::Io(e.to_string())
    } else {
        Error::Parse(e.to_string())
    }
}

/// Writes a header and rows of numbers.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::InvalidGrid(format!(
                "row {i} has {} fields for {} columns",
                row.len(),
                header.len()
            )));
        }
        out.write_record(row.iter().map(|&x| fmt_f64(x))).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Io(e.to_string()))
}

/// A parsed numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    fn complex_column(&self, re: &str, im: &str) -> Result<Vec<Complex64>> {
        let a = self.column(re)?;
        let b = self.column(im)?;
        Ok(a.into_iter().zip(b).map(|(x, y)| Complex64::new(x, y)).collect())
    }
}

pub fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .zip(&header)
            .map(|(f, h)| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: column `{h}` holds `{f}`", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// t, r and r_loss on a grid, with the Fano factor z when present.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterTable {
    pub grid: FrequencyGrid,
    pub t: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub r_loss: Vec<Complex64>,
    pub z: Option<Vec<Complex64>>,
}

impl From<&ScatterResult> for ScatterTable {
    fn from(s: &ScatterResult) -> Self {
        ScatterTable {
            grid: s.grid().clone(),
            t: s.transmittance.values.clone(),
            r: s.reflectance.values.clone(),
            r_loss: s.loss_reflectance.values.clone(),
            z: None,
        }
    }
}

impl From<&FanoResult> for ScatterTable {
    fn from(s: &FanoResult) -> Self {
        ScatterTable {
            grid: s.overlap.grid.clone(),
            t: s.transmittance.values.clone(),
            r: s.reflectance.values.clone(),
            r_loss: s.loss_reflectance.values.clone(),
            z: Some(s.z.clone()),
        }
    }
}

/// Header and rows of the scattering schema.
pub fn scattering_rows(s: &ScatterTable) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let mut header: Vec<&str> = SCATTERING_COLUMNS.to_vec();
    if s.z.is_some() {
        header.extend(Z_COLUMNS);
    }
    let rows = s
        .grid
        .values()
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let mut row = vec![d, s.t[k].re, s.t[k].im, s.r[k].re, s.r[k].im, s.r_loss[k].re, s.r_loss[k].im];
            if let Some(z) = &s.z {
                row.extend([z[k].re, z[k].im]);
            }
            row
        })
        .collect();
    (header, rows)
}

pub fn write_scattering<W: Write>(w: W, s: &ScatterTable) -> Result<()> {
    let (header, rows) = scattering_rows(s);
    write_table(w, &header, &rows)
}

pub fn read_scattering<R: Read>(r: R) -> Result<ScatterTable> {
    let tab = read_table(r)?;
    let grid = FrequencyGrid::new(tab.column("delta")?)?;
    let z = if tab.column_index(Z_COLUMNS[0]).is_some() {
        Some(tab.complex_column(Z_COLUMNS[0], Z_COLUMNS[1])?)
    } else {
        None
    };
    Ok(ScatterTable {
        grid,
        t: tab.complex_column("re_t", "im_t")?,
        r: tab.complex_column("re_r", "im_r")?,
        r_loss: tab.complex_column("re_rloss", "im_rloss")?,
        z,
    })
}

pub fn envelope_rows(c: &EnvelopeCurve) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let mut header: Vec<&str> = ENVELOPE_COLUMNS.to_vec();
    if c.std_error().is_some() {
        header.push("stderr");
    }
    let rows = c
        .times()
        .iter()
        .zip(c.values())
        .enumerate()
        .map(|(k, (&t, v))| {
            let mut row = vec![t, v.re, v.im];
            if let Some(se) = c.std_error() {
                row.push(se[k]);
            }
            row
        })
        .collect();
    (header, rows)
}

pub fn write_envelope<W: Write>(w: W, c: &EnvelopeCurve) -> Result<()> {
    let (header, rows) = envelope_rows(c);
    write_table(w, &header, &rows)
}

pub fn read_envelope<R: Read>(r: R) -> Result<EnvelopeCurve> {
    let tab = read_table(r)?;
    let se = match tab.column_index("stderr") {
        Some(_) => Some(tab.column("stderr")?),
        None => None,
    };
    EnvelopeCurve::from_measured(tab.column("t")?, tab.complex_column("re_C", "im_C")?, se)
}

/// One detuning of a driven steady-state sweep. Analytic rows carry zero
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochRow {
    pub delta: f64,
    pub homodyne: Complex64,
    pub power_trans: f64,
    pub power_refl: f64,
    pub flux_residual: f64,
    pub stderr_hom: f64,
    pub stderr_power_trans: f64,
    pub stderr_power_refl: f64,
    pub stderr_flux_residual: f64,
}

pub fn bloch_rows(rows: &[BlochRow]) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let rows = rows
        .iter()
        .map(|b| {
            vec![
                b.delta,
                b.homodyne.re,
                b.homodyne.im,
                b.power_trans,
                b.power_refl,
                b.flux_residual,
                b.stderr_hom,
                b.stderr_power_trans,
                b.stderr_power_refl,
                b.stderr_flux_residual,
            ]
        })
        .collect();
    (BLOCH_COLUMNS.to_vec(), rows)
}

pub fn write_bloch<W: Write>(w: W, rows: &[BlochRow]) -> Result<()> {
    let (header, rows) = bloch_rows(rows);
    write_table(w, &header, &rows)
}

pub fn read_bloch<R: Read>(r: R) -> Result<Vec<BlochRow>> {
    let tab = read_table(r)?;
    let cols: Vec<Vec<f64>> = BLOCH_COLUMNS.iter().map(|c| tab.column(c)).collect::<Result<_>>()?;
    Ok((0..tab.rows.len())
        .map(|k| BlochRow {
            delta: cols[0][k],
            homodyne: Complex64::new(cols[1][k], cols[2][k]),
            power_trans: cols[3][k],
            power_refl: cols[4][k],
            flux_residual: cols[5][k],
            stderr_hom: cols[6][k],
            stderr_power_trans: cols[7][k],
            stderr_power_refl: cols[8][k],
            stderr_flux_residual: cols[9][k],
        })
        .collect())
}
