//! Domain types shared by every stage: spectra, pseudo-Voigt peaks, label
//! encodings, finite-difference derivatives, and min-max normalization.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Default working length of a spectrum, in datapoints.
pub const DEFAULT_LEN: usize = 555;

/// Min-max map applied to a spectrum: normalized = (raw - offset) / scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Axis value of index 0, in instrument units.
    pub axis_start: f64,
    /// Axis units per datapoint, > 0.
    pub axis_step: f64,
    /// Present when the values carry a min-max normalization.
    pub norm: Option<Norm>,
}

impl Spectrum {
    /// Spectrum on the bare index axis (start 0, step 1).
    pub fn from_values(values: Vec<f64>) -> Self {
        Spectrum {
            values,
            axis_start: 0.0,
            axis_step: 1.0,
            norm: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axis_of(&self, index: f64) -> f64 {
        self.axis_start + index * self.axis_step
    }

    pub fn index_of(&self, axis_value: f64) -> f64 {
        (axis_value - self.axis_start) / self.axis_step
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis_step <= 0.0 {
            return Err(Error::Config(format!(
                "axis_step must be > 0, got {}",
                self.axis_step
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite value in spectrum".into()));
        }
        Ok(())
    }
}

/// Pseudo-Voigt peak: a linear Gaussian/Lorentzian mix sharing one FWHM,
/// so the nominal width is exact by construction and the apex value equals
/// `amplitude` for every mixing fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoigtPeak {
    /// Center position in index units, within [0, L-1].
    pub center: f64,
    /// Apex height in signal units, > 0.
    pub amplitude: f64,
    /// Full width at half maximum in index units, >= 1.
    pub fwhm: f64,
    /// Lorentzian fraction in [0, 1]; 0 is pure Gaussian.
    pub eta: f64,
}

impl VoigtPeak {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0) {
            return Err(Error::Config(format!("fwhm must be > 0, got {}", self.fwhm)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must be in [0,1], got {}", self.eta)));
        }
        Ok(())
    }

    /// Profile value at a (possibly fractional) index position.
    pub fn value_at(&self, x: f64) -> f64 {
        let u = x - self.center;
        // Both components hit exactly 1/2 at u = +-fwhm/2.
        let q = 4.0 * u * u / (self.fwhm * self.fwhm);
        let gauss = (-std::f64::consts::LN_2 * q).exp();
        let lorentz = 1.0 / (1.0 + q);
        self.amplitude * (self.eta * lorentz + (1.0 - self.eta) * gauss)
    }
}

/// Evaluate a peak on the integer index grid of length `len`.
pub fn eval_voigt(peak: &VoigtPeak, len: usize) -> Result<Vec<f64>> {
    if len < 8 {
        return Err(Error::Config(format!("spectrum length must be >= 8, got {len}")));
    }
    peak.validate()?;
    Ok((0..len).map(|i| peak.value_at(i as f64)).collect())
}

/// Sum of peak profiles on the index grid.
pub fn eval_peak_sum(peaks: &[VoigtPeak], len: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; len];
    for p in peaks {
        let one = eval_voigt(p, len)?;
        for (o, v) in out.iter_mut().zip(one) {
            *o += v;
        }
    }
    Ok(out)
}

/// First and second finite-difference derivatives at unit spacing.
/// d1 uses central differences with one-sided stencils at both edges;
/// d2 uses the second central difference with replicated edge values.
pub fn derivatives(values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = values.len();
    if n < 3 {
        return Err(Error::Shape {
            expected: "length >= 3".into(),
            got: format!("length {n}"),
        });
    }
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    d1[0] = values[1] - values[0];
    d1[n - 1] = values[n - 1] - values[n - 2];
    for i in 1..n - 1 {
        d1[i] = 0.5 * (values[i + 1] - values[i - 1]);
        d2[i] = values[i + 1] - 2.0 * values[i] + values[i - 1];
    }
    d2[0] = d2[1];
    d2[n - 1] = d2[n - 2];
    Ok((d1, d2))
}

/// Raw spectrum with its first two derivatives; the model-facing input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStack {
    pub raw: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl ChannelStack {
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let (d1, d2) = derivatives(&raw)?;
        Ok(ChannelStack { raw, d1, d2 })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Dense per-point training labels derived from a peak list.
///
/// `location` is the binary indicator of rounded peak centers; `intensity`
/// and `fwhm` hold the peak parameters at those apex indices and zero
/// elsewhere. `shadowed_location` is the list of label indices actually fed
/// to the parameter-retrieval model, which augmentation may displace by a
/// few points; the dense arrays always stay on the true apexes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakLabels {
    pub location: Vec<f64>,
    pub intensity: Vec<f64>,
    pub fwhm: Vec<f64>,
    pub shadowed_location: Vec<usize>,
}

impl PeakLabels {
    pub fn from_peaks(peaks: &[VoigtPeak], len: usize) -> Self {
        let mut location = vec![0.0; len];
        let mut intensity = vec![0.0; len];
        let mut fwhm = vec![0.0; len];
        let mut shadowed = Vec::with_capacity(peaks.len());
        for p in peaks {
            let c = p.center.round() as usize;
            location[c] = 1.0;
            intensity[c] = p.amplitude;
            fwhm[c] = p.fwhm;
            shadowed.push(c);
        }
        PeakLabels {
            location,
            intensity,
            fwhm,
            shadowed_location: shadowed,
        }
    }

    /// Apex indices in ascending order.
    pub fn apex_indices(&self) -> Vec<usize> {
        self.location
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.5)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Min-max normalize a value array to [0, 1].
pub fn minmax_norm(values: &[f64]) -> Result<(Vec<f64>, Norm)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Err(Error::Degenerate(
            "constant spectrum cannot be normalized".into(),
        ));
    }
    let scale = hi - lo;
    let out = values.iter().map(|v| (v - lo) / scale).collect();
    Ok((out, Norm { scale, offset: lo }))
}

/// Normalize a spectrum to [0, 1], recording the map in `norm`.
pub fn normalize(spec: &Spectrum) -> Result<Spectrum> {
    let (values, norm) = minmax_norm(&spec.values)?;
    Ok(Spectrum {
        values,
        axis_start: spec.axis_start,
        axis_step: spec.axis_step,
        norm: Some(norm),
    })
}

/// Invert `normalize`; identity when no norm record is present.
pub fn denormalize(spec: &Spectrum) -> Spectrum {
    match spec.norm {
        None => spec.clone(),
        Some(Norm { scale, offset }) => Spectrum {
            values: spec.values.iter().map(|v| v * scale + offset).collect(),
            axis_start: spec.axis_start,
            axis_step: spec.axis_step,
            norm: None,
        },
    }
}

/// Read a two-column CSV (axis, intensity) and resample onto a uniform grid
/// of `target_len` points spanning the original axis endpoints. A single
/// non-numeric header line is tolerated. Rows must be sorted by axis; the
/// original axis is preserved through `axis_start`/`axis_step`.
pub fn read_spectrum_csv(path: &Path, target_len: usize) -> Result<Spectrum> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split(',').map(str::trim);
        let a = parts.next().and_then(|s| s.parse::<f64>().ok());
        let b = parts.next().and_then(|s| s.parse::<f64>().ok());
        match (a, b) {
            (Some(x), Some(y)) => rows.push((x, y)),
            _ if lineno == 0 => continue, // header
            _ => {
                return Err(Error::Format(format!(
                    "{}:{}: expected two numeric columns",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if rows.len() < 2 {
        return Err(Error::Format(format!(
            "{}: need at least two data rows",
            path.display()
        )));
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Format(format!(
            "{}: axis column must be strictly increasing",
            path.display()
        )));
    }
    resample(&rows, target_len)
}

fn resample(rows: &[(f64, f64)], target_len: usize) -> Result<Spectrum> {
    if target_len < 2 {
        return Err(Error::Config("target length must be >= 2".into()));
    }
    let (x0, xn) = (rows[0].0, rows[rows.len() - 1].0);
    let step = (xn - x0) / (target_len - 1) as f64;
    let mut values = Vec::with_capacity(target_len);
    let mut seg = 0usize;
    for i in 0..target_len {
        let x = if i == target_len - 1 { xn } else { x0 + i as f64 * step };
        while seg + 2 < rows.len() && rows[seg + 1].0 < x {
            seg += 1;
        }
        let (xa, ya) = rows[seg];
        let (xb, yb) = rows[seg + 1];
        let t = ((x - xa) / (xb - xa)).clamp(0.0, 1.0);
        values.push(ya + t * (yb - ya));
    }
    Ok(Spectrum {
        values,
        axis_start: x0,
        axis_step: step,
        norm: None,
    })
}

/// Write a spectrum as two-column CSV with a header line.
pub fn write_spectrum_csv(spec: &Spectrum, path: &Path) -> Result<()> {
    let mut out = String::from("axis,intensity\n");
    for (i, v) in spec.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", spec.axis_of(i as f64), v));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
