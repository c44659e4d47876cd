//! One fully realized synthetic sample, with every intermediate the
//! training code needs stored alongside the model input.

use super::augment::{peak_shadow, spectral_tweak};
use super::baseline::apply_baseline_shift;
use super::baseline::gen_baseline;
use super::config::{GenConfig, Task};
use super::noise::add_noise;
use super::peaks::gen_peaks;
use crate::spectral::{eval_peak_sum, ChannelStack, Norm, PeakLabels, Spectrum, VoigtPeak};
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Everything realized for one sample. All stored arrays live in the
/// normalized frame: `clean_peaks` is the peak sum divided by the combined
/// scale, `baseline` is the shifted baseline mapped through the same
/// normalization, and their sum plus the noise draws equals `input.raw`.
/// `norm` maps back to raw signal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub clean_peaks: Spectrum,
    pub baseline: Vec<f64>,
    pub shift_positions: Vec<(usize, usize)>,
    pub noise_std_used: f64,
    pub peaks: Vec<VoigtPeak>,
    pub labels: PeakLabels,
    pub input: ChannelStack,
    pub raman_like: bool,
    pub norm: Norm,
}

/// Fraction of indices covered by any peak's center ± FWHM span, and the
/// median FWHM. A spectrum reads as Raman-like when peaks are sparse
/// (occupied fraction < 0.40) and sharp (median FWHM < 15 points).
pub fn raman_like(peaks: &[VoigtPeak], len: usize) -> bool {
    let mut covered = vec![false; len];
    for p in peaks {
        let lo = ((p.center - p.fwhm).round().max(0.0)) as usize;
        let hi = ((p.center + p.fwhm).round() as usize).min(len - 1);
        for c in covered.iter_mut().take(hi + 1).skip(lo) {
            *c = true;
        }
    }
    let occupied = covered.iter().filter(|c| **c).count() as f64 / len as f64;
    let mut widths: Vec<f64> = peaks.iter().map(|p| p.fwhm).collect();
    widths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if widths.is_empty() {
        0.0
    } else if widths.len() % 2 == 1 {
        widths[widths.len() / 2]
    } else {
        0.5 * (widths[widths.len() / 2 - 1] + widths[widths.len() / 2])
    };
    occupied < 0.40 && median < 15.0
}

/// Generate sample `index` as a pure function of `(cfg, index)`. Composition
/// order (and hence draw order): peaks, global slope choice, baseline,
/// min-max normalization of the combined signal, baseline shifts, noise,
/// then the enabled augmentations (tweak on the input, shadow on the
/// labels).
pub fn gen_sample(cfg: &GenConfig, index: u64) -> Result<SampleRecord> {
    let len = cfg.length;
    let mut rng = cfg.rng_for(index);
    let n = cfg.n_peaks_for_index(index);

    let peaks = gen_peaks(&mut rng, n, len, cfg)?;
    let clean = eval_peak_sum(&peaks, len)?;

    let slope = cfg.slope_coeffs[rng.random_range(0..cfg.slope_coeffs.len())];
    let (baseline_raw, _plan) = gen_baseline(&mut rng, len, slope);

    let combined: Vec<f64> = clean.iter().zip(&baseline_raw).map(|(c, b)| c + b).collect();
    let (_, norm) = crate::spectral::minmax_norm(&combined)?;
    let peaks_norm: Vec<f64> = clean.iter().map(|v| v / norm.scale).collect();
    let baseline_norm: Vec<f64> = baseline_raw
        .iter()
        .map(|v| (v - norm.offset) / norm.scale)
        .collect();

    let (baseline_shifted, shift_positions) = apply_baseline_shift(&mut rng, &baseline_norm, cfg);
    let drifted: Vec<f64> = peaks_norm
        .iter()
        .zip(&baseline_shifted)
        .map(|(p, b)| p + b)
        .collect();

    let (mut noisy, noise_std_used) = add_noise(&mut rng, &drifted, cfg)?;
    if cfg.tweak_enabled {
        noisy = spectral_tweak(&mut rng, &noisy, &peaks);
    }

    let mut labels = PeakLabels::from_peaks(&peaks, len);
    if cfg.shadow_enabled {
        labels = peak_shadow(&mut rng, &labels);
    }

    Ok(SampleRecord {
        index,
        clean_peaks: Spectrum::from_values(peaks_norm),
        baseline: baseline_shifted,
        shift_positions,
        noise_std_used,
        raman_like: raman_like(&peaks, len),
        peaks,
        labels,
        input: ChannelStack::from_raw(noisy)?,
        norm,
    })
}

impl SampleRecord {
    /// Model input channels for the record's task. The fitter's fourth
    /// channel is the location indicator rebuilt from the (possibly
    /// shadowed) label indices, since that is what it sees at inference.
    pub fn input_channels(&self, task: Task) -> Vec<Vec<f64>> {
        let mut channels = vec![
            self.input.raw.clone(),
            self.input.d1.clone(),
            self.input.d2.clone(),
        ];
        if task == Task::PeakFitter {
            let mut indicator = vec![0.0; self.input.raw.len()];
            for &s in &self.labels.shadowed_location {
                indicator[s] = 1.0;
            }
            channels.push(indicator);
        }
        channels
    }

    /// Ground-truth output channels for the record's task. Intensities stay
    /// in the normalized frame; widths are expressed as a fraction of the
    /// spectrum length so both fitter outputs share a scale.
    pub fn target_channels(&self, task: Task) -> Vec<Vec<f64>> {
        let len = self.input.raw.len();
        match task {
            Task::Denoiser => {
                vec![self
                    .clean_peaks
                    .values
                    .iter()
                    .zip(&self.baseline)
                    .map(|(p, b)| p + b)
                    .collect()]
            }
            Task::BaselineRemover => vec![self.baseline.clone()],
            Task::PeakLocator => vec![self.labels.location.clone()],
            Task::PeakFitter => {
                let mut intensity = vec![0.0; len];
                let mut fwhm = vec![0.0; len];
                for (i, (ivv, fvv)) in self
                    .labels
                    .intensity
                    .iter()
                    .zip(&self.labels.fwhm)
                    .enumerate()
                {
                    if *ivv > 0.0 {
                        intensity[i] = ivv / self.norm.scale;
                        fwhm[i] = fvv / len as f64;
                    }
                }
                vec![intensity, fwhm]
            }
        }
    }

    /// True apex indices (unshadowed), for apex-weighted losses.
    pub fn apex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.labels.location.len()];
        for (i, v) in self.labels.location.iter().enumerate() {
            if *v == 1.0 {
                mask[i] = true;
            }
        }
        mask
    }
}
