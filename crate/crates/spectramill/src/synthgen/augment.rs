//! Task-specific training augmentations: near-unity intensity tweaks around
//! peak apexes, and label shadowing for the parameter-retrieval task.

use crate::spectral::{PeakLabels, VoigtPeak};
use rand::Rng;

/// Uniform draw over (lo1, hi1) ∪ (lo2, hi2). The two halves have equal
/// width everywhere this is used, so a fair side pick keeps the union
/// uniform.
fn union_range<R: Rng>(rng: &mut R, lo1: f64, hi1: f64, lo2: f64, hi2: f64) -> f64 {
    if rng.random_bool(0.5) {
        rng.random_range(lo1..hi1)
    } else {
        rng.random_range(lo2..hi2)
    }
}

/// Multiply peak apexes (and a few adjacent points) by factors close to 1.
/// Gated at 50% per spectrum and 50% per peak. Draw order per tweaked peak:
/// center factor, left neighbor count and factors, right neighbor count and
/// factors.
pub fn spectral_tweak<R: Rng>(rng: &mut R, values: &[f64], peaks: &[VoigtPeak]) -> Vec<f64> {
    let mut out = values.to_vec();
    if !rng.random_bool(0.5) {
        return out;
    }
    let len = out.len();
    for p in peaks {
        if !rng.random_bool(0.5) {
            continue;
        }
        let c = (p.center.round() as usize).min(len - 1);
        out[c] *= union_range(rng, 0.96, 0.999, 1.001, 1.04);
        for dir in [-1isize, 1] {
            let count = rng.random_range(0..=3usize);
            for off in 1..=count as isize {
                let factor = union_range(rng, 0.98, 0.999, 1.001, 1.02);
                let i = c as isize + dir * off;
                if (0..len as isize).contains(&i) {
                    out[i as usize] *= factor;
                }
            }
        }
    }
    out
}

/// Displace the label indices fed to the parameter-retrieval model by 1 to
/// 3 points in a random direction. Gated at 50% per spectrum and 50% per
/// peak; the dense ground-truth arrays are never touched.
pub fn peak_shadow<R: Rng>(rng: &mut R, labels: &PeakLabels) -> PeakLabels {
    let mut out = labels.clone();
    if !rng.random_bool(0.5) {
        return out;
    }
    let len = labels.location.len();
    for s in &mut out.shadowed_location {
        if !rng.random_bool(0.5) {
            continue;
        }
        let magnitude = rng.random_range(1..=3i32) as isize;
        let dir = if rng.random_bool(0.5) { 1 } else { -1 };
        let moved = (*s as isize + dir * magnitude).clamp(0, len as isize - 1);
        *s = moved as usize;
    }
    out
}
