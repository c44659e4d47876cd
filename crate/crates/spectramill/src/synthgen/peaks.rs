//! Peak placement.
//!
//! Consecutive sorted centers are kept within a maximum gap: 2 index units
//! for the tight half of the draws, 12 otherwise, producing clusters with
//! varying overlap. Gaps are at least 1 unit so rounded centers never
//! collide, and all centers stay in [5, L-6].

use super::config::GenConfig;
use crate::error::Result;
use crate::spectral::VoigtPeak;
use rand::Rng;

const MARGIN_LO: f64 = 5.0;
const PLACEMENT_RETRIES: usize = 32;

pub fn gen_peaks<R: Rng>(rng: &mut R, n: usize, len: usize, cfg: &GenConfig) -> Result<Vec<VoigtPeak>> {
    let hi = len as f64 - 6.0;
    let tight = rng.random_bool(0.5);
    let max_gap = if tight { 2.0 } else { 12.0 };

    // Draw inter-center gaps, retry if the cluster cannot fit, then as a
    // last resort compress the gaps toward the available span. Compression
    // keeps every gap >= 1 so rounded centers stay distinct.
    let avail = hi - MARGIN_LO;
    let unit_span = (n - 1) as f64;
    if unit_span > avail {
        return Err(crate::error::Error::Config(format!(
            "{n} peaks cannot fit a length-{len} spectrum"
        )));
    }
    let mut gaps: Vec<f64> = Vec::new();
    let mut span = 0.0;
    for attempt in 0..=PLACEMENT_RETRIES {
        gaps.clear();
        span = 0.0;
        for _ in 1..n {
            let g = rng.random_range(1.0..max_gap);
            span += g;
            gaps.push(g);
        }
        if span <= avail {
            break;
        }
        if attempt == PLACEMENT_RETRIES {
            let k = (avail * 0.98 - unit_span) / (span - unit_span);
            let k = k.clamp(0.0, 1.0);
            span = 0.0;
            for g in &mut gaps {
                *g = 1.0 + (*g - 1.0) * k;
                span += *g;
            }
        }
    }
    let start = rng.random_range(MARGIN_LO..=(hi - span));

    let mut center = start;
    let mut peaks = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            center += gaps[i - 1];
        }
        let amplitude = rng.random_range(cfg.amplitude_range.0..cfg.amplitude_range.1);
        let fwhm = rng.random_range(cfg.fwhm_range.0..cfg.fwhm_range.1);
        let eta = rng.random::<f64>();
        peaks.push(VoigtPeak { center, amplitude, fwhm, eta });
    }
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::Task;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> GenConfig {
        GenConfig::for_task(Task::PeakLocator, 1)
    }

    #[test]
    fn single_peak_within_margins() {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..2000 {
            let p = gen_peaks(&mut rng, 1, 555, &cfg).unwrap();
            assert_eq!(p.len(), 1);
            assert!(p[0].center >= 5.0 && p[0].center <= 549.0);
        }
    }

    #[test]
    fn tight_mode_gap_bound_over_many_draws() {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut saw_tight = 0;
        for _ in 0..10_000 {
            let peaks = gen_peaks(&mut rng, 3, 555, &cfg).unwrap();
            let g1 = peaks[1].center - peaks[0].center;
            let g2 = peaks[2].center - peaks[1].center;
            assert!(g1 >= 1.0 && g2 >= 1.0);
            assert!(g1 <= 12.0 && g2 <= 12.0);
            if g1 <= 2.0 && g2 <= 2.0 {
                saw_tight += 1;
            }
        }
        // Tight draws are half of all draws; loose draws land under gap 2
        // only occasionally.
        assert!(saw_tight > 4000, "{saw_tight}");
    }

    #[test]
    fn rounded_centers_are_distinct_and_bounded() {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        for _ in 0..3000 {
            let peaks = gen_peaks(&mut rng, 11, 555, &cfg).unwrap();
            let mut rounded: Vec<i64> = peaks.iter().map(|p| p.center.round() as i64).collect();
            let before = rounded.len();
            rounded.dedup();
            assert_eq!(rounded.len(), before);
            for p in &peaks {
                assert!(p.center >= 5.0 && p.center <= 549.0, "{}", p.center);
            }
        }
    }

    #[test]
    fn parameter_draws_within_ranges() {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..500 {
            for p in gen_peaks(&mut rng, 5, 555, &cfg).unwrap() {
                assert!(p.amplitude >= 0.05 && p.amplitude <= 1.0);
                assert!(p.fwhm >= 3.0 && p.fwhm <= 60.0);
                assert!((0.0..=1.0).contains(&p.eta));
            }
        }
    }

    #[test]
    fn squeezes_into_short_spectra() {
        // 11 peaks in loose mode cannot span 12-unit gaps inside L=64;
        // placement must still succeed with every center in bounds.
        let mut c = cfg();
        c.length = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        for _ in 0..2000 {
            let peaks = gen_peaks(&mut rng, 11, 64, &c).unwrap();
            assert_eq!(peaks.len(), 11);
            for p in &peaks {
                assert!(p.center >= 5.0 && p.center <= 58.0, "{}", p.center);
            }
        }
    }
}
