//! Multi-stage baseline drift and abrupt baseline shifts.
//!
//! A baseline is built from 1 to 10 primary regions, each subdivided into
//! chunks of 3 to 18 points. Every chunk ramps linearly or quadratically,
//! scaled by the product of the global slope coefficient and two uniform
//! multipliers, and each chunk starts where the previous one ended so the
//! curve is continuous. Shifts are applied separately, as step
//! discontinuities concentrated between one adjacent pair of points.

use super::config::GenConfig;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Worst-case total drift per unit of global slope, relative to a unit peak:
/// with both stage multipliers at their ceiling (1.99 each) and every chunk
/// ramping the same way, the accumulated drift is exactly
/// `global_slope * DRIFT_PER_SLOPE`, e.g. 2.961 at slope 35 and 0.7614 at 9.
pub const DRIFT_PER_SLOPE: f64 = 0.0846;

const MULT_LO: f64 = 0.01;
const MULT_HI: f64 = 1.99;

/// Per-chunk drift normalization; see `DRIFT_PER_SLOPE`.
const CHUNK_DRIFT: f64 = DRIFT_PER_SLOPE / (MULT_HI * MULT_HI);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChunkKind {
    Linear,
    /// Bend factor in (0.75, 0.95) or (1.05, 1.25); the chunk midpoint sits
    /// at `bend` times the linear midpoint rise.
    Quadratic { bend: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    /// Realized length in points (drawn from 3..=18, truncated at region
    /// boundaries).
    pub length: usize,
    pub flat: bool,
    pub inverted: bool,
    pub slope_mult: f64,
    pub kind: ChunkKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPlan {
    /// Realized length; zero when the region was truncated away.
    pub length: usize,
    pub flat: bool,
    pub slope_sign: f64,
    pub slope_mult: f64,
    pub chunks: Vec<ChunkPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePlan {
    pub global_slope: f64,
    pub regions: Vec<RegionPlan>,
}

/// Generate one baseline. Draw order per region: length factor, flat flag,
/// slope sign, slope multiplier; after all regions are sized, each realized
/// region draws its chunks in place (length, flat, inversion, multiplier,
/// kind, bend).
pub fn gen_baseline<R: Rng>(rng: &mut R, len: usize, global_slope: f64) -> (Vec<f64>, BaselinePlan) {
    let region_count = rng.random_range(1..=10usize);
    let nominal = len as f64 / region_count as f64;

    struct RegionDraw {
        length: usize,
        flat: bool,
        sign: f64,
        mult: f64,
    }
    let mut draws = Vec::with_capacity(region_count);
    for _ in 0..region_count {
        let factor = rng.random_range(0.5..2.0);
        let length = (nominal * factor).round() as usize;
        let flat = rng.random_bool(0.15);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mult = rng.random_range(MULT_LO..MULT_HI);
        draws.push(RegionDraw { length, flat, sign, mult });
    }
    // Overflow truncation / underfill extension onto exactly `len` points.
    let mut remaining = len;
    for (i, d) in draws.iter_mut().enumerate() {
        let realized = if i == region_count - 1 {
            remaining
        } else {
            d.length.min(remaining)
        };
        d.length = realized;
        remaining -= realized;
    }

    let mut values = vec![0.0; len];
    let mut regions = Vec::with_capacity(region_count);
    let mut pos = 0usize;
    let mut level = 0.0;
    for d in draws {
        let mut chunks = Vec::new();
        let mut filled = 0usize;
        while filled < d.length {
            let drawn = rng.random_range(3..=18usize);
            let length = drawn.min(d.length - filled);
            let flat = rng.random_bool(0.10);
            let inverted = rng.random_bool(0.10);
            let mult = rng.random_range(MULT_LO..MULT_HI);
            let kind = if rng.random_bool(0.5) {
                ChunkKind::Linear
            } else {
                let bend = if rng.random_bool(0.5) {
                    rng.random_range(0.75..0.95)
                } else {
                    rng.random_range(1.05..1.25)
                };
                ChunkKind::Quadratic { bend }
            };
            let chunk = ChunkPlan { length, flat, inverted, slope_mult: mult, kind };

            let rise = if d.flat || chunk.flat {
                0.0
            } else {
                let dir = d.sign * if inverted { -1.0 } else { 1.0 };
                dir * global_slope * d.mult * mult * CHUNK_DRIFT * (length as f64 / len as f64)
            };
            for j in 0..length {
                let t = (j + 1) as f64 / length as f64;
                let shape = match kind {
                    ChunkKind::Linear => t,
                    // Monotone for bend in (0.75, 1.25): shape' >= 0.5.
                    ChunkKind::Quadratic { bend } => t + 2.0 * (bend - 1.0) * t * (1.0 - t),
                };
                values[pos + j] = level + shape * rise;
            }
            level += rise;
            pos += length;
            filled += length;
            chunks.push(chunk);
        }
        regions.push(RegionPlan {
            length: d.length,
            flat: d.flat,
            slope_sign: d.sign,
            slope_mult: d.mult,
            chunks,
        });
    }

    (values, BaselinePlan { global_slope, regions })
}

/// Apply 0, 1, or 2 abrupt shifts to a normalized-frame baseline. Each shift
/// spans 2 to 5 window points; 65% to 90% of the signed magnitude lands on
/// one adjacent pair inside the window and the rest spreads over the other
/// pairs; everything after the window moves by the full magnitude. The
/// points immediately before and after the window each get a 50% chance of a
/// 10% bounce. Returns the shifted baseline and the inclusive window ranges.
pub fn apply_baseline_shift<R: Rng>(
    rng: &mut R,
    baseline: &[f64],
    cfg: &GenConfig,
) -> (Vec<f64>, Vec<(usize, usize)>) {
    let len = baseline.len();
    let mut out = baseline.to_vec();
    let u: f64 = rng.random();
    let count = if u < cfg.shift_probs.one {
        1
    } else if u < cfg.shift_probs.one + cfg.shift_probs.two {
        2
    } else {
        0
    };
    let mut windows = Vec::with_capacity(count);
    for _ in 0..count {
        let width = rng.random_range(2..=5usize);
        // Keep one point on each side for the bounce.
        let start = rng.random_range(1..len - width);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let magnitude = sign * rng.random_range(0.05..1.0);

        let gaps = width - 1;
        let mut increments = vec![0.0; gaps];
        if gaps == 1 {
            increments[0] = magnitude;
        } else {
            let primary = rng.random_range(0..gaps);
            let frac = rng.random_range(0.65..0.90);
            increments[primary] = magnitude * frac;
            let mut weights: Vec<f64> = (0..gaps - 1).map(|_| rng.random::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            if total > 0.0 {
                for w in &mut weights {
                    *w /= total;
                }
            } else {
                weights.fill(1.0 / (gaps - 1) as f64);
            }
            let mut wi = 0;
            for (g, inc) in increments.iter_mut().enumerate() {
                if g != primary {
                    *inc = magnitude * (1.0 - frac) * weights[wi];
                    wi += 1;
                }
            }
        }

        let mut running = 0.0;
        for (g, inc) in increments.iter().enumerate() {
            running += inc;
            out[start + g + 1] += running;
        }
        for v in out.iter_mut().skip(start + width) {
            *v += magnitude;
        }

        for side in [start.wrapping_sub(1), start + width] {
            if side < len {
                let bounce = rng.random_bool(0.5);
                let up = rng.random_bool(0.5);
                if bounce {
                    out[side] *= if up { 1.1 } else { 0.9 };
                }
            }
        }
        windows.push((start, start + width - 1));
    }
    (out, windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::Task;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_slope_gives_zero_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for _ in 0..50 {
            let (b, plan) = gen_baseline(&mut rng, 555, 0.0);
            assert!(b.iter().all(|v| *v == 0.0));
            assert_eq!(plan.global_slope, 0.0);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = gen_baseline(&mut ChaCha8Rng::seed_from_u64(201), 555, 9.0);
        let b = gen_baseline(&mut ChaCha8Rng::seed_from_u64(201), 555, 9.0);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn chunk_lengths_tile_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        for _ in 0..200 {
            let (b, plan) = gen_baseline(&mut rng, 555, 3.0);
            assert_eq!(b.len(), 555);
            let total: usize = plan
                .regions
                .iter()
                .flat_map(|r| r.chunks.iter().map(|c| c.length))
                .sum();
            assert_eq!(total, 555);
            assert!(plan.regions.len() <= 10 && !plan.regions.is_empty());
            for r in &plan.regions {
                let rsum: usize = r.chunks.iter().map(|c| c.length).sum();
                assert_eq!(rsum, r.length);
                for c in &r.chunks {
                    assert!(c.length <= 18);
                    if let ChunkKind::Quadratic { bend } = c.kind {
                        assert!(
                            (0.75..0.95).contains(&bend) || (1.05..1.25).contains(&bend),
                            "{bend}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn drift_bounded_by_slope_ceiling() {
        let mut rng = ChaCha8Rng::seed_from_u64(203);
        for &slope in &[0.2, 9.0, 35.0] {
            for _ in 0..200 {
                let (b, _) = gen_baseline(&mut rng, 555, slope);
                let max = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(max <= slope * DRIFT_PER_SLOPE + 1e-12, "slope {slope}: {max}");
            }
        }
    }

    #[test]
    fn baseline_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(204);
        for _ in 0..100 {
            let (b, _) = gen_baseline(&mut rng, 555, 35.0);
            // Rise per chunk scales with its length, so the per-point step
            // is at most max-shape-slope (1.5) times slope * drift / L.
            let bound = 1.5 * 35.0 * DRIFT_PER_SLOPE / 555.0 + 1e-15;
            for w in b.windows(2) {
                assert!((w[1] - w[0]).abs() <= bound, "{}", w[1] - w[0]);
            }
        }
    }

    #[test]
    fn flat_rates_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(205);
        let mut regions = 0usize;
        let mut flat_regions = 0usize;
        let mut chunks = 0usize;
        let mut flat_chunks = 0usize;
        let mut inverted = 0usize;
        for _ in 0..10_000 {
            let (_, plan) = gen_baseline(&mut rng, 555, 3.0);
            for r in &plan.regions {
                regions += 1;
                flat_regions += r.flat as usize;
                for c in &r.chunks {
                    chunks += 1;
                    flat_chunks += c.flat as usize;
                    inverted += c.inverted as usize;
                }
            }
        }
        let fr = flat_regions as f64 / regions as f64;
        let fc = flat_chunks as f64 / chunks as f64;
        let iv = inverted as f64 / chunks as f64;
        assert!((fr - 0.15).abs() < 0.015, "flat region rate {fr}");
        assert!((fc - 0.10).abs() < 0.015, "flat chunk rate {fc}");
        assert!((iv - 0.10).abs() < 0.015, "inversion rate {iv}");
    }

    #[test]
    fn no_shift_is_identity() {
        let cfg = GenConfig {
            shift_probs: crate::synthgen::ShiftProbs { one: 0.0, two: 0.0 },
            ..GenConfig::for_task(Task::Denoiser, 1)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(206);
        let base: Vec<f64> = (0..64).map(|i| i as f64 * 0.01).collect();
        let (out, windows) = apply_baseline_shift(&mut rng, &base, &cfg);
        assert_eq!(out, base);
        assert!(windows.is_empty());
    }

    #[test]
    fn single_shift_structure() {
        // Force exactly one shift and check the step profile against the
        // unshifted input: flat before the window, full magnitude after,
        // and the dominant increment between one adjacent pair.
        let cfg = GenConfig {
            shift_probs: crate::synthgen::ShiftProbs { one: 1.0, two: 0.0 },
            ..GenConfig::for_task(Task::Denoiser, 1)
        };
        let base = vec![0.0; 128];
        let mut rng = ChaCha8Rng::seed_from_u64(207);
        for _ in 0..500 {
            let (out, windows) = apply_baseline_shift(&mut rng, &base, &cfg);
            assert_eq!(windows.len(), 1);
            let (s, e) = windows[0];
            let width = e - s + 1;
            assert!((2..=5).contains(&width));
            // The last window point carries the full magnitude and never
            // takes a bounce; the first tail point (e + 1) may be scaled
            // by one.
            let m = out[e];
            assert!(m.abs() >= 0.05 && m.abs() <= 1.0);
            for i in 0..s {
                // A bounce before the window multiplies zero.
                assert_eq!(out[i], 0.0);
            }
            let tail = out[e + 1] / m;
            assert!(
                (tail - 1.0).abs() < 1e-12
                    || (tail - 1.1).abs() < 1e-12
                    || (tail - 0.9).abs() < 1e-12,
                "{tail}"
            );
            for i in e + 2..128 {
                // Tail points add the magnitude directly; the window end
                // accumulates the split increments, so allow rounding.
                assert!((out[i] - m).abs() < 1e-12, "{} vs {m}", out[i]);
            }
            let mut largest = 0.0f64;
            for i in s..e {
                let inc = out[i + 1] - out[i];
                if inc.abs() > largest.abs() {
                    largest = inc;
                }
            }
            let frac = largest / m;
            if width == 2 {
                assert!((frac - 1.0).abs() < 1e-12);
            } else {
                assert!((0.65..=0.90).contains(&frac), "{frac}");
            }
        }
    }

    #[test]
    fn shift_count_frequencies() {
        let cfg = GenConfig::for_task(Task::Denoiser, 1);
        let base = vec![0.0; 64];
        let mut rng = ChaCha8Rng::seed_from_u64(208);
        let mut counts = [0usize; 3];
        let n = 40_000;
        for _ in 0..n {
            let (_, w) = apply_baseline_shift(&mut rng, &base, &cfg);
            counts[w.len()] += 1;
        }
        let f = |k: usize| counts[k] as f64 / n as f64;
        assert!((f(0) - 0.84).abs() < 0.01, "{}", f(0));
        assert!((f(1) - 0.12).abs() < 0.01, "{}", f(1));
        assert!((f(2) - 0.04).abs() < 0.01, "{}", f(2));
    }
}
