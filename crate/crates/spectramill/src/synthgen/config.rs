//! Generator configuration with per-task pinned defaults.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Denoiser,
    BaselineRemover,
    PeakLocator,
    PeakFitter,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::Denoiser,
        Task::BaselineRemover,
        Task::PeakLocator,
        Task::PeakFitter,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Denoiser => "denoiser",
            Task::BaselineRemover => "baseline-remover",
            Task::PeakLocator => "peak-locator",
            Task::PeakFitter => "peak-fitter",
        }
    }

    pub fn from_name(s: &str) -> Result<Task> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'")))
    }

    /// Model input channels: raw + two derivatives, plus the location
    /// channel for the fitter.
    pub fn input_channels(&self) -> usize {
        match self {
            Task::PeakFitter => 4,
            _ => 3,
        }
    }

    pub fn output_channels(&self) -> usize {
        match self {
            Task::PeakFitter => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One layer of Beta(1,2)-distributed dent noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaNoise {
    pub prob: f64,
    pub mag_range: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftProbs {
    pub one: f64,
    pub two: f64,
}

/// Full recipe for one task's synthetic data. `for_task` pins the published
/// per-task lists; the fields stay writable so reduced configs (short
/// spectra, restricted noise) can be derived for studies and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub task: Task,
    pub length: usize,
    pub n_peaks_range: (usize, usize),
    pub slope_coeffs: Vec<f64>,
    pub gauss_stds: Vec<f64>,
    pub beta1: BetaNoise,
    /// Large-magnitude dent layer; present only for the denoising and
    /// baseline tasks.
    pub beta2: Option<BetaNoise>,
    pub shift_probs: ShiftProbs,
    pub tweak_enabled: bool,
    pub shadow_enabled: bool,
    pub amplitude_range: (f64, f64),
    /// FWHM draw range in index units.
    pub fwhm_range: (f64, f64),
    pub seed: u64,
}

impl GenConfig {
    pub fn for_task(task: Task, seed: u64) -> Self {
        let heavy = matches!(task, Task::Denoiser | Task::BaselineRemover);
        GenConfig {
            task,
            length: crate::spectral::DEFAULT_LEN,
            n_peaks_range: (1, 11),
            slope_coeffs: if heavy {
                vec![0.1, 1.0, 3.0, 6.0, 9.0, 14.0, 20.0, 27.0, 35.0]
            } else {
                vec![0.2, 1.0, 3.0, 5.0, 7.0, 9.0]
            },
            gauss_stds: if task == Task::Denoiser {
                vec![0.0, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.15]
            } else {
                vec![0.0, 0.0001, 0.0005, 0.001]
            },
            beta1: BetaNoise { prob: 0.5, mag_range: (0.001, 0.004) },
            beta2: heavy.then_some(BetaNoise { prob: 0.5, mag_range: (0.005, 0.025) }),
            shift_probs: ShiftProbs { one: 0.12, two: 0.04 },
            tweak_enabled: !heavy,
            shadow_enabled: task == Task::PeakFitter,
            amplitude_range: (0.05, 1.0),
            fwhm_range: (3.0, 60.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 32 {
            return Err(Error::Config(format!(
                "spectrum length must be >= 32, got {}",
                self.length
            )));
        }
        let (lo, hi) = self.n_peaks_range;
        if lo < 1 || hi < lo {
            return Err(Error::Config(format!("bad peak count range [{lo}, {hi}]")));
        }
        if self.slope_coeffs.is_empty() || self.gauss_stds.is_empty() {
            return Err(Error::Config("slope and noise lists must be non-empty".into()));
        }
        if self.slope_coeffs.iter().any(|s| *s < 0.0) {
            return Err(Error::Config("slope coefficients must be >= 0".into()));
        }
        if !(self.amplitude_range.0 > 0.0 && self.amplitude_range.1 >= self.amplitude_range.0) {
            return Err(Error::Config("bad amplitude range".into()));
        }
        if !(self.fwhm_range.0 >= 1.0 && self.fwhm_range.1 >= self.fwhm_range.0) {
            return Err(Error::Config("fwhm range must start at >= 1 index unit".into()));
        }
        for p in [self.shift_probs.one, self.shift_probs.two, self.beta1.prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} out of [0,1]")));
            }
        }
        let heavy = matches!(self.task, Task::Denoiser | Task::BaselineRemover);
        if heavy && self.beta2.is_none() {
            return Err(Error::Config(format!(
                "{} requires the second dent-noise layer",
                self.task
            )));
        }
        if !heavy && self.beta2.is_some() {
            return Err(Error::Config(format!(
                "{} omits the second dent-noise layer",
                self.task
            )));
        }
        Ok(())
    }

    /// Independent deterministic stream for one sample.
    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Peak count for a sample index: counts cycle so every value in the
    /// range is represented equally over a full dataset.
    pub fn n_peaks_for_index(&self, index: u64) -> usize {
        let (lo, hi) = self.n_peaks_range;
        lo + (index % (hi - lo + 1) as u64) as usize
    }
}
