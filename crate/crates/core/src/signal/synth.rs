//! Deterministic synthetic stand-in for a multi-subject EMG dataset.
//!
//! Each gesture class gets its own per-channel tone (frequency and
//! amplitude). Subjects scale channel gains slightly and each record draws a
//! fresh phase per channel, plus white Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetIndex, EmgRecord, RecordMeta, SignalError};
use crate::config::{ConfigError, KeyValues};
use crate::exec;
use crate::gesture::GestureClass;

/// Signal recipe for one gesture class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRecipe {
    /// `(frequency Hz, amplitude mV)` per channel.
    pub tones: Vec<(f64, f64)>,
    /// Standard deviation of additive noise, mV.
    pub noise: f64,
}

impl ClassRecipe {
    /// Default tone layout: frequencies and channel amplitude patterns differ
    /// between classes so that windows are separable.
    pub fn default_for(class: usize, channels: usize, amplitude: f64, noise: f64) -> Self {
        let tones = (0..channels)
            .map(|c| {
                let freq = 15.0 + 12.0 * class as f64 + 2.5 * c as f64;
                let level = ((class * 5 + c * 3) % 8) as f64 / 7.0;
                (freq, amplitude * (0.35 + 0.65 * level))
            })
            .collect();
        Self { tones, noise }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub subjects: usize,
    pub gestures: usize,
    pub repetitions: usize,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub channels: usize,
    /// One recipe per gesture class.
    pub recipes: Vec<ClassRecipe>,
    /// Relative spread of per-subject channel gains (0.2 gives 0.8..1.2).
    pub subject_gain_spread: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Builds a spec with [`ClassRecipe::default_for`] recipes.
    #[allow(clippy::too_many_arguments)]
    pub fn with_default_recipes(
        subjects: usize,
        gestures: usize,
        repetitions: usize,
        duration_secs: f64,
        sample_rate: u32,
        amplitude: f64,
        noise: f64,
        seed: u64,
    ) -> Self {
        let channels = 8;
        Self {
            subjects,
            gestures,
            repetitions,
            duration_secs,
            sample_rate,
            channels,
            recipes: (0..gestures)
                .map(|g| ClassRecipe::default_for(g, channels, amplitude, noise))
                .collect(),
            subject_gain_spread: 0.2,
            seed,
        }
    }

    /// The reference dataset shape: 8 subjects, 15 gestures, 3 repetitions,
    /// 20 s at 2000 Hz.
    pub fn full_size(seed: u64) -> Self {
        Self::with_default_recipes(8, 15, 3, 20.0, 2000, 0.5, 0.05, seed)
    }

    /// Parses `subjects`, `gestures`, `repetitions`, `duration_secs`,
    /// `sample_rate`, `channels`, `amplitude`, `noise`,
    /// `subject_gain_spread` and `seed`; missing keys keep the
    /// [`SynthSpec::full_size`] values.
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self, ConfigError> {
        let mut s = Self::full_size(0);
        let (mut amplitude, mut noise) = (0.5, 0.05);
        kv.set("subjects", &mut s.subjects)?;
        kv.set("gestures", &mut s.gestures)?;
        kv.set("repetitions", &mut s.repetitions)?;
        kv.set("duration_secs", &mut s.duration_secs)?;
        kv.set("sample_rate", &mut s.sample_rate)?;
        kv.set("channels", &mut s.channels)?;
        kv.set("amplitude", &mut amplitude)?;
        kv.set("noise", &mut noise)?;
        kv.set("subject_gain_spread", &mut s.subject_gain_spread)?;
        kv.set("seed", &mut s.seed)?;
        kv.finish()?;
        s.recipes = (0..s.gestures)
            .map(|g| ClassRecipe::default_for(g, s.channels, amplitude, noise))
            .collect();
        Ok(s)
    }

    pub fn samples_per_record(&self) -> usize {
        (self.duration_secs * f64::from(self.sample_rate)).round() as usize
    }

    fn validate(&self) -> Result<(), SignalError> {
        if self.subjects == 0 || self.gestures == 0 || self.repetitions == 0 {
            return Err(SignalError::InvalidSynthSpec("counts must be at least 1"));
        }
        if self.gestures > crate::gesture::NUM_GESTURES {
            return Err(SignalError::InvalidSynthSpec(
                "more gestures than known classes",
            ));
        }
        if self.duration_secs <= 0.0 || !self.duration_secs.is_finite() {
            return Err(SignalError::InvalidSynthSpec("duration must be positive"));
        }
        if self.sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        if self.channels == 0 {
            return Err(SignalError::ZeroChannels);
        }
        if self.recipes.len() != self.gestures {
            return Err(SignalError::InvalidSynthSpec("need one recipe per gesture"));
        }
        if self.recipes.iter().any(|r| r.tones.len() != self.channels) {
            return Err(SignalError::InvalidSynthSpec(
                "recipe channel count mismatch",
            ));
        }
        if self.subjects > u16::MAX as usize || self.repetitions > u16::MAX as usize {
            return Err(SignalError::InvalidSynthSpec("count exceeds u16 id range"));
        }
        Ok(())
    }

    fn generate(&self, subject: usize, gesture: usize, repetition: usize) -> EmgRecord {
        let recipe = &self.recipes[gesture];
        let c = self.channels;
        let n = self.samples_per_record();
        let key = exec::derive_key(&[self.seed, subject as u64, gesture as u64, repetition as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let gains: Vec<f64> = (0..c)
            .map(|ch| {
                let k = exec::derive_key(&[self.seed, subject as u64, 0x5B_1EC7, ch as u64]);
                let u = (k >> 11) as f64 / (1u64 << 53) as f64;
                1.0 + self.subject_gain_spread * (2.0 * u - 1.0)
            })
            .collect();
        let phases: Vec<f64> = (0..c)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        let rate = f64::from(self.sample_rate);
        let mut samples = Vec::with_capacity(n * c);
        for t in 0..n {
            let time = t as f64 / rate;
            for ch in 0..c {
                let (freq, amp) = recipe.tones[ch];
                let mut v = 0.0;
                if amp != 0.0 {
                    v += gains[ch] * amp * (std::f64::consts::TAU * freq * time + phases[ch]).sin();
                }
                if recipe.noise != 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    v += recipe.noise * z;
                }
                samples.push(v as f32);
            }
        }
        let meta = RecordMeta {
            subject_id: subject as u16,
            gesture: GestureClass::new(gesture).expect("validated gesture count"),
            repetition: repetition as u16,
        };
        EmgRecord::new(c, self.sample_rate, samples, meta).expect("finite synthetic samples")
    }
}

/// Generates every (subject, gesture, repetition) record of `spec`.
pub fn synth_dataset(spec: &SynthSpec) -> Result<DatasetIndex, SignalError> {
    spec.validate()?;
    let per_subject = spec.gestures * spec.repetitions;
    let total = spec.subjects * per_subject;
    let records = exec::map_indexed(total, |i| {
        let subject = i / per_subject;
        let gesture = (i % per_subject) / spec.repetitions;
        let repetition = i % spec.repetitions;
        spec.generate(subject, gesture, repetition)
    });
    DatasetIndex::from_records(records)
}
