use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, wav, Waveform, SAMPLE_RATE};
use crate::{Error, Result};

/// RMS of every generated object track.
pub const SOURCE_RMS: f64 = 0.1;

/// Object signal generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceKind {
    /// Amplitude-modulated harmonic tone.
    Tone,
    /// Logarithmic sine sweep.
    Chirp,
    /// Band-passed pink noise under an on/off gate.
    NoiseBurst,
    /// Clicks at a jittered random rate.
    PulseTrain,
    /// Mono excerpt of a 48 kHz WAV file.
    Corpus { path: PathBuf },
}

impl SourceKind {
    pub const PROCEDURAL: [SourceKind; 4] = [
        SourceKind::Tone,
        SourceKind::Chirp,
        SourceKind::NoiseBurst,
        SourceKind::PulseTrain,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::Tone => "tone",
            SourceKind::Chirp => "chirp",
            SourceKind::NoiseBurst => "noise_burst",
            SourceKind::PulseTrain => "pulse_train",
            SourceKind::Corpus { .. } => "corpus",
        }
    }
}

/// What a generator drew, for manifests and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub kind: String,
    pub seed: u64,
    /// Fundamental of a tone, start/end of a chirp, band centre of a burst,
    /// mean rate of a pulse train.
    pub params: Vec<f64>,
}

/// Multiply the spectrum of `x` by a real, frequency-dependent gain.
pub(crate) fn shape_spectrum(x: &[f64], gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = SAMPLE_RATE as f64 / n as f64;
    for k in 0..n {
        let bin = k.min(n - k);
        buf[k] *= gain(bin as f64 * df);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Pink (1/f power) noise, high-passed between 10 and 20 Hz so that the
/// few lowest bins do not dominate the power.
pub(crate) fn pink_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    shape_spectrum(&gaussian(rng, n), |f| if f > 0.0 { ramp(f, 10.0, 20.0) / f.sqrt() } else { 0.0 })
}

pub(crate) fn normalize_rms(x: &mut [f64], target: f64) -> Result<()> {
    let r = dsp::rms(x);
    if r <= 0.0 {
        return Err(Error::invalid("cannot normalize a silent signal"));
    }
    let g = target / r;
    x.iter_mut().for_each(|v| *v *= g);
    Ok(())
}

/// Length of the fade applied at both ends of every generated signal.
pub const EDGE_FADE_SECONDS: f64 = 0.01;

/// Raised-cosine fade-in and fade-out of [`EDGE_FADE_SECONDS`].
pub(crate) fn edge_fade(x: &mut [f64]) {
    let n = (EDGE_FADE_SECONDS * SAMPLE_RATE as f64) as usize;
    let len = x.len();
    for i in 0..n.min(len) {
        let g = ramp(i as f64, 0.0, n as f64);
        x[i] *= g;
        x[len - 1 - i] *= g;
    }
}

/// Raised-cosine ramp from 0 at `a` to 1 at `b`.
pub(crate) fn ramp(v: f64, a: f64, b: f64) -> f64 {
    if v <= a {
        0.0
    } else if v >= b {
        1.0
    } else {
        0.5 - 0.5 * (PI * (v - a) / (b - a)).cos()
    }
}

fn tone(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let sr = SAMPLE_RATE as f64;
    let f0 = rng.gen_range(200.0..=4000.0);
    let am_rate = rng.gen_range(0.5..4.0);
    let am_depth = rng.gen_range(0.2..0.6);
    let phase: [f64; 4] = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
    let partials = [(1.0, 1.0), (2.0, 0.3), (3.0, 0.12)];
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = 1.0 + am_depth * (2.0 * PI * am_rate * t + phase[0]).sin();
            let s: f64 = partials
                .iter()
                .enumerate()
                .filter(|(_, (k, _))| k * f0 < sr / 2.0)
                .map(|(j, (k, a))| a * (2.0 * PI * k * f0 * t + phase[j + 1]).sin())
                .sum();
            env * s
        })
        .collect();
    (x, vec![f0])
}

fn chirp(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let sr = SAMPLE_RATE as f64;
    let lo: f64 = rng.gen_range(100.0..400.0);
    let hi: f64 = rng.gen_range(2000.0..8000.0);
    let (f1, f2) = if rng.gen_bool(0.5) { (lo, hi) } else { (hi, lo) };
    let dur = n as f64 / sr;
    let k = (f2 / f1).ln();
    let phi0 = rng.gen_range(0.0..2.0 * PI);
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            (2.0 * PI * f1 * dur / k * ((k * t / dur).exp() - 1.0) + phi0).sin()
        })
        .collect();
    (x, vec![f1, f2])
}

fn noise_burst(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let sr = SAMPLE_RATE as f64;
    let centre: f64 = rng.gen_range(300f64.ln()..6000f64.ln()).exp();
    let (lo, hi) = (centre / 2f64.sqrt(), centre * 2f64.sqrt());
    let noise = gaussian(rng, n);
    // One octave passband with half-octave raised-cosine skirts, pink slope.
    let mut x = shape_spectrum(&noise, |f| {
        if f <= 0.0 {
            return 0.0;
        }
        let skirt = ramp(f, lo / 2f64.sqrt(), lo) * (1.0 - ramp(f, hi, hi * 2f64.sqrt()));
        skirt / f.sqrt()
    });
    // Gate: alternate on/off segments with 10 ms ramps, starting on.
    let ramp_len = 0.01 * sr;
    let mut gate = vec![0.0; n];
    let mut start = 0usize;
    let mut on = true;
    while start < n {
        let dur = if on { rng.gen_range(0.3..1.0) } else { rng.gen_range(0.1..0.5) };
        let len = (dur * sr) as usize;
        let end = (start + len).min(n);
        if on {
            for (i, g) in gate[start..end].iter_mut().enumerate() {
                let a = ramp(i as f64, 0.0, ramp_len);
                let b = ramp((len - i) as f64, 0.0, ramp_len);
                *g = a.min(b);
            }
        }
        start = end;
        on = !on;
    }
    x.iter_mut().zip(&gate).for_each(|(v, g)| *v *= g);
    (x, vec![centre])
}

fn pulse_train(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let sr = SAMPLE_RATE as f64;
    let rate = rng.gen_range(2.0..20.0);
    let click_len = (0.01 * sr) as usize;
    let tau = 0.0015 * sr;
    let mut x = vec![0.0; n];
    let mut pos = rng.gen_range(0.0..sr / rate);
    while (pos as usize) < n {
        let start = pos as usize;
        let amp = rng.gen_range(0.6..1.0);
        for i in 0..click_len.min(n - start) {
            let v: f64 = rng.sample(StandardNormal);
            x[start + i] += amp * v * (-(i as f64) / tau).exp();
        }
        pos += sr / rate * rng.gen_range(0.8..1.2);
    }
    (x, vec![rate])
}

pub(crate) fn read_corpus(path: &Path) -> Result<Waveform> {
    let w = wav::read_wav(path)?;
    if w.sample_rate != SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "{}: corpus files must be {SAMPLE_RATE} Hz, found {}",
            path.display(),
            w.sample_rate
        )));
    }
    if w.is_empty() {
        return Err(Error::MissingData(format!("{}: empty corpus file", path.display())));
    }
    Ok(w)
}

/// Take `n` samples per channel starting at a seed-chosen offset, looping
/// if the file is shorter.
pub(crate) fn corpus_excerpt(w: &Waveform, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let offset = if w.len() > n { rng.gen_range(0..=w.len() - n) } else { 0 };
    w.channels
        .iter()
        .map(|c| (0..n).map(|i| c[(offset + i) % c.len()]).collect())
        .collect()
}

/// Generate a mono source of `len` samples normalized to [`SOURCE_RMS`].
pub fn gen_source(kind: &SourceKind, seed: u64, len: usize) -> Result<(Waveform, SourceInfo)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, params) = match kind {
        SourceKind::Tone => tone(&mut rng, len),
        SourceKind::Chirp => chirp(&mut rng, len),
        SourceKind::NoiseBurst => noise_burst(&mut rng, len),
        SourceKind::PulseTrain => pulse_train(&mut rng, len),
        SourceKind::Corpus { path } => {
            let w = read_corpus(path)?;
            let chans = corpus_excerpt(&w, len, &mut rng);
            let mono = (0..len)
                .map(|i| chans.iter().map(|c| c[i]).sum::<f64>() / chans.len() as f64)
                .collect();
            (mono, vec![])
        }
    };
    edge_fade(&mut x);
    normalize_rms(&mut x, SOURCE_RMS)
        .map_err(|_| Error::MissingData(format!("{} source with seed {seed} is silent", kind.name())))?;
    let info = SourceInfo {
        kind: kind.name().to_string(),
        seed,
        params,
    };
    Ok((Waveform::mono(x)?, info))
}
