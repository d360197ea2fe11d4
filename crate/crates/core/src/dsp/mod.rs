//! Spectral front and back end.
//!
//! The pipeline works on fixed excerpts of [`EXCERPT_LEN`] samples at
//! [`SAMPLE_RATE`], analysed with a 2048-point Hann STFT at hop 1024 into
//! [`N_FRAMES`] frames of [`N_FREQS`] bins, grouped into [`N_MEL_BANDS`] mel
//! bands. The generic types accept other sizes; the `standard_*` accessors
//! hand out the shared pipeline instances.

mod audio;
mod mask;
mod mel;
mod stft;
pub mod wav;

use std::sync::OnceLock;

pub use audio::{Waveform, CHANNELS_51, LFE_51, POSITIONAL_51};
pub(crate) use audio::rms;
pub use mask::{apply_mask, apply_mask_in_place};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank, MelGram};
pub use stft::{hann_periodic, Stft, StftTensor, STABLE_FLOOR};

pub use rustfft::num_complex::Complex64;

pub const SAMPLE_RATE: u32 = 48_000;
pub const FFT_SIZE: usize = 2048;
pub const HOP: usize = 1024;
pub const N_FREQS: usize = FFT_SIZE / 2 + 1;
pub const N_FRAMES: usize = 256;
/// 256 hops of 1024 samples, about 5.46 s.
pub const EXCERPT_LEN: usize = N_FRAMES * HOP;
pub const N_MEL_BANDS: usize = 128;
pub const F_MAX: f64 = SAMPLE_RATE as f64 / 2.0;

/// The pipeline STFT (2048 / 1024, periodic Hann).
pub fn standard_stft() -> &'static Stft {
    static STFT: OnceLock<Stft> = OnceLock::new();
    STFT.get_or_init(|| Stft::new(FFT_SIZE, HOP).expect("standard STFT parameters are valid"))
}

/// The pipeline mel filterbank (128 bands over 0..24 kHz).
pub fn standard_filterbank() -> &'static MelFilterbank {
    static FB: OnceLock<MelFilterbank> = OnceLock::new();
    FB.get_or_init(|| {
        MelFilterbank::new(N_MEL_BANDS, N_FREQS, SAMPLE_RATE as f64, F_MAX)
            .expect("standard filterbank parameters are valid")
    })
}

/// `|z|` without `hypot`'s overflow guard, which audio-range values never
/// need and which dominates the loss cost.
#[inline]
pub fn magnitude(z: Complex64) -> f64 {
    z.norm_sqr().sqrt()
}

/// Analyse a standard-length excerpt.
pub fn stft(w: &Waveform) -> crate::Result<StftTensor> {
    if w.sample_rate != SAMPLE_RATE {
        return Err(crate::Error::invalid(format!(
            "sample rate {} Hz, pipeline requires {SAMPLE_RATE} Hz",
            w.sample_rate
        )));
    }
    if w.len() != EXCERPT_LEN {
        return Err(crate::Error::Length {
            expected: EXCERPT_LEN,
            actual: w.len(),
        });
    }
    standard_stft().forward(w)
}

/// Resynthesize a standard tensor, labelling channels with `labels`.
pub fn istft(s: &StftTensor, labels: &[&str]) -> crate::Result<Waveform> {
    if s.frames() != N_FRAMES || s.freqs() != N_FREQS {
        return Err(crate::Error::shape(format!(
            "expected {N_FRAMES}x{N_FREQS} tensor, got {}x{}",
            s.frames(),
            s.freqs()
        )));
    }
    standard_stft().inverse(s, labels)
}

/// Power mel spectrogram with the pipeline filterbank.
pub fn to_melgram(s: &StftTensor) -> crate::Result<MelGram> {
    standard_filterbank().melgram(s)
}

/// As [`istft`] with the floored normalizer of [`Stft::inverse_stable`], for
/// masked or estimated spectrograms.
pub fn istft_stable(s: &StftTensor, labels: &[&str]) -> crate::Result<Waveform> {
    if s.frames() != N_FRAMES || s.freqs() != N_FREQS {
        return Err(crate::Error::shape(format!(
            "expected {N_FRAMES}x{N_FREQS} tensor, got {}x{}",
            s.frames(),
            s.freqs()
        )));
    }
    standard_stft().inverse_stable(s, labels)
}
