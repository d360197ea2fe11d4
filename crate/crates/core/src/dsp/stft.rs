use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Waveform;
use crate::{Error, Result};

/// Complex spectrogram, laid out `[channel][frame][freq]`.
#[derive(Clone, PartialEq)]
pub struct StftTensor {
    channels: usize,
    frames: usize,
    freqs: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for StftTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftTensor")
            .field("channels", &self.channels)
            .field("frames", &self.frames)
            .field("freqs", &self.freqs)
            .finish_non_exhaustive()
    }
}

impl StftTensor {
    pub fn zeros(channels: usize, frames: usize, freqs: usize) -> Self {
        Self {
            channels,
            frames,
            freqs,
            data: vec![Complex64::new(0.0, 0.0); channels * frames * freqs],
        }
    }

    pub fn from_data(channels: usize, frames: usize, freqs: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != channels * frames * freqs {
            return Err(Error::shape(format!(
                "{} values for a {channels}x{frames}x{freqs} tensor",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            frames,
            freqs,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.frames, self.freqs)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.frames * self.freqs;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.frames * self.freqs;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn frame(&self, c: usize, t: usize) -> &[Complex64] {
        let start = (c * self.frames + t) * self.freqs;
        &self.data[start..start + self.freqs]
    }

    pub fn frame_mut(&mut self, c: usize, t: usize) -> &mut [Complex64] {
        let start = (c * self.frames + t) * self.freqs;
        &mut self.data[start..start + self.freqs]
    }

    pub fn get(&self, c: usize, t: usize, f: usize) -> Complex64 {
        self.data[(c * self.frames + t) * self.freqs + f]
    }

    /// Tensor holding only the listed channels, in the given order.
    pub fn select_channels(&self, which: &[usize]) -> Self {
        let n = self.frames * self.freqs;
        let mut data = Vec::with_capacity(which.len() * n);
        for &c in which {
            data.extend_from_slice(self.channel(c));
        }
        Self {
            channels: which.len(),
            frames: self.frames,
            freqs: self.freqs,
            data,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &Self) -> Result<()> {
        self.ensure_shape(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
        Ok(())
    }

    pub fn mean_magnitude(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|z| super::magnitude(*z)).sum::<f64>() / self.data.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Periodic Hann window, `w[k] = 0.5 - 0.5 cos(2 pi k / n)`.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Normalizer floor of [`Stft::inverse_stable`].
pub const STABLE_FLOOR: f64 = 1e-3;

/// Centered STFT: the signal is zero-padded by `fft_size / 2` on both sides
/// and frame `t` is centered on sample `t * hop`. A signal of `n * hop`
/// samples gives exactly `n` frames.
///
/// Synthesis is weighted overlap-add with the analysis window, normalized by
/// the summed squared window, so `inverse(forward(x)) == x` for every sample
/// covered by at least one nonzero window tap.
pub struct Stft {
    fft_size: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        if fft_size < 2 || fft_size % 2 != 0 || hop == 0 || hop > fft_size {
            return Err(Error::invalid(format!(
                "fft_size {fft_size} / hop {hop} is not a valid STFT configuration"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_size,
            hop,
            window: hann_periodic(fft_size),
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn freqs(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn frames_for(&self, len: usize) -> Result<usize> {
        if len == 0 || len % self.hop != 0 {
            return Err(Error::invalid(format!(
                "signal length {len} is not a positive multiple of hop {}",
                self.hop
            )));
        }
        Ok(len / self.hop)
    }

    pub fn forward(&self, w: &Waveform) -> Result<StftTensor> {
        let len = w.len();
        let frames = self.frames_for(len)?;
        let freqs = self.freqs();
        let mut out = StftTensor::zeros(w.num_channels(), frames, freqs);
        for (c, x) in w.channels.iter().enumerate() {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite sample in channel {c}")));
            }
            self.forward_channel(x, out.channel_mut(c));
        }
        Ok(out)
    }

    /// Analyse one channel into `out` (`frames * freqs` values).
    pub fn forward_channel(&self, x: &[f64], out: &mut [Complex64]) {
        let n = self.fft_size;
        let half = n / 2;
        let freqs = self.freqs();
        let frames = out.len() / freqs;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            let origin = (t * self.hop) as isize - half as isize;
            for (k, b) in buf.iter_mut().enumerate() {
                let i = origin + k as isize;
                let v = if i >= 0 && (i as usize) < x.len() {
                    x[i as usize]
                } else {
                    0.0
                };
                *b = Complex64::new(v * self.window[k], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            out[t * freqs..(t + 1) * freqs].copy_from_slice(&buf[..freqs]);
        }
    }

    pub fn inverse(&self, s: &StftTensor, labels: &[&str]) -> Result<Waveform> {
        self.inverse_floored(s, labels, 0.0)
    }

    /// Inverse for spectrograms that need not be consistent, such as masked
    /// estimates. The squared-window normalizer is floored at
    /// [`STABLE_FLOOR`], which bounds the gain applied to the last half
    /// window where a single frame covers the signal. Samples there are
    /// attenuated towards zero instead of amplifying inconsistencies.
    pub fn inverse_stable(&self, s: &StftTensor, labels: &[&str]) -> Result<Waveform> {
        self.inverse_floored(s, labels, STABLE_FLOOR)
    }

    fn inverse_floored(&self, s: &StftTensor, labels: &[&str], floor: f64) -> Result<Waveform> {
        if s.freqs() != self.freqs() {
            return Err(Error::shape(format!(
                "tensor has {} bins, STFT expects {}",
                s.freqs(),
                self.freqs()
            )));
        }
        if labels.len() != s.channels() {
            return Err(Error::shape(format!(
                "{} labels for {} channels",
                labels.len(),
                s.channels()
            )));
        }
        let channels = (0..s.channels())
            .map(|c| self.overlap_add(s.channel(c), s.frames(), floor))
            .collect();
        Waveform::new(labels, channels)
    }

    /// Weighted overlap-add of one channel; output has `frames * hop` samples.
    pub fn inverse_channel(&self, spec: &[Complex64], frames: usize) -> Vec<f64> {
        self.overlap_add(spec, frames, 0.0)
    }

    fn overlap_add(&self, spec: &[Complex64], frames: usize, floor: f64) -> Vec<f64> {
        let n = self.fft_size;
        let half = n / 2;
        let freqs = self.freqs();
        let len = frames * self.hop;
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        for t in 0..frames {
            let frame = &spec[t * freqs..(t + 1) * freqs];
            buf[..freqs].copy_from_slice(frame);
            // Hermitian completion; imaginary parts of DC and Nyquist are dropped.
            buf[0].im = 0.0;
            buf[half].im = 0.0;
            for k in 1..half {
                buf[n - k] = frame[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let origin = (t * self.hop) as isize - half as isize;
            for k in 0..n {
                let i = origin + k as isize;
                if i < 0 || i as usize >= len {
                    continue;
                }
                let w = self.window[k];
                num[i as usize] += w * buf[k].re * scale;
                den[i as usize] += w * w;
            }
        }
        num.iter()
            .zip(&den)
            .map(|(a, d)| {
                let d = d.max(floor);
                if d > 0.0 {
                    a / d
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{EXCERPT_LEN, N_FRAMES, N_FREQS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standard() -> &'static Stft {
        crate::dsp::standard_stft()
    }

    #[test]
    fn zero_in_zero_out() {
        let w = Waveform::silent(&["M"], EXCERPT_LEN);
        let s = standard().forward(&w).unwrap();
        assert_eq!(s.shape(), (1, N_FRAMES, N_FREQS));
        assert!(s.data().iter().all(|z| z.norm() == 0.0));
        let back = standard().inverse(&s, &["M"]).unwrap();
        assert!(back.channels[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn impulse_gives_flat_window_peak() {
        let mut x = vec![0.0; EXCERPT_LEN];
        x[1024] = 1.0;
        let s = standard().forward(&Waveform::mono(x).unwrap()).unwrap();
        let peak = standard().window()[1024];
        assert_eq!(peak, 1.0);
        for f in 0..N_FREQS {
            assert!((s.get(0, 1, f).norm() - peak).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let x: Vec<f64> = (0..EXCERPT_LEN)
            .map(|n| (2.0 * PI * 1000.0 * n as f64 / 48_000.0).sin())
            .collect();
        let s = standard().forward(&Waveform::mono(x).unwrap()).unwrap();
        let mut mean = vec![0.0; N_FREQS];
        for t in 0..N_FRAMES {
            for (f, m) in mean.iter_mut().enumerate() {
                *m += s.get(0, t, f).norm();
            }
        }
        let argmax = mean
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, (1000.0_f64 * 2048.0 / 48_000.0).round() as usize);
        assert_eq!(argmax, 43);
    }

    #[test]
    fn wrong_length_rejected() {
        let w = Waveform::mono(vec![0.0; EXCERPT_LEN - 1]).unwrap();
        assert!(matches!(crate::dsp::stft(&w), Err(Error::Length { .. })));
    }

    #[test]
    fn nan_rejected() {
        let w = Waveform {
            sample_rate: 48_000,
            labels: vec!["M".into()],
            channels: vec![vec![f64::NAN; EXCERPT_LEN]],
        };
        assert!(matches!(crate::dsp::stft(&w), Err(Error::Validation(_))));
    }

    #[test]
    fn round_trip_standard() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..EXCERPT_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::mono(x.clone()).unwrap();
        let back = standard().inverse(&standard().forward(&w).unwrap(), &["M"]).unwrap();
        let err = x
            .iter()
            .zip(&back.channels[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn inverse_shape_errors() {
        let s = StftTensor::zeros(1, 4, 17);
        assert!(standard().inverse(&s, &["M"]).is_err());
        let s = StftTensor::zeros(2, 4, N_FREQS);
        assert!(standard().inverse(&s, &["M"]).is_err());
    }

    #[test]
    fn linearity() {
        let stft = Stft::new(64, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let sa = stft.forward(&Waveform::mono(a).unwrap()).unwrap();
        let sb = stft.forward(&Waveform::mono(b).unwrap()).unwrap();
        let sm = stft.forward(&Waveform::mono(mix).unwrap()).unwrap();
        for i in 0..sm.data().len() {
            let expect = sa.data()[i] * 2.0 - sb.data()[i] * 0.5;
            let scale = expect.norm().max(1.0);
            assert!((sm.data()[i] - expect).norm() / scale < 1e-9);
        }
    }

    #[test]
    fn stable_inverse_matches_exact_away_from_the_tail() {
        let stft = Stft::new(64, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..640).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = stft.forward(&Waveform::mono(x.clone()).unwrap()).unwrap();
        let exact = stft.inverse(&s, &["M"]).unwrap();
        let stable = stft.inverse_stable(&s, &["M"]).unwrap();
        // Only the last hop is covered by a single window.
        for i in 0..640 - 32 {
            assert_eq!(exact.channels[0][i], stable.channels[0][i]);
        }
        for (i, (a, b)) in x.iter().zip(&stable.channels[0]).enumerate() {
            assert!(b.abs() <= a.abs() + 1e-12, "sample {i} grew");
        }
    }

    #[test]
    fn stable_inverse_bounds_inconsistent_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = StftTensor::zeros(1, N_FRAMES, N_FREQS);
        for z in s.data_mut() {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let exact = standard().inverse(&s, &["M"]).unwrap();
        let stable = standard().inverse_stable(&s, &["M"]).unwrap();
        let peak = |w: &Waveform| w.channels[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let interior = stable.channels[0][..EXCERPT_LEN - 1024].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak(&exact) > 100.0 * interior);
        assert!(peak(&stable) < 20.0 * interior);
    }
}
