use super::StftTensor;
use crate::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone)]
struct Band {
    start: usize,
    weights: Vec<f64>,
}

/// Triangular mel filterbank with centers uniformly spaced in mel.
///
/// Band `b` rises from point `b` to point `b + 1` and falls to point `b + 2`
/// of `n_bands + 2` mel-spaced points spanning `0..=f_max`. The first band is
/// held at 1 below its center and the last band at 1 above its center, so
/// every bin from DC to Nyquist has some positive weight.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_bands: usize,
    n_freqs: usize,
    bin_hz: f64,
    centers_hz: Vec<f64>,
    bands: Vec<Band>,
    col_sum: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_bands: usize, n_freqs: usize, sample_rate: f64, f_max: f64) -> Result<Self> {
        if n_bands == 0 || n_bands >= n_freqs {
            return Err(Error::invalid(format!(
                "need 0 < n_bands ({n_bands}) < n_freqs ({n_freqs})"
            )));
        }
        let nyquist = sample_rate / 2.0;
        if !(f_max > 0.0 && f_max <= nyquist) {
            return Err(Error::invalid(format!("f_max {f_max} outside (0, {nyquist}]")));
        }
        let bin_hz = nyquist / (n_freqs - 1) as f64;
        let mel_max = hz_to_mel(f_max);
        let points: Vec<f64> = (0..n_bands + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_bands + 1) as f64))
            .collect();

        let mut bands = Vec::with_capacity(n_bands);
        for b in 0..n_bands {
            let (lo, center, hi) = (points[b], points[b + 1], points[b + 2]);
            let first = b == 0;
            let last = b == n_bands - 1;
            let weight = |f: f64| -> f64 {
                if f <= center {
                    if first {
                        1.0
                    } else if f > lo {
                        (f - lo) / (center - lo)
                    } else {
                        0.0
                    }
                } else if last {
                    1.0
                } else if f < hi {
                    (hi - f) / (hi - center)
                } else {
                    0.0
                }
            };
            let all: Vec<f64> = (0..n_freqs).map(|k| weight(k as f64 * bin_hz)).collect();
            let start = all.iter().position(|w| *w > 0.0).unwrap_or(0);
            let end = all.iter().rposition(|w| *w > 0.0).map_or(start, |e| e + 1);
            bands.push(Band {
                start,
                weights: all[start..end].to_vec(),
            });
        }

        // Column sums accumulate in ascending band order; broadcast() uses the
        // same order so an all-ones mask normalizes to exactly one.
        let mut col_sum = vec![0.0; n_freqs];
        for band in &bands {
            for (i, w) in band.weights.iter().enumerate() {
                col_sum[band.start + i] += w;
            }
        }
        if let Some(f) = col_sum.iter().position(|s| *s <= 0.0) {
            return Err(Error::invalid(format!("frequency bin {f} is not covered by any band")));
        }

        Ok(Self {
            n_bands,
            n_freqs,
            bin_hz,
            centers_hz: points[1..=n_bands].to_vec(),
            bands,
            col_sum,
        })
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn n_freqs(&self) -> usize {
        self.n_freqs
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn center_hz(&self, band: usize) -> f64 {
        self.centers_hz[band]
    }

    pub fn weight(&self, band: usize, freq: usize) -> f64 {
        let b = &self.bands[band];
        if freq < b.start || freq >= b.start + b.weights.len() {
            0.0
        } else {
            b.weights[freq - b.start]
        }
    }

    /// Total weight received by a linear bin.
    pub fn column_sum(&self, freq: usize) -> f64 {
        self.col_sum[freq]
    }

    pub fn band_sum(&self, band: usize) -> f64 {
        self.bands[band].weights.iter().sum()
    }

    /// `out[b] = sum_f w[b][f] * x[f]`
    pub fn project(&self, x: &[f64], out: &mut [f64]) {
        for (o, band) in out.iter_mut().zip(&self.bands) {
            *o = band
                .weights
                .iter()
                .zip(&x[band.start..])
                .map(|(w, v)| w * v)
                .sum();
        }
    }

    /// `out[f] += sum_b w[b][f] * y[b]` (transpose of [`project`](Self::project)).
    pub fn project_transpose_add(&self, y: &[f64], out: &mut [f64]) {
        for (yb, band) in y.iter().zip(&self.bands) {
            for (o, w) in out[band.start..].iter_mut().zip(&band.weights) {
                *o += w * yb;
            }
        }
    }

    /// Broadcast a mel-domain mask to linear bins with column-normalized
    /// weights: `linear[f] = sum_b m[b] w[b][f] / sum_b w[b][f]`.
    pub fn broadcast(&self, mel_mask: &[f64], linear: &mut [f64]) {
        linear.iter_mut().for_each(|v| *v = 0.0);
        self.project_transpose_add(mel_mask, linear);
        for (v, s) in linear.iter_mut().zip(&self.col_sum) {
            *v /= s;
        }
    }

    /// Adjoint of [`broadcast`](Self::broadcast): `dm[b] = sum_f dlin[f] w[b][f] / colsum[f]`.
    pub fn broadcast_adjoint(&self, dlinear: &[f64], dmel: &mut [f64]) {
        for (d, band) in dmel.iter_mut().zip(&self.bands) {
            *d = band
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let f = band.start + i;
                    dlinear[f] * w / self.col_sum[f]
                })
                .sum();
        }
    }

    pub fn melgram(&self, s: &StftTensor) -> Result<MelGram> {
        if s.freqs() != self.n_freqs {
            return Err(Error::shape(format!(
                "tensor has {} bins, filterbank expects {}",
                s.freqs(),
                self.n_freqs
            )));
        }
        let mut power = vec![0.0; s.channels() * s.frames() * self.n_bands];
        let mut mag2 = vec![0.0; self.n_freqs];
        for c in 0..s.channels() {
            for t in 0..s.frames() {
                for (m, z) in mag2.iter_mut().zip(s.frame(c, t)) {
                    *m = z.norm_sqr();
                }
                let o = (c * s.frames() + t) * self.n_bands;
                self.project(&mag2, &mut power[o..o + self.n_bands]);
            }
        }
        Ok(MelGram {
            channels: s.channels(),
            frames: s.frames(),
            bands: self.n_bands,
            power,
        })
    }
}

/// Mel-banded power, laid out `[channel][frame][band]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelGram {
    pub channels: usize,
    pub frames: usize,
    pub bands: usize,
    pub power: Vec<f64>,
}

impl MelGram {
    pub fn frame(&self, c: usize, t: usize) -> &[f64] {
        let o = (c * self.frames + t) * self.bands;
        &self.power[o..o + self.bands]
    }

    /// Elementwise `ln(1 + p)`, the network input compression.
    pub fn log1p(&self) -> Vec<f64> {
        self.power.iter().map(|p| p.ln_1p()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{standard_filterbank, Complex64, N_FREQS};

    #[test]
    fn first_band_covers_dc() {
        let fb = standard_filterbank();
        assert!(fb.weight(0, 0) > 0.0);
        assert_eq!(fb.weight(0, 0), 1.0);
        assert!(fb.weight(fb.n_bands() - 1, N_FREQS - 1) > 0.0);
    }

    #[test]
    fn coverage_and_positivity() {
        let fb = standard_filterbank();
        for f in 0..N_FREQS {
            assert!(fb.column_sum(f) > 0.0, "bin {f}");
        }
        for b in 0..fb.n_bands() {
            assert!(fb.band_sum(b) > 0.0, "band {b}");
            for f in 0..N_FREQS {
                assert!(fb.weight(b, f) >= 0.0);
            }
        }
    }

    #[test]
    fn band_64_center() {
        let fb = standard_filterbank();
        let expected = mel_to_hz(hz_to_mel(24_000.0) * 65.0 / 129.0);
        // Peak of the band's weights, located independently of the stored centers.
        let peak = (0..N_FREQS)
            .max_by(|a, b| fb.weight(64, *a).total_cmp(&fb.weight(64, *b)))
            .unwrap();
        assert!((peak as f64 * fb.bin_hz() - expected).abs() <= fb.bin_hz());
        assert!((fb.center_hz(64) - expected).abs() < 1e-9);
    }

    #[test]
    fn melgram_sparsity_and_white_frame() {
        let fb = standard_filterbank();
        let mut s = StftTensor::zeros(1, 2, N_FREQS);
        s.frame_mut(0, 0)[300] = Complex64::new(2.0, 0.0);
        s.frame_mut(0, 1).iter_mut().for_each(|z| *z = Complex64::new(0.6, 0.8));
        let m = fb.melgram(&s).unwrap();
        for b in 0..fb.n_bands() {
            let expect0 = fb.weight(b, 300) * 4.0;
            assert!((m.frame(0, 0)[b] - expect0).abs() < 1e-12);
            if fb.weight(b, 300) == 0.0 {
                assert_eq!(m.frame(0, 0)[b], 0.0);
            }
            let direct: f64 = (0..N_FREQS).map(|f| fb.weight(b, f)).sum();
            assert!((m.frame(0, 1)[b] - direct).abs() < 1e-9);
        }
        let zero = fb.melgram(&StftTensor::zeros(1, 2, N_FREQS)).unwrap();
        assert!(zero.power.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn melgram_rejects_mismatch() {
        let fb = standard_filterbank();
        assert!(fb.melgram(&StftTensor::zeros(1, 2, 100)).is_err());
    }

    #[test]
    fn broadcast_partition_of_unity() {
        let fb = standard_filterbank();
        let mut lin = vec![0.0; N_FREQS];
        fb.broadcast(&vec![1.0; fb.n_bands()], &mut lin);
        assert!(lin.iter().all(|v| *v == 1.0));
        fb.broadcast(&vec![0.0; fb.n_bands()], &mut lin);
        assert!(lin.iter().all(|v| *v == 0.0));
        let mut onehot = vec![0.0; fb.n_bands()];
        onehot[40] = 1.0;
        fb.broadcast(&onehot, &mut lin);
        for (f, v) in lin.iter().enumerate() {
            let share = fb.weight(40, f) / (0..fb.n_bands()).map(|b| fb.weight(b, f)).sum::<f64>();
            assert!((v - share).abs() < 1e-12);
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn broadcast_adjoint_matches_dense_transpose() {
        let fb = MelFilterbank::new(8, 65, 48_000.0, 24_000.0).unwrap();
        let m: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let d: Vec<f64> = (0..65).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut lin = vec![0.0; 65];
        fb.broadcast(&m, &mut lin);
        let mut dm = vec![0.0; 8];
        fb.broadcast_adjoint(&d, &mut dm);
        let lhs: f64 = lin.iter().zip(&d).map(|(a, b)| a * b).sum();
        let rhs: f64 = m.iter().zip(&dm).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn rejects_too_many_bands() {
        assert!(MelFilterbank::new(1025, 1025, 48_000.0, 24_000.0).is_err());
    }
}
