use crate::{Error, Result};

use super::SAMPLE_RATE;

/// WAV channel order for 5.1 material.
pub const CHANNELS_51: [&str; 6] = ["L", "R", "C", "LFE", "Ls", "Rs"];
/// Indices of the five positional channels of a 5.1 signal.
pub const POSITIONAL_51: [usize; 5] = [0, 1, 2, 4, 5];
pub const LFE_51: usize = 3;

/// Multichannel time-domain audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: u32,
    pub labels: Vec<String>,
    pub channels: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn new(labels: &[&str], channels: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_rate(SAMPLE_RATE, labels, channels)
    }

    pub fn with_rate(sample_rate: u32, labels: &[&str], channels: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != channels.len() {
            return Err(Error::shape(format!(
                "{} labels for {} channels",
                labels.len(),
                channels.len()
            )));
        }
        if let Some(first) = channels.first() {
            if let Some(bad) = channels.iter().position(|c| c.len() != first.len()) {
                return Err(Error::shape(format!(
                    "channel {bad} has {} samples, channel 0 has {}",
                    channels[bad].len(),
                    first.len()
                )));
            }
        }
        for (c, ch) in channels.iter().enumerate() {
            if let Some(i) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite sample at channel {c}, index {i}"
                )));
            }
        }
        Ok(Self {
            sample_rate,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            channels,
        })
    }

    pub fn mono(samples: Vec<f64>) -> Result<Self> {
        Self::new(&["M"], vec![samples])
    }

    pub fn silent(labels: &[&str], len: usize) -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            channels: vec![vec![0.0; len]; labels.len()],
        }
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.channels[i].as_slice())
    }

    /// True when the labels match the 5.1 order L, R, C, LFE, Ls, Rs.
    pub fn is_51(&self) -> bool {
        self.labels.len() == 6 && self.labels.iter().zip(CHANNELS_51).all(|(a, b)| a == b)
    }

    pub fn ensure_51(&self) -> Result<()> {
        if self.is_51() {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "expected 5.1 channels {CHANNELS_51:?}, got {:?}",
                self.labels
            )))
        }
    }

    pub fn rms(&self) -> f64 {
        let n: usize = self.channels.iter().map(Vec::len).sum();
        if n == 0 {
            return 0.0;
        }
        let e: f64 = self.channels.iter().flatten().map(|v| v * v).sum();
        (e / n as f64).sqrt()
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
