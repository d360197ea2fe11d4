//! RIFF WAVE ingestion and emission.
//!
//! Files are written as 32-bit float. Reading accepts 32-bit float and 16-,
//! 24- or 32-bit integer PCM. Channel labels are assigned from the channel
//! count: 1 → `M`, 2 → 2.0, 6 → 5.1, 8 → 7.1, 10 → 9.1.

use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use super::Waveform;
use crate::spatial::LayoutKind;
use crate::{Error, Result};

fn wav_err(path: &Path, source: hound::Error) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

pub fn labels_for(channels: usize) -> Vec<String> {
    let named = match channels {
        1 => Some(vec!["M"]),
        2 => Some(LayoutKind::Stereo.layout().labels().to_vec()),
        6 => Some(LayoutKind::Surround51.layout().labels().to_vec()),
        8 => Some(LayoutKind::Surround71.layout().labels().to_vec()),
        10 => Some(LayoutKind::Surround91.layout().labels().to_vec()),
        _ => None,
    };
    match named {
        Some(v) => v.into_iter().map(String::from).collect(),
        None => (0..channels).map(|c| format!("ch{c}")).collect(),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let nch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_err(path, e))?
        }
        (fmt, bits) => {
            return Err(Error::invalid(format!(
                "{}: unsupported sample format {fmt:?} / {bits} bits",
                path.display()
            )))
        }
    };
    if nch == 0 || interleaved.len() % nch != 0 {
        return Err(Error::invalid(format!("{}: ragged channel data", path.display())));
    }
    let frames = interleaved.len() / nch;
    let mut channels = vec![Vec::with_capacity(frames); nch];
    for frame in interleaved.chunks_exact(nch) {
        for (c, v) in frame.iter().enumerate() {
            channels[c].push(*v);
        }
    }
    let labels = labels_for(nch);
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    Waveform::with_rate(spec.sample_rate, &label_refs, channels)
}

/// Write as 32-bit float WAV.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: w.num_channels() as u16,
        sample_rate: w.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for i in 0..w.len() {
        for ch in &w.channels {
            writer.write_sample(ch[i] as f32).map_err(|e| wav_err(path, e))?;
        }
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}
