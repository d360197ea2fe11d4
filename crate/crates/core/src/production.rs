//! The object-based production format: the encoder's output and the
//! renderer's input.

use std::path::Path;

use crate::dsp::{self, wav, Complex64, StftTensor, Waveform, CHANNELS_51};
use crate::spatial::Trajectory;
use crate::{Error, Result};

/// A mono object track with its trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrack {
    /// Single-channel spectrogram.
    pub track: StftTensor,
    pub trajectory: Trajectory,
}

/// `n` audio objects plus a 5.1 bed, all in the STFT domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectProduction {
    pub objects: Vec<ObjectTrack>,
    /// Six channels in 5.1 order (L, R, C, LFE, Ls, Rs).
    pub bed: StftTensor,
}

impl ObjectProduction {
    pub fn new(objects: Vec<ObjectTrack>, bed: StftTensor) -> Result<Self> {
        let p = Self { objects, bed };
        p.validate()?;
        Ok(p)
    }

    pub fn frames(&self) -> usize {
        self.bed.frames()
    }

    pub fn freqs(&self) -> usize {
        self.bed.freqs()
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bed.channels() != 6 {
            return Err(Error::shape(format!(
                "bed must have 6 channels, has {}",
                self.bed.channels()
            )));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.track.channels() != 1
                || o.track.frames() != self.bed.frames()
                || o.track.freqs() != self.bed.freqs()
            {
                return Err(Error::shape(format!(
                    "object {i} track {:?} does not match bed {:?}",
                    o.track.shape(),
                    self.bed.shape()
                )));
            }
            o.trajectory.ensure_frames(self.bed.frames())?;
        }
        Ok(())
    }

    /// Resynthesize object tracks (mono) and the bed (5.1). Uses the
    /// floored inverse, since extracted spectra are generally inconsistent.
    pub fn to_waveforms(&self) -> Result<(Vec<Waveform>, Waveform)> {
        let objects = self
            .objects
            .iter()
            .map(|o| dsp::istft_stable(&o.track, &["M"]))
            .collect::<Result<Vec<_>>>()?;
        let bed = dsp::istft_stable(&self.bed, &CHANNELS_51)?;
        Ok((objects, bed))
    }
}

/// File names of object `o` in a production directory: mono WAV and
/// trajectory CSV.
pub fn object_files(o: usize) -> (String, String) {
    (format!("obj_{o}.wav"), format!("obj_{o}.csv"))
}

pub fn bed_file() -> &'static str {
    "bed.wav"
}

/// A production in the time domain, as stored on disk: `obj_{o}.wav` (mono),
/// `obj_{o}.csv` (`frame,x,y`) and `bed.wav` (5.1).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionFiles {
    pub objects: Vec<Waveform>,
    pub trajectories: Vec<Trajectory>,
    pub bed: Waveform,
}

impl ProductionFiles {
    pub fn from_production(p: &ObjectProduction) -> Result<Self> {
        let (objects, bed) = p.to_waveforms()?;
        Ok(Self {
            objects,
            trajectories: p.objects.iter().map(|o| o.trajectory.clone()).collect(),
            bed,
        })
    }

    /// Analyse the stored audio back into a production.
    pub fn to_production(&self) -> Result<ObjectProduction> {
        let objects = self
            .objects
            .iter()
            .zip(&self.trajectories)
            .map(|(w, t)| {
                Ok(ObjectTrack {
                    track: dsp::stft(w)?,
                    trajectory: t.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ObjectProduction::new(objects, dsp::stft(&self.bed)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.len() != self.trajectories.len() {
            return Err(Error::shape(format!(
                "{} object tracks for {} trajectories",
                self.objects.len(),
                self.trajectories.len()
            )));
        }
        self.bed.ensure_51()?;
        for (o, w) in self.objects.iter().enumerate() {
            if w.num_channels() != 1 {
                return Err(Error::shape(format!("object {o} has {} channels", w.num_channels())));
            }
            if w.len() != self.bed.len() {
                return Err(Error::Length {
                    expected: self.bed.len(),
                    actual: w.len(),
                });
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        std::fs::create_dir_all(dir)?;
        for (o, (w, t)) in self.objects.iter().zip(&self.trajectories).enumerate() {
            let (wav_name, csv_name) = object_files(o);
            wav::write_wav(dir.join(wav_name), w)?;
            t.write_csv(dir.join(csv_name))?;
        }
        wav::write_wav(dir.join(bed_file()), &self.bed)
    }

    /// Read a production directory. Objects are numbered from 0 without gaps;
    /// with `n_objects` set, exactly that many must be present.
    pub fn read(dir: &Path, n_objects: Option<usize>) -> Result<Self> {
        let bed_path = dir.join(bed_file());
        if !bed_path.is_file() {
            return Err(Error::MissingData(format!("{} is missing", bed_path.display())));
        }
        let bed = wav::read_wav(&bed_path)?;
        let mut objects = Vec::new();
        let mut trajectories = Vec::new();
        for o in 0.. {
            let (wav_name, csv_name) = object_files(o);
            let (wp, cp) = (dir.join(wav_name), dir.join(csv_name));
            let wanted = n_objects.map(|n| o < n);
            match (wp.is_file(), cp.is_file(), wanted) {
                (_, _, Some(false)) | (false, false, None) => break,
                (true, true, _) => {
                    objects.push(wav::read_wav(&wp)?);
                    trajectories.push(Trajectory::read_csv(&cp)?);
                }
                (true, false, _) | (false, _, Some(true)) => {
                    let missing = if wp.is_file() { cp } else { wp };
                    return Err(Error::MissingData(format!("{} is missing", missing.display())));
                }
                (false, true, None) => {
                    return Err(Error::MissingData(format!("{} is missing", wp.display())));
                }
            }
        }
        let p = Self {
            objects,
            trajectories,
            bed,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Gradient of a scalar with respect to every differentiable part of a
/// production. Complex entries hold `∂L/∂re + i ∂L/∂im`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionGrad {
    pub tracks: Vec<Vec<Complex64>>,
    /// `(∂L/∂x, ∂L/∂y)` per frame and object.
    pub trajectories: Vec<Vec<(f64, f64)>>,
    pub bed: Vec<Complex64>,
}

impl ProductionGrad {
    pub fn zeros_like(p: &ObjectProduction) -> Self {
        let n = p.frames() * p.freqs();
        Self {
            tracks: vec![vec![Complex64::new(0.0, 0.0); n]; p.n_objects()],
            trajectories: vec![vec![(0.0, 0.0); p.frames()]; p.n_objects()],
            bed: vec![Complex64::new(0.0, 0.0); p.bed.data().len()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        for z in self.tracks.iter_mut().flatten().chain(self.bed.iter_mut()) {
            *z *= s;
        }
        for p in self.trajectories.iter_mut().flatten() {
            p.0 *= s;
            p.1 *= s;
        }
    }

    /// Inner product with a perturbation direction of the same shape; used by
    /// directional finite-difference checks.
    pub fn dot(&self, other: &ProductionGrad) -> f64 {
        let c = |a: &[Complex64], b: &[Complex64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
        };
        let mut s = c(&self.bed, &other.bed);
        for (a, b) in self.tracks.iter().zip(&other.tracks) {
            s += c(a, b);
        }
        for (a, b) in self.trajectories.iter().zip(&other.trajectories) {
            s += a.iter().zip(b).map(|(p, q)| p.0 * q.0 + p.1 * q.1).sum::<f64>();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Position;

    fn files(n: usize) -> ProductionFiles {
        let len = 4096;
        let objects = (0..n)
            .map(|o| Waveform::mono((0..len).map(|i| ((i * (o + 3)) as f64 * 0.01).sin() * 0.25).collect()).unwrap())
            .collect();
        let trajectories = (0..n).map(|o| Trajectory::constant(Position::new(0.1 * o as f64, 0.5), 4)).collect();
        let mut bed = Waveform::silent(&CHANNELS_51, len);
        bed.channels[2][7] = 0.5;
        ProductionFiles {
            objects,
            trajectories,
            bed,
        }
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = files(3);
        p.write(dir.path()).unwrap();
        let back = ProductionFiles::read(dir.path(), None).unwrap();
        assert_eq!(back.objects.len(), 3);
        assert_eq!(back.trajectories, p.trajectories);
        assert_eq!(back.bed.channels[2][7], 0.5);
        assert!(ProductionFiles::read(dir.path(), Some(2)).unwrap().objects.len() == 2);
        assert!(matches!(ProductionFiles::read(dir.path(), Some(4)), Err(Error::MissingData(_))));
    }

    #[test]
    fn missing_pieces_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        files(2).write(dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("obj_1.csv")).unwrap();
        assert!(matches!(ProductionFiles::read(dir.path(), None), Err(Error::MissingData(_))));
        std::fs::remove_file(dir.path().join(bed_file())).unwrap();
        assert!(matches!(ProductionFiles::read(dir.path(), Some(1)), Err(Error::MissingData(_))));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let mut p = files(1);
        p.objects[0] = Waveform::mono(vec![0.0; 10]).unwrap();
        assert!(p.validate().is_err());
    }
}
