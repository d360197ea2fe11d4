use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sources::{corpus_excerpt, edge_fade, gaussian, pink_noise, ramp, read_corpus, shape_spectrum};
use crate::dsp::{self, Waveform, CHANNELS_51, LFE_51, POSITIONAL_51};
use crate::{Error, Result};

/// LFE content is flat below this frequency...
pub const LFE_PASS_HZ: f64 = 80.0;
/// ...and zero above this one.
pub const LFE_STOP_HZ: f64 = 120.0;

/// Bed signal generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BedKind {
    /// Independent pink noise per positional channel plus low-passed LFE noise.
    PinkNoise,
    /// No bed at all.
    Silent,
    /// Excerpt of a six-channel 5.1 recording.
    Corpus { path: PathBuf },
}

impl BedKind {
    pub fn name(&self) -> &'static str {
        match self {
            BedKind::PinkNoise => "pink_noise",
            BedKind::Silent => "silent",
            BedKind::Corpus { .. } => "corpus",
        }
    }
}

/// Generate a 5.1 bed whose positional channels have aggregate RMS `level`.
pub fn gen_bed(kind: &BedKind, seed: u64, len: usize, level: f64) -> Result<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chans = match kind {
        BedKind::Silent => return Ok(Waveform::silent(&CHANNELS_51, len)),
        BedKind::PinkNoise => {
            let mut chans = vec![Vec::new(); 6];
            for c in POSITIONAL_51 {
                chans[c] = pink_noise(&mut rng, len);
                edge_fade(&mut chans[c]);
                let r = dsp::rms(&chans[c]);
                chans[c].iter_mut().for_each(|v| *v /= r);
            }
            let white = gaussian(&mut rng, len);
            let mut lfe = shape_spectrum(&white, |f| 1.0 - ramp(f, LFE_PASS_HZ, LFE_STOP_HZ));
            edge_fade(&mut lfe);
            let r = dsp::rms(&lfe);
            lfe.iter_mut().for_each(|v| *v /= r);
            chans[LFE_51] = lfe;
            chans
        }
        BedKind::Corpus { path } => {
            let w = read_corpus(path)?;
            if !w.is_51() {
                return Err(Error::invalid(format!(
                    "{}: bed corpus must be a 6-channel 5.1 file",
                    path.display()
                )));
            }
            let mut chans = corpus_excerpt(&w, len, &mut rng);
            chans.iter_mut().for_each(|c| edge_fade(c));
            chans
        }
    };
    let energy: f64 = POSITIONAL_51.iter().flat_map(|c| &chans[*c]).map(|v| v * v).sum();
    let aggregate = (energy / (5 * len.max(1)) as f64).sqrt();
    if aggregate <= 0.0 {
        return Err(Error::MissingData(format!("{} bed with seed {seed} is silent", kind.name())));
    }
    let g = level / aggregate;
    chans.iter_mut().flatten().for_each(|v| *v *= g);
    Waveform::new(&CHANNELS_51, chans)
}
