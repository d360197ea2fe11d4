use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bed::{gen_bed, BedKind};
use super::sources::{gen_source, SourceInfo, SourceKind, SOURCE_RMS};
use super::trajectory::{gen_trajectory, TrajectorySpec};
use crate::dsp::{self, StftTensor, Waveform, EXCERPT_LEN};
use crate::spatial::{render, LayoutKind, Trajectory};
use crate::{Error, ObjectProduction, ObjectTrack, Result};

/// Everything needed to synthesize one excerpt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub n_objects: usize,
    pub seed: u64,
    /// One kind per object, cycled if shorter. Empty picks procedural kinds
    /// at random.
    pub sources: Vec<SourceKind>,
    pub trajectory: TrajectorySpec,
    pub bed: BedKind,
    /// Bed level relative to the object level.
    pub bed_gain_db: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_objects: 1,
            seed: 0,
            sources: Vec::new(),
            trajectory: TrajectorySpec::default(),
            bed: BedKind::PinkNoise,
            bed_gain_db: 0.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_objects) {
            return Err(Error::Config(format!("n_objects {} outside 1..=3", self.n_objects)));
        }
        if !self.bed_gain_db.is_finite() {
            return Err(Error::Config("bed_gain_db must be finite".into()));
        }
        self.trajectory.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Decorrelated sub-seed for stream `stream` of `seed` (splitmix64
/// finalizer). The top bit is dropped so seeds survive TOML's signed
/// integers.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) >> 1
}

const STREAM_KINDS: u64 = 1;
const STREAM_BED: u64 = 2;
const STREAM_SOURCE: u64 = 100;
const STREAM_TRAJECTORY: u64 = 200;

/// A synthesized excerpt with its ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    /// Mono object signals (untrimmed), all at [`SOURCE_RMS`].
    pub sources: Vec<Waveform>,
    pub source_info: Vec<SourceInfo>,
    pub trajectories: Vec<Trajectory>,
    /// 5.1 bed.
    pub bed: Waveform,
    /// The same content in the STFT domain.
    pub production: ObjectProduction,
}

impl Scene {
    pub fn render_stft(&self, kind: LayoutKind) -> Result<StftTensor> {
        render(&self.production, kind)
    }

    pub fn render_wave(&self, kind: LayoutKind) -> Result<Waveform> {
        dsp::istft(&self.render_stft(kind)?, kind.layout().labels())
    }

    /// Time-domain renders for all four layouts.
    pub fn renders(&self) -> Result<BTreeMap<LayoutKind, Waveform>> {
        LayoutKind::ALL
            .into_iter()
            .map(|k| self.render_wave(k).map(|w| (k, w)))
            .collect()
    }
}

/// Synthesize sources, trajectories and bed, and wrap them as a production.
/// Every object has RMS [`SOURCE_RMS`]; the bed's positional channels share
/// that level scaled by `bed_gain_db`.
pub fn assemble_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut kind_rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, STREAM_KINDS));
    let mut sources = Vec::with_capacity(spec.n_objects);
    let mut source_info = Vec::with_capacity(spec.n_objects);
    let mut trajectories = Vec::with_capacity(spec.n_objects);
    let mut objects = Vec::with_capacity(spec.n_objects);
    for o in 0..spec.n_objects {
        let kind = if spec.sources.is_empty() {
            SourceKind::PROCEDURAL[kind_rng.gen_range(0..SourceKind::PROCEDURAL.len())].clone()
        } else {
            spec.sources[o % spec.sources.len()].clone()
        };
        let (w, info) = gen_source(&kind, sub_seed(spec.seed, STREAM_SOURCE + o as u64), EXCERPT_LEN)?;
        let traj = gen_trajectory(&spec.trajectory, sub_seed(spec.seed, STREAM_TRAJECTORY + o as u64))?;
        objects.push(ObjectTrack {
            track: dsp::stft(&w)?,
            trajectory: traj.clone(),
        });
        sources.push(w);
        source_info.push(info);
        trajectories.push(traj);
    }
    let level = SOURCE_RMS * 10f64.powf(spec.bed_gain_db / 20.0);
    let bed = gen_bed(&spec.bed, sub_seed(spec.seed, STREAM_BED), EXCERPT_LEN, level)?;
    let production = ObjectProduction::new(objects, dsp::stft(&bed)?)?;
    Ok(Scene {
        spec: spec.clone(),
        sources,
        source_info,
        trajectories,
        bed,
        production,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::trim;

    #[test]
    fn equal_levels_and_determinism() {
        let spec = SceneSpec { n_objects: 3, seed: 4, ..Default::default() };
        let a = assemble_scene(&spec).unwrap();
        for s in &a.sources {
            assert!((s.rms() - SOURCE_RMS).abs() < 1e-9);
        }
        let b = assemble_scene(&spec).unwrap();
        assert_eq!(a.production, b.production);
        assert_eq!(a.render_wave(LayoutKind::Surround71).unwrap(), b.render_wave(LayoutKind::Surround71).unwrap());
        assert_eq!(a.trajectories.len(), 3);
    }

    #[test]
    fn static_object_render_energy_follows_trim() {
        let spec = SceneSpec {
            n_objects: 1,
            seed: 9,
            sources: vec![SourceKind::Tone],
            trajectory: TrajectorySpec::static_object(),
            bed: BedKind::Silent,
            bed_gain_db: 0.0,
        };
        let s = assemble_scene(&spec).unwrap();
        let y = s.trajectories[0].positions[0].y;
        let mix = s.render_wave(LayoutKind::Surround51).unwrap();
        let e_mix: f64 = mix.channels.iter().flatten().map(|v| v * v).sum();
        let e_obj: f64 = s.sources[0].channels[0].iter().map(|v| v * v).sum();
        let ratio = e_mix / (e_obj * trim(y).powi(2));
        assert!((ratio - 1.0).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn bed_gain_scales_the_bed() {
        let spec = SceneSpec { bed_gain_db: -20.0, seed: 2, ..Default::default() };
        let s = assemble_scene(&spec).unwrap();
        let e: f64 = crate::dsp::POSITIONAL_51.iter().flat_map(|c| &s.bed.channels[*c]).map(|v| v * v).sum();
        let rms = (e / (5 * EXCERPT_LEN) as f64).sqrt();
        assert!((rms - 0.01).abs() < 1e-9);
    }

    #[test]
    fn sub_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..10 {
            for k in 0..10 {
                assert!(seen.insert(sub_seed(s, k)));
            }
        }
    }
}
