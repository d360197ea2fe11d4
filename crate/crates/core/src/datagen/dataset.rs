use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scene::{assemble_scene, sub_seed, Scene, SceneSpec};
use super::sources::{SourceInfo, SOURCE_RMS};
use crate::dsp::{self, wav, Waveform};
use crate::spatial::{LayoutKind, Trajectory};
use crate::production::{bed_file, ObjectProduction, object_files, ProductionFiles};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.toml";

/// Per-excerpt manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcerptManifest {
    pub name: String,
    pub seed: u64,
    pub n_objects: usize,
    pub object_rms: f64,
    pub bed_kind: String,
    pub bed_rms: f64,
    pub bed_gain_db: f64,
    pub sources: Vec<SourceInfo>,
}

/// Dataset-level manifest listing every excerpt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    pub n_objects: usize,
    pub excerpts: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub seed: u64,
}

pub fn excerpt_name(i: usize) -> String {
    format!("excerpt_{i:04}")
}

pub fn mix_file(kind: LayoutKind) -> String {
    format!("mix_{}.wav", kind.tag())
}

/// Write one scene in the dataset layout.
pub fn write_scene(dir: &Path, name: &str, scene: &Scene) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (kind, w) in scene.renders()? {
        wav::write_wav(dir.join(mix_file(kind)), &w)?;
    }
    ProductionFiles {
        objects: scene.sources.clone(),
        trajectories: scene.trajectories.clone(),
        bed: scene.bed.clone(),
    }
    .write(dir)?;
    let bed_positional: Vec<f64> = dsp::POSITIONAL_51
        .iter()
        .flat_map(|c| scene.bed.channels[*c].iter().copied())
        .collect();
    let manifest = ExcerptManifest {
        name: name.to_string(),
        seed: scene.spec.seed,
        n_objects: scene.spec.n_objects,
        object_rms: SOURCE_RMS,
        bed_kind: scene.spec.bed.name().to_string(),
        bed_rms: dsp::rms(&bed_positional),
        bed_gain_db: scene.spec.bed_gain_db,
        sources: scene.source_info.clone(),
    };
    write_toml(&dir.join(MANIFEST), &manifest)
}

pub(crate) fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub(crate) fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MissingData(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

/// Synthesize `n_excerpts` scenes from `template` into `dir`. Excerpt `i`
/// uses seed `sub_seed(seed, i)`; `jobs` worker threads split the excerpts.
pub fn make_eval_set(dir: &Path, n_excerpts: usize, template: &SceneSpec, seed: u64, jobs: usize) -> Result<DatasetManifest> {
    template.validate()?;
    std::fs::create_dir_all(dir)?;
    let entries: Vec<DatasetEntry> = (0..n_excerpts)
        .map(|i| DatasetEntry {
            name: excerpt_name(i),
            seed: sub_seed(seed, i as u64),
        })
        .collect();
    let work = |e: &DatasetEntry| -> Result<()> {
        let scene = assemble_scene(&template.with_seed(e.seed))?;
        write_scene(&dir.join(&e.name), &e.name, &scene)
    };
    crate::par::par_map(&entries, jobs, work)?.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        seed,
        n_objects: template.n_objects,
        excerpts: entries,
    };
    write_toml(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    read_toml(&dir.join(MANIFEST))
}

/// Ground truth and mixes of one excerpt, loaded from disk.
#[derive(Debug, Clone)]
pub struct Excerpt {
    pub dir: PathBuf,
    pub manifest: ExcerptManifest,
    pub mix51: Waveform,
    pub objects: Vec<Waveform>,
    pub trajectories: Vec<Trajectory>,
    pub bed: Waveform,
}

impl Excerpt {
    /// The ground-truth production in the STFT domain.
    pub fn truth(&self) -> Result<ObjectProduction> {
        ProductionFiles {
            objects: self.objects.clone(),
            trajectories: self.trajectories.clone(),
            bed: self.bed.clone(),
        }
        .to_production()
    }

    pub fn name(&self) -> &str {
        &self.manifest.name
    }
}

pub fn load_excerpt(dir: &Path) -> Result<Excerpt> {
    let manifest: ExcerptManifest = read_toml(&dir.join(MANIFEST))?;
    let need = |name: String| -> Result<PathBuf> {
        let p = dir.join(&name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingData(format!("{} is missing", p.display())))
        }
    };
    let mix51 = wav::read_wav(need(mix_file(LayoutKind::Surround51))?)?;
    mix51.ensure_51()?;
    let mut objects = Vec::new();
    let mut trajectories = Vec::new();
    for o in 0..manifest.n_objects {
        let (wav_name, csv_name) = object_files(o);
        objects.push(wav::read_wav(need(wav_name)?)?);
        trajectories.push(Trajectory::read_csv(need(csv_name)?)?);
    }
    let bed = wav::read_wav(need(bed_file().into())?)?;
    bed.ensure_51()?;
    Ok(Excerpt {
        dir: dir.to_path_buf(),
        manifest,
        mix51,
        objects,
        trajectories,
        bed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn eval_set_layout_and_reproducibility() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = SceneSpec { n_objects: 3, ..Default::default() };
        let m = make_eval_set(a.path(), 2, &spec, 7, 1).unwrap();
        make_eval_set(b.path(), 2, &spec, 7, 2).unwrap();
        assert_eq!(m.excerpts.len(), 2);
        assert_eq!(read_manifest(a.path()).unwrap(), m);
        let ex = a.path().join("excerpt_0001");
        for f in ["mix_20.wav", "mix_51.wav", "mix_71.wav", "mix_91.wav", "bed.wav", "manifest.toml"] {
            assert!(ex.join(f).is_file(), "{f}");
        }
        for o in 0..3 {
            assert!(ex.join(format!("obj_{o}.wav")).is_file());
            assert!(ex.join(format!("obj_{o}.csv")).is_file());
        }
        assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));
        let loaded = load_excerpt(&ex).unwrap();
        assert_eq!(loaded.objects.len(), 3);
        assert_eq!(loaded.mix51.num_channels(), 6);
        assert_eq!(loaded.manifest.sources.len(), 3);
    }

    #[test]
    fn missing_files_are_reported() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(load_excerpt(d.path()), Err(Error::MissingData(_))));
    }
}
