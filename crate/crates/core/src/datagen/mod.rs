//! Procedural object-based scenes, their reference renders, and on-disk
//! evaluation sets.

mod bed;
mod dataset;
mod scene;
mod sources;
mod trajectory;

pub use bed::{gen_bed, BedKind, LFE_PASS_HZ, LFE_STOP_HZ};
pub use dataset::{
    excerpt_name, load_excerpt, make_eval_set, mix_file, read_manifest, write_scene, DatasetEntry, DatasetManifest,
    Excerpt, ExcerptManifest, MANIFEST,
};
#[allow(unused_imports)]
pub(crate) use dataset::{read_toml, write_toml};
pub use scene::{assemble_scene, sub_seed, Scene, SceneSpec};
pub use sources::{gen_source, SourceInfo, SourceKind, EDGE_FADE_SECONDS, SOURCE_RMS};
pub use trajectory::{gen_trajectory, max_acceleration, slow_motion_score, spline_through, TrajectorySpec, MARGIN};
