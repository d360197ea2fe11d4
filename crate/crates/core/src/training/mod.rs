//! Adam optimisation of the mask network in the three training modes:
//! supervised on synthetic productions, unsupervised fit to one excerpt,
//! and fine-tuning a supervised checkpoint on one excerpt.

mod adam;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{assemble_scene, sub_seed, Scene, SceneSpec};
use crate::dsp::{self, StftTensor, Waveform};
use crate::losses::{production_loss, render_refs, unsupervised_loss_grad, LayoutRefs, LossBreakdown, LossWeights};
use crate::model::{encode_backward, encode_stft, encode_traced, init_params, MaskNetConfig, ParamStore};
use crate::spatial::{DepanOptions, LayoutKind};
use crate::{Error, ObjectProduction, ProductionGrad, Result};

pub use adam::{adam_step, clip_grad_norm, AdamState, ADAM_EPS, BETA1, BETA2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Supervised,
    UnsupervisedFit,
    Finetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling applied before each update; 0 disables.
    pub clip_norm: f64,
    /// Write a checkpoint every this many steps (0: final only).
    pub checkpoint_every: usize,
    /// Supervised only: cycle through this many fixed scenes instead of
    /// drawing a fresh one per sample (0: always fresh).
    pub scene_pool: usize,
    pub loss: LossWeights,
    pub depan: DepanOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::supervised()
    }
}

impl TrainConfig {
    pub fn supervised() -> Self {
        Self {
            mode: TrainMode::Supervised,
            lr: 2e-4,
            batch: 8,
            steps: 200,
            seed: 0,
            clip_norm: 5.0,
            checkpoint_every: 0,
            scene_pool: 0,
            loss: LossWeights::default(),
            depan: DepanOptions::default(),
        }
    }

    pub fn unsupervised_fit() -> Self {
        Self {
            mode: TrainMode::UnsupervisedFit,
            batch: 1,
            steps: 500,
            ..Self::supervised()
        }
    }

    pub fn finetune() -> Self {
        Self {
            mode: TrainMode::Finetune,
            batch: 1,
            steps: 200,
            ..Self::supervised()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        if self.mode != TrainMode::Supervised && self.batch != 1 {
            return Err(Error::Config("single-excerpt modes use batch 1".into()));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::Config("clip_norm must be non-negative".into()));
        }
        self.loss.validate()
    }

    pub fn expect_mode(&self, mode: TrainMode) -> Result<()> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(Error::Config(format!("config mode {:?} used for {:?} training", self.mode, mode)))
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParamStore,
    /// One batch-mean breakdown per step, computed before that step's update.
    pub log: Vec<LossBreakdown>,
}

/// Forward, loss and backward for one supervised sample. Parameter
/// gradients are accumulated into `params`, scaled by `scale`.
pub fn supervised_grad(
    params: &mut ParamStore,
    mix51: &StftTensor,
    refs: &LayoutRefs,
    w: &LossWeights,
    depan: &DepanOptions,
    scale: f64,
) -> Result<LossBreakdown> {
    let (prod, trace) = encode_traced(params, mix51, depan)?;
    let mut g = ProductionGrad::zeros_like(&prod);
    let loss = production_loss(&prod, refs, mix51, w, Some(&mut g))?;
    g.scale(scale);
    encode_backward(params, mix51, &prod, &trace, &g)?;
    Ok(loss)
}

/// Forward, loss and backward for the unsupervised objective.
pub fn unsupervised_grad(
    params: &mut ParamStore,
    mix51: &StftTensor,
    w: &LossWeights,
    depan: &DepanOptions,
    scale: f64,
) -> Result<LossBreakdown> {
    let (prod, trace) = encode_traced(params, mix51, depan)?;
    let mut g = ProductionGrad::zeros_like(&prod);
    let loss = unsupervised_loss_grad(&prod, mix51, w, Some(&mut g))?;
    g.scale(scale);
    encode_backward(params, mix51, &prod, &trace, &g)?;
    Ok(loss)
}

pub const LOSS_LOG: &str = "loss.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const LAST_GOOD_CHECKPOINT: &str = "last_good.ckpt";

fn checkpoint_name(step: usize) -> String {
    format!("step_{step:06}.ckpt")
}

/// Loss log and checkpoint sink; inert without an output directory.
struct RunOutput {
    dir: Option<PathBuf>,
    csv: Option<BufWriter<File>>,
}

impl RunOutput {
    fn new(dir: Option<&Path>) -> Result<Self> {
        let csv = match dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                let mut f = BufWriter::new(File::create(d.join(LOSS_LOG))?);
                writeln!(f, "{}", LossBreakdown::csv_header())?;
                Some(f)
            }
            None => None,
        };
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            csv,
        })
    }

    fn row(&mut self, step: usize, l: &LossBreakdown) -> Result<()> {
        if let Some(f) = self.csv.as_mut() {
            writeln!(f, "{}", l.csv_row(step))?;
        }
        Ok(())
    }

    fn save(&mut self, name: &str, p: &ParamStore) -> Result<()> {
        if let Some(f) = self.csv.as_mut() {
            f.flush()?;
        }
        if let Some(d) = &self.dir {
            p.save(d.join(name))?;
        }
        Ok(())
    }
}

/// Shared optimisation loop. `sample` accumulates the gradient of sample
/// `b` of step `step`, scaled by the given factor, and returns its loss.
fn optimise(
    mut params: ParamStore,
    cfg: &TrainConfig,
    out: Option<&Path>,
    mut sample: impl FnMut(&mut ParamStore, usize, usize, f64) -> Result<LossBreakdown>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut output = RunOutput::new(out)?;
    let mut state = AdamState::new(&params);
    let mut log = Vec::with_capacity(cfg.steps);
    let scale = 1.0 / cfg.batch as f64;
    for step in 0..cfg.steps {
        let last_good = params.clone();
        let result = (|| -> Result<LossBreakdown> {
            params.zero_grad();
            let parts = (0..cfg.batch)
                .map(|b| sample(&mut params, step, b, scale))
                .collect::<Result<Vec<_>>>()?;
            let mean = LossBreakdown::mean(&parts).expect("batch is non-empty");
            clip_grad_norm(&mut params, cfg.clip_norm);
            adam_step(&mut params, &mut state, cfg.lr)?;
            if !params.all_finite() {
                return Err(Error::Divergence(format!("non-finite parameters after step {step}")));
            }
            Ok(mean)
        })();
        match result {
            Ok(l) => {
                output.row(step, &l)?;
                log.push(l);
            }
            Err(e @ Error::Divergence(_)) => {
                output.save(LAST_GOOD_CHECKPOINT, &last_good)?;
                return Err(e);
            }
            Err(e) => return Err(e),
        }
        if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 {
            output.save(&checkpoint_name(step + 1), &params)?;
        }
    }
    output.save(FINAL_CHECKPOINT, &params)?;
    Ok(TrainOutcome { params, log })
}

/// Seed of supervised sample `index`.
pub fn sample_seed(train_seed: u64, index: usize, pool: usize) -> u64 {
    let i = if pool > 0 { index % pool } else { index };
    sub_seed(train_seed, i as u64)
}

/// Supervised training on scenes drawn from `template`, rendered to every
/// layout with positive weight. The encoder sees the 5.1 render.
pub fn train_supervised(
    cfg: &TrainConfig,
    net: &MaskNetConfig,
    template: &SceneSpec,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.expect_mode(TrainMode::Supervised)?;
    template.validate()?;
    let params = init_params(net)?;
    let mut pool: Vec<Option<Scene>> = vec![None; cfg.scene_pool];
    let mut scene_for = |index: usize| -> Result<Scene> {
        let seed = sample_seed(cfg.seed, index, cfg.scene_pool);
        if cfg.scene_pool == 0 {
            return assemble_scene(&template.with_seed(seed));
        }
        let slot = &mut pool[index % cfg.scene_pool];
        if slot.is_none() {
            *slot = Some(assemble_scene(&template.with_seed(seed))?);
        }
        Ok(slot.clone().expect("filled above"))
    };
    optimise(params, cfg, out, |p, step, b, scale| {
        let scene = scene_for(step * cfg.batch + b)?;
        let mut refs = render_refs(&scene.production, &cfg.loss.layouts)?;
        // The 5.1 render is the encoder input even when it carries no weight.
        if !refs.contains_key(&LayoutKind::Surround51) {
            refs.insert(LayoutKind::Surround51, scene.render_stft(LayoutKind::Surround51)?);
        }
        let mix = refs[&LayoutKind::Surround51].clone();
        supervised_grad(p, &mix, &refs, &cfg.loss, &cfg.depan, scale)
    })
}

fn fit_excerpt(
    params: ParamStore,
    cfg: &TrainConfig,
    mix51: &Waveform,
    out: Option<&Path>,
) -> Result<(ObjectProduction, TrainOutcome)> {
    mix51.ensure_51()?;
    let mix = dsp::stft(mix51)?;
    let outcome = optimise(params, cfg, out, |p, _, _, scale| unsupervised_grad(p, &mix, &cfg.loss, &cfg.depan, scale))?;
    let prod = encode_stft(&outcome.params, &mix, &cfg.depan)?;
    Ok((prod, outcome))
}

/// Overfit freshly initialized parameters to a single 5.1 excerpt.
pub fn train_unsupervised_fit(
    cfg: &TrainConfig,
    net: &MaskNetConfig,
    mix51: &Waveform,
    out: Option<&Path>,
) -> Result<(ObjectProduction, TrainOutcome)> {
    cfg.expect_mode(TrainMode::UnsupervisedFit)?;
    fit_excerpt(init_params(net)?, cfg, mix51, out)
}

/// Continue from a supervised checkpoint on a single 5.1 excerpt.
pub fn train_finetune(
    cfg: &TrainConfig,
    pretrained: ParamStore,
    mix51: &Waveform,
    out: Option<&Path>,
) -> Result<(ObjectProduction, TrainOutcome)> {
    cfg.expect_mode(TrainMode::Finetune)?;
    pretrained.config.validate()?;
    let expected = init_params(&pretrained.config)?;
    pretrained.ensure_compatible(&expected)?;
    fit_excerpt(pretrained, cfg, mix51, out)
}
