//! Reconstruction loss over rendered layouts plus the production
//! regularizers, with analytic gradients with respect to the production.

mod recon;
mod reg;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dsp::StftTensor;
use crate::spatial::{render, render_backward, LayoutKind};
use crate::{Error, ObjectProduction, ProductionGrad, Result};

pub use recon::{recon_loss, recon_loss_backward};
pub use reg::{
    reg_acceleration, reg_acceleration_grad, reg_bed_content, reg_bed_content_grad, reg_content_correlation,
    reg_content_correlation_grad, reg_object_proximity, reg_object_proximity_grad, reg_slow_motion,
    reg_slow_motion_grad, reg_speaker_proximity, reg_speaker_proximity_grad, reg_traj_correlation,
    reg_traj_correlation_grad, RegThresholds, SPEAKERS_51,
};

/// Per-layout reconstruction weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutWeights {
    #[serde(rename = "2.0")]
    pub stereo: f64,
    #[serde(rename = "5.1")]
    pub surround51: f64,
    #[serde(rename = "7.1")]
    pub surround71: f64,
    #[serde(rename = "9.1")]
    pub surround91: f64,
}

impl Default for LayoutWeights {
    fn default() -> Self {
        Self {
            stereo: 0.5,
            surround51: 1.0,
            surround71: 1.5,
            surround91: 1.5,
        }
    }
}

impl LayoutWeights {
    pub fn only_51() -> Self {
        Self {
            stereo: 0.0,
            surround51: 1.0,
            surround71: 0.0,
            surround91: 0.0,
        }
    }

    pub fn get(&self, kind: LayoutKind) -> f64 {
        match kind {
            LayoutKind::Stereo => self.stereo,
            LayoutKind::Surround51 => self.surround51,
            LayoutKind::Surround71 => self.surround71,
            LayoutKind::Surround91 => self.surround91,
        }
    }

    /// Layouts with positive weight, in canonical order.
    pub fn active(&self) -> Vec<LayoutKind> {
        LayoutKind::ALL.into_iter().filter(|k| self.get(*k) > 0.0).collect()
    }

    pub fn sum(&self) -> f64 {
        LayoutKind::ALL.iter().map(|k| self.get(*k)).sum()
    }
}

/// The seven regularizer slots, used both for weights and for values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegTerms {
    pub bed_content: f64,
    pub speaker_proximity: f64,
    pub slow_motion: f64,
    pub acceleration: f64,
    pub object_proximity: f64,
    pub traj_correlation: f64,
    pub content_correlation: f64,
}

impl RegTerms {
    pub const NAMES: [&'static str; 7] = [
        "bed_content",
        "speaker_proximity",
        "slow_motion",
        "acceleration",
        "object_proximity",
        "traj_correlation",
        "content_correlation",
    ];

    pub fn default_weights() -> Self {
        Self {
            bed_content: 0.5,
            speaker_proximity: 0.05,
            slow_motion: 0.02,
            acceleration: 0.5,
            object_proximity: 0.02,
            traj_correlation: 0.01,
            content_correlation: 0.05,
        }
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.bed_content,
            self.speaker_proximity,
            self.slow_motion,
            self.acceleration,
            self.object_proximity,
            self.traj_correlation,
            self.content_correlation,
        ]
    }

    pub fn dot(&self, other: &RegTerms) -> f64 {
        self.values().iter().zip(other.values()).map(|(a, b)| a * b).sum()
    }
}

/// Every weight and threshold of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub layouts: LayoutWeights,
    pub reg: RegTerms,
    pub thresholds: RegThresholds,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            layouts: LayoutWeights::default(),
            reg: RegTerms::default_weights(),
            thresholds: RegThresholds::default(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = LayoutKind::ALL
            .iter()
            .map(|k| self.layouts.get(*k))
            .chain(self.reg.values())
            .chain([
                self.thresholds.speaker_sigma,
                self.thresholds.v_min,
                self.thresholds.a_max,
                self.thresholds.object_sigma,
            ]);
        for v in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("loss weight {v} must be finite and non-negative")));
            }
        }
        let th = &self.thresholds;
        if th.speaker_sigma == 0.0 || th.v_min == 0.0 || th.a_max == 0.0 || th.object_sigma == 0.0 {
            return Err(Error::Config("regularizer thresholds must be positive".into()));
        }
        if self.layouts.sum() <= 0.0 {
            return Err(Error::Config("at least one layout weight must be positive".into()));
        }
        Ok(())
    }
}

/// A loss value split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// Unweighted reconstruction loss per layout that has positive weight.
    pub recon: BTreeMap<LayoutKind, f64>,
    /// Normalized weighted average of `recon`.
    pub recon_part: f64,
    /// Unweighted regularizer values.
    pub terms: RegTerms,
}

impl LossBreakdown {
    /// Elementwise mean of several breakdowns (e.g. over a batch).
    pub fn mean(items: &[LossBreakdown]) -> Option<LossBreakdown> {
        let n = items.len() as f64;
        let first = items.first()?;
        let avg = |f: &dyn Fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        let mut recon = BTreeMap::new();
        for k in first.recon.keys() {
            recon.insert(*k, avg(&|b| b.recon.get(k).copied().unwrap_or(0.0)));
        }
        let v: Vec<f64> = (0..7).map(|i| avg(&|b| b.terms.values()[i])).collect();
        Some(LossBreakdown {
            total: avg(&|b| b.total),
            recon,
            recon_part: avg(&|b| b.recon_part),
            terms: RegTerms {
                bed_content: v[0],
                speaker_proximity: v[1],
                slow_motion: v[2],
                acceleration: v[3],
                object_proximity: v[4],
                traj_correlation: v[5],
                content_correlation: v[6],
            },
        })
    }

    pub fn csv_header() -> String {
        let mut h = String::from("step,total,recon");
        for k in LayoutKind::ALL {
            let _ = write!(h, ",recon_{}", k.tag());
        }
        for n in RegTerms::NAMES {
            let _ = write!(h, ",{n}");
        }
        h
    }

    /// One CSV row; layouts without weight are left empty.
    pub fn csv_row(&self, step: usize) -> String {
        let mut r = format!("{step},{:.9e},{:.9e}", self.total, self.recon_part);
        for k in LayoutKind::ALL {
            match self.recon.get(&k) {
                Some(v) => {
                    let _ = write!(r, ",{v:.9e}");
                }
                None => r.push(','),
            }
        }
        for v in self.terms.values() {
            let _ = write!(r, ",{v:.9e}");
        }
        r
    }
}

/// Reference renders keyed by layout.
pub type LayoutRefs = BTreeMap<LayoutKind, StftTensor>;

/// Weighted multi-layout loss. `mix51` is the encoder input, used to
/// normalize the bed-content term. When `grad` is given, `∂total/∂prod`
/// is accumulated into it.
pub fn production_loss(
    prod: &ObjectProduction,
    refs: &LayoutRefs,
    mix51: &StftTensor,
    w: &LossWeights,
    mut grad: Option<&mut ProductionGrad>,
) -> Result<LossBreakdown> {
    w.validate()?;
    prod.validate()?;
    let wsum = w.layouts.sum();
    let mut recon = BTreeMap::new();
    let mut recon_part = 0.0;
    for kind in w.layouts.active() {
        let reference = refs
            .get(&kind)
            .ok_or_else(|| Error::MissingData(format!("no {kind} reference for a positively weighted layout")))?;
        let pred = render(prod, kind)?;
        let l = recon_loss(&pred, reference)?;
        let lw = w.layouts.get(kind) / wsum;
        recon_part += lw * l;
        recon.insert(kind, l);
        if let Some(g) = grad.as_deref_mut() {
            let mut dpred = vec![Default::default(); pred.data().len()];
            recon_loss_backward(&pred, reference, lw, &mut dpred);
            render_backward(prod, kind, &dpred, g);
        }
    }

    let rw = w.reg;
    let th = &w.thresholds;
    macro_rules! with_grad {
        ($weight:expr) => {
            grad.as_deref_mut().filter(|_| $weight != 0.0).map(|g| (g, $weight))
        };
    }
    let terms = RegTerms {
        bed_content: reg_bed_content_grad(prod, mix51, with_grad!(rw.bed_content))?,
        speaker_proximity: reg_speaker_proximity_grad(prod, th, with_grad!(rw.speaker_proximity)),
        slow_motion: reg_slow_motion_grad(prod, th, with_grad!(rw.slow_motion)),
        acceleration: reg_acceleration_grad(prod, th, with_grad!(rw.acceleration)),
        object_proximity: reg_object_proximity_grad(prod, th, with_grad!(rw.object_proximity)),
        traj_correlation: reg_traj_correlation_grad(prod, with_grad!(rw.traj_correlation)),
        content_correlation: reg_content_correlation_grad(prod, with_grad!(rw.content_correlation))?,
    };
    let total = recon_part + rw.dot(&terms);
    if !total.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {total}")));
    }
    Ok(LossBreakdown {
        total,
        recon,
        recon_part,
        terms,
    })
}

/// Supervised objective: reconstruction against renders of a reference
/// production in every weighted layout.
pub fn supervised_loss(
    prod: &ObjectProduction,
    refs: &LayoutRefs,
    mix51: &StftTensor,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    production_loss(prod, refs, mix51, w, None)
}

/// Unsupervised objective: reconstruction of the 5.1 input only.
pub fn unsupervised_loss(prod: &ObjectProduction, mix51: &StftTensor, w: &LossWeights) -> Result<LossBreakdown> {
    unsupervised_loss_grad(prod, mix51, w, None)
}

pub fn unsupervised_loss_grad(
    prod: &ObjectProduction,
    mix51: &StftTensor,
    w: &LossWeights,
    grad: Option<&mut ProductionGrad>,
) -> Result<LossBreakdown> {
    let w = LossWeights {
        layouts: LayoutWeights::only_51(),
        ..*w
    };
    let refs = LayoutRefs::from([(LayoutKind::Surround51, mix51.clone())]);
    production_loss(prod, &refs, mix51, &w, grad)
}

/// Render `prod` to every layout with positive weight.
pub fn render_refs(prod: &ObjectProduction, layouts: &LayoutWeights) -> Result<LayoutRefs> {
    layouts
        .active()
        .into_iter()
        .map(|k| render(prod, k).map(|r| (k, r)))
        .collect()
}
