//! Objective evaluation: SI-SDR against the ground truth, improvement over
//! fixed downmix baselines, ideal-binary-mask oracles and permutation search.

mod baselines;
mod ibm;
mod metrics;
mod report;

use std::path::{Path, PathBuf};

pub use baselines::{baseline_bed, baseline_mono, baseline_objects, baseline_three};
pub use ibm::{ibm_extract, ibm_masks};
pub use metrics::{
    best_permutation, best_permutation_scores, mean, median, permutations, quantile, si_sdr, Assignment,
    SI_SDR_CAP_DB, SI_SDR_FLOOR_DB,
};
pub use report::{
    BoxSummary, EvalReport, EvalRow, Slot, BOXPLOT_BED_CSV, BOXPLOT_HEADER, BOXPLOT_OBJECTS_CSV, REPORT_CSV,
    REPORT_HEADER,
};

use crate::datagen::{load_excerpt, read_manifest, Excerpt};
use crate::dsp::{self, Waveform, POSITIONAL_51};
use crate::spatial::DepanOptions;
use crate::{Error, ProductionFiles, Result};

/// A source of estimates to score.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// The downmix baselines themselves.
    Baseline,
    /// Ideal binary masks from the ground truth, per bin or per mel band.
    Ibm { mel_grouped: bool },
    /// Production directories under `root`, one per excerpt name.
    Outputs { name: String, root: PathBuf },
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::Baseline => "baseline",
            Method::Ibm { mel_grouped: false } => "ibm_linear",
            Method::Ibm { mel_grouped: true } => "ibm_mel",
            Method::Outputs { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// De-panning used by the mask oracles.
    pub depan: DepanOptions,
    /// Worker threads over excerpts.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            depan: DepanOptions::default(),
            jobs: 1,
        }
    }
}

/// Estimated mono objects and 5.1 bed of one excerpt.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub objects: Vec<Waveform>,
    pub bed: Waveform,
}

fn mono(w: &Waveform) -> Result<&[f64]> {
    if w.num_channels() != 1 {
        return Err(Error::shape(format!("expected a mono track, got {} channels", w.num_channels())));
    }
    Ok(&w.channels[0])
}

/// Bed SI-SDR: mean over the positional channels whose reference is not
/// silent. `None` when every reference channel is silent.
pub fn bed_si_sdr(est: &Waveform, reference: &Waveform) -> Result<Option<f64>> {
    est.ensure_51()?;
    reference.ensure_51()?;
    let mut vals = Vec::new();
    for c in POSITIONAL_51 {
        match si_sdr(&est.channels[c], &reference.channels[c]) {
            Ok(v) => vals.push(v),
            Err(Error::UndefinedReference(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((!vals.is_empty()).then(|| mean(&vals)))
}

/// Produce `method`'s estimate for one excerpt.
pub fn estimate(ex: &Excerpt, method: &Method, opts: &EvalOptions) -> Result<Estimate> {
    let n = ex.manifest.n_objects;
    match method {
        Method::Baseline => Ok(Estimate {
            objects: baseline_objects(&ex.mix51, n)?,
            bed: baseline_bed(&ex.mix51)?,
        }),
        Method::Ibm { mel_grouped } => {
            let mix = dsp::stft(&ex.mix51)?;
            let prod = ibm_extract(&mix, &ex.truth()?, *mel_grouped, &opts.depan)?;
            let (objects, bed) = prod.to_waveforms()?;
            Ok(Estimate { objects, bed })
        }
        Method::Outputs { root, .. } => {
            let files = ProductionFiles::read(&root.join(ex.name()), Some(n))?;
            Ok(Estimate {
                objects: files.objects,
                bed: files.bed,
            })
        }
    }
}

struct BaselineScores {
    objects: Vec<f64>,
    bed: Option<f64>,
}

fn score_objects(objects: &[Waveform], ex: &Excerpt) -> Result<Assignment> {
    let est = objects.iter().map(mono).collect::<Result<Vec<_>>>()?;
    let refs = ex.objects.iter().map(mono).collect::<Result<Vec<_>>>()?;
    best_permutation(&est, &refs)
}

fn baseline_scores(ex: &Excerpt) -> Result<BaselineScores> {
    let objects = score_objects(&baseline_objects(&ex.mix51, ex.manifest.n_objects)?, ex)?.scores;
    let bed = bed_si_sdr(&baseline_bed(&ex.mix51)?, &ex.bed)?;
    Ok(BaselineScores { objects, bed })
}

fn score(ex: &Excerpt, method: &Method, est: &Estimate, base: &BaselineScores) -> Result<Vec<EvalRow>> {
    let a = score_objects(&est.objects, ex)?;
    let perm = a.perm_string();
    let mut rows: Vec<EvalRow> = a
        .scores
        .iter()
        .zip(&base.objects)
        .enumerate()
        .map(|(o, (s, b))| EvalRow::new(ex.name(), method.name(), Slot::Object(o), *s, *b, perm.clone()))
        .collect();
    if let (Some(s), Some(b)) = (bed_si_sdr(&est.bed, &ex.bed)?, base.bed) {
        rows.push(EvalRow::new(ex.name(), method.name(), Slot::Bed, s, b, String::new()));
    }
    Ok(rows)
}

/// Score every method on one excerpt. Methods that fail produce a warning
/// instead of rows.
pub fn evaluate_excerpt(ex: &Excerpt, methods: &[Method], opts: &EvalOptions) -> Result<(Vec<EvalRow>, Vec<String>)> {
    let base = baseline_scores(ex)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for m in methods {
        match estimate(ex, m, opts).and_then(|e| score(ex, m, &e, &base)) {
            Ok(r) => rows.extend(r),
            Err(e) => warnings.push(format!("{}: {}: skipped: {e}", ex.name(), m.name())),
        }
    }
    Ok((rows, warnings))
}

/// Evaluate `methods` over the dataset in `dataset`. Excerpts that cannot
/// be loaded are skipped with a warning; rows keep dataset order.
pub fn evaluate(dataset: &Path, methods: &[Method], opts: &EvalOptions) -> Result<EvalReport> {
    let manifest = read_manifest(dataset)?;
    let results = crate::par::par_map(&manifest.excerpts, opts.jobs, |e| {
        load_excerpt(&dataset.join(&e.name)).and_then(|ex| evaluate_excerpt(&ex, methods, opts))
    })?;
    let mut report = EvalReport::default();
    for (e, r) in manifest.excerpts.iter().zip(results) {
        match r {
            Ok((rows, warnings)) => {
                report.rows.extend(rows);
                report.warnings.extend(warnings);
            }
            Err(err) => report.warnings.push(format!("{}: skipped: {err}", e.name)),
        }
    }
    Ok(report)
}
