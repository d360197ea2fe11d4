use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use objex::config::{RunConfig, RESOLVED_CONFIG};
use objex::datagen::{make_eval_set, mix_file};
use objex::dsp::{self, wav, StftTensor, Waveform, CHANNELS_51};
use objex::eval::{evaluate, EvalOptions, Method};
use objex::model::{encode, ParamStore};
use objex::spatial::{render, LayoutKind, Trajectory};
use objex::training::{train_finetune, train_supervised, train_unsupervised_fit};
use objex::{Error, ProductionFiles};

use crate::{Command, Common};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

/// A failed command: usage problems are reported before any work starts.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            e => CliError::Run(e),
        }
    }
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(Error::Divergence(_)) => EXIT_DIVERGENCE,
            CliError::Run(_) => EXIT_DATA,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Run(e) => match e {
                Error::Length { .. } => "length",
                Error::Shape(_) => "shape",
                Error::Validation(_) => "validation",
                Error::UndefinedReference(_) => "undefined_reference",
                Error::Divergence(_) => "divergence",
                Error::MissingData(_) => "missing_data",
                Error::Config(_) => "config",
                Error::Checkpoint(_) => "checkpoint",
                Error::Wav { .. } => "wav",
                Error::Io(_) => "io",
            },
        }
    }

    /// One machine-readable line: `error kind=<kind> code=<exit> message="<text>"`.
    pub fn line(&self) -> String {
        let msg = match self {
            CliError::Usage(m) => m.clone(),
            CliError::Run(e) => e.to_string(),
        };
        format!("error kind={} code={} message={:?}", self.kind(), self.code(), msg)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn need_file(p: &Path, what: &str) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", p.display())))
    }
}

fn need_dir(p: &Path, what: &str) -> CliResult<()> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} is not a directory", p.display())))
    }
}

/// Defaults, then the config file, then command-line flags.
fn load_config(common: &Common, edit: impl FnOnce(&mut RunConfig)) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            need_file(p, "config")?;
            RunConfig::load(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    edit(&mut cfg);
    let cfg = cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

/// Create the output directory and write the resolved config into it. The
/// output location itself is left out so runs into different directories
/// produce identical trees.
fn prepare_out(common: &Common, cfg: &RunConfig) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&common.out).map_err(Error::from)?;
    let mut echo = cfg.clone();
    echo.paths.out = None;
    echo.save(&common.out.join(RESOLVED_CONFIG))?;
    Ok(common.out.clone())
}

fn set_objects(cfg: &mut RunConfig, n: Option<usize>) {
    if let Some(n) = n {
        cfg.net.n_objects = n;
        cfg.scene.n_objects = n;
    }
}

fn read_mix(p: &Path) -> CliResult<Waveform> {
    need_file(p, "input")?;
    let w = wav::read_wav(p)?;
    w.ensure_51()?;
    Ok(w)
}

fn write_production(dir: &Path, prod: &objex::ObjectProduction) -> CliResult<()> {
    ProductionFiles::from_production(prod)?.write(dir)?;
    Ok(())
}

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Synth {
            common,
            n_objects,
            count,
        } => {
            let cfg = load_config(&common, |c| {
                set_objects(c, n_objects);
                if let Some(n) = count {
                    c.count = n;
                }
            })?;
            let out = prepare_out(&common, &cfg)?;
            let m = make_eval_set(&out, cfg.count, &cfg.scene, cfg.seed, cfg.jobs)?;
            println!("synthesized {} excerpts into {}", m.excerpts.len(), out.display());
        }
        Command::Render { common, input } => {
            need_dir(&input, "input")?;
            let cfg = load_config(&common, |_| {})?;
            let prod = ProductionFiles::read(&input, None)?.to_production()?;
            let out = prepare_out(&common, &cfg)?;
            for kind in LayoutKind::ALL {
                let w = dsp::istft(&render(&prod, kind)?, kind.layout().labels())?;
                wav::write_wav(out.join(mix_file(kind)), &w)?;
            }
            println!("rendered {} objects to {}", prod.n_objects(), out.display());
        }
        Command::Train {
            common,
            n_objects,
            steps,
        } => {
            let cfg = load_config(&common, |c| {
                set_objects(c, n_objects);
                if let Some(s) = steps {
                    c.train.steps = s;
                }
            })?;
            let out = prepare_out(&common, &cfg)?;
            let r = train_supervised(&cfg.train, &cfg.net, &cfg.scene, Some(&out))?;
            report_loss(&r.log);
        }
        Command::Fit {
            common,
            input,
            n_objects,
            steps,
        } => {
            let cfg = load_config(&common, |c| {
                set_objects(c, n_objects);
                if let Some(s) = steps {
                    c.fit.steps = s;
                }
            })?;
            let mix = read_mix(&input)?;
            let out = prepare_out(&common, &cfg)?;
            let (prod, r) = train_unsupervised_fit(&cfg.fit, &cfg.net, &mix, Some(&out))?;
            write_production(&out, &prod)?;
            report_loss(&r.log);
        }
        Command::Finetune {
            common,
            input,
            checkpoint,
            steps,
        } => {
            need_file(&checkpoint, "checkpoint")?;
            let cfg = load_config(&common, |c| {
                if let Some(s) = steps {
                    c.finetune.steps = s;
                }
            })?;
            let mix = read_mix(&input)?;
            let params = ParamStore::load(&checkpoint)?;
            let out = prepare_out(&common, &cfg)?;
            let (prod, r) = train_finetune(&cfg.finetune, params, &mix, Some(&out))?;
            write_production(&out, &prod)?;
            report_loss(&r.log);
        }
        Command::Extract {
            common,
            input,
            checkpoint,
        } => {
            need_file(&checkpoint, "checkpoint")?;
            let cfg = load_config(&common, |_| {})?;
            let mix = read_mix(&input)?;
            let params = ParamStore::load(&checkpoint)?;
            let prod = encode(&params, &mix, &cfg.depan)?;
            let out = prepare_out(&common, &cfg)?;
            write_production(&out, &prod)?;
            println!("extracted {} objects into {}", prod.n_objects(), out.display());
        }
        Command::Eval {
            common,
            dataset,
            methods,
            no_oracles,
        } => {
            need_dir(&dataset, "dataset")?;
            let mut list = vec![Method::Baseline];
            if !no_oracles {
                list.push(Method::Ibm { mel_grouped: false });
                list.push(Method::Ibm { mel_grouped: true });
            }
            for m in &methods {
                let (name, dir) = m
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("method {m:?} is not NAME=DIR")))?;
                if name.is_empty() || name.contains(',') || list.iter().any(|x| x.name() == name) {
                    return Err(CliError::Usage(format!("method name {name:?} is empty, duplicated or has a comma")));
                }
                need_dir(Path::new(dir), "method directory")?;
                list.push(Method::Outputs {
                    name: name.to_string(),
                    root: PathBuf::from(dir),
                });
            }
            let cfg = load_config(&common, |c| c.paths.dataset = Some(dataset.clone()))?;
            let opts = EvalOptions {
                depan: cfg.depan,
                jobs: cfg.jobs,
            };
            let report = evaluate(&dataset, &list, &opts)?;
            let out = prepare_out(&common, &cfg)?;
            report.write(&out)?;
            for w in &report.warnings {
                eprintln!("warning message={w:?}");
            }
            for m in report.methods() {
                let obj = report.median_si_sdri(&m, false).unwrap_or(f64::NAN);
                let bed = report.median_si_sdri(&m, true).unwrap_or(f64::NAN);
                println!("{m}: median SI-SDRi objects {obj:.2} dB, bed {bed:.2} dB");
            }
        }
        Command::Plotdata { common, input } => {
            need_dir(&input, "input")?;
            let cfg = load_config(&common, |_| {})?;
            let out = prepare_out(&common, &cfg)?;
            let n = plotdata(&input, &out)?;
            println!("wrote {n} files to {}", out.display());
        }
    }
    Ok(())
}

fn report_loss(log: &[objex::losses::LossBreakdown]) {
    match (log.first(), log.last()) {
        (Some(a), Some(b)) => println!("loss {:.6} -> {:.6} over {} steps", a.total, b.total, log.len()),
        _ => println!("no steps run"),
    }
}

/// Mel power in dB as `frame,band,<channel...>` rows.
fn mel_csv(s: &StftTensor, labels: &[&str]) -> objex::Result<String> {
    let m = dsp::to_melgram(s)?;
    let mut out = format!("frame,band,{}\n", labels.join(","));
    for t in 0..m.frames {
        for b in 0..m.bands {
            write!(out, "{t},{b}").expect("write to string");
            for c in 0..m.channels {
                write!(out, ",{:.4}", 10.0 * (m.frame(c, t)[b] + 1e-10).log10()).expect("write to string");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

fn trajectories_csv(ts: &[Trajectory]) -> String {
    let mut out = String::from("object,frame,x,y\n");
    for (o, t) in ts.iter().enumerate() {
        for (f, p) in t.positions.iter().enumerate() {
            writeln!(out, "{o},{f},{},{}", p.x, p.y).expect("write to string");
        }
    }
    out
}

/// Spectrogram and trajectory dumps of a dataset excerpt or production
/// directory. Returns the number of files written.
fn plotdata(input: &Path, out: &Path) -> objex::Result<usize> {
    let files = ProductionFiles::read(input, None)?;
    let mut written = Vec::new();
    let mix = input.join(mix_file(LayoutKind::Surround51));
    if mix.is_file() {
        let w = wav::read_wav(&mix)?;
        w.ensure_51()?;
        written.push(("mix_51_mel.csv".to_string(), mel_csv(&dsp::stft(&w)?, &CHANNELS_51)?));
    }
    for (o, w) in files.objects.iter().enumerate() {
        written.push((format!("obj_{o}_mel.csv"), mel_csv(&dsp::stft(w)?, &["M"])?));
    }
    written.push(("bed_mel.csv".into(), mel_csv(&dsp::stft(&files.bed)?, &CHANNELS_51)?));
    written.push(("trajectories.csv".into(), trajectories_csv(&files.trajectories)));
    for (name, text) in &written {
        std::fs::write(out.join(name), text)?;
    }
    Ok(written.len())
}
