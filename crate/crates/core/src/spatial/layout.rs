use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The four reference layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayoutKind {
    #[serde(rename = "2.0")]
    Stereo,
    #[serde(rename = "5.1")]
    Surround51,
    #[serde(rename = "7.1")]
    Surround71,
    #[serde(rename = "9.1")]
    Surround91,
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 4] = [
        LayoutKind::Stereo,
        LayoutKind::Surround51,
        LayoutKind::Surround71,
        LayoutKind::Surround91,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayoutKind::Stereo => "2.0",
            LayoutKind::Surround51 => "5.1",
            LayoutKind::Surround71 => "7.1",
            LayoutKind::Surround91 => "9.1",
        }
    }

    /// Suffix used in file names (`mix_51.wav`).
    pub fn tag(self) -> &'static str {
        match self {
            LayoutKind::Stereo => "20",
            LayoutKind::Surround51 => "51",
            LayoutKind::Surround71 => "71",
            LayoutKind::Surround91 => "91",
        }
    }

    pub fn layout(self) -> &'static SpeakerLayout {
        static LAYOUTS: OnceLock<[SpeakerLayout; 4]> = OnceLock::new();
        let all = LAYOUTS.get_or_init(|| LayoutKind::ALL.map(SpeakerLayout::build));
        &all[self as usize]
    }
}

impl fmt::Display for LayoutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayoutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayoutKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown layout {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Speaker {
    pub label: &'static str,
    pub x: f64,
    /// Index into the layout's channel order.
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerRow {
    pub y: f64,
    pub speakers: Vec<Speaker>,
}

/// Speakers grouped in rows of increasing `y` (front to back), each row
/// ordered by increasing `x` (left to right).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerLayout {
    kind: LayoutKind,
    labels: Vec<&'static str>,
    rows: Vec<SpeakerRow>,
    lfe: Option<usize>,
}

impl SpeakerLayout {
    fn build(kind: LayoutKind) -> Self {
        let (labels, rows): (Vec<&'static str>, Vec<(f64, Vec<(&'static str, f64)>)>) = match kind {
            LayoutKind::Stereo => (vec!["L", "R"], vec![(0.0, vec![("L", 0.0), ("R", 1.0)])]),
            LayoutKind::Surround51 => (
                vec!["L", "R", "C", "LFE", "Ls", "Rs"],
                vec![
                    (0.0, vec![("L", 0.0), ("C", 0.5), ("R", 1.0)]),
                    (1.0, vec![("Ls", 0.0), ("Rs", 1.0)]),
                ],
            ),
            LayoutKind::Surround71 => (
                vec!["L", "R", "C", "LFE", "Ls", "Rs", "Lss", "Rss"],
                vec![
                    (0.0, vec![("L", 0.0), ("C", 0.5), ("R", 1.0)]),
                    (0.5, vec![("Lss", 0.0), ("Rss", 1.0)]),
                    (1.0, vec![("Ls", 0.0), ("Rs", 1.0)]),
                ],
            ),
            LayoutKind::Surround91 => (
                vec!["L", "R", "C", "LFE", "Ls", "Rs", "Lss", "Rss", "Lw", "Rw"],
                vec![
                    (
                        0.0,
                        vec![("L", 0.0), ("Lw", 0.25), ("C", 0.5), ("Rw", 0.75), ("R", 1.0)],
                    ),
                    (0.5, vec![("Lss", 0.0), ("Rss", 1.0)]),
                    (1.0, vec![("Ls", 0.0), ("Rs", 1.0)]),
                ],
            ),
        };
        let index = |l: &str| labels.iter().position(|x| *x == l).expect("speaker label in channel list");
        let rows = rows
            .into_iter()
            .map(|(y, spk)| SpeakerRow {
                y,
                speakers: spk
                    .into_iter()
                    .map(|(label, x)| Speaker {
                        label,
                        x,
                        channel: index(label),
                    })
                    .collect(),
            })
            .collect();
        let lfe = labels.iter().position(|l| *l == "LFE");
        Self {
            kind,
            labels,
            rows,
            lfe,
        }
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    /// Channel labels in file order.
    pub fn labels(&self) -> &[&'static str] {
        &self.labels
    }

    pub fn num_channels(&self) -> usize {
        self.labels.len()
    }

    pub fn rows(&self) -> &[SpeakerRow] {
        &self.rows
    }

    pub fn lfe(&self) -> Option<usize> {
        self.lfe
    }

    pub fn has_lfe(&self) -> bool {
        self.lfe.is_some()
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    /// Channel indices of all speakers except the LFE.
    pub fn positional_channels(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|c| Some(*c) != self.lfe).collect()
    }
}

/// Fold-down matrix from the 5.1 bed into `kind`: for each output channel the
/// list of `(bed channel, gain)` contributions.
///
/// 5.1 passes through. 7.1 and 9.1 receive the same-named 5.1 channels with
/// the extra speakers silent. 2.0 takes `L + C/√2 + Ls/√2` and
/// `R + C/√2 + Rs/√2`; the LFE is dropped.
pub fn bed_fold(kind: LayoutKind) -> Vec<Vec<(usize, f64)>> {
    let bed = LayoutKind::Surround51.layout();
    let out = kind.layout();
    match kind {
        LayoutKind::Stereo => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let b = |l: &str| bed.channel_index(l).expect("5.1 label");
            vec![
                vec![(b("L"), 1.0), (b("C"), h), (b("Ls"), h)],
                vec![(b("R"), 1.0), (b("C"), h), (b("Rs"), h)],
            ]
        }
        _ => out
            .labels()
            .iter()
            .map(|l| bed.channel_index(l).map(|c| vec![(c, 1.0)]).unwrap_or_default())
            .collect(),
    }
}
