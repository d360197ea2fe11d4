use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::metrics::{quantile, median};
use crate::{Error, Result};

pub const REPORT_CSV: &str = "report.csv";
pub const BOXPLOT_OBJECTS_CSV: &str = "boxplot_objects.csv";
pub const BOXPLOT_BED_CSV: &str = "boxplot_bed.csv";
pub const REPORT_HEADER: &str = "excerpt,method,slot,si_sdr_db,baseline_db,si_sdri_db,permutation";
pub const BOXPLOT_HEADER: &str = "method,metric,n,min,q1,median,q3,max";

/// What a report row scores: one reference object or the bed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slot {
    Object(usize),
    Bed,
}

impl Slot {
    pub fn is_bed(self) -> bool {
        self == Slot::Bed
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Object(o) => write!(f, "obj_{o}"),
            Slot::Bed => f.write_str("bed"),
        }
    }
}

impl FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bed" {
            return Ok(Slot::Bed);
        }
        s.strip_prefix("obj_")
            .and_then(|n| n.parse().ok())
            .map(Slot::Object)
            .ok_or_else(|| Error::invalid(format!("unknown slot {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub excerpt: String,
    pub method: String,
    pub slot: Slot,
    pub si_sdr_db: f64,
    pub baseline_db: f64,
    /// `si_sdr_db − baseline_db`.
    pub si_sdri_db: f64,
    /// Estimate-to-reference assignment (`"1-0-2"`); empty for the bed.
    pub permutation: String,
}

impl EvalRow {
    pub fn new(excerpt: &str, method: &str, slot: Slot, si_sdr_db: f64, baseline_db: f64, permutation: String) -> Self {
        Self {
            excerpt: excerpt.to_string(),
            method: method.to_string(),
            slot,
            si_sdr_db,
            baseline_db,
            si_sdri_db: si_sdr_db - baseline_db,
            permutation,
        }
    }
}

/// Five-number summary of one metric over one method's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSummary {
    pub method: String,
    /// `si_sdr_db` or `si_sdri_db`.
    pub metric: &'static str,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxSummary {
    fn of(method: &str, metric: &'static str, xs: &[f64]) -> Self {
        Self {
            method: method.to_string(),
            metric,
            n: xs.len(),
            min: quantile(xs, 0.0),
            q1: quantile(xs, 0.25),
            median: median(xs),
            q3: quantile(xs, 0.75),
            max: quantile(xs, 1.0),
        }
    }

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method, self.metric, self.n, self.min, self.q1, self.median, self.q3, self.max
        )
    }
}

/// Per-excerpt scores for every evaluated method, plus the warnings for
/// excerpts that could not be scored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Method names in order of first appearance.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn rows_for<'a>(&'a self, method: &'a str, bed: bool) -> impl Iterator<Item = &'a EvalRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method && r.slot.is_bed() == bed)
    }

    /// Median SI-SDRi over a method's object rows (`bed == false`) or bed
    /// rows.
    pub fn median_si_sdri(&self, method: &str, bed: bool) -> Option<f64> {
        let xs: Vec<f64> = self.rows_for(method, bed).map(|r| r.si_sdri_db).collect();
        (!xs.is_empty()).then(|| median(&xs))
    }

    /// Five-number summaries of SI-SDR and SI-SDRi per method, for object
    /// rows (`bed == false`) or bed rows.
    pub fn summaries(&self, bed: bool) -> Vec<BoxSummary> {
        let mut out = Vec::new();
        for m in self.methods() {
            let rows: Vec<&EvalRow> = self.rows_for(&m, bed).collect();
            if rows.is_empty() {
                continue;
            }
            let sdr: Vec<f64> = rows.iter().map(|r| r.si_sdr_db).collect();
            let sdri: Vec<f64> = rows.iter().map(|r| r.si_sdri_db).collect();
            out.push(BoxSummary::of(&m, "si_sdr_db", &sdr));
            out.push(BoxSummary::of(&m, "si_sdri_db", &sdri));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.excerpt, r.method, r.slot, r.si_sdr_db, r.baseline_db, r.si_sdri_db, r.permutation
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(REPORT_HEADER) {
            return Err(Error::invalid("report CSV header mismatch"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::invalid(format!("report line {}: expected 7 fields", i + 2)));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("report line {}: bad number {s:?}", i + 2)))
            };
            rows.push(EvalRow {
                excerpt: f[0].to_string(),
                method: f[1].to_string(),
                slot: f[2].parse()?,
                si_sdr_db: num(f[3])?,
                baseline_db: num(f[4])?,
                si_sdri_db: num(f[5])?,
                permutation: f[6].trim().to_string(),
            });
        }
        Ok(Self {
            rows,
            warnings: Vec::new(),
        })
    }

    pub fn boxplot_csv(&self, bed: bool) -> String {
        let mut s = String::from(BOXPLOT_HEADER);
        s.push('\n');
        for b in self.summaries(bed) {
            s.push_str(&b.csv_row());
            s.push('\n');
        }
        s
    }

    /// Write the report and the object and bed box-plot summaries into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(REPORT_CSV), self.to_csv())?;
        std::fs::write(dir.join(BOXPLOT_OBJECTS_CSV), self.boxplot_csv(false))?;
        std::fs::write(dir.join(BOXPLOT_BED_CSV), self.boxplot_csv(true))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        let mut rows = Vec::new();
        for e in 0..5 {
            let ex = format!("excerpt_{e:04}");
            for (m, off) in [("a", 1.5), ("b", -0.25)] {
                for o in 0..3 {
                    let v = (e * 3 + o) as f64 * 0.7 + off;
                    rows.push(EvalRow::new(&ex, m, Slot::Object(o), v, 0.1 * e as f64, "0-2-1".into()));
                }
                rows.push(EvalRow::new(&ex, m, Slot::Bed, off * e as f64, -1.0 / 3.0, String::new()));
            }
        }
        EvalReport {
            rows,
            warnings: vec![],
        }
    }

    #[test]
    fn slot_names_round_trip() {
        for s in [Slot::Object(0), Slot::Object(12), Slot::Bed] {
            assert_eq!(s.to_string().parse::<Slot>().unwrap(), s);
        }
        assert!("obj_x".parse::<Slot>().is_err());
    }

    #[test]
    fn csv_round_trips_exactly() {
        let r = report();
        let back = EvalReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.rows, r.rows);
        assert!(EvalReport::from_csv("nope\n").is_err());
    }

    #[test]
    fn medians_match_recomputation_from_csv() {
        let r = report();
        let csv = r.to_csv();
        for m in ["a", "b"] {
            for bed in [false, true] {
                // Independent aggregation straight from the text.
                let mut v: Vec<f64> = csv
                    .lines()
                    .skip(1)
                    .map(|l| l.split(',').collect::<Vec<_>>())
                    .filter(|f| f[1] == m && (f[2] == "bed") == bed)
                    .map(|f| f[5].parse::<f64>().unwrap())
                    .collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = v.len();
                let med = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
                assert_eq!(r.median_si_sdri(m, bed).unwrap(), med);
                let s = r.summaries(bed).into_iter().find(|s| s.method == m && s.metric == "si_sdri_db").unwrap();
                assert_eq!(s.median, med);
                assert_eq!(s.min, v[0]);
                assert_eq!(s.max, v[n - 1]);
                assert!(s.q1 <= s.median && s.median <= s.q3);
            }
        }
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        report().write(dir.path()).unwrap();
        let b = std::fs::read_to_string(dir.path().join(BOXPLOT_OBJECTS_CSV)).unwrap();
        assert_eq!(b.lines().next().unwrap(), BOXPLOT_HEADER);
        assert_eq!(b.lines().count(), 1 + 4);
        assert!(dir.path().join(REPORT_CSV).is_file());
    }
}
