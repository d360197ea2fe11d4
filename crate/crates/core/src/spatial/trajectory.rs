use std::fmt::Write as _;
use std::path::Path;

use super::Position;
use crate::{Error, Result};

/// One position per STFT frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Position>,
}

impl Trajectory {
    pub fn new(positions: Vec<Position>) -> Self {
        Self { positions }
    }

    pub fn constant(p: Position, frames: usize) -> Self {
        Self {
            positions: vec![Position::new(p.x, p.y); frames],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.positions.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.positions.iter().map(|p| p.y).collect()
    }

    pub fn ensure_frames(&self, frames: usize) -> Result<()> {
        if self.len() == frames {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "trajectory has {} frames, expected {frames}",
                self.len()
            )))
        }
    }

    /// CSV with header `frame,x,y` and six decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,x,y\n");
        for (t, p) in self.positions.iter().enumerate() {
            let _ = writeln!(s, "{t},{:.6},{:.6}", p.x, p.y);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("frame,x,y") => {}
            other => return Err(Error::invalid(format!("bad trajectory header {other:?}"))),
        }
        let mut positions = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::invalid(format!("trajectory row {i}: expected 3 fields")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("trajectory row {i}: {e}")))
            };
            let frame = fields[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::invalid(format!("trajectory row {i}: {e}")))?;
            if frame != i {
                return Err(Error::invalid(format!("trajectory row {i} labelled frame {frame}")));
            }
            let (x, y) = (parse(fields[1])?, parse(fields[2])?);
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::invalid(format!("trajectory row {i} outside unit square")));
            }
            positions.push(Position { x, y });
        }
        Ok(Self { positions })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_precision() {
        let t = Trajectory::new(vec![Position::new(0.1234567, 1.0)]);
        assert_eq!(t.to_csv(), "frame,x,y\n0,0.123457,1.000000\n");
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Trajectory::from_csv("t,x,y\n").is_err());
        assert!(Trajectory::from_csv("frame,x,y\n0,0.5\n").is_err());
        assert!(Trajectory::from_csv("frame,x,y\n1,0.5,0.5\n").is_err());
        assert!(Trajectory::from_csv("frame,x,y\n0,1.5,0.5\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_within_print_precision(pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..40)) {
            let t = Trajectory::new(pts.iter().map(|(x, y)| Position::new(*x, *y)).collect());
            let back = Trajectory::from_csv(&t.to_csv()).unwrap();
            prop_assert_eq!(back.len(), t.len());
            for (a, b) in back.positions.iter().zip(&t.positions) {
                prop_assert!((a.x - b.x).abs() <= 5e-7 && (a.y - b.y).abs() <= 5e-7);
            }
        }
    }
}
