use std::f64::consts::{FRAC_PI_2, LN_10};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::SpeakerLayout;

/// Object position: `x` left→right, `y` front→back, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    /// Clamped to the unit square.
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: x.clamp(0.0, 1.0),
            y: y.clamp(0.0, 1.0),
        }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

impl Default for Position {
    fn default() -> Self {
        Self { x: 0.5, y: 0.5 }
    }
}

/// Attenuation at the back of the room.
pub const TRIM_BACK_DB: f64 = 3.0;

/// Object trim: 0 dB at the front, -3 dB at the back, linear in dB.
pub fn trim(y: f64) -> f64 {
    10f64.powf(-TRIM_BACK_DB * y / 20.0)
}

pub fn trim_derivative(y: f64) -> f64 {
    trim(y) * (-TRIM_BACK_DB * LN_10 / 20.0)
}

/// Per-channel speaker gains for one frame, indexed like the layout's
/// channels. The LFE entry is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector(pub Vec<f64>);

impl Deref for GainVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl GainVector {
    pub fn power(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum()
    }
}

/// Gains with their partial derivatives in `x` and `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainJacobian {
    pub gains: Vec<f64>,
    pub d_dx: Vec<f64>,
    pub d_dy: Vec<f64>,
}

/// Locate `v` between consecutive coordinates. Returns the lower index, the
/// crossfade angle and its derivative in `v`. A single coordinate yields
/// `(0, 0, 0)`.
fn bracket(coords: &[f64], v: f64) -> (usize, f64, f64) {
    if coords.len() < 2 {
        return (0, 0.0, 0.0);
    }
    let last = coords.len() - 2;
    // Half-open segments [a, b); the top coordinate closes the last one.
    let i = (0..last).find(|&i| v < coords[i + 1]).unwrap_or(last);
    let (a, b) = (coords[i], coords[i + 1]);
    let scale = FRAC_PI_2 / (b - a);
    (i, (v - a) * scale, scale)
}

/// Dual-balance constant-power gains and their Jacobian. With `trimmed`
/// every gain is scaled by [`trim`]`(y)`.
pub fn pan_gains_jacobian(p: Position, layout: &SpeakerLayout, trimmed: bool) -> GainJacobian {
    let n = layout.num_channels();
    let mut j = GainJacobian {
        gains: vec![0.0; n],
        d_dx: vec![0.0; n],
        d_dy: vec![0.0; n],
    };
    let inside_x = (0.0..=1.0).contains(&p.x);
    let inside_y = (0.0..=1.0).contains(&p.y);
    let p = Position::new(p.x, p.y);
    let (t, dt) = if trimmed {
        (trim(p.y), trim_derivative(p.y))
    } else {
        (1.0, 0.0)
    };

    let rows = layout.rows();
    let ys: Vec<f64> = rows.iter().map(|r| r.y).collect();
    let (ri, ty, dty) = bracket(&ys, p.y);
    let row_terms: Vec<(usize, f64, f64)> = if rows.len() < 2 {
        vec![(0, 1.0, 0.0)]
    } else {
        vec![
            (ri, ty.cos(), -ty.sin() * dty),
            (ri + 1, ty.sin(), ty.cos() * dty),
        ]
    };

    for (r, rw, drw) in row_terms {
        let row = &rows[r];
        let xs: Vec<f64> = row.speakers.iter().map(|s| s.x).collect();
        let (si, tx, dtx) = bracket(&xs, p.x);
        let spk_terms: Vec<(usize, f64, f64)> = if xs.len() < 2 {
            vec![(0, 1.0, 0.0)]
        } else {
            vec![
                (si, tx.cos(), -tx.sin() * dtx),
                (si + 1, tx.sin(), tx.cos() * dtx),
            ]
        };
        for (s, iw, diw) in spk_terms {
            let c = row.speakers[s].channel;
            j.gains[c] += rw * iw * t;
            if inside_x {
                j.d_dx[c] += rw * diw * t;
            }
            if inside_y {
                j.d_dy[c] += drw * iw * t + rw * iw * dt;
            }
        }
    }
    j
}

/// Speaker gains for `p` including trim; `Σ g² == trim(y)²`.
pub fn pan_gains(p: Position, layout: &SpeakerLayout) -> GainVector {
    GainVector(pan_gains_jacobian(p, layout, true).gains)
}

/// Speaker gains without trim; `Σ g² == 1`.
pub fn pan_gains_untrimmed(p: Position, layout: &SpeakerLayout) -> GainVector {
    GainVector(pan_gains_jacobian(p, layout, false).gains)
}
