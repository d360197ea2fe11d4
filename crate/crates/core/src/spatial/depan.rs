use std::f64::consts::{FRAC_2_PI, FRAC_1_PI};

use serde::{Deserialize, Serialize};

use super::{Position, Trajectory};
use crate::dsp::{Complex64, StftTensor};
use crate::{Error, Result};

/// A flank whose energy is at most this fraction of the front-row energy is
/// treated as silent, enabling exact pairwise inversion.
pub const FLANK_RATIO: f64 = 1e-6;
const EPS: f64 = 1e-12;

// 5.1 channel indices.
const L: usize = 0;
const R: usize = 1;
const C: usize = 2;
const LS: usize = 4;
const RS: usize = 5;
// Slots in the per-frame energy array.
const E_CH: [usize; 5] = [L, C, R, LS, RS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepanOptions {
    /// Exponential smoothing of the per-frame estimates.
    pub smooth: bool,
    /// Weight of the new estimate when smoothing.
    pub alpha: f64,
    /// Frames whose positional energy falls below this hold the previous
    /// estimate.
    pub silence_threshold: f64,
}

impl Default for DepanOptions {
    fn default() -> Self {
        Self {
            smooth: true,
            alpha: 0.2,
            silence_threshold: 1e-10,
        }
    }
}

impl DepanOptions {
    pub fn unsmoothed() -> Self {
        Self {
            smooth: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrontBranch {
    LeftCentre,
    CentreRight,
    Centroid,
}

/// Angle of `(sqrt(a), sqrt(b))` measured from the `a` axis, with its
/// partials in `a` and `b`.
fn pair_angle(a: f64, b: f64) -> (f64, f64, f64) {
    let v = (a + EPS).sqrt();
    let u = (b + EPS).sqrt();
    let r2 = u * u + v * v;
    (u.atan2(v), -u / r2 / (2.0 * v), v / r2 / (2.0 * u))
}

/// Position estimate from the five positional energies (slots L, C, R, Ls,
/// Rs) and its gradient with respect to them.
fn frame_estimate(e: [f64; 5]) -> (Position, [f64; 5], [f64; 5]) {
    let [el, ec, er, els, ers] = e;
    let ef = el + ec + er;
    let eb = els + ers;

    // Row balance.
    let (ty, dty_df, dty_db) = pair_angle(ef, eb);
    let y = FRAC_2_PI * ty;
    let dy = [
        FRAC_2_PI * dty_df,
        FRAC_2_PI * dty_df,
        FRAC_2_PI * dty_df,
        FRAC_2_PI * dty_db,
        FRAC_2_PI * dty_db,
    ];

    // Front row.
    let branch = if er <= FLANK_RATIO * ef && er <= el {
        FrontBranch::LeftCentre
    } else if el <= FLANK_RATIO * ef {
        FrontBranch::CentreRight
    } else {
        FrontBranch::Centroid
    };
    let (xf, dxf) = match branch {
        FrontBranch::LeftCentre => {
            let (t, da, db) = pair_angle(el, ec);
            (FRAC_1_PI * t, [FRAC_1_PI * da, FRAC_1_PI * db, 0.0])
        }
        FrontBranch::CentreRight => {
            let (t, da, db) = pair_angle(ec, er);
            (0.5 + FRAC_1_PI * t, [0.0, FRAC_1_PI * da, FRAC_1_PI * db])
        }
        FrontBranch::Centroid => {
            let d = ef + EPS;
            let n = 0.5 * ec + er;
            let q = n / (d * d);
            (n / d, [-q, 0.5 / d - q, 1.0 / d - q])
        }
    };

    // Back row.
    let (tb, dtb_l, dtb_r) = pair_angle(els, ers);
    let xb = FRAC_2_PI * tb;
    let dxb = [FRAC_2_PI * dtb_l, FRAC_2_PI * dtb_r];

    // Energy-weighted blend of the two rows.
    let s = ef + eb + EPS;
    let x = (ef * xf + eb * xb) / s;
    let mut dx = [0.0; 5];
    for k in 0..3 {
        dx[k] = (xf + ef * dxf[k] - x) / s;
    }
    for k in 0..2 {
        dx[3 + k] = (xb + eb * dxb[k] - x) / s;
    }
    (Position { x, y }, dx, dy)
}

/// Intermediate values kept for the adjoint of [`depan`].
#[derive(Debug, Clone)]
pub struct DepanTrace {
    opts: DepanOptions,
    held: Vec<bool>,
    dx_de: Vec<[f64; 5]>,
    dy_de: Vec<[f64; 5]>,
}

fn check_51(s: &StftTensor) -> Result<()> {
    if s.channels() != 6 {
        return Err(Error::shape(format!(
            "de-panner expects a 6-channel 5.1 tensor, got {} channels",
            s.channels()
        )));
    }
    Ok(())
}

/// Estimate a trajectory from a 5.1 object spectrogram (LFE ignored).
pub fn depan(obj: &StftTensor, opts: &DepanOptions) -> Result<Trajectory> {
    depan_traced(obj, opts).map(|(t, _)| t)
}

pub fn depan_traced(obj: &StftTensor, opts: &DepanOptions) -> Result<(Trajectory, DepanTrace)> {
    check_51(obj)?;
    let frames = obj.frames();
    let mut raw = Vec::with_capacity(frames);
    let mut trace = DepanTrace {
        opts: *opts,
        held: Vec::with_capacity(frames),
        dx_de: Vec::with_capacity(frames),
        dy_de: Vec::with_capacity(frames),
    };
    let mut prev = Position::default();
    for t in 0..frames {
        let mut e = [0.0; 5];
        for (slot, &ch) in E_CH.iter().enumerate() {
            e[slot] = obj.frame(ch, t).iter().map(|z| z.norm_sqr()).sum();
        }
        let total: f64 = e.iter().sum();
        if total < opts.silence_threshold {
            raw.push(prev);
            trace.held.push(true);
            trace.dx_de.push([0.0; 5]);
            trace.dy_de.push([0.0; 5]);
        } else {
            let (p, dx, dy) = frame_estimate(e);
            raw.push(p);
            prev = p;
            trace.held.push(false);
            trace.dx_de.push(dx);
            trace.dy_de.push(dy);
        }
    }
    let positions = if opts.smooth {
        let a = opts.alpha;
        let mut out: Vec<Position> = Vec::with_capacity(frames);
        for (t, r) in raw.iter().enumerate() {
            let p = if t == 0 {
                *r
            } else {
                let s = out[t - 1];
                Position {
                    x: a * r.x + (1.0 - a) * s.x,
                    y: a * r.y + (1.0 - a) * s.y,
                }
            };
            out.push(p);
        }
        out
    } else {
        raw
    };
    Ok((Trajectory::new(positions), trace))
}

impl DepanTrace {
    /// Accumulate `∂L/∂obj` given `∂L/∂(x, y)` per frame.
    pub fn backward(&self, obj: &StftTensor, dtraj: &[(f64, f64)], dobj: &mut [Complex64]) {
        let frames = self.held.len();
        let mut draw: Vec<(f64, f64)> = dtraj.to_vec();
        if self.opts.smooth {
            let a = self.opts.alpha;
            let mut carry = (0.0, 0.0);
            for t in (0..frames).rev() {
                let ds = (dtraj[t].0 + carry.0, dtraj[t].1 + carry.1);
                if t == 0 {
                    draw[0] = ds;
                } else {
                    draw[t] = (a * ds.0, a * ds.1);
                    carry = ((1.0 - a) * ds.0, (1.0 - a) * ds.1);
                }
            }
        }
        // A held frame copies the last estimated frame.
        for t in (0..frames).rev() {
            if self.held[t] && t > 0 {
                let d = draw[t];
                draw[t - 1].0 += d.0;
                draw[t - 1].1 += d.1;
                draw[t] = (0.0, 0.0);
            }
        }
        let freqs = obj.freqs();
        let plane = obj.frames() * freqs;
        for t in 0..frames {
            if self.held[t] {
                continue;
            }
            let (gx, gy) = draw[t];
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            for (slot, &ch) in E_CH.iter().enumerate() {
                let de = gx * self.dx_de[t][slot] + gy * self.dy_de[t][slot];
                let src = obj.frame(ch, t);
                let dst = &mut dobj[ch * plane + t * freqs..ch * plane + (t + 1) * freqs];
                for (d, z) in dst.iter_mut().zip(src) {
                    *d += z * (2.0 * de);
                }
            }
        }
    }
}
