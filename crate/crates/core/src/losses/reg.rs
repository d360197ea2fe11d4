//! The seven production regularizers. Each `*_grad` variant adds
//! `scale · ∂term` into a [`ProductionGrad`] and returns the term value.

use serde::{Deserialize, Serialize};

use crate::dsp::{magnitude, standard_filterbank, Complex64, StftTensor, N_FREQS, POSITIONAL_51};
use crate::spatial::Position;
use crate::{Error, ObjectProduction, ProductionGrad, Result};

const EPS: f64 = 1e-12;

/// The five 5.1 positional speakers on the unit square.
pub const SPEAKERS_51: [(f64, f64); 5] = [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];

/// Shape parameters of the regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegThresholds {
    /// Width of the speaker-proximity kernel.
    pub speaker_sigma: f64,
    /// Speed below which motion counts as slow (units per frame).
    pub v_min: f64,
    /// Acceleration above which motion counts as jumpy (units per frame²).
    pub a_max: f64,
    /// Width of the object-proximity kernel.
    pub object_sigma: f64,
}

impl Default for RegThresholds {
    fn default() -> Self {
        Self {
            speaker_sigma: 0.1,
            v_min: 0.002,
            a_max: 0.01,
            object_sigma: 0.1,
        }
    }
}

fn positional_mean_magnitude(s: &StftTensor) -> f64 {
    let mut sum = 0.0;
    for c in POSITIONAL_51 {
        sum += s.channel(c).iter().map(|z| magnitude(*z)).sum::<f64>();
    }
    sum / (5 * s.frames() * s.freqs()).max(1) as f64
}

fn check_mix(prod: &ObjectProduction, mix: &StftTensor) -> Result<()> {
    mix.ensure_shape(&prod.bed)
}

/// (i) Mean bed magnitude over the positional channels relative to the mix.
pub fn reg_bed_content(prod: &ObjectProduction, mix51: &StftTensor) -> Result<f64> {
    reg_bed_content_grad(prod, mix51, None)
}

pub fn reg_bed_content_grad(
    prod: &ObjectProduction,
    mix51: &StftTensor,
    grad: Option<(&mut ProductionGrad, f64)>,
) -> Result<f64> {
    check_mix(prod, mix51)?;
    let denom = positional_mean_magnitude(mix51);
    if denom <= EPS {
        return Ok(0.0);
    }
    let value = positional_mean_magnitude(&prod.bed) / denom;
    if let Some((g, scale)) = grad {
        let plane = prod.frames() * prod.freqs();
        let s = scale / (denom * (5 * plane) as f64);
        for c in POSITIONAL_51 {
            for (d, z) in g.bed[c * plane..(c + 1) * plane].iter_mut().zip(prod.bed.channel(c)) {
                let m = magnitude(*z);
                if m > 0.0 {
                    *d += z * (s / m);
                }
            }
        }
    }
    Ok(value)
}

/// (ii) Mean of `exp(−d²/σ²)` to the nearest 5.1 speaker.
pub fn reg_speaker_proximity(prod: &ObjectProduction, th: &RegThresholds) -> f64 {
    reg_speaker_proximity_grad(prod, th, None)
}

pub fn reg_speaker_proximity_grad(
    prod: &ObjectProduction,
    th: &RegThresholds,
    mut grad: Option<(&mut ProductionGrad, f64)>,
) -> f64 {
    let count = prod.n_objects() * prod.frames();
    if count == 0 {
        return 0.0;
    }
    let s2 = th.speaker_sigma * th.speaker_sigma;
    let mut sum = 0.0;
    for (o, obj) in prod.objects.iter().enumerate() {
        for (t, p) in obj.trajectory.positions.iter().enumerate() {
            let (sx, sy) = nearest_speaker(*p);
            let (dx, dy) = (p.x - sx, p.y - sy);
            let k = (-(dx * dx + dy * dy) / s2).exp();
            sum += k;
            if let Some((g, scale)) = grad.as_mut() {
                let f = *scale * k * -2.0 / s2 / count as f64;
                g.trajectories[o][t].0 += f * dx;
                g.trajectories[o][t].1 += f * dy;
            }
        }
    }
    sum / count as f64
}

fn nearest_speaker(p: Position) -> (f64, f64) {
    let mut best = SPEAKERS_51[0];
    let mut best_d = f64::INFINITY;
    for s in SPEAKERS_51 {
        let d = (p.x - s.0).powi(2) + (p.y - s.1).powi(2);
        if d < best_d {
            best_d = d;
            best = s;
        }
    }
    best
}

/// (iii) Mean hinge `max(0, v_min − ‖v‖)/v_min` over frame-to-frame
/// velocities.
pub fn reg_slow_motion(prod: &ObjectProduction, th: &RegThresholds) -> f64 {
    reg_slow_motion_grad(prod, th, None)
}

pub fn reg_slow_motion_grad(
    prod: &ObjectProduction,
    th: &RegThresholds,
    mut grad: Option<(&mut ProductionGrad, f64)>,
) -> f64 {
    let frames = prod.frames();
    if prod.n_objects() == 0 || frames < 2 {
        return 0.0;
    }
    let count = (prod.n_objects() * (frames - 1)) as f64;
    let mut sum = 0.0;
    for (o, obj) in prod.objects.iter().enumerate() {
        let p = &obj.trajectory.positions;
        for t in 1..frames {
            let (vx, vy) = (p[t].x - p[t - 1].x, p[t].y - p[t - 1].y);
            let speed = vx.hypot(vy);
            if speed >= th.v_min {
                continue;
            }
            sum += (th.v_min - speed) / th.v_min;
            if speed > 0.0 {
                if let Some((g, scale)) = grad.as_mut() {
                    let f = -*scale / (th.v_min * speed * count);
                    g.trajectories[o][t].0 += f * vx;
                    g.trajectories[o][t].1 += f * vy;
                    g.trajectories[o][t - 1].0 -= f * vx;
                    g.trajectories[o][t - 1].1 -= f * vy;
                }
            }
        }
    }
    sum / count
}

/// (iv) Mean squared hinge `max(0, ‖a‖ − a_max)²/a_max²` over the
/// second differences of each trajectory.
pub fn reg_acceleration(prod: &ObjectProduction, th: &RegThresholds) -> f64 {
    reg_acceleration_grad(prod, th, None)
}

pub fn reg_acceleration_grad(
    prod: &ObjectProduction,
    th: &RegThresholds,
    mut grad: Option<(&mut ProductionGrad, f64)>,
) -> f64 {
    let frames = prod.frames();
    if prod.n_objects() == 0 || frames < 3 {
        return 0.0;
    }
    let count = (prod.n_objects() * (frames - 2)) as f64;
    let a2 = th.a_max * th.a_max;
    let mut sum = 0.0;
    for (o, obj) in prod.objects.iter().enumerate() {
        let p = &obj.trajectory.positions;
        for t in 2..frames {
            let ax = p[t].x - 2.0 * p[t - 1].x + p[t - 2].x;
            let ay = p[t].y - 2.0 * p[t - 1].y + p[t - 2].y;
            let norm = ax.hypot(ay);
            let excess = norm - th.a_max;
            if excess <= 0.0 {
                continue;
            }
            sum += excess * excess / a2;
            if let Some((g, scale)) = grad.as_mut() {
                let f = *scale * 2.0 * excess / (a2 * norm * count);
                let tr = &mut g.trajectories[o];
                for (k, w) in [(t, 1.0), (t - 1, -2.0), (t - 2, 1.0)] {
                    tr[k].0 += f * w * ax;
                    tr[k].1 += f * w * ay;
                }
            }
        }
    }
    sum / count
}

/// (v) Mean of `exp(−‖p_i − p_j‖²/σ²)` over object pairs and frames.
pub fn reg_object_proximity(prod: &ObjectProduction, th: &RegThresholds) -> f64 {
    reg_object_proximity_grad(prod, th, None)
}

pub fn reg_object_proximity_grad(
    prod: &ObjectProduction,
    th: &RegThresholds,
    mut grad: Option<(&mut ProductionGrad, f64)>,
) -> f64 {
    let n = prod.n_objects();
    let frames = prod.frames();
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs == 0 || frames == 0 {
        return 0.0;
    }
    let count = (pairs * frames) as f64;
    let s2 = th.object_sigma * th.object_sigma;
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for t in 0..frames {
                let (pi, pj) = (prod.objects[i].trajectory.positions[t], prod.objects[j].trajectory.positions[t]);
                let (dx, dy) = (pi.x - pj.x, pi.y - pj.y);
                let k = (-(dx * dx + dy * dy) / s2).exp();
                sum += k;
                if let Some((g, scale)) = grad.as_mut() {
                    let f = *scale * k * -2.0 / (s2 * count);
                    g.trajectories[i][t].0 += f * dx;
                    g.trajectories[i][t].1 += f * dy;
                    g.trajectories[j][t].0 -= f * dx;
                    g.trajectories[j][t].1 -= f * dy;
                }
            }
        }
    }
    sum / count
}

/// Pearson correlation `cov / sqrt(var_a var_b + ε)` and its gradients.
fn pearson(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let da: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let db: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let cov = da.iter().zip(&db).map(|(x, y)| x * y).sum::<f64>() / n;
    let va = da.iter().map(|x| x * x).sum::<f64>() / n;
    let vb = db.iter().map(|x| x * x).sum::<f64>() / n;
    let s = (va * vb + EPS).sqrt();
    let rho = cov / s;
    // Centering terms vanish because Σ da = Σ db = 0.
    let ga = da
        .iter()
        .zip(&db)
        .map(|(x, y)| y / (n * s) - rho * vb * x / (n * s * s))
        .collect();
    let gb = da
        .iter()
        .zip(&db)
        .map(|(x, y)| x / (n * s) - rho * va * y / (n * s * s))
        .collect();
    (rho, ga, gb)
}

/// (vi) Mean over object pairs of `(|ρ_x| + |ρ_y|)/2`.
pub fn reg_traj_correlation(prod: &ObjectProduction) -> f64 {
    reg_traj_correlation_grad(prod, None)
}

pub fn reg_traj_correlation_grad(prod: &ObjectProduction, mut grad: Option<(&mut ProductionGrad, f64)>) -> f64 {
    let n = prod.n_objects();
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs == 0 || prod.frames() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let (ti, tj) = (&prod.objects[i].trajectory, &prod.objects[j].trajectory);
            for axis in 0..2 {
                let (a, b) = if axis == 0 { (ti.xs(), tj.xs()) } else { (ti.ys(), tj.ys()) };
                let (rho, ga, gb) = pearson(&a, &b);
                sum += rho.abs() / 2.0;
                if let Some((g, scale)) = grad.as_mut() {
                    let f = *scale * rho.signum() / (2.0 * pairs as f64);
                    if rho == 0.0 {
                        continue;
                    }
                    for t in 0..a.len() {
                        let (di, dj) = (f * ga[t], f * gb[t]);
                        if axis == 0 {
                            g.trajectories[i][t].0 += di;
                            g.trajectories[j][t].0 += dj;
                        } else {
                            g.trajectories[i][t].1 += di;
                            g.trajectories[j][t].1 += dj;
                        }
                    }
                }
            }
        }
    }
    sum / pairs as f64
}

/// Mel power map `[frame][band]` of the sum of power over `channels`.
fn mel_power_map(s: &StftTensor, channels: &[usize]) -> Vec<f64> {
    let fb = standard_filterbank();
    let (frames, bands) = (s.frames(), fb.n_bands());
    let mut map = vec![0.0; frames * bands];
    let mut p = vec![0.0; s.freqs()];
    let mut tmp = vec![0.0; bands];
    for t in 0..frames {
        p.iter_mut().for_each(|v| *v = 0.0);
        for &c in channels {
            for (v, z) in p.iter_mut().zip(s.frame(c, t)) {
                *v += z.norm_sqr();
            }
        }
        fb.project(&p, &mut tmp);
        map[t * bands..(t + 1) * bands].copy_from_slice(&tmp);
    }
    map
}

/// Adds `∂/∂S` of a map gradient `dmap` into `grad` (one plane per channel).
fn mel_power_map_backward(s: &StftTensor, channels: &[usize], dmap: &[f64], grad: &mut [Complex64]) {
    let fb = standard_filterbank();
    let (frames, freqs, bands) = (s.frames(), s.freqs(), fb.n_bands());
    let plane = frames * freqs;
    let mut dp = vec![0.0; freqs];
    for t in 0..frames {
        dp.iter_mut().for_each(|v| *v = 0.0);
        fb.project_transpose_add(&dmap[t * bands..(t + 1) * bands], &mut dp);
        for &c in channels {
            let src = s.frame(c, t);
            let dst = &mut grad[c * plane + t * freqs..c * plane + (t + 1) * freqs];
            for ((d, z), w) in dst.iter_mut().zip(src).zip(&dp) {
                *d += z * (2.0 * w);
            }
        }
    }
}

/// Cosine similarity `⟨a,b⟩ / sqrt((‖a‖²+ε)(‖b‖²+ε))` and its gradients.
fn cosine(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa = a.iter().map(|x| x * x).sum::<f64>() + EPS;
    let bb = b.iter().map(|x| x * x).sum::<f64>() + EPS;
    let norm = (aa * bb).sqrt();
    let c = ab / norm;
    let ga = a.iter().zip(b).map(|(x, y)| y / norm - c * x / aa).collect();
    let gb = a.iter().zip(b).map(|(x, y)| x / norm - c * y / bb).collect();
    (c, ga, gb)
}

/// (vii) Mean cosine similarity of mel power maps over object pairs and
/// object–bed pairs; the bed map sums the positional channels.
pub fn reg_content_correlation(prod: &ObjectProduction) -> Result<f64> {
    reg_content_correlation_grad(prod, None)
}

pub fn reg_content_correlation_grad(
    prod: &ObjectProduction,
    mut grad: Option<(&mut ProductionGrad, f64)>,
) -> Result<f64> {
    let n = prod.n_objects();
    if n == 0 {
        return Ok(0.0);
    }
    if prod.freqs() != N_FREQS {
        return Err(Error::shape(format!("content correlation needs {N_FREQS} bins")));
    }
    let mut maps: Vec<Vec<f64>> = prod.objects.iter().map(|o| mel_power_map(&o.track, &[0])).collect();
    maps.push(mel_power_map(&prod.bed, &POSITIONAL_51));
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect();
    let mut dmaps = vec![vec![0.0; maps[0].len()]; n + 1];
    let mut sum = 0.0;
    for &(i, j) in &pairs {
        let (c, gi, gj) = cosine(&maps[i], &maps[j]);
        sum += c;
        for (d, g) in dmaps[i].iter_mut().zip(&gi) {
            *d += g;
        }
        for (d, g) in dmaps[j].iter_mut().zip(&gj) {
            *d += g;
        }
    }
    let count = pairs.len() as f64;
    if let Some((g, scale)) = grad.as_mut() {
        let s = *scale / count;
        for d in dmaps.iter_mut().flatten() {
            *d *= s;
        }
        for (o, obj) in prod.objects.iter().enumerate() {
            mel_power_map_backward(&obj.track, &[0], &dmaps[o], &mut g.tracks[o]);
        }
        mel_power_map_backward(&prod.bed, &POSITIONAL_51, &dmaps[n], &mut g.bed);
    }
    Ok(sum / count)
}
