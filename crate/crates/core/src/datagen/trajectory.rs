use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::N_FRAMES;
use crate::spatial::{Position, Trajectory};
use crate::{Error, Result};

/// Waypoints lie in `[MARGIN, 1 − MARGIN]²`.
pub const MARGIN: f64 = 0.05;
const MAX_ATTEMPTS: usize = 1000;

/// Random spline trajectory parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySpec {
    /// Number of spline knots; 1 gives a static object.
    pub waypoints: usize,
    /// Speed below which a frame counts as slow.
    pub v_min: f64,
    /// Largest allowed per-frame acceleration.
    pub a_max: f64,
    /// Waypoint sets whose mean slow-motion hinge reaches this value are redrawn.
    pub max_slow_score: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            waypoints: 4,
            v_min: 0.002,
            a_max: 0.01,
            max_slow_score: 0.15,
        }
    }
}

impl TrajectorySpec {
    pub fn static_object() -> Self {
        Self {
            waypoints: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints == 0 {
            return Err(Error::Config("trajectory needs at least one waypoint".into()));
        }
        if self.waypoints > N_FRAMES {
            return Err(Error::Config(format!("at most {N_FRAMES} waypoints")));
        }
        if !(self.v_min > 0.0 && self.a_max > 0.0 && self.max_slow_score > 0.0) {
            return Err(Error::Config("trajectory thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Second derivatives of the natural cubic spline through `(i·h, y_i)`.
fn natural_spline_moments(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior system
    // h·M[i-1] + 4h·M[i] + h·M[i+1] = 6 (y[i+1] − 2y[i] + y[i-1]) / h.
    let k = n - 2;
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    for i in 0..k {
        let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
        let (a, b, cc) = (1.0, 4.0, 1.0);
        if i == 0 {
            c[i] = cc / b;
            d[i] = rhs / b;
        } else {
            let den = b - a * c[i - 1];
            c[i] = cc / den;
            d[i] = (rhs - a * d[i - 1]) / den;
        }
    }
    for i in (0..k).rev() {
        m[i + 1] = d[i] - if i + 1 < k { c[i] * m[i + 2] } else { 0.0 };
    }
    m
}

fn eval_spline(y: &[f64], m: &[f64], h: f64, t: f64) -> f64 {
    let seg = ((t / h) as usize).min(y.len() - 2);
    let (t0, t1) = (seg as f64 * h, (seg + 1) as f64 * h);
    let (a, b) = ((t1 - t) / h, (t - t0) / h);
    a * y[seg] + b * y[seg + 1] + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0
}

/// Natural cubic spline through equally spaced waypoints, sampled at
/// `frames` frames and clamped to the unit square.
pub fn spline_through(waypoints: &[(f64, f64)], frames: usize) -> Trajectory {
    if waypoints.len() == 1 || frames < 2 {
        let (x, y) = waypoints[0];
        return Trajectory::constant(Position::new(x, y), frames);
    }
    let h = (frames - 1) as f64 / (waypoints.len() - 1) as f64;
    let xs: Vec<f64> = waypoints.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = waypoints.iter().map(|p| p.1).collect();
    let (mx, my) = (natural_spline_moments(&xs, h), natural_spline_moments(&ys, h));
    Trajectory::new(
        (0..frames)
            .map(|t| Position::new(eval_spline(&xs, &mx, h, t as f64), eval_spline(&ys, &my, h, t as f64)))
            .collect(),
    )
}

/// Mean of `max(0, v_min − ‖v‖)/v_min` over frame-to-frame velocities.
pub fn slow_motion_score(t: &Trajectory, v_min: f64) -> f64 {
    let p = &t.positions;
    if p.len() < 2 {
        return 0.0;
    }
    p.windows(2)
        .map(|w| (v_min - (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).max(0.0) / v_min)
        .sum::<f64>()
        / (p.len() - 1) as f64
}

pub fn max_acceleration(t: &Trajectory) -> f64 {
    t.positions
        .windows(3)
        .map(|w| (w[2].x - 2.0 * w[1].x + w[0].x).hypot(w[2].y - 2.0 * w[1].y + w[0].y))
        .fold(0.0, f64::max)
}

/// Random waypoints in `[0.05, 0.95]²` joined by a natural cubic spline over
/// 256 frames. Waypoint sets that would move too slowly or accelerate too
/// hard are redrawn from the same stream, so the result is a pure function
/// of `(spec, seed)`.
pub fn gen_trajectory(spec: &TrajectorySpec, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
        (0..spec.waypoints)
            .map(|_| (rng.gen_range(MARGIN..=1.0 - MARGIN), rng.gen_range(MARGIN..=1.0 - MARGIN)))
            .collect()
    };
    if spec.waypoints == 1 {
        return Ok(spline_through(&draw(&mut rng), N_FRAMES));
    }
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        let t = spline_through(&draw(&mut rng), N_FRAMES);
        if slow_motion_score(&t, spec.v_min) < spec.max_slow_score && max_acceleration(&t) < spec.a_max {
            return Ok(t);
        }
        last = Some(t);
    }
    Err(Error::Config(format!(
        "no trajectory met the motion limits in {MAX_ATTEMPTS} draws (last slow score {:.3})",
        last.map(|t| slow_motion_score(&t, spec.v_min)).unwrap_or(0.0)
    )))
}
