use super::{pan_gains_jacobian, trim, trim_derivative, LayoutKind, Trajectory};
use crate::dsp::{Complex64, StftTensor};
use crate::{Error, Result};

const EPS: f64 = 1e-12;

fn check_mono(track: &StftTensor, traj: &Trajectory) -> Result<()> {
    if track.channels() != 1 {
        return Err(Error::shape(format!("expected a mono track, got {} channels", track.channels())));
    }
    traj.ensure_frames(track.frames())
}

fn scale_frames(track: &StftTensor, traj: &Trajectory, gain: impl Fn(f64) -> f64) -> Result<StftTensor> {
    check_mono(track, traj)?;
    let mut out = track.clone();
    for t in 0..track.frames() {
        let g = gain(traj.positions[t].y);
        out.frame_mut(0, t).iter_mut().for_each(|z| *z *= g);
    }
    Ok(out)
}

/// Undo the renderer's trim: divide each frame by `trim(y(t))`.
pub fn detrim(track: &StftTensor, traj: &Trajectory) -> Result<StftTensor> {
    scale_frames(track, traj, |y| 1.0 / trim(y))
}

/// Apply the renderer's trim (inverse of [`detrim`]).
pub fn retrim(track: &StftTensor, traj: &Trajectory) -> Result<StftTensor> {
    scale_frames(track, traj, trim)
}

/// Adjoint of [`detrim`]. `out` is the forward result.
pub fn detrim_backward(
    out: &StftTensor,
    traj: &Trajectory,
    dout: &[Complex64],
    dtrack: &mut [Complex64],
    dtraj: &mut [(f64, f64)],
) {
    let freqs = out.freqs();
    for t in 0..out.frames() {
        let y = traj.positions[t].y;
        let inv = 1.0 / trim(y);
        let d = &dout[t * freqs..(t + 1) * freqs];
        let o = out.frame(0, t);
        let mut dt = 0.0;
        for ((g, z), dz) in dtrack[t * freqs..(t + 1) * freqs].iter_mut().zip(o).zip(d) {
            *g += dz * inv;
            dt += z.re * dz.re + z.im * dz.im;
        }
        // out = s / T(y)  ⇒  ∂out/∂y = -out · T'(y) / T(y)
        dtraj[t].1 -= dt * trim_derivative(y) * inv;
    }
}

/// Least-squares projection of a 5.1 object spectrogram onto the untrimmed
/// panning gains of its trajectory, followed by de-trimming:
/// `ŝ = Σ_c g_c Y_c / (Σ_c g_c² + ε) / trim(y)`.
pub fn extract_mono(obj: &StftTensor, traj: &Trajectory) -> Result<StftTensor> {
    if obj.channels() != 6 {
        return Err(Error::shape(format!("expected a 5.1 tensor, got {} channels", obj.channels())));
    }
    traj.ensure_frames(obj.frames())?;
    let layout = LayoutKind::Surround51.layout();
    let freqs = obj.freqs();
    let mut out = StftTensor::zeros(1, obj.frames(), freqs);
    for t in 0..obj.frames() {
        let p = traj.positions[t];
        let g = pan_gains_jacobian(p, layout, false).gains;
        let norm: f64 = g.iter().map(|v| v * v).sum::<f64>() + EPS;
        let scale = 1.0 / (norm * trim(p.y));
        let dst = out.frame_mut(0, t);
        for (c, gc) in g.iter().enumerate() {
            if *gc == 0.0 {
                continue;
            }
            for (d, y) in dst.iter_mut().zip(obj.frame(c, t)) {
                *d += y * (gc * scale);
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`extract_mono`]. `out` is the forward result.
pub fn extract_mono_backward(
    obj: &StftTensor,
    traj: &Trajectory,
    out: &StftTensor,
    dout: &[Complex64],
    dobj: &mut [Complex64],
    dtraj: &mut [(f64, f64)],
) {
    let layout = LayoutKind::Surround51.layout();
    let freqs = obj.freqs();
    let plane = obj.frames() * freqs;
    for t in 0..obj.frames() {
        let p = traj.positions[t];
        let j = pan_gains_jacobian(p, layout, false);
        let norm: f64 = j.gains.iter().map(|v| v * v).sum::<f64>() + EPS;
        let tr = trim(p.y);
        let scale = 1.0 / (norm * tr);
        let d = &dout[t * freqs..(t + 1) * freqs];

        // B = Σ_f Re(conj(ŝ) dŝ)
        let b: f64 = out
            .frame(0, t)
            .iter()
            .zip(d)
            .map(|(z, dz)| z.re * dz.re + z.im * dz.im)
            .sum();
        let (mut dx, mut dy) = (0.0, 0.0);
        for c in 0..6 {
            let gc = j.gains[c];
            let y = obj.frame(c, t);
            if gc != 0.0 {
                let dst = &mut dobj[c * plane + t * freqs..c * plane + (t + 1) * freqs];
                for (g, dz) in dst.iter_mut().zip(d) {
                    *g += dz * (gc * scale);
                }
            }
            if j.d_dx[c] != 0.0 || j.d_dy[c] != 0.0 {
                let a: f64 = y.iter().zip(d).map(|(z, dz)| z.re * dz.re + z.im * dz.im).sum();
                let dgc = a * scale - b * 2.0 * gc / norm;
                dx += dgc * j.d_dx[c];
                dy += dgc * j.d_dy[c];
            }
        }
        dy += -b / tr * trim_derivative(p.y);
        dtraj[t].0 += dx;
        dtraj[t].1 += dy;
    }
}
