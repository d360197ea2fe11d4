use super::{bed_fold, pan_gains_jacobian, LayoutKind};
use crate::dsp::{Complex64, StftTensor};
use crate::{ObjectProduction, ProductionGrad, Result};

/// Render objects and bed to `kind`:
/// `out[c][t][f] = Σ_o g_o(t)[c] · S_o[t][f] + fold(bed)[c][t][f]`.
pub fn render(prod: &ObjectProduction, kind: LayoutKind) -> Result<StftTensor> {
    prod.validate()?;
    let layout = kind.layout();
    let (frames, freqs) = (prod.frames(), prod.freqs());
    let mut out = StftTensor::zeros(layout.num_channels(), frames, freqs);

    for (c, terms) in bed_fold(kind).iter().enumerate() {
        let dst = out.channel_mut(c);
        for &(b, g) in terms {
            for (d, s) in dst.iter_mut().zip(prod.bed.channel(b)) {
                *d += s * g;
            }
        }
    }

    for obj in &prod.objects {
        for t in 0..frames {
            let gains = pan_gains_jacobian(obj.trajectory.positions[t], layout, true).gains;
            let src = obj.track.frame(0, t);
            for (c, g) in gains.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                for (d, s) in out.frame_mut(c, t).iter_mut().zip(src) {
                    *d += s * g;
                }
            }
        }
    }
    Ok(out)
}

/// Accumulate the adjoint of [`render`] given `dout = ∂L/∂out`.
pub fn render_backward(
    prod: &ObjectProduction,
    kind: LayoutKind,
    dout: &[Complex64],
    grad: &mut ProductionGrad,
) {
    let layout = kind.layout();
    let (frames, freqs) = (prod.frames(), prod.freqs());
    let plane = frames * freqs;

    for (c, terms) in bed_fold(kind).iter().enumerate() {
        let src = &dout[c * plane..(c + 1) * plane];
        for &(b, g) in terms {
            for (d, s) in grad.bed[b * plane..(b + 1) * plane].iter_mut().zip(src) {
                *d += s * g;
            }
        }
    }

    for (o, obj) in prod.objects.iter().enumerate() {
        for t in 0..frames {
            let j = pan_gains_jacobian(obj.trajectory.positions[t], layout, true);
            let track = obj.track.frame(0, t);
            let dtrack = &mut grad.tracks[o][t * freqs..(t + 1) * freqs];
            let (mut dx, mut dy) = (0.0, 0.0);
            for c in 0..layout.num_channels() {
                let dframe = &dout[c * plane + t * freqs..c * plane + (t + 1) * freqs];
                let g = j.gains[c];
                if g != 0.0 {
                    for (d, s) in dtrack.iter_mut().zip(dframe) {
                        *d += s * g;
                    }
                }
                if j.d_dx[c] != 0.0 || j.d_dy[c] != 0.0 {
                    let dg: f64 = track
                        .iter()
                        .zip(dframe)
                        .map(|(s, d)| s.re * d.re + s.im * d.im)
                        .sum();
                    dx += dg * j.d_dx[c];
                    dy += dg * j.d_dy[c];
                }
            }
            grad.trajectories[o][t].0 += dx;
            grad.trajectories[o][t].1 += dy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{Position, Trajectory};
    use crate::ObjectTrack;

    fn tone(frames: usize, freqs: usize, seed: f64) -> StftTensor {
        let data = (0..frames * freqs)
            .map(|i| Complex64::new((i as f64 * seed).sin(), (i as f64 * seed * 1.3).cos()))
            .collect();
        StftTensor::from_data(1, frames, freqs, data).unwrap()
    }

    fn production(objs: Vec<(StftTensor, Trajectory)>, bed: StftTensor) -> ObjectProduction {
        ObjectProduction::new(
            objs.into_iter()
                .map(|(track, trajectory)| ObjectTrack { track, trajectory })
                .collect(),
            bed,
        )
        .unwrap()
    }

    #[test]
    fn bed_only_passes_through_51() {
        let mut bed = StftTensor::zeros(6, 4, 5);
        for (i, z) in bed.data_mut().iter_mut().enumerate() {
            *z = Complex64::new(i as f64, -(i as f64));
        }
        let p = production(vec![], bed.clone());
        assert_eq!(render(&p, LayoutKind::Surround51).unwrap(), bed);
    }

    #[test]
    fn on_speaker_object_lands_in_centre() {
        let s = tone(4, 5, 0.3);
        let p = production(
            vec![(s.clone(), Trajectory::constant(Position::new(0.5, 0.0), 4))],
            StftTensor::zeros(6, 4, 5),
        );
        let out = render(&p, LayoutKind::Surround51).unwrap();
        assert_eq!(out.channel(2), s.channel(0));
        for c in [0, 1, 3, 4, 5] {
            assert!(out.channel(c).iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn quarter_position_splits_energy_evenly() {
        let s = tone(4, 5, 0.7);
        let p = production(
            vec![(s.clone(), Trajectory::constant(Position::new(0.25, 0.0), 4))],
            StftTensor::zeros(6, 4, 5),
        );
        let out = render(&p, LayoutKind::Surround51).unwrap();
        for t in 0..4 {
            let e: f64 = s.frame(0, t).iter().map(|z| z.norm_sqr()).sum();
            let el: f64 = out.frame(0, t).iter().map(|z| z.norm_sqr()).sum();
            let ec: f64 = out.frame(2, t).iter().map(|z| z.norm_sqr()).sum();
            assert!((el / e - 0.5).abs() < 1e-12);
            assert!((ec / e - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_mismatch_is_an_error() {
        let p = ObjectProduction {
            objects: vec![ObjectTrack {
                track: tone(4, 5, 0.1),
                trajectory: Trajectory::constant(Position::default(), 3),
            }],
            bed: StftTensor::zeros(6, 4, 5),
        };
        assert!(render(&p, LayoutKind::Surround51).is_err());
    }

    #[test]
    fn adjoint_identity() {
        // <render(p), d> is linear in tracks/bed, so the adjoint must satisfy
        // <dL/dtrack, track> + <dL/dbed, bed> == <out, d> at fixed trajectories.
        let traj = Trajectory::new(
            (0..4).map(|t| Position::new(0.2 + 0.15 * t as f64, 0.1 + 0.2 * t as f64)).collect(),
        );
        let mut bed = StftTensor::zeros(6, 4, 5);
        for (i, z) in bed.data_mut().iter_mut().enumerate() {
            *z = Complex64::new((i as f64).cos(), 0.2);
        }
        let p = production(vec![(tone(4, 5, 0.4), traj)], bed);
        for kind in LayoutKind::ALL {
            let out = render(&p, kind).unwrap();
            let d: Vec<Complex64> = (0..out.data().len())
                .map(|i| Complex64::new((i as f64 * 0.9).sin(), (i as f64 * 0.5).cos()))
                .collect();
            let lhs: f64 = out.data().iter().zip(&d).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
            let mut g = ProductionGrad::zeros_like(&p);
            render_backward(&p, kind, &d, &mut g);
            let dot = |a: &[Complex64], b: &[Complex64]| -> f64 {
                a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
            };
            let rhs = dot(&g.tracks[0], p.objects[0].track.data()) + dot(&g.bed, p.bed.data());
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{kind}");
        }
    }
}
