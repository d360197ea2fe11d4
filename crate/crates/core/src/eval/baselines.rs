use crate::dsp::Waveform;
use crate::Result;

const L: usize = 0;
const R: usize = 1;
const C: usize = 2;
const LS: usize = 4;
const RS: usize = 5;

/// `Σ g·channel / div`, evaluated in that order.
fn combine(mix51: &Waveform, terms: &[(usize, f64)], div: f64) -> Result<Waveform> {
    mix51.ensure_51()?;
    let mut out = vec![0.0; mix51.len()];
    for &(c, g) in terms {
        for (o, x) in out.iter_mut().zip(&mix51.channels[c]) {
            *o += g * x;
        }
    }
    out.iter_mut().for_each(|o| *o /= div);
    Waveform::with_rate(mix51.sample_rate, &["M"], vec![out])
}

/// `(L + R + C + Ls + Rs) / 5`; the LFE is left out.
pub fn baseline_mono(mix51: &Waveform) -> Result<Waveform> {
    combine(mix51, &[(L, 1.0), (R, 1.0), (C, 1.0), (LS, 1.0), (RS, 1.0)], 5.0)
}

/// Left `(2L + C) / 3`, right `(2R + C) / 3` and surround `(Ls + Rs) / 2`.
pub fn baseline_three(mix51: &Waveform) -> Result<[Waveform; 3]> {
    Ok([
        combine(mix51, &[(L, 2.0), (C, 1.0)], 3.0)?,
        combine(mix51, &[(R, 2.0), (C, 1.0)], 3.0)?,
        combine(mix51, &[(LS, 1.0), (RS, 1.0)], 2.0)?,
    ])
}

/// The input passed through as the bed.
pub fn baseline_bed(mix51: &Waveform) -> Result<Waveform> {
    mix51.ensure_51()?;
    Ok(mix51.clone())
}

/// The baseline's object estimates for `n` objects: the three-way downmix
/// when `n` is 3, the mono downmix repeated otherwise.
pub fn baseline_objects(mix51: &Waveform, n: usize) -> Result<Vec<Waveform>> {
    if n == 3 {
        Ok(baseline_three(mix51)?.to_vec())
    } else {
        Ok(vec![baseline_mono(mix51)?; n])
    }
}
