use crate::dsp::{standard_filterbank, StftTensor, POSITIONAL_51};
use crate::model::{extract_with_linear_masks, NET_CHANNELS};
use crate::spatial::{render, DepanOptions, LayoutKind};
use crate::{Error, ObjectProduction, Result};

/// Ideal binary masks over the positional channels of `mix`, one
/// `[5][frames][freqs]` plane set per object, plus the complementary bed
/// mask `clamp(1 − Σ_o M_o, 0, 1)`.
///
/// A bin belongs to object `o` in channel `c` when the object's render
/// carries at least as much energy as everything else in the mix:
/// `|S_oc|² ≥ |X_c − S_oc|²`. With `mel_grouped` the decision is taken on
/// mel-band energies per frame and broadcast back to the bins.
pub fn ibm_masks(mix: &StftTensor, truth: &ObjectProduction, mel_grouped: bool) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if truth.n_objects() == 0 {
        return Err(Error::MissingData("ideal masks need ground-truth objects".into()));
    }
    if mix.channels() != 6 || mix.frames() != truth.frames() || mix.freqs() != truth.freqs() {
        return Err(Error::shape(format!(
            "mix {:?} does not match ground truth {}x{}",
            mix.shape(),
            truth.frames(),
            truth.freqs()
        )));
    }
    let (frames, freqs) = (mix.frames(), mix.freqs());
    let plane = frames * freqs;
    let fb = standard_filterbank();
    if mel_grouped && fb.n_freqs() != freqs {
        return Err(Error::shape(format!("mel grouping needs {} bins, got {freqs}", fb.n_freqs())));
    }
    let bands = fb.n_bands();
    let mut object_masks = Vec::with_capacity(truth.n_objects());
    for obj in &truth.objects {
        let alone = ObjectProduction::new(vec![obj.clone()], StftTensor::zeros(6, frames, freqs))?;
        let s = render(&alone, LayoutKind::Surround51)?;
        let mut mask = vec![0.0; NET_CHANNELS * plane];
        let (mut own, mut rest) = (vec![0.0; freqs], vec![0.0; freqs]);
        let (mut own_mel, mut rest_mel, mut band_mask) = (vec![0.0; bands], vec![0.0; bands], vec![0.0; bands]);
        for (i, &c) in POSITIONAL_51.iter().enumerate() {
            for t in 0..frames {
                for (f, (x, so)) in mix.frame(c, t).iter().zip(s.frame(c, t)).enumerate() {
                    own[f] = so.norm_sqr();
                    rest[f] = (x - so).norm_sqr();
                }
                let out = &mut mask[i * plane + t * freqs..i * plane + (t + 1) * freqs];
                if mel_grouped {
                    fb.project(&own, &mut own_mel);
                    fb.project(&rest, &mut rest_mel);
                    for ((m, a), b) in band_mask.iter_mut().zip(&own_mel).zip(&rest_mel) {
                        *m = if a >= b { 1.0 } else { 0.0 };
                    }
                    fb.broadcast(&band_mask, out);
                } else {
                    for ((m, a), b) in out.iter_mut().zip(&own).zip(&rest) {
                        *m = if a >= b { 1.0 } else { 0.0 };
                    }
                }
            }
        }
        object_masks.push(mask);
    }
    let bed = (0..NET_CHANNELS * plane)
        .map(|k| (1.0 - object_masks.iter().map(|m| m[k]).sum::<f64>()).clamp(0.0, 1.0))
        .collect();
    Ok((object_masks, bed))
}

/// Extract a production from `mix` with ideal binary masks computed from
/// the ground truth, through the standard de-pan and mono extraction chain.
pub fn ibm_extract(
    mix: &StftTensor,
    truth: &ObjectProduction,
    mel_grouped: bool,
    opts: &DepanOptions,
) -> Result<ObjectProduction> {
    let (objects, bed) = ibm_masks(mix, truth, mel_grouped)?;
    extract_with_linear_masks(mix, &objects, &bed, opts)
}
