use super::masknet::{self, MaskNetTrace, MaskSet};
use super::params::{ParamStore, NET_CHANNELS};
use crate::dsp::{self, standard_filterbank, Complex64, StftTensor, Waveform, LFE_51, N_FREQS, POSITIONAL_51};
use crate::production::{ObjectProduction, ObjectTrack, ProductionGrad};
use crate::spatial::{depan_traced, extract_mono, extract_mono_backward, DepanOptions, DepanTrace};
use crate::{Error, Result};

fn check_mix(mix: &StftTensor) -> Result<()> {
    if mix.channels() != 6 {
        return Err(Error::shape(format!("encoder expects a 5.1 tensor, got {} channels", mix.channels())));
    }
    if mix.freqs() != N_FREQS {
        return Err(Error::shape(format!("encoder expects {N_FREQS} bins, got {}", mix.freqs())));
    }
    Ok(())
}

/// Network input: `ln(1 + mel power)` of the five positional channels,
/// laid out `[5][frames][128]`.
pub fn net_input(mix: &StftTensor) -> Result<Vec<f64>> {
    check_mix(mix)?;
    let positional = mix.select_channels(&POSITIONAL_51);
    Ok(standard_filterbank().melgram(&positional)?.log1p())
}

/// Broadcast one mel plane `[frames][bands]` to a linear plane `[frames][freqs]`.
fn broadcast_plane(mel: &[f64], frames: usize) -> Vec<f64> {
    let fb = standard_filterbank();
    let (b, f) = (fb.n_bands(), fb.n_freqs());
    let mut out = vec![0.0; frames * f];
    for t in 0..frames {
        fb.broadcast(&mel[t * b..(t + 1) * b], &mut out[t * f..(t + 1) * f]);
    }
    out
}

/// Mask the positional channels of `mix` with linear planes
/// `[5][frames][freqs]`; LFE is zero.
fn masked_linear(mix: &StftTensor, planes: &[f64]) -> StftTensor {
    let n = mix.frames() * mix.freqs();
    let mut out = StftTensor::zeros(6, mix.frames(), mix.freqs());
    for (i, &c) in POSITIONAL_51.iter().enumerate() {
        for ((o, x), m) in out.channel_mut(c).iter_mut().zip(mix.channel(c)).zip(&planes[i * n..(i + 1) * n]) {
            *o = x * m;
        }
    }
    out
}

/// Broadcast one slot of `masks` to linear planes `[5][frames][freqs]`.
fn linear_slot(masks: &MaskSet, slot: usize) -> Vec<f64> {
    (0..NET_CHANNELS)
        .flat_map(|i| broadcast_plane(masks.plane(slot, i), masks.frames()))
        .collect()
}

/// Everything the backward pass of [`encode_traced`] needs.
#[derive(Debug, Clone)]
pub struct EncodeTrace {
    pub net: MaskNetTrace,
    /// Masked 5.1 spectrogram of each object.
    pub object_spectra: Vec<StftTensor>,
    depan: Vec<DepanTrace>,
}

impl EncodeTrace {
    pub fn masks(&self) -> &MaskSet {
        &self.net.masks
    }
}

fn check_masks(mix: &StftTensor, masks: &MaskSet) -> Result<()> {
    if masks.frames() != mix.frames() || masks.bands() != standard_filterbank().n_bands() {
        return Err(Error::shape(format!(
            "masks are {}x{}, mix needs {}x{}",
            masks.frames(),
            masks.bands(),
            mix.frames(),
            standard_filterbank().n_bands()
        )));
    }
    Ok(())
}

fn extract_linear_traced(
    mix: &StftTensor,
    object_masks: &[Vec<f64>],
    bed_mask: &[f64],
    opts: &DepanOptions,
) -> Result<(ObjectProduction, Vec<StftTensor>, Vec<DepanTrace>)> {
    check_mix(mix)?;
    let expected = NET_CHANNELS * mix.frames() * mix.freqs();
    if let Some(bad) = object_masks.iter().map(Vec::len).chain([bed_mask.len()]).find(|l| *l != expected) {
        return Err(Error::Length { expected, actual: bad });
    }
    let mut objects = Vec::with_capacity(object_masks.len());
    let mut spectra = Vec::with_capacity(object_masks.len());
    let mut traces = Vec::with_capacity(object_masks.len());
    for m in object_masks {
        let spec = masked_linear(mix, m);
        let (trajectory, trace) = depan_traced(&spec, opts)?;
        let track = extract_mono(&spec, &trajectory)?;
        objects.push(ObjectTrack { track, trajectory });
        spectra.push(spec);
        traces.push(trace);
    }
    let mut bed = masked_linear(mix, bed_mask);
    bed.channel_mut(LFE_51).copy_from_slice(mix.channel(LFE_51));
    Ok((ObjectProduction::new(objects, bed)?, spectra, traces))
}

fn extract_traced(
    mix: &StftTensor,
    masks: &MaskSet,
    opts: &DepanOptions,
) -> Result<(ObjectProduction, Vec<StftTensor>, Vec<DepanTrace>)> {
    check_mix(mix)?;
    check_masks(mix, masks)?;
    let objects: Vec<Vec<f64>> = (0..masks.n_objects()).map(|o| linear_slot(masks, o)).collect();
    extract_linear_traced(mix, &objects, &linear_slot(masks, masks.bed_slot()), opts)
}

/// Apply a mask set to a 5.1 mix spectrogram and run de-panning and mono
/// extraction for each object. The bed takes the LFE channel unmasked.
pub fn extract_with_masks(mix: &StftTensor, masks: &MaskSet, opts: &DepanOptions) -> Result<ObjectProduction> {
    extract_traced(mix, masks, opts).map(|(p, _, _)| p)
}

/// As [`extract_with_masks`] with masks already in the linear domain, each
/// laid out `[5][frames][freqs]` over the positional channels.
pub fn extract_with_linear_masks(
    mix: &StftTensor,
    object_masks: &[Vec<f64>],
    bed_mask: &[f64],
    opts: &DepanOptions,
) -> Result<ObjectProduction> {
    extract_linear_traced(mix, object_masks, bed_mask, opts).map(|(p, _, _)| p)
}

/// Full encoder on a 5.1 spectrogram, keeping the trace for backprop.
pub fn encode_traced(params: &ParamStore, mix: &StftTensor, opts: &DepanOptions) -> Result<(ObjectProduction, EncodeTrace)> {
    let input = net_input(mix)?;
    let net = masknet::forward_traced(params, &input, mix.frames(), standard_filterbank().n_bands())?;
    let (prod, object_spectra, depan) = extract_traced(mix, &net.masks, opts)?;
    Ok((prod, EncodeTrace { net, object_spectra, depan }))
}

pub fn encode_stft(params: &ParamStore, mix: &StftTensor, opts: &DepanOptions) -> Result<ObjectProduction> {
    encode_traced(params, mix, opts).map(|(p, _)| p)
}

/// Encode a standard-length 5.1 waveform.
pub fn encode(params: &ParamStore, mix: &Waveform, opts: &DepanOptions) -> Result<ObjectProduction> {
    mix.ensure_51()?;
    encode_stft(params, &dsp::stft(mix)?, opts)
}

/// Gradient of a scalar with respect to every mel mask value, given its
/// gradient with respect to the extracted production.
pub fn mask_gradient(
    mix: &StftTensor,
    prod: &ObjectProduction,
    object_spectra: &[StftTensor],
    depan: &[DepanTrace],
    masks: &MaskSet,
    dprod: &ProductionGrad,
) -> Vec<f64> {
    let fb = standard_filterbank();
    let (frames, freqs, bands) = (mix.frames(), mix.freqs(), fb.n_bands());
    let mut dmask = vec![0.0; masks.data().len()];
    let plane = frames * bands;
    let zero = Complex64::new(0.0, 0.0);

    // Bring a 6-channel spectral gradient back to the mel mask of `slot`.
    let mut to_mask = |slot: usize, dspec: &[Complex64]| {
        let mut dlin = vec![0.0; freqs];
        for (i, &c) in POSITIONAL_51.iter().enumerate() {
            let x = mix.channel(c);
            let d = &dspec[c * frames * freqs..(c + 1) * frames * freqs];
            let base = (slot * NET_CHANNELS + i) * plane;
            for t in 0..frames {
                for ((l, xv), dv) in dlin.iter_mut().zip(&x[t * freqs..]).zip(&d[t * freqs..(t + 1) * freqs]) {
                    *l = xv.re * dv.re + xv.im * dv.im;
                }
                fb.broadcast_adjoint(&dlin, &mut dmask[base + t * bands..base + (t + 1) * bands]);
            }
        }
    };

    for (o, obj) in prod.objects.iter().enumerate() {
        let spec = &object_spectra[o];
        let mut dspec = vec![zero; spec.data().len()];
        let mut dtraj = dprod.trajectories[o].clone();
        extract_mono_backward(spec, &obj.trajectory, &obj.track, &dprod.tracks[o], &mut dspec, &mut dtraj);
        depan[o].backward(spec, &dtraj, &mut dspec);
        to_mask(o, &dspec);
    }
    to_mask(masks.bed_slot(), &dprod.bed);
    dmask
}

/// Accumulate parameter gradients for an [`encode_traced`] call.
pub fn encode_backward(
    params: &mut ParamStore,
    mix: &StftTensor,
    prod: &ObjectProduction,
    trace: &EncodeTrace,
    dprod: &ProductionGrad,
) -> Result<()> {
    let dmask = mask_gradient(mix, prod, &trace.object_spectra, &trace.depan, &trace.net.masks, dprod);
    masknet::backward(params, &trace.net, &dmask)
}
