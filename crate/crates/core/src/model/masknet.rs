use super::nn;
use super::params::{MaskNetConfig, ParamStore, NET_CHANNELS};
use crate::dsp::{N_FRAMES, N_MEL_BANDS};
use crate::{Error, Result};

/// Mel-domain masks for `n` objects plus the bed, laid out
/// `[slot][channel][frame][band]` with the bed in the last slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    n_objects: usize,
    frames: usize,
    bands: usize,
    data: Vec<f64>,
}

impl MaskSet {
    pub fn filled(n_objects: usize, frames: usize, bands: usize, value: f64) -> Self {
        Self {
            n_objects,
            frames,
            bands,
            data: vec![value; (n_objects + 1) * NET_CHANNELS * frames * bands],
        }
    }

    pub fn from_data(n_objects: usize, frames: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        let expected = (n_objects + 1) * NET_CHANNELS * frames * bands;
        if data.len() != expected {
            return Err(Error::Length { expected, actual: data.len() });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("mask value {v} outside [0, 1]")));
        }
        Ok(Self { n_objects, frames, bands, data })
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn bed_slot(&self) -> usize {
        self.n_objects
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn plane_len(&self) -> usize {
        self.frames * self.bands
    }

    /// `[frame][band]` plane for one slot and positional channel.
    pub fn plane(&self, slot: usize, ch: usize) -> &[f64] {
        let n = self.plane_len();
        let i = slot * NET_CHANNELS + ch;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn plane_mut(&mut self, slot: usize, ch: usize) -> &mut [f64] {
        let n = self.plane_len();
        let i = slot * NET_CHANNELS + ch;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn object(&self, o: usize, ch: usize) -> &[f64] {
        assert!(o < self.n_objects, "object index out of range");
        self.plane(o, ch)
    }

    pub fn bed(&self, ch: usize) -> &[f64] {
        self.plane(self.n_objects, ch)
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MaskNetTrace {
    /// Input to down-block k.
    down_in: Vec<Vec<f64>>,
    /// Post-activation output of down-block k (also the skip tensor).
    down_out: Vec<Vec<f64>>,
    /// Upsampled input to up-block k.
    up_in: Vec<Vec<f64>>,
    /// Concatenation `[up-block k output, skip k]`.
    cat: Vec<Vec<f64>>,
    /// Sigmoid outputs.
    pub masks: MaskSet,
}

fn check_input(cfg: &MaskNetConfig, input: &[f64], frames: usize, bands: usize) -> Result<()> {
    let expected = NET_CHANNELS * frames * bands;
    if input.len() != expected {
        return Err(Error::shape(format!(
            "network input has {} values, expected {NET_CHANNELS}x{frames}x{bands}",
            input.len()
        )));
    }
    let div = 1usize << cfg.depth;
    if frames % div != 0 || bands % div != 0 {
        return Err(Error::shape(format!(
            "{frames}x{bands} input not divisible by 2^{}",
            cfg.depth
        )));
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite network input"));
    }
    Ok(())
}

/// Forward pass keeping every activation. `input` is `[5][frames][bands]`.
pub fn forward_traced(params: &ParamStore, input: &[f64], frames: usize, bands: usize) -> Result<MaskNetTrace> {
    let cfg = &params.config;
    check_input(cfg, input, frames, bands)?;
    let depth = cfg.depth;
    let t = &params.tensors;
    let dims = |k: usize| (frames >> k, bands >> k);

    let mut down_in = Vec::with_capacity(depth);
    let mut down_out = Vec::with_capacity(depth);
    let mut x = input.to_vec();
    for k in 0..depth {
        let (h, w) = dims(k);
        let cin = if k == 0 { NET_CHANNELS } else { cfg.level_channels(k - 1) };
        let cout = cfg.level_channels(k);
        let mut a = vec![0.0; cout * h * w];
        nn::conv3x3(&x, cin, h, w, &t[2 * k].value, &t[2 * k + 1].value, &mut a);
        nn::leaky_relu_in_place(&mut a);
        let pooled = nn::avg_pool2(&a, cout, h, w);
        down_in.push(std::mem::replace(&mut x, pooled));
        down_out.push(a);
    }

    let mut up_in = vec![Vec::new(); depth];
    let mut cat = vec![Vec::new(); depth];
    // `x` is the bottleneck at level `depth`.
    let mut below_c = cfg.level_channels(depth - 1);
    for k in (0..depth).rev() {
        let (h, w) = dims(k);
        let cout = cfg.level_channels(k);
        let u = nn::upsample2(&x, below_c, h / 2, w / 2);
        let mut a = vec![0.0; 2 * cout * h * w];
        let pi = 2 * depth + 2 * k;
        nn::conv3x3(&u, below_c, h, w, &t[pi].value, &t[pi + 1].value, &mut a[..cout * h * w]);
        nn::leaky_relu_in_place(&mut a[..cout * h * w]);
        a[cout * h * w..].copy_from_slice(&down_out[k]);
        up_in[k] = u;
        x = a.clone();
        cat[k] = a;
        below_c = 2 * cout;
    }

    let hw = frames * bands;
    let planes = cfg.mask_planes();
    let mut logits = vec![0.0; planes * hw];
    nn::conv1x1(&cat[0], below_c, hw, &t[4 * depth].value, &t[4 * depth + 1].value, &mut logits);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite mask logits".into()));
    }
    logits.iter_mut().for_each(|v| *v = nn::sigmoid(*v));
    Ok(MaskNetTrace {
        down_in,
        down_out,
        up_in,
        cat,
        masks: MaskSet {
            n_objects: cfg.n_objects,
            frames,
            bands,
            data: logits,
        },
    })
}

/// Standard-size forward pass on a `[5][256][128]` log-mel input.
pub fn masknet_forward(params: &ParamStore, input: &[f64]) -> Result<MaskSet> {
    forward_traced(params, input, N_FRAMES, N_MEL_BANDS).map(|t| t.masks)
}

/// Accumulates parameter gradients into `params.grad` given the gradient
/// of a scalar loss with respect to every mask value.
pub fn backward(params: &mut ParamStore, trace: &MaskNetTrace, dmask: &[f64]) -> Result<()> {
    let masks = &trace.masks;
    if dmask.len() != masks.data.len() {
        return Err(Error::Length { expected: masks.data.len(), actual: dmask.len() });
    }
    let cfg = params.config;
    let depth = cfg.depth;
    let (frames, bands) = (masks.frames, masks.bands);
    let dims = |k: usize| (frames >> k, bands >> k);
    let hw = frames * bands;
    let planes = cfg.mask_planes();

    let dlogits: Vec<f64> = dmask
        .iter()
        .zip(&masks.data)
        .map(|(g, s)| g * s * (1.0 - s))
        .collect();
    let c0 = cfg.level_channels(0);
    let mut dcat = vec![0.0; 2 * c0 * hw];
    {
        let (wt, bt) = two_mut(&mut params.tensors, 4 * depth);
        nn::conv1x1_backward(&trace.cat[0], 2 * c0, hw, &wt.value, &dlogits, planes, &mut wt.grad, &mut bt.grad, &mut dcat);
    }

    let mut dskip: Vec<Vec<f64>> = vec![Vec::new(); depth];
    for k in 0..depth {
        let (h, w) = dims(k);
        let cout = cfg.level_channels(k);
        let n = cout * h * w;
        dskip[k] = dcat[n..].to_vec();
        let mut dup = dcat[..n].to_vec();
        nn::leaky_relu_backward_in_place(&trace.cat[k][..n], &mut dup);
        let below_c = if k + 1 == depth { cfg.level_channels(k) } else { 2 * cfg.level_channels(k + 1) };
        let mut du = vec![0.0; below_c * h * w];
        let pi = 2 * depth + 2 * k;
        {
            let (wt, bt) = two_mut(&mut params.tensors, pi);
            nn::conv3x3_backward(&trace.up_in[k], below_c, h, w, &wt.value, &dup, cout, &mut wt.grad, &mut bt.grad, Some(&mut du));
        }
        dcat = nn::upsample2_backward(&du, below_c, h / 2, w / 2);
    }

    // `dcat` now holds the gradient at the bottleneck (pooled output of the last down block).
    let mut dpooled = dcat;
    for k in (0..depth).rev() {
        let (h, w) = dims(k);
        let cout = cfg.level_channels(k);
        let cin = if k == 0 { NET_CHANNELS } else { cfg.level_channels(k - 1) };
        let mut da = nn::avg_pool2_backward(&dpooled, cout, h, w);
        for (d, s) in da.iter_mut().zip(&dskip[k]) {
            *d += s;
        }
        nn::leaky_relu_backward_in_place(&trace.down_out[k], &mut da);
        let (wt, bt) = two_mut(&mut params.tensors, 2 * k);
        if k > 0 {
            let mut dx = vec![0.0; cin * h * w];
            nn::conv3x3_backward(&trace.down_in[k], cin, h, w, &wt.value, &da, cout, &mut wt.grad, &mut bt.grad, Some(&mut dx));
            dpooled = dx;
        } else {
            nn::conv3x3_backward(&trace.down_in[k], cin, h, w, &wt.value, &da, cout, &mut wt.grad, &mut bt.grad, None);
        }
    }
    Ok(())
}

fn two_mut<T>(v: &mut [T], i: usize) -> (&mut T, &mut T) {
    let (a, b) = v.split_at_mut(i + 1);
    (&mut a[i], &mut b[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::init_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0.0..3.0)).collect()
    }

    #[test]
    fn initial_masks_are_one_half() {
        let cfg = MaskNetConfig { base_channels: 4, depth: 2, ..Default::default() };
        let p = init_params(&cfg).unwrap();
        let m = masknet_forward(&p, &random_input(1, 5 * 256 * 128)).unwrap();
        assert_eq!(m.data().len(), 2 * 5 * 256 * 128);
        assert!(m.data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn shape_errors() {
        let p = init_params(&MaskNetConfig { base_channels: 2, depth: 1, ..Default::default() }).unwrap();
        assert!(masknet_forward(&p, &[0.0; 10]).is_err());
        assert!(forward_traced(&p, &vec![0.0; 5 * 6 * 5], 6, 5).is_err());
        let mut bad = vec![0.0; 5 * 4 * 4];
        bad[3] = f64::NAN;
        assert!(forward_traced(&p, &bad, 4, 4).is_err());
    }

    fn perturbed(cfg: MaskNetConfig) -> ParamStore {
        let mut p = init_params(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for t in &mut p.tensors {
            for v in &mut t.value {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        p
    }

    #[test]
    fn outputs_in_open_unit_interval_and_deterministic() {
        let p = perturbed(MaskNetConfig { n_objects: 2, base_channels: 3, depth: 3, seed: 4 });
        let x = random_input(2, 5 * 16 * 8);
        let a = forward_traced(&p, &x, 16, 8).unwrap().masks;
        let b = forward_traced(&p, &x, 16, 8).unwrap().masks;
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(a.plane(a.bed_slot(), 4).len(), 16 * 8);
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        for (depth, base) in [(1, 2), (2, 3)] {
            let cfg = MaskNetConfig { n_objects: 1, base_channels: base, depth, seed: 3 };
            let mut p = perturbed(cfg);
            let (f, b) = (8, 8);
            let x = random_input(5, 5 * f * b);
            let probe = random_input(6, 2 * 5 * f * b);
            let loss = |p: &ParamStore| -> f64 {
                let m = forward_traced(p, &x, f, b).unwrap().masks;
                m.data().iter().zip(&probe).map(|(a, c)| a * c).sum()
            };
            let trace = forward_traced(&p, &x, f, b).unwrap();
            p.zero_grad();
            backward(&mut p, &trace, &probe).unwrap();
            let grads = p.flat_grads();
            let h = 1e-5;
            let mut bad = 0;
            for i in 0..grads.len() {
                let orig = *p.flat_value_mut(i);
                *p.flat_value_mut(i) = orig + h;
                let lp = loss(&p);
                *p.flat_value_mut(i) = orig - h;
                let lm = loss(&p);
                *p.flat_value_mut(i) = orig;
                let fd = (lp - lm) / (2.0 * h);
                let err = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-6);
                if err > 1e-4 {
                    bad += 1;
                }
            }
            assert!(bad * 100 <= grads.len(), "{bad} of {} gradients off", grads.len());
        }
    }
}
