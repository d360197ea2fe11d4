use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mask network hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskNetConfig {
    pub n_objects: usize,
    pub base_channels: usize,
    pub depth: usize,
    pub seed: u64,
}

impl Default for MaskNetConfig {
    fn default() -> Self {
        Self {
            n_objects: 1,
            base_channels: 16,
            depth: 4,
            seed: 0,
        }
    }
}

/// Positional channels seen and masked by the network.
pub const NET_CHANNELS: usize = 5;

impl MaskNetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_objects) {
            return Err(Error::Config(format!("n_objects {} outside 1..=3", self.n_objects)));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        let div = 1usize << self.depth;
        if crate::dsp::N_MEL_BANDS % div != 0 || crate::dsp::N_FRAMES % div != 0 {
            return Err(Error::Config(format!("128 and 256 must be divisible by 2^{}", self.depth)));
        }
        Ok(())
    }

    /// Feature channels at level `k`.
    pub fn level_channels(&self, k: usize) -> usize {
        self.base_channels << k
    }

    pub fn mask_planes(&self) -> usize {
        (self.n_objects + 1) * NET_CHANNELS
    }

    /// `(name, shape, fan_in)` of every tensor in store order.
    pub(crate) fn tensor_specs(&self) -> Vec<(String, Vec<usize>, usize)> {
        let mut specs = Vec::new();
        for k in 0..self.depth {
            let cin = if k == 0 { NET_CHANNELS } else { self.level_channels(k - 1) };
            let cout = self.level_channels(k);
            specs.push((format!("down.{k}.weight"), vec![cout, cin, 3, 3], cin * 9));
            specs.push((format!("down.{k}.bias"), vec![cout], cin * 9));
        }
        for k in 0..self.depth {
            let cin = if k + 1 == self.depth {
                self.level_channels(k)
            } else {
                2 * self.level_channels(k + 1)
            };
            let cout = self.level_channels(k);
            specs.push((format!("up.{k}.weight"), vec![cout, cin, 3, 3], cin * 9));
            specs.push((format!("up.{k}.bias"), vec![cout], cin * 9));
        }
        let cin = 2 * self.level_channels(0);
        specs.push(("out.weight".into(), vec![self.mask_planes(), cin], cin));
        specs.push(("out.bias".into(), vec![self.mask_planes()], cin));
        specs
    }
}

/// One named parameter tensor with its gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

/// All network weights, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub config: MaskNetConfig,
    pub tensors: Vec<ParamTensor>,
}

/// He-style uniform init (bound `sqrt(6 / fan_in)`), zero biases, and an
/// all-zero output layer so the initial masks are exactly 0.5.
pub fn init_params(cfg: &MaskNetConfig) -> Result<ParamStore> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tensors = cfg
        .tensor_specs()
        .into_iter()
        .map(|(name, shape, fan_in)| {
            let n: usize = shape.iter().product();
            let value = if name.ends_with(".weight") && !name.starts_with("out.") {
                let bound = (6.0 / fan_in as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            } else {
                vec![0.0; n]
            };
            ParamTensor {
                name,
                shape,
                grad: vec![0.0; n],
                value,
            }
        })
        .collect();
    Ok(ParamStore {
        config: *cfg,
        tensors,
    })
}

const MAGIC: &[u8; 8] = b"OBJXCKPT";
const VERSION: u32 = 1;

impl ParamStore {
    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| &t.grad)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale_grads(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g *= s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.iter().all(|v| v.is_finite()))
    }

    /// Flat view helpers used by optimizers and gradient checks.
    pub fn flat_values(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.value.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.grad.iter().copied()).collect()
    }

    /// Mutable access to the `i`-th scalar parameter in flat order.
    pub fn flat_value_mut(&mut self, mut i: usize) -> &mut f64 {
        for t in &mut self.tensors {
            if i < t.value.len() {
                return &mut t.value[i];
            }
            i -= t.value.len();
        }
        panic!("parameter index out of range");
    }

    pub fn ensure_compatible(&self, other: &ParamStore) -> Result<()> {
        let same = self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if same {
            Ok(())
        } else {
            Err(Error::Checkpoint("parameter layouts differ".into()))
        }
    }

    /// Binary checkpoint (little endian):
    ///
    /// ```text
    /// "OBJXCKPT" u32 version
    /// u32 n_objects  u32 base_channels  u32 depth  u64 seed
    /// u32 tensor_count
    /// per tensor: u32 name_len, name (utf-8), u32 ndim, u64 dims[ndim], f64 values[∏dims]
    /// ```
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for v in [self.config.n_objects, self.config.base_channels, self.config.depth] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        w.write_all(&self.config.seed.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for d in &t.shape {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
            for v in &t.value {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        fn u32_(r: &mut impl Read) -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        }
        fn u64_(r: &mut impl Read) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = u32_(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let config = MaskNetConfig {
            n_objects: u32_(&mut r)? as usize,
            base_channels: u32_(&mut r)? as usize,
            depth: u32_(&mut r)? as usize,
            seed: u64_(&mut r)?,
        };
        config
            .validate()
            .map_err(|e| Error::Checkpoint(format!("invalid stored config: {e}")))?;
        let count = u32_(&mut r)? as usize;
        let specs = config.tensor_specs();
        if count != specs.len() {
            return Err(Error::Checkpoint(format!(
                "{count} tensors stored, config implies {}",
                specs.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name_expect, shape_expect, _) in specs {
            let len = u32_(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("bad tensor name".into()))?;
            let ndim = u32_(&mut r)? as usize;
            let shape = (0..ndim)
                .map(|_| u64_(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if name != name_expect || shape != shape_expect {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} {shape:?} does not match expected {name_expect} {shape_expect:?}"
                )));
            }
            let n: usize = shape.iter().product();
            let value = (0..n)
                .map(|_| u64_(&mut r).map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            tensors.push(ParamTensor {
                name,
                shape,
                grad: vec![0.0; n],
                value,
            });
        }
        Ok(Self { config, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}
