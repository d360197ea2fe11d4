//! Mask-estimation U-Net and the encoder that turns a 5.1 mix into an
//! object production.

mod encoder;
mod masknet;
pub mod nn;
mod params;

pub use encoder::{encode, encode_backward, encode_stft, encode_traced, extract_with_linear_masks, extract_with_masks, mask_gradient, net_input, EncodeTrace};
pub use masknet::{backward as masknet_backward, forward_traced as masknet_forward_traced, masknet_forward, MaskNetTrace, MaskSet};
pub use params::{init_params, MaskNetConfig, ParamStore, ParamTensor, NET_CHANNELS};
