//! Speaker layouts and the differentiable object renderer.
//!
//! Objects are panned with a separable dual-balance law: a sine/cosine
//! crossfade between the two speaker rows bracketing `y`, and within each row
//! between the two speakers bracketing `x`. Every object is additionally
//! trimmed by `-3 dB * y`. The de-panner and de-trimmer invert this law on
//! 5.1 material.

mod depan;
mod extract;
mod layout;
mod pan;
mod render;
mod trajectory;

pub use depan::{depan, depan_traced, DepanOptions, DepanTrace, FLANK_RATIO};
pub use extract::{
    detrim, detrim_backward, extract_mono, extract_mono_backward, retrim,
};
pub use layout::{bed_fold, LayoutKind, Speaker, SpeakerLayout, SpeakerRow};
pub use pan::{
    pan_gains, pan_gains_jacobian, pan_gains_untrimmed, trim, trim_derivative, GainJacobian,
    GainVector, Position,
};
pub use render::{render, render_backward};
pub use trajectory::Trajectory;
