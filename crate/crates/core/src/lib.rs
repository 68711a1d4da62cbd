// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dma;
pub mod error;
pub mod experiment;
pub mod fitting;
pub mod numerics;
pub mod quantization;
pub mod receiver;
pub mod verify;
