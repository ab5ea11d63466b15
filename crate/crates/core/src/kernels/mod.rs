//! Raw numeric kernels shared by the autodiff ops and the streaming path.

pub mod conv;
pub mod gru;
pub mod norm;

pub use conv::{conv1d, conv_transpose1d_full, ConvGeometry};
pub use gru::{gru_forward, GruWeights};
