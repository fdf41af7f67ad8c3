//! Numerical substrate: tensors, layer primitives, the two Q-network
//! architectures with exact reverse-mode gradients, Adam, checkpoints, and
//! gradient-based attention maps.

pub mod adam;
pub mod checkpoint;
pub mod gradcam;
pub mod layers;
pub mod qnet;
pub mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_network, save_network};
pub use gradcam::grad_cam;
pub use qnet::{argmax_row, Arch, ForwardTrace, Gradients, HeadKind, Mode, QNetwork};
pub use tensor::Tensor;
