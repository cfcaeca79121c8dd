//! Coordinate-MLP families: Gaussian, sinusoidal and RFF-embedded ReLU networks.

mod activation;
pub mod checkpoint;
mod network;

pub use activation::ActivationKind;
pub use checkpoint::{load_network, read_network, save_network, write_network};
pub use network::{
    init_network, shallow_of, Activations, ArchSpec, Family, Layer, Linear, NetVars, Network,
    RffEmbedding, ShallowView, Tap, TapeForward,
};
