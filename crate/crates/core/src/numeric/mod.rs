//! Dense matrices, a seeded random source and a reverse-mode tape.

pub mod matrix;
pub mod rng;
pub mod tape;

pub use matrix::Matrix;
pub use rng::{gauss_draw, mix_seed, RandomSource};
pub use tape::{Gradients, Tape, Var};
