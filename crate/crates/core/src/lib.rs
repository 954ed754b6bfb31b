//! Neural stored-program memory (NSM) and the Neural Universal Turing
//! Machine (NUTM): a Neural Turing Machine whose interface weights are
//! looked up every timestep from a key-value memory of programs.

pub mod autodiff;
pub mod checkpoint;
pub mod controller;
pub mod error;
pub mod machine;
pub mod memory;
pub mod params;
pub mod pca;
pub mod program;
pub mod rng;
pub mod tasks;
pub mod train;
pub mod verify;
