//! Dataset input and output.

mod letor;
mod synthetic;

pub use letor::{parse_letor, read_letor, save_letor, write_letor};
pub use synthetic::{generate_synthetic, SyntheticConfig};
