//! Config files and image output.

mod config;
mod image;

pub use config::{
    parse_number, parse_number_list, DenoiserSpec, OutputSpec, PriorMean, RunConfig, DEFAULT_DENOISER_TIMEOUT_MS,
};
pub use image::{decode_f32, encode_f32, encode_pgm, read_f32, write_f32, write_pgm, F32_MAGIC};
