//! On-disk formats: binary containers, CSV tables, and SVG plots.

mod container;
pub mod csv;
pub mod svg;

pub(crate) use container::{
    container_bytes, f32_from_le_bytes, f32_to_le_bytes, read_container, write_container,
};
pub use container::sha256_hex;
