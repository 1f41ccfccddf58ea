//! Scalar abstraction for the vector-space side of the pipeline.
//!
//! Embeddings, cosine similarity, and the proximity graph are generic over
//! the floating-point type; `f32` is the storage default (see the crate-root
//! aliases), `f64` is available where extra headroom matters.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable as an embedding component.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Width of the on-disk encoding in bytes (4 = f32 bits, 8 = f64 bits).
    const BYTE_WIDTH: u8;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const BYTE_WIDTH: u8 = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("scalar width"))
    }
}

impl Scalar for f64 {
    const BYTE_WIDTH: u8 = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("scalar width"))
    }
}
