//! The two-level inverted index: construction, lambda byte quantization and
//! the on-disk format.

mod build;
mod format;
mod lambda;

pub use build::{build_index, compute_t3, BuildOptions, InvertedIndex, PostingEntry, PostingList};
pub use format::{
    deserialize_index, index_file_size, read_index, serialize_index, write_index, MAGIC, VERSION,
};
pub use lambda::LambdaQuant;
