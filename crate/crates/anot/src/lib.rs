//! Files, threads and the command line around [`anot_core`].

pub mod cli;
pub mod error;
pub mod parallel;
pub mod persist;
pub mod report;
pub mod settings;
pub mod time;
pub mod tsv;

pub use error::DataError;
pub use persist::ModelFile;
pub use time::TimeCodec;
