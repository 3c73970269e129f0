//! Files, configuration, checkpoints, reports and the command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod io;
pub mod report;
pub mod store;

pub use checkpoint::{Checkpoint, LoadedModels, MAGIC, VERSION};
pub use cli::{run, Cli, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
pub use config::{ModelScale, RunConfig};
pub use io::{
    decode_pgm, encode_pgm, encode_ply, format_xyz, parse_xyz, read_pgm, read_xyz, write_atomic, write_pgm, write_ply,
    write_xyz,
};
pub use report::{benchmark_tsv, diversity_tsv, manifest_tsv, parse_manifest, train_log_tsv};
pub use store::{load_dataset, save_dataset, MANIFEST_FILE};
