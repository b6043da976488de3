#![allow(dead_code)]

use maser_bench::{BenchConfig, BenchSession};
use std::path::Path;

pub fn config(master_seed: u64) -> BenchConfig {
    BenchConfig {
        master_seed,
        ..BenchConfig::default()
    }
}

pub fn session_in(dir: &Path, master_seed: u64) -> BenchSession {
    BenchSession::open_in(config(master_seed), dir.to_path_buf()).unwrap()
}
