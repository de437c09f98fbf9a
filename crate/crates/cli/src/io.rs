// SPDX-License-Identifier: Apache-2.0

//! JSONL readers and writers with path context on errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ceff_core::graph::{read_graphs, GnnGraph};
use ceff_core::rc::{parse_network, RcNetwork};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read_nets(path: &Path) -> Result<Vec<RcNetwork>, CliError> {
    lines(path)?
        .into_iter()
        .map(|(no, l)| parse_network(&l).map_err(|e| CliError::Validation(format!("{}:{no}: {e}", path.display()))))
        .collect()
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    lines(path)?
        .into_iter()
        .map(|(no, l)| serde_json::from_str(&l).map_err(|e| CliError::Validation(format!("{}:{no}: {e}", path.display()))))
        .collect()
}

pub fn read_graph_file(path: &Path) -> Result<Vec<GnnGraph>, CliError> {
    read_graphs(open(path)?)
        .map(|g| g.map_err(|e| CliError::Validation(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r).expect("records serialize");
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).expect("values serialize");
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}
