mod analyze;
mod faces;
mod factorize;
mod generate;
mod replay;
mod topics;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use smf_core::matrix::{read_matrix, write_binary, write_csv};
use smf_core::DenseMatrix;

use crate::args::{Command, OutArgs};
use crate::manifest::{record, write_json, FileRecord, RunManifest};

pub use replay::ReplayMismatch;

/// Collects inputs and outputs of one command so the manifest can be written.
pub struct Run {
    out_dir: PathBuf,
    binary: bool,
    inputs: Vec<FileRecord>,
    outputs: Vec<String>,
    config: serde_json::Value,
    seed: Option<u64>,
}

impl Run {
    fn new(out: &OutArgs) -> Result<Self> {
        fs::create_dir_all(&out.out_dir).with_context(|| format!("creating {}", out.out_dir.display()))?;
        Ok(Run {
            out_dir: out.out_dir.clone(),
            binary: out.binary,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
            seed: None,
        })
    }

    fn set_config<T: Serialize>(&mut self, config: &T, seed: Option<u64>) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        self.seed = seed;
        Ok(())
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(record(path, &path.display().to_string())?);
        Ok(())
    }

    fn read_matrix(&mut self, path: &Path) -> Result<DenseMatrix> {
        self.input(path)?;
        read_matrix(path).with_context(|| format!("reading matrix {}", path.display()))
    }

    fn read_text(&mut self, path: &Path) -> Result<String> {
        self.input(path)?;
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }

    /// Registers `name` as an output and returns its full path.
    fn output(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.outputs.push(name.to_string());
        Ok(path)
    }

    /// Writes `stem.csv`, or `stem.bin` with `--binary`.
    fn write_matrix(&mut self, stem: &str, m: &DenseMatrix) -> Result<()> {
        let name = if self.binary {
            format!("{stem}.bin")
        } else {
            format!("{stem}.csv")
        };
        let path = self.output(&name)?;
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        if self.binary {
            write_binary(m, &mut out)?;
        } else {
            write_csv(m, &mut out)?;
        }
        std::io::Write::flush(&mut out)?;
        Ok(())
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.output(name)?;
        write_json(&path, value)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.output(name)?;
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    fn finish(self, command: &str, argv: &[String], started: Instant) -> Result<RunManifest> {
        let outputs = self
            .outputs
            .iter()
            .map(|name| record(&self.out_dir.join(name), name))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            working_dir: std::env::current_dir()?,
            config: self.config,
            inputs: self.inputs,
            outputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: started.elapsed().as_secs_f64(),
        };
        manifest.write(&self.out_dir)?;
        Ok(manifest)
    }
}

/// Runs one command; `argv` is recorded verbatim in the manifest.
pub fn execute(command: Command, argv: &[String]) -> Result<()> {
    if let Command::Replay(args) = &command {
        return replay::run(args);
    }
    run_recorded(command, argv).map(|_| ())
}

pub(crate) fn run_recorded(command: Command, argv: &[String]) -> Result<RunManifest> {
    let started = Instant::now();
    let name = command.name();
    let run = match command {
        Command::Factorize(a) => factorize::run(&a)?,
        Command::Analyze(a) => analyze::run(&a)?,
        Command::Faces(c) => faces::run(&c)?,
        Command::Topics(c) => topics::run(&c)?,
        Command::Generate(c) => generate::run(&c)?,
        Command::Replay(_) => unreachable!("replay is not recorded"),
    };
    run.finish(name, argv, started)
}
