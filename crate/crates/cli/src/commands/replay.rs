use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Parser;

use smf_core::SmfError;

use crate::args::{Cli, ReplayArgs};
use crate::manifest::{sha256_file, RunManifest};

/// A replay ran, but some outputs differ from the recorded hashes.
#[derive(Debug)]
pub struct ReplayMismatch {
    pub files: Vec<String>,
}

impl fmt::Display for ReplayMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "replayed outputs differ from the manifest: {}",
            self.files.join(", ")
        )
    }
}

impl std::error::Error for ReplayMismatch {}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Re-executes the recorded command from the recorded working directory
/// (optionally into another output directory) and compares output hashes.
pub(super) fn run(args: &ReplayArgs) -> Result<()> {
    let recorded = RunManifest::read(&args.manifest)?;
    let cwd = std::env::current_dir()?;
    let base = &recorded.working_dir;

    for input in &recorded.inputs {
        let path = resolve(base, Path::new(&input.path));
        let now = sha256_file(&path).with_context(|| format!("recorded input {}", path.display()))?;
        if now != input.sha256 {
            anyhow::bail!(SmfError::invalid(format!(
                "input {} changed since the recorded run",
                path.display()
            )));
        }
    }
    if recorded.tool_version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest was written by version {}, this is {}",
            recorded.tool_version,
            env!("CARGO_PKG_VERSION")
        );
    }

    let argv = std::iter::once("smf".to_string()).chain(recorded.argv.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(|e| SmfError::invalid(format!("recorded arguments: {e}")))?;
    if cli.command.name() != recorded.command {
        anyhow::bail!(SmfError::invalid(format!(
            "manifest says {} but its arguments parse as {}",
            recorded.command,
            cli.command.name()
        )));
    }
    let Some(out) = cli.command.out_args_mut() else {
        anyhow::bail!(SmfError::invalid("manifest records a replay"));
    };
    if let Some(dir) = &args.out_dir {
        out.out_dir = resolve(&cwd, dir);
    }
    let out_dir = resolve(base, &out.out_dir);

    std::env::set_current_dir(base).with_context(|| format!("entering {}", base.display()))?;
    let result = super::run_recorded(cli.command, &recorded.argv);
    std::env::set_current_dir(&cwd)?;
    let replayed = result?;

    if replayed.config != recorded.config {
        eprintln!("warning: resolved configuration differs from the recorded one");
    }
    let mut differing = Vec::new();
    for old in &recorded.outputs {
        match replayed.outputs.iter().find(|n| n.path == old.path) {
            Some(new) if new.sha256 == old.sha256 => {}
            _ => differing.push(old.path.clone()),
        }
    }
    for new in &replayed.outputs {
        if !recorded.outputs.iter().any(|o| o.path == new.path) {
            differing.push(new.path.clone());
        }
    }
    if !differing.is_empty() {
        return Err(ReplayMismatch { files: differing }.into());
    }
    println!(
        "{} outputs reproduced bitwise in {}",
        replayed.outputs.len(),
        out_dir.display()
    );
    Ok(())
}
