use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use smf_core::applications::images::{
    downsample_2x2, images_to_matrix, reconstruct, reconstruction_error, GrayImage, Retriever, RAW_SIDE, REDUCED_SIDE,
};
use smf_core::{FactorPair, Orientation, SmfError};

use super::Run;
use crate::args::{FacesCommand, FacesErrorArgs, FacesIngestArgs, FacesReconstructArgs, FacesRetrieveArgs};

pub(super) fn run(command: &FacesCommand) -> Result<Run> {
    match command {
        FacesCommand::Ingest(a) => ingest(a),
        FacesCommand::Reconstruct(a) => reconstruct_rows(a),
        FacesCommand::Retrieve(a) => retrieve(a),
        FacesCommand::Error(a) => error(a),
    }
}

fn read_pgm(run: &mut Run, path: &Path) -> Result<GrayImage> {
    run.input(path)?;
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    GrayImage::read_pgm(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        anyhow::bail!(SmfError::invalid(format!("no .pgm files in {}", dir.display())));
    }
    Ok(files)
}

#[derive(Serialize)]
struct IngestConfig {
    downsample: bool,
}

fn ingest(args: &FacesIngestArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(
        &IngestConfig {
            downsample: !args.no_downsample,
        },
        None,
    )?;
    let files = pgm_files(&args.dir)?;
    let mut images = Vec::with_capacity(files.len());
    for f in &files {
        let img = read_pgm(&mut run, f)?;
        images.push(if args.no_downsample {
            img
        } else {
            downsample_2x2(&img).with_context(|| format!("downsampling {}", f.display()))?
        });
    }
    let x = images_to_matrix(&images)?;
    run.write_matrix("X", &x)?;
    let names: String = files
        .iter()
        .map(|f| format!("{}\n", f.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()))
        .collect();
    run.write_bytes("images.txt", names.as_bytes())?;
    println!("{} images -> {} x {} matrix", x.rows(), x.rows(), x.cols());
    Ok(run)
}

fn image_model(run: &mut Run, w: &Path, h: &Path) -> Result<FactorPair> {
    let w = run.read_matrix(w)?;
    let h = run.read_matrix(h)?;
    Ok(FactorPair::new(w, h, Orientation::WRowsSumTo1)?)
}

#[derive(Serialize)]
struct ReconstructConfig<'a> {
    rows: &'a [usize],
}

fn reconstruct_rows(args: &FacesReconstructArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(&ReconstructConfig { rows: &args.rows }, None)?;
    let model = image_model(&mut run, &args.w, &args.h)?;
    let n = model.w().rows();
    let rows: Vec<usize> = if args.rows.is_empty() {
        (0..n).collect()
    } else {
        args.rows.clone()
    };
    let digits = n.saturating_sub(1).to_string().len().max(4);
    for &i in &rows {
        if i >= n {
            anyhow::bail!(SmfError::invalid(format!("row {i} out of range; W has {n} rows")));
        }
        let img = reconstruct(model.w().row(i), model.h())?;
        let mut bytes = Vec::new();
        img.write_pgm(&mut bytes)?;
        run.write_bytes(&format!("recon_{i:0digits$}.pgm"), &bytes)?;
    }
    println!("wrote {} images", rows.len());
    Ok(run)
}

#[derive(Serialize)]
struct RetrievalReport {
    index: usize,
    distance: f64,
    downsampled: bool,
    weights: Vec<f64>,
}

fn retrieve(args: &FacesRetrieveArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(&serde_json::json!({}), None)?;
    let query = read_pgm(&mut run, &args.query)?;
    let model = image_model(&mut run, &args.w, &args.h)?;
    // raw 19x19 queries against a model fitted on reduced images
    let downsampled = query.pixels().len() != model.h().cols()
        && query.width() == RAW_SIDE
        && query.height() == RAW_SIDE
        && model.h().cols() == REDUCED_SIDE * REDUCED_SIDE;
    let query = if downsampled { downsample_2x2(&query)? } else { query };
    let retriever = Retriever::new(&model)?;
    let hit = retriever.query(query.pixels())?;
    let weights = retriever.weights(query.pixels())?;
    let report = RetrievalReport {
        index: hit.index,
        distance: hit.distance,
        downsampled,
        weights,
    };
    run.write_json("retrieval.json", &report)?;
    println!("nearest image {} at distance {:.6e}", hit.index, hit.distance);
    Ok(run)
}

#[derive(Serialize)]
struct ErrorReport {
    mse: f64,
    rows: usize,
    cols: usize,
}

fn error(args: &FacesErrorArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(&serde_json::json!({}), None)?;
    let x = run.read_matrix(&args.x)?;
    let model = image_model(&mut run, &args.w, &args.h)?;
    let mse = reconstruction_error(&x, &model)?;
    run.write_json(
        "error.json",
        &ErrorReport {
            mse,
            rows: x.rows(),
            cols: x.cols(),
        },
    )?;
    println!("mean squared error {mse:.6e}");
    Ok(run)
}
