use anyhow::Result;
use serde::Serialize;

use smf_core::synthetic::{block_corpus, face_images, generate, CorpusSpec, InstanceSpec};
use smf_core::Orientation;

use super::Run;
use crate::args::{GenerateCommand, GenerateCorpusArgs, GenerateFacesArgs, GenerateMatrixArgs};

pub(super) fn run(command: &GenerateCommand) -> Result<Run> {
    match command {
        GenerateCommand::Matrix(a) => matrix(a),
        GenerateCommand::Faces(a) => faces(a),
        GenerateCommand::Corpus(a) => corpus(a),
    }
}

#[derive(Serialize)]
struct MatrixConfig {
    n: usize,
    m: usize,
    rank: usize,
    orientation: Orientation,
    anchors: bool,
    noise_sigma: f64,
    seed: u64,
}

#[derive(Serialize)]
struct MatrixTruth {
    anchor_rows: Vec<usize>,
    anchor_cols: Vec<usize>,
}

fn matrix(args: &GenerateMatrixArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    let cfg = MatrixConfig {
        n: args.n,
        m: args.m,
        rank: args.rank,
        orientation: args.orientation,
        anchors: !args.no_anchors,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    run.set_config(&cfg, Some(args.seed))?;
    let (x, truth) = generate(InstanceSpec {
        n: cfg.n,
        m: cfg.m,
        rank: cfg.rank,
        anchors: cfg.anchors,
        noise_sigma: cfg.noise_sigma,
        orientation: cfg.orientation,
        seed: cfg.seed,
    })?;
    run.write_matrix("X", &x)?;
    run.write_matrix("W_true", &truth.w_true)?;
    run.write_matrix("H_true", &truth.h_true)?;
    run.write_json(
        "truth.json",
        &MatrixTruth {
            anchor_rows: truth.anchor_rows,
            anchor_cols: truth.anchor_cols,
        },
    )?;
    println!("{} x {} instance of rank {}", x.rows(), x.cols(), cfg.rank);
    Ok(run)
}

#[derive(Serialize)]
struct FacesConfig {
    images: usize,
    basis: usize,
    noise_sigma: f64,
    seed: u64,
}

#[derive(Serialize)]
struct FacesTruth {
    anchor_images: Vec<usize>,
    /// (row, col) on the reduced 9x9 grid.
    anchor_cells: Vec<(usize, usize)>,
}

fn faces(args: &GenerateFacesArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    let cfg = FacesConfig {
        images: args.images,
        basis: args.basis,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    run.set_config(&cfg, Some(args.seed))?;
    let set = face_images(cfg.images, cfg.basis, cfg.noise_sigma, cfg.seed)?;
    let digits = cfg.images.saturating_sub(1).to_string().len().max(4);
    for (i, img) in set.images.iter().enumerate() {
        let mut bytes = Vec::new();
        img.write_pgm(&mut bytes)?;
        run.write_bytes(&format!("images/face_{i:0digits$}.pgm"), &bytes)?;
    }
    for (k, img) in set.basis.iter().enumerate() {
        let mut bytes = Vec::new();
        img.write_pgm(&mut bytes)?;
        run.write_bytes(&format!("basis/basis_{k:02}.pgm"), &bytes)?;
    }
    run.write_matrix("weights_true", &set.weights)?;
    run.write_json(
        "truth.json",
        &FacesTruth {
            anchor_images: set.anchor_images,
            anchor_cells: set.anchor_cells,
        },
    )?;
    println!("{} images from {} bases", cfg.images, cfg.basis);
    Ok(run)
}

#[derive(Serialize)]
struct CorpusConfig {
    docs: usize,
    terms: usize,
    topics: usize,
    doc_len: usize,
    seed: u64,
}

#[derive(Serialize)]
struct CorpusTruth {
    anchor_terms: Vec<String>,
}

fn corpus(args: &GenerateCorpusArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    let cfg = CorpusConfig {
        docs: args.docs,
        terms: args.terms,
        topics: args.topics,
        doc_len: args.doc_len,
        seed: args.seed,
    };
    run.set_config(&cfg, Some(args.seed))?;
    let mut spec = CorpusSpec::new(cfg.docs, cfg.terms, cfg.topics, cfg.seed);
    spec.doc_len = cfg.doc_len;
    let tc = block_corpus(spec)?;

    let vocab = &tc.corpus.vocabulary;
    let mut text = String::new();
    for row in tc.corpus.doc_term.row_iter() {
        let tokens: Vec<&str> = row
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n(vocab[j].as_str(), c as usize))
            .collect();
        text.push_str(&tokens.join(" "));
        text.push('\n');
    }
    run.write_bytes("corpus.txt", text.as_bytes())?;
    run.write_matrix("H_true", &tc.h_true)?;
    run.write_matrix("W_true", &tc.w_true)?;
    let anchor_terms = tc.anchor_terms.iter().map(|&j| vocab[j].clone()).collect();
    run.write_json("truth.json", &CorpusTruth { anchor_terms })?;
    println!(
        "{} documents over {} terms from {} topics",
        cfg.docs, cfg.terms, cfg.topics
    );
    Ok(run)
}
