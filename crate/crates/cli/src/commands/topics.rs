use anyhow::Result;
use serde::Serialize;

use smf_core::applications::topics::{
    build_corpus, fit_topics_detailed, histogram_of, read_stop_words, read_vocabulary, top_terms_of,
    write_histogram_csv, write_top_terms_csv, Corpus, PreprocessConfig,
};
use smf_core::matrix::row_normalize;
use smf_core::Orientation;

use super::factorize::FitReport;
use super::Run;
use crate::args::{TopicsBuildArgs, TopicsCommand, TopicsFitArgs, TopicsHistogramArgs, TopicsTopTermsArgs};

pub(super) fn run(command: &TopicsCommand) -> Result<Run> {
    match command {
        TopicsCommand::Build(a) => build(a),
        TopicsCommand::Fit(a) => fit(a),
        TopicsCommand::TopTerms(a) => top_terms(a),
        TopicsCommand::Histogram(a) => histogram(a),
    }
}

#[derive(Serialize)]
struct BuildConfig {
    min_doc_fraction: f64,
    stop_words: bool,
}

#[derive(Serialize)]
struct CorpusSummary {
    documents_read: usize,
    documents_kept: usize,
    terms: usize,
}

fn build(args: &TopicsBuildArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(
        &BuildConfig {
            min_doc_fraction: args.min_doc_fraction,
            stop_words: args.stop_words.is_some(),
        },
        None,
    )?;
    let text = run.read_text(&args.corpus)?;
    let stop_words = match &args.stop_words {
        Some(p) => read_stop_words(run.read_text(p)?.as_bytes())?,
        None => Default::default(),
    };
    let docs: Vec<&str> = text.lines().collect();
    let config = PreprocessConfig {
        min_doc_fraction: args.min_doc_fraction,
        stop_words,
    };
    let corpus = build_corpus(&docs, &config)?;

    run.write_matrix("doc_term", &corpus.doc_term)?;
    run.write_bytes("vocab.txt", lines(&corpus.vocabulary).as_bytes())?;
    run.write_bytes("doc_ids.txt", lines(&corpus.doc_ids).as_bytes())?;
    let summary = CorpusSummary {
        documents_read: docs.len(),
        documents_kept: corpus.n_docs(),
        terms: corpus.n_terms(),
    };
    run.write_json("corpus.json", &summary)?;
    println!(
        "{} of {} documents kept, {} terms",
        summary.documents_kept, summary.documents_read, summary.terms
    );
    Ok(run)
}

fn lines(items: &[String]) -> String {
    items.iter().map(|s| format!("{s}\n")).collect()
}

fn fit(args: &TopicsFitArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    let config = args.solver.config(Orientation::Both);
    run.set_config(&config, Some(config.seed))?;
    let counts = run.read_matrix(&args.doc_term)?;
    // term labels do not influence the fit
    let vocabulary = (0..counts.cols()).map(|j| j.to_string()).collect();
    let doc_ids = (0..counts.rows()).map(|i| i.to_string()).collect();
    let corpus = Corpus::new(vocabulary, counts, doc_ids)?;

    let (model, result) = fit_topics_detailed(&corpus, &config)?;
    run.write_matrix("W", model.factors.w())?;
    run.write_matrix("H", model.factors.h())?;
    let x = row_normalize(&corpus.doc_term)?;
    let report = FitReport::new(&x, &config, result);
    run.write_json("result.json", &report)?;
    println!("{}", report.summary());
    Ok(run)
}

#[derive(Serialize)]
struct TopTermsConfig {
    k: usize,
}

fn top_terms(args: &TopicsTopTermsArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(&TopTermsConfig { k: args.k }, None)?;
    let h = run.read_matrix(&args.h)?;
    let vocabulary = read_vocabulary(run.read_text(&args.vocab)?.as_bytes())?;
    let terms = top_terms_of(&h, &vocabulary, args.k)?;
    let mut bytes = Vec::new();
    write_top_terms_csv(&mut bytes, &terms)?;
    run.write_bytes("top_terms.csv", &bytes)?;
    for (t, list) in terms.iter().enumerate() {
        let words: Vec<&str> = list.iter().map(|(w, _)| w.as_str()).collect();
        println!("topic {t}: {}", words.join(", "));
    }
    Ok(run)
}

fn histogram(args: &TopicsHistogramArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(&serde_json::json!({}), None)?;
    let w = run.read_matrix(&args.w)?;
    let counts = histogram_of(&w);
    let mut bytes = Vec::new();
    write_histogram_csv(&mut bytes, &counts)?;
    run.write_bytes("histogram.csv", &bytes)?;
    println!("{} documents over {} topics", w.rows(), counts.len());
    Ok(run)
}
