//! Bag-of-words topic pipeline.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Result, SmfError};
use crate::factors::{FactorPair, Orientation};
use crate::matrix::{row_normalize, DenseMatrix};
use crate::solver::{factorize, SolveResult, SolverConfig};

/// Document-term counts with the vocabulary that labels the columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocabulary: Vec<String>,
    /// N x M term counts.
    pub doc_term: DenseMatrix,
    /// Label of each retained document (input line number unless supplied).
    pub doc_ids: Vec<String>,
}

impl Corpus {
    pub fn new(vocabulary: Vec<String>, doc_term: DenseMatrix, doc_ids: Vec<String>) -> Result<Self> {
        if vocabulary.len() != doc_term.cols() {
            return Err(SmfError::shape(format!(
                "{} vocabulary terms for {} columns",
                vocabulary.len(),
                doc_term.cols()
            )));
        }
        if doc_ids.len() != doc_term.rows() {
            return Err(SmfError::shape(format!(
                "{} ids for {} documents",
                doc_ids.len(),
                doc_term.rows()
            )));
        }
        for (i, row) in doc_term.row_iter().enumerate() {
            if row.iter().any(|&c| c < 0.0 || c.fract() != 0.0) {
                return Err(SmfError::invalid(format!(
                    "document {i} has a non-integer or negative count"
                )));
            }
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(SmfError::EmptyRow { index: i });
            }
        }
        Ok(Corpus {
            vocabulary,
            doc_term,
            doc_ids,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_term.rows()
    }

    pub fn n_terms(&self) -> usize {
        self.doc_term.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// A term is kept only if it occurs in at least this fraction of documents.
    pub min_doc_fraction: f64,
    pub stop_words: HashSet<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_doc_fraction: 0.005,
            stop_words: HashSet::new(),
        }
    }
}

/// Lowercased alphanumeric tokens, with stop words and anything containing a
/// digit removed.
pub fn tokenize<'a>(text: &'a str, stop_words: &'a HashSet<String>) -> impl Iterator<Item = String> + 'a {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .filter(|t| !t.chars().any(|c| c.is_numeric()))
        .filter(move |t| !stop_words.contains(t))
}

/// Reads a stop-word list, one word per line; blank lines and `#` comments
/// are ignored.
pub fn read_stop_words<R: BufRead>(input: R) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in input.lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() && !w.starts_with('#') {
            out.insert(w.to_lowercase());
        }
    }
    Ok(out)
}

/// Builds the document-term matrix from one-document-per-line text.
///
/// Terms below the document-frequency threshold are pruned, then documents
/// left without any term are dropped. The vocabulary is sorted.
pub fn build_corpus<S: AsRef<str>>(documents: &[S], config: &PreprocessConfig) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&config.min_doc_fraction) {
        return Err(SmfError::invalid(format!(
            "min_doc_fraction must be in [0, 1], got {}",
            config.min_doc_fraction
        )));
    }
    let bags: Vec<BTreeMap<String, usize>> = documents
        .iter()
        .map(|d| {
            let mut bag = BTreeMap::new();
            for t in tokenize(d.as_ref(), &config.stop_words) {
                *bag.entry(t).or_insert(0) += 1;
            }
            bag
        })
        .collect();

    let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for bag in &bags {
        for term in bag.keys() {
            *doc_freq.entry(term.as_str()).or_insert(0) += 1;
        }
    }
    let min_df = ((config.min_doc_fraction * documents.len() as f64).ceil() as usize).max(1);
    let vocabulary: Vec<String> = doc_freq
        .iter()
        .filter(|(_, &df)| df >= min_df)
        .map(|(t, _)| t.to_string())
        .collect();
    let index: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();

    let mut data = Vec::new();
    let mut doc_ids = Vec::new();
    for (i, bag) in bags.iter().enumerate() {
        let mut row = vec![0.0; vocabulary.len()];
        for (term, &count) in bag {
            if let Some(&j) = index.get(term.as_str()) {
                row[j] = count as f64;
            }
        }
        if row.iter().any(|&c| c > 0.0) {
            data.extend(row);
            doc_ids.push(i.to_string());
        }
    }
    if doc_ids.is_empty() {
        return Err(SmfError::invalid("no document retains any term after preprocessing"));
    }
    let doc_term = DenseMatrix::from_vec(doc_ids.len(), vocabulary.len(), data)?;
    Corpus::new(vocabulary, doc_term, doc_ids)
}

pub fn read_vocabulary<R: BufRead>(input: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

pub fn write_lines<W: Write, S: AsRef<str>>(mut out: W, lines: &[S]) -> Result<()> {
    for l in lines {
        writeln!(out, "{}", l.as_ref())?;
    }
    Ok(())
}

/// Topic-term distributions (rows of H) and document-topic weights (rows of W).
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub factors: FactorPair,
    pub vocabulary: Vec<String>,
}

impl TopicModel {
    pub fn new(factors: FactorPair, vocabulary: Vec<String>) -> Result<Self> {
        if factors.h().cols() != vocabulary.len() {
            return Err(SmfError::shape(format!(
                "H has {} terms, vocabulary has {}",
                factors.h().cols(),
                vocabulary.len()
            )));
        }
        Ok(TopicModel { factors, vocabulary })
    }
}

pub fn fit_topics(corpus: &Corpus, config: &SolverConfig) -> Result<TopicModel> {
    fit_topics_detailed(corpus, config).map(|(m, _)| m)
}

/// Row-normalizes the counts and runs the estimator with both factors
/// row-stochastic. Document weights are the simplex-projected `X H⁺`.
pub fn fit_topics_detailed(corpus: &Corpus, config: &SolverConfig) -> Result<(TopicModel, SolveResult)> {
    if config.orientation != Orientation::Both {
        return Err(SmfError::invalid("topic models need orientation `both`"));
    }
    if corpus.n_docs() == 0 {
        return Err(SmfError::invalid("empty corpus"));
    }
    let x = row_normalize(&corpus.doc_term)?;
    let result = factorize(&x, config)?;
    let model = TopicModel::new(result.factors.clone(), corpus.vocabulary.clone())?;
    Ok((model, result))
}

/// The `k` most probable terms of every topic, ties broken by vocabulary order.
pub fn top_terms(model: &TopicModel, k: usize) -> Result<Vec<Vec<(String, f64)>>> {
    top_terms_of(model.factors.h(), &model.vocabulary, k)
}

/// [`top_terms`] on a bare topic-term matrix.
pub fn top_terms_of(h: &DenseMatrix, vocabulary: &[String], k: usize) -> Result<Vec<Vec<(String, f64)>>> {
    if h.cols() != vocabulary.len() {
        return Err(SmfError::shape(format!(
            "H has {} terms, vocabulary has {}",
            h.cols(),
            vocabulary.len()
        )));
    }
    if k > h.cols() {
        return Err(SmfError::invalid(format!(
            "k = {k} exceeds the vocabulary size {}",
            h.cols()
        )));
    }
    Ok((0..h.rows())
        .map(|r| {
            let row = h.row(r);
            let mut order: Vec<usize> = (0..row.len()).collect();
            // stable sort keeps vocabulary order among equal probabilities
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            order
                .into_iter()
                .take(k)
                .map(|j| (vocabulary[j].clone(), row[j]))
                .collect()
        })
        .collect())
}

/// Number of documents whose most probable topic is r (ties to the lowest r).
pub fn topic_histogram(model: &TopicModel) -> Vec<usize> {
    histogram_of(model.factors.w())
}

/// [`topic_histogram`] on a bare document-topic matrix.
pub fn histogram_of(w: &DenseMatrix) -> Vec<usize> {
    let mut counts = vec![0; w.cols()];
    for row in w.row_iter() {
        let mut best = 0;
        for (r, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = r;
            }
        }
        if !row.is_empty() {
            counts[best] += 1;
        }
    }
    counts
}

/// `topic,rank,term,probability` with 0-based topics and 1-based ranks.
pub fn write_top_terms_csv<W: Write>(mut out: W, terms: &[Vec<(String, f64)>]) -> Result<()> {
    writeln!(out, "topic,rank,term,probability")?;
    for (t, list) in terms.iter().enumerate() {
        for (rank, (term, p)) in list.iter().enumerate() {
            writeln!(out, "{t},{},{},{p}", rank + 1, csv_field(term))?;
        }
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(mut out: W, counts: &[usize]) -> Result<()> {
    writeln!(out, "topic,count")?;
    for (t, c) in counts.iter().enumerate() {
        writeln!(out, "{t},{c}")?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
