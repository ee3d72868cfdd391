//! Ground-truth instances with known anchor structure, and permutation-aligned
//! scoring of estimated factors against them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::applications::images::{GrayImage, RAW_SIDE, REDUCED_SIDE};
use crate::applications::topics::Corpus;
use crate::error::{Result, SmfError};
use crate::factors::{FactorPair, Orientation};
use crate::matrix::{frobenius_norm, DenseMatrix};

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub w_true: DenseMatrix,
    pub h_true: DenseMatrix,
    pub orientation: Orientation,
    pub anchors_enabled: bool,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Row of W that equals e_r, per factor (empty when anchors are off).
    pub anchor_rows: Vec<usize>,
    /// Column of H supported only on r, per factor.
    pub anchor_cols: Vec<usize>,
}

impl GroundTruth {
    pub fn factors(&self) -> FactorPair {
        FactorPair::new(self.w_true.clone(), self.h_true.clone(), self.orientation)
            .expect("generator produces conforming factors")
    }
}

/// Instance dimensions and structure for [`generate`].
#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub anchors: bool,
    pub noise_sigma: f64,
    pub orientation: Orientation,
    pub seed: u64,
}

/// Uniform draw from the simplex of dimension `k` (flat Dirichlet).
pub(crate) fn dirichlet_flat(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Draws `X = W H + E` with W rows on the simplex and H per orientation.
///
/// With anchors, one (randomly placed) row of W equals e_r and one column of
/// H is supported only on r, for every r. Noise is zero-mean Gaussian; image
/// instances are clamped to [0, 1] and topic instances are clamped at zero
/// and renormalized so every row stays a distribution.
pub fn generate(spec: InstanceSpec) -> Result<(DenseMatrix, GroundTruth)> {
    let InstanceSpec {
        n,
        m,
        rank: r,
        anchors,
        noise_sigma,
        orientation,
        seed,
    } = spec;
    if r == 0 || n <= r || m <= r {
        return Err(SmfError::invalid(format!(
            "need N > R and M > R, got N={n}, M={m}, R={r}"
        )));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(SmfError::invalid(format!(
            "noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut w = DenseMatrix::zeros(n, r);
    for i in 0..n {
        w.row_mut(i).copy_from_slice(&dirichlet_flat(&mut rng, r));
    }
    let mut h = DenseMatrix::zeros(r, m);
    for k in 0..r {
        if orientation.h_stochastic() {
            h.row_mut(k).copy_from_slice(&dirichlet_flat(&mut rng, m));
        } else {
            h.row_mut(k).iter_mut().for_each(|v| *v = rng.random::<f64>());
        }
    }

    let (mut anchor_rows, mut anchor_cols) = (Vec::new(), Vec::new());
    if anchors {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        anchor_rows = rows[..r].to_vec();
        let mut cols: Vec<usize> = (0..m).collect();
        cols.shuffle(&mut rng);
        anchor_cols = cols[..r].to_vec();
        for k in 0..r {
            let row = w.row_mut(anchor_rows[k]);
            row.iter_mut().for_each(|v| *v = 0.0);
            row[k] = 1.0;
            let c = anchor_cols[k];
            let level = if orientation.h_stochastic() {
                1.0 / m as f64
            } else {
                rng.random_range(0.3..1.0)
            };
            for l in 0..r {
                h[(l, c)] = if l == k { level } else { 0.0 };
            }
        }
        if orientation.h_stochastic() {
            for k in 0..r {
                let row = h.row_mut(k);
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
    }

    let mut x = w.dot(&h);
    if noise_sigma > 0.0 {
        for i in 0..n {
            let clean: Vec<f64> = x.row(i).to_vec();
            let row = x.row_mut(i);
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise_sigma * z;
            }
            if orientation.h_stochastic() {
                row.iter_mut().for_each(|v| *v = v.max(0.0));
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                } else {
                    row.copy_from_slice(&clean);
                }
            } else {
                row.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            }
        }
    }

    let truth = GroundTruth {
        w_true: w,
        h_true: h,
        orientation,
        anchors_enabled: anchors,
        noise_sigma,
        seed,
        anchor_rows,
        anchor_cols,
    };
    Ok((x, truth))
}

/// Synthetic 19x19 face-like images mixed from a known basis.
#[derive(Debug, Clone)]
pub struct FaceSet {
    /// Noisy images, clamped to [0, 1].
    pub images: Vec<GrayImage>,
    /// The same images before noise.
    pub clean: Vec<GrayImage>,
    pub basis: Vec<GrayImage>,
    /// Mixing weights, one simplex row per image.
    pub weights: DenseMatrix,
    /// Image that shows basis k alone, per k.
    pub anchor_images: Vec<usize>,
    /// 2x2 pixel block, indexed on the reduced 9x9 grid, lit only by basis k.
    pub anchor_cells: Vec<(usize, usize)>,
}

/// Generates `n_images` raw images as convex mixtures of `n_basis` smooth
/// blob images.
///
/// Every basis owns one 2x2 block of pixels that no other basis touches, and
/// one image equals each basis exactly, so the reduced (2x2-averaged) data
/// has anchors on both sides.
pub fn face_images(n_images: usize, n_basis: usize, noise_sigma: f64, seed: u64) -> Result<FaceSet> {
    let cells = REDUCED_SIDE * REDUCED_SIDE;
    if n_basis == 0 || n_basis > cells || n_images <= n_basis {
        return Err(SmfError::invalid(format!(
            "need 0 < basis count <= {cells} and more images than bases, got {n_images} images, {n_basis} bases"
        )));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(SmfError::invalid(format!(
            "noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = RAW_SIDE;

    let mut grid: Vec<usize> = (0..cells).collect();
    grid.shuffle(&mut rng);
    let anchor_cells: Vec<(usize, usize)> = grid[..n_basis]
        .iter()
        .map(|&c| (c / REDUCED_SIDE, c % REDUCED_SIDE))
        .collect();
    let block_of = |y: usize, x: usize| -> Option<usize> {
        anchor_cells
            .iter()
            .position(|&(a, b)| y / 2 == a && x / 2 == b && y < 2 * REDUCED_SIDE && x < 2 * REDUCED_SIDE)
    };

    let mut basis = Vec::with_capacity(n_basis);
    for k in 0..n_basis {
        let cy = rng.random_range(0.0..side as f64);
        let cx = rng.random_range(0.0..side as f64);
        let spread = rng.random_range(3.0..7.0);
        let floor = rng.random_range(0.05..0.25);
        let mut pixels = vec![0.0; side * side];
        for y in 0..side {
            for x in 0..side {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let v = floor + (0.95 - floor) * (-d2 / (2.0 * spread * spread)).exp();
                pixels[y * side + x] = match block_of(y, x) {
                    Some(owner) if owner == k => v.max(0.6),
                    Some(_) => 0.0,
                    None => v,
                };
            }
        }
        basis.push(GrayImage::new(side, side, pixels)?);
    }

    let mut weights = DenseMatrix::zeros(n_images, n_basis);
    for i in 0..n_images {
        weights.row_mut(i).copy_from_slice(&dirichlet_flat(&mut rng, n_basis));
    }
    let mut order: Vec<usize> = (0..n_images).collect();
    order.shuffle(&mut rng);
    let anchor_images = order[..n_basis].to_vec();
    for (k, &i) in anchor_images.iter().enumerate() {
        let row = weights.row_mut(i);
        row.iter_mut().for_each(|v| *v = 0.0);
        row[k] = 1.0;
    }

    let mut images = Vec::with_capacity(n_images);
    let mut clean = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let w = weights.row(i);
        let mix: Vec<f64> = (0..side * side)
            .map(|p| {
                basis
                    .iter()
                    .zip(w)
                    .map(|(b, &wk)| wk * b.pixels()[p])
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            })
            .collect();
        let noisy: Vec<f64> = mix
            .iter()
            .map(|&v| {
                if noise_sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (v + noise_sigma * z).clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect();
        clean.push(GrayImage::new(side, side, mix)?);
        images.push(GrayImage::new(side, side, noisy)?);
    }
    Ok(FaceSet {
        images,
        clean,
        basis,
        weights,
        anchor_images,
        anchor_cells,
    })
}

/// A document collection drawn from known topics.
#[derive(Debug, Clone)]
pub struct TopicCorpus {
    pub corpus: Corpus,
    pub w_true: DenseMatrix,
    pub h_true: DenseMatrix,
    /// Vocabulary index of the designated anchor term of each topic.
    pub anchor_terms: Vec<usize>,
}

/// Dimensions of a block-anchored corpus.
#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub n_docs: usize,
    pub n_terms: usize,
    pub n_topics: usize,
    /// Tokens per document.
    pub doc_len: usize,
    /// Upper bound on the number of topics mixed in one document.
    pub max_topics_per_doc: usize,
    /// Share of every topic spread over terms outside its block.
    pub background: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(n_docs: usize, n_terms: usize, n_topics: usize, seed: u64) -> Self {
        CorpusSpec {
            n_docs,
            n_terms,
            n_topics,
            doc_len: 200,
            max_topics_per_doc: 3,
            background: 0.1,
            seed,
        }
    }
}

/// Draws a bag-of-words corpus whose topics live on disjoint term blocks.
///
/// Topic k puts `1 - background` of its mass on block k and spreads the rest
/// over every other term except the other topics' anchors. The first term of
/// each block is its anchor: it is the topic's most probable term and no
/// other topic uses it. Documents mix up to `max_topics_per_doc` topics and
/// draw `doc_len` tokens.
pub fn block_corpus(spec: CorpusSpec) -> Result<TopicCorpus> {
    let CorpusSpec {
        n_docs,
        n_terms,
        n_topics,
        doc_len,
        max_topics_per_doc,
        background,
        seed,
    } = spec;
    if n_topics < 2 || n_terms < 2 * n_topics || n_docs <= n_topics {
        return Err(SmfError::invalid(format!(
            "need at least 2 topics, 2 terms per topic and more documents than topics, got {n_docs} docs, {n_terms} terms, {n_topics} topics"
        )));
    }
    if doc_len == 0 || max_topics_per_doc == 0 || !(0.0..1.0).contains(&background) {
        return Err(SmfError::invalid(
            "doc_len and max_topics_per_doc must be positive and background in [0, 1)",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = n_terms / n_topics;
    let anchor_terms: Vec<usize> = (0..n_topics).map(|k| k * block).collect();

    let mut h = DenseMatrix::zeros(n_topics, n_terms);
    for k in 0..n_topics {
        let own = k * block..(k + 1) * block;
        let mut inside: Vec<f64> = own.clone().map(|_| rng.random_range(0.5..1.5)).collect();
        inside[0] = 3.0;
        let total: f64 = inside.iter().sum();
        let outside: Vec<usize> = (0..n_terms)
            .filter(|j| !own.contains(j) && !anchor_terms.contains(j))
            .collect();
        let mut spread: Vec<f64> = outside.iter().map(|_| rng.random::<f64>()).collect();
        let spread_total: f64 = spread.iter().sum();
        spread.iter_mut().for_each(|v| *v *= background / spread_total);
        let row = h.row_mut(k);
        for (j, v) in own.zip(&inside) {
            row[j] = (1.0 - background) * v / total;
        }
        for (&j, v) in outside.iter().zip(&spread) {
            row[j] = *v;
        }
    }

    let mut w = DenseMatrix::zeros(n_docs, n_topics);
    let mut topics: Vec<usize> = (0..n_topics).collect();
    for i in 0..n_docs {
        let k = rng.random_range(1..=max_topics_per_doc.min(n_topics));
        topics.shuffle(&mut rng);
        let mix = dirichlet_flat(&mut rng, k);
        for (&t, &p) in topics[..k].iter().zip(&mix) {
            w[(i, t)] = p;
        }
    }

    let probs = w.dot(&h);
    let mut counts = DenseMatrix::zeros(n_docs, n_terms);
    let mut cdf = vec![0.0; n_terms];
    for i in 0..n_docs {
        let mut acc = 0.0;
        for (c, &p) in cdf.iter_mut().zip(probs.row(i)) {
            acc += p;
            *c = acc;
        }
        let row = counts.row_mut(i);
        for _ in 0..doc_len {
            let u = rng.random::<f64>() * acc;
            let j = cdf.partition_point(|&c| c <= u).min(n_terms - 1);
            row[j] += 1.0;
        }
    }

    let vocabulary = (0..n_terms).map(|j| letter_name(j, n_terms)).collect();
    let doc_ids = (0..n_docs).map(|i| i.to_string()).collect();
    let corpus = Corpus::new(vocabulary, counts, doc_ids)?;
    Ok(TopicCorpus {
        corpus,
        w_true: w,
        h_true: h,
        anchor_terms,
    })
}

/// Fixed-width lowercase name for index `j` of `count`, so synthetic terms
/// survive tokenization (no digits) and sort in index order.
fn letter_name(j: usize, count: usize) -> String {
    let mut width = 1;
    while 26usize.pow(width) < count {
        width += 1;
    }
    let mut out = vec![b'a'; width as usize + 1];
    out[0] = b't';
    let mut v = j;
    for slot in out[1..].iter_mut().rev() {
        *slot = b'a' + (v % 26) as u8;
        v /= 26;
    }
    String::from_utf8(out).expect("ascii")
}

/// Result of matching estimated factor rows to the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// `permutation[k]` is the estimated row placed at true position k.
    pub permutation: Vec<usize>,
    /// `‖P H_est − H_true‖_F / ‖H_true‖_F` at the optimal permutation.
    pub error: f64,
}

/// Finds the row permutation of `h_est` closest to `h_true` in Frobenius norm.
///
/// Exhaustive search up to rank 8, Hungarian assignment above.
pub fn align_and_score(h_est: &DenseMatrix, h_true: &DenseMatrix) -> Result<Alignment> {
    if h_est.shape() != h_true.shape() {
        return Err(SmfError::shape(format!(
            "estimate is {:?}, truth is {:?}",
            h_est.shape(),
            h_true.shape()
        )));
    }
    let r = h_true.rows();
    // cost[k][l]: squared distance from true row k to estimated row l
    let cost: Vec<Vec<f64>> = (0..r)
        .map(|k| {
            (0..r)
                .map(|l| {
                    h_true
                        .row(k)
                        .iter()
                        .zip(h_est.row(l))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect();
    let permutation = if r <= 8 {
        exhaustive_assignment(&cost)
    } else {
        hungarian(&cost)
    };
    let aligned = h_est.select_rows(&permutation);
    let denom = frobenius_norm(h_true);
    let num = frobenius_norm(&aligned.sub(h_true));
    let error = if denom > 0.0 { num / denom } else { num };
    Ok(Alignment { permutation, error })
}

fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let r = cost.len();
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    permute(&mut perm, 0, cost, &mut best, &mut best_cost);
    best
}

fn permute(perm: &mut Vec<usize>, at: usize, cost: &[Vec<f64>], best: &mut Vec<usize>, best_cost: &mut f64) {
    if at == perm.len() {
        let c: f64 = perm.iter().enumerate().map(|(k, &l)| cost[k][l]).sum();
        if c < *best_cost {
            *best_cost = c;
            best.clone_from(perm);
        }
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute(perm, at + 1, cost, best, best_cost);
        perm.swap(at, i);
    }
}

/// O(n³) Hungarian algorithm (shortest augmenting path with potentials).
/// Returns `assign[k]` = column matched to row k.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}
