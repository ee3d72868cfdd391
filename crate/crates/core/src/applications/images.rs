//! Gray-scale face pipeline: PGM input, 2x2 block downsampling, reconstruction
//! from base images, and retrieval in the low-dimensional weight space.

use std::io::{BufReader, Read, Write};

use crate::error::{Result, SmfError};
use crate::factors::FactorPair;
use crate::matrix::{pseudoinverse, simplex_project, DenseMatrix, DEFAULT_RANK_TOL};

/// Side length of the raw face images.
pub const RAW_SIDE: usize = 19;
/// Side length after downsampling.
pub const REDUCED_SIDE: usize = 9;

/// Simplex slack accepted for reconstruction weights.
const WEIGHT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    /// Row-major intensities in [0, 1].
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(SmfError::shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(k) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(SmfError::invalid(format!("pixel {k} = {} outside [0, 1]", pixels[k])));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Parses binary (P5) or ASCII (P2) PGM with maxval 255.
    pub fn read_pgm<R: Read>(input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(input).read_to_end(&mut bytes)?;
        let mut pos = 0;
        let magic = next_token(&bytes, &mut pos)?;
        let binary = match magic.as_str() {
            "P5" => true,
            "P2" => false,
            other => return Err(SmfError::Parse(format!("unsupported PGM magic {other:?}"))),
        };
        let width = parse_usize(&next_token(&bytes, &mut pos)?)?;
        let height = parse_usize(&next_token(&bytes, &mut pos)?)?;
        let maxval = parse_usize(&next_token(&bytes, &mut pos)?)?;
        if maxval != 255 {
            return Err(SmfError::Parse(format!("maxval {maxval} unsupported, expected 255")));
        }
        let n = width * height;
        let raw: Vec<u8> = if binary {
            // exactly one whitespace byte separates the header from the raster
            pos += 1;
            let data = bytes
                .get(pos..pos + n)
                .ok_or_else(|| SmfError::Parse(format!("raster truncated: need {n} bytes")))?;
            data.to_vec()
        } else {
            (0..n)
                .map(|_| {
                    let t = next_token(&bytes, &mut pos)?;
                    let v = parse_usize(&t)?;
                    u8::try_from(v).map_err(|_| SmfError::Parse(format!("pixel value {v} > 255")))
                })
                .collect::<Result<_>>()?
        };
        let pixels = raw.into_iter().map(|v| f64::from(v) / 255.0).collect();
        GrayImage::new(width, height, pixels)
    }

    /// Writes binary PGM (P5), rounding intensities to the nearest level.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let raster: Vec<u8> = self
            .pixels
            .iter()
            .map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        out.write_all(&raster)?;
        Ok(())
    }
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(SmfError::Parse("unexpected end of PGM header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_usize(t: &str) -> Result<usize> {
    t.parse()
        .map_err(|_| SmfError::Parse(format!("expected an integer, got {t:?}")))
}

/// Averages 2x2 blocks of a 19x19 image into a 9x9 image; the last row and
/// column are dropped.
pub fn downsample_2x2(img: &GrayImage) -> Result<GrayImage> {
    if img.width != RAW_SIDE || img.height != RAW_SIDE {
        return Err(SmfError::shape(format!(
            "expected a {RAW_SIDE}x{RAW_SIDE} image, got {}x{}",
            img.width, img.height
        )));
    }
    let mut pixels = Vec::with_capacity(REDUCED_SIDE * REDUCED_SIDE);
    for r in 0..REDUCED_SIDE {
        for c in 0..REDUCED_SIDE {
            let sum = img.get(2 * r, 2 * c)
                + img.get(2 * r, 2 * c + 1)
                + img.get(2 * r + 1, 2 * c)
                + img.get(2 * r + 1, 2 * c + 1);
            pixels.push(sum / 4.0);
        }
    }
    GrayImage::new(REDUCED_SIDE, REDUCED_SIDE, pixels)
}

fn square_side(m: usize) -> Result<usize> {
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m {
        return Err(SmfError::shape(format!("{m} pixels do not form a square image")));
    }
    Ok(side)
}

/// `weightsᵀ H` reshaped to a square image and clamped to [0, 1].
pub fn reconstruct(weights: &[f64], h: &DenseMatrix) -> Result<GrayImage> {
    if weights.len() != h.rows() {
        return Err(SmfError::shape(format!(
            "{} weights for {} base images",
            weights.len(),
            h.rows()
        )));
    }
    if weights.iter().any(|&w| w < -WEIGHT_SLACK) || (weights.iter().sum::<f64>() - 1.0).abs() > WEIGHT_SLACK {
        return Err(SmfError::invalid("reconstruction weights must lie on the simplex"));
    }
    let side = square_side(h.cols())?;
    let mut pixels = vec![0.0; h.cols()];
    for (k, &w) in weights.iter().enumerate() {
        for (p, &b) in pixels.iter_mut().zip(h.row(k)) {
            *p += w * b;
        }
    }
    pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    GrayImage::new(side, side, pixels)
}

/// Nearest stored image in weight space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalHit {
    pub index: usize,
    pub distance: f64,
}

/// Precomputes `H⁺` so repeated queries cost one small product each.
pub struct Retriever<'a> {
    model: &'a FactorPair,
    pinv: DenseMatrix,
}

impl<'a> Retriever<'a> {
    pub fn new(model: &'a FactorPair) -> Result<Self> {
        let pinv = pseudoinverse(model.h(), DEFAULT_RANK_TOL)?;
        Ok(Retriever { model, pinv })
    }

    /// Simplex-projected weights of `pixels` on the base images.
    pub fn weights(&self, pixels: &[f64]) -> Result<Vec<f64>> {
        if pixels.len() != self.pinv.rows() {
            return Err(SmfError::shape(format!(
                "query has {} pixels, model expects {}",
                pixels.len(),
                self.pinv.rows()
            )));
        }
        let raw = DenseMatrix::row_vector(pixels).dot(&self.pinv);
        Ok(simplex_project(raw.as_slice()))
    }

    pub fn query(&self, pixels: &[f64]) -> Result<RetrievalHit> {
        let wq = self.weights(pixels)?;
        let w = self.model.w();
        let mut best = RetrievalHit {
            index: 0,
            distance: f64::INFINITY,
        };
        for i in 0..w.rows() {
            let d = w
                .row(i)
                .iter()
                .zip(&wq)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            // strict: ties keep the lowest index
            if d < best.distance {
                best = RetrievalHit { index: i, distance: d };
            }
        }
        Ok(best)
    }
}

pub fn retrieve(query: &GrayImage, model: &FactorPair) -> Result<RetrievalHit> {
    Retriever::new(model)?.query(query.pixels())
}

/// Mean over all cells of `(X − W H)²`.
pub fn reconstruction_error(x: &DenseMatrix, factors: &FactorPair) -> Result<f64> {
    let (w, h) = (factors.w(), factors.h());
    if x.rows() != w.rows() || x.cols() != h.cols() {
        return Err(SmfError::shape(format!(
            "X is {:?}, W H is {}x{}",
            x.shape(),
            w.rows(),
            h.cols()
        )));
    }
    let diff = x.sub(&factors.product());
    let n = (x.rows() * x.cols()).max(1) as f64;
    Ok(diff.as_slice().iter().map(|v| v * v).sum::<f64>() / n)
}

/// Stacks images as rows of a data matrix.
pub fn images_to_matrix(images: &[GrayImage]) -> Result<DenseMatrix> {
    let first = images.first().ok_or_else(|| SmfError::invalid("no images"))?;
    let m = first.pixels.len();
    let mut data = Vec::with_capacity(images.len() * m);
    for (i, img) in images.iter().enumerate() {
        if img.width != first.width || img.height != first.height {
            return Err(SmfError::shape(format!(
                "image {i} is {}x{}, expected {}x{}",
                img.width, img.height, first.width, first.height
            )));
        }
        data.extend_from_slice(&img.pixels);
    }
    DenseMatrix::from_vec(images.len(), m, data)
}
