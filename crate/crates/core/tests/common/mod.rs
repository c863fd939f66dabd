#![allow(dead_code)]

use langmod::embedding::EmbeddingSpace;
use langmod::Lexicon;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn random_space(rng: &mut impl Rng, lang: &str, n: usize, dim: usize) -> EmbeddingSpace {
    EmbeddingSpace::from_rows(lang, (0..n).map(|i| (format!("w{i}"), unit_vector(rng, dim)))).unwrap()
}

/// Copy of `space` under another language code.
pub fn twin(space: &EmbeddingSpace, lang: &str) -> EmbeddingSpace {
    EmbeddingSpace::from_rows(lang, (0..space.len()).map(|i| (space.word(i).to_owned(), space.vector(i).to_vec()))).unwrap()
}

pub fn identity_lexicon(space: &EmbeddingSpace, src: &str, tgt: &str) -> Lexicon {
    Lexicon::new(src, tgt, space.words().iter().map(|w| (w.clone(), w.clone())))
}

/// Haar-ish random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Rotation by `angle` in the plane of the first two coordinates.
pub fn plane_rotation(dim: usize, angle: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(dim, dim);
    m[(0, 0)] = angle.cos();
    m[(0, 1)] = angle.sin();
    m[(1, 0)] = -angle.sin();
    m[(1, 1)] = angle.cos();
    m
}

pub fn map_space(space: &EmbeddingSpace, w: &DMatrix<f64>, lang: &str) -> EmbeddingSpace {
    let d = space.dim();
    EmbeddingSpace::from_rows(
        lang,
        (0..space.len()).map(|i| {
            let x = space.vector(i);
            let y: Vec<f64> = (0..d).map(|j| (0..d).map(|k| x[k] * w[(k, j)]).sum()).collect();
            (space.word(i).to_owned(), y)
        }),
    )
    .unwrap()
}

// Independent reference kernels, written without the crate's helpers.

pub fn ref_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn ref_cos(a: &[f64], b: &[f64]) -> f64 {
    let na = ref_dot(a, a).sqrt();
    let nb = ref_dot(b, b).sqrt();
    if na * nb == 0.0 {
        0.0
    } else {
        ref_dot(a, b) / (na * nb)
    }
}
