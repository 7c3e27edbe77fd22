//! N-FINDR against exhaustive subset search.
//!
//! Points are drawn in an (E-1)-dimensional space and embedded into more
//! bands by a random rotation plus offset. Volumes are therefore the same
//! whether measured after projection or, as the oracle does, through the
//! Gram determinant of edge vectors in band space.

use lcfuse_core::unmix::nfindr_extract;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn laplace_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, v)| *v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * laplace_det(&minor)
        })
        .sum()
}

fn oracle_volume(pixels: &[Vec<f64>], subset: &[usize]) -> f64 {
    let edges: Vec<Vec<f64>> = subset[1..]
        .iter()
        .map(|&i| pixels[i].iter().zip(&pixels[subset[0]]).map(|(a, b)| a - b).collect())
        .collect();
    let gram: Vec<Vec<f64>> = edges
        .iter()
        .map(|a| edges.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let fact: f64 = (1..=edges.len()).map(|k| k as f64).product();
    laplace_det(&gram).max(0.0).sqrt() / fact
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (k - 1..n)
        .flat_map(|last| {
            subsets(last, k - 1).into_iter().map(move |mut s| {
                s.push(last);
                s
            })
        })
        .collect()
}

/// Random orthonormal `bands x dims` embedding via Gram-Schmidt.
fn embedding(rng: &mut ChaCha8Rng, bands: usize, dims: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < dims {
        let mut v: Vec<f64> = (0..bands).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    cols
}

pub fn instance(seed: u64) -> (Vec<Vec<f64>>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = rng.random_range(3..=5);
    let dims = e - 1;
    let bands = rng.random_range(dims..=7);
    let n = rng.random_range(e + 1..=12);
    let basis = embedding(&mut rng, bands, dims);
    let offset: Vec<f64> = (0..bands).map(|_| rng.random_range(0.0..0.5)).collect();
    let pixels = (0..n)
        .map(|_| {
            let low: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
            (0..bands)
                .map(|b| offset[b] + (0..dims).map(|k| basis[k][b] * low[k]).sum::<f64>())
                .collect()
        })
        .collect();
    (pixels, e)
}

#[test]
fn matches_exhaustive_search_on_small_instances() {
    let mut failures = Vec::new();
    for seed in 0..2000 {
        let (pixels, e) = instance(seed);
        let bands = pixels[0].len();
        let flat: Vec<f64> = pixels.iter().flatten().copied().collect();
        let ex = nfindr_extract(&flat, bands, e, 100).unwrap();
        let best = subsets(pixels.len(), e)
            .iter()
            .map(|s| oracle_volume(&pixels, s))
            .fold(0.0, f64::max);
        let got = oracle_volume(&pixels, &ex.pixel_indices);
        assert!((got - ex.volume).abs() <= 1e-9 * best.max(1e-12), "seed {seed}: reported volume");
        if (got - best).abs() > 1e-9 * best {
            failures.push((seed, got, best));
        }
    }
    assert!(failures.is_empty(), "local optima: {failures:?}");
}
