use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Pixels whose information lives in a few planted bands.
#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub pixels: Vec<Vec<f64>>,
    pub planted: Vec<usize>,
}

/// `n` spectra of `d` bands driven by `planted.len()` independent latent
/// factors. Each planted band is a clean copy of one factor; every other
/// band is `coupling × factor + N(0, 1)` for a factor chosen by band index.
pub fn planted_bands(n: usize, d: usize, planted: &[usize], coupling: f64, seed: u64) -> Result<PlantedDataset> {
    let f = planted.len();
    if f == 0 || planted.iter().any(|&p| p >= d) {
        return Err(Error::Parameter(format!("planted bands {planted:?} invalid for {d} bands")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut owner = vec![usize::MAX; d];
    for (c, &p) in planted.iter().enumerate() {
        owner[p] = c;
    }
    let pixels = (0..n)
        .map(|_| {
            let s: Vec<f64> = (0..f).map(|_| rng.sample(StandardNormal)).collect();
            (0..d)
                .map(|j| match owner[j] {
                    usize::MAX => coupling * s[j % f] + rng.sample::<f64, _>(StandardNormal),
                    c => s[c],
                })
                .collect()
        })
        .collect();
    Ok(PlantedDataset {
        pixels,
        planted: planted.to_vec(),
    })
}

/// `count` distinct band indices spread over `0..d`, drawn with `seed`.
pub fn random_planted(d: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut idx = rand::seq::index::sample(&mut rng, d, count).into_vec();
    idx.sort_unstable();
    idx
}
