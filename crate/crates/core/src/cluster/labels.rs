use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spectral::LabelMap;

/// Majority vote over the `(2r+1)²` neighborhood of every unmasked pixel.
/// Masked pixels do not vote; the original label survives any tie for
/// first place.
pub fn smooth_labels(labels: &LabelMap, radius: usize) -> Result<LabelMap> {
    if radius == 0 {
        return Err(Error::Parameter("smoothing radius must be at least 1".into()));
    }
    let (rows, cols) = (labels.rows(), labels.cols());
    let k = labels.k() as usize;
    let src = labels.labels();
    let mask = labels.mask();
    let mut out = src.to_vec();
    let mut votes = vec![0usize; k];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if !mask[i] {
                continue;
            }
            votes.iter_mut().for_each(|v| *v = 0);
            for rr in r.saturating_sub(radius)..(r + radius + 1).min(rows) {
                for cc in c.saturating_sub(radius)..(c + radius + 1).min(cols) {
                    let j = rr * cols + cc;
                    if mask[j] {
                        votes[src[j] as usize] += 1;
                    }
                }
            }
            let top = *votes.iter().max().unwrap_or(&0);
            let own = src[i] as usize;
            if votes[own] < top {
                let winners: Vec<usize> = (0..k).filter(|&l| votes[l] == top).collect();
                if winners.len() == 1 {
                    out[i] = winners[0] as u16;
                }
            }
        }
    }
    LabelMap::new(rows, cols, out, mask.to_vec(), labels.k())
}

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn ari_slices<A: Ord + Copy, B: Ord + Copy>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("labelings of length {} and {}", a.len(), b.len())));
    }
    let mut table: BTreeMap<(A, B), usize> = BTreeMap::new();
    let mut rows: BTreeMap<A, usize> = BTreeMap::new();
    let mut cols: BTreeMap<B, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sa: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sb: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(a.len());
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    let denom = max - expected;
    if denom.abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Adjusted Rand index over pixels unmasked in both maps.
pub fn adjusted_rand_index(a: &LabelMap, b: &LabelMap) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "label maps {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..a.labels().len() {
        if a.mask()[i] && b.mask()[i] {
            x.push(a.labels()[i]);
            y.push(b.labels()[i]);
        }
    }
    ari_slices(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                pairs += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / pairs;
        (both - expected) / (0.5 * (only_a + only_b) - expected)
    }

    #[test]
    fn six_point_pair_count() {
        let a = [0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 1, 2, 2];
        let got = ari_slices(&a, &b).unwrap();
        assert!((got - brute_force_ari(&a, &b)).abs() < 1e-12);
        // 2 agreeing pairs, 6 and 3 same-cluster pairs, 15 pairs in all
        let expected = 6.0 * 3.0 / 15.0;
        assert!((got - (2.0 - expected) / (4.5 - expected)).abs() < 1e-12);
    }

    #[test]
    fn identical_and_permuted() {
        let a = [0u16, 1, 2, 2, 1, 0, 3];
        let b = [3u16, 2, 0, 0, 2, 3, 1];
        assert_eq!(ari_slices(&a, &a).unwrap(), 1.0);
        assert_eq!(ari_slices(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn label_map_ari_ignores_masked() {
        let a = LabelMap::new(1, 4, vec![0, 0, 1, 1], vec![true, true, true, false], 2).unwrap();
        let b = LabelMap::new(1, 4, vec![1, 1, 0, 0], vec![true, true, true, true], 2).unwrap();
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
        let c = LabelMap::new(2, 2, vec![0; 4], vec![true; 4], 2).unwrap();
        assert!(adjusted_rand_index(&a, &c).is_err());
    }

    #[test]
    fn uniform_map_unchanged() {
        let m = LabelMap::new(4, 5, vec![2; 20], vec![true; 20], 3).unwrap();
        assert_eq!(smooth_labels(&m, 1).unwrap(), m);
    }

    #[test]
    fn speckle_absorbed() {
        let mut l = vec![1u16; 25];
        l[12] = 0;
        let m = LabelMap::new(5, 5, l, vec![true; 25], 2).unwrap();
        assert!(smooth_labels(&m, 1).unwrap().labels().iter().all(|&v| v == 1));
    }

    #[test]
    fn checkerboard_unchanged() {
        let (rows, cols) = (6, 7);
        let l: Vec<u16> = (0..rows * cols).map(|i| ((i / cols + i % cols) % 2) as u16).collect();
        let m = LabelMap::new(rows, cols, l.clone(), vec![true; rows * cols], 2).unwrap();
        // every window holds at least as many of the centre label as the other
        for r in 0..rows {
            for c in 0..cols {
                let own = l[r * cols + c];
                let (mut same, mut other) = (0, 0);
                for rr in r.saturating_sub(1)..(r + 2).min(rows) {
                    for cc in c.saturating_sub(1)..(c + 2).min(cols) {
                        if l[rr * cols + cc] == own {
                            same += 1;
                        } else {
                            other += 1;
                        }
                    }
                }
                assert!(same >= other);
            }
        }
        assert_eq!(smooth_labels(&m, 1).unwrap(), m);
    }

    #[test]
    fn masked_pixels_do_not_vote() {
        let mut l = vec![1u16; 9];
        l[4] = 0;
        let mut mask = vec![false; 9];
        mask[4] = true;
        mask[0] = true;
        let m = LabelMap::new(3, 3, l, mask, 2).unwrap();
        let s = smooth_labels(&m, 1).unwrap();
        // one vote each: tie keeps the centre
        assert_eq!(s.labels()[4], 0);
        assert_eq!(s.labels()[1], crate::spectral::LABEL_MASKED);
    }

    #[test]
    fn zero_radius_rejected() {
        let m = LabelMap::new(1, 1, vec![0], vec![true], 1).unwrap();
        assert!(smooth_labels(&m, 0).is_err());
    }

    proptest! {
        #[test]
        fn ari_matches_pair_counting(a in prop::collection::vec(0usize..3, 4..30), seed in 0usize..1000) {
            let b: Vec<usize> = a.iter().enumerate().map(|(i, &v)| if (i * 31 + seed) % 5 == 0 { (v + 1) % 3 } else { v }).collect();
            let got = ari_slices(&a, &b).unwrap();
            let bf = brute_force_ari(&a, &b);
            if bf.is_finite() {
                prop_assert!((got - bf).abs() < 1e-9);
            }
        }

        #[test]
        fn ari_symmetric(a in prop::collection::vec(0u8..4, 2..40), b in prop::collection::vec(0u8..4, 2..40)) {
            let n = a.len().min(b.len());
            let x = ari_slices(&a[..n], &b[..n]).unwrap();
            let y = ari_slices(&b[..n], &a[..n]).unwrap();
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!(x <= 1.0 + 1e-12);
        }
    }
}
