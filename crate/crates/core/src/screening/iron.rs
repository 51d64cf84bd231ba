/// Mass-weighted isotonic regression of `q` (pool adjacent violators).
pub fn iron(q: &[f64], masses: &[f64]) -> Vec<f64> {
    assert_eq!(q.len(), masses.len(), "iron: q and masses differ in length");
    // (mean, mass, count) per block
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(q.len());
    for (&v, &w) in q.iter().zip(masses) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, n1 + n2);
        }
    }
    blocks.iter().flat_map(|&(m, _, n)| std::iter::repeat_n(m, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over block partitions with nondecreasing block means.
    fn brute_force(q: &[f64], w: &[f64]) -> Vec<f64> {
        let n = q.len();
        let mut best = (f64::INFINITY, vec![]);
        for cuts in 0u32..(1 << (n - 1)) {
            let mut out = vec![0.0; n];
            let mut start = 0;
            let mut prev = f64::NEG_INFINITY;
            let mut ok = true;
            for i in 0..n {
                if i == n - 1 || cuts & (1 << i) != 0 {
                    let mass: f64 = w[start..=i].iter().sum();
                    let mean = (start..=i).map(|k| q[k] * w[k]).sum::<f64>() / mass;
                    if mean < prev - 1e-12 {
                        ok = false;
                        break;
                    }
                    prev = mean;
                    out[start..=i].iter_mut().for_each(|v| *v = mean);
                    start = i + 1;
                }
            }
            if ok {
                let err: f64 = (0..n).map(|k| w[k] * (out[k] - q[k]).powi(2)).sum();
                if err < best.0 {
                    best = (err, out);
                }
            }
        }
        best.1
    }

    #[test]
    fn examples() {
        assert_eq!(iron(&[0.2, 0.5, 0.9], &[0.3, 0.3, 0.4]), vec![0.2, 0.5, 0.9]);
        assert_eq!(iron(&[0.9, 0.1], &[0.5, 0.5]), vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_search(q in prop::collection::vec(0.0f64..1.0, 8), w in prop::collection::vec(0.05f64..1.0, 8)) {
            let total: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|v| v / total).collect();
            let ours = iron(&q, &w);
            let oracle = brute_force(&q, &w);
            for (a, b) in ours.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn idempotent_and_mean_preserving(q in prop::collection::vec(0.0f64..1.0, 1..30)) {
            let w = vec![1.0 / q.len() as f64; q.len()];
            let once = iron(&q, &w);
            prop_assert!(once.windows(2).all(|p| p[0] <= p[1] + 1e-15));
            let twice = iron(&once, &w);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-14);
            }
            let m0: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
            let m1: f64 = once.iter().zip(&w).map(|(a, b)| a * b).sum();
            prop_assert!((m0 - m1).abs() < 1e-12);
        }
    }
}
