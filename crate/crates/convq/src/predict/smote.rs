//! Synthetic minority oversampling by interpolation between minority
//! nearest neighbors.

use rand::Rng;

use crate::{Error, Result};

/// Balance the classes exactly by adding synthetic minority samples.
///
/// Every synthetic point is `x + u * (x_nn - x)` for a minority point `x`,
/// one of its `k` minority nearest neighbors `x_nn`, and `u` uniform in
/// (0, 1). `k` is clamped to `minority - 1`. Already-balanced input is
/// returned unchanged. Call this on training rows only.
pub fn smote(
    x: &[Vec<f64>],
    y: &[bool],
    k: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if pos.len() == neg.len() {
        return Ok((x.to_vec(), y.to_vec()));
    }
    let (minority, minority_label, need) = if pos.len() < neg.len() {
        (pos.clone(), true, neg.len() - pos.len())
    } else {
        (neg.clone(), false, pos.len() - neg.len())
    };
    if minority.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "minority class has {} sample(s); smote needs at least 2",
            minority.len()
        )));
    }
    let k = k.max(1).min(minority.len() - 1);

    // k nearest minority neighbors per minority point, by squared distance
    // with index tie-break for determinism.
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
    };
    let neighbors: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (dist2(&x[i], &x[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = crate::util::seeded_rng(seed, 0);
    let mut out_x = x.to_vec();
    let mut out_y = y.to_vec();
    for s in 0..need {
        let mi = s % minority.len();
        let base = &x[minority[mi]];
        let nn = &x[neighbors[mi][rng.gen_range(0..neighbors[mi].len())]];
        let u = loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        };
        let synthetic: Vec<f64> = base
            .iter()
            .zip(nn)
            .map(|(b, n)| b + u * (n - b))
            .collect();
        out_x.push(synthetic);
        out_y.push(minority_label);
    }
    Ok((out_x, out_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn balanced_input_is_identity() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![true, true, false, false];
        let (ox, oy) = smote(&x, &y, 5, 1).unwrap();
        assert_eq!(ox, x);
        assert_eq!(oy, y);
    }

    #[test]
    fn two_point_minority_fills_the_segment() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![5.0, 5.0],
            vec![6.0, 5.0],
            vec![7.0, 5.0],
            vec![8.0, 5.0],
            vec![9.0, 5.0],
        ];
        let y = vec![true, true, false, false, false, false, false];
        let (ox, oy) = smote(&x, &y, 1, 2).unwrap();
        assert_eq!(oy.iter().filter(|&&l| l).count(), 5);
        for point in &ox[7..] {
            // on the segment between (0,0) and (1,1): x == y and within (0,1)
            assert!((point[0] - point[1]).abs() < 1e-12);
            assert!(point[0] > 0.0 && point[0] < 1.0, "{point:?}");
        }
    }

    // Oracle: class counting.
    #[test]
    fn twenty_eighty_split_balances_to_eighty_eighty() {
        let mut rng = crate::util::seeded_rng(90, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            x.push(vec![rng.gen::<f64>(), rng.gen::<f64>()]);
            y.push(i < 20);
        }
        let (ox, oy) = smote(&x, &y, 5, 3).unwrap();
        assert_eq!(ox.len(), 160);
        assert_eq!(oy.iter().filter(|&&l| l).count(), 80);
        assert_eq!(oy.iter().filter(|&&l| !l).count(), 80);
    }

    // Oracle: convex-combination constraint against the k-NN sets.
    #[test]
    fn synthetic_points_are_convex_combinations_of_neighbors() {
        let mut rng = crate::util::seeded_rng(91, 0);
        let n_min = 12;
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            x.push(vec![rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0]);
            y.push(i < n_min);
        }
        let k = 5;
        let (ox, oy) = smote(&x, &y, k, 7).unwrap();

        let minority: Vec<usize> = (0..60).filter(|&i| y[i]).collect();
        for (point, &label) in ox[60..].iter().zip(&oy[60..]) {
            assert!(label);
            // must lie on a segment from some minority point to one of its k NNs
            let mut found = false;
            'outer: for &i in &minority {
                let mut others: Vec<(f64, usize)> = minority
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| {
                        let d: f64 = x[i]
                            .iter()
                            .zip(&x[j])
                            .map(|(p, q)| (p - q) * (p - q))
                            .sum();
                        (d, j)
                    })
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(_, j) in others.iter().take(k) {
                    // point = base + u (nn - base) for u in (0,1)?
                    let dir: Vec<f64> =
                        x[j].iter().zip(&x[i]).map(|(n, b)| n - b).collect();
                    let rel: Vec<f64> =
                        point.iter().zip(&x[i]).map(|(p, b)| p - b).collect();
                    let denom: f64 = dir.iter().map(|d| d * d).sum();
                    if denom == 0.0 {
                        continue;
                    }
                    let u = rel.iter().zip(&dir).map(|(r, d)| r * d).sum::<f64>() / denom;
                    if (0.0..=1.0).contains(&u) {
                        let residual: f64 = rel
                            .iter()
                            .zip(&dir)
                            .map(|(r, d)| r - u * d)
                            .map(|v| v * v)
                            .sum();
                        if residual < 1e-18 {
                            found = true;
                            break 'outer;
                        }
                    }
                }
            }
            assert!(found, "synthetic point {point:?} is not on any k-NN segment");
        }
    }

    #[test]
    fn single_minority_sample_errors() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![true, false, false];
        assert!(matches!(
            smote(&x, &y, 5, 1),
            Err(Error::InsufficientData(_))
        ));
    }
}
