#![allow(clippy::needless_range_loop)]

mod common;

use common::{random_space, rng};
use langmod::embedding::{merge_spaces, EmbeddingSpace};
use langmod::stats::{ablation_regression, pearson, spearman, sweep, FeatureTable, SweepOptions};
use langmod::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn ref_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

/// Average rank by counting: 1 + (#smaller) + (#equal - 1) / 2.
fn ref_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

fn ref_spearman(x: &[f64], y: &[f64]) -> f64 {
    ref_pearson(&ref_ranks(x), &ref_ranks(y))
}

/// OLS on z-scored features through the normal equations, solved by
/// Gauss-Jordan elimination with partial pivoting. Returns (beta, R^2).
fn ref_ols(columns: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let p = columns.len() + 1;
    let mut x = vec![vec![1.0; p]; n];
    for (c, col) in columns.iter().enumerate() {
        let mu = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
        for r in 0..n {
            x[r][c + 1] = (col[r] - mu) / sd;
        }
    }
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = (0..n).map(|r| x[r][i] * x[r][j]).sum();
        }
        a[i][p] = (0..n).map(|r| x[r][i] * y[r]).sum();
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, pivot);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    let my = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = (0..n)
        .map(|r| {
            let fit: f64 = (0..p).map(|i| x[r][i] * beta[i]).sum();
            (y[r] - fit).powi(2)
        })
        .sum();
    (beta, 1.0 - ss_res / ss_tot)
}

fn names(count: usize) -> Vec<String> {
    (0..count).map(|i| format!("f{i}")).collect()
}

fn random_table(r: &mut impl Rng, n: usize, features: usize) -> FeatureTable {
    let columns: Vec<Vec<f64>> = (0..features)
        .map(|_| (0..n).map(|_| r.sample::<f64, _>(StandardNormal) * 3.0 + 1.0).collect())
        .collect();
    let target = (0..n)
        .map(|i| columns.iter().enumerate().map(|(c, col)| (c as f64 - 1.0) * col[i]).sum::<f64>() + r.sample::<f64, _>(StandardNormal))
        .collect();
    FeatureTable::new(names(features), columns, "y", target).unwrap()
}

#[test]
fn statistics_match_reference_on_random_inputs() {
    let mut r = rng(1);
    for trial in 0..100 {
        let n = r.random_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        // Every fourth trial uses a coarse grid so ties occur.
        let y: Vec<f64> = if trial % 4 == 0 {
            (0..n).map(|_| r.random_range(0..4) as f64).collect()
        } else {
            x.iter().map(|v| v + r.sample::<f64, _>(StandardNormal)).collect()
        };
        match (pearson(&x, &y), spearman(&x, &y)) {
            (Ok(p), Ok(s)) => {
                assert!((p - ref_pearson(&x, &y)).abs() < 1e-10);
                assert!((s - ref_spearman(&x, &y)).abs() < 1e-10);
            }
            _ => assert!(y.iter().all(|v| *v == y[0])),
        }

        let features = r.random_range(1..5);
        let rows = r.random_range(features + 2..40);
        let table = random_table(&mut r, rows, features);
        let columns: Vec<Vec<f64>> = table.names().iter().map(|c| table.column(c).unwrap().to_vec()).collect();
        let fit = ablation_regression(&table, None).unwrap();
        let (beta, r2) = ref_ols(&columns, table.target());
        assert!((fit.r_squared - r2).abs() < 1e-10);
        assert!((fit.intercept - beta[0]).abs() < 1e-10);
        for (c, b) in fit.coefficients.iter().zip(&beta[1..]) {
            assert!((c - b).abs() < 1e-10);
        }
        if features == 1 {
            assert!(ablation_regression(&table, Some("f0")).is_err());
            continue;
        }
        for name in table.names() {
            let ablated = ablation_regression(&table, Some(name)).unwrap();
            assert!(ablated.r_squared <= fit.r_squared + 1e-12);
            let rest: Vec<Vec<f64>> = table
                .names()
                .iter()
                .filter(|c| *c != name)
                .map(|c| table.column(c).unwrap().to_vec())
                .collect();
            assert!((ablated.r_squared - ref_ols(&rest, table.target()).1).abs() < 1e-10);
        }
    }
}

#[test]
fn regression_examples() {
    let x = vec![1.0, 4.0, 2.0, 8.0, 5.0];
    let table = FeatureTable::new(names(1), vec![x.clone()], "y", x.clone()).unwrap();
    assert!((ablation_regression(&table, None).unwrap().r_squared - 1.0).abs() < 1e-12);

    let mut r = rng(2);
    let n = 200;
    let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| r.sample(StandardNormal)).collect()).collect();
    let noise: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let table = FeatureTable::new(names(4), cols, "y", noise).unwrap();
    assert!(ablation_regression(&table, None).unwrap().r_squared < 0.2);

    // A duplicated column adds nothing, with or without its twin.
    let a: Vec<f64> = (0..30).map(|_| r.sample(StandardNormal)).collect();
    let b: Vec<f64> = (0..30).map(|_| r.sample(StandardNormal)).collect();
    let y: Vec<f64> = a.iter().zip(&b).map(|(a, b)| 2.0 * a - b + 0.3 * r.sample::<f64, _>(StandardNormal)).collect();
    let names3 = vec!["a".to_owned(), "b".to_owned(), "a2".to_owned()];
    let table = FeatureTable::new(names3, vec![a.clone(), b, a], "y", y).unwrap();
    let full = ablation_regression(&table, None).unwrap();
    let without = ablation_regression(&table, Some("a2")).unwrap();
    assert!(full.rank < 4);
    assert!((full.r_squared - without.r_squared).abs() < 1e-9);
}

#[test]
fn regression_errors() {
    let table = FeatureTable::new(names(2), vec![vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0]], "y", vec![1.0, 0.0, 2.0]).unwrap();
    assert!(matches!(ablation_regression(&table, None), Err(Error::ZeroVariance(_))));
    assert!(matches!(ablation_regression(&table, Some("nope")), Err(Error::UnknownColumn(_))));
    let wide = FeatureTable::new(names(3), vec![vec![1.0, 2.0, 3.0]; 3], "y", vec![1.0, 0.0, 2.0]).unwrap();
    assert!(matches!(ablation_regression(&wide, None), Err(Error::TooFewObservations { .. })));
    assert!(FeatureTable::new(names(1), vec![vec![1.0, 2.0]], "y", vec![1.0, 2.0]).is_err());
    assert!(FeatureTable::new(names(1), vec![vec![1.0, f64::NAN, 3.0]], "y", vec![1.0, 2.0, 3.0]).is_err());
}

#[test]
fn table_from_tsv_skips_label_columns() {
    let text = "name\tmod\tcsls\tacc\nen-ja\t0.5\t0.1\t0.7\nen-fr\t0.2\t0.3\t0.9\nen-hu\t0.4\t0.2\t0.75\n";
    let table = FeatureTable::from_tsv(text.as_bytes(), "acc").unwrap();
    assert_eq!(table.names(), &["mod".to_owned(), "csls".to_owned()]);
    assert_eq!(table.target(), &[0.7, 0.9, 0.75]);
    assert!(FeatureTable::from_tsv(text.as_bytes(), "missing").is_err());
}

/// Pairs whose source side drifts further from the target along a shared
/// direction as `step` grows.
fn separation_family(seed: u64, pairs: usize, n: usize, dim: usize) -> Vec<EmbeddingSpace> {
    let mut r = rng(seed);
    let tgt = random_space(&mut r, "xx", n, dim);
    (0..pairs)
        .map(|step| {
            let shift = 0.25 * step as f64;
            let src = EmbeddingSpace::from_rows(
                "en",
                (0..n).map(|i| {
                    let mut v: Vec<f64> = tgt.vector(i).iter().map(|x| x + 0.05 * r.sample::<f64, _>(StandardNormal)).collect();
                    v[0] += shift;
                    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    (format!("w{i}"), v.into_iter().map(|x| x / len).collect::<Vec<_>>())
                }),
            )
            .unwrap();
            merge_spaces(&[src, tgt.clone()]).unwrap()
        })
        .collect()
}

#[test]
fn sweep_grid_shapes_and_monotone_family() {
    let family = separation_family(3, 6, 120, 12);
    let scores: Vec<f64> = (0..family.len()).map(|i| 1.0 - 0.1 * i as f64).collect();
    let opts = SweepOptions::default();
    let one = sweep(&family, &scores, &[3], &[20], &opts).unwrap();
    assert_eq!(one.len(), 1);
    let grid = sweep(&family, &scores, &[1, 3], &[10, 30], &opts).unwrap();
    assert_eq!(grid.len(), 4);
    for cell in &grid {
        assert_eq!(cell.modularity.len(), family.len());
        if cell.k == 3 {
            assert_eq!(cell.spearman, Some(-1.0), "{:?}", cell.modularity);
        }
    }
    assert_eq!((grid[0].k, grid[0].trees, grid[3].k, grid[3].trees), (1, 10, 3, 30));
}

#[test]
fn sweep_reports_undefined_correlations_as_missing() {
    let family = separation_family(4, 1, 50, 6);
    let same = vec![family[0].clone(); 4];
    let cells = sweep(&same, &[1.0, 2.0, 3.0, 4.0], &[3], &[5, 10], &SweepOptions::default()).unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c.pearson.is_none() && c.spearman.is_none()));

    let mut r = rng(5);
    let single = vec![random_space(&mut r, "en", 20, 4); 3];
    let err = sweep(&single, &[1.0, 2.0, 3.0], &[3], &[5], &SweepOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Sweep { k: 3, t: 5, .. }));
    assert!(err.is_degenerate());
    assert!(matches!(sweep(&same, &[1.0], &[3], &[5], &SweepOptions::default()), Err(Error::LengthMismatch(4, 1))));
}

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, len)
}

proptest! {
    #[test]
    fn spearman_ignores_monotone_transforms((x, y) in (3usize..40).prop_flat_map(|n| (finite_vec(n), finite_vec(n)))) {
        if let Ok(s) = spearman(&x, &y) {
            let tx: Vec<f64> = x.iter().map(|v| (v / 100.0).exp() * 7.0 - 3.0).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * v * v + 5.0 * v).collect();
            prop_assert_eq!(spearman(&tx, &ty).unwrap(), s);
        }
    }

    #[test]
    fn pearson_ignores_positive_affine_maps((x, y) in (3usize..40).prop_flat_map(|n| (finite_vec(n), finite_vec(n))), a in 0.1f64..10.0, b in -100.0f64..100.0) {
        if let Ok(p) = pearson(&x, &y) {
            let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&tx, &y).unwrap() - p).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&p));
        }
    }
}
