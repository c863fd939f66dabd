//! Correlation coefficients, the standardized-feature regression ablation
//! and the (k, trees) hyperparameter sweep.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::graph::{GraphOptions, KnnMethod, Symmetrization};
use crate::modularity::{modularity_from_space, ModularityOptions};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewObservations {
            required: 3,
            found: x.len(),
        });
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&ranks(x), &ranks(y))
}

/// Named feature columns plus a target column, all of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    target_name: String,
    target: Vec<f64>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, target_name: impl Into<String>, target: Vec<f64>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch(names.len(), columns.len()));
        }
        if target.len() < 3 {
            return Err(Error::TooFewObservations {
                required: 3,
                found: target.len(),
            });
        }
        for (name, column) in names.iter().zip(&columns) {
            if column.len() != target.len() {
                return Err(Error::LengthMismatch(column.len(), target.len()));
            }
            if column.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(name.clone(), "non-finite value"));
            }
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("target", "non-finite value"));
        }
        Ok(FeatureTable {
            names,
            columns,
            target_name: target_name.into(),
            target,
        })
    }

    /// Reads a tab-separated table with a header row. `target` names the
    /// target column; every other column is a feature, except columns whose
    /// first value is not numeric, which are treated as row labels and
    /// skipped.
    pub fn from_tsv<R: BufRead>(reader: R, target: &str) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or_else(|| Error::format("table", "missing header"))?;
        let names: Vec<&str> = header.split('\t').map(str::trim).collect();
        let mut rows: Vec<Vec<String>> = Vec::new();
        for (offset, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split('\t').map(|f| f.trim().to_owned()).collect();
            if fields.len() != names.len() {
                return Err(Error::Arity {
                    line: offset + 2,
                    expected: names.len(),
                    found: fields.len(),
                });
            }
            rows.push(fields);
        }
        let first = rows.first().ok_or(Error::TooFewObservations { required: 3, found: 0 })?;
        let numeric: Vec<bool> = first.iter().map(|f| f.parse::<f64>().is_ok()).collect();
        let target_at = names
            .iter()
            .position(|n| *n == target)
            .ok_or_else(|| Error::UnknownColumn(target.to_owned()))?;
        if !numeric[target_at] {
            return Err(Error::format(target, "target column is not numeric"));
        }

        let column = |c: usize| -> Result<Vec<f64>> {
            rows.iter()
                .enumerate()
                .map(|(r, row)| {
                    row[c].parse().map_err(|_| Error::InvalidNumber {
                        line: r + 2,
                        token: row[c].clone(),
                    })
                })
                .collect()
        };
        let mut feature_names = Vec::new();
        let mut columns = Vec::new();
        for (c, name) in names.iter().enumerate() {
            if c != target_at && numeric[c] {
                feature_names.push((*name).to_owned());
                columns.push(column(c)?);
            }
        }
        FeatureTable::new(feature_names, columns, target, column(target_at)?)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn rows(&self) -> usize {
        self.target.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Regression {
    /// Features in the fit, in table order.
    pub features: Vec<String>,
    pub intercept: f64,
    /// One coefficient per standardized feature.
    pub coefficients: Vec<f64>,
    /// In-sample coefficient of determination.
    pub r_squared: f64,
    /// Numerical rank of the design matrix (intercept included).
    pub rank: usize,
}

/// Ordinary least squares of the raw target on z-scored features (population
/// standard deviation), optionally leaving one feature out. Collinear
/// designs get the minimum-norm coefficients.
pub fn ablation_regression(table: &FeatureTable, ablate: Option<&str>) -> Result<Regression> {
    if let Some(name) = ablate {
        if !table.names.iter().any(|n| n == name) {
            return Err(Error::UnknownColumn(name.to_owned()));
        }
    }
    let kept: Vec<usize> = (0..table.names.len())
        .filter(|&i| Some(table.names[i].as_str()) != ablate)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidParameter("no feature left after ablation".into()));
    }
    let n = table.rows();
    if n < kept.len() + 1 {
        return Err(Error::TooFewObservations {
            required: kept.len() + 1,
            found: n,
        });
    }

    let mut design = DMatrix::from_element(n, kept.len() + 1, 1.0);
    for (c, &f) in kept.iter().enumerate() {
        let column = &table.columns[f];
        let mu = mean(column);
        let sd = (column.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64).sqrt();
        if sd == 0.0 {
            return Err(Error::ZeroVariance(table.names[f].clone()));
        }
        for (r, v) in column.iter().enumerate() {
            design[(r, c + 1)] = (v - mu) / sd;
        }
    }
    let y = DVector::from_column_slice(&table.target);
    let my = mean(&table.target);
    let ss_tot: f64 = table.target.iter().map(|v| (v - my) * (v - my)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantInput);
    }

    let svd = design.clone().svd(true, true);
    let eps = svd.singular_values.max() * (n.max(kept.len() + 1) as f64) * f64::EPSILON;
    let rank = svd.rank(eps);
    let beta = svd.solve(&y, eps).map_err(|e| Error::InvalidParameter(e.to_owned()))?;
    let residual = &y - &design * &beta;
    let ss_res = residual.norm_squared();

    Ok(Regression {
        features: kept.iter().map(|&i| table.names[i].clone()).collect(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        r_squared: 1.0 - ss_res / ss_tot,
        rank,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepOptions {
    pub leaf_capacity: usize,
    pub seed: u64,
    pub frequency_limit: Option<usize>,
    pub symmetrization: Symmetrization,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            leaf_capacity: crate::DEFAULT_LEAF_CAPACITY,
            seed: 0,
            frequency_limit: None,
            symmetrization: Symmetrization::Union,
        }
    }
}

/// One grid cell. A correlation is `None` when it is undefined, e.g. when
/// every embedding got the same modularity.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub k: usize,
    pub trees: usize,
    /// Normalized modularity per embedding.
    pub modularity: Vec<f64>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// For every `(k, trees)` pair, the normalized modularity of each embedding
/// and its correlation with `scores`.
pub fn sweep(
    embeddings: &[EmbeddingSpace],
    scores: &[f64],
    k_values: &[usize],
    tree_values: &[usize],
    options: &SweepOptions,
) -> Result<Vec<SweepCell>> {
    if embeddings.len() != scores.len() {
        return Err(Error::LengthMismatch(embeddings.len(), scores.len()));
    }
    let grid: Vec<(usize, usize)> = k_values
        .iter()
        .flat_map(|&k| tree_values.iter().map(move |&t| (k, t)))
        .collect();
    grid.into_par_iter()
        .map(|(k, trees)| {
            let modularity_options = ModularityOptions {
                graph: GraphOptions {
                    k,
                    knn: KnnMethod::Forest {
                        trees,
                        leaf_capacity: options.leaf_capacity,
                        seed: options.seed,
                    },
                    symmetrization: options.symmetrization,
                },
                frequency_limit: options.frequency_limit,
            };
            let modularity = embeddings
                .iter()
                .map(|space| modularity_from_space(space, &modularity_options).map(|r| r.q_norm))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Sweep {
                    k,
                    t: trees,
                    source: Box::new(e),
                })?;
            let undefined_as_none = |r: Result<f64>| match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::ConstantInput | Error::TooFewObservations { .. }) => Ok(None),
                Err(e) => Err(e),
            };
            Ok(SweepCell {
                k,
                trees,
                pearson: undefined_as_none(pearson(&modularity, scores))?,
                spearman: undefined_as_none(spearman(&modularity, scores))?,
                modularity,
            })
        })
        .collect()
}
