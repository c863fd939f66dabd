mod common;

use common::{identity_lexicon, map_space, random_orthogonal, random_space, ref_cos, rng, twin, unit_vector};
use langmod::mapping::{
    evaluate_metric, fit_mse, fit_procrustes, induce_dictionary, mapped_modularity, refine, select_mapping,
    select_mapping_with, MetricOptions, RefineOptions,
};
use langmod::{CslsContext, CslsOptions, EmbeddingSpace, Error, GraphOptions, KnnMethod, MappingMatrix, ValidationMetric};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn space_from(lang: &str, m: &DMatrix<f64>) -> EmbeddingSpace {
    EmbeddingSpace::from_rows(
        lang,
        (0..m.nrows()).map(|i| (format!("w{i}"), m.row(i).iter().copied().collect::<Vec<f64>>())),
    )
    .unwrap()
}

fn gaussian(r: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// Rotation close to the identity, via the Cayley transform of a small
/// skew-symmetric matrix.
fn small_rotation(r: &mut impl Rng, dim: usize, scale: f64) -> DMatrix<f64> {
    let g = gaussian(r, dim, dim) * scale;
    let skew = &g - g.transpose();
    let id = DMatrix::<f64>::identity(dim, dim);
    (&id - &skew) * (&id + &skew).try_inverse().unwrap()
}

/// Target words share a common direction. The source is a noisy rotated
/// copy. Candidate 0 undoes the rotation, so translations coincide and the
/// languages mix; candidate 1 additionally reflects the shared direction,
/// pushing the two languages to opposite sides.
struct SelectionFixture {
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    mixing: MappingMatrix,
    clustering: MappingMatrix,
}

fn selection_fixture(seed: u64, n: usize, dim: usize) -> SelectionFixture {
    let mut r = rng(seed);
    let tgt = EmbeddingSpace::from_rows(
        "xx",
        (0..n).map(|i| {
            let mut v: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            v[0] += 3.0;
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (format!("w{i}"), v.into_iter().map(|x| x / len).collect::<Vec<_>>())
        }),
    )
    .unwrap();
    let q = random_orthogonal(&mut r, dim);
    let noisy = EmbeddingSpace::from_rows(
        "en",
        (0..n).map(|i| {
            let v: Vec<f64> = tgt.vector(i).iter().map(|x| x + 0.02 * r.sample::<f64, _>(StandardNormal)).collect();
            (format!("w{i}"), v)
        }),
    )
    .unwrap();
    let src = map_space(&noisy, &q, "en");
    let mut reflect = DMatrix::<f64>::identity(dim, dim);
    reflect[(0, 0)] = -1.0;
    SelectionFixture {
        src,
        tgt,
        mixing: MappingMatrix::new(q.transpose(), true).unwrap(),
        clustering: MappingMatrix::new(q.transpose() * reflect, true).unwrap(),
    }
}

fn exact_metric_options() -> MetricOptions {
    MetricOptions {
        graph: GraphOptions {
            knn: KnnMethod::Exact,
            ..GraphOptions::default()
        },
        ..MetricOptions::default()
    }
}

#[test]
fn procrustes_recovers_random_rotations() {
    let mut r = rng(1);
    for _ in 0..20 {
        let d = r.random_range(2..=50);
        let x = gaussian(&mut r, 100, d);
        let w_star = random_orthogonal(&mut r, d);
        let y = &x * &w_star;
        let src = space_from("en", &x);
        let tgt = space_from("xx", &y);
        let w = fit_procrustes(&src, &tgt, &identity_lexicon(&src, "en", "xx")).unwrap();
        assert!(w.is_orthogonal());
        assert!(max_abs(&(w.matrix() - &w_star)) <= 1e-8);
        assert!(w.orthogonality_error() <= 1e-8);
    }
}

#[test]
fn mse_recovers_overdetermined_system() {
    let mut r = rng(2);
    let x = gaussian(&mut r, 50, 10);
    let w_star = gaussian(&mut r, 10, 10);
    let src = space_from("en", &x);
    let tgt = space_from("xx", &(&x * &w_star));
    let w = fit_mse(&src, &tgt, &identity_lexicon(&src, "en", "xx")).unwrap();
    assert!(!w.is_orthogonal());
    assert!(max_abs(&(w.matrix() - &w_star)) <= 1e-8);

    let square = gaussian(&mut r, 6, 6);
    let w_star = gaussian(&mut r, 6, 6);
    let src = space_from("en", &square);
    let tgt = space_from("xx", &(&square * &w_star));
    let w = fit_mse(&src, &tgt, &identity_lexicon(&src, "en", "xx")).unwrap();
    assert!(max_abs(&(&square * w.matrix() - &square * &w_star)) <= 1e-8);

    let y = gaussian(&mut r, 4, 4);
    let src = space_from("en", &DMatrix::identity(4, 4));
    let tgt = space_from("xx", &y);
    let w = fit_mse(&src, &tgt, &identity_lexicon(&src, "en", "xx")).unwrap();
    assert!(max_abs(&(w.matrix() - &y)) <= 1e-12);
}

#[test]
fn mse_residual_stays_zero_as_consistent_rows_arrive() {
    let mut r = rng(3);
    let d = 8;
    let w_star = gaussian(&mut r, d, d);
    let x = gaussian(&mut r, 40, d);
    let mut previous = f64::INFINITY;
    for rows in d..=40 {
        let xs = x.rows(0, rows).into_owned();
        let src = space_from("en", &xs);
        let tgt = space_from("xx", &(&xs * &w_star));
        let w = fit_mse(&src, &tgt, &identity_lexicon(&src, "en", "xx")).unwrap();
        let residual = (&xs * w.matrix() - &xs * &w_star).norm();
        assert!(residual <= previous.max(1e-9));
        previous = residual;
    }
}

#[test]
fn rank_deficient_mse_gets_min_norm_solution() {
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
    let y = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 4.0, 2.0, 6.0, 3.0]);
    let src = space_from("en", &x);
    let tgt = space_from("xx", &y);
    let w = fit_mse(&src, &tgt, &identity_lexicon(&src, "en", "xx")).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.0]);
    assert!(max_abs(&(w.matrix() - expected)) <= 1e-12);
}

#[test]
fn mapping_file_round_trip() {
    let mut r = rng(4);
    let w = MappingMatrix::new(random_orthogonal(&mut r, 7), true).unwrap();
    let mut buf = Vec::new();
    w.write(&mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("7 7\n"));
    let back = MappingMatrix::read(&buf[..]).unwrap();
    assert_eq!(back.matrix(), w.matrix());
    assert!(back.is_orthogonal());
    assert!(MappingMatrix::new(gaussian(&mut r, 3, 3), true).is_err());
}

#[test]
fn twin_dictionary_is_identity_pairing() {
    let mut r = rng(5);
    let src = random_space(&mut r, "en", 60, 10);
    let ctx = CslsContext::new(&src, &twin(&src, "xx"), None, &CslsOptions::default()).unwrap();
    let mut pairs = induce_dictionary(&ctx, 1000, true).unwrap().pairs().to_vec();
    pairs.sort();
    let mut want: Vec<(String, String)> = src.words().iter().map(|w| (w.clone(), w.clone())).collect();
    want.sort();
    assert_eq!(pairs, want);
    assert_eq!(induce_dictionary(&ctx, 1, true).unwrap().len(), 1);
}

#[test]
fn refinement_recovers_from_a_perturbed_start() {
    let mut r = rng(6);
    let dim = 12;
    let src = random_space(&mut r, "en", 300, dim);
    let tgt = twin(&src, "xx");
    let w0 = MappingMatrix::new(small_rotation(&mut r, dim, 0.05), true).unwrap();
    let opts = RefineOptions {
        epochs: 3,
        ..RefineOptions::default()
    };
    let (w, trace) = refine(&src, &tgt, &w0, &opts).unwrap();
    assert_eq!(trace.rows.len(), 4);
    assert_eq!(trace.rows[0].epoch, 0);
    assert_eq!(trace.rows[0].dictionary_size, 0);
    let best = trace.rows[trace.best_epoch].score;
    assert!(trace.rows.iter().all(|row| row.score <= best));
    assert!(best >= trace.rows[0].score);
    let id = DMatrix::<f64>::identity(dim, dim);
    assert!(max_abs(&(w.matrix() - &id)) < 1e-6, "{}", max_abs(&(w.matrix() - &id)));
    assert!(max_abs(&(w0.matrix() - &id)) > 1e-2);
}

#[test]
fn one_epoch_from_the_optimum_keeps_it() {
    let mut r = rng(7);
    let src = random_space(&mut r, "en", 100, 8);
    let tgt = twin(&src, "xx");
    let w0 = MappingMatrix::identity(8);
    let opts = RefineOptions {
        epochs: 1,
        ..RefineOptions::default()
    };
    let (w, trace) = refine(&src, &tgt, &w0, &opts).unwrap();
    assert_eq!(trace.rows.len(), 2);
    if trace.best_epoch == 0 {
        assert_eq!(w, w0);
    } else {
        assert!(trace.rows[1].score > trace.rows[0].score);
    }
    assert!(max_abs(&(w.matrix() - w0.matrix())) < 1e-12);
}

#[test]
fn refine_rejects_zero_epochs_and_keeps_partial_trace() {
    let mut r = rng(8);
    let src = random_space(&mut r, "en", 20, 4);
    let tgt = twin(&src, "xx");
    let zero = RefineOptions {
        epochs: 0,
        ..RefineOptions::default()
    };
    assert!(refine(&src, &tgt, &MappingMatrix::identity(4), &zero).is_err());
    let bad_dim = random_space(&mut r, "xx", 20, 5);
    let failure = refine(&src, &bad_dim, &MappingMatrix::identity(4), &RefineOptions::default()).unwrap_err();
    assert!(failure.trace.rows.is_empty());
}

#[test]
fn mod10k_prefers_the_mixing_candidate() {
    for seed in 0..5 {
        let fx = selection_fixture(seed, 200, 16);
        let opts = exact_metric_options();
        let mix = mapped_modularity(&fx.src, &fx.tgt, &fx.mixing, &opts).unwrap().q_norm;
        let clu = mapped_modularity(&fx.src, &fx.tgt, &fx.clustering, &opts).unwrap().q_norm;
        assert!(mix < 0.3 && clu > 0.6, "mix {mix} clu {clu}");
        let candidates = [fx.clustering.clone(), fx.mixing.clone()];
        let (best, scores) = select_mapping(&candidates, &fx.src, &fx.tgt, ValidationMetric::Mod10k, &opts).unwrap();
        assert_eq!(best, 1);
        assert_eq!(scores[1], -mix);
    }
}

#[test]
fn corrupted_caches_flip_the_csls_choice() {
    let fx = selection_fixture(11, 200, 16);
    let opts = exact_metric_options();
    let candidates = [fx.mixing.clone(), fx.clustering.clone()];
    let (honest, _) = select_mapping(&candidates, &fx.src, &fx.tgt, ValidationMetric::Csls10k, &opts).unwrap();
    assert_eq!(honest, 0);
    let (corrupt, _) = select_mapping_with(&candidates, |w| {
        let ctx = CslsContext::restricted(&fx.src, &fx.tgt, Some(w), opts.frequency_limit, &opts.csls)?;
        let shift = if w == &fx.clustering { -2.0 } else { 2.0 };
        let rs = ctx.r_source().iter().map(|r| r + shift).collect();
        let rt = ctx.r_target().iter().map(|r| r + shift).collect();
        ctx.with_caches(rs, rt)?.csls_10k()
    })
    .unwrap();
    assert_eq!(corrupt, 1);
}

#[test]
fn selection_ties_and_order() {
    let fx = selection_fixture(12, 100, 8);
    let opts = exact_metric_options();
    let single = [fx.mixing.clone()];
    assert_eq!(select_mapping(&single, &fx.src, &fx.tgt, ValidationMetric::Csls10k, &opts).unwrap().0, 0);
    let same = [fx.mixing.clone(), fx.mixing.clone(), fx.mixing.clone()];
    assert_eq!(select_mapping(&same, &fx.src, &fx.tgt, ValidationMetric::Mod10k, &opts).unwrap().0, 0);
    let mut r = rng(13);
    let mut pool = vec![fx.mixing.clone(), fx.clustering.clone()];
    for _ in 0..3 {
        pool.push(MappingMatrix::new(random_orthogonal(&mut r, 8), true).unwrap());
    }
    let (a, _) = select_mapping(&pool, &fx.src, &fx.tgt, ValidationMetric::Csls10k, &opts).unwrap();
    let mut reversed = pool.clone();
    reversed.reverse();
    let (b, _) = select_mapping(&reversed, &fx.src, &fx.tgt, ValidationMetric::Csls10k, &opts).unwrap();
    assert_eq!(pool[a], reversed[b]);
    assert!(select_mapping(&[], &fx.src, &fx.tgt, ValidationMetric::Csls10k, &opts).is_err());
}

#[test]
fn metric_names_parse() {
    assert_eq!("csls10k".parse::<ValidationMetric>().unwrap(), ValidationMetric::Csls10k);
    assert_eq!("mod10k".parse::<ValidationMetric>().unwrap(), ValidationMetric::Mod10k);
    assert!(matches!("bleu".parse::<ValidationMetric>(), Err(Error::UnknownMetric(_))));
}

#[test]
fn refine_under_mod10k_picks_mixing_start() {
    let fx = selection_fixture(14, 150, 8);
    let opts = RefineOptions {
        epochs: 2,
        metric: ValidationMetric::Mod10k,
        metric_options: exact_metric_options(),
        ..RefineOptions::default()
    };
    let (_, trace) = refine(&fx.src, &fx.tgt, &fx.mixing, &opts).unwrap();
    let init = evaluate_metric(&fx.src, &fx.tgt, &fx.mixing, ValidationMetric::Mod10k, &opts.metric_options).unwrap();
    assert_eq!(trace.rows[0].score, init);
    assert!(trace.rows[trace.best_epoch].score >= init);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn procrustes_is_orthogonal_and_preserves_cosine(seed in any::<u64>(), n in 1usize..40, d in 2usize..12) {
        let mut r = rng(seed);
        let src = random_space(&mut r, "en", n, d);
        let tgt = random_space(&mut r, "xx", n, d);
        let w = fit_procrustes(&src, &tgt, &identity_lexicon(&src, "en", "xx")).unwrap();
        prop_assert!(w.orthogonality_error() <= 1e-8);
        for _ in 0..5 {
            let u = unit_vector(&mut r, d);
            let v = unit_vector(&mut r, d);
            let (uw, vw) = (w.apply_row(&u), w.apply_row(&v));
            prop_assert!((ref_cos(&uw, &vw) - ref_cos(&u, &v)).abs() <= 1e-9);
        }
    }
}
