use lattice_clt::config::{preset, Normalization};
use lattice_clt::dependence::{cov_sum_abs_exact, covariances, delta_p_exact, sigma2_exact};
use lattice_clt::fields::{FieldModel, Kernel};
use lattice_clt::harness::run;
use lattice_clt::innovations::{InnovationField, InnovationSpec, LatticePoint};
use lattice_clt::output::samples_csv;
use lattice_clt::sums::{exact_variance, sample_sum};
use lattice_clt::weights::{ExplicitWeights, WeightScheme};
use proptest::prelude::*;

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn truncation_at_or_beyond_the_radius_is_bit_exact() {
    let mut base = preset("clt-kernel-2d").unwrap();
    base.reps = 500;
    let reference = run(&base).unwrap();
    for m in [1, 2, 5] {
        let mut c = base.clone();
        c.truncation = Some(m);
        let r = run(&c).unwrap();
        assert_eq!(r.samples, reference.samples, "m = {m}");
        let stats: Vec<f64> = r.tests.iter().map(|t| t.statistic).collect();
        let want: Vec<f64> = reference.tests.iter().map(|t| t.statistic).collect();
        assert_eq!(stats, want, "m = {m}");
    }
    let mut c = base.clone();
    c.truncation = Some(0);
    assert_ne!(run(&c).unwrap().samples, reference.samples);
}

#[test]
fn the_two_normalizations_differ_by_the_exact_factor() {
    let mut by_b = preset("clt-kernel-2d").unwrap();
    by_b.normalization = Normalization::ByBN;
    let mut by_sigma = by_b.clone();
    by_sigma.normalization = Normalization::BySigmaN;
    let a = run(&by_b).unwrap().samples.column(1);
    let b = run(&by_sigma).unwrap().samples.column(1);

    let model = by_b.build_model().unwrap();
    let scheme = by_b.build_scheme().unwrap();
    let sigma_n = exact_variance(&model, &scheme).unwrap().sqrt();
    let b_n = scheme.norm();
    let sigma = sigma2_exact(&model).unwrap().sqrt();

    for (x, y) in a.iter().zip(&b) {
        assert!((x * b_n - y * sigma_n).abs() <= 1e-9 * (1.0 + x.abs() * b_n));
    }
    let expected = sigma_n / (b_n * sigma);
    assert!((expected - 1.0).abs() < 0.02, "sigma_n/(b_n sigma) = {expected}");
    let empirical = sd(&a) / (sigma * sd(&b));
    assert!((empirical / expected - 1.0).abs() < 0.02, "{empirical} vs {expected}");
    assert!((sd(&a) / sigma / expected - 1.0).abs() < 0.02);
}

fn kernel_strategy() -> impl Strategy<Value = Vec<(i64, f64)>> {
    prop::collection::btree_map(-3i64..=3, -2.0f64..2.0, 1..5)
        .prop_filter("nonzero kernel", |m| m.values().any(|c| c.abs() > 1e-3))
        .prop_map(|m| m.into_iter().collect())
}

fn weights_strategy() -> impl Strategy<Value = Vec<(i64, f64)>> {
    prop::collection::vec((-6i64..=6, -1.5f64..1.5), 1..9)
}

fn model_1d(terms: &[(i64, f64)], seed: u64) -> FieldModel {
    let kernel = Kernel::new(1, terms.iter().map(|&(k, a)| (vec![k], a)).collect()).unwrap();
    FieldModel::kernel(kernel, InnovationField::new(InnovationSpec::Rademacher, 1, seed).unwrap()).unwrap()
}

fn scheme_1d(w: &[(i64, f64)]) -> WeightScheme {
    WeightScheme::Explicit(ExplicitWeights::new(1, w.iter().map(|&(j, b)| (LatticePoint::new(vec![j]), b)).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn exact_variance_matches_pairwise_covariance_sum(terms in kernel_strategy(), w in weights_strategy()) {
        let model = model_1d(&terms, 1);
        let scheme = scheme_1d(&w);
        let cov = covariances(&model).unwrap();
        let coefs = scheme.coefficients();
        let mut brute = 0.0;
        for (j, bj) in &coefs {
            for (l, bl) in &coefs {
                brute += bj * bl * cov.get(&LatticePoint::new(vec![l.0[0] - j.0[0]])).copied().unwrap_or(0.0);
            }
        }
        let v = exact_variance(&model, &scheme).unwrap();
        prop_assert!(v >= -1e-12);
        prop_assert!((v - brute).abs() <= 1e-9 * (1.0 + brute.abs()));
    }

    #[test]
    fn absolute_covariance_sum_is_bounded_by_delta_two_squared(terms in kernel_strategy()) {
        let model = model_1d(&terms, 2);
        let c = cov_sum_abs_exact(&model).unwrap();
        let d = delta_p_exact(&model, 2).unwrap().unwrap();
        prop_assert!(c <= d * d * (1.0 + 1e-12));
        prop_assert!(sigma2_exact(&model).unwrap().abs() <= c + 1e-12);
    }

    #[test]
    fn sums_are_linear_in_the_weights(terms in kernel_strategy(), a in weights_strategy(), b in weights_strategy(), seed in any::<u64>()) {
        let model = model_1d(&terms, seed);
        let joint: Vec<(i64, f64)> = a.iter().chain(&b).copied().collect();
        let sa = sample_sum(&model, &scheme_1d(&a), seed, None).unwrap();
        let sb = sample_sum(&model, &scheme_1d(&b), seed, None).unwrap();
        let sj = sample_sum(&model, &scheme_1d(&joint), seed, None).unwrap();
        prop_assert!((sa + sb - sj).abs() <= 1e-9 * (1.0 + sa.abs() + sb.abs()));
    }

    #[test]
    fn config_hash_ignores_workers_only(workers in 0usize..64, seed in any::<u64>()) {
        let base = preset("clt-iid-2d").unwrap();
        let mut c = base.clone();
        c.workers = workers;
        prop_assert_eq!(c.hash(), base.hash());
        c.seed = seed;
        prop_assert_eq!(c.hash() == base.hash(), seed == base.seed);
    }

    #[test]
    fn csv_values_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 2), 1..20)) {
        let table = lattice_clt::harness::SampleTable { columns: vec!["a".into(), "b".into()], rows: rows.clone() };
        let text = samples_csv(&table);
        let parsed: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
            .collect();
        prop_assert_eq!(parsed, rows);
    }
}
