use nalgebra::Cholesky;

use super::*;
use crate::closure::{CrossFixedBlock, FixedKind, MarginClosureSpec, SubprocessCorr};
use crate::linalg::is_positive_definite;
use crate::margins::std_normal_ln_pdf;
use crate::var::{implied_autocov, standard_normals, VarRepresentation};

const R1: [f64; 3] = [1.0, -0.8, 0.6];
const R2: [f64; 3] = [1.0, 0.6, 0.5];

fn scalar(x: f64) -> Matrix {
    Matrix::from_element(1, 1, x)
}

fn families(codes: &[usize]) -> Vec<MarginFamily> {
    codes
        .iter()
        .map(|&p| if p == 2 { MarginFamily::Gaussian } else { MarginFamily::SkewT })
        .collect()
}

fn two_univariate(r1: &[f64], r2: &[f64], labels: [u8; 2], fixed: f64) -> MarginClosureSpec {
    let labels = ConditionLabels::from_digits(&labels).unwrap();
    let kind = FixedKind::for_labels(labels.get(0), labels.get(1));
    MarginClosureSpec::new(
        Partition::singletons(2),
        labels,
        vec![SubprocessCorr::univariate(r1).unwrap(), SubprocessCorr::univariate(r2).unwrap()],
        vec![CrossFixedBlock::new((0, 1), kind, scalar(fixed)).unwrap()],
    )
    .unwrap()
}

fn std_margins(d: usize) -> Vec<MarginSpec> {
    vec![MarginSpec::gaussian(0.0, 1.0).unwrap(); d]
}

fn tight() -> FitOptions {
    let mut o = FitOptions::default();
    o.optimizer.ftol = 1e-15;
    o.optimizer.xtol = 1e-11;
    o
}

#[test]
fn table_six_parameter_counts() {
    let partition = Partition::singletons(3);
    let labels = ConditionLabels::from_digits(&[1, 1, 1]).unwrap();
    let restricted = [16, 19, 22, 25, 28];
    let unrestricted = [22, 31, 40, 49, 58];
    for k in 1..=5 {
        let c = ModelConfig::new(partition.clone(), labels.clone(), k, families(&[4, 2, 4])).unwrap();
        assert_eq!(count_params(&c, true), restricted[k - 1]);
        assert_eq!(count_params(&c, false), unrestricted[k - 1]);
    }
    let c = ModelConfig::new(partition, labels, 0, families(&[4, 2, 4])).unwrap();
    assert_eq!(count_params(&c, true), 13);
    assert_eq!(count_params(&c, false), 13);
}

#[test]
fn decomposition_identity_for_independent_singletons() {
    let spec = two_univariate(&R1, &R2, [1, 1], 0.0);
    let model = spec.build().unwrap();
    let margins = vec![
        MarginSpec::skew_t(0.2, 1.5, 3.0, 5.0).unwrap(),
        MarginSpec::gaussian(-1.0, 0.5).unwrap(),
    ];
    let x = simulate_observed(&model.var, &margins, 50, 11).unwrap();
    let full = loglik_full(&x, &margins, &model.r_time_major, 2).unwrap().value;
    let subs: f64 = (0..2)
        .map(|i| {
            let r = spec.subprocesses[i].correlation_matrix();
            loglik_sub(&x, &margins, &[i], &r, 2).unwrap().value
        })
        .sum();
    assert!((full - subs).abs() < 1e-9, "{full} vs {subs}");
}

#[test]
fn affine_map_leaves_likelihood_unchanged_up_to_jacobian() {
    let model = two_univariate(&R1, &R2, [2, 2], 0.35).build().unwrap();
    let margins = vec![
        MarginSpec::skew_t(0.0, 1.0, 2.5, 4.0).unwrap(),
        MarginSpec::gaussian(0.0, 1.0).unwrap(),
    ];
    let x = simulate_observed(&model.var, &margins, 40, 5).unwrap();
    let (shift, scale) = (3.0, 2.5);
    let mut y = x.clone();
    y.row_mut(0).iter_mut().for_each(|v| *v = shift + scale * *v);
    let mapped = vec![MarginSpec::skew_t(shift, scale, 2.5, 4.0).unwrap(), margins[1]];
    let lx = loglik_full(&x, &margins, &model.r_time_major, 2).unwrap().value;
    let ly = loglik_full(&y, &mapped, &model.r_time_major, 2).unwrap().value;
    // The density of the mapped data carries the Jacobian 1/scale per observation.
    assert!((lx - (ly + 40.0 * scale.ln())).abs() < 1e-6);
    let zx = Latent::new(&x, &margins).unwrap();
    let zy = Latent::new(&y, &mapped).unwrap();
    let cx = copula_loglik(&zx.z, &model.r_time_major, 2).unwrap();
    let cy = copula_loglik(&zy.z, &model.r_time_major, 2).unwrap();
    assert!((cx - cy).abs() < 1e-6);
}

/// Joint log-density of the whole sample from one `(T d)`-dimensional
/// Gaussian with covariance from the VAR's implied autocovariances.
fn brute_force_loglik(x: &Matrix, margins: &[MarginSpec], var: &VarRepresentation) -> f64 {
    let (d, len) = x.shape();
    let acov = implied_autocov(var, len - 1).unwrap();
    let big = acov.time_major(len).unwrap();
    let latent = Latent::new(x, margins).unwrap();
    // time_major stacks (Z_t, Z_{t-1}, …), so the newest slice comes first.
    let v = Matrix::from_fn(len * d, 1, |r, _| latent.z[(r % d, len - 1 - r / d)]);
    let chol = Cholesky::new(big).unwrap();
    let y = chol.l().solve_lower_triangular(&v).unwrap();
    let logdet: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
    let n = (len * d) as f64;
    let gauss = -0.5 * y.norm_squared() - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    let normals: f64 = latent.z.iter().map(|&z| std_normal_ln_pdf(z)).sum();
    latent.margin_loglik + gauss - normals
}

#[test]
fn likelihood_matches_full_sample_density() {
    for (labels, k, len, seed) in [([2u8, 2u8], 2usize, 8usize, 1u64), ([1, 2], 2, 7, 2), ([1, 1], 1, 6, 3)] {
        let (r1, r2) = if k == 2 { (R1.to_vec(), R2.to_vec()) } else { (vec![1.0, 0.5], vec![1.0, -0.3]) };
        let model = two_univariate(&r1, &r2, labels, 0.25).build().unwrap();
        let margins = vec![
            MarginSpec::skew_t(0.5, 2.0, 3.0, 1.5).unwrap(),
            MarginSpec::gaussian(1.0, 3.0).unwrap(),
        ];
        let x = simulate_observed(&model.var, &margins, len, seed).unwrap();
        let ours = loglik_full(&x, &margins, &model.r_time_major, k).unwrap().value;
        let oracle = brute_force_loglik(&x, &margins, &model.var);
        assert!((ours - oracle).abs() < 1e-8, "{ours} vs {oracle}");
    }
}

fn ar1_var(rho: f64, d: usize) -> VarRepresentation {
    VarRepresentation::new(
        vec![Matrix::identity(d, d) * rho],
        Matrix::identity(d, d) * (1.0 - rho * rho),
    )
    .unwrap()
}

#[test]
fn stage2_recovers_ar1() {
    let z = crate::var::simulate(&ar1_var(0.7, 1), 2000, 8).unwrap();
    let fit = fit_stage2(&z, 1, &FitOptions::default()).unwrap();
    assert!((fit.corr.blocks()[1][(0, 0)] - 0.7).abs() < 0.05);
}

#[test]
fn stage2_white_noise_is_null() {
    let len = 2000;
    let z = standard_normals(1, len, 4);
    let fit = fit_stage2(&z, 3, &FitOptions::default()).unwrap();
    let bound = 2.0 / (len as f64).sqrt();
    assert!(fit.corr.blocks()[1..].iter().all(|b| b[(0, 0)].abs() < bound));
}

fn bivariate_sub() -> SubprocessCorr {
    SubprocessCorr::new(vec![
        Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]),
        Matrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.4]),
    ])
    .unwrap()
}

#[test]
fn stage2_recovers_bivariate_structure() {
    let truth = bivariate_sub();
    let spec = MarginClosureSpec::new(
        Partition::new(vec![vec![0, 1]], 2).unwrap(),
        ConditionLabels::from_digits(&[1]).unwrap(),
        vec![truth.clone()],
        vec![],
    )
    .unwrap();
    let z = crate::var::simulate(&spec.build().unwrap().var, 5000, 21).unwrap();
    let fit = fit_stage2(&z, 1, &FitOptions::default()).unwrap();
    let err = fit
        .corr
        .blocks()
        .iter()
        .zip(truth.blocks())
        .map(|(a, b)| (a - b).abs().max())
        .fold(0.0, f64::max);
    assert!(err < 0.05, "max error {err}");
}

fn gaussian_config(labels: [u8; 2], k: usize) -> ModelConfig {
    ModelConfig::new(
        Partition::singletons(2),
        ConditionLabels::from_digits(&labels).unwrap(),
        k,
        vec![MarginFamily::Gaussian; 2],
    )
    .unwrap()
}

#[test]
fn stage3_recovers_fixed_cross_correlation() {
    let model = two_univariate(&R1, &R2, [2, 2], 0.35).build().unwrap();
    let margins = vec![MarginSpec::gaussian(1.0, 2.0).unwrap(), MarginSpec::gaussian(-1.0, 0.5).unwrap()];
    let x = simulate_observed(&model.var, &margins, 5000, 17).unwrap();
    let fit = fit_model(&x, &gaussian_config([2, 2], 2), &FitOptions::default()).unwrap();
    let est = fit.model.spec.fixed[0].value[(0, 0)];
    assert!((est - 0.35).abs() < 0.05, "estimate {est}");
    assert!(is_positive_definite(&fit.model.r_time_major, 0.0).unwrap());
}

#[test]
fn stage3_independent_subprocesses_give_null_estimate() {
    let len = 3000;
    let model = two_univariate(&R1, &R2, [1, 1], 0.0).build().unwrap();
    let z = crate::var::simulate(&model.var, len, 9).unwrap();
    let config = gaussian_config([1, 1], 2);
    let opts = FitOptions::default();
    let subs: Vec<_> = (0..2)
        .map(|i| fit_stage2(&z.rows(i, 1).into_owned(), 2, &opts).unwrap().corr)
        .collect();
    let fit = fit_stage3(&config, &z, &subs, &opts).unwrap();
    assert!(fit.spec.fixed[0].value[(0, 0)].abs() < 2.0 / (len as f64).sqrt());
}

#[test]
fn stage3_is_invariant_to_order_within_a_subprocess() {
    let truth = MarginClosureSpec::new(
        Partition::new(vec![vec![0, 1], vec![2]], 3).unwrap(),
        ConditionLabels::from_digits(&[1, 1]).unwrap(),
        vec![bivariate_sub(), SubprocessCorr::univariate(&[1.0, 0.6]).unwrap()],
        vec![CrossFixedBlock::new((0, 1), FixedKind::Contemporaneous, Matrix::from_column_slice(2, 1, &[0.2, 0.1])).unwrap()],
    )
    .unwrap();
    let z = crate::var::simulate(&truth.build().unwrap().var, 800, 13).unwrap();
    let config = ModelConfig::new(truth.partition.clone(), truth.labels.clone(), 1, vec![MarginFamily::Gaussian; 3]).unwrap();
    let opts = tight();
    let subs = vec![
        fit_stage2(&z.rows(0, 2).into_owned(), 1, &opts).unwrap().corr,
        fit_stage2(&z.rows(2, 1).into_owned(), 1, &opts).unwrap().corr,
    ];
    let fit = fit_stage3(&config, &z, &subs, &opts).unwrap();

    let perm = [1usize, 0, 2];
    let zp = Matrix::from_fn(3, z.ncols(), |r, t| z[(perm[r], t)]);
    let swap = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let sub0 = SubprocessCorr::new(subs[0].blocks().iter().map(|b| &swap * b * &swap).collect()).unwrap();
    let fit_p = fit_stage3(&config, &zp, &[sub0, subs[1].clone()], &opts).unwrap();
    assert!(
        (fit.copula_loglik - fit_p.copula_loglik).abs() < 1e-8,
        "{} vs {}",
        fit.copula_loglik,
        fit_p.copula_loglik
    );
    let v = &fit.spec.fixed[0].value;
    let vp = &fit_p.spec.fixed[0].value;
    assert!((v[(0, 0)] - vp[(1, 0)]).abs() < 1e-5 && (v[(1, 0)] - vp[(0, 0)]).abs() < 1e-5);
}

#[test]
fn stage4_never_decreases_and_stops_at_optimum() {
    let model = two_univariate(&R1, &R2, [2, 2], 0.35).build().unwrap();
    let config = gaussian_config([2, 2], 2);
    let opts = tight();
    for seed in 0..3 {
        let z = crate::var::simulate(&model.var, 1000, 100 + seed).unwrap();
        let subs: Vec<_> = (0..2)
            .map(|i| fit_stage2(&z.rows(i, 1).into_owned(), 2, &opts).unwrap().corr)
            .collect();
        let s3 = fit_stage3(&config, &z, &subs, &opts).unwrap();
        let s4 = fit_stage4(&config, &z, &s3, &opts).unwrap();
        assert!(s4.copula_loglik >= s3.copula_loglik);
        assert!(is_positive_definite(&s4.r_time_major, 0.0).unwrap());
        let again = fit_stage4(&config, &z, &s4, &opts).unwrap();
        assert!(again.copula_loglik >= s4.copula_loglik);
        assert!((&again.r_time_major - &s4.r_time_major).abs().max() <= 1e-6);
    }
}

/// Asymptotic Kolmogorov–Smirnov p-value of a uniform sample.
fn ks_uniform_p(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|j| {
            let j = j as f64;
            2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn portmanteau_null_p_values_are_uniform() {
    let p: Vec<f64> = (0..200)
        .map(|s| portmanteau(&standard_normals(2, 2000, 1000 + s), 10, 0).unwrap().p_value)
        .collect();
    assert!(ks_uniform_p(p) > 0.01);
}

#[test]
fn portmanteau_detects_autocorrelation() {
    let var = ar1_var(0.8, 2);
    let rejections = (0..100)
        .filter(|&s| {
            let e = crate::var::simulate(&var, 500, 2000 + s).unwrap();
            portmanteau(&e, 10, 1).unwrap().p_value < 0.05
        })
        .count();
    assert!(rejections >= 99);
}

#[test]
fn portmanteau_accepts_correct_unrestricted_fit() {
    let model = two_univariate(&R1, &R2, [2, 2], 0.35).build().unwrap();
    let margins = std_margins(2);
    let config = ModelConfig::unrestricted(2, vec![MarginFamily::Gaussian; 2]).unwrap();
    let accepted = (0..20)
        .filter(|&s| {
            let x = simulate_observed(&model.var, &margins, 1000, 3000 + s).unwrap();
            let fit = fit_model(&x, &config, &FitOptions::default()).unwrap();
            let res = fit.latent_residuals(&x).unwrap();
            portmanteau(&res, 10, 2).unwrap().p_value >= 0.05
        })
        .count();
    assert!(accepted >= 18, "accepted {accepted} of 20");
}

#[test]
fn fitted_model_statistics_are_consistent() {
    let model = two_univariate(&R1, &R2, [1, 2], 0.3).build().unwrap();
    let margins = std_margins(2);
    let x = simulate_observed(&model.var, &margins, 600, 77).unwrap();
    let config = gaussian_config([1, 2], 2);
    let fit = fit_model(&x, &config, &FitOptions::default()).unwrap();
    assert_eq!(fit.param_count, count_params(&config, true));
    assert!((fit.aic - (2.0 * fit.param_count as f64 - 2.0 * fit.loglik)).abs() < 1e-9);
    let direct = loglik_full(&x, &fit.margins, &fit.model.r_time_major, 2).unwrap().value;
    assert!((direct - fit.loglik).abs() < 1e-9);
}

#[test]
fn unrestricted_fit_dominates_restricted() {
    let model = two_univariate(&R1, &R2, [2, 2], 0.35).build().unwrap();
    let x = simulate_observed(&model.var, &std_margins(2), 800, 31).unwrap();
    let restricted = fit_model(&x, &gaussian_config([2, 2], 2), &FitOptions::default()).unwrap();
    let full_cfg = ModelConfig::unrestricted(2, vec![MarginFamily::Gaussian; 2]).unwrap();
    let full = fit_model(&x, &full_cfg, &FitOptions::default()).unwrap();
    assert_eq!(full.param_count, count_params(&gaussian_config([2, 2], 2), false));
    assert!(full.loglik >= restricted.loglik - 1e-6);
}

