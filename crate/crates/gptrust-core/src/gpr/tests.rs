use super::fit::{fit, FitOptions, NoisePolicy};
use super::*;
use crate::linalg::{chol_jittered, DEFAULT_BASE_JITTER};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rbf(var: f64, len: f64) -> KernelSpec {
    KernelSpec::Rbf { var, len }
}

/// Draws one sample path of the zero-mean prior (plus observation noise)
/// at the given inputs.
fn sample_gp(kernel: &KernelSpec, noise_var: f64, xs: &[Vec<f64>], seed: u64) -> Vec<f64> {
    let mut gram = kernel.gram(xs).expect("valid inputs");
    for i in 0..xs.len() {
        gram[(i, i)] += noise_var;
    }
    let chol = chol_jittered(&gram, DEFAULT_BASE_JITTER).expect("sampleable covariance");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_iterator(
        xs.len(),
        (0..xs.len()).map(|_| StandardNormal.sample(&mut rng)),
    );
    (chol.lower() * z).iter().copied().collect()
}

#[test]
fn empty_model_predicts_the_prior() {
    let model = condition(rbf(1.0, 1.0), 0.25, &Dataset::new(vec![], vec![]).expect("empty ok"))
        .expect("conditioning on nothing");
    let p = model.predict_one(&[0.7]).expect("prior prediction");
    assert_eq!(p.mean, 0.0);
    assert_eq!(p.latent_var, 1.0);
    assert_eq!(p.obs_var, 1.25);
}

#[test]
fn single_point_posterior_matches_hand_algebra() {
    // One observation y = 2 at x = 0 with unit RBF and noise 0.5: the
    // covariance matrix is the scalar 1.5, so alpha = 2 / 1.5 and the mean
    // at x = 1 is exp(-0.5) * 2 / 1.5.
    let model = condition(
        rbf(1.0, 1.0),
        0.5,
        &Dataset::from_1d(&[0.0], &[2.0]).expect("finite"),
    )
    .expect("conditioning succeeds");
    let p = model.predict_one(&[1.0]).expect("prediction");
    let k = (-0.5f64).exp();
    assert!((p.mean - k * 2.0 / 1.5).abs() < 1e-15);
    assert!((p.latent_var - (1.0 - k * k / 1.5)).abs() < 1e-15);
    assert!((p.obs_var - (p.latent_var + 0.5)).abs() < 1e-16);
}

#[test]
fn log_marginal_likelihood_matches_hand_values() {
    // One noiseless point with k(0,0) = 1: the covariance is the scalar 1,
    // so the likelihood reduces to -y^2/2 - ln(2 pi)/2.
    let half_ln_2pi = 0.9189385332046727;
    let data0 = Dataset::from_1d(&[0.0], &[0.0]).expect("finite");
    let (v0, _) = log_marginal_likelihood(&rbf(1.0, 1.0), 0.0, &data0).expect("lml");
    assert!((v0 - (-half_ln_2pi)).abs() < 1e-15);
    let data1 = Dataset::from_1d(&[0.0], &[1.0]).expect("finite");
    let (v1, _) = log_marginal_likelihood(&rbf(1.0, 1.0), 0.0, &data1).expect("lml");
    assert!((v1 - (-0.5 - half_ln_2pi)).abs() < 1e-15);
}

#[test]
fn fit_matches_or_beats_the_generating_parameters() {
    let true_kernel = rbf(1.0, 0.3);
    let true_noise = 0.01;
    let mut r = ChaCha8Rng::seed_from_u64(42);
    let xs: Vec<Vec<f64>> = (0..60).map(|_| vec![r.gen_range(0.0..3.0)]).collect();
    let mut successes = 0;
    for seed in 0..10u64 {
        let ys = sample_gp(&true_kernel, true_noise, &xs, 100 + seed);
        let data = Dataset::new(xs.clone(), ys).expect("finite");
        let opts = FitOptions {
            restarts: 2,
            max_iters: 120,
            grad_tol: 1e-4,
            seed,
            normalize: false,
            noise: NoisePolicy::Learn { init: None },
        };
        // Start from the wrong length scale on purpose.
        let model = fit(&data, &rbf(1.0, 1.0), &opts).expect("fit succeeds");
        let (fitted, _) =
            log_marginal_likelihood(model.kernel(), model.noise_var(), &data).expect("lml");
        let (truth, _) = log_marginal_likelihood(&true_kernel, true_noise, &data).expect("lml");
        if fitted >= truth - 0.7 {
            successes += 1;
        }
    }
    assert!(
        successes >= 8,
        "only {successes}/10 fits reached the generating parameters' likelihood"
    );
}

#[test]
fn fit_is_bitwise_deterministic() {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin() + 0.3 * x).collect();
    let data = Dataset::from_1d(&xs, &ys).expect("finite");
    let opts = FitOptions {
        restarts: 3,
        max_iters: 80,
        ..FitOptions::default()
    };
    let a = fit(&data, &rbf(1.0, 1.0), &opts).expect("fit succeeds");
    let b = fit(&data, &rbf(1.0, 1.0), &opts).expect("fit succeeds");
    assert_eq!(a.kernel().to_string(), b.kernel().to_string());
    assert_eq!(a.noise_var(), b.noise_var());
    for q in [0.05, 1.7, 3.3, 5.0] {
        let pa = a.predict_one(&[q]).expect("prediction");
        let pb = b.predict_one(&[q]).expect("prediction");
        assert_eq!(pa.mean, pb.mean);
        assert_eq!(pa.latent_var, pb.latent_var);
        assert_eq!(pa.obs_var, pb.obs_var);
    }
}

#[test]
fn fit_never_finishes_below_its_starting_value() {
    let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
    let data = Dataset::from_1d(&xs, &ys).expect("finite");
    let template = rbf(1.0, 0.5);
    let opts = FitOptions {
        restarts: 1,
        max_iters: 60,
        normalize: false,
        ..FitOptions::default()
    };
    let model = fit(&data, &template, &opts).expect("fit succeeds");
    let n = data.len() as f64;
    let mean_y = data.outputs().iter().sum::<f64>() / n;
    let var_y =
        (data.outputs().iter().map(|y| (y - mean_y).powi(2)).sum::<f64>() / n).max(1e-12);
    let (start, _) =
        log_marginal_likelihood(&template, 0.01 * var_y, &data).expect("lml at start");
    let (end, _) =
        log_marginal_likelihood(model.kernel(), model.noise_var(), &data).expect("lml at end");
    assert!(
        end + 1e-9 >= start,
        "fit went downhill: start {start}, end {end}"
    );
}

#[test]
fn doubling_outputs_doubles_means_and_keeps_variances() {
    let xs: Vec<f64> = (0..25).map(|i| i as f64 * 0.25).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (1.3 * x).sin() + 0.1).collect();
    let doubled: Vec<f64> = ys.iter().map(|y| 2.0 * y).collect();
    let kernel = rbf(0.8, 0.6);
    let a = condition(kernel.clone(), 0.05, &Dataset::from_1d(&xs, &ys).expect("finite"))
        .expect("conditioning succeeds");
    let b = condition(kernel, 0.05, &Dataset::from_1d(&xs, &doubled).expect("finite"))
        .expect("conditioning succeeds");
    for q in [0.1, 1.1, 2.2, 3.3, 7.0] {
        let pa = a.predict_one(&[q]).expect("prediction");
        let pb = b.predict_one(&[q]).expect("prediction");
        assert!(
            (pb.mean - 2.0 * pa.mean).abs() <= 1e-12 * pa.mean.abs().max(1.0),
            "mean did not scale linearly at {q}"
        );
        assert_eq!(pa.latent_var, pb.latent_var);
        assert_eq!(pa.obs_var, pb.obs_var);
    }
}

#[test]
fn models_roundtrip_through_json_bitwise() {
    let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 100.0 + 10.0 * x.sin()).collect();
    let data = Dataset::from_1d(&xs, &ys).expect("finite");
    let opts = FitOptions {
        restarts: 2,
        max_iters: 60,
        ..FitOptions::default()
    };
    let model = fit(&data, &rbf(1.0, 1.0), &opts).expect("fit succeeds");
    let revived = GprModel::from_json(&model.to_json()).expect("round-trip");
    assert_eq!(model.kernel().to_string(), revived.kernel().to_string());
    assert_eq!(model.noise_var(), revived.noise_var());
    assert_eq!(model.normalization(), revived.normalization());
    for q in [0.0, 1.5, 4.2, 9.0] {
        let pa = model.predict_one(&[q]).expect("prediction");
        let pb = revived.predict_one(&[q]).expect("prediction");
        assert_eq!(pa.mean, pb.mean);
        assert_eq!(pa.latent_var, pb.latent_var);
        assert_eq!(pa.obs_var, pb.obs_var);
        let ka = crate::knowledge::knowledge_score(&model, &[q]).expect("score");
        let kb = crate::knowledge::knowledge_score(&revived, &[q]).expect("score");
        assert_eq!(ka.value, kb.value);
    }
}

#[test]
fn unknown_model_format_is_rejected() {
    let model = condition(
        rbf(1.0, 1.0),
        0.1,
        &Dataset::from_1d(&[0.0, 1.0], &[0.5, -0.5]).expect("finite"),
    )
    .expect("conditioning succeeds");
    let text = model.to_json().replace("gptrust-model/1", "gptrust-model/999");
    assert!(matches!(
        GprModel::from_json(&text),
        Err(GprError::Persistence(_))
    ));
}

#[test]
fn rejected_inputs_give_typed_errors() {
    let ok = Dataset::from_1d(&[0.0, 1.0], &[1.0, 2.0]).expect("finite");
    assert!(matches!(
        condition(rbf(1.0, 1.0), -0.1, &ok),
        Err(GprError::BadNoise(_))
    ));
    assert!(matches!(
        Dataset::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.0, 1.0]),
        Err(GprError::MixedDimensions { .. })
    ));
    assert!(matches!(
        Dataset::new(vec![vec![f64::NAN]], vec![0.0]),
        Err(GprError::NonFinite { .. })
    ));
    assert!(matches!(
        Dataset::new(vec![vec![0.0]], vec![f64::INFINITY]),
        Err(GprError::NonFinite { .. })
    ));
    assert!(matches!(
        Dataset::new(vec![vec![0.0]], vec![1.0, 2.0]),
        Err(GprError::LengthMismatch { .. })
    ));
    let single = Dataset::from_1d(&[0.0], &[1.0]).expect("finite");
    assert!(matches!(
        fit(&single, &rbf(1.0, 1.0), &FitOptions::default()),
        Err(GprError::TooFewPoints { .. })
    ));
    let model = condition(rbf(1.0, 1.0), 0.1, &ok).expect("conditioning succeeds");
    assert!(matches!(
        model.predict_one(&[0.0, 1.0]),
        Err(GprError::QueryDimension { .. })
    ));
}

#[test]
fn duplicate_inputs_with_zero_noise_mention_the_cause() {
    let dup = Dataset::from_1d(&[1.0, 1.0], &[0.5, 0.5]).expect("finite");
    match condition(rbf(1.0, 1.0), 0.0, &dup) {
        // The jitter ladder may still rescue the factorization; if it does
        // the model must carry a nonzero jitter record instead.
        Ok(m) => assert!(m.conditioning_jitter() > 0.0),
        Err(e) => {
            let msg = e.to_string();
            assert!(
                msg.contains("duplicate training inputs"),
                "unhelpful diagnostic: {msg}"
            );
        }
    }
}

#[test]
fn normalized_fit_predicts_in_original_units() {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.15).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 250.0 + 40.0 * x.sin()).collect();
    let data = Dataset::from_1d(&xs, &ys).expect("finite");
    let opts = FitOptions {
        restarts: 2,
        max_iters: 100,
        ..FitOptions::default()
    };
    let model = fit(&data, &rbf(1.0, 1.0), &opts).expect("fit succeeds");
    let norm = model.normalization().expect("normalization recorded");
    assert!((norm.mean - 250.0).abs() < 15.0);
    assert!((norm.scale - 40.0 / 2.0f64.sqrt()).abs() < 10.0);
    // Interpolated predictions come back on the data's own scale.
    let p = model.predict_one(&[3.025]).expect("prediction");
    let truth = 250.0 + 40.0 * 3.025f64.sin();
    assert!(
        (p.mean - truth).abs() < 5.0,
        "prediction {} far from {truth}",
        p.mean
    );
    assert_eq!(
        model.noise_var_output_units(),
        model.noise_var() * norm.scale.powi(2)
    );
}

#[test]
fn normalization_composes_and_inverts() {
    let ys = [10.0, 12.0, 14.0, 16.0];
    let data = Dataset::from_1d(&[0.0, 1.0, 2.0, 3.0], &ys).expect("finite");
    let normed = data.normalized();
    let record = normed.normalization().expect("record present");
    let mean: f64 = normed.outputs().iter().sum::<f64>() / 4.0;
    let var: f64 = normed.outputs().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 4.0;
    assert!(mean.abs() < 1e-14);
    assert!((var - 1.0).abs() < 1e-12);
    for (orig, stored) in ys.iter().zip(normed.outputs()) {
        assert!((record.mean + record.scale * stored - orig).abs() < 1e-12);
    }
    // Normalizing twice keeps the record pointing back at the originals.
    let twice = normed.normalized();
    let record2 = twice.normalization().expect("record present");
    for (orig, stored) in ys.iter().zip(twice.outputs()) {
        assert!((record2.mean + record2.scale * stored - orig).abs() < 1e-12);
    }
}
