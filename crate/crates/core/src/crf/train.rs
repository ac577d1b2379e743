use super::inference::forward_backward;
use super::lbfgs::{minimize, LbfgsConfig};
use super::{CrfError, CrfModel, EncodedSequence};
use crate::featgen::FeatureVector;

#[derive(Clone, Debug, PartialEq)]
pub struct CrfConfig {
    /// Variance of the Gaussian prior on every weight.
    pub sigma2: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub memory: usize,
}

impl Default for CrfConfig {
    fn default() -> Self {
        CrfConfig {
            sigma2: 10.0,
            max_iters: 300,
            tolerance: 1e-6,
            memory: 10,
        }
    }
}

/// One labeled training sequence.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub features: &'a FeatureVector,
    pub labels: &'a [String],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Penalized log-likelihood at the returned weights.
    pub objective: f64,
    pub history: Vec<f64>,
}

/// Unpenalized conditional log-likelihood and its gradient at the model's weights.
pub fn unpenalized_log_likelihood_and_gradient(
    model: &CrfModel,
    data: &[EncodedSequence],
) -> Result<(f64, Vec<f64>), CrfError> {
    let l_n = model.num_labels();
    let t_off = model.transition_offset();
    let s_off = model.start_offset();
    let e_off = model.stop_offset();
    let mut grad = vec![0.0; model.num_weights()];
    let mut ll = 0.0;
    for (i, seq) in data.iter().enumerate() {
        if seq.is_empty() {
            continue;
        }
        let labels = seq
            .labels
            .as_ref()
            .expect("training sequences carry labels");
        let lat = forward_backward(model, seq);
        let log_z = lat.log_z();
        let score = model.path_score(seq, labels);
        if !log_z.is_finite() || !score.is_finite() {
            return Err(CrfError::NonFinite { sequence: i });
        }
        ll += score - log_z;

        let n = seq.len();
        for t in 0..n {
            let y = labels[t];
            for &f in &seq.features[t] {
                grad[f as usize * l_n + y] += 1.0;
            }
            if t > 0 {
                grad[t_off + labels[t - 1] * l_n + y] += 1.0;
            }
        }
        grad[s_off + labels[0]] += 1.0;
        grad[e_off + labels[n - 1]] += 1.0;

        let mut m = vec![0.0; l_n];
        for t in 0..n {
            for (l, v) in m.iter_mut().enumerate() {
                *v = lat.marginal(t, l);
            }
            for &f in &seq.features[t] {
                let row = &mut grad[f as usize * l_n..(f as usize + 1) * l_n];
                row.iter_mut().zip(&m).for_each(|(g, p)| *g -= p);
            }
            if t == 0 {
                grad[s_off..s_off + l_n].iter_mut().zip(&m).for_each(|(g, p)| *g -= p);
            }
            if t == n - 1 {
                grad[e_off..e_off + l_n].iter_mut().zip(&m).for_each(|(g, p)| *g -= p);
            }
            if t > 0 {
                lat.for_each_pair_marginal(t, |k, l, p| grad[t_off + k * l_n + l] -= p);
            }
        }
    }
    Ok((ll, grad))
}

/// Penalized log-likelihood `LL(w) - |w|² / 2σ²` and its gradient.
pub fn log_likelihood_and_gradient(
    model: &CrfModel,
    data: &[EncodedSequence],
) -> Result<(f64, Vec<f64>), CrfError> {
    let (mut ll, mut grad) = unpenalized_log_likelihood_and_gradient(model, data)?;
    let s2 = model.sigma2();
    for (g, w) in grad.iter_mut().zip(model.weights()) {
        ll -= w * w / (2.0 * s2);
        *g -= w / s2;
    }
    Ok((ll, grad))
}

fn validate(data: &[Example<'_>]) -> Result<(), CrfError> {
    if data.is_empty() {
        return Err(CrfError::EmptyData);
    }
    for (i, e) in data.iter().enumerate() {
        if e.features.len() != e.labels.len() {
            return Err(CrfError::LengthMismatch {
                sequence: i,
                features: e.features.len(),
                labels: e.labels.len(),
            });
        }
    }
    Ok(())
}

/// Trains from all-zero weights.
pub fn train(data: &[Example<'_>], cfg: &CrfConfig) -> Result<(CrfModel, TrainReport), CrfError> {
    train_from(data, cfg, None)
}

/// Trains starting from `init` weights (zeros if `None`).
pub fn train_from(
    data: &[Example<'_>],
    cfg: &CrfConfig,
    init: Option<Vec<f64>>,
) -> Result<(CrfModel, TrainReport), CrfError> {
    validate(data)?;
    let (labels, features) = CrfModel::alphabets_from(data);
    let mut model = CrfModel::with_alphabets(labels, features, cfg.sigma2);
    if let Some(w) = init {
        model.set_weights(w)?;
    }
    let encoded = data
        .iter()
        .enumerate()
        .map(|(i, e)| model.encode_labeled(e.features, e.labels, i))
        .collect::<Result<Vec<_>, _>>()?;

    let lcfg = LbfgsConfig {
        memory: cfg.memory,
        max_iters: cfg.max_iters,
        tolerance: cfg.tolerance,
        ..LbfgsConfig::default()
    };
    let x0 = model.weights().to_vec();
    let mut scratch = model.clone();
    let result = minimize(
        |w: &[f64]| {
            scratch.set_weights(w.to_vec())?;
            let (v, g) = log_likelihood_and_gradient(&scratch, &encoded)?;
            Ok::<_, CrfError>((-v, g.into_iter().map(|x| -x).collect()))
        },
        x0,
        &lcfg,
    )?;
    model.set_weights(result.x)?;
    let report = TrainReport {
        iterations: result.iterations,
        evaluations: result.evaluations,
        converged: result.converged,
        objective: -result.value,
        history: result.history.into_iter().map(|v| -v).collect(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::inference::viterbi;

    fn fv(rows: &[&[&str]]) -> FeatureVector {
        FeatureVector {
            tokens: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    fn toy() -> (Vec<FeatureVector>, Vec<Vec<String>>) {
        let xs = vec![
            fv(&[&["w=the"], &["w=kidney", "suf=ey"], &["w=failure"]]),
            fv(&[&["w=a"], &["w=kidney", "suf=ey"], &["w=stone"], &["w=."]]),
            fv(&[&["w=no"], &["w=pain"]]),
            fv(&[&["w=the"], &["w=liver"], &["w=failure"]]),
        ];
        let ys = vec![
            labels(&["O", "B-D", "I-D"]),
            labels(&["O", "B-D", "I-D", "O"]),
            labels(&["O", "B-D"]),
            labels(&["O", "B-D", "I-D"]),
        ];
        (xs, ys)
    }

    fn examples<'a>(xs: &'a [FeatureVector], ys: &'a [Vec<String>]) -> Vec<Example<'a>> {
        xs.iter()
            .zip(ys)
            .map(|(f, l)| Example { features: f, labels: l })
            .collect()
    }

    fn encoded(model: &CrfModel, ex: &[Example<'_>]) -> Vec<EncodedSequence> {
        ex.iter()
            .enumerate()
            .map(|(i, e)| model.encode_labeled(e.features, e.labels, i).unwrap())
            .collect()
    }

    fn random_model(ex: &[Example<'_>], seed: u64, sigma2: f64) -> CrfModel {
        use rand::{Rng, SeedableRng};
        let (l, f) = CrfModel::alphabets_from(ex);
        let mut m = CrfModel::with_alphabets(l, f, sigma2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = (0..m.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        m.set_weights(w).unwrap();
        m
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let model = random_model(&ex, 3, 2.0);
        let data = encoded(&model, &ex);
        let (_, grad) = log_likelihood_and_gradient(&model, &data).unwrap();
        let h = 1e-5;
        for j in 0..model.num_weights() {
            let mut plus = model.clone();
            let mut w = model.weights().to_vec();
            w[j] += h;
            plus.set_weights(w.clone()).unwrap();
            let mut minus = model.clone();
            w[j] -= 2.0 * h;
            minus.set_weights(w).unwrap();
            let fp = log_likelihood_and_gradient(&plus, &data).unwrap().0;
            let fm = log_likelihood_and_gradient(&minus, &data).unwrap().0;
            let numeric = (fp - fm) / (2.0 * h);
            let err = (numeric - grad[j]).abs() / numeric.abs().max(grad[j].abs()).max(1.0);
            assert!(err < 1e-5, "weight {j}: analytic {} numeric {numeric}", grad[j]);
        }
    }

    #[test]
    fn zero_weights_give_uniform_expectations() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let (l, f) = CrfModel::alphabets_from(&ex);
        let model = CrfModel::with_alphabets(l, f, 10.0);
        let data = encoded(&model, &ex);
        let (ll, grad) = unpenalized_log_likelihood_and_gradient(&model, &data).unwrap();
        let l_n = model.num_labels() as f64;
        let expected_ll: f64 = ex.iter().map(|e| -(e.labels.len() as f64) * l_n.ln()).sum();
        assert!((ll - expected_ll).abs() < 1e-9);
        // Bias gradient = observed label counts minus n/L per sequence.
        let total: f64 = ex.iter().map(|e| e.labels.len() as f64).sum();
        for (li, lab) in model.labels().iter().enumerate() {
            let observed = ex.iter().flat_map(|e| e.labels.iter()).filter(|l| *l == lab).count() as f64;
            assert!((grad[li] - (observed - total / l_n)).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicated_data_doubles_value_and_gradient() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let model = random_model(&ex, 9, 10.0);
        let data = encoded(&model, &ex);
        let mut doubled = data.clone();
        doubled.extend(data.iter().cloned());
        let (v1, g1) = unpenalized_log_likelihood_and_gradient(&model, &data).unwrap();
        let (v2, g2) = unpenalized_log_likelihood_and_gradient(&model, &doubled).unwrap();
        assert!((v2 - 2.0 * v1).abs() < 1e-9);
        assert!(g1.iter().zip(&g2).all(|(a, b)| (2.0 * a - b).abs() < 1e-9));
    }

    #[test]
    fn training_fits_separable_data() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let (model, report) = train(&ex, &CrfConfig::default()).unwrap();
        assert!(report.converged);
        for e in &ex {
            assert_eq!(model.predict(e.features), e.labels.to_vec());
        }
        // Better than the zero start and non-decreasing along the way.
        assert!(report.objective > report.history[0]);
        assert!(report.history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn single_sequence_is_recovered() {
        let x = fv(&[&["w=warfarin"], &["w=bleeding"]]);
        let y = labels(&["B-T", "O"]);
        let ex = [Example { features: &x, labels: &y }];
        let (model, _) = train(&ex, &CrfConfig::default()).unwrap();
        assert_eq!(model.predict(&x), y);
        assert_eq!(model.labels(), &["O".to_string(), "B-T".to_string()]);
    }

    #[test]
    fn optimum_does_not_depend_on_start() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let cfg = CrfConfig { tolerance: 1e-12, max_iters: 1000, ..Default::default() };
        let (a, ra) = train(&ex, &cfg).unwrap();
        let init = random_model(&ex, 17, 10.0).weights().to_vec();
        let (b, rb) = train_from(&ex, &cfg, Some(init)).unwrap();
        assert!((ra.objective - rb.objective).abs() < 1e-6);
        let dmax = a
            .weights()
            .iter()
            .zip(b.weights())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(dmax < 1e-4, "max weight difference {dmax}");
    }

    #[test]
    fn stronger_prior_shrinks_weights() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let (loose, _) = train(&ex, &CrfConfig::default()).unwrap();
        let (tight, _) = train(&ex, &CrfConfig { sigma2: 0.01, ..Default::default() }).unwrap();
        let n = |m: &CrfModel| crate::math::norm(m.weights());
        assert!(n(&tight) < n(&loose));
    }

    #[test]
    fn unseen_features_are_ignored() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let (model, _) = train(&ex, &CrfConfig::default()).unwrap();
        let base = fv(&[&["w=the"], &["w=kidney", "suf=ey"], &["w=failure"]]);
        let noisy = fv(&[&["w=the", "zz=1"], &["w=kidney", "suf=ey", "zz=2"], &["w=failure"]]);
        assert_eq!(model.predict(&base), model.predict(&noisy));
        let (pa, sa) = viterbi(&model, &model.encode(&base));
        let (pb, sb) = viterbi(&model, &model.encode(&noisy));
        assert_eq!(pa, pb);
        assert_eq!(sa, sb);
    }

    #[test]
    fn input_errors_are_reported() {
        assert!(matches!(train(&[], &CrfConfig::default()), Err(CrfError::EmptyData)));
        let x = fv(&[&["a"], &["b"]]);
        let y = labels(&["O"]);
        let ex = [Example { features: &x, labels: &y }];
        assert!(matches!(
            train(&ex, &CrfConfig::default()),
            Err(CrfError::LengthMismatch { sequence: 0, features: 2, labels: 1 })
        ));
    }

    #[test]
    fn overflowing_weights_report_sequence() {
        let (xs, ys) = toy();
        let ex = examples(&xs, &ys);
        let mut model = random_model(&ex, 1, 10.0);
        let data = encoded(&model, &ex);
        let mut w = model.weights().to_vec();
        w[0] = f64::INFINITY;
        model.set_weights(w).unwrap();
        assert!(matches!(
            unpenalized_log_likelihood_and_gradient(&model, &data),
            Err(CrfError::NonFinite { sequence: 0 })
        ));
    }
}
