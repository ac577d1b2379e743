use super::{CrfModel, EncodedSequence};
use crate::math::log_sum_exp;

/// Forward-backward tables of one sequence, all in log space.
///
/// Per-position recursions factor `exp(trans)` out once per lattice, so each
/// position costs `O(L)` exponentials instead of `O(L²)`.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub n: usize,
    pub num_labels: usize,
    /// `n × L` emission scores.
    pub emissions: Vec<f64>,
    /// `L × L` transition scores, `from * L + to`.
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_z_alpha: f64,
    pub log_z_beta: f64,
    exp_trans: Vec<f64>,
    trans_max: f64,
}

impl Lattice {
    pub fn log_z(&self) -> f64 {
        self.log_z_alpha
    }

    /// `P(y_t = l | x)`.
    pub fn marginal(&self, t: usize, l: usize) -> f64 {
        let i = t * self.num_labels + l;
        (self.alpha[i] + self.beta[i] - self.log_z_alpha).exp()
    }

    pub fn marginals(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|t| (0..self.num_labels).map(|l| self.marginal(t, l)).collect())
            .collect()
    }

    /// Calls `f(k, l, P(y_{t-1}=k, y_t=l | x))` for every label pair at `t ≥ 1`.
    pub fn for_each_pair_marginal(&self, t: usize, mut f: impl FnMut(usize, usize, f64)) {
        let l_n = self.num_labels;
        let prev = &self.alpha[(t - 1) * l_n..t * l_n];
        let ma = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let right: Vec<f64> = (0..l_n)
            .map(|l| self.emissions[t * l_n + l] + self.beta[t * l_n + l])
            .collect();
        let mb = right.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = (ma + mb + self.trans_max - self.log_z_alpha).exp();
        let a: Vec<f64> = prev.iter().map(|x| (x - ma).exp()).collect();
        let b: Vec<f64> = right.iter().map(|x| (x - mb).exp()).collect();
        for k in 0..l_n {
            for l in 0..l_n {
                f(k, l, a[k] * self.exp_trans[k * l_n + l] * b[l] * scale);
            }
        }
    }
}

/// `ln Σ_k exp(v_k + trans[k][col])` via the factored exponentials, falling
/// back to a direct log-sum-exp if the factored sum under- or overflows.
fn combine(
    v: &[f64],
    exp_trans: &[f64],
    trans: &[f64],
    trans_max: f64,
    l_n: usize,
    index: impl Fn(usize) -> usize,
) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = (0..l_n).map(|k| (v[k] - m).exp() * exp_trans[index(k)]).sum();
    if sum > 0.0 && sum.is_finite() {
        m + trans_max + sum.ln()
    } else {
        let terms: Vec<f64> = (0..l_n).map(|k| v[k] + trans[index(k)]).collect();
        log_sum_exp(&terms)
    }
}

pub fn forward_backward(model: &CrfModel, seq: &EncodedSequence) -> Lattice {
    let l_n = model.num_labels();
    let n = seq.len();
    let w = model.weights();

    let mut emissions = vec![0.0; n * l_n];
    for (t, feats) in seq.features.iter().enumerate() {
        let row = &mut emissions[t * l_n..(t + 1) * l_n];
        for &f in feats {
            let base = f as usize * l_n;
            for (e, wv) in row.iter_mut().zip(&w[base..base + l_n]) {
                *e += wv;
            }
        }
    }
    let t0 = model.transition_offset();
    let transitions = w[t0..t0 + l_n * l_n].to_vec();
    let start = w[model.start_offset()..model.start_offset() + l_n].to_vec();
    let stop = w[model.stop_offset()..model.stop_offset() + l_n].to_vec();
    let trans_max = transitions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let trans_max = if trans_max.is_finite() { trans_max } else { 0.0 };
    let exp_trans: Vec<f64> = transitions.iter().map(|x| (x - trans_max).exp()).collect();

    let mut alpha = vec![0.0; n * l_n];
    let mut beta = vec![0.0; n * l_n];
    if n == 0 {
        let stop_start: Vec<f64> = (0..l_n).map(|l| start[l] + stop[l]).collect();
        let z = log_sum_exp(&stop_start);
        return Lattice {
            n,
            num_labels: l_n,
            emissions,
            transitions,
            start,
            stop,
            alpha,
            beta,
            log_z_alpha: z,
            log_z_beta: z,
            exp_trans,
            trans_max,
        };
    }

    for l in 0..l_n {
        alpha[l] = start[l] + emissions[l];
    }
    for t in 1..n {
        let (done, rest) = alpha.split_at_mut(t * l_n);
        let prev = &done[(t - 1) * l_n..];
        for l in 0..l_n {
            rest[l] = emissions[t * l_n + l]
                + combine(prev, &exp_trans, &transitions, trans_max, l_n, |k| k * l_n + l);
        }
    }
    beta[(n - 1) * l_n..].copy_from_slice(&stop);
    let mut right = vec![0.0; l_n];
    for t in (0..n - 1).rev() {
        for l in 0..l_n {
            right[l] = emissions[(t + 1) * l_n + l] + beta[(t + 1) * l_n + l];
        }
        for k in 0..l_n {
            beta[t * l_n + k] =
                combine(&right, &exp_trans, &transitions, trans_max, l_n, |l| k * l_n + l);
        }
    }

    let end: Vec<f64> = (0..l_n).map(|l| alpha[(n - 1) * l_n + l] + stop[l]).collect();
    let begin: Vec<f64> = (0..l_n).map(|l| start[l] + emissions[l] + beta[l]).collect();
    Lattice {
        n,
        num_labels: l_n,
        emissions,
        transitions,
        start,
        stop,
        alpha,
        beta,
        log_z_alpha: log_sum_exp(&end),
        log_z_beta: log_sum_exp(&begin),
        exp_trans,
        trans_max,
    }
}

/// Best label path and its unnormalized log score. Backpointers prefer the
/// lower label index on ties, as does the final argmax.
pub fn viterbi(model: &CrfModel, seq: &EncodedSequence) -> (Vec<usize>, f64) {
    let l_n = model.num_labels();
    let n = seq.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let emit = |t: usize, l: usize| -> f64 {
        seq.features[t].iter().map(|&f| model.emission_weight(f, l)).sum()
    };
    let mut delta: Vec<f64> = (0..l_n).map(|l| model.start_weight(l) + emit(0, l)).collect();
    let mut back = vec![0usize; n * l_n];
    for t in 1..n {
        let mut next = vec![0.0; l_n];
        for l in 0..l_n {
            let mut best = (0, f64::NEG_INFINITY);
            for (k, d) in delta.iter().enumerate() {
                let s = d + model.transition_weight(k, l);
                if s > best.1 {
                    best = (k, s);
                }
            }
            back[t * l_n + l] = best.0;
            next[l] = best.1 + emit(t, l);
        }
        delta = next;
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (l, d) in delta.iter().enumerate() {
        let s = d + model.stop_weight(l);
        if s > best.1 {
            best = (l, s);
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = best.0;
    for t in (1..n).rev() {
        path[t - 1] = back[t * l_n + path[t]];
    }
    (path, best.1)
}

/// `P(y* | x)` for the Viterbi path `y*`.
pub fn sequence_confidence(model: &CrfModel, seq: &EncodedSequence) -> f64 {
    let (_, score) = viterbi(model, seq);
    let lattice = forward_backward(model, seq);
    (score - lattice.log_z()).exp().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, l: usize, f: usize, scale: f64) -> (CrfModel, EncodedSequence) {
        let labels = (0..l).map(|i| format!("L{i}")).collect();
        let feats = (0..f).map(|i| format!("f{i}")).collect();
        let mut m = CrfModel::with_alphabets(labels, feats, 10.0);
        let w = (0..m.num_weights()).map(|_| rng.random_range(-scale..scale)).collect();
        m.set_weights(w).unwrap();
        let seq = EncodedSequence {
            features: (0..n)
                .map(|_| {
                    let mut v = vec![0u32];
                    v.extend((1..=f as u32).filter(|_| rng.random_bool(0.5)));
                    v
                })
                .collect(),
            labels: None,
        };
        (m, seq)
    }

    fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
        (0..l.pow(n as u32))
            .map(|mut code| {
                let mut p = vec![0; n];
                for t in (0..n).rev() {
                    p[t] = code % l;
                    code /= l;
                }
                p
            })
            .collect()
    }

    #[test]
    fn single_token_marginals_are_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (m, seq) = random_instance(&mut rng, 1, 3, 2, 1.0);
        let lat = forward_backward(&m, &seq);
        let scores: Vec<f64> = (0..3).map(|l| m.path_score(&seq, &[l])).collect();
        let z = log_sum_exp(&scores);
        for l in 0..3 {
            assert!((lat.marginal(0, l) - (scores[l] - z).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (m, seq) = random_instance(&mut rng, 3, 3, 4, 1.5);
        let lat = forward_backward(&m, &seq);
        let paths = all_paths(3, 3);
        assert_eq!(paths.len(), 27);
        let scores: Vec<f64> = paths.iter().map(|p| m.path_score(&seq, p)).collect();
        let z = log_sum_exp(&scores);
        assert!((lat.log_z() - z).abs() < 1e-10);
        assert!((lat.log_z_alpha - lat.log_z_beta).abs() < 1e-10);
        for t in 0..3 {
            for l in 0..3 {
                let brute: f64 = paths
                    .iter()
                    .zip(&scores)
                    .filter(|(p, _)| p[t] == l)
                    .map(|(_, s)| (s - z).exp())
                    .sum();
                assert!((lat.marginal(t, l) - brute).abs() < 1e-10);
            }
        }
        for t in 1..3 {
            lat.for_each_pair_marginal(t, |k, l, p| {
                let brute: f64 = paths
                    .iter()
                    .zip(&scores)
                    .filter(|(path, _)| path[t - 1] == k && path[t] == l)
                    .map(|(_, s)| (s - z).exp())
                    .sum();
                assert!((p - brute).abs() < 1e-10);
            });
        }
    }

    #[test]
    fn viterbi_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..=5);
            let l = rng.random_range(2..=4);
            let (m, seq) = random_instance(&mut rng, n, l, 3, 2.0);
            let (path, score) = viterbi(&m, &seq);
            let mut best = (Vec::new(), f64::NEG_INFINITY);
            for p in all_paths(n, l) {
                let s = m.path_score(&seq, &p);
                if s > best.1 {
                    best = (p, s);
                }
            }
            assert_eq!(path, best.0);
            assert!((score - best.1).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_weights_tie_to_first_label_path() {
        let m = CrfModel::with_alphabets(vec!["O".into(), "B-x".into()], vec![], 10.0);
        let seq = EncodedSequence { features: vec![vec![0]; 2], labels: None };
        assert_eq!(viterbi(&m, &seq).0, vec![0, 0]);
        assert!((sequence_confidence(&m, &seq) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn forced_emissions_decode_exactly() {
        let mut m = CrfModel::with_alphabets(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x0".into(), "x1".into(), "x2".into()],
            10.0,
        );
        let mut w = vec![0.0; m.num_weights()];
        // Feature i+1 strongly prefers label (i*2) % 3.
        for i in 0..3u32 {
            w[(i as usize + 1) * 3 + (i as usize * 2) % 3] = 10.0;
        }
        m.set_weights(w).unwrap();
        let seq = EncodedSequence { features: vec![vec![0, 1], vec![0, 2], vec![0, 3]], labels: None };
        assert_eq!(viterbi(&m, &seq).0, vec![0, 2, 1]);
    }

    #[test]
    fn dominant_path_gives_confidence_near_one() {
        let mut m = CrfModel::with_alphabets(vec!["a".into(), "b".into()], vec!["x".into()], 10.0);
        let mut w = vec![0.0; m.num_weights()];
        w[2 + 1] = 40.0;
        m.set_weights(w).unwrap();
        let seq = EncodedSequence { features: vec![vec![0, 1]; 3], labels: None };
        assert!(sequence_confidence(&m, &seq) > 1.0 - 1e-12);
    }
}
