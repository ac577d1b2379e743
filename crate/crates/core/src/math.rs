//! Small dense-vector helpers shared by the numeric modules.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `a` to unit length in place. A zero vector stays zero.
pub fn normalize_in_place(a: &mut [f64]) {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    normalize_in_place(&mut v);
    v
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cosine similarity; zero when either side is the zero vector. A vector
/// compared with itself gives exactly 1, since `sqrt(fl(d·d)) = d`.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (aa, bb) = (dot(a, a), dot(b, b));
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    let p = aa * bb;
    let denom = if p.is_normal() { p.sqrt() } else { aa.sqrt() * bb.sqrt() };
    (dot(a, b) / denom).clamp(-1.0, 1.0)
}

/// `ln(sum(exp(xs)))`, stable for large magnitudes. Empty input yields -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// FNV-1a over bytes. Used where a hash must be stable across runs and platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
