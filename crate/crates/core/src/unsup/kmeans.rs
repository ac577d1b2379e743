use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::UnsupError;
use crate::math::squared_distance;

/// Which vector space a codebook quantizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceTag {
    Word,
    Lexical,
    Bigram,
    Sentence,
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceTag::Word => "word",
            SpaceTag::Lexical => "lexical",
            SpaceTag::Bigram => "bigram",
            SpaceTag::Sentence => "sentence",
        })
    }
}

impl FromStr for SpaceTag {
    type Err = UnsupError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(SpaceTag::Word),
            "lexical" => Ok(SpaceTag::Lexical),
            "bigram" => Ok(SpaceTag::Bigram),
            "sentence" => Ok(SpaceTag::Sentence),
            other => Err(UnsupError::UnknownSpace(other.to_string())),
        }
    }
}

/// k centroids, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    centroids: Vec<f64>,
    k: usize,
    dim: usize,
    pub space_tag: SpaceTag,
    pub seed: u64,
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>, space_tag: SpaceTag, seed: u64) -> Result<Codebook, UnsupError> {
        let k = centroids.len();
        if k == 0 {
            return Err(UnsupError::ZeroK);
        }
        let dim = centroids[0].len();
        let mut flat = Vec::with_capacity(k * dim);
        for c in centroids {
            if c.len() != dim {
                return Err(UnsupError::DimMismatch { expected: dim, got: c.len() });
            }
            flat.extend(c);
        }
        Ok(Codebook { centroids: flat, k, dim, space_tag, seed })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    /// Nearest centroid, lowest index on ties. Caller guarantees the dimension.
    fn nearest(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.k {
            let d = squared_distance(v, self.centroid(i));
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
pub fn assign_cluster(v: &[f64], cb: &Codebook) -> Result<usize, UnsupError> {
    if v.len() != cb.dim {
        return Err(UnsupError::DimMismatch { expected: cb.dim, got: v.len() });
    }
    Ok(cb.nearest(v).0)
}

/// Within-cluster sum of squares recorded after every assignment step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KmeansTrace {
    pub objectives: Vec<f64>,
    pub converged: bool,
}

pub fn kmeans(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    space_tag: SpaceTag,
) -> Result<Codebook, UnsupError> {
    kmeans_with_trace(vectors, k, seed, max_iters, space_tag).map(|(cb, _)| cb)
}

fn distinct_count(vectors: &[Vec<f64>]) -> usize {
    let mut seen = HashSet::new();
    for v in vectors {
        seen.insert(v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>());
    }
    seen.len()
}

fn plus_plus_init(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(vectors[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = vectors.iter().map(|v| squared_distance(v, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            // Rounding can leave `r` past the end; fall back to the last positive weight.
            if d2[idx] == 0.0 {
                idx = d2.iter().rposition(|&d| d > 0.0).unwrap_or(idx);
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = vectors[pick].clone();
        for (d, v) in d2.iter_mut().zip(vectors) {
            *d = d.min(squared_distance(v, &c));
        }
        centers.push(c);
    }
    centers
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint or `max_iters` assignment steps have run. An emptied cluster
/// keeps its previous centroid.
pub fn kmeans_with_trace(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    space_tag: SpaceTag,
) -> Result<(Codebook, KmeansTrace), UnsupError> {
    if k == 0 {
        return Err(UnsupError::ZeroK);
    }
    let distinct = distinct_count(vectors);
    if distinct < k {
        return Err(UnsupError::TooFewDistinct { k, distinct });
    }
    let dim = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(UnsupError::DimMismatch { expected: dim, got: bad.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cb = Codebook::new(plus_plus_init(vectors, k, &mut rng), space_tag, seed)?;
    let mut trace = KmeansTrace::default();
    let mut assignment: Vec<usize> = vec![usize::MAX; vectors.len()];

    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut objective = 0.0;
        for (a, v) in assignment.iter_mut().zip(vectors) {
            let (c, d) = cb.nearest(v);
            objective += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        trace.objectives.push(objective);
        if !changed {
            trace.converged = true;
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (&a, v) in assignment.iter().zip(vectors) {
            counts[a] += 1;
            for (s, x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(v) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    cb.centroids[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
    }
    Ok((cb, trace))
}

/// Header `k dim space_tag seed`, then one centroid per line.
pub fn write_codebook<W: Write>(cb: &Codebook, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{} {} {} {}", cb.k, cb.dim, cb.space_tag, cb.seed)?;
    for i in 0..cb.k {
        let row: Vec<String> = cb.centroid(i).iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_codebook<R: BufRead>(reader: R) -> Result<Codebook, UnsupError> {
    let bad = |line: usize, reason: &str| UnsupError::Malformed { line, reason: reason.to_string() };
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))??;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 {
        return Err(bad(1, "expected `k dim space_tag seed`"));
    }
    let k: usize = h[0].parse().map_err(|_| bad(1, "bad k"))?;
    let dim: usize = h[1].parse().map_err(|_| bad(1, "bad dim"))?;
    let space: SpaceTag = h[2].parse()?;
    let seed: u64 = h[3].parse().map_err(|_| bad(1, "bad seed"))?;
    let mut rows = Vec::with_capacity(k);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(i + 2, &e.to_string()))?;
        if row.len() != dim || row.iter().any(|x| !x.is_finite()) {
            return Err(bad(i + 2, "bad centroid row"));
        }
        rows.push(row);
    }
    if rows.len() != k {
        return Err(bad(1, &format!("header says {k} centroids, found {}", rows.len())));
    }
    Codebook::new(rows, space, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (10.0, 10.0)] {
            for _ in 0..10 {
                out.push(vec![cx + rng.random_range(-1.0..1.0), cy + rng.random_range(-1.0..1.0)]);
            }
        }
        out
    }

    fn objective(vs: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
        (0..k)
            .map(|c| {
                let members: Vec<&Vec<f64>> =
                    vs.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
                if members.is_empty() {
                    return 0.0;
                }
                let dim = members[0].len();
                let mean: Vec<f64> = (0..dim)
                    .map(|d| members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64)
                    .collect();
                members.iter().map(|m| squared_distance(m, &mean)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let vs = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![-1.0, 5.0]];
        let (cb, trace) = kmeans_with_trace(&vs, 3, 1, 50, SpaceTag::Word).unwrap();
        assert_eq!(*trace.objectives.last().unwrap(), 0.0);
        for v in &vs {
            let c = assign_cluster(v, &cb).unwrap();
            assert_eq!(cb.centroid(c), v.as_slice());
        }
    }

    #[test]
    fn separates_two_blobs() {
        let vs = blobs(4);
        let cb = kmeans(&vs, 2, 9, 100, SpaceTag::Word).unwrap();
        let labels: Vec<usize> = vs.iter().map(|v| assign_cluster(v, &cb).unwrap()).collect();
        assert!(labels[..10].iter().all(|&l| l == labels[0]));
        assert!(labels[10..].iter().all(|&l| l == labels[10]));
        assert_ne!(labels[0], labels[10]);
        // Exhaustive check: the blob partition beats every other 2-partition.
        let best = objective(&vs, &labels, 2);
        for mask in 1u32..(1 << 20) - 1 {
            let alt: Vec<usize> = (0..20).map(|i| ((mask >> i) & 1) as usize).collect();
            assert!(objective(&vs, &alt, 2) >= best - 1e-9);
        }
    }

    #[test]
    fn too_few_distinct_vectors() {
        let vs = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            kmeans(&vs, 3, 1, 10, SpaceTag::Word),
            Err(UnsupError::TooFewDistinct { k: 3, distinct: 2 })
        ));
    }

    #[test]
    fn assignment_ties_and_mismatch() {
        let cb = Codebook::new(
            vec![vec![5.0, 5.0], vec![1.0, 0.0], vec![9.0, 9.0], vec![7.0, 7.0], vec![-1.0, 0.0]],
            SpaceTag::Word,
            0,
        )
        .unwrap();
        assert_eq!(assign_cluster(&[7.0, 7.0], &cb).unwrap(), 3);
        assert_eq!(assign_cluster(&[0.0, 0.0], &cb).unwrap(), 1);
        assert!(matches!(assign_cluster(&[0.0], &cb), Err(UnsupError::DimMismatch { .. })));
    }

    #[test]
    fn codebook_text_round_trip() {
        let cb = kmeans(&blobs(2), 2, 3, 20, SpaceTag::Bigram).unwrap();
        let mut buf = Vec::new();
        write_codebook(&cb, &mut buf).unwrap();
        assert_eq!(read_codebook(buf.as_slice()).unwrap(), cb);
        assert!(read_codebook("2 2 word 1\n0 0\n".as_bytes()).is_err());
        assert!(read_codebook("1 2 planet 1\n0 0\n".as_bytes()).is_err());
    }
}
