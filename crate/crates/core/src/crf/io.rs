use std::io::{BufRead, Write};

use super::{CrfError, CrfModel};

pub const MODEL_MAGIC: &str = "activecrf-model v1";

/// Writes a model as line-oriented text. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_model<W: Write>(model: &CrfModel, mut out: W) -> Result<(), CrfError> {
    writeln!(out, "{MODEL_MAGIC}")?;
    writeln!(out, "sigma2 {}", model.sigma2())?;
    writeln!(out, "labels {}", model.num_labels())?;
    for l in model.labels() {
        writeln!(out, "{l}")?;
    }
    // The bias is implicit and not written.
    writeln!(out, "features {}", model.num_features() - 1)?;
    for f in &model.features()[1..] {
        writeln!(out, "{f}")?;
    }
    writeln!(out, "weights {}", model.num_weights())?;
    for w in model.weights() {
        writeln!(out, "{w}")?;
    }
    out.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::iter::Enumerate<std::io::Lines<R>>,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self, what: &str) -> Result<(usize, String), CrfError> {
        match self.inner.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(CrfError::Malformed {
                line: 0,
                reason: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn header<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CrfError> {
        let (line, text) = self.next(key)?;
        text.split_once(' ')
            .filter(|(k, _)| *k == key)
            .and_then(|(_, v)| v.trim().parse().ok())
            .ok_or_else(|| CrfError::Malformed {
                line,
                reason: format!("expected `{key} <value>`"),
            })
    }

    fn block(&mut self, n: usize, what: &str) -> Result<Vec<String>, CrfError> {
        (0..n).map(|_| self.next(what).map(|(_, l)| l)).collect()
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<CrfModel, CrfError> {
    let mut lines = Lines {
        inner: input.lines().enumerate(),
    };
    let (line, magic) = lines.next("header")?;
    if magic.trim_end() != MODEL_MAGIC {
        return Err(CrfError::Malformed {
            line,
            reason: format!("expected `{MODEL_MAGIC}`"),
        });
    }
    let sigma2: f64 = lines.header("sigma2")?;
    let n_labels: usize = lines.header("labels")?;
    let labels = lines.block(n_labels, "label")?;
    let n_features: usize = lines.header("features")?;
    let features = lines.block(n_features, "feature")?;
    let n_weights: usize = lines.header("weights")?;
    let mut weights = Vec::with_capacity(n_weights);
    for _ in 0..n_weights {
        let (line, text) = lines.next("weight")?;
        weights.push(text.trim().parse::<f64>().map_err(|_| CrfError::Malformed {
            line,
            reason: "invalid weight".into(),
        })?);
    }
    let mut model = CrfModel::with_alphabets(labels, features, sigma2);
    model.set_weights(weights)?;
    Ok(model)
}
