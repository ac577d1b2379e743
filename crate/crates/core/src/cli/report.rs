//! Tables and figures over a set of run manifests.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::svg::{Mark, Plot, Series};
use super::{CliError, Manifest};
use crate::strategies::Strategy;

/// Rejects manifest sets evaluated on different test corpora.
pub fn check_same_test(manifests: &[(String, Manifest)]) -> Result<(), CliError> {
    let mut seen: Option<(&str, &str)> = None;
    for (name, m) in manifests {
        let Some(h) = m.test_hash() else { continue };
        match seen {
            None => seen = Some((name, h)),
            Some((first, h0)) if h0 != h => {
                return Err(CliError::data(format!(
                    "{name} was evaluated on a different test corpus than {first}"
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// `letters,precision,recall,f1` for every manifest with a supervised score.
pub fn supervised_table(manifests: &[(String, Manifest)]) -> String {
    let mut rows: BTreeMap<&str, String> = BTreeMap::new();
    for (_, m) in manifests {
        if let Some(p) = &m.supervised {
            rows.insert(&m.letters, format!("{},{:.6},{:.6},{:.6}", m.letters, p.precision, p.recall, p.f1));
        }
    }
    let mut out = String::from("letters,precision,recall,f1\n");
    for r in rows.values() {
        let _ = writeln!(out, "{r}");
    }
    out
}

/// One row per feature set, `<strategy>_sar/_tar/_car` columns per strategy
/// present, as whole percentages. Missing combinations are left empty.
pub fn rates_table(manifests: &[(String, Manifest)]) -> String {
    let mut cells: BTreeMap<&str, BTreeMap<Strategy, [f64; 3]>> = BTreeMap::new();
    for (_, m) in manifests {
        let (Some(r), Some(s)) = (&m.rates, m.strategy.as_deref().and_then(|s| s.parse::<Strategy>().ok())) else {
            continue;
        };
        cells.entry(&m.letters).or_default().insert(s, [r.sar, r.tar, r.car]);
    }
    let strategies: Vec<Strategy> = Strategy::ALL
        .iter()
        .copied()
        .filter(|s| cells.values().any(|row| row.contains_key(s)))
        .collect();
    let mut out = String::from("letters");
    for s in &strategies {
        let _ = write!(out, ",{0}_sar,{0}_tar,{0}_car", s.name());
    }
    out.push('\n');
    for (letters, row) in &cells {
        out.push_str(letters);
        for s in &strategies {
            match row.get(s) {
                Some(v) => {
                    for x in v {
                        let _ = write!(out, ",{}", x.round() as i64);
                    }
                }
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

fn label(m: &Manifest) -> String {
    match &m.strategy {
        Some(s) => format!("{} {}", m.letters, s.to_uppercase()),
        None => m.letters.clone(),
    }
}

/// Target F1 against the concept annotation rate needed to reach it.
pub fn f1_vs_car_svg(manifests: &[(String, Manifest)]) -> String {
    let series: Vec<Series> = manifests
        .iter()
        .filter_map(|(_, m)| {
            let r = m.rates.as_ref()?;
            Some(Series {
                name: label(m),
                points: vec![(r.car, r.target_f1)],
            })
        })
        .collect();
    Plot {
        title: "Target F1 vs. concept annotation rate",
        x_label: "CAR (%)",
        y_label: "F1",
        series: &series,
        mark: Mark::Points,
    }
    .render()
}

/// Test F1 after every iteration against the share of sequences labeled.
pub fn learning_curves_svg(manifests: &[(String, Manifest)]) -> String {
    let series: Vec<Series> = manifests
        .iter()
        .filter(|(_, m)| !m.history.is_empty())
        .map(|(_, m)| Series {
            name: label(m),
            points: m.history.iter().map(|r| (r.sar, r.f1)).collect(),
        })
        .collect();
    Plot {
        title: "Learning curves",
        x_label: "SAR (%)",
        y_label: "F1",
        series: &series,
        mark: Mark::Lines,
    }
    .render()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloop::AnnotationRates;
    use crate::eval::Prf;

    fn al(letters: &str, strategy: &str, sar: f64, test: &str) -> (String, Manifest) {
        let mut m = Manifest::new("al");
        m.letters = letters.into();
        m.strategy = Some(strategy.into());
        m.inputs.insert("test".into(), test.into());
        m.rates = Some(AnnotationRates {
            sar,
            tar: sar + 1.0,
            car: sar + 2.0,
            reached: true,
            target_f1: 0.8,
            iteration: Some(3),
        });
        (format!("{letters}-{strategy}"), m)
    }

    #[test]
    fn rates_table_pivots_strategies() {
        let ms = vec![al("ABC", "lc", 24.4, "h"), al("ABC", "rs", 80.0, "h"), al("ABCD", "lc", 10.6, "h")];
        assert_eq!(
            rates_table(&ms),
            "letters,rs_sar,rs_tar,rs_car,lc_sar,lc_tar,lc_car\nABC,80,81,82,24,25,26\nABCD,,,,11,12,13\n"
        );
    }

    #[test]
    fn mixed_test_sets_are_rejected() {
        let ms = vec![al("ABC", "lc", 1.0, "h1"), al("ABC", "rs", 1.0, "h2")];
        assert!(matches!(check_same_test(&ms), Err(CliError::Data(_))));
        assert!(check_same_test(&ms[..1]).is_ok());
    }

    #[test]
    fn supervised_rows() {
        let mut m = Manifest::new("supervised");
        m.letters = "AB".into();
        m.supervised = Some(Prf::from_counts(1, 1, 1));
        let t = supervised_table(&[("m".into(), m)]);
        assert_eq!(t, "letters,precision,recall,f1\nAB,0.500000,0.500000,0.500000\n");
    }
}
