//! Evaluation metrics: ANLS (averaged normalized Levenshtein similarity) and
//! exact-match accuracy.
//!
//! Both metrics normalize text by trimming and lowercasing, and compare at
//! Unicode-codepoint granularity. ANLS scores below the threshold τ
//! (default 0.5) are clamped to zero before averaging.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ANLS threshold.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("record has no gold answers")]
    NoGold,
    #[error("no records to evaluate")]
    EmptyEval,
}

/// Which metric drives the report mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Anls,
    Exact,
}

/// Scores for one prediction against its gold answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub prediction: String,
    pub golds: Vec<String>,
    /// Best normalized Levenshtein similarity over the golds, pre-threshold.
    pub nls_best: f64,
    /// `nls_best` if it reaches the threshold, else 0.
    pub anls_score: f64,
    pub exact: bool,
}

/// Aggregate over a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub tau: f64,
    pub mean: f64,
    pub count: usize,
    pub per_record: Vec<EvalRecord>,
}

/// Minimal insert/delete/substitute count between codepoint sequences.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

fn normalize(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Normalized Levenshtein similarity `1 − lev/max(|p|,|g|)`; 1 when both
/// sides are empty after normalization.
fn nls(prediction: &str, gold: &str) -> f64 {
    let p = normalize(prediction);
    let g = normalize(gold);
    let longest = p.chars().count().max(g.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&p, &g) as f64 / longest as f64
}

/// ANLS for one prediction: best NLS over the golds, clamped to 0 below τ.
pub fn anls(prediction: &str, golds: &[String], tau: f64) -> Result<f64, MetricsError> {
    let best = nls_best(prediction, golds)?;
    Ok(if best >= tau { best } else { 0.0 })
}

fn nls_best(prediction: &str, golds: &[String]) -> Result<f64, MetricsError> {
    if golds.is_empty() {
        return Err(MetricsError::NoGold);
    }
    Ok(golds.iter().map(|g| nls(prediction, g)).fold(0.0, f64::max))
}

/// True iff the normalized prediction equals any normalized gold.
pub fn exact_match(prediction: &str, golds: &[String]) -> Result<bool, MetricsError> {
    if golds.is_empty() {
        return Err(MetricsError::NoGold);
    }
    let p = normalize(prediction);
    Ok(golds.iter().any(|g| normalize(g) == p))
}

/// Evaluate a batch and report the mean of the chosen metric.
pub fn evaluate(
    records: &[(String, Vec<String>)],
    metric: Metric,
    tau: f64,
) -> Result<EvalReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyEval);
    }
    let mut per_record = Vec::with_capacity(records.len());
    for (prediction, golds) in records {
        let best = nls_best(prediction, golds)?;
        per_record.push(EvalRecord {
            prediction: prediction.clone(),
            golds: golds.clone(),
            nls_best: best,
            anls_score: if best >= tau { best } else { 0.0 },
            exact: exact_match(prediction, golds)?,
        });
    }
    let mean = per_record
        .iter()
        .map(|r| match metric {
            Metric::Anls => r.anls_score,
            Metric::Exact => f64::from(r.exact),
        })
        .sum::<f64>()
        / per_record.len() as f64;
    Ok(EvalReport {
        metric,
        tau,
        mean,
        count: per_record.len(),
        per_record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Recursive reference Levenshtein with memoization, kept deliberately
    /// separate from the iterative implementation above.
    fn reference_lev(a: &[char], b: &[char]) -> usize {
        fn go(
            a: &[char],
            b: &[char],
            i: usize,
            j: usize,
            memo: &mut Vec<Vec<Option<usize>>>,
        ) -> usize {
            if i == a.len() {
                return b.len() - j;
            }
            if j == b.len() {
                return a.len() - i;
            }
            if let Some(v) = memo[i][j] {
                return v;
            }
            let v = if a[i] == b[j] {
                go(a, b, i + 1, j + 1, memo)
            } else {
                1 + go(a, b, i + 1, j, memo)
                    .min(go(a, b, i, j + 1, memo))
                    .min(go(a, b, i + 1, j + 1, memo))
            };
            memo[i][j] = Some(v);
            v
        }
        let mut memo = vec![vec![None; b.len()]; a.len()];
        go(a, b, 0, 0, &mut memo)
    }

    #[test]
    fn levenshtein_hand_cases() {
        assert_eq!(levenshtein("", ""), 0);
        assert_eq!(levenshtein("hello", "hallo"), 1);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("флаг", "фраг"), 1);
    }

    #[test]
    fn anls_hand_cases() {
        assert_eq!(anls("hello", &["hello".into()], DEFAULT_TAU).unwrap(), 1.0);
        assert_eq!(anls("hello", &["hallo".into()], DEFAULT_TAU).unwrap(), 0.8);
        assert_eq!(anls("abc", &["xyz".into()], DEFAULT_TAU).unwrap(), 0.0);
    }

    #[test]
    fn anls_normalizes_and_takes_best_gold() {
        let golds = vec!["Paris".into(), "paris, france".into()];
        assert_eq!(anls("  PARIS ", &golds, DEFAULT_TAU).unwrap(), 1.0);
    }

    #[test]
    fn anls_requires_golds() {
        assert_eq!(
            anls("x", &[], DEFAULT_TAU).unwrap_err(),
            MetricsError::NoGold
        );
    }

    #[test]
    fn anls_empty_pair_is_perfect() {
        assert_eq!(anls("", &["   ".into()], DEFAULT_TAU).unwrap(), 1.0);
    }

    #[test]
    fn exact_match_cases() {
        assert!(exact_match("Paris ", &["paris".into()]).unwrap());
        assert!(!exact_match("Pari", &["paris".into()]).unwrap());
        assert!(exact_match("42", &["42".into(), "forty-two".into()]).unwrap());
    }

    #[test]
    fn evaluate_means() {
        let records = vec![
            ("hello".to_string(), vec!["hello".to_string()]),
            ("hello".to_string(), vec!["hallo".to_string()]),
        ];
        let report = evaluate(&records, Metric::Anls, DEFAULT_TAU).unwrap();
        assert!((report.mean - 0.9).abs() < 1e-12);
        assert_eq!(report.count, 2);

        let identical = vec![("a".to_string(), vec!["a".to_string()]); 4];
        let report = evaluate(&identical, Metric::Exact, DEFAULT_TAU).unwrap();
        assert_eq!(report.mean, 1.0);
    }

    #[test]
    fn evaluate_rejects_empty() {
        assert_eq!(
            evaluate(&[], Metric::Anls, DEFAULT_TAU).unwrap_err(),
            MetricsError::EmptyEval
        );
    }

    #[test]
    fn agrees_with_reference_dp_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let alphabet: Vec<char> = "abcdefg ".chars().collect();
        for _ in 0..1000 {
            let len_a = rng.random_range(0..12);
            let len_b = rng.random_range(0..12);
            let a: String = (0..len_a)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let b: String = (0..len_b)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let av: Vec<char> = a.chars().collect();
            let bv: Vec<char> = b.chars().collect();
            assert_eq!(
                levenshtein(&a, &b),
                reference_lev(&av, &bv),
                "{a:?} vs {b:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn levenshtein_symmetric(a in ".{0,20}", b in ".{0,20}") {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        }

        #[test]
        fn levenshtein_triangle_inequality(
            a in "[a-e]{0,12}",
            b in "[a-e]{0,12}",
            c in "[a-e]{0,12}",
        ) {
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn anls_bounded_and_identity(p in "[a-z ]{0,16}", g in "[a-z ]{0,16}") {
            let score = anls(&p, std::slice::from_ref(&g), DEFAULT_TAU).unwrap();
            prop_assert!((0.0..=1.0).contains(&score));
            let exact = normalize(&p) == normalize(&g);
            prop_assert_eq!(score == 1.0, exact);
        }

        #[test]
        fn raising_tau_never_raises_score(
            p in "[a-z]{0,10}",
            g in "[a-z]{0,10}",
            tau_lo in 0.0f64..=1.0,
            tau_hi in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if tau_lo <= tau_hi { (tau_lo, tau_hi) } else { (tau_hi, tau_lo) };
            let golds = vec![g];
            prop_assert!(anls(&p, &golds, hi).unwrap() <= anls(&p, &golds, lo).unwrap());
        }
    }
}
