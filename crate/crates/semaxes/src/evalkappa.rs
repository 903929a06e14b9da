//! Fleiss' kappa over multi-rater judgments and the questionnaire form used
//! to collect them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Items-by-categories count table: `counts[item][category]` raters chose
/// that category; every item was rated by the same number of raters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingTable {
    counts: Vec<Vec<usize>>,
    raters_per_item: usize,
}

impl RatingTable {
    pub fn new(counts: Vec<Vec<usize>>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidInput("need at least one item".into()));
        }
        let categories = counts[0].len();
        if categories < 2 {
            return Err(Error::InvalidInput("need at least two categories".into()));
        }
        let raters: usize = counts[0].iter().sum();
        if raters < 2 {
            return Err(Error::InvalidInput(
                "need at least two raters per item".into(),
            ));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != categories {
                return Err(Error::InvalidInput(format!(
                    "item {i} has {} categories, expected {categories}",
                    row.len()
                )));
            }
            let sum: usize = row.iter().sum();
            if sum != raters {
                return Err(Error::InvalidInput(format!(
                    "item {i} was rated {sum} times, expected {raters}"
                )));
            }
        }
        Ok(Self {
            counts,
            raters_per_item: raters,
        })
    }

    /// Builds a binary (no/yes) table from per-rater checkbox judgments,
    /// one vector of item answers per rater.
    pub fn from_binary_judgments(raters: &[Vec<bool>]) -> Result<Self> {
        if raters.len() < 2 {
            return Err(Error::InvalidInput(
                "need at least two raters per item".into(),
            ));
        }
        let items = raters[0].len();
        if raters.iter().any(|r| r.len() != items) {
            return Err(Error::InvalidInput(
                "raters answered different item counts".into(),
            ));
        }
        let counts = (0..items)
            .map(|i| {
                let yes = raters.iter().filter(|r| r[i]).count();
                vec![raters.len() - yes, yes]
            })
            .collect();
        Self::new(counts)
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    pub fn categories(&self) -> usize {
        self.counts[0].len()
    }

    pub fn raters_per_item(&self) -> usize {
        self.raters_per_item
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }
}

/// Agreement statistics; `kappa` is `None` in the degenerate case where all
/// ratings fall into a single category, which leaves chance agreement at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: Option<f64>,
    pub p_bar: f64,
    pub p_bar_e: f64,
    pub items: usize,
    pub raters_per_item: usize,
    pub categories: usize,
    pub interpretation: Option<String>,
}

/// `(p_bar - p_bar_e) / (1 - p_bar_e)`, or `None` when chance agreement is 1.
pub fn kappa_from_means(p_bar: f64, p_bar_e: f64) -> Option<f64> {
    if p_bar_e >= 1.0 {
        None
    } else {
        Some((p_bar - p_bar_e) / (1.0 - p_bar_e))
    }
}

/// The conventional agreement bands.
pub fn interpretation_band(kappa: f64) -> &'static str {
    match kappa {
        k if k < 0.0 => "poor agreement",
        k if k < 0.2 => "slight agreement",
        k if k < 0.4 => "fair agreement",
        k if k < 0.6 => "moderate agreement",
        k if k < 0.8 => "substantial agreement",
        _ => "almost perfect agreement",
    }
}

/// Standard Fleiss computation over a count table.
pub fn fleiss_kappa(table: &RatingTable) -> KappaReport {
    let n_items = table.items() as f64;
    let r = table.raters_per_item() as f64;
    let categories = table.categories();

    // per-item observed agreement
    let mut p_bar = 0.0f64;
    for row in table.counts() {
        let sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
        p_bar += (sq - r) / (r * (r - 1.0));
    }
    p_bar /= n_items;

    // chance agreement from the pooled category shares
    let mut p_bar_e = 0.0f64;
    for j in 0..categories {
        let share: f64 =
            table.counts().iter().map(|row| row[j] as f64).sum::<f64>() / (n_items * r);
        p_bar_e += share * share;
    }

    let kappa = kappa_from_means(p_bar, p_bar_e);
    KappaReport {
        kappa,
        p_bar,
        p_bar_e,
        items: table.items(),
        raters_per_item: table.raters_per_item(),
        categories,
        interpretation: kappa.map(|k| interpretation_band(k).to_owned()),
    }
}

/// Reads `item,rater,rating` CSV records (rating 0 or 1; an optional header
/// line is skipped) into a binary [`RatingTable`]. Items keep first-seen
/// order; every item must be rated exactly once by every rater.
pub fn load_ratings_csv(path: &Path) -> Result<RatingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut items: Vec<String> = Vec::new();
    let mut raters: Vec<String> = Vec::new();
    let mut votes: Vec<(usize, usize, bool)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::malformed(
                path,
                idx + 1,
                format!("expected 3 comma-separated fields, found {}", fields.len()),
            ));
        }
        let rating = match fields[2] {
            "0" => false,
            "1" => true,
            other => {
                if idx == 0 {
                    continue; // header line
                }
                return Err(Error::malformed(
                    path,
                    idx + 1,
                    format!("rating must be 0 or 1, found {other:?}"),
                ));
            }
        };
        let item = intern(&mut items, fields[0]);
        let rater = intern(&mut raters, fields[1]);
        if !seen.insert((item, rater)) {
            return Err(Error::malformed(
                path,
                idx + 1,
                format!("duplicate rating of item {:?} by {:?}", fields[0], fields[1]),
            ));
        }
        votes.push((item, rater, rating));
    }
    if items.is_empty() {
        return Err(Error::malformed(path, 1, "no ratings found"));
    }
    let mut counts = vec![vec![0usize; 2]; items.len()];
    for (item, _, rating) in votes {
        counts[item][usize::from(rating)] += 1;
    }
    let table = RatingTable::new(counts)?;
    if table.raters_per_item() != raters.len() {
        return Err(Error::InvalidInput(format!(
            "{} raters seen but items have {} ratings each",
            raters.len(),
            table.raters_per_item()
        )));
    }
    Ok(table)
}

fn intern(pool: &mut Vec<String>, value: &str) -> usize {
    if let Some(i) = pool.iter().position(|v| v == value) {
        i
    } else {
        pool.push(value.to_owned());
        pool.len() - 1
    }
}

/// One questionnaire item: each language's top words for one cross-language
/// cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    /// `(language name, top words)` in language order.
    pub entries: Vec<(String, Vec<String>)>,
}

const FORM_HEADER: &str = "Below is a list of words in several languages. If you think that the \
words of every language in an item belong to the same meaning category, check its box.\n";

/// Renders the check-the-box evaluation form, one item per cluster with each
/// language's words in a `name:['w1' 'w2' 'w3']` block.
pub fn export_questionnaire(items: &[QuestionnaireItem]) -> String {
    let mut out = String::from(FORM_HEADER);
    out.push('\n');
    for (i, item) in items.iter().enumerate() {
        let blocks: Vec<String> = item
            .entries
            .iter()
            .map(|(lang, words)| {
                let quoted: Vec<String> = words.iter().map(|w| format!("'{w}'")).collect();
                format!("{lang}:[{}]", quoted.join(" "))
            })
            .collect();
        out.push_str(&format!("[ ] {}. {}\n", i + 1, blocks.join(" ")));
    }
    out
}

/// Parses a filled form back into per-item yes/no answers: `[x]` (any case)
/// is yes, `[ ]` is no; other lines are ignored.
pub fn parse_filled_questionnaire(text: &str) -> Result<Vec<bool>> {
    let mut answers = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(end) = rest.find(']') else {
                return Err(Error::InvalidInput(format!("unterminated checkbox: {line:?}")));
            };
            let mark = rest[..end].trim();
            answers.push(match mark {
                "" => false,
                "x" | "X" => true,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unrecognized checkbox mark {other:?}"
                    )))
                }
            });
        }
    }
    Ok(answers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    #[test]
    fn perfect_agreement_is_one() {
        let table = RatingTable::new(vec![vec![4, 0], vec![0, 4], vec![4, 0]]).unwrap();
        let report = fleiss_kappa(&table);
        assert_abs_diff_eq!(report.p_bar, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(report.kappa.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reported_means_give_reported_kappa() {
        let kappa = kappa_from_means(0.702, 0.531).unwrap();
        assert_abs_diff_eq!(kappa, 0.3646, epsilon = 1e-3);
        assert_eq!(interpretation_band(kappa), "fair agreement");
    }

    #[test]
    fn small_table_matches_naive_recomputation() {
        let counts = vec![vec![2, 0], vec![1, 1], vec![0, 2]];
        let table = RatingTable::new(counts.clone()).unwrap();
        let report = fleiss_kappa(&table);

        // from-definition recomputation with explicit loops
        let n = 3.0;
        let r = 2.0;
        let mut p_bar = 0.0;
        for row in &counts {
            let mut s = 0.0;
            for &c in row {
                s += (c as f64) * (c as f64);
            }
            p_bar += (s - r) / (r * (r - 1.0));
        }
        p_bar /= n;
        let mut p_e = 0.0;
        for j in 0..2 {
            let mut share = 0.0;
            for row in &counts {
                share += row[j] as f64;
            }
            share /= n * r;
            p_e += share * share;
        }
        let kappa = (p_bar - p_e) / (1.0 - p_e);
        assert_abs_diff_eq!(report.p_bar, p_bar, epsilon = 1e-15);
        assert_abs_diff_eq!(report.p_bar_e, p_e, epsilon = 1e-15);
        assert_abs_diff_eq!(report.kappa.unwrap(), kappa, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_single_category_reported() {
        let table = RatingTable::new(vec![vec![3, 0], vec![3, 0]]).unwrap();
        let report = fleiss_kappa(&table);
        assert_eq!(report.kappa, None);
        assert_abs_diff_eq!(report.p_bar_e, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn invariant_under_item_and_category_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let items = rng.random_range(2..12);
            let raters = rng.random_range(2..6);
            let cats = rng.random_range(2..5);
            let counts: Vec<Vec<usize>> = (0..items)
                .map(|_| {
                    let mut row = vec![0usize; cats];
                    for _ in 0..raters {
                        row[rng.random_range(0..cats)] += 1;
                    }
                    row
                })
                .collect();
            let base = fleiss_kappa(&RatingTable::new(counts.clone()).unwrap());

            let mut permuted_items = counts.clone();
            permuted_items.reverse();
            let by_items = fleiss_kappa(&RatingTable::new(permuted_items).unwrap());

            let permuted_cats: Vec<Vec<usize>> = counts
                .iter()
                .map(|row| {
                    let mut r = row.clone();
                    r.rotate_left(1);
                    r
                })
                .collect();
            let by_cats = fleiss_kappa(&RatingTable::new(permuted_cats).unwrap());

            match (base.kappa, by_items.kappa, by_cats.kappa) {
                (Some(a), Some(b), Some(c)) => {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                    assert_abs_diff_eq!(a, c, epsilon = 1e-12);
                }
                (None, None, None) => {}
                other => panic!("inconsistent degenerate outcomes: {other:?}"),
            }
        }
    }

    #[test]
    fn ratings_csv_roundtrip() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "item,rater,rating\nc1,r1,1\nc1,r2,1\nc2,r1,0\nc2,r2,1\n"
        )
        .unwrap();
        let table = load_ratings_csv(f.path()).unwrap();
        assert_eq!(table.items(), 2);
        assert_eq!(table.raters_per_item(), 2);
        assert_eq!(table.counts()[0], vec![0, 2]);
        assert_eq!(table.counts()[1], vec![1, 1]);
    }

    #[test]
    fn ratings_csv_rejects_uneven_and_duplicate() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "c1,r1,1\nc1,r2,0\nc2,r1,1\n").unwrap();
        assert!(load_ratings_csv(f.path()).is_err());

        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "c1,r1,1\nc1,r1,0\nc2,r1,1\nc2,r1,0\n").unwrap();
        assert!(load_ratings_csv(f.path()).is_err());
    }

    fn demo_items() -> Vec<QuestionnaireItem> {
        vec![QuestionnaireItem {
            entries: vec![
                ("en".into(), vec!["eyes".into(), "see".into(), "rib".into()]),
                ("ja".into(), vec!["視界".into(), "網膜".into(), "凝視".into()]),
                ("zh".into(), vec!["觀看".into(), "凝視".into(), "眼".into()]),
            ],
        }]
    }

    #[test]
    fn questionnaire_layout() {
        let form = export_questionnaire(&demo_items());
        assert!(form.contains("check its box"));
        assert!(form.contains("[ ] 1. en:['eyes' 'see' 'rib'] ja:["));
        let empty = export_questionnaire(&[]);
        assert!(empty.contains("check its box"));
        assert!(!empty.contains("[ ]"));
    }

    #[test]
    fn questionnaire_roundtrip_all_checked() {
        let mut items = demo_items();
        items.push(QuestionnaireItem {
            entries: vec![("en".into(), vec!["sum".into(), "cosine".into(), "ray".into()])],
        });
        let form = export_questionnaire(&items);
        let checked = form.replace("[ ]", "[x]");
        let answers = parse_filled_questionnaire(&checked).unwrap();
        assert_eq!(answers, vec![true, true]);
        // five raters all checking everything agree unanimously
        let table =
            RatingTable::from_binary_judgments(&vec![answers; 5]).unwrap();
        let report = fleiss_kappa(&table);
        assert_abs_diff_eq!(report.p_bar, 1.0, epsilon = 1e-15);
        assert_eq!(report.kappa, None, "single category used everywhere");
    }

    #[test]
    fn questionnaire_partial_parse() {
        let answers = parse_filled_questionnaire("[x] 1. a\n[ ] 2. b\n[X] 3. c\n").unwrap();
        assert_eq!(answers, vec![true, false, true]);
        assert!(parse_filled_questionnaire("[?] 1. a\n").is_err());
    }
}
