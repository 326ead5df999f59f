use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{bleu, cider, corpus_bleu, meteor_lite, rouge_l, BertTokens, CaptionPair, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Meteor,
    Rouge,
    Cider,
    Bertscore,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Bleu,
        Metric::Meteor,
        Metric::Rouge,
        Metric::Cider,
        Metric::Bertscore,
    ];
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bleu" => Ok(Metric::Bleu),
            "meteor" => Ok(Metric::Meteor),
            "rouge" | "rouge-l" | "rouge_l" => Ok(Metric::Rouge),
            "cider" => Ok(Metric::Cider),
            "bertscore" => Ok(Metric::Bertscore),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Report keys, in table column order, paired with their table headers.
pub const COLUMNS: [(&str, &str); 8] = [
    ("BLEU-1", "B@1"),
    ("BLEU-2", "B@2"),
    ("BLEU-3", "B@3"),
    ("BLEU-4", "B@4"),
    ("METEOR", "METEOR"),
    ("ROUGE-L", "ROUGE"),
    ("CIDEr", "CIDEr"),
    ("BERTScore", "BERTScore"),
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    /// Scores per item, in input order.
    pub per_item: IndexMap<String, BTreeMap<String, f64>>,
    pub corpus: BTreeMap<String, f64>,
}

/// Scores every pair with the requested metrics.
///
/// Corpus values are per-item means, except BLEU, which sums clipped counts
/// and lengths over the corpus before combining. BERTScore needs `bert`.
pub fn evaluate_captions(
    pairs: &[CaptionPair],
    metrics: &[Metric],
    bert: Option<&BertTokens>,
) -> Result<MetricReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let wants = |m: Metric| metrics.contains(&m);
    let mut report = MetricReport::default();
    for pair in pairs {
        pair.tokens()?;
        report.per_item.insert(pair.item_id.clone(), BTreeMap::new());
    }
    let mut set = |id: &str, key: &str, value: f64| {
        report
            .per_item
            .get_mut(id)
            .expect("item registered")
            .insert(key.to_string(), value);
    };

    if wants(Metric::Bleu) {
        for pair in pairs {
            let s = bleu(pair, 4)?;
            for k in 1..=4 {
                set(&pair.item_id, &format!("BLEU-{k}"), s.bleu(k));
            }
        }
    }
    if wants(Metric::Meteor) {
        for pair in pairs {
            set(&pair.item_id, "METEOR", meteor_lite(pair)?);
        }
    }
    if wants(Metric::Rouge) {
        for pair in pairs {
            set(&pair.item_id, "ROUGE-L", rouge_l(pair)?);
        }
    }
    if wants(Metric::Cider) {
        for item in cider(pairs)?.items {
            set(&item.item_id, "CIDEr", item.score);
        }
    }
    if wants(Metric::Bertscore) {
        let tokens = bert.ok_or(MetricError::EmptyInput)?;
        for pair in pairs {
            let s = tokens.score(&pair.item_id)?;
            set(&pair.item_id, "BERTScore", s.f1);
            set(&pair.item_id, "BERTScore-P", s.precision);
            set(&pair.item_id, "BERTScore-R", s.recall);
        }
    }

    let n = pairs.len() as f64;
    let keys: Vec<String> = report.per_item[0].keys().cloned().collect();
    for key in keys {
        let mean = report.per_item.values().map(|m| m[&key]).sum::<f64>() / n;
        report.corpus.insert(key, mean);
    }
    if wants(Metric::Bleu) {
        let corpus = corpus_bleu(pairs, 4)?;
        for k in 1..=4 {
            report.corpus.insert(format!("BLEU-{k}"), corpus.bleu(k));
        }
    }
    Ok(report)
}

pub fn parse_caption_pairs(text: &str) -> Result<Vec<CaptionPair>, MetricError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| MetricError::MalformedLine(i + 1, e.to_string())))
        .collect()
}

/// Reads `{"id", "candidate", "references"}` objects, one per line.
pub fn load_caption_pairs(path: impl AsRef<Path>) -> Result<Vec<CaptionPair>, MetricError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MetricError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_caption_pairs(&text)
}

fn cell(report: &MetricReport, key: &str) -> String {
    report
        .corpus
        .get(key)
        .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// Corpus scores as a markdown table with the standard captioning columns.
pub fn render_markdown(report: &MetricReport, run: &str) -> String {
    let mut out = String::from("| Run |");
    for (_, header) in COLUMNS {
        let _ = write!(out, " {header} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(COLUMNS.len()));
    let _ = write!(out, "\n| {run} |");
    for (key, _) in COLUMNS {
        let _ = write!(out, " {} |", cell(report, key));
    }
    out.push('\n');
    out
}

pub fn render_csv(report: &MetricReport, run: &str) -> String {
    let header: Vec<&str> = std::iter::once("run").chain(COLUMNS.iter().map(|(_, h)| *h)).collect();
    let row: Vec<String> = std::iter::once(run.to_string())
        .chain(COLUMNS.iter().map(|(k, _)| cell(report, k)))
        .collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> Vec<CaptionPair> {
        vec![
            CaptionPair::new("1", "a woman holds a red fan", &["a woman holds a red fan"]),
            CaptionPair::new("2", "two boats on a calm river", &["two boats on a calm river"]),
            CaptionPair::new(
                "3",
                "an old man reads by candle light",
                &["an old man reads by candle light"],
            ),
        ]
    }

    #[test]
    fn perfect_corpus() {
        let r = evaluate_captions(&pairs(), &[Metric::Bleu, Metric::Rouge, Metric::Cider], None).unwrap();
        for key in ["BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L"] {
            assert!((r.corpus[key] - 1.0).abs() < 1e-12, "{key}");
        }
        assert_eq!(r.per_item.len(), 3);
    }

    #[test]
    fn single_pair_corpus_equals_item() {
        let p = vec![CaptionPair::new("x", "a man on a horse", &["a horse and a man"])];
        let r = evaluate_captions(&p, &[Metric::Rouge, Metric::Meteor], None).unwrap();
        assert_eq!(r.corpus["ROUGE-L"], r.per_item["x"]["ROUGE-L"]);
        assert_eq!(r.corpus["METEOR"], r.per_item["x"]["METEOR"]);
    }

    #[test]
    fn errors_carry_item_id() {
        let mut p = pairs();
        p.push(CaptionPair::new("bad", "!!", &["x"]));
        assert!(matches!(
            evaluate_captions(&p, &[Metric::Rouge], None),
            Err(MetricError::EmptyCandidate(id)) if id == "bad"
        ));
        assert!(matches!(
            evaluate_captions(&[], &[Metric::Rouge], None),
            Err(MetricError::EmptyCorpus)
        ));
        assert!(evaluate_captions(&pairs(), &[Metric::Bertscore], None).is_err());
    }

    #[test]
    fn markdown_columns() {
        let r = evaluate_captions(&pairs(), &Metric::ALL[..4], None).unwrap();
        let md = render_markdown(&r, "test");
        let header = md.lines().next().unwrap();
        assert_eq!(
            header,
            "| Run | B@1 | B@2 | B@3 | B@4 | METEOR | ROUGE | CIDEr | BERTScore |"
        );
        assert!(md.lines().nth(2).unwrap().ends_with("| n/a |"));
        let csv = render_csv(&r, "test");
        assert!(csv.starts_with("run,B@1,B@2,B@3,B@4,METEOR,ROUGE,CIDEr,BERTScore\n"));
    }

    #[test]
    fn parses_input_lines() {
        let text = "{\"id\":\"1\",\"candidate\":\"a b\",\"references\":[\"a b\",\"c\"]}\n\n";
        let p = parse_caption_pairs(text).unwrap();
        assert_eq!(p[0].references.len(), 2);
        assert!(matches!(
            parse_caption_pairs("{\"id\":1}"),
            Err(MetricError::MalformedLine(1, _))
        ));
    }

    #[test]
    fn metric_names() {
        assert_eq!("ROUGE-L".parse::<Metric>().unwrap(), Metric::Rouge);
        assert!("spice".parse::<Metric>().is_err());
    }
}
