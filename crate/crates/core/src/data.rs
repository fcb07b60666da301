//! Cohort preparation: manifest ingestion, multi-image exclusion, binary
//! rebalancing and stratified train/val/test splitting.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 4] = ["study_id", "image_path", "label", "images_in_study"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Negative,
    Typical,
    Indeterminate,
    Atypical,
}

impl Label {
    pub const ALL: [Label; 4] = [
        Label::Negative,
        Label::Typical,
        Label::Indeterminate,
        Label::Atypical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "Negative for Pneumonia",
            Label::Typical => "Typical Appearance",
            Label::Indeterminate => "Indeterminate Appearance",
            Label::Atypical => "Atypical Appearance",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn binary(self) -> BinaryLabel {
        if self == Label::Negative {
            BinaryLabel::Negative
        } else {
            BinaryLabel::Positive
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown label '{s}'")))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryLabel {
    Negative,
    Positive,
}

/// Binary (negative vs. any pneumonia appearance) or 4-class labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Multiclass,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Multiclass => 4,
        }
    }

    pub fn class_of(self, label: Label) -> usize {
        match self {
            Task::Binary => label.binary() as usize,
            Task::Multiclass => label.index(),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::validation(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub study_id: String,
    pub image_path: String,
    pub label: Label,
    pub images_in_study: u32,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path)?;
    parse_manifest(file, path)
}

/// Parses manifest CSV; `origin` is used only in error messages.
pub fn parse_manifest<R: Read>(reader: R, origin: &Path) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .quoting(false)
        .flexible(true)
        .from_reader(reader);
    let parse_err = |line: u64, reason: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        reason,
    };
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(parse_err(
            1,
            format!("expected header '{}'", MANIFEST_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 fields, found {}", row.len()),
            ));
        }
        let label = row[2].parse::<Label>().map_err(|_| {
            Error::validation(format!(
                "{}:{line}: unknown label '{}'",
                origin.display(),
                &row[2]
            ))
        })?;
        let images_in_study: u32 = row[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("invalid images_in_study '{}'", &row[3])))?;
        if images_in_study == 0 {
            return Err(parse_err(line, "images_in_study must be at least 1".into()));
        }
        if row[0].is_empty() {
            return Err(parse_err(line, "empty study_id".into()));
        }
        out.push(ManifestEntry {
            study_id: row[0].to_string(),
            image_path: row[1].to_string(),
            label,
            images_in_study,
        });
    }
    Ok(out)
}

pub fn write_manifest<W: Write>(writer: W, entries: &[ManifestEntry]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(writer);
    wtr.write_record(MANIFEST_HEADER)?;
    for e in entries {
        wtr.write_record([
            e.study_id.as_str(),
            e.image_path.as_str(),
            e.label.as_str(),
            &e.images_in_study.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Keeps only single-image studies, preserving order.
pub fn exclude_multi_image_studies(entries: &[ManifestEntry]) -> Vec<ManifestEntry> {
    entries
        .iter()
        .filter(|e| e.images_in_study == 1)
        .cloned()
        .collect()
}

/// Keeps every negative and an equal-size uniform sample of positives.
///
/// When positives are fewer than negatives, all positives are kept and the
/// negatives are subsampled to match. Output lists negatives then
/// positives, each in input order.
pub fn balance_binary(
    entries: &[ManifestEntry],
    seed: u64,
) -> Result<Vec<(ManifestEntry, BinaryLabel)>> {
    let (neg, pos): (Vec<&ManifestEntry>, Vec<&ManifestEntry>) = entries
        .iter()
        .partition(|e| e.label.binary() == BinaryLabel::Negative);
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::validation(format!(
            "binary balancing needs both classes, found {} negative and {} positive",
            neg.len(),
            pos.len()
        )));
    }
    let n = neg.len().min(pos.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |side: &[&ManifestEntry]| -> Vec<ManifestEntry> {
        if side.len() == n {
            return side.iter().map(|&e| e.clone()).collect();
        }
        let mut idx = index::sample(&mut rng, side.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| side[i].clone()).collect()
    };
    let neg = pick(&neg);
    let pos = pick(&pos);
    Ok(neg
        .into_iter()
        .map(|e| (e, BinaryLabel::Negative))
        .chain(pos.into_iter().map(|e| (e, BinaryLabel::Positive)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.2,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|x| *x <= 0.0 || !x.is_finite()) {
            return Err(Error::validation(format!(
                "split ratios must be positive, got {r:?}"
            )));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Largest-remainder allocation of `n` items; remainder ties favour
    /// train, then val, then test.
    pub fn allocate(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train, self.val, self.test].map(|r| r * n as f64);
        let mut counts = quotas.map(|q| (q + 1e-9).floor() as usize);
        let fracs: Vec<f64> = quotas
            .iter()
            .zip(&counts)
            .map(|(q, &c)| (q - c as f64).max(0.0))
            .collect();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            if (fracs[a] - fracs[b]).abs() < 1e-9 {
                a.cmp(&b)
            } else {
                fracs[b].total_cmp(&fracs[a])
            }
        });
        let mut remaining = n - counts.iter().sum::<usize>();
        for &k in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[k] += 1;
            remaining -= 1;
        }
        counts
    }
}

/// Index partition produced by [`stratified_indices`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratifies by `keys`: each class (in key order) is shuffled with one
/// seeded generator and cut into contiguous train/val/test slices.
pub fn stratified_indices<K: Ord + Copy>(
    keys: &[K],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<SplitIndices> {
    ratios.validate()?;
    let mut classes: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, &k) in keys.iter().enumerate() {
        classes.entry(k).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitIndices::default();
    for members in classes.values_mut() {
        members.shuffle(&mut rng);
        let [a, b, _] = ratios.allocate(members.len());
        out.train.extend_from_slice(&members[..a]);
        out.val.extend_from_slice(&members[a..a + b]);
        out.test.extend_from_slice(&members[a + b..]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub train: Vec<ManifestEntry>,
    pub val: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    pub seed: u64,
}

/// Stratified split keyed on the 4-class label.
pub fn stratified_split(
    entries: &[ManifestEntry],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<SplitResult> {
    let keys: Vec<Label> = entries.iter().map(|e| e.label).collect();
    split_by_keys(entries, &keys, ratios, seed)
}

pub fn split_by_keys<K: Ord + Copy>(
    entries: &[ManifestEntry],
    keys: &[K],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<SplitResult> {
    let idx = stratified_indices(keys, ratios, seed)?;
    let take = |v: &[usize]| v.iter().map(|&i| entries[i].clone()).collect();
    Ok(SplitResult {
        train: take(&idx.train),
        val: take(&idx.val),
        test: take(&idx.test),
        seed,
    })
}

/// Counts gathered while preparing a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitStats {
    pub input: usize,
    pub excluded_multi_image: usize,
    pub balanced: Option<usize>,
}

/// Exclusion, optional binary balancing, then stratification (on the
/// binary label in binary mode, on the 4-class label otherwise).
pub fn prepare_split(
    entries: &[ManifestEntry],
    task: Task,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<(SplitResult, SplitStats)> {
    let retained = exclude_multi_image_studies(entries);
    let mut stats = SplitStats {
        input: entries.len(),
        excluded_multi_image: entries.len() - retained.len(),
        balanced: None,
    };
    let split = match task {
        Task::Multiclass => stratified_split(&retained, ratios, seed)?,
        Task::Binary => {
            let balanced = balance_binary(&retained, seed)?;
            stats.balanced = Some(balanced.len());
            let keys: Vec<BinaryLabel> = balanced.iter().map(|(_, b)| *b).collect();
            let pool: Vec<ManifestEntry> = balanced.into_iter().map(|(e, _)| e).collect();
            split_by_keys(&pool, &keys, ratios, seed)?
        }
    };
    Ok((split, stats))
}

/// Writes `train.csv`, `val.csv`, `test.csv` and `split_manifest.txt`.
pub fn write_split(
    dir: &Path,
    split: &SplitResult,
    stats: &SplitStats,
    task: Task,
    ratios: &SplitRatios,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let parts = [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ];
    for (name, entries) in parts {
        write_manifest(fs::File::create(dir.join(format!("{name}.csv")))?, entries)?;
    }
    let mut text = String::new();
    text.push_str(&format!("seed: {}\n", split.seed));
    text.push_str(&format!("mode: {task}\n"));
    text.push_str(&format!(
        "ratios: {},{},{}\n",
        ratios.train, ratios.val, ratios.test
    ));
    text.push_str(&format!("input_entries: {}\n", stats.input));
    text.push_str(&format!(
        "excluded_multi_image: {}\n",
        stats.excluded_multi_image
    ));
    if let Some(b) = stats.balanced {
        text.push_str(&format!("balanced_entries: {b}\n"));
    }
    for (name, entries) in parts {
        text.push_str(&format!("{name}: {}\n", entries.len()));
        for label in Label::ALL {
            let c = entries.iter().filter(|e| e.label == label).count();
            text.push_str(&format!("  {label}: {c}\n"));
        }
    }
    fs::write(dir.join("split_manifest.txt"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: usize, label: Label, images: u32) -> ManifestEntry {
        ManifestEntry {
            study_id: format!("s{id}"),
            image_path: format!("img/{id}.pgm"),
            label,
            images_in_study: images,
        }
    }

    #[test]
    fn loads_one_row_per_class() {
        let text = "study_id,image_path,label,images_in_study\n\
                    a,a.pgm,Negative for Pneumonia,1\n\
                    b,b.pgm,Typical Appearance,1\n\
                    c,c.pgm,Indeterminate Appearance,2\n\
                    d,d.pgm,Atypical Appearance,1\n";
        let e = parse_manifest(text.as_bytes(), Path::new("m.csv")).unwrap();
        assert_eq!(e.len(), 4);
        assert_eq!(e[2].label, Label::Indeterminate);
        assert_eq!(e[2].images_in_study, 2);
    }

    #[test]
    fn unknown_label_and_bad_rows() {
        let text = "study_id,image_path,label,images_in_study\na,a.pgm,COVID,1\n";
        let err = parse_manifest(text.as_bytes(), Path::new("m.csv")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("m.csv:2"), "{err}");

        let text = "study_id,image_path,label,images_in_study\n\
                    a,a.pgm,Typical Appearance,1\n\
                    b,b.pgm,Typical Appearance,x\n";
        match parse_manifest(text.as_bytes(), Path::new("m.csv")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let text = "study_id,image_path,label,images_in_study\n";
        assert!(parse_manifest(text.as_bytes(), Path::new("m.csv"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn exclusion_filters_multi_image() {
        let e: Vec<_> = [1, 2, 1, 3]
            .iter()
            .enumerate()
            .map(|(i, &n)| entry(i, Label::Typical, n))
            .collect();
        let kept = exclude_multi_image_studies(&e);
        assert_eq!(kept, vec![e[0].clone(), e[2].clone()]);
        let singles: Vec<_> = (0..3).map(|i| entry(i, Label::Negative, 1)).collect();
        assert_eq!(exclude_multi_image_studies(&singles), singles);
    }

    #[test]
    fn balance_counts_and_shrink() {
        let mut e: Vec<_> = (0..6).map(|i| entry(i, Label::Negative, 1)).collect();
        e.extend((6..26).map(|i| entry(i, Label::Typical, 1)));
        let b = balance_binary(&e, 1).unwrap();
        assert_eq!(b.len(), 12);
        assert_eq!(
            b.iter()
                .filter(|(_, l)| *l == BinaryLabel::Positive)
                .count(),
            6
        );
        assert_eq!(b, balance_binary(&e, 1).unwrap());

        let mut e: Vec<_> = (0..5).map(|i| entry(i, Label::Negative, 1)).collect();
        e.extend((5..8).map(|i| entry(i, Label::Atypical, 1)));
        let b = balance_binary(&e, 1).unwrap();
        assert_eq!(b.len(), 6);

        let neg_only: Vec<_> = (0..3).map(|i| entry(i, Label::Negative, 1)).collect();
        assert!(balance_binary(&neg_only, 0).is_err());
    }

    #[test]
    fn allocation_examples() {
        let r = SplitRatios::default();
        assert_eq!(r.allocate(40), [28, 8, 4]);
        assert_eq!(r.allocate(30), [21, 6, 3]);
        assert_eq!(r.allocate(20), [14, 4, 2]);
        assert_eq!(r.allocate(10), [7, 2, 1]);
        assert_eq!(r.allocate(33), [23, 7, 3]);
        assert_eq!(r.allocate(1), [1, 0, 0]);
        assert_eq!(r.allocate(0), [0, 0, 0]);
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let r = SplitRatios {
            train: 0.7,
            val: 0.2,
            test: 0.2,
        };
        assert!(r.validate().is_err());
        assert!(stratified_split(&[], &r, 0).is_err());
    }

    #[test]
    fn per_class_split_counts() {
        let mut e = Vec::new();
        for (label, n) in Label::ALL.into_iter().zip([40, 30, 20, 10]) {
            let start = e.len();
            e.extend((start..start + n).map(|i| entry(i, label, 1)));
        }
        let s = stratified_split(&e, &SplitRatios::default(), 9).unwrap();
        let count = |v: &[ManifestEntry], l: Label| v.iter().filter(|e| e.label == l).count();
        let got: Vec<[usize; 3]> = Label::ALL
            .iter()
            .map(|&l| [count(&s.train, l), count(&s.val, l), count(&s.test, l)])
            .collect();
        assert_eq!(got, vec![[28, 8, 4], [21, 6, 3], [14, 4, 2], [7, 2, 1]]);
    }
}
