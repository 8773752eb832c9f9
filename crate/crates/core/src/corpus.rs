//! Datasets: TSV ingestion, label mapping, stratified splits, corpus
//! statistics and a synthetic two-language benchmark.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Binary offensive-language label. The discriminant is the class index used
/// by every model (`NOT` = 0, `OFF` = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    #[serde(rename = "NOT")]
    Not = 0,
    #[serde(rename = "OFF")]
    Off = 1,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::Not, BinaryLabel::Off];
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(BinaryLabel::Not),
            1 => Some(BinaryLabel::Off),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Not => "NOT",
            BinaryLabel::Off => "OFF",
        }
    }

    /// Column heading used in rendered reports.
    pub fn display_name(self) -> &'static str {
        match self {
            BinaryLabel::Not => "Non Hate Offensive",
            BinaryLabel::Off => "Hate Offensive",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinaryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        map_olid_level_a(s)
    }
}

/// Map an OLID level-A tag to the binary scheme. Level-B/C tags are rejected.
pub fn map_olid_level_a(raw_label: &str) -> Result<BinaryLabel> {
    match raw_label {
        "OFF" => Ok(BinaryLabel::Off),
        "NOT" => Ok(BinaryLabel::Not),
        other => Err(Error::UnknownLabel(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Option<BinaryLabel>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<BinaryLabel>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    Empty,
    Labeled,
    Unlabeled,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub name: String,
    pub documents: Vec<Document>,
}

impl LabeledDataset {
    /// Build a dataset, rejecting duplicate document ids.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let name = name.into();
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::dataset(&name, format!("duplicate document id {:?}", doc.id)));
            }
        }
        Ok(LabeledDataset { name, documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labeling(&self) -> Labeling {
        let labeled = self.documents.iter().filter(|d| d.label.is_some()).count();
        match labeled {
            _ if self.documents.is_empty() => Labeling::Empty,
            n if n == self.documents.len() => Labeling::Labeled,
            0 => Labeling::Unlabeled,
            _ => Labeling::Mixed,
        }
    }

    /// Labels of a fully labeled, non-empty dataset.
    pub fn labels(&self) -> Result<Vec<BinaryLabel>> {
        match self.labeling() {
            Labeling::Labeled => Ok(self.documents.iter().filter_map(|d| d.label).collect()),
            Labeling::Empty => Err(Error::dataset(&self.name, "dataset is empty")),
            Labeling::Unlabeled => Err(Error::dataset(&self.name, "dataset is unlabeled")),
            Labeling::Mixed => Err(Error::dataset(
                &self.name,
                "dataset mixes labeled and unlabeled documents",
            )),
        }
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.text.as_str())
    }

    /// Same documents with every text passed through `f`.
    pub fn map_text(&self, mut f: impl FnMut(&str) -> String) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            documents: self
                .documents
                .iter()
                .map(|d| Document::new(d.id.clone(), f(&d.text), d.label))
                .collect(),
        }
    }

    fn subset(&self, name: String, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            name,
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
        }
    }
}

/// Data-driven table from raw label spellings to [`BinaryLabel`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAliases {
    table: HashMap<String, BinaryLabel>,
}

impl Default for LabelAliases {
    fn default() -> Self {
        let mut aliases = LabelAliases::empty();
        for (raw, label) in [
            ("NOT", BinaryLabel::Not),
            ("OFF", BinaryLabel::Off),
            ("not-offensive", BinaryLabel::Not),
            ("offensive", BinaryLabel::Off),
        ] {
            aliases.insert(raw, label);
        }
        aliases
    }
}

impl LabelAliases {
    pub fn empty() -> Self {
        LabelAliases {
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, raw: impl Into<String>, label: BinaryLabel) {
        self.table.insert(raw.into(), label);
    }

    pub fn resolve(&self, raw: &str) -> Result<BinaryLabel> {
        self.table
            .get(raw)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(raw.to_string()))
    }
}

/// A column addressed by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl From<&str> for Column {
    fn from(name: &str) -> Self {
        Column::Name(name.to_string())
    }
}

impl From<usize> for Column {
    fn from(index: usize) -> Self {
        Column::Index(index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsvSchema {
    pub header: bool,
    pub id: Column,
    pub text: Column,
    pub label: Option<Column>,
    /// Column count for headerless files; defaults to the highest addressed
    /// index plus one.
    pub columns: Option<usize>,
}

impl Default for TsvSchema {
    /// `id<TAB>text<TAB>label` with a header row.
    fn default() -> Self {
        TsvSchema {
            header: true,
            id: "id".into(),
            text: "text".into(),
            label: Some("label".into()),
            columns: None,
        }
    }
}

impl TsvSchema {
    /// Positional `id<TAB>text[<TAB>label]` without a header row.
    pub fn positional(with_label: bool) -> Self {
        TsvSchema {
            header: false,
            id: Column::Index(0),
            text: Column::Index(1),
            label: with_label.then_some(Column::Index(2)),
            columns: None,
        }
    }

    pub fn without_label(mut self) -> Self {
        self.label = None;
        self
    }
}

struct Resolved {
    id: usize,
    text: usize,
    label: Option<usize>,
    width: usize,
}

fn resolve_columns(schema: &TsvSchema, header: Option<&[&str]>, path: &Path) -> Result<Resolved> {
    let find = |col: &Column| -> Result<usize> {
        match (col, header) {
            (Column::Index(i), _) => Ok(*i),
            (Column::Name(name), Some(fields)) => {
                fields.iter().position(|f| f == name).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("header has no column named {name:?}"),
                })
            }
            (Column::Name(name), None) => Err(Error::InvalidArgument(format!(
                "column {name:?} addressed by name but the schema has no header row"
            ))),
        }
    };
    let id = find(&schema.id)?;
    let text = find(&schema.text)?;
    let label = schema.label.as_ref().map(find).transpose()?;
    let max_index = id.max(text).max(label.unwrap_or(0));
    let width = match header {
        Some(fields) => fields.len(),
        None => schema.columns.unwrap_or(max_index + 1),
    };
    if max_index >= width {
        return Err(Error::InvalidArgument(format!(
            "schema addresses column {max_index} but rows have {width} columns"
        )));
    }
    Ok(Resolved {
        id,
        text,
        label,
        width,
    })
}

/// Parse TSV content. `path` is only used for error messages and the
/// dataset name.
pub fn parse_tsv(
    content: &str,
    path: &Path,
    schema: &TsvSchema,
    aliases: &LabelAliases,
) -> Result<LabeledDataset> {
    let mut lines = content
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty());

    let header_fields: Option<Vec<&str>>;
    let columns = if schema.header {
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header row".to_string(),
        })?;
        header_fields = Some(first.split('\t').collect());
        resolve_columns(schema, header_fields.as_deref(), path)?
    } else {
        resolve_columns(schema, None, path)?
    };

    let mut documents = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != columns.width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} columns, found {}", columns.width, fields.len()),
            });
        }
        let label = match columns.label {
            Some(i) => Some(aliases.resolve(fields[i].trim()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?),
            None => None,
        };
        documents.push(Document::new(fields[columns.id], fields[columns.text], label));
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDataset::new(name, documents)
}

/// Load a UTF-8 tab-separated file. Rows keep file order.
pub fn load_tsv(path: impl AsRef<Path>, schema: &TsvSchema, aliases: &LabelAliases) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tsv(&content, path, schema, aliases)
}

/// Serialize as `id<TAB>text[<TAB>label]` with a header row. The label
/// column is written only when every document is labeled.
pub fn to_tsv(ds: &LabeledDataset) -> Result<String> {
    let with_label = ds.labeling() == Labeling::Labeled;
    let mut out = String::from(if with_label { "id\ttext\tlabel\n" } else { "id\ttext\n" });
    for doc in &ds.documents {
        if [&doc.id, &doc.text].iter().any(|f| f.contains(['\t', '\n', '\r'])) {
            return Err(Error::dataset(
                &ds.name,
                format!("document {:?} contains a tab or newline", doc.id),
            ));
        }
        out.push_str(&doc.id);
        out.push('\t');
        out.push_str(&doc.text);
        if let (true, Some(label)) = (with_label, doc.label) {
            out.push('\t');
            out.push_str(label.as_str());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_tsv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_tsv(ds)?).map_err(|e| Error::io(path, e))
}

/// Split each class separately so that per-class validation counts are within
/// one document of `validation_fraction`. Both sides keep dataset order.
pub fn stratified_split(
    ds: &LabeledDataset,
    validation_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    let labels = ds.labels()?;
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, label) in labels.iter().enumerate() {
        by_class[label.index()].push(i);
    }

    // Largest-remainder allocation: per-class counts are floor or ceil of the
    // exact share and add up to round(fraction * n).
    let total_val = (validation_fraction * ds.len() as f64).round() as usize;
    let exact: Vec<f64> = by_class
        .iter()
        .map(|members| validation_fraction * members.len() as f64)
        .collect();
    let mut take: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..2).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = total_val.saturating_sub(take.iter().sum());
    for &c in &order {
        if remaining == 0 {
            break;
        }
        if take[c] < by_class[c].len() && exact[c] > exact[c].floor() {
            take[c] += 1;
            remaining -= 1;
        }
    }

    for (c, members) in by_class.iter().enumerate() {
        if members.len() >= 2 && take[c] == members.len() {
            return Err(Error::dataset(
                &ds.name,
                format!(
                    "validation fraction {validation_fraction} leaves class {} empty in train",
                    BinaryLabel::from_index(c).unwrap()
                ),
            ));
        }
    }

    let mut validation = Vec::new();
    for (c, members) in by_class.iter_mut().enumerate() {
        let mut rng = rng_for(seed, &[0x5B117, c as u64]);
        members.shuffle(&mut rng);
        validation.extend_from_slice(&members[..take[c]]);
    }
    validation.sort_unstable();
    let in_validation: HashSet<usize> = validation.iter().copied().collect();
    let train: Vec<usize> = (0..ds.len()).filter(|i| !in_validation.contains(i)).collect();
    if train.is_empty() {
        return Err(Error::dataset(&ds.name, "split leaves the training side empty"));
    }

    Ok((
        ds.subset(format!("{}.train", ds.name), &train),
        ds.subset(format!("{}.validation", ds.name), &validation),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub per_class: BTreeMap<BinaryLabel, usize>,
    /// Fraction of `OFF` documents.
    pub class_ratio: f64,
}

impl CorpusStats {
    pub fn count(&self, label: BinaryLabel) -> usize {
        self.per_class.get(&label).copied().unwrap_or(0)
    }
}

pub fn stats(ds: &LabeledDataset) -> Result<CorpusStats> {
    let labels = ds.labels()?;
    let mut per_class: BTreeMap<BinaryLabel, usize> = BinaryLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for label in &labels {
        *per_class.entry(*label).or_default() += 1;
    }
    let total = labels.len();
    Ok(CorpusStats {
        total,
        class_ratio: per_class[&BinaryLabel::Off] as f64 / total as f64,
        per_class,
    })
}

/// Parameters of the synthetic two-language benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub source_docs: usize,
    pub target_docs: usize,
    /// Fraction of `OFF` documents in both languages.
    pub off_ratio: f64,
    pub source_stems: usize,
    pub target_stems: usize,
    /// Marker words per language.
    pub marker_stems: usize,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            source_docs: 2000,
            target_docs: 400,
            off_ratio: 567.0 / 3200.0,
            source_stems: 300,
            target_stems: 300,
            marker_stems: 24,
            min_words: 6,
            max_words: 14,
        }
    }
}

/// Output of [`synth_codeswitch`]: the two corpora and their marker words.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub source: LabeledDataset,
    pub target: LabeledDataset,
    pub source_markers: Vec<String>,
    pub target_markers: Vec<String>,
}

const CONSONANTS: &[u8] = b"bdgklmnprstv";
const VOWELS: &[u8] = b"aeiou";
const MARKER_SYLLABLES: &[&str] = &["za", "zu", "xo", "xi"];

fn syllable(rng: &mut impl Rng) -> String {
    let c = CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char;
    let v = VOWELS[rng.random_range(0..VOWELS.len())] as char;
    format!("{c}{v}")
}

/// Draw `count` distinct words of `syllables` syllables. Marker words open
/// with a reserved syllable; ordinary words never contain one.
fn draw_words(
    rng: &mut impl Rng,
    count: usize,
    syllables: usize,
    marker: bool,
    taken: &mut HashSet<String>,
) -> Result<Vec<String>> {
    let mut words = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while words.len() < count {
        attempts += 1;
        if attempts > count * 1000 + 1000 {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {count} distinct {syllables}-syllable words"
            )));
        }
        let mut word = if marker {
            MARKER_SYLLABLES[rng.random_range(0..MARKER_SYLLABLES.len())].to_string()
        } else {
            syllable(rng)
        };
        for _ in 1..syllables {
            word.push_str(&syllable(rng));
        }
        if taken.insert(word.clone()) {
            words.push(word);
        }
    }
    Ok(words)
}

fn synth_language(
    rng: &mut impl Rng,
    config: &SynthConfig,
    name: &str,
    prefix: &str,
    docs: usize,
    ordinary: &[String],
    markers: &[String],
) -> Result<LabeledDataset> {
    let off_count = (docs as f64 * config.off_ratio).round() as usize;
    let mut labels: Vec<BinaryLabel> = (0..docs)
        .map(|i| if i < off_count { BinaryLabel::Off } else { BinaryLabel::Not })
        .collect();
    labels.shuffle(rng);

    let width = docs.to_string().len();
    let documents = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let len = rng.random_range(config.min_words..=config.max_words);
            let mut words: Vec<&str> = (0..len)
                .map(|_| ordinary[rng.random_range(0..ordinary.len())].as_str())
                .collect();
            if label == BinaryLabel::Off {
                let n_markers = rng.random_range(1..=2usize.min(len));
                for _ in 0..n_markers {
                    let pos = rng.random_range(0..len);
                    words[pos] = markers[rng.random_range(0..markers.len())].as_str();
                }
            }
            Document::new(format!("{prefix}-{i:0width$}"), words.join(" "), Some(label))
        })
        .collect();
    LabeledDataset::new(name, documents)
}

/// Generate a source and a smaller target corpus over disjoint word
/// inventories that share one latent rule: a document is `OFF` exactly when
/// it contains a marker word. Source words have two syllables, target words
/// three; marker words in both languages open with the same reserved
/// syllables, so the only shared signal is sub-word structure.
pub fn synth_codeswitch(config: &SynthConfig, seed: u64) -> Result<SynthPair> {
    if config.min_words == 0 || config.min_words > config.max_words {
        return Err(Error::InvalidArgument("word range must satisfy 1 <= min_words <= max_words".into()));
    }
    if !(config.off_ratio > 0.0 && config.off_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("off_ratio must lie in (0, 1), got {}", config.off_ratio)));
    }
    for (name, docs) in [("source", config.source_docs), ("target", config.target_docs)] {
        let off = (docs as f64 * config.off_ratio).round() as usize;
        if off < 4 || docs - off.min(docs) < 4 {
            return Err(Error::InvalidArgument(format!(
                "{name} corpus of {docs} documents has fewer than 4 documents in some class"
            )));
        }
    }
    if config.target_docs >= config.source_docs {
        return Err(Error::InvalidArgument("target corpus must be smaller than the source corpus".into()));
    }
    if config.source_stems == 0 || config.target_stems == 0 || config.marker_stems == 0 {
        return Err(Error::InvalidArgument("word inventories must be non-empty".into()));
    }

    let mut rng = rng_for(seed, &[0x5E7_C0DE]);
    let mut taken = HashSet::new();
    let source_ordinary = draw_words(&mut rng, config.source_stems, 2, false, &mut taken)?;
    let source_markers = draw_words(&mut rng, config.marker_stems, 2, true, &mut taken)?;
    let target_ordinary = draw_words(&mut rng, config.target_stems, 3, false, &mut taken)?;
    let target_markers = draw_words(&mut rng, config.marker_stems, 3, true, &mut taken)?;

    let source = synth_language(
        &mut rng,
        config,
        "synth-source",
        "src",
        config.source_docs,
        &source_ordinary,
        &source_markers,
    )?;
    let target = synth_language(
        &mut rng,
        config,
        "synth-target",
        "tgt",
        config.target_docs,
        &target_ordinary,
        &target_markers,
    )?;
    Ok(SynthPair {
        source,
        target,
        source_markers,
        target_markers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(n_not: usize, n_off: usize) -> LabeledDataset {
        let docs = (0..n_not + n_off)
            .map(|i| {
                let label = if i < n_not { BinaryLabel::Not } else { BinaryLabel::Off };
                Document::new(format!("d{i}"), format!("text {i}"), Some(label))
            })
            .collect();
        LabeledDataset::new("fixture", docs).unwrap()
    }

    fn parse(content: &str, schema: &TsvSchema) -> Result<LabeledDataset> {
        parse_tsv(content, Path::new("fixture.tsv"), schema, &LabelAliases::default())
    }

    #[test]
    fn row_maps_label() {
        let ds = parse("id1\tsome text\tOFF\n", &TsvSchema::positional(true)).unwrap();
        assert_eq!(ds.documents, vec![Document::new("id1", "some text", Some(BinaryLabel::Off))]);
    }

    #[test]
    fn short_row_names_its_line() {
        let err = parse("id\ttext\tlabel\na\tx\tNOT\nb\ty\n", &TsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_an_error() {
        let err = parse("a\tx\tTIN\n", &TsvSchema::positional(true)).unwrap_err();
        assert!(err.to_string().contains("TIN"), "{err}");
    }

    #[test]
    fn alias_table_is_configurable() {
        let mut aliases = LabelAliases::empty();
        aliases.insert("Offensive_Untargetede", BinaryLabel::Off);
        aliases.insert("Not_offensive", BinaryLabel::Not);
        let ds = parse_tsv(
            "a\tx\tNot_offensive\nb\ty\tOffensive_Untargetede\n",
            Path::new("t.tsv"),
            &TsvSchema::positional(true),
            &aliases,
        )
        .unwrap();
        assert_eq!(ds.labels().unwrap(), vec![BinaryLabel::Not, BinaryLabel::Off]);
    }

    #[test]
    fn columns_by_name_in_any_order() {
        let ds = parse("label\ttext\tid\nNOT\thello\tx1\n", &TsvSchema::default()).unwrap();
        assert_eq!(ds.documents[0], Document::new("x1", "hello", Some(BinaryLabel::Not)));
    }

    #[test]
    fn tab_in_text_is_rejected() {
        assert!(parse("a\tx\ty\tNOT\n", &TsvSchema::positional(true)).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(parse("a\tx\tNOT\na\ty\tOFF\n", &TsvSchema::positional(true)).is_err());
    }

    #[test]
    fn olid_level_a_mapping() {
        assert_eq!(map_olid_level_a("OFF").unwrap(), BinaryLabel::Off);
        assert_eq!(map_olid_level_a("NOT").unwrap(), BinaryLabel::Not);
        for raw in ["TIN", "UNT", "IND", "GRP", "OTH", "off", ""] {
            assert!(map_olid_level_a(raw).is_err(), "{raw}");
        }
    }

    #[test]
    fn split_counts_per_class() {
        let ds = labeled(90, 10);
        let (train, val) = stratified_split(&ds, 0.2, 7).unwrap();
        let s = stats(&val).unwrap();
        assert_eq!(s.count(BinaryLabel::Not), 18);
        assert_eq!(s.count(BinaryLabel::Off), 2);
        assert_eq!(train.len(), 80);
    }

    #[test]
    fn split_two_documents() {
        let ds = labeled(1, 1);
        let (train, val) = stratified_split(&ds, 0.5, 3).unwrap();
        assert_eq!(train.len(), 1);
        assert_eq!(val.len(), 1);
        assert_ne!(train.documents[0].label, val.documents[0].label);
    }

    #[test]
    fn split_rejects_emptying_a_class() {
        let ds = labeled(10, 2);
        assert!(stratified_split(&ds, 0.9, 1).is_err());
        assert!(stratified_split(&ds, 0.0, 1).is_err());
        assert!(stratified_split(&ds, 1.0, 1).is_err());
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let ds = labeled(37, 13);
        let a = stratified_split(&ds, 0.3, 11).unwrap();
        let b = stratified_split(&ds, 0.3, 11).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<&str> = a.0.documents.iter().chain(&a.1.documents).map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        let mut expected: Vec<&str> = ds.documents.iter().map(|d| d.id.as_str()).collect();
        expected.sort_unstable();
        assert_eq!(ids, expected);
        let c = stratified_split(&ds, 0.3, 12).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn stats_counts() {
        let ds = labeled(7, 3);
        let s = stats(&ds).unwrap();
        assert_eq!(s.total, 10);
        assert_eq!(s.count(BinaryLabel::Off), 3);
        assert_eq!(s.count(BinaryLabel::Not), 7);
        assert!((s.class_ratio - 0.3).abs() < 1e-12);
    }

    #[test]
    fn stats_rejects_empty_and_unlabeled() {
        assert!(stats(&LabeledDataset::new("e", vec![]).unwrap()).is_err());
        let unlabeled = LabeledDataset::new("u", vec![Document::new("a", "x", None)]).unwrap();
        assert!(stats(&unlabeled).is_err());
    }

    #[test]
    fn synth_counts_and_rule() {
        let config = SynthConfig {
            source_docs: 2000,
            target_docs: 400,
            off_ratio: 0.18,
            ..SynthConfig::default()
        };
        let pair = synth_codeswitch(&config, 1).unwrap();
        assert_eq!(stats(&pair.target).unwrap().count(BinaryLabel::Off), 72);
        assert_eq!(stats(&pair.source).unwrap().count(BinaryLabel::Off), 360);
        for (ds, markers) in [(&pair.source, &pair.source_markers), (&pair.target, &pair.target_markers)] {
            for doc in &ds.documents {
                let has_marker = doc.text.split(' ').any(|w| markers.iter().any(|m| m == w));
                assert_eq!(has_marker, doc.label == Some(BinaryLabel::Off), "{}", doc.text);
            }
        }
        let source_words: HashSet<&str> = pair.source.texts().flat_map(|t| t.split(' ')).collect();
        assert!(pair.target.texts().flat_map(|t| t.split(' ')).all(|w| !source_words.contains(w)));
        assert_eq!(pair, synth_codeswitch(&config, 1).unwrap());
    }

    #[test]
    fn synth_rejects_tiny_classes() {
        let config = SynthConfig {
            source_docs: 100,
            target_docs: 10,
            ..SynthConfig::default()
        };
        assert!(synth_codeswitch(&config, 1).is_err());
    }
}
