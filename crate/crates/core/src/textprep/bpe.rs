//! Byte-level BPE. Every byte value is a base symbol, so any UTF-8 string
//! encodes losslessly and `[UNK]` is never produced.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
pub const FIRST_BYTE: u32 = SPECIAL_TOKENS.len() as u32;
const BASE_SIZE: u32 = FIRST_BYTE + 256;
const FORMAT_HEADER: &str = "olid-bpe 1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    merges: Vec<(u32, u32)>,
    /// Byte content of every non-special id.
    pieces: Vec<Vec<u8>>,
    ranks: HashMap<(u32, u32), u32>,
    fingerprint: String,
}

/// Fixed-length id sequence: `[CLS] subwords [SEP] [PAD]...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenIdSequence {
    pub ids: Vec<u32>,
    /// Number of non-pad positions, `[CLS]` and `[SEP]` included.
    pub attention_length: usize,
}

impl TokenIdSequence {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// Positions between `[CLS]` and `[SEP]`.
    pub fn content_positions(&self) -> std::ops::Range<usize> {
        1..self.attention_length.saturating_sub(1)
    }

    pub fn is_well_formed(&self) -> bool {
        let n = self.attention_length;
        n >= 2
            && n <= self.ids.len()
            && self.ids[0] == CLS
            && self.ids[n - 1] == SEP
            && self.ids[1..n - 1].iter().all(|&id| id >= FIRST_BYTE)
            && self.ids[n..].iter().all(|&id| id == PAD)
    }
}

/// Split text into chunks that never straddle a word boundary: each chunk is
/// a whitespace run followed by a non-whitespace run.
fn pretokenize(text: &str) -> impl Iterator<Item = &str> {
    let mut start = 0;
    let mut prev_ws = true;
    let mut bounds = Vec::new();
    for (i, c) in text.char_indices() {
        let ws = c.is_whitespace();
        if ws && !prev_ws && i > start {
            bounds.push((start, i));
            start = i;
        }
        prev_ws = ws;
    }
    if start < text.len() {
        bounds.push((start, text.len()));
    }
    bounds.into_iter().map(move |(a, b)| &text[a..b])
}

fn merge_pair(symbols: &mut Vec<u32>, pair: (u32, u32), new_id: u32) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(new_id);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    *symbols = out;
}

/// Learn up to `merge_count` merges, each time taking the most frequent
/// adjacent pair; ties go to the lexicographically smaller pair of byte
/// strings. Stops early when no pair is left.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], merge_count: usize) -> Result<SubwordVocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot train BPE on an empty corpus".into()));
    }
    let mut chunk_counts: BTreeMap<&[u8], u64> = BTreeMap::new();
    for text in corpus {
        for chunk in pretokenize(text.as_ref()) {
            *chunk_counts.entry(chunk.as_bytes()).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<u32>, u64)> = chunk_counts
        .into_iter()
        .map(|(bytes, count)| (bytes.iter().map(|&b| FIRST_BYTE + b as u32).collect(), count))
        .collect();

    let mut pieces: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let piece = |pieces: &[Vec<u8>], id: u32| pieces[(id - FIRST_BYTE) as usize].clone();
    let mut merges = Vec::with_capacity(merge_count);

    for _ in 0..merge_count {
        let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (symbols, count) in &words {
            for w in symbols.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_default() += count;
            }
        }
        let best = pair_counts.into_iter().max_by(|(pa, ca), (pb, cb)| {
            ca.cmp(cb).then_with(|| {
                let ka = (&pieces[(pa.0 - FIRST_BYTE) as usize], &pieces[(pa.1 - FIRST_BYTE) as usize]);
                let kb = (&pieces[(pb.0 - FIRST_BYTE) as usize], &pieces[(pb.1 - FIRST_BYTE) as usize]);
                kb.cmp(&ka)
            })
        });
        let Some((pair, _)) = best else { break };
        let new_id = FIRST_BYTE + pieces.len() as u32;
        let mut merged = piece(&pieces, pair.0);
        merged.extend(piece(&pieces, pair.1));
        pieces.push(merged);
        merges.push(pair);
        for (symbols, _) in &mut words {
            if symbols.len() > 1 {
                merge_pair(symbols, pair, new_id);
            }
        }
    }
    Ok(SubwordVocabulary::from_merges(merges))
}

impl SubwordVocabulary {
    fn from_merges(merges: Vec<(u32, u32)>) -> Self {
        let mut pieces: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, &(a, b)) in merges.iter().enumerate() {
            let mut merged = pieces[(a - FIRST_BYTE) as usize].clone();
            merged.extend_from_slice(&pieces[(b - FIRST_BYTE) as usize]);
            pieces.push(merged);
            ranks.insert((a, b), rank as u32);
        }
        let mut vocab = SubwordVocabulary {
            merges,
            pieces,
            ranks,
            fingerprint: String::new(),
        };
        vocab.fingerprint = hex(&Sha256::digest(vocab.body().as_bytes()));
        vocab
    }

    /// Total number of ids, specials included.
    pub fn len(&self) -> usize {
        SPECIAL_TOKENS.len() + self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn pad_id(&self) -> u32 {
        PAD
    }

    pub fn unk_id(&self) -> u32 {
        UNK
    }

    pub fn cls_id(&self) -> u32 {
        CLS
    }

    pub fn sep_id(&self) -> u32 {
        SEP
    }

    pub fn mask_id(&self) -> u32 {
        MASK
    }

    /// First id that is not a special token.
    pub fn first_regular_id(&self) -> u32 {
        FIRST_BYTE
    }

    pub fn is_special(&self, id: u32) -> bool {
        id < FIRST_BYTE
    }

    /// Byte content of a regular id.
    pub fn piece(&self, id: u32) -> Option<&[u8]> {
        id.checked_sub(FIRST_BYTE)
            .and_then(|i| self.pieces.get(i as usize))
            .map(Vec::as_slice)
    }

    /// Subword ids of `text` without specials.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for chunk in pretokenize(text) {
            let mut symbols: Vec<u32> = chunk.bytes().map(|b| FIRST_BYTE + b as u32).collect();
            while symbols.len() > 1 {
                let best = symbols
                    .windows(2)
                    .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&r| (r, (w[0], w[1]))))
                    .min();
                let Some((rank, pair)) = best else { break };
                merge_pair(&mut symbols, pair, BASE_SIZE + rank);
            }
            out.extend(symbols);
        }
        out
    }

    fn body(&self) -> String {
        let mut out = String::new();
        writeln!(out, "special {}", SPECIAL_TOKENS.join(" ")).unwrap();
        for &(a, b) in &self.merges {
            writeln!(
                out,
                "merge {} {}",
                hex(&self.pieces[(a - FIRST_BYTE) as usize]),
                hex(&self.pieces[(b - FIRST_BYTE) as usize])
            )
            .unwrap();
        }
        out
    }

    /// Line-oriented text form: header, fingerprint, specials, then one
    /// `merge <hex> <hex>` line per merge in rank order.
    pub fn to_text(&self) -> String {
        format!("{FORMAT_HEADER}\nfingerprint {}\n{}", self.fingerprint, self.body())
    }

    pub fn from_text(content: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = content.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, FORMAT_HEADER)) => {}
            other => return Err(err(1, format!("expected {FORMAT_HEADER:?}, found {:?}", other.map(|o| o.1)))),
        }
        let (n, line) = lines.next().ok_or_else(|| err(2, "missing fingerprint line".into()))?;
        let declared = line
            .strip_prefix("fingerprint ")
            .ok_or_else(|| err(n, "expected fingerprint line".into()))?
            .to_string();
        let (n, line) = lines.next().ok_or_else(|| err(3, "missing special line".into()))?;
        if line != format!("special {}", SPECIAL_TOKENS.join(" ")) {
            return Err(err(n, "unexpected special-token line".into()));
        }

        let mut index: HashMap<Vec<u8>, u32> = (0..=255u8).map(|b| (vec![b], FIRST_BYTE + b as u32)).collect();
        let mut merges = Vec::new();
        for (n, line) in lines {
            let mut parts = line.split(' ');
            let (Some("merge"), Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(err(n, format!("malformed merge line {line:?}")));
            };
            let a = unhex(a).ok_or_else(|| err(n, "bad hex".into()))?;
            let b = unhex(b).ok_or_else(|| err(n, "bad hex".into()))?;
            let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) else {
                return Err(err(n, "merge refers to an unknown piece".into()));
            };
            let mut merged = a;
            merged.extend(b);
            index.insert(merged, BASE_SIZE + merges.len() as u32);
            merges.push((ia, ib));
        }
        let vocab = SubwordVocabulary::from_merges(merges);
        if vocab.fingerprint != declared {
            return Err(Error::FingerprintMismatch {
                expected: declared,
                found: vocab.fingerprint,
            });
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SubwordVocabulary::from_text(&content, path)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if s.is_empty() || s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

/// `[CLS] subwords [SEP]` padded to `max_len`. Subwords beyond
/// `max_len - 2` are dropped; `[SEP]` is always kept.
pub fn encode(vocab: &SubwordVocabulary, text: &str, max_len: usize) -> TokenIdSequence {
    assert!(max_len >= 3, "max_len must be at least 3");
    let subwords = vocab.tokenize(text);
    let kept = subwords.len().min(max_len - 2);
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS);
    ids.extend_from_slice(&subwords[..kept]);
    ids.push(SEP);
    let attention_length = ids.len();
    ids.resize(max_len, PAD);
    TokenIdSequence { ids, attention_length }
}

/// Concatenate the bytes of all regular ids; specials are skipped.
pub fn decode(vocab: &SubwordVocabulary, ids: &TokenIdSequence) -> Result<String> {
    let mut bytes = Vec::new();
    for &id in &ids.ids {
        if vocab.is_special(id) {
            continue;
        }
        bytes.extend_from_slice(vocab.piece(id).ok_or(Error::UnknownTokenId(id))?);
    }
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus() -> Vec<&'static str> {
        vec!["the cat sat on the mat", "the dog sat", "cats and dogs 🙂", "മലയാളം text"]
    }

    #[test]
    fn no_merges_is_base_alphabet() {
        let vocab = train_bpe(&corpus(), 0).unwrap();
        assert_eq!(vocab.len(), 256 + 5);
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        let vocab = train_bpe(&["aaaa"], 1).unwrap();
        let a = FIRST_BYTE + b'a' as u32;
        assert_eq!(vocab.merges(), [(a, a)]);
        assert_eq!(vocab.piece(BASE_SIZE), Some(&b"aa"[..]));
    }

    #[test]
    fn ties_break_lexicographically() {
        // "ab" and "cd" both occur twice
        let vocab = train_bpe(&["cd", "ab", "cd", "ab"], 1).unwrap();
        assert_eq!(vocab.piece(BASE_SIZE), Some(&b"ab"[..]));
    }

    #[test]
    fn training_stops_when_pairs_run_out() {
        let vocab = train_bpe(&["ab"], 10).unwrap();
        assert_eq!(vocab.merges().len(), 1);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(train_bpe::<&str>(&[], 3).is_err());
    }

    #[test]
    fn deterministic_fingerprint() {
        let a = train_bpe(&corpus(), 20).unwrap();
        let b = train_bpe(&corpus(), 20).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = train_bpe(&corpus(), 19).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn encode_layout() {
        let vocab = train_bpe(&corpus(), 20).unwrap();
        let empty = encode(&vocab, "", 8);
        assert_eq!(empty.ids, [CLS, SEP, PAD, PAD, PAD, PAD, PAD, PAD]);
        assert_eq!(empty.attention_length, 2);
        let seq = encode(&vocab, "the cat sat on the mat and more", 16);
        assert_eq!(seq.ids.len(), 16);
        assert!(seq.is_well_formed());
        let short = encode(&vocab, "the cat sat on the mat and more", 3);
        assert_eq!(short.ids.len(), 3);
        assert_eq!(short.ids[2], SEP);
        assert!(short.is_well_formed());
    }

    #[test]
    fn decode_drops_specials_and_rejects_unknown_ids() {
        let vocab = train_bpe(&corpus(), 5).unwrap();
        let pads = TokenIdSequence {
            ids: vec![PAD; 4],
            attention_length: 0,
        };
        assert_eq!(decode(&vocab, &pads).unwrap(), "");
        let bad = TokenIdSequence {
            ids: vec![CLS, 1_000_000_000, SEP],
            attention_length: 3,
        };
        assert!(matches!(decode(&vocab, &bad), Err(Error::UnknownTokenId(1_000_000_000))));
    }

    #[test]
    fn text_form_round_trip_and_tamper_detection() {
        let vocab = train_bpe(&corpus(), 30).unwrap();
        let text = vocab.to_text();
        let back = SubwordVocabulary::from_text(&text, Path::new("v")).unwrap();
        assert_eq!(back, vocab);
        let tampered = text.replacen("merge ", "merge 20", 1);
        assert!(SubwordVocabulary::from_text(&tampered, Path::new("v")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_any_utf8(x in "\\PC{0,40}", merges in 0usize..60) {
            let vocab = train_bpe(&corpus(), merges).unwrap();
            let seq = encode(&vocab, &x, x.len() + 3);
            prop_assert!(seq.is_well_formed());
            prop_assert_eq!(decode(&vocab, &seq).unwrap(), x);
        }

        #[test]
        fn encode_is_well_formed(x in "\\PC{0,60}", max_len in 3usize..24) {
            let vocab = train_bpe(&corpus(), 40).unwrap();
            let seq = encode(&vocab, &x, max_len);
            prop_assert_eq!(seq.ids.len(), max_len);
            prop_assert!(seq.is_well_formed());
        }
    }
}
