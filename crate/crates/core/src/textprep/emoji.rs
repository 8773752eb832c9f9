use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

use super::collapse_whitespace;

static BUNDLED: &str = include_str!("../../data/emoji.tsv");

/// Emoji sequence to plain-text name ("slightly smiling face").
#[derive(Debug, Clone)]
pub struct EmojiTable {
    names: HashMap<String, String>,
    first_chars: HashSet<char>,
    max_chars: usize,
}

/// Emoji-like characters that had no table entry and were dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmojiDiagnostics {
    pub unknown: usize,
}

fn parse_key(field: &str) -> Option<String> {
    field
        .split(' ')
        .map(|cp| u32::from_str_radix(cp, 16).ok().and_then(char::from_u32))
        .collect()
}

impl EmojiTable {
    /// Table shipped with the crate, built from CLDR short names.
    pub fn bundled() -> &'static EmojiTable {
        static TABLE: OnceLock<EmojiTable> = OnceLock::new();
        TABLE.get_or_init(|| EmojiTable::parse(BUNDLED, Path::new("emoji.tsv")).expect("bundled emoji table is valid"))
    }

    /// Parse `sequence<TAB>name` lines. The sequence is either the literal
    /// emoji or space-separated hexadecimal code points.
    pub fn parse(content: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: message.to_string(),
            };
            let (key, name) = line.split_once('\t').ok_or_else(|| parse_err("expected sequence<TAB>name"))?;
            let key = parse_key(key).unwrap_or_else(|| key.to_string());
            let name = name.trim();
            if key.is_empty() || name.is_empty() || name.contains('_') {
                return Err(parse_err("empty key, or name that is empty or contains underscores"));
            }
            entries.push((key, name.to_string()));
        }
        Ok(EmojiTable::from_entries(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmojiTable::parse(&content, path)
    }

    pub fn from_entries<I: IntoIterator<Item = (String, String)>>(entries: I) -> Self {
        let names: HashMap<String, String> = entries.into_iter().collect();
        let first_chars = names.keys().filter_map(|k| k.chars().next()).collect();
        let max_chars = names.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        EmojiTable {
            names,
            first_chars,
            max_chars,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, sequence: &str) -> Option<&str> {
        self.names.get(sequence).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.names.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Longest table entry starting at `chars[start]`, as (length, name).
    fn longest_match(&self, chars: &[char], start: usize, buf: &mut String) -> Option<(usize, &str)> {
        if !self.first_chars.contains(&chars[start]) {
            return None;
        }
        let longest = self.max_chars.min(chars.len() - start);
        (1..=longest).rev().find_map(|len| {
            buf.clear();
            buf.extend(&chars[start..start + len]);
            self.names.get(buf.as_str()).map(|name| (len, name.as_str()))
        })
    }
}

fn is_pictographic(c: char) -> bool {
    matches!(c as u32, 0x1F000..=0x1FAFF | 0x2600..=0x27BF)
}

/// Joiners and modifiers that belong to the preceding emoji.
fn is_emoji_component(c: char) -> bool {
    matches!(
        c as u32,
        0x200D | 0xFE0E | 0xFE0F | 0x20E3 | 0x1F3FB..=0x1F3FF | 0xE0020..=0xE007F
    )
}

enum Piece<'a> {
    Text(char),
    Emoji(&'a str),
    Unknown,
}

fn scan<'t>(text: &str, table: &'t EmojiTable, mut visit: impl FnMut(Piece<'t>)) {
    let chars: Vec<char> = text.chars().collect();
    let mut buf = String::new();
    let mut i = 0;
    while i < chars.len() {
        if let Some((len, name)) = table.longest_match(&chars, i, &mut buf) {
            visit(Piece::Emoji(name));
            i += len;
        } else if is_pictographic(chars[i]) {
            i += 1;
            while i < chars.len() {
                if chars[i] == '\u{200D}' && i + 1 < chars.len() && is_pictographic(chars[i + 1]) {
                    i += 2;
                } else if is_emoji_component(chars[i]) {
                    i += 1;
                } else {
                    break;
                }
            }
            visit(Piece::Unknown);
        } else {
            visit(Piece::Text(chars[i]));
            i += 1;
        }
    }
}

/// Replace each emoji sequence (longest match first) with its name, keeping
/// exactly one space between a name and neighbouring text. Emoji-like
/// characters missing from the table are dropped and counted.
pub fn convert_emojis_with_diagnostics(text: &str, table: &EmojiTable) -> (String, EmojiDiagnostics) {
    let mut out = String::with_capacity(text.len());
    let mut diagnostics = EmojiDiagnostics::default();
    let mut space_before_text = false;
    scan(text, table, |piece| match piece {
        Piece::Text(c) => {
            if space_before_text && !c.is_whitespace() {
                out.push(' ');
            }
            space_before_text = false;
            out.push(c);
        }
        Piece::Emoji(name) => {
            if !out.is_empty() && !out.ends_with(char::is_whitespace) {
                out.push(' ');
            }
            out.push_str(name);
            space_before_text = true;
        }
        Piece::Unknown => diagnostics.unknown += 1,
    });
    (out, diagnostics)
}

pub fn convert_emojis(text: &str, table: &EmojiTable) -> String {
    convert_emojis_with_diagnostics(text, table).0
}

/// Delete emoji sequences. Each deletion acts as a word break and the result
/// is whitespace-collapsed.
pub fn strip_emojis_with_diagnostics(text: &str, table: &EmojiTable) -> (String, EmojiDiagnostics) {
    let mut spaced = String::with_capacity(text.len());
    let mut diagnostics = EmojiDiagnostics::default();
    scan(text, table, |piece| match piece {
        Piece::Text(c) => spaced.push(c),
        Piece::Emoji(_) => spaced.push(' '),
        Piece::Unknown => {
            diagnostics.unknown += 1;
            spaced.push(' ');
        }
    });
    (collapse_whitespace(&spaced), diagnostics)
}

pub fn strip_emojis(text: &str, table: &EmojiTable) -> String {
    strip_emojis_with_diagnostics(text, table).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> &'static EmojiTable {
        EmojiTable::bundled()
    }

    #[test]
    fn bundled_table_is_plain_text() {
        let t = table();
        assert!(t.len() > 3000);
        assert!(t.entries().all(|(_, name)| !name.is_empty() && !name.contains('_') && !name.contains(':')));
        assert_eq!(t.name("🙂"), Some("slightly smiling face"));
    }

    #[test]
    fn convert_examples() {
        assert_eq!(convert_emojis("🙂", table()), "slightly smiling face");
        assert_eq!(convert_emojis("hello", table()), "hello");
        assert_eq!(
            convert_emojis("good 🙂🙂", table()),
            "good slightly smiling face slightly smiling face"
        );
        assert_eq!(convert_emojis("a🙂b", table()), "a slightly smiling face b");
    }

    #[test]
    fn zwj_sequences_match_longest_first() {
        // man, ZWJ, laptop
        let technologist = "\u{1F468}\u{200D}\u{1F4BB}";
        let name = table().name(technologist).expect("sequence in table");
        assert_eq!(convert_emojis(technologist, table()), name);
        assert_ne!(name, table().name("\u{1F468}").unwrap());
    }

    #[test]
    fn unknown_pictographs_are_dropped_and_counted() {
        let t = EmojiTable::from_entries([("🙂".to_string(), "slightly smiling face".to_string())]);
        let (out, diag) = convert_emojis_with_diagnostics("x 😀\u{FE0F} y 🙂", &t);
        assert_eq!(out, "x  y slightly smiling face");
        assert_eq!(diag.unknown, 1);
        let (out, diag) = strip_emojis_with_diagnostics("x 😀 y", &t);
        assert_eq!(out, "x y");
        assert_eq!(diag.unknown, 1);
    }

    #[test]
    fn strip_examples() {
        assert_eq!(strip_emojis("good 🙂", table()), "good");
        assert_eq!(strip_emojis("🙂", table()), "");
        assert_eq!(strip_emojis("a🙂b", table()), "a b");
    }

    #[test]
    fn literal_and_hex_keys_parse() {
        let t = EmojiTable::parse("1F642\tslightly smiling face\n🙃\tupside-down face\n", Path::new("t")).unwrap();
        assert_eq!(t.name("🙂"), Some("slightly smiling face"));
        assert_eq!(t.name("🙃"), Some("upside-down face"));
        assert!(EmojiTable::parse("1F642\tslightly_smiling\n", Path::new("t")).is_err());
        assert!(EmojiTable::parse("1F642\n", Path::new("t")).is_err());
    }
}
