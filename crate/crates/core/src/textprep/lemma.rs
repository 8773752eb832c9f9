//! Suffix-stripping lemmatizer for English words inside code-mixed text.
//! Only all-ASCII-alphabetic tokens are touched.

use super::TokenSequence;

fn is_vowel(b: u8) -> bool {
    matches!(b, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &[u8]) -> bool {
    s.iter().any(|&b| is_vowel(b) || b == b'y')
}

/// consonant-vowel-consonant ending where the last consonant is not w, x or y
fn ends_cvc(s: &[u8]) -> bool {
    match s {
        [.., a, b, c] => !is_vowel(*a) && is_vowel(*b) && !is_vowel(*c) && !matches!(c, b'w' | b'x' | b'y'),
        _ => false,
    }
}

/// Stem left after removing -ing / -ed: undo consonant doubling
/// ("runn" -> "run") and restore a silent e on short stems ("mak" -> "make").
fn restore_stem(stem: &[u8]) -> Vec<u8> {
    let n = stem.len();
    if n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1]) && !matches!(stem[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_vec();
    }
    let mut out = stem.to_vec();
    if n == 3 && ends_cvc(stem) {
        out.push(b'e');
    }
    out
}

pub fn lemmatize_word(word: &str) -> String {
    let bytes = word.as_bytes();
    if bytes.len() <= 3 || !bytes.iter().all(u8::is_ascii_alphabetic) {
        return word.to_string();
    }
    let n = bytes.len();

    if let Some(stem) = bytes.strip_suffix(b"ing") {
        if stem.len() >= 2 && has_vowel(stem) {
            return String::from_utf8(restore_stem(stem)).unwrap();
        }
        return word.to_string();
    }
    if let Some(stem) = bytes.strip_suffix(b"ied") {
        if stem.len() >= 2 {
            return format!("{}y", std::str::from_utf8(stem).unwrap());
        }
    }
    if let Some(stem) = bytes.strip_suffix(b"ed") {
        if stem.len() >= 2 && has_vowel(stem) && !stem.ends_with(b"e") {
            return String::from_utf8(restore_stem(stem)).unwrap();
        }
        if stem.len() >= 2 && stem.ends_with(b"e") {
            // "agreed" -> "agree"
            return format!("{}e", std::str::from_utf8(stem).unwrap());
        }
        return word.to_string();
    }
    if let Some(stem) = bytes.strip_suffix(b"ies") {
        if stem.len() >= 2 {
            return format!("{}y", std::str::from_utf8(stem).unwrap());
        }
    }
    if let Some(stem) = bytes.strip_suffix(b"es") {
        if stem.ends_with(b"s") || stem.ends_with(b"x") || stem.ends_with(b"z") || stem.ends_with(b"ch") || stem.ends_with(b"sh") {
            return String::from_utf8(stem.to_vec()).unwrap();
        }
    }
    if bytes[n - 1] == b's' && !bytes.ends_with(b"ss") && !bytes.ends_with(b"us") && !bytes.ends_with(b"is") {
        return String::from_utf8(bytes[..n - 1].to_vec()).unwrap();
    }
    word.to_string()
}

pub fn lemmatize_english(tokens: &TokenSequence) -> TokenSequence {
    TokenSequence::new(tokens.iter().map(lemmatize_word))
}
