use std::io::BufRead;

use log::warn;

use super::{PhoneticLexicon, PhoneticsError, Pronunciation};

/// Parses CMUdict text.
///
/// Accepts both the classic layout (`WORD  PH PH`, `;;;` comments) and the
/// current one (lowercase words, trailing `# ...` comments). `WORD(n)`
/// variants are merged under `WORD` in file order. Lines are decoded as UTF-8
/// and fall back to Latin-1. Malformed lines are counted and skipped.
pub fn parse_cmudict<R: BufRead>(mut reader: R) -> Result<PhoneticLexicon, PhoneticsError> {
    let mut lexicon = PhoneticLexicon::new();
    let mut malformed = 0usize;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        let line = decode_line(&buf);
        match parse_line(&line) {
            Line::Skip => {}
            Line::Entry(word, pron) => lexicon.insert(word, pron),
            Line::Malformed => malformed += 1,
        }
    }
    if malformed > 0 {
        warn!("skipped {malformed} malformed CMUdict lines");
    }
    lexicon.set_malformed(malformed);
    if lexicon.is_empty() {
        return Err(PhoneticsError::EmptyLexicon { malformed });
    }
    Ok(lexicon)
}

fn decode_line(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

enum Line<'a> {
    Skip,
    Entry(&'a str, Pronunciation),
    Malformed,
}

fn parse_line(line: &str) -> Line<'_> {
    let line = line.trim();
    if line.is_empty() || line.starts_with(";;;") {
        return Line::Skip;
    }
    let body = match line.find(" #") {
        Some(i) => line[..i].trim_end(),
        None => line,
    };
    let mut parts = body.split_whitespace();
    let Some(head) = parts.next() else {
        return Line::Malformed;
    };
    let word = strip_variant(head);
    if word.is_empty() {
        return Line::Malformed;
    }
    let rest: Vec<&str> = parts.collect();
    match Pronunciation::from_str_parts(&rest) {
        Some(p) => Line::Entry(word, p),
        None => Line::Malformed,
    }
}

/// `READ(1)` → `READ`; anything else unchanged.
fn strip_variant(head: &str) -> &str {
    if let Some(open) = head.rfind('(') {
        let tail = &head[open + 1..];
        if let Some(digits) = tail.strip_suffix(')') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) && open > 0 {
                return &head[..open];
            }
        }
    }
    head
}

impl Pronunciation {
    fn from_str_parts(parts: &[&str]) -> Option<Pronunciation> {
        let phonemes = parts.iter().map(|p| p.parse().ok()).collect::<Option<Vec<_>>>()?;
        Pronunciation::new(phonemes).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_lines() {
        let lex = parse_cmudict(&b"HELLO  HH AH0 L OW1\n"[..]).unwrap();
        let p = lex.first("HELLO").unwrap();
        assert_eq!(p.to_string(), "HH AH0 L OW1");
    }

    #[test]
    fn comments_are_not_entries() {
        let lex = parse_cmudict(&b";;; comment\nCAT  K AE1 T\n"[..]).unwrap();
        assert_eq!(lex.len(), 1);
        assert!(matches!(
            parse_cmudict(&b";;; comment\n"[..]),
            Err(PhoneticsError::EmptyLexicon { malformed: 0 })
        ));
    }

    #[test]
    fn variants_merge_in_order() {
        let lex = parse_cmudict(&b"READ  R IY1 D\nREAD(1)  R EH1 D\n"[..]).unwrap();
        let v = lex.pronunciations("read").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].to_string(), "R IY1 D");
        assert_eq!(v[1].to_string(), "R EH1 D");
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn modern_layout_with_trailing_comment() {
        let lex = parse_cmudict(&b"abbe AE1 B IY0\nabbe(2) AE0 B EY1\nd'artagnan D AH0 T AE1 N Y AH0 N # foreign french\n"[..]).unwrap();
        assert_eq!(lex.pronunciations("ABBE").unwrap().len(), 2);
        assert_eq!(lex.stress_pattern("d'artagnan").as_deref(), Some("010"));
    }

    #[test]
    fn malformed_lines_are_counted() {
        let lex = parse_cmudict(&b"CAT  K AE1 T\nBAD  K AEX T\nNOPHONES\nDOG\tD AO1 G\n"[..]).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.malformed_lines(), 2);
    }

    #[test]
    fn latin1_bytes_decode() {
        let lex = parse_cmudict(&b"CAF\xc9  K AE0 F EY1\n"[..]).unwrap();
        assert!(lex.contains("CAFÉ"));
    }
}
