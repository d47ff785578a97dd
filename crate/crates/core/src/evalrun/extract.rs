//! Maps free-form model output to an option index. Three representations are
//! tried in order: the option identifier ("(A)", "A.", ...), the option name,
//! then identifier followed by name without punctuation ("A camera"). Within a
//! representation the earliest match wins; two different options matching at
//! the same earliest position yield `None`.

use super::prompt::option_letter;

fn is_word(c: char) -> bool {
    c.is_alphanumeric()
}

fn boundary_before(chars: &[char], i: usize) -> bool {
    i == 0 || !is_word(chars[i - 1])
}

fn boundary_after(chars: &[char], end: usize) -> bool {
    end >= chars.len() || !is_word(chars[end])
}

fn lower_chars(s: &str) -> Vec<char> {
    s.chars().flat_map(char::to_lowercase).collect()
}

/// Earliest position of each option under `find`, resolved to one index.
fn earliest(hits: impl IntoIterator<Item = (usize, usize, usize)>) -> Option<Option<usize>> {
    // (position, -length, option)
    let mut best: Option<(usize, usize, usize)> = None;
    let mut tie = false;
    for (pos, len, opt) in hits {
        match best {
            None => best = Some((pos, len, opt)),
            Some((bp, bl, bo)) => {
                if pos < bp || (pos == bp && len > bl) {
                    best = Some((pos, len, opt));
                    tie = false;
                } else if pos == bp && len == bl && opt != bo {
                    tie = true;
                }
            }
        }
    }
    best.map(|(_, _, o)| if tie { None } else { Some(o) })
}

fn identifier_hits(text: &[char], n: usize) -> Vec<(usize, usize, usize)> {
    let mut hits = Vec::new();
    let trimmed: String = text.iter().collect::<String>().trim().to_string();
    for opt in 0..n {
        let l = option_letter(opt).to_ascii_lowercase();
        if trimmed.chars().count() == 1 && trimmed.starts_with(l) {
            let pos = text.iter().position(|&c| c == l).unwrap_or(0);
            hits.push((pos, 1, opt));
            continue;
        }
        for i in 0..text.len() {
            if text[i] != l {
                continue;
            }
            let open = i > 0 && text[i - 1] == '(';
            let next = text.get(i + 1).copied();
            if open && boundary_after(text, i + 1) {
                // "(a)", "(a" at end, "(a " ...
                hits.push((i - 1, 2, opt));
            } else if boundary_before(text, i) && matches!(next, Some(')' | '.' | ':')) {
                // "a)", "a.", "a:"; reject "a.m." style abbreviations
                let after = text.get(i + 2).copied();
                if !after.is_some_and(is_word) {
                    hits.push((i, 2, opt));
                }
            }
        }
    }
    hits
}

fn find_all(text: &[char], needle: &[char]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > text.len() {
        return Vec::new();
    }
    (0..=text.len() - needle.len())
        .filter(|&i| text[i..i + needle.len()] == *needle)
        .filter(|&i| boundary_before(text, i) && boundary_after(text, i + needle.len()))
        .collect()
}

fn name_hits(text: &[char], options: &[Vec<char>]) -> Vec<(usize, usize, usize)> {
    let mut hits = Vec::new();
    for (opt, name) in options.iter().enumerate() {
        for pos in find_all(text, name) {
            hits.push((pos, name.len(), opt));
        }
    }
    hits
}

fn combined_hits(text: &[char], options: &[Vec<char>]) -> Vec<(usize, usize, usize)> {
    let mut hits = Vec::new();
    for (opt, name) in options.iter().enumerate() {
        let mut needle = vec![option_letter(opt).to_ascii_lowercase(), ' '];
        needle.extend(name);
        for pos in find_all(text, &needle) {
            hits.push((pos, needle.len(), opt));
        }
    }
    hits
}

pub fn extract_option(raw: &str, options: &[String]) -> Option<usize> {
    let text = lower_chars(raw);
    let names: Vec<Vec<char>> = options.iter().map(|o| lower_chars(o.trim())).collect();
    let n = options.len().min(26);
    if let Some(r) = earliest(identifier_hits(&text, n)) {
        return r;
    }
    if let Some(r) = earliest(name_hits(&text, &names)) {
        return r;
    }
    earliest(combined_hits(&text, &names)).flatten()
}
