use std::collections::{BTreeSet, HashMap};

use super::{text, CanonicalStatement, IngestError, Locator, ParsedDocument, SourceRef};
use crate::canonical::{parse_date, parse_time};
use crate::docstore::ObjectRef;
use crate::extract::OntologyRegistry;
use crate::types::{Category, CodeSystem, EventValue, FormatKind};

/// Dictionary tokens at least this long tolerate one edit.
pub const FUZZY_MIN_LEN: usize = 6;

const HEADER_KEYS: [&str; 5] = ["Name:", "Address:", "DOB:", "Patient ID:", "Document:"];

struct Form {
    tokens: Vec<String>,
    spelling: String,
    codes: BTreeSet<String>,
}

/// Leftmost-longest surface-form matcher over the registry vocabulary.
pub struct NarrativeMatcher<'r> {
    registry: &'r OntologyRegistry,
    forms: Vec<Form>,
    by_first: HashMap<String, Vec<usize>>,
    /// single-deletion variants of long first tokens
    by_deletion: HashMap<String, Vec<usize>>,
}

fn deletions(token: &str) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    let mut out: Vec<String> = (0..chars.len())
        .map(|i| chars.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| *c).collect())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Levenshtein distance of at most one.
fn within_one(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    match long.len() - short.len() {
        0 => short.iter().zip(long.iter()).filter(|(x, y)| x != y).count() == 1,
        1 => {
            let i = short.iter().zip(long.iter()).take_while(|(x, y)| x == y).count();
            short[i..] == long[i + 1..]
        }
        _ => false,
    }
}

fn token_matches(form: &str, text: &str) -> Option<bool> {
    if form == text {
        Some(true)
    } else if form.chars().count() >= FUZZY_MIN_LEN && within_one(form, text) {
        Some(false)
    } else {
        None
    }
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    start: usize,
    end: usize,
}

/// Lower-cased alphanumeric runs with byte offsets relative to `line`.
fn tokenize(line: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Token {
                    text: line[s..i].to_lowercase(),
                    start: s,
                    end: i,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: line[s..].to_lowercase(),
            start: s,
            end: line.len(),
        });
    }
    out
}

/// Byte ranges enclosed in double quotes.
fn quoted_ranges(line: &str) -> Vec<(usize, usize)> {
    let q: Vec<usize> = line.match_indices('"').map(|(i, _)| i).collect();
    q.chunks(2).filter(|c| c.len() == 2).map(|c| (c[0], c[1] + 1)).collect()
}

fn trim_token(t: &str) -> &str {
    t.trim_matches(|c: char| matches!(c, '.' | ',' | ';' | ':' | '(' | ')'))
}

fn is_number(t: &str) -> bool {
    let body = t.strip_prefix('-').unwrap_or(t);
    !body.is_empty()
        && body.bytes().all(|b| b.is_ascii_digit() || b == b'.')
        && body.bytes().filter(|b| *b == b'.').count() <= 1
        && !body.starts_with('.')
        && !body.ends_with('.')
}

struct Found {
    form: usize,
    first: usize,
    len: usize,
    fuzzy: usize,
}

impl<'r> NarrativeMatcher<'r> {
    pub fn new(registry: &'r OntologyRegistry) -> NarrativeMatcher<'r> {
        let mut forms = Vec::new();
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        let mut by_deletion: HashMap<String, Vec<usize>> = HashMap::new();
        for (spelling, codes) in registry.surface_forms() {
            let tokens: Vec<String> = tokenize(spelling).into_iter().map(|t| t.text).collect();
            if tokens.is_empty() {
                continue;
            }
            let id = forms.len();
            by_first.entry(tokens[0].clone()).or_default().push(id);
            if tokens[0].chars().count() >= FUZZY_MIN_LEN {
                for d in deletions(&tokens[0]) {
                    by_deletion.entry(d).or_default().push(id);
                }
            }
            forms.push(Form {
                tokens,
                spelling: spelling.to_string(),
                codes: codes.clone(),
            });
        }
        NarrativeMatcher {
            registry,
            forms,
            by_first,
            by_deletion,
        }
    }

    fn candidates(&self, token: &str) -> BTreeSet<usize> {
        let mut out: BTreeSet<usize> = BTreeSet::new();
        let mut add = |ids: Option<&Vec<usize>>| out.extend(ids.into_iter().flatten().copied());
        add(self.by_first.get(token));
        add(self.by_deletion.get(token));
        if token.chars().count() + 1 >= FUZZY_MIN_LEN {
            for d in deletions(token) {
                add(self.by_first.get(&d));
                add(self.by_deletion.get(&d));
            }
        }
        out
    }

    fn best_at(&self, tokens: &[Token], i: usize) -> Option<Found> {
        let mut best: Option<Found> = None;
        for id in self.candidates(&tokens[i].text) {
            let form = &self.forms[id];
            if i + form.tokens.len() > tokens.len() {
                continue;
            }
            let mut fuzzy = 0;
            let ok = form.tokens.iter().zip(&tokens[i..]).all(|(f, t)| match token_matches(f, &t.text) {
                Some(exact) => {
                    fuzzy += usize::from(!exact);
                    true
                }
                None => false,
            });
            if !ok {
                continue;
            }
            let cand = Found {
                form: id,
                first: i,
                len: form.tokens.len(),
                fuzzy,
            };
            let better = match &best {
                None => true,
                Some(b) => (cand.len, std::cmp::Reverse(cand.fuzzy)) > (b.len, std::cmp::Reverse(b.fuzzy)),
            };
            if better {
                best = Some(cand);
            }
        }
        best
    }

    /// Codes of every form tying with the best match at the same position.
    fn tied_codes(&self, tokens: &[Token], found: &Found) -> BTreeSet<String> {
        let mut codes = BTreeSet::new();
        for id in self.candidates(&tokens[found.first].text) {
            let form = &self.forms[id];
            if form.tokens.len() != found.len || found.first + found.len > tokens.len() {
                continue;
            }
            let mut fuzzy = 0;
            let ok = form.tokens.iter().zip(&tokens[found.first..]).all(|(f, t)| match token_matches(f, &t.text) {
                Some(exact) => {
                    fuzzy += usize::from(!exact);
                    true
                }
                None => false,
            });
            if ok && fuzzy == found.fuzzy {
                codes.extend(form.codes.iter().cloned());
            }
        }
        codes
    }

    /// Non-overlapping leftmost-longest matches in one line, skipping quoted text.
    fn matches(&self, line: &str) -> Vec<(Found, BTreeSet<String>, usize, usize)> {
        let quoted = quoted_ranges(line);
        let tokens: Vec<Token> = tokenize(line)
            .into_iter()
            .filter(|t| !quoted.iter().any(|(s, e)| t.start >= *s && t.end <= *e))
            .collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.best_at(&tokens, i) {
                Some(found) => {
                    let codes = self.tied_codes(&tokens, &found);
                    let start = tokens[found.first].start;
                    let end = tokens[found.first + found.len - 1].end;
                    i += found.len;
                    out.push((found, codes, start, end));
                }
                None => i += 1,
            }
        }
        out
    }

    fn value_in(&self, window: &str) -> EventValue {
        let quoted = quoted_ranges(window);
        if let Some((s, e)) = quoted.first() {
            let inner = &window[s + 1..e - 1];
            return match parse_date(inner) {
                Some(d) => EventValue::Date(d),
                None => EventValue::Text(inner.to_string()),
            };
        }
        let words: Vec<&str> = window.split_whitespace().map(trim_token).filter(|w| !w.is_empty()).collect();
        for (k, w) in words.iter().enumerate() {
            if parse_date(w).is_some() || parse_time(w).is_some() {
                break;
            }
            match w.to_lowercase().as_str() {
                "yes" => return EventValue::Bool(true),
                "no" => return EventValue::Bool(false),
                _ => {}
            }
            if is_number(w) {
                let value: f64 = w.parse().unwrap_or_default();
                let unit = words.get(k + 1).and_then(|u| self.registry.unit(u)).map(str::to_string);
                return EventValue::Quantity { value, unit };
            }
        }
        EventValue::Present
    }

    /// First date token outside quotes and the time token following it.
    fn timestamp_in(line: &str) -> Option<chrono::NaiveDateTime> {
        let quoted = quoted_ranges(line);
        let mut words = line.split_whitespace().filter(|w| {
            let off = w.as_ptr() as usize - line.as_ptr() as usize;
            !quoted.iter().any(|(s, e)| off >= *s && off < *e)
        });
        let date = words.by_ref().map(trim_token).find_map(parse_date)?;
        let time = words.map(trim_token).find_map(parse_time).unwrap_or(chrono::NaiveTime::MIN);
        Some(date.and_time(time))
    }

    pub fn parse(&self, bytes: &[u8]) -> Result<ParsedDocument, IngestError> {
        let body = text(bytes)?;
        let object = ObjectRef::of(bytes);
        let mut doc = ParsedDocument {
            object: object.clone(),
            format: FormatKind::Narrative,
            patient: None,
            statements: Vec::new(),
            warnings: Vec::new(),
        };
        let titled = body
            .lines()
            .nth(1)
            .is_some_and(|l| HEADER_KEYS.iter().any(|k| l.trim().starts_with(k)));
        let mut section: Option<Category> = None;
        let mut offset = 0;
        for (n, raw_line) in body.split_inclusive('\n').enumerate() {
            let line_start = offset;
            offset += raw_line.len();
            let line = raw_line.trim_end_matches(['\n', '\r']);
            let trimmed = line.trim();
            if let Some(id) = trimmed.strip_prefix("Patient ID:") {
                doc.patient.get_or_insert_with(|| id.trim().to_string());
                continue;
            }
            if HEADER_KEYS.iter().any(|k| trimmed.starts_with(k)) {
                continue;
            }
            if n == 0 && titled {
                continue;
            }
            if let Some(cat) = trimmed.strip_suffix(':').and_then(Category::parse) {
                section = Some(cat);
                continue;
            }
            let found = self.matches(line);
            for (k, (f, codes, start, end)) in found.iter().enumerate() {
                let window_end = found.get(k + 1).map_or(line.len(), |next| next.2);
                let value = self.value_in(&line[*end..window_end]);
                let form = &self.forms[f.form];
                let (code, system, category) = match codes.len() {
                    1 => {
                        let code = codes.iter().next().unwrap();
                        let concept = self.registry.concept(code);
                        (
                            Some(code.clone()),
                            concept.map(|c| c.system),
                            concept.map(|c| c.category).or(section),
                        )
                    }
                    _ => {
                        doc.warnings.push(format!(
                            "line {}: ambiguous term `{}` ({} concepts)",
                            n + 1,
                            form.spelling,
                            codes.len()
                        ));
                        let first = codes.iter().find_map(|c| self.registry.concept(c)).map(|c| c.category);
                        (None, None::<CodeSystem>, section.or(first))
                    }
                };
                let Some(category) = category else { continue };
                doc.statements.push(CanonicalStatement {
                    patient: String::new(),
                    category,
                    code_system: system,
                    code,
                    display: form.spelling.clone(),
                    value,
                    timestamp: Self::timestamp_in(line),
                    source: SourceRef {
                        object: object.clone(),
                        locator: Locator::Span {
                            start: line_start + start,
                            end: line_start + end,
                        },
                    },
                });
            }
        }
        Ok(doc.finish())
    }
}

pub fn parse_narrative_note(bytes: &[u8], registry: &OntologyRegistry) -> Result<ParsedDocument, IngestError> {
    NarrativeMatcher::new(registry).parse(bytes)
}
