//! Lossless reading and writing of CoNLL-U, including comments, multiword
//! tokens, empty nodes and the enhanced DEPS column.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

/// Identity of a line in a CoNLL-U sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenId {
    /// A syntactic word, `1..=n`.
    Word(usize),
    /// A multiword token spanning words `start..=end`.
    MultiwordRange(usize, usize),
    /// An empty (elided) node `base.sub`, placed after word `base`.
    Empty(usize, usize),
}

impl TokenId {
    // Orders ids the way they appear in a file: a range precedes its first
    // word and empty nodes follow their base word.
    fn file_key(self) -> (usize, u8, usize) {
        match self {
            TokenId::MultiwordRange(start, end) => (start, 0, end),
            TokenId::Word(n) => (n, 1, 0),
            TokenId::Empty(base, sub) => (base, 2, sub),
        }
    }

    pub fn is_word(self) -> bool {
        matches!(self, TokenId::Word(_))
    }

    pub fn is_empty_node(self) -> bool {
        matches!(self, TokenId::Empty(..))
    }

    pub fn is_multiword(self) -> bool {
        matches!(self, TokenId::MultiwordRange(..))
    }
}

impl Ord for TokenId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.file_key().cmp(&other.file_key())
    }
}

impl PartialOrd for TokenId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TokenId::Word(n) => write!(f, "{}", n),
            TokenId::MultiwordRange(start, end) => write!(f, "{}-{}", start, end),
            TokenId::Empty(base, sub) => write!(f, "{}.{}", base, sub),
        }
    }
}

/// Parse a decimal integer without sign or leading zeros.
fn parse_index(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if s.len() > 1 && s.starts_with('0') {
        return None;
    }
    s.parse().ok()
}

impl FromStr for TokenId {
    type Err = Violation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || Violation::MalformedId(s.to_owned());
        if let Some((start, end)) = s.split_once('-') {
            let start = parse_index(start).filter(|&n| n > 0).ok_or_else(malformed)?;
            let end = parse_index(end).ok_or_else(malformed)?;
            if start >= end {
                return Err(malformed());
            }
            Ok(TokenId::MultiwordRange(start, end))
        } else if let Some((base, sub)) = s.split_once('.') {
            let base = parse_index(base).ok_or_else(malformed)?;
            let sub = parse_index(sub).filter(|&n| n > 0).ok_or_else(malformed)?;
            Ok(TokenId::Empty(base, sub))
        } else {
            parse_index(s)
                .filter(|&n| n > 0)
                .map(TokenId::Word)
                .ok_or_else(malformed)
        }
    }
}

/// Head of an enhanced dependency: the notional ROOT or a word/empty node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DepHead {
    Root,
    Node(TokenId),
}

impl DepHead {
    fn sort_key(self) -> (usize, usize) {
        match self {
            DepHead::Root => (0, 0),
            DepHead::Node(TokenId::Word(n)) => (n, 0),
            DepHead::Node(TokenId::Empty(base, sub)) => (base, sub),
            // Rejected on construction; keep the ordering total anyway.
            DepHead::Node(TokenId::MultiwordRange(start, _)) => (start, 0),
        }
    }
}

impl Ord for DepHead {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for DepHead {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DepHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepHead::Root => f.write_str("0"),
            DepHead::Node(id) => write!(f, "{}", id),
        }
    }
}

impl FromStr for DepHead {
    type Err = Violation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "0" {
            return Ok(DepHead::Root);
        }
        match s.parse::<TokenId>() {
            Ok(TokenId::MultiwordRange(..)) => Err(Violation::MultiwordHead(s.to_owned())),
            Ok(id) => Ok(DepHead::Node(id)),
            Err(_) => Err(Violation::MalformedDeps(s.to_owned())),
        }
    }
}

/// One entry of the DEPS column.
///
/// Entries order by head (empty nodes after their base word) and then by
/// label, which is the order used when writing DEPS.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dep {
    pub head: DepHead,
    pub label: String,
}

impl Dep {
    pub fn new(head: DepHead, label: impl Into<String>) -> Self {
        Dep {
            head,
            label: label.into(),
        }
    }
}

impl fmt::Display for Dep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.head, self.label)
    }
}

/// A single CoNLL-U line.
///
/// Columns that are unspecified hold the literal `"_"`, except HEAD, where
/// `"_"` is `None`, and FEATS/DEPS, where it is the empty list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: TokenId,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: Vec<(String, String)>,
    pub head: Option<usize>,
    pub deprel: String,
    pub deps: Vec<Dep>,
    pub misc: String,
}

impl Token {
    /// A token with the given id and form and every other column unspecified.
    pub fn new(id: TokenId, form: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: "_".into(),
            upos: "_".into(),
            xpos: "_".into(),
            feats: Vec::new(),
            head: None,
            deprel: "_".into(),
            deps: Vec::new(),
            misc: "_".into(),
        }
    }

    /// Value of a morphological feature.
    pub fn feature(&self, key: &str) -> Option<&str> {
        self.feats
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn feats_string(&self) -> String {
        if self.feats.is_empty() {
            return "_".to_owned();
        }
        let mut feats: Vec<_> = self.feats.iter().collect();
        feats.sort_by_key(|(k, _)| k.to_lowercase());
        feats
            .iter()
            .map(|(k, v)| format!("{}={}", k, v))
            .collect::<Vec<_>>()
            .join("|")
    }

    fn deps_string(&self) -> String {
        if self.deps.is_empty() {
            return "_".to_owned();
        }
        let mut deps: Vec<_> = self.deps.iter().collect();
        deps.sort();
        deps.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("|")
    }

    fn to_line(&self) -> String {
        let head = self
            .head
            .map(|h| h.to_string())
            .unwrap_or_else(|| "_".to_owned());
        [
            self.id.to_string(),
            self.form.clone(),
            self.lemma.clone(),
            self.upos.clone(),
            self.xpos.clone(),
            self.feats_string(),
            head,
            self.deprel.clone(),
            self.deps_string(),
            self.misc.clone(),
        ]
        .join("\t")
    }

    fn from_line(line: &str) -> Result<Self, Violation> {
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 10 {
            return Err(Violation::ColumnCount(columns.len()));
        }
        if let Some(idx) = columns.iter().position(|c| c.is_empty()) {
            return Err(Violation::EmptyField(idx + 1));
        }

        let id: TokenId = columns[0].parse()?;
        let head = match columns[6] {
            "_" => None,
            h => Some(parse_index(h).ok_or_else(|| Violation::MalformedHead(h.to_owned()))?),
        };

        Ok(Token {
            id,
            form: columns[1].to_owned(),
            lemma: columns[2].to_owned(),
            upos: columns[3].to_owned(),
            xpos: columns[4].to_owned(),
            feats: parse_feats(columns[5])?,
            head,
            deprel: columns[7].to_owned(),
            deps: parse_deps(columns[8])?,
            misc: columns[9].to_owned(),
        })
    }
}

fn parse_feats(s: &str) -> Result<Vec<(String, String)>, Violation> {
    if s == "_" {
        return Ok(Vec::new());
    }
    let mut feats: Vec<(String, String)> = Vec::new();
    for feat in s.split('|') {
        let (key, value) = feat
            .split_once('=')
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .ok_or_else(|| Violation::MalformedFeats(s.to_owned()))?;
        if feats.iter().any(|(k, _)| k == key) {
            return Err(Violation::DuplicateFeature(key.to_owned()));
        }
        feats.push((key.to_owned(), value.to_owned()));
    }
    Ok(feats)
}

fn parse_deps(s: &str) -> Result<Vec<Dep>, Violation> {
    if s == "_" {
        return Ok(Vec::new());
    }
    let mut deps: Vec<Dep> = Vec::new();
    for entry in s.split('|') {
        let (head, label) = entry
            .split_once(':')
            .filter(|(_, label)| !label.is_empty())
            .ok_or_else(|| Violation::MalformedDeps(entry.to_owned()))?;
        let dep = Dep::new(head.parse()?, label);
        if deps.contains(&dep) {
            return Err(Violation::DuplicateDep(entry.to_owned()));
        }
        deps.push(dep);
    }
    Ok(deps)
}

/// A CoNLL-U sentence: comment lines followed by token lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    /// Comment lines, verbatim and including the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(comments: Vec<String>, tokens: Vec<Token>) -> Self {
        Sentence { comments, tokens }
    }

    fn metadata(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let (k, v) = c.strip_prefix('#')?.split_once('=')?;
            (k.trim() == key).then(|| v.trim())
        })
    }

    /// The `# sent_id = ...` value, if present.
    pub fn sent_id(&self) -> Option<&str> {
        self.metadata("sent_id")
    }

    /// The `# text = ...` value, if present.
    pub fn text(&self) -> Option<&str> {
        self.metadata("text")
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.id.is_word())
    }

    pub fn empty_nodes(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.id.is_empty_node())
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }

    pub fn empty_count(&self) -> usize {
        self.empty_nodes().count()
    }

    /// Word `n` (1-based).
    pub fn word(&self, n: usize) -> Option<&Token> {
        self.words().nth(n.checked_sub(1)?)
    }

    pub fn token(&self, id: TokenId) -> Option<&Token> {
        self.tokens.iter().find(|t| t.id == id)
    }

    /// Copy of the sentence with empty nodes and every DEPS entry headed by
    /// an empty node removed.
    pub fn without_empty_nodes(&self) -> Sentence {
        let tokens = self
            .tokens
            .iter()
            .filter(|t| !t.id.is_empty_node())
            .map(|t| {
                let mut t = t.clone();
                t.deps
                    .retain(|d| !matches!(d.head, DepHead::Node(TokenId::Empty(..))));
                t
            })
            .collect();
        Sentence::new(self.comments.clone(), tokens)
    }

    /// Check the structural invariants of a sentence.
    ///
    /// On failure returns the position of the offending token in `tokens`
    /// (or `tokens.len()` for sentence-level problems) and the violation.
    pub fn check(&self) -> Result<(), (usize, Violation)> {
        let n_words = self.word_count();
        if n_words == 0 {
            return Err((self.tokens.len(), Violation::NoWords));
        }

        let mut next_word = 1;
        let mut next_empty = (0, 1);
        let mut range_end = 0;
        for (pos, token) in self.tokens.iter().enumerate() {
            match token.id {
                TokenId::Word(n) => {
                    if n != next_word {
                        return Err((pos, Violation::NonConsecutiveId(token.id.to_string())));
                    }
                    next_word += 1;
                    next_empty = (n, 1);
                    if let Some(head) = token.head {
                        if head > n_words {
                            return Err((pos, Violation::HeadOutOfRange(head.to_string())));
                        }
                        if head == n {
                            return Err((pos, Violation::SelfHead(token.id.to_string())));
                        }
                    }
                }
                TokenId::MultiwordRange(start, end) => {
                    if start != next_word || start <= range_end {
                        return Err((pos, Violation::MisplacedRange(token.id.to_string())));
                    }
                    if end > n_words {
                        return Err((pos, Violation::RangeOutOfBounds(token.id.to_string())));
                    }
                    range_end = end;
                    if token.head.is_some() || token.deprel != "_" || !token.deps.is_empty() {
                        return Err((pos, Violation::MultiwordSyntax(token.id.to_string())));
                    }
                }
                TokenId::Empty(base, sub) => {
                    if (base, sub) != next_empty || base + 1 != next_word {
                        return Err((pos, Violation::NonConsecutiveId(token.id.to_string())));
                    }
                    next_empty = (base, sub + 1);
                    if token.head.is_some() {
                        return Err((pos, Violation::EmptyNodeHead(token.id.to_string())));
                    }
                }
            }

            for dep in &token.deps {
                let exists = match dep.head {
                    DepHead::Root => true,
                    DepHead::Node(TokenId::Word(h)) => h <= n_words,
                    DepHead::Node(id @ TokenId::Empty(..)) => self.token(id).is_some(),
                    DepHead::Node(id @ TokenId::MultiwordRange(..)) => {
                        return Err((pos, Violation::MultiwordHead(id.to_string())))
                    }
                };
                if !exists {
                    return Err((pos, Violation::HeadOutOfRange(dep.head.to_string())));
                }
            }
        }
        Ok(())
    }
}

/// Reason a sentence or line is not well-formed.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Violation {
    #[error("expected 10 tab-separated columns, found {0}")]
    ColumnCount(usize),
    #[error("column {0} is empty")]
    EmptyField(usize),
    #[error("malformed id '{0}'")]
    MalformedId(String),
    #[error("malformed HEAD '{0}'")]
    MalformedHead(String),
    #[error("malformed FEATS '{0}'")]
    MalformedFeats(String),
    #[error("feature '{0}' appears more than once")]
    DuplicateFeature(String),
    #[error("malformed DEPS entry '{0}'")]
    MalformedDeps(String),
    #[error("duplicate DEPS entry '{0}'")]
    DuplicateDep(String),
    #[error("enhanced head '{0}' is a multiword token")]
    MultiwordHead(String),
    #[error("id '{0}' is out of sequence")]
    NonConsecutiveId(String),
    #[error("head '{0}' is out of range")]
    HeadOutOfRange(String),
    #[error("token '{0}' is its own head")]
    SelfHead(String),
    #[error("multiword range '{0}' is misplaced or overlaps another")]
    MisplacedRange(String),
    #[error("multiword range '{0}' extends past the last word")]
    RangeOutOfBounds(String),
    #[error("multiword range '{0}' has HEAD, DEPREL or DEPS")]
    MultiwordSyntax(String),
    #[error("empty node '{0}' has a basic HEAD")]
    EmptyNodeHead(String),
    #[error("comment line after token lines")]
    MisplacedComment,
    #[error("line contains only whitespace")]
    WhitespaceLine,
    #[error("sentence has no words")]
    NoWords,
}

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: Violation },
    #[error("token {token}: {reason}")]
    Invariant { token: String, reason: Violation },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ConlluError {
    /// Line number for parse errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConlluError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Default)]
struct PendingSentence {
    comments: Vec<String>,
    tokens: Vec<Token>,
    lines: Vec<usize>,
    first_line: usize,
}

impl PendingSentence {
    fn is_empty(&self) -> bool {
        self.comments.is_empty() && self.tokens.is_empty()
    }

    fn finish(self) -> Result<Sentence, ConlluError> {
        let sentence = Sentence::new(self.comments, self.tokens);
        sentence.check().map_err(|(pos, reason)| ConlluError::Parse {
            line: self.lines.get(pos).copied().unwrap_or(self.first_line),
            reason,
        })?;
        Ok(sentence)
    }
}

/// Parse a CoNLL-U document from a string.
pub fn parse_document(input: &str) -> Result<Vec<Sentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut pending = PendingSentence::default();

    for (idx, raw) in input.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            if !pending.is_empty() {
                sentences.push(std::mem::take(&mut pending).finish()?);
            }
            continue;
        }
        if pending.is_empty() {
            pending.first_line = line_no;
        }
        if line.trim().is_empty() {
            return Err(ConlluError::Parse {
                line: line_no,
                reason: Violation::WhitespaceLine,
            });
        }
        if line.starts_with('#') {
            if !pending.tokens.is_empty() {
                return Err(ConlluError::Parse {
                    line: line_no,
                    reason: Violation::MisplacedComment,
                });
            }
            pending.comments.push(line.to_owned());
            continue;
        }
        let token = Token::from_line(line).map_err(|reason| ConlluError::Parse {
            line: line_no,
            reason,
        })?;
        pending.tokens.push(token);
        pending.lines.push(line_no);
    }

    if !pending.is_empty() {
        sentences.push(pending.finish()?);
    }
    Ok(sentences)
}

/// Parse a CoNLL-U document from a reader.
pub fn read_document<R: BufRead>(mut reader: R) -> Result<Vec<Sentence>, ConlluError> {
    let mut input = String::new();
    reader.read_to_string(&mut input)?;
    parse_document(&input)
}

/// Write one sentence, followed by the terminating blank line.
pub fn write_sentence<W: Write>(mut writer: W, sentence: &Sentence) -> Result<(), ConlluError> {
    sentence
        .check()
        .map_err(|(pos, reason)| ConlluError::Invariant {
            token: sentence
                .tokens
                .get(pos)
                .map(|t| t.id.to_string())
                .unwrap_or_else(|| "<sentence>".to_owned()),
            reason,
        })?;
    for comment in &sentence.comments {
        writeln!(writer, "{}", comment)?;
    }
    for token in &sentence.tokens {
        writeln!(writer, "{}", token.to_line())?;
    }
    writeln!(writer)?;
    Ok(())
}

/// Serialize sentences to CoNLL-U with LF line endings.
pub fn serialize_document(sentences: &[Sentence]) -> Result<String, ConlluError> {
    let mut buf = Vec::new();
    for sentence in sentences {
        write_sentence(&mut buf, sentence)?;
    }
    Ok(String::from_utf8(buf).expect("CoNLL-U output is built from UTF-8 strings"))
}
