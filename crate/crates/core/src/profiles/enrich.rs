use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::vectorize::{tokenize, HashingVectorizer, SparseVec};
use super::AgentProfile;
use crate::error::{Error, Result};

pub const KEYWORD_COUNT: usize = 10;

/// Term to emotion lexicon, loaded from a `term,emotion` CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    terms: HashMap<String, Vec<String>>,
    emotions: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut lex = Lexicon::default();
        for (term, emotion) in pairs {
            lex.insert(term, emotion);
        }
        lex
    }

    fn insert(&mut self, term: &str, emotion: &str) {
        let emotion = emotion.trim().to_string();
        let entry = self.terms.entry(term.trim().to_lowercase()).or_default();
        if !entry.contains(&emotion) {
            entry.push(emotion.clone());
        }
        self.emotions.insert(emotion);
    }

    /// Loads the lexicon; a missing file is a configuration error.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Config(format!("lexicon {} not found", path.display())));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::parse(path, e))?;
        let mut lex = Lexicon::default();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| Error::parse(path, e))?;
            if row.len() != 2 {
                return Err(Error::parse(path, format!("row {}: expected term,emotion", i + 1)));
            }
            if i == 0 && &row[0] == "term" && &row[1] == "emotion" {
                continue;
            }
            lex.insert(&row[0], &row[1]);
        }
        Ok(lex)
    }

    pub fn emotions(&self) -> &BTreeSet<String> {
        &self.emotions
    }

    pub fn lookup(&self, token: &str) -> &[String] {
        self.terms.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Average sentence length in tokens, and the share of sentences ending in `?` / `!`.
pub fn style_features<S: AsRef<str>>(texts: &[S]) -> BTreeMap<String, f64> {
    let (mut sentences, mut tokens, mut questions, mut exclaims) = (0usize, 0usize, 0usize, 0usize);
    for text in texts {
        let text = text.as_ref();
        let mut start = 0;
        let bytes = text.as_bytes();
        let mut i = 0;
        while i <= bytes.len() {
            let at_end = i == bytes.len();
            if at_end || matches!(bytes[i], b'.' | b'!' | b'?') {
                let mut j = i;
                while j < bytes.len() && matches!(bytes[j], b'.' | b'!' | b'?') {
                    j += 1;
                }
                let segment = &text[start..i];
                let n = tokenize(segment).count();
                if n > 0 {
                    sentences += 1;
                    tokens += n;
                    let terminator = &text[i..j];
                    if terminator.contains('?') {
                        questions += 1;
                    } else if terminator.contains('!') {
                        exclaims += 1;
                    }
                }
                start = j;
                i = j.max(i + 1);
            } else {
                i += 1;
            }
        }
    }
    let rate = |n: usize| if sentences == 0 { 0.0 } else { n as f64 / sentences as f64 };
    BTreeMap::from([
        ("avg_sentence_length".to_string(), rate(tokens)),
        ("question_rate".to_string(), rate(questions)),
        ("exclamation_rate".to_string(), rate(exclaims)),
    ])
}

fn camel(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Fills keywords, label, emotion frequencies and style features.
///
/// `member_texts` holds one text list per member. Keywords are the heaviest
/// buckets of the normalized mean of member vectors, each shown as its most
/// frequent original token.
pub fn enrich<S: AsRef<str>>(
    mut agent: AgentProfile,
    member_texts: &[&[S]],
    vectorizer: &HashingVectorizer,
    lexicon: &Lexicon,
) -> AgentProfile {
    let mut centroid = vec![0.0; vectorizer.dim()];
    let mut bucket_tokens: HashMap<u32, BTreeMap<String, usize>> = HashMap::new();
    let mut emotion_hits: BTreeMap<String, usize> =
        lexicon.emotions().iter().map(|e| (e.clone(), 0)).collect();
    let mut token_total = 0usize;

    for texts in member_texts {
        vectorizer.vectorize(texts).add_to(&mut centroid);
        for text in texts.iter() {
            for tok in tokenize(text.as_ref()) {
                token_total += 1;
                for emotion in lexicon.lookup(&tok) {
                    *emotion_hits.get_mut(emotion).expect("lexicon emotion") += 1;
                }
                *bucket_tokens
                    .entry(vectorizer.bucket(&tok))
                    .or_default()
                    .entry(tok)
                    .or_default() += 1;
            }
        }
    }

    let centroid = SparseVec::from_dense(&centroid).normalized();
    let mut ranked: Vec<(u32, f64)> = centroid.entries().to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    agent.keywords = ranked
        .iter()
        .take(KEYWORD_COUNT)
        .filter_map(|(bucket, _)| {
            bucket_tokens.get(bucket).and_then(|toks| {
                toks.iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(t, _)| t.clone())
            })
        })
        .collect();
    if !agent.keywords.is_empty() && agent.agent_id != super::RESIDUAL_AGENT {
        agent.label = agent.keywords.iter().take(2).map(|k| camel(k)).collect();
    }
    agent.emotion = emotion_hits
        .into_iter()
        .map(|(e, n)| {
            let f = if token_total == 0 { 0.0 } else { n as f64 / token_total as f64 };
            (e, f)
        })
        .collect();
    let all: Vec<&str> = member_texts
        .iter()
        .flat_map(|t| t.iter().map(|s| s.as_ref()))
        .collect();
    agent.style = style_features(&all);
    agent
}
