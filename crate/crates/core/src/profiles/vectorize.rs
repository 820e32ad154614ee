//! Hashed term-frequency vectors over lowercased alphanumeric tokens.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 4096;
pub const MIN_DIM: usize = 16;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Splits on every non-alphanumeric character and lowercases.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Sparse vector with entries sorted by index and no explicit zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        SparseVec {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds from `(index, value)` pairs; duplicates are summed, zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            debug_assert!((i as usize) < dim);
            *acc.entry(i).or_default() += v;
        }
        SparseVec {
            dim,
            entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVec {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; the zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for (_, v) in &mut self.entries {
                *v /= n;
            }
        }
        self
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i as usize]).sum()
    }

    pub fn add_to(&self, dense: &mut [f64]) {
        for &(i, v) in &self.entries {
            dense[i as usize] += v;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_to(&mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingVectorizer {
    dim: usize,
}

impl Default for HashingVectorizer {
    fn default() -> Self {
        HashingVectorizer { dim: DEFAULT_DIM }
    }
}

impl HashingVectorizer {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < MIN_DIM {
            return Err(Error::Config(format!(
                "vector dimension {dim} is below the minimum of {MIN_DIM}"
            )));
        }
        Ok(HashingVectorizer { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bucket(&self, token: &str) -> u32 {
        (fnv1a64(token.as_bytes()) % self.dim as u64) as u32
    }

    /// Raw term counts per bucket, before normalization.
    pub fn term_counts<S: AsRef<str>>(&self, texts: &[S]) -> SparseVec {
        let pairs = texts
            .iter()
            .flat_map(|t| tokenize(t.as_ref()).map(|tok| (self.bucket(&tok), 1.0)).collect::<Vec<_>>());
        SparseVec::from_pairs(self.dim, pairs)
    }

    pub fn vectorize<S: AsRef<str>>(&self, texts: &[S]) -> SparseVec {
        self.term_counts(texts).normalized()
    }
}

/// One user's aggregated text vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UserVector {
    pub user: String,
    pub vector: SparseVec,
    pub record_count: usize,
}

pub fn vectorize_user<S: AsRef<str>>(
    user: &str,
    texts: &[S],
    vectorizer: &HashingVectorizer,
) -> UserVector {
    UserVector {
        user: user.to_string(),
        vector: vectorizer.vectorize(texts),
        record_count: texts.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        let toks: Vec<_> = tokenize("Solar-Wind, CO2!! é").collect();
        assert_eq!(toks, ["solar", "wind", "co2", "é"]);
    }

    #[test]
    fn solar_solar_wind_two_to_one() {
        let v = HashingVectorizer::default();
        let solar = v.bucket("solar");
        let wind = v.bucket("wind");
        assert_ne!(solar, wind);
        let counts = v.term_counts(&["solar solar wind"]);
        assert_eq!(counts.entries().len(), 2);
        let get = |b: u32| counts.entries().iter().find(|e| e.0 == b).unwrap().1;
        assert_eq!(get(solar), 2.0);
        assert_eq!(get(wind), 1.0);
        let unit = v.vectorize(&["solar solar wind"]);
        assert!((unit.norm() - 1.0).abs() < 1e-12);
        let ratio = unit.entries().iter().find(|e| e.0 == solar).unwrap().1
            / unit.entries().iter().find(|e| e.0 == wind).unwrap().1;
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solar_and_wind_buckets_match_hand_hash() {
        let v = HashingVectorizer::default();
        assert_eq!(v.bucket("solar") as u64, fnv1a64(b"solar") % 4096);
        assert_eq!(v.bucket("wind") as u64, fnv1a64(b"wind") % 4096);
    }

    #[test]
    fn empty_texts_give_zero_vector() {
        let v = HashingVectorizer::default();
        let u = vectorize_user::<&str>("u", &[], &v);
        assert!(u.vector.is_zero());
        assert_eq!(u.vector.norm(), 0.0);
        let u = vectorize_user("u", &["!!! ..."], &v);
        assert!(u.vector.is_zero());
        assert_eq!(u.record_count, 1);
    }

    #[test]
    fn identical_texts_identical_vectors() {
        let v = HashingVectorizer::new(64).unwrap();
        let a = vectorize_user("a", &["the same words", "again"], &v);
        let b = vectorize_user("b", &["the same words", "again"], &v);
        assert_eq!(a.vector, b.vector);
    }

    #[test]
    fn dimension_below_minimum_rejected() {
        assert!(HashingVectorizer::new(15).is_err());
        assert!(HashingVectorizer::new(16).is_ok());
    }

    #[test]
    fn sparse_dot_matches_dense() {
        let a = SparseVec::from_pairs(8, [(1, 2.0), (3, 1.0), (7, -1.0)]);
        let b = SparseVec::from_pairs(8, [(0, 5.0), (3, 4.0), (7, 2.0)]);
        let dense: f64 = a.to_dense().iter().zip(b.to_dense()).map(|(x, y)| x * y).sum();
        assert_eq!(a.dot(&b), dense);
        assert_eq!(a.dot_dense(&b.to_dense()), dense);
    }
}
