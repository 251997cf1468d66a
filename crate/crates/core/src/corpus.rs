//! Deterministic benchmark corpora.
//!
//! `MarkovText` walks an order-2 byte chain whose transition counts come from
//! the English sample text in `data/markov_seed.txt`. The sample is read
//! cyclically, so every context has at least one successor.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_CORPUS_SIZE: usize = 1 << 30;

const MARKOV_SEED_TEXT: &[u8] = include_bytes!("../data/markov_seed.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Zeros,
    UniformRandom,
    MarkovText,
}

impl CorpusKind {
    pub const ALL: [CorpusKind; 3] = [CorpusKind::Zeros, CorpusKind::UniformRandom, CorpusKind::MarkovText];

    pub fn name(self) -> &'static str {
        match self {
            CorpusKind::Zeros => "zeros",
            CorpusKind::UniformRandom => "uniform_random",
            CorpusKind::MarkovText => "markov_text",
        }
    }
}

impl std::str::FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorpusKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown corpus kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Corpus {
    pub kind: CorpusKind,
    pub size: usize,
    pub seed: u64,
}

impl Corpus {
    pub fn new(kind: CorpusKind, size: usize, seed: u64) -> Self {
        Self { kind, size, seed }
    }
}

/// Order-2 transition table: for each two-byte context, the observed
/// successors and their cumulative counts.
struct MarkovTable {
    successors: Vec<Vec<u8>>,
    cumulative: Vec<Vec<u32>>,
}

impl MarkovTable {
    fn from_sample(text: &[u8]) -> Self {
        let n = text.len();
        let mut triples: Vec<(usize, u8)> = (0..n)
            .map(|i| {
                let ctx = (text[i] as usize) << 8 | text[(i + 1) % n] as usize;
                (ctx, text[(i + 2) % n])
            })
            .collect();
        triples.sort_unstable();
        let mut successors = vec![Vec::new(); 1 << 16];
        let mut cumulative: Vec<Vec<u32>> = vec![Vec::new(); 1 << 16];
        for (ctx, next) in triples {
            let total = cumulative[ctx].last().copied().unwrap_or(0) + 1;
            if successors[ctx].last() == Some(&next) {
                *cumulative[ctx].last_mut().unwrap() = total;
            } else {
                successors[ctx].push(next);
                cumulative[ctx].push(total);
            }
        }
        Self {
            successors,
            cumulative,
        }
    }

    fn next(&self, ctx: usize, rng: &mut ChaCha8Rng) -> u8 {
        let cum = &self.cumulative[ctx];
        let total = *cum.last().expect("cyclic sample gives every seen context a successor");
        let pick = rng.next_u32() % total;
        let i = cum.partition_point(|&c| c <= pick);
        self.successors[ctx][i]
    }
}

fn markov_table() -> &'static MarkovTable {
    static TABLE: OnceLock<MarkovTable> = OnceLock::new();
    TABLE.get_or_init(|| MarkovTable::from_sample(MARKOV_SEED_TEXT))
}

/// Generates the corpus bytes; identical for identical `(kind, size, seed)`.
pub fn gen_corpus(c: &Corpus) -> Result<Vec<u8>> {
    if c.size > MAX_CORPUS_SIZE {
        return Err(Error::InputTooLarge {
            len: c.size as u64,
            max: MAX_CORPUS_SIZE as u64,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    Ok(match c.kind {
        CorpusKind::Zeros => vec![0; c.size],
        CorpusKind::UniformRandom => {
            let mut out = vec![0; c.size];
            rng.fill_bytes(&mut out);
            out
        }
        CorpusKind::MarkovText => {
            let table = markov_table();
            let mut out = Vec::with_capacity(c.size);
            // Start at a seed-chosen position of the sample.
            let start = (rng.next_u64() % MARKOV_SEED_TEXT.len() as u64) as usize;
            let n = MARKOV_SEED_TEXT.len();
            let (mut a, mut b) = (MARKOV_SEED_TEXT[start], MARKOV_SEED_TEXT[(start + 1) % n]);
            for _ in 0..c.size {
                let next = table.next((a as usize) << 8 | b as usize, &mut rng);
                out.push(next);
                (a, b) = (b, next);
            }
            out
        }
    })
}
