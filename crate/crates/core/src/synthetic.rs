//! Small planted data sets for demos and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affinity::SigmaMatrix;
use crate::corpus::Document;

/// Vocabularies of the two planted topics.
pub const TOPIC_A: [&str; 5] = ["lithium", "serotonin", "receptor", "dosage", "plasma"];
pub const TOPIC_B: [&str; 5] = ["firearm", "storage", "legislation", "homicide", "rural"];

/// A foreground of `2 * per_topic` documents, half drawing four of the five
/// [`TOPIC_A`] words and half four of [`TOPIC_B`], plus a background made of
/// the foreground and `filler` documents over an unrelated vocabulary.
pub fn planted_corpus(per_topic: usize, filler: usize, seed: u64) -> (Vec<Document>, Vec<Document>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fg = Vec::with_capacity(2 * per_topic);
    for (t, vocab) in [TOPIC_A, TOPIC_B].iter().enumerate() {
        for k in 0..per_topic {
            let mut words = vocab.to_vec();
            words.shuffle(&mut rng);
            words.truncate(4);
            let tag = if t == 0 { "Pharmacology" } else { "Firearms" };
            fg.push(Document::new(format!("{}", 1000 + t * per_topic + k), words.join(" ")).with_tags([tag]));
        }
    }
    let mut bg = fg.clone();
    for k in 0..filler {
        let words: Vec<String> = (0..6).map(|_| format!("filler{}", rng.gen_range(0..60))).collect();
        bg.push(Document::new(format!("{}", 5000 + k), words.join(" ")));
    }
    (fg, bg)
}

/// Block-diagonal matrix: `within` inside each of `blocks` blocks of `size`
/// points, `across` between blocks.
pub fn planted_blocks(blocks: usize, size: usize, within: f64, across: f64) -> SigmaMatrix {
    SigmaMatrix::from_fn(blocks * size, |i, j| if i / size == j / size { within } else { across })
}

/// Entries uniform in [lo, hi).
pub fn uniform_matrix(order: usize, lo: f64, hi: f64, seed: u64) -> SigmaMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SigmaMatrix::from_fn(order, |_, _| rng.gen_range(lo..hi))
}
