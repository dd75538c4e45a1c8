use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::triples::{Pair, TripleStore};
use super::vocab::{EntityId, RelationKind, Vocabulary};
use crate::error::{Error, Result};

/// Train/validation/test partition of a KB plus OpenIE graph.
///
/// Validation and test hold only the KB triples of held-out pairs; training
/// holds everything else, including every OpenIE triple.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub train: TripleStore,
    pub valid: TripleStore,
    pub test: TripleStore,
    pub seed: u64,
    pub held_out_fraction: f64,
}

/// Stable 64-bit mix of a pair, independent of the split seed.
pub fn pair_hash((s, o): Pair) -> u64 {
    let mut z = ((s.0 as u64) << 32 | o.0 as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// KB pairs that also carry at least one OpenIE predicate.
pub fn eligible_pairs(kb: &TripleStore, openie: &TripleStore) -> Vec<Pair> {
    kb.pairs()
        .map(|(p, _)| *p)
        .filter(|p| openie.has_pair(*p))
        .collect()
}

pub fn split_holdout(kb: &TripleStore, openie: &TripleStore, fraction: f64, seed: u64) -> Result<SplitSpec> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "hold-out fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut eligible = eligible_pairs(kb, openie);
    if eligible.is_empty() {
        return Err(Error::NoEligiblePair);
    }
    let n = ((fraction * eligible.len() as f64).round() as usize).clamp(1, eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    eligible.truncate(n);
    Ok(SplitSpec::from_held_out(kb, openie, &eligible, seed, fraction))
}

impl SplitSpec {
    /// Builds a split from an explicit set of held-out pairs. Held-out pairs
    /// are ordered by a pair hash; the first half (rounded up) become test.
    pub fn from_held_out(
        kb: &TripleStore,
        openie: &TripleStore,
        held_out: &[Pair],
        seed: u64,
        held_out_fraction: f64,
    ) -> Self {
        let mut ordered: Vec<Pair> = held_out.to_vec();
        ordered.sort_by_key(|&p| (pair_hash(p), p));
        ordered.dedup();
        let n_test = ordered.len().div_ceil(2);
        let test_pairs: BTreeSet<Pair> = ordered[..n_test].iter().copied().collect();
        let valid_pairs: BTreeSet<Pair> = ordered[n_test..].iter().copied().collect();
        Self::from_partition(kb, openie, &test_pairs, &valid_pairs, seed, held_out_fraction)
    }

    /// Builds a split from explicit test and validation pair sets. Training
    /// keeps every OpenIE triple and the KB triples of all other pairs.
    pub fn from_partition(
        kb: &TripleStore,
        openie: &TripleStore,
        test_pairs: &BTreeSet<Pair>,
        valid_pairs: &BTreeSet<Pair>,
        seed: u64,
        held_out_fraction: f64,
    ) -> Self {
        let mut train = kb.filtered(|t| !test_pairs.contains(&t.pair()) && !valid_pairs.contains(&t.pair()));
        train.extend_from(openie);
        SplitSpec {
            train,
            valid: kb.filtered(|t| valid_pairs.contains(&t.pair())),
            test: kb.filtered(|t| test_pairs.contains(&t.pair())),
            seed,
            held_out_fraction,
        }
    }

    pub fn test_pairs(&self) -> Vec<Pair> {
        self.test.pairs().map(|(p, _)| *p).collect()
    }

    pub fn valid_pairs(&self) -> Vec<Pair> {
        self.valid.pairs().map(|(p, _)| *p).collect()
    }

    pub fn held_out_pairs(&self) -> BTreeSet<Pair> {
        self.test
            .pairs()
            .chain(self.valid.pairs())
            .map(|(p, _)| *p)
            .collect()
    }

    /// Entities that occur in a training KB triple, i.e. the ones an
    /// entity-parameterized model can learn an embedding for.
    pub fn seen_entities(&self) -> BTreeSet<EntityId> {
        self.train
            .with_source(RelationKind::Kb)
            .flat_map(|t| [t.subject, t.object])
            .collect()
    }

    pub fn write(&self, dir: &Path, vocab: &Vocabulary) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = format!(
            "seed\t{}\nfraction\t{}\n",
            self.seed, self.held_out_fraction
        );
        let manifest = dir.join("split.txt");
        fs::write(&manifest, header).map_err(|e| Error::io(&manifest, e))?;
        vocab.write(&dir.join("vocab.tsv"))?;
        self.train.write_tsv(&dir.join("train.tsv"), vocab)?;
        self.valid.write_tsv(&dir.join("valid.tsv"), vocab)?;
        self.test.write_tsv(&dir.join("test.tsv"), vocab)
    }

    pub fn read(dir: &Path) -> Result<(Vocabulary, SplitSpec)> {
        let manifest = dir.join("split.txt");
        let header = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let mut seed = None;
        let mut fraction = None;
        for (n, line) in header.lines().enumerate() {
            let bad = || Error::MalformedLine {
                line: n + 1,
                reason: format!("bad split header `{line}`"),
            };
            match line.split_once('\t') {
                Some(("seed", v)) => seed = Some(v.parse().map_err(|_| bad())?),
                Some(("fraction", v)) => fraction = Some(v.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let (Some(seed), Some(held_out_fraction)) = (seed, fraction) else {
            return Err(Error::InvalidConfig(format!(
                "{} lacks seed or fraction",
                manifest.display()
            )));
        };
        let mut vocab = Vocabulary::read(&dir.join("vocab.tsv"))?;
        let train = TripleStore::read_tsv(&dir.join("train.tsv"), &mut vocab)?;
        let valid = TripleStore::read_tsv(&dir.join("valid.tsv"), &mut vocab)?;
        let test = TripleStore::read_tsv(&dir.join("test.tsv"), &mut vocab)?;
        Ok((
            vocab,
            SplitSpec {
                train,
                valid,
                test,
                seed,
                held_out_fraction,
            },
        ))
    }
}
