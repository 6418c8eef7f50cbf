use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{write_dataset, write_feature_file, DataError, DatasetCase, Split};
use crate::extract::{Dictionary, Extractor, RelationLexicon};
use crate::model::{FEATURE_COLS, FEATURE_ROWS};
use crate::tensor::Tensor;

/// Word lists and sizes for the synthetic report language. Every report
/// sentence reads `S1 R1 the O1 and S2 R2 the O2 .`, two triples per sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grammar {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    /// Size of the fixed triple pool cases draw from.
    pub pool_size: usize,
    /// Triples per case are drawn uniformly from the even numbers in this range.
    pub min_triples: usize,
    pub max_triples: usize,
    /// Standard deviation of per-case feature noise.
    pub noise: f64,
}

impl Default for Grammar {
    fn default() -> Self {
        let entities = [
            "fluorescence", "hemorrhage", "macular", "laser", "staining", "leakage", "microaneurysm", "exudate",
            "edema", "vessel", "disc", "retina", "choroid", "fovea", "neovascularization", "capillary",
            "nonperfusion", "drusen", "lesion", "pigment", "atrophy", "scar", "detachment", "hyperfluorescence",
        ];
        let relations = ["seen", "near", "under", "around", "along", "beyond", "within", "surrounding"];
        Self {
            entities: entities.iter().map(|s| s.to_string()).collect(),
            relations: relations.iter().map(|s| s.to_string()).collect(),
            pool_size: 48,
            min_triples: 2,
            max_triples: 4,
            noise: 0.5,
        }
    }
}

impl Grammar {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Grammar(m));
        if self.entities.len() < 2 {
            return bad(format!("need at least 2 entities, got {}", self.entities.len()));
        }
        if self.relations.is_empty() {
            return bad("need at least one relation".into());
        }
        let extractor = self.extractor();
        for w in self.entities.iter().chain(&self.relations) {
            let toks = extractor.analyze(w);
            if toks.len() != 1 || toks[0].surface != *w {
                return bad(format!("`{w}` must be a single lowercase word"));
            }
        }
        for r in &self.relations {
            if self.entities.contains(r) {
                return bad(format!("`{r}` is both an entity and a relation"));
            }
            let t = &extractor.analyze(r)[0];
            if extractor.relations.match_token(t) != Some(r.as_str()) {
                return bad(format!("relation `{r}` does not read back as itself"));
            }
        }
        let max_pool = self.entities.len() * (self.entities.len() - 1) * self.relations.len();
        if self.pool_size == 0 || self.pool_size > max_pool {
            return bad(format!("pool_size must be in 1..={max_pool}"));
        }
        let even = |k: usize| k > 0 && k.is_multiple_of(2);
        if !even(self.min_triples) || !even(self.max_triples) || self.min_triples > self.max_triples {
            return bad("triple counts must be positive, even, and ordered".into());
        }
        if self.max_triples > self.pool_size || 3 * self.max_triples > FEATURE_ROWS {
            return bad(format!("at most {} triples per case fit the feature rows", FEATURE_ROWS / 3));
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return bad("noise must be non-negative".into());
        }
        Ok(())
    }

    /// An extractor whose dictionary and relation lexicon are this grammar's words.
    pub fn extractor(&self) -> Extractor {
        let mut d = Dictionary::default();
        for e in &self.entities {
            d.insert(e);
        }
        let mut r = RelationLexicon::default();
        for w in &self.relations {
            r.insert(w);
        }
        Extractor::new(d, r)
    }

    /// Fixed pseudo-random code for `word` in role `role` (0 subject, 1 relation, 2 object).
    fn code(word: &str, role: usize) -> Vec<f64> {
        let digest = Sha256::digest(format!("{role}:{word}").as_bytes());
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..FEATURE_COLS).map(|_| rng.sample(StandardNormal)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    pub seed: u64,
    pub cases: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { seed: 0, cases: 200, train_fraction: 0.7, val_fraction: 0.15 }
    }
}

pub type WordTriple = (String, String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub case: DatasetCase,
    pub features: Tensor,
    /// The generating triples, in report order.
    pub triples: Vec<WordTriple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub grammar: Grammar,
    pub pool: Vec<WordTriple>,
    pub cases: Vec<SynthCase>,
}

fn report_text(triples: &[WordTriple]) -> String {
    triples
        .chunks(2)
        .map(|p| format!("{} {} the {} and {} {} the {} .", p[0].0, p[0].1, p[0].2, p[1].0, p[1].1, p[1].2))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generate a corpus: a fixed triple pool, then per case an even number of
/// pool triples, their report, and features whose row `3k + role` is the
/// code of triple `k`'s word in that role plus Gaussian noise.
pub fn synthesize_corpus(opts: &SynthOptions, grammar: &Grammar) -> Result<SynthCorpus, DataError> {
    grammar.validate()?;
    if opts.cases == 0 {
        return Err(DataError::Input("cannot synthesize an empty dataset".into()));
    }
    let ok_frac = |f: f64| (0.0..=1.0).contains(&f);
    if !ok_frac(opts.train_fraction) || !ok_frac(opts.val_fraction) || opts.train_fraction + opts.val_fraction > 1.0 {
        return Err(DataError::Input("split fractions must lie in [0, 1] and sum to at most 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut pool: Vec<WordTriple> = Vec::with_capacity(grammar.pool_size);
    while pool.len() < grammar.pool_size {
        let s = grammar.entities.choose(&mut rng).expect("entities");
        let r = grammar.relations.choose(&mut rng).expect("relations");
        let o = grammar.entities.choose(&mut rng).expect("entities");
        let t = (s.clone(), r.clone(), o.clone());
        if s != o && !pool.contains(&t) {
            pool.push(t);
        }
    }

    let mut codes: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    let mut code = |w: &str, role: usize| codes.entry((w.to_string(), role)).or_insert_with(|| Grammar::code(w, role)).clone();

    let n_train = (opts.cases as f64 * opts.train_fraction).round() as usize;
    let n_val = ((opts.cases as f64 * opts.val_fraction).round() as usize).min(opts.cases - n_train);
    let mut splits: Vec<Split> = (0..opts.cases)
        .map(|i| if i < n_train { Split::Train } else if i < n_train + n_val { Split::Val } else { Split::Test })
        .collect();
    splits.shuffle(&mut rng);

    let counts: Vec<usize> = (grammar.min_triples..=grammar.max_triples).step_by(2).collect();
    let mut cases = Vec::with_capacity(opts.cases);
    for (i, split) in splits.into_iter().enumerate() {
        let k = *counts.choose(&mut rng).expect("counts");
        let triples: Vec<WordTriple> = pool.choose_multiple(&mut rng, k).cloned().collect();
        let mut data = vec![0.0; FEATURE_ROWS * FEATURE_COLS];
        for (t, triple) in triples.iter().enumerate() {
            for (role, word) in [&triple.0, &triple.1, &triple.2].into_iter().enumerate() {
                let row = 3 * t + role;
                data[row * FEATURE_COLS..(row + 1) * FEATURE_COLS].copy_from_slice(&code(word, role));
            }
        }
        for v in &mut data {
            let noise: f64 = rng.sample(StandardNormal);
            *v = (*v + grammar.noise * noise) as f32 as f64;
        }
        let id = format!("case{i:04}");
        cases.push(SynthCase {
            case: DatasetCase {
                feature_path: Some(format!("features/{id}.ffaf")),
                id,
                split,
                report: report_text(&triples),
                synth_seed: None,
                n_images: None,
            },
            features: Tensor::new(vec![FEATURE_ROWS, FEATURE_COLS], data)?,
            triples,
        });
    }
    Ok(SynthCorpus { grammar: grammar.clone(), pool, cases })
}

impl SynthCorpus {
    pub fn dataset(&self) -> Vec<DatasetCase> {
        self.cases.iter().map(|c| c.case.clone()).collect()
    }

    /// `dataset.jsonl`, `grammar.json`, and one feature file per case under `features/`.
    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir.join("features"))?;
        write_dataset(BufWriter::new(fs::File::create(dir.join("dataset.jsonl"))?), &self.dataset())?;
        let grammar = serde_json::to_string_pretty(&self.grammar).map_err(|e| DataError::Input(e.to_string()))?;
        fs::write(dir.join("grammar.json"), grammar + "\n")?;
        for c in &self.cases {
            let path = dir.join(c.case.feature_path.as_deref().expect("synthetic cases have feature paths"));
            write_feature_file(BufWriter::new(fs::File::create(path)?), &c.features)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grammar_is_valid() {
        Grammar::default().validate().unwrap();
    }

    #[test]
    fn rejects_tiny_grammar_and_empty_corpus() {
        let g = Grammar { entities: vec!["macular".into()], ..Grammar::default() };
        assert!(matches!(g.validate(), Err(DataError::Grammar(_))));
        let opts = SynthOptions { cases: 0, ..SynthOptions::default() };
        assert!(synthesize_corpus(&opts, &Grammar::default()).is_err());
    }

    #[test]
    fn report_layout() {
        let t = |a: &str, b: &str, c: &str| (a.to_string(), b.to_string(), c.to_string());
        let r = report_text(&[t("a", "near", "b"), t("c", "under", "d")]);
        assert_eq!(r, "a near the b and c under the d .");
    }
}
