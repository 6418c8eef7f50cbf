use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub type TokenId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: TokenId,
    pub relation: TokenId,
    pub object: TokenId,
}

impl Triple {
    pub fn new(subject: TokenId, relation: TokenId, object: TokenId) -> Self {
        Self { subject, relation, object }
    }

    pub fn ids(&self) -> [TokenId; 3] {
        [self.subject, self.relation, self.object]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub report_id: String,
    pub sentence: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

/// Deduplicated triples in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct ClinicalGraph {
    triples: Vec<Triple>,
    counts: Vec<usize>,
    provenance: Vec<Vec<Provenance>>,
    index: HashMap<Triple, usize>,
}

impl PartialEq for ClinicalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples && self.counts == other.counts && self.provenance == other.provenance
    }
}

impl ClinicalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one occurrence; returns true when the triple is new.
    pub fn add(&mut self, triple: Triple, source: Option<Provenance>) -> bool {
        let (i, fresh) = match self.index.get(&triple) {
            Some(&i) => (i, false),
            None => {
                let i = self.triples.len();
                self.triples.push(triple);
                self.counts.push(0);
                self.provenance.push(Vec::new());
                self.index.insert(triple, i);
                (i, true)
            }
        };
        self.counts[i] += 1;
        if let Some(p) = source {
            if !self.provenance[i].contains(&p) {
                self.provenance[i].push(p);
            }
        }
        fresh
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn count(&self, i: usize) -> usize {
        self.counts[i]
    }

    pub fn provenance(&self, i: usize) -> &[Provenance] {
        &self.provenance[i]
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.index.contains_key(t)
    }

    pub fn position(&self, t: &Triple) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entity_set(&self) -> BTreeSet<TokenId> {
        self.triples.iter().flat_map(|t| [t.subject, t.object]).collect()
    }

    pub fn relation_set(&self) -> BTreeSet<TokenId> {
        self.triples.iter().map(|t| t.relation).collect()
    }

    pub fn stats(&self) -> GraphStats {
        graph_stats(self)
    }
}

pub fn graph_stats(g: &ClinicalGraph) -> GraphStats {
    GraphStats { entities: g.entity_set().len(), relations: g.relation_set().len(), triples: g.len() }
}
