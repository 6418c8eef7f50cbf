use cgt_core::data::{synthesize_corpus, Grammar, Split, SynthOptions};
use cgt_core::extract::io::{read_graph_tsv, write_graph_tsv};
use cgt_core::extract::{build_clinical_graph, split_sentences, ExtractError, Extractor, ReportRef};
use cgt_core::vocab::{Vocabulary, UNK};
use proptest::prelude::*;

const EXAMPLE: &str = "Spotted obscured fluorescence (hemorrhage?) was seen at the inferior edge of the macular arch ring during left eye imaging.";

fn canon(ex: &Extractor, text: &str) -> Vec<(String, String, String)> {
    ex.extract_text(text)
        .into_iter()
        .map(|s| {
            let (a, b, c) = s.triple.canonical();
            (a.into(), b.into(), c.into())
        })
        .collect()
}

#[test]
fn example_sentence() {
    let got = canon(&Extractor::default(), EXAMPLE);
    assert_eq!(
        got,
        [
            ("fluorescence".to_string(), "seen".to_string(), "macular".to_string()),
            ("hemorrhage".to_string(), "seen".to_string(), "macular".to_string())
        ]
    );
}

#[test]
fn graph_comes_from_train_only() {
    let ex = Extractor::default();
    let vocab = Vocabulary::build([EXAMPLE], 1).unwrap();
    let reports = [
        ReportRef { id: "a", split: Some(Split::Train), text: EXAMPLE },
        ReportRef { id: "b", split: Some(Split::Test), text: EXAMPLE },
    ];
    match build_clinical_graph(&reports, &ex, &vocab) {
        Err(ExtractError::Leakage { id, split }) => assert_eq!((id.as_str(), split), ("b", Split::Test)),
        other => panic!("expected a leakage error, got {other:?}"),
    }
    let g = build_clinical_graph(&reports[..1], &ex, &vocab).unwrap();
    assert_eq!(g.len(), 2);
    // re-running on the same report adds nothing new
    let twice = build_clinical_graph(&[reports[0], reports[0]], &ex, &vocab).unwrap();
    assert_eq!(twice.triples(), g.triples());
}

#[test]
fn rare_words_map_to_unk() {
    let vocab = Vocabulary::build(["macular edema edema edema", "macular leak"], 3).unwrap();
    assert_eq!(vocab.encode("macular edema"), vec![UNK, vocab.id("edema").unwrap()]);
    assert!(Vocabulary::build(std::iter::empty::<&str>(), 3).is_err());
}

#[test]
fn graph_tsv_round_trip() {
    let vocab = Vocabulary::build([EXAMPLE], 1).unwrap();
    let g = build_clinical_graph(&[ReportRef { id: "a", split: None, text: EXAMPLE }], &Extractor::default(), &vocab).unwrap();
    let mut buf = Vec::new();
    write_graph_tsv(&mut buf, &g, &vocab).unwrap();
    let back = read_graph_tsv(&buf[..], &vocab).unwrap();
    assert_eq!(back.triples(), g.triples());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthetic_reports_parse_back(seed in 0u64..10_000) {
        let grammar = Grammar::default();
        let corpus = synthesize_corpus(&SynthOptions { seed, cases: 20, ..SynthOptions::default() }, &grammar).unwrap();
        let ex = grammar.extractor();
        for c in &corpus.cases {
            prop_assert_eq!(canon(&ex, &c.case.report), c.triples.clone());
        }
    }

    #[test]
    fn triples_stay_within_sentences(seed in 0u64..10_000) {
        let grammar = Grammar::default();
        let corpus = synthesize_corpus(&SynthOptions { seed, cases: 10, ..SynthOptions::default() }, &grammar).unwrap();
        let ex = grammar.extractor();
        for c in &corpus.cases {
            let tokens = ex.analyze(&c.case.report);
            let sentences = split_sentences(&tokens);
            for st in ex.extract_text(&c.case.report) {
                let words: Vec<&str> = tokens[sentences[st.sentence].clone()].iter().map(|t| t.surface.as_str()).collect();
                let (s, r, o) = st.triple.canonical();
                prop_assert!(words.contains(&s) && words.contains(&r) && words.contains(&o));
            }
        }
    }

    #[test]
    fn graph_counts_are_bounded(seed in 0u64..10_000) {
        let grammar = Grammar::default();
        let corpus = synthesize_corpus(&SynthOptions { seed, cases: 15, ..SynthOptions::default() }, &grammar).unwrap();
        let texts: Vec<&str> = corpus.cases.iter().map(|c| c.case.report.as_str()).collect();
        let vocab = Vocabulary::build(texts.iter().copied(), 1).unwrap();
        let refs: Vec<ReportRef<'_>> = corpus.cases.iter().map(|c| ReportRef { id: &c.case.id, split: None, text: &c.case.report }).collect();
        let g = build_clinical_graph(&refs, &grammar.extractor(), &vocab).unwrap();
        let st = g.stats();
        prop_assert!(st.entities <= 2 * st.triples && st.relations <= st.triples);
        for t in g.triples() {
            for id in t.ids() {
                prop_assert!(id >= 4 && id < vocab.len());
            }
        }
    }

    #[test]
    fn vocab_round_trip(words in proptest::collection::vec("[a-z]{1,6}", 1..30)) {
        let text = words.join(" ");
        let vocab = Vocabulary::build([text.as_str()], 1).unwrap();
        let ids = vocab.encode(&text);
        let decoded = vocab.decode(&ids).join(" ");
        prop_assert_eq!(vocab.encode(&decoded), ids);
    }
}
