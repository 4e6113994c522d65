use evjoint::corpus::{parse_corpus, write_corpus};
use evjoint::schema::LabelSchema;
use evjoint::synth::{gen_synth, SynthConfig};

#[test]
fn generated_documents_validate() {
    let schema = LabelSchema::bundled();
    let corpus = gen_synth(&SynthConfig::default(), &schema).unwrap();
    assert_eq!((corpus.train.len(), corpus.dev.len(), corpus.test.len()), (200, 40, 30));
    for d in corpus.train.iter().chain(&corpus.dev).chain(&corpus.test) {
        d.validate(&schema).unwrap();
        for ev in &d.gold_events {
            for arg in &ev.arguments {
                let ok = schema
                    .is_valid_config(&ev.event_type, &arg.role, &d.gold_entities[arg.entity].entity_type)
                    .unwrap();
                assert!(ok, "{}: {} {} {}", d.doc_id, ev.event_type, arg.role, d.gold_entities[arg.entity].entity_type);
            }
        }
    }
}

#[test]
fn same_seed_same_corpus() {
    let schema = LabelSchema::bundled();
    let cfg = SynthConfig { n_train: 20, n_dev: 5, n_test: 5, ..SynthConfig::default() };
    let a = gen_synth(&cfg, &schema).unwrap();
    let b = gen_synth(&cfg, &schema).unwrap();
    assert_eq!(a, b);
    let c = gen_synth(&SynthConfig { seed: 7, ..cfg }, &schema).unwrap();
    assert_ne!(a.train, c.train);
}

#[test]
fn empty_split_round_trips_to_empty_file() {
    let schema = LabelSchema::bundled();
    let cfg = SynthConfig { n_train: 0, n_dev: 1, n_test: 0, ..SynthConfig::default() };
    let corpus = gen_synth(&cfg, &schema).unwrap();
    let mut buf = Vec::new();
    write_corpus(&mut buf, &corpus.train).unwrap();
    assert!(buf.is_empty());
    buf.clear();
    write_corpus(&mut buf, &corpus.dev).unwrap();
    let back = parse_corpus(&buf[..], &schema, std::path::Path::new("dev.jsonl")).unwrap();
    assert_eq!(back, corpus.dev);
}

#[test]
fn about_one_sentence_in_ten_has_no_event() {
    let schema = LabelSchema::bundled();
    let corpus = gen_synth(&SynthConfig::default(), &schema).unwrap();
    let (mut total, mut empty) = (0usize, 0usize);
    for d in &corpus.train {
        for s in 0..d.sentences.len() {
            total += 1;
            if !d.gold_events.iter().any(|e| e.trigger.sentence == s) {
                empty += 1;
            }
        }
    }
    let rate = empty as f64 / total as f64;
    assert!((0.05..0.15).contains(&rate), "{rate}");
}
