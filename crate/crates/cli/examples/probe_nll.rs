// temporary probe: localize residual teacher-forced NLL per step
use parsql::checkpoint;
use parsql_core::grammar::Grammar;
use parsql_core::nn::Tape;
use parsql_core::sql::SqlGrammar;
use parsql_core::train::TrainConfig;
use parsql_core::{corpus, decoder, encoder};

fn main() {
    let g = Grammar::load(parsql_core::DEFAULT_GRAMMAR).unwrap();
    let sg = SqlGrammar::resolve(&g).unwrap();
    let dataset = std::fs::read_to_string("/tmp/ovf/dataset.txt").unwrap();
    let schemas = std::fs::read_to_string("/tmp/ovf/schemas.txt").unwrap();
    let raws = corpus::parse_dataset(&dataset).unwrap();
    let cat = corpus::parse_schemas(&schemas).unwrap();
    let c = corpus::Corpus::prepare(&g, &sg, cat, &raws).unwrap();
    let (model, store) = checkpoint::load(std::path::Path::new("/tmp/ovf/model.ckpt"), &g).unwrap();
    let cfg = TrainConfig::default();
    for (i, ex) in c.examples.iter().enumerate() {
        let schema = c.schema_of(ex);
        let mut tape = Tape::new(&store);
        let enc = encoder::encode(&mut tape, &model, &ex.question, schema);
        let steps = decoder::teacher_force(&mut tape, &model, &g, &enc, &ex.ast, &ex.trace, cfg.mode).unwrap();
        for (t, s) in steps.iter().enumerate() {
            let v = tape.scalar(s.nll);
            if v > 0.1 {
                println!("ex {i:2} step {t:3} clause {:?} nll {v:.3} action {:?}", s.clause, s.action);
            }
        }
    }
}
