#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use std::path::PathBuf;

use poirec::corpus::{load_pois, load_profiles, PoiDocument, RatingScale, UserProfile};
use poirec::embeddings::EmbeddingStore;
use poirec::eval::Qrels;
use poirec::index::InvertedIndex;
use poirec::pipeline::PipelineConfig;
use poirec::tripctx::ContextKB;

pub const TOYS: [&str; 3] = ["toy_a", "toy_b", "toy_c"];

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct Fixture {
    pub name: &'static str,
    pub docs: Vec<PoiDocument>,
    pub profiles: Vec<UserProfile>,
    pub index: InvertedIndex,
    pub store: EmbeddingStore,
    pub kb: ContextKB,
    pub qrels: Qrels,
}

pub fn load(name: &'static str) -> Fixture {
    let dir = fixture_dir();
    let pc = PipelineConfig::default();
    let p = pc.build();
    let docs = load_pois(dir.join(name).join("pois.jsonl"), &p).unwrap();
    let profiles = load_profiles(dir.join(name).join("profiles.jsonl"), &p, RatingScale::default()).unwrap();
    let index = InvertedIndex::build(&docs, &pc).unwrap();
    let store = EmbeddingStore::load(dir.join("embeddings.txt")).unwrap();
    let kb = ContextKB::load(dir.join("kb_single.tsv"), dir.join("kb_joint.tsv"), &p).unwrap();
    let qrels = Qrels::load(dir.join(name).join("qrels.txt")).unwrap();
    Fixture {
        name,
        docs,
        profiles,
        index,
        store,
        kb,
        qrels,
    }
}
