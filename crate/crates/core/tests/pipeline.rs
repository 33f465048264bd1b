mod support {
    pub mod corpus_oracle;
}

use marketlens_core::enrichment::SkillLibrary;
use marketlens_core::fixtures;
use marketlens_core::ingestion::{SourceKind, SourceSpec};
use marketlens_core::par::Execution;
use marketlens_core::pipeline::{Pipeline, PipelineSummary};
use marketlens_core::store::{DocumentStatus, Store, StoreChecksum};
use support::corpus_oracle::corpus_oracle;

fn run_bundled(strict: bool, exec: Execution) -> (Store, PipelineSummary, StoreChecksum) {
    let entries = SkillLibrary::parse_entries(&std::fs::read_to_string(fixtures::skills_path()).unwrap()).unwrap();
    let embedder = fixtures::library_embedder(&entries);
    let library = SkillLibrary::build(entries, &embedder, exec).unwrap();
    let chat = fixtures::load_document_script(&fixtures::extraction_script_path(strict)).unwrap();
    let store = Store::open_in_memory().unwrap();
    let source = SourceSpec::new(SourceKind::File, fixtures::corpus_path().to_string_lossy()).unwrap();
    let summary = Pipeline::new(&store, &chat, &embedder)
        .with_library(&library)
        .with_execution(exec)
        .run(&source)
        .unwrap();
    let checksum = store.checksum().unwrap();
    (store, summary, checksum)
}

#[test]
fn bundled_corpus_counts() {
    let (store, s, _) = run_bundled(true, Execution::Parallel);
    assert_eq!((s.fetched, s.stored, s.duplicates_skipped), (50, 45, 5));
    assert_eq!((s.extracted, s.quarantined, s.deferred), (43, 2, 0), "{:?}", s.provider_errors);
    assert_eq!(s.labeled, 43);
    assert_eq!(store.job_count().unwrap(), 43);
    for job in store.jobs().unwrap() {
        assert_eq!(store.labels_for(&job.job_id).unwrap().len(), 10);
    }
    assert_eq!(store.documents(DocumentStatus::Quarantined).unwrap().len(), 2);
    assert_eq!(store.documents(DocumentStatus::Pending).unwrap().len(), 0);
}

#[test]
fn clean_script_extracts_everything() {
    let (_, s, _) = run_bundled(false, Execution::Sequential);
    assert_eq!((s.extracted, s.quarantined), (45, 0));
}

#[test]
fn reruns_are_checksum_identical() {
    let (_, _, a) = run_bundled(true, Execution::Parallel);
    let (_, _, b) = run_bundled(true, Execution::Sequential);
    assert_eq!(a, b);
}

#[test]
fn counts_agree_with_fixture_oracle() {
    let (fetched, stored, quarantined) = corpus_oracle();
    assert_eq!((fetched, stored, quarantined), (50, 45, 2));
    let (_, s, _) = run_bundled(true, Execution::Parallel);
    assert_eq!((s.fetched, s.stored, s.quarantined), (fetched, stored, quarantined));
    assert_eq!(s.extracted, stored - quarantined);
}

#[test]
fn rerun_on_same_store_changes_nothing() {
    let entries = SkillLibrary::parse_entries(&std::fs::read_to_string(fixtures::skills_path()).unwrap()).unwrap();
    let embedder = fixtures::library_embedder(&entries);
    let library = SkillLibrary::build(entries, &embedder, Execution::Parallel).unwrap();
    let chat = fixtures::load_document_script(&fixtures::extraction_script_path(true)).unwrap();
    let store = Store::open_in_memory().unwrap();
    let source = SourceSpec::new(SourceKind::File, fixtures::corpus_path().to_string_lossy()).unwrap();
    let pipeline = Pipeline::new(&store, &chat, &embedder).with_library(&library);
    pipeline.run(&source).unwrap();
    let first = store.checksum().unwrap();
    let again = pipeline.run(&source).unwrap();
    assert_eq!((again.fetched, again.stored, again.duplicates_skipped), (50, 0, 50));
    assert_eq!((again.extracted, again.quarantined), (0, 0));
    assert_eq!(store.checksum().unwrap(), first);
}
