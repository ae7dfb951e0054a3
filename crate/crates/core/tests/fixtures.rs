mod common;

use common::*;
use dplan::workloads::fixtures::Dataset;

#[test]
fn checked_in_fixtures_match_the_generator() {
    for ds in Dataset::ALL {
        let mut generated = Vec::new();
        ds.write(&mut generated).unwrap();
        let on_disk = std::fs::read(fixture_path(ds)).unwrap();
        assert!(generated == on_disk, "{} is stale; rerun the gen_fixtures example", ds.file_name());
        assert_eq!(*fixture(ds), ds.rows());
    }
}
