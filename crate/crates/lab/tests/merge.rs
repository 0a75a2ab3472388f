mod common;

use common::{dir_bytes, parse, MU_SMALL, SHELLS_SMALL};
use fpp_lab::{merge_reports, run, LabError, Report};

fn runs(text: &str, seeds: &[u64]) -> Vec<Report> {
    let cfg = parse(text);
    seeds.iter().map(|&s| run(&cfg.with_seed(s), 1).unwrap()).collect()
}

fn written(r: &Report) -> Vec<(String, Vec<u8>)> {
    let tmp = tempfile::tempdir().unwrap();
    r.write(tmp.path()).unwrap();
    dir_bytes(tmp.path())
}

#[test]
fn self_merge_doubles_counts() {
    let r = runs(SHELLS_SMALL, &[4]).pop().unwrap();
    let twice = merge_reports(&[r.clone(), r.clone()]).unwrap();
    let one = r.summary();
    let two = twice.summary();
    assert_eq!(two.replicas, 2 * one.replicas);
    assert_eq!(two.seeds, vec![4, 4]);
    for key in ["attempted", "complete"] {
        assert_eq!(two.results[key].as_u64().unwrap(), 2 * one.results[key].as_u64().unwrap());
    }
    assert_eq!(twice.records.len(), 2 * r.records.len());
}

#[test]
fn merge_is_associative_and_commutative() {
    for text in [MU_SMALL, SHELLS_SMALL] {
        let rs = runs(text, &[3, 1, 2]);
        let (a, b, c) = (&rs[0], &rs[1], &rs[2]);
        let left = merge_reports(&[merge_reports(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = merge_reports(&[a.clone(), merge_reports(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        let swapped = merge_reports(&[c.clone(), a.clone(), b.clone()]).unwrap();
        let bytes = written(&left);
        assert_eq!(bytes, written(&right));
        assert_eq!(bytes, written(&swapped));
        assert_eq!(left.config.master_seed, 1);
    }
}

#[test]
fn merge_after_reading_matches_in_memory_merge() {
    let rs = runs(SHELLS_SMALL, &[5, 6]);
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = rs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d = tmp.path().join(i.to_string());
            r.write(&d).unwrap();
            d
        })
        .collect();
    let from_disk = fpp_lab::merge_dirs(&dirs).unwrap();
    assert_eq!(written(&from_disk), written(&merge_reports(&rs).unwrap()));
}

#[test]
fn pooling_narrows_the_completion_interval() {
    let rs = runs(SHELLS_SMALL, &[1, 2]);
    let width = |r: &Report| {
        let c = &r.summary().results["completion"];
        c["hi"].as_f64().unwrap() - c["lo"].as_f64().unwrap()
    };
    let pooled = merge_reports(&rs).unwrap();
    assert!(width(&pooled) < width(&rs[0]));
    assert!(width(&pooled) < width(&rs[1]));
}

#[test]
fn mismatched_configs_do_not_merge() {
    let a = runs(MU_SMALL, &[1]).pop().unwrap();
    let b = runs(&MU_SMALL.replace("replicas = 30", "replicas = 31"), &[2]).pop().unwrap();
    let c = runs(SHELLS_SMALL, &[1]).pop().unwrap();
    for other in [&b, &c] {
        let err = merge_reports(&[a.clone(), other.clone()]).unwrap_err();
        assert!(matches!(err, LabError::ConfigMismatch(_)), "{err}");
        assert!(err.is_config());
    }
    assert!(merge_reports(&[]).unwrap_err().is_config());
}
