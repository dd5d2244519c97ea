//! Replays the checked-in fuzz corpus through the fuzz targets' round-trip checks.

use std::path::PathBuf;

use fl_core::dynamics::SurvivalTrace;
use fl_core::schema::{
    from_versioned_json, parse_sigma_csv, parse_trace_csv, sigma_csv, to_versioned_json,
    ModelSpecDoc,
};
use fl_core::spectral::SpectralReport;

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.display().to_string(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn model_spec_seeds() {
    let mut parsed = 0;
    for (name, text) in corpus("model_spec") {
        let Ok(doc) = ModelSpecDoc::parse(&text) else {
            continue;
        };
        parsed += 1;
        let _ = doc.input();
        let once = doc.to_json();
        assert_eq!(
            ModelSpecDoc::parse(&once).unwrap().to_json(),
            once,
            "{name}"
        );
    }
    assert!(parsed >= 8);
}

#[test]
fn trace_csv_seeds() {
    for (name, text) in corpus("trace_csv") {
        let trace = parse_trace_csv(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let once = trace.to_csv();
        assert_eq!(parse_trace_csv(&once).unwrap().to_csv(), once, "{name}");
    }
}

#[test]
fn sigma_csv_seeds() {
    for (name, text) in corpus("sigma_csv") {
        let rows = parse_sigma_csv(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let once = sigma_csv(&rows);
        assert_eq!(once, text, "{name}");
        assert_eq!(sigma_csv(&parse_sigma_csv(&once).unwrap()), once);
    }
}

#[test]
fn versioned_artifact_seeds() {
    for (name, text) in corpus("versioned_artifacts") {
        if name.contains("report") {
            let r: SpectralReport =
                from_versioned_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(to_versioned_json(&r), text, "{name}");
        } else {
            let t: SurvivalTrace =
                from_versioned_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(to_versioned_json(&t), text, "{name}");
        }
    }
}

mod mutated {
    use super::*;
    use proptest::prelude::*;

    /// Overwrites, inserts or deletes bytes of a seed.
    fn mutate(seed: &str, edits: &[(usize, u8, u8)]) -> String {
        let mut b = seed.as_bytes().to_vec();
        for &(pos, op, byte) in edits {
            if b.is_empty() {
                b.push(byte);
                continue;
            }
            let i = pos % b.len();
            match op % 3 {
                0 => b[i] = byte,
                1 => b.insert(i, byte),
                _ => {
                    b.remove(i);
                }
            }
        }
        String::from_utf8_lossy(&b).into_owned()
    }

    fn edits() -> impl Strategy<Value = Vec<(usize, u8, u8)>> {
        prop::collection::vec(
            (
                any::<usize>(),
                any::<u8>(),
                prop::sample::select(b"0123456789.,-e\"{}[]:naif \n".to_vec()),
            ),
            1..6,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn parsers_survive_mutations(which in 0usize..64, e in edits()) {
            let targets = ["model_spec", "trace_csv", "sigma_csv", "versioned_artifacts"];
            let target = targets[which % 4];
            let seeds = corpus(target);
            let (_, seed) = &seeds[(which / 4) % seeds.len()];
            let text = mutate(seed, &e);
            match target {
                "model_spec" => {
                    if let Ok(doc) = ModelSpecDoc::parse(&text) {
                        let _ = doc.input();
                        let once = doc.to_json();
                        prop_assert_eq!(ModelSpecDoc::parse(&once).unwrap().to_json(), once);
                    }
                }
                "trace_csv" => {
                    if let Ok(t) = parse_trace_csv(&text) {
                        let once = t.to_csv();
                        prop_assert_eq!(parse_trace_csv(&once).unwrap().to_csv(), once);
                    }
                }
                "sigma_csv" => {
                    if let Ok(r) = parse_sigma_csv(&text) {
                        let once = sigma_csv(&r);
                        prop_assert_eq!(sigma_csv(&parse_sigma_csv(&once).unwrap()), once);
                    }
                }
                _ => {
                    if let Ok(r) = from_versioned_json::<SpectralReport>(&text) {
                        let once = to_versioned_json(&r);
                        prop_assert_eq!(to_versioned_json(&from_versioned_json::<SpectralReport>(&once).unwrap()), once);
                    }
                    if let Ok(t) = from_versioned_json::<SurvivalTrace>(&text) {
                        let once = to_versioned_json(&t);
                        prop_assert_eq!(to_versioned_json(&from_versioned_json::<SurvivalTrace>(&once).unwrap()), once);
                    }
                }
            }
        }
    }
}
