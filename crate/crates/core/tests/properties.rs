#[path = "support/grain.rs"]
mod grain;
#[path = "support/relations.rs"]
mod relations;

use std::collections::BTreeSet;

use fuzzlens_core::corpus;
use fuzzlens_core::par::ExecMode;
use fuzzlens_core::queries::{kde, silverman_bandwidth, trapezoid};
use fuzzlens_core::runtime::{fuzz, Corpus, FuzzOptions};
use fuzzlens_core::warehouse::{line_coverage, FactStoreBuilder};
use proptest::prelude::*;

#[test]
fn planted_relations_are_recovered_and_controls_rejected() {
    for seed in 0..20 {
        let case = relations::planted(seed);
        assert_eq!(relations::run(&case, 64, seed), relations::Outcome::Recovered, "{}", case.source);
        let case = relations::control(seed);
        assert_eq!(relations::run(&case, 64, seed), relations::Outcome::Rejected, "{}", case.source);
    }
}

#[test]
fn grain_lookups_match_replay() {
    let db = fuzzlens_core::code_db::ProgramDb::from_source("loop.mc", grain::LOOPING, "main").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let checked = grain::probe(&db, &grain::long_inputs(11, 4), 50, 11, dir.path()).unwrap();
    assert_eq!(checked, 4 * 51);
    for p in corpus::PROGRAMS {
        let db = p.db().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let inputs = vec![vec![0u8; 16], (0..=255).collect(), vec![0xff; 40]];
        grain::probe(&db, &inputs, 20, 3, dir.path()).unwrap_or_else(|e| panic!("{}: {e}", p.name));
    }
}

/// Direct Gaussian sum, normalised with the same rule as the grid.
fn direct_kde(samples: &[f64], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * samples.len() as f64);
    let raw: Vec<f64> = grid
        .iter()
        .map(|x| samples.iter().map(|s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    let area = trapezoid(grid, &raw);
    raw.into_iter().map(|v| v / area).collect()
}

#[test]
fn uniform_density_matches_histogram() {
    let samples: Vec<f64> = (0..10_000).map(|i| (i % 1000) as f64 / 10.0).collect();
    let d = kde(&samples, 512, ExecMode::Parallel);
    assert!((trapezoid(&d.grid, &d.density) - 1.0).abs() < 1e-6);
    // A histogram of the uniform samples has height 1/100 everywhere inside.
    for (x, y) in d.grid.iter().zip(&d.density) {
        if (10.0..=90.0).contains(x) {
            assert!((y - 0.01).abs() <= 0.2 * 0.01, "density {y} at {x}");
        }
    }
}

#[test]
fn all_equal_samples_give_a_unit_bump() {
    let d = kde(&[7.0; 50], 512, ExecMode::Sequential);
    assert_eq!(d.bandwidth, 1.0);
    assert!((trapezoid(&d.grid, &d.density) - 1.0).abs() < 1e-6);
    let peak = d.grid[d.density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
    assert!((peak - 7.0).abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kde_integrates_to_one_and_matches_direct_sum(samples in prop::collection::vec(-1e4f64..1e4, 1..200)) {
        let d = kde(&samples, 256, ExecMode::Parallel);
        prop_assert!((trapezoid(&d.grid, &d.density) - 1.0).abs() < 1e-6);
        prop_assert_eq!(d.bandwidth, silverman_bandwidth(&samples));
        let want = direct_kde(&samples, d.bandwidth, &d.grid);
        for (g, w) in d.density.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1e-12) + 1e-15);
        }
        let seq = kde(&samples, 256, ExecMode::Sequential);
        prop_assert_eq!(seq.density, d.density);
    }

    #[test]
    fn coverage_never_drops_as_runs_are_added(seed in any::<u64>(), split in 1u64..200) {
        let db = corpus::program("motivating").unwrap().db().unwrap();
        let mut all = Vec::new();
        let opts = FuzzOptions { exec_limit: 200, seed, ..FuzzOptions::default() };
        fuzz(&db, Corpus::new(), &BTreeSet::new(), &opts, |t, i| {
            all.push((t.clone(), i.to_vec()));
            Ok::<(), ()>(())
        })
        .unwrap();
        let mut b = FactStoreBuilder::new(db.generation());
        for (t, i) in &all[..split as usize] {
            b.push(t, i);
        }
        let prefix = line_coverage(&db, &b.finish());
        let full = line_coverage(&db, &fuzzlens_core::warehouse::FactStore::from_traces(
            db.generation(),
            all.iter().map(|(t, i)| (t, i.as_slice())),
        ));
        prop_assert!(prefix <= full);
    }
}
