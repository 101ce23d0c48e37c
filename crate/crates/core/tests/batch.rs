use std::path::Path;

use sgim_core::batch::{
    aggregate, cell_name, median, quantile, run_batch, AGGREGATE_FILE, EVALUATIONS_FILE, FINAL_FILE, SUMMARY_FILE,
    TESTBENCH_FILE,
};
use sgim_core::config::{Config, Variant};
use sgim_core::error::Error;
use sgim_core::eval::read_evaluations;
use sgim_core::learner::{Environment, Learner};

fn small(output: &Path) -> Config {
    Config {
        seeds: vec![3, 4],
        iterations: 45,
        eval_every: 20,
        testbench_per_subspace: 15,
        choice_window: 10,
        output: output.to_path_buf(),
        ..Config::default()
    }
}

#[test]
fn every_cell_gets_a_directory_and_reruns_skip_completed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small(tmp.path());
    let first = run_batch(&config).unwrap();
    assert_eq!(first.cells.len(), Variant::ALL.len() * 2);
    for v in Variant::ALL {
        for s in &config.seeds {
            let dir = tmp.path().join(cell_name(v, *s));
            for f in [
                "config.toml",
                "episodes.jsonl",
                "evaluations.csv",
                "procedure_usage.csv",
                "action_lengths.csv",
                "choices.csv",
                "memory.jsonl",
                SUMMARY_FILE,
            ] {
                assert!(dir.join(f).exists(), "{} missing {f}", dir.display());
            }
        }
    }
    for f in [AGGREGATE_FILE, FINAL_FILE, TESTBENCH_FILE, "config.toml"] {
        assert!(tmp.path().join(f).exists());
    }

    // Damage one completed cell's log: a rerun must not touch it.
    let marker = tmp.path().join(cell_name(Variant::SgimPb, 3)).join("episodes.jsonl");
    std::fs::write(&marker, "kept\n").unwrap();
    let second = run_batch(&config).unwrap();
    assert_eq!(std::fs::read_to_string(&marker).unwrap(), "kept\n");
    assert_eq!(first.cells, second.cells);
}

#[test]
fn interrupted_cells_are_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small(tmp.path());
    config.variants = vec![Variant::ImPb];
    config.seeds = vec![1];
    let first = run_batch(&config).unwrap();
    let dir = tmp.path().join(cell_name(Variant::ImPb, 1));
    std::fs::remove_file(dir.join(SUMMARY_FILE)).unwrap();
    std::fs::write(dir.join(EVALUATIONS_FILE), "garbage").unwrap();
    let second = run_batch(&config).unwrap();
    assert_eq!(first.cells, second.cells);
    assert_eq!(read_evaluations(&dir.join(EVALUATIONS_FILE)).unwrap().len(), 4);
}

#[test]
fn aggregate_medians_reproduce_cell_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small(tmp.path());
    config.seeds = vec![1, 2, 3];
    config.variants = vec![Variant::RandomAction, Variant::SgimActs];
    run_batch(&config).unwrap();
    let rows = aggregate(tmp.path(), &config.variants, &config.seeds).unwrap();
    let mut reader = csv::Reader::from_path(tmp.path().join(AGGREGATE_FILE)).unwrap();
    let written: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(written.len(), rows.len());
    for (row, rec) in rows.iter().zip(&written) {
        let globals: Vec<f64> = config
            .seeds
            .iter()
            .map(|s| {
                let evals =
                    read_evaluations(&tmp.path().join(cell_name(row.variant, *s)).join(EVALUATIONS_FILE)).unwrap();
                evals.iter().find(|e| e.iteration == row.iteration).unwrap().global
            })
            .collect();
        let mut sorted = globals.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(row.median_global, median(&globals));
        assert_eq!(row.q1_global, quantile(&sorted, 0.25));
        assert_eq!(rec[0].to_string(), row.variant.to_string());
        assert_eq!(rec[3].parse::<f64>().unwrap(), row.median_global);
    }
}

#[test]
fn unwritable_output_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain-file");
    std::fs::write(&file, "").unwrap();
    let config = small(&file.join("runs"));
    assert!(matches!(run_batch(&config), Err(Error::Io { .. })));
}

#[test]
fn invalid_config_names_the_field() {
    let config = Config {
        eval_every: 0,
        ..Config::default()
    };
    let err = run_batch(&config).unwrap_err();
    assert!(err.to_string().contains("eval_every"), "{err}");
}

#[test]
fn evaluation_leaves_the_learner_untouched() {
    let config = Config {
        testbench_per_subspace: 15,
        ..Config::default()
    };
    let env = Environment::prepare(&config).unwrap();
    let mut with_eval = Learner::new(&env, Variant::SgimPb, 9);
    let mut without = Learner::new(&env, Variant::SgimPb, 9);
    for i in 0..40 {
        if i % 7 == 0 {
            let a = with_eval.evaluate(&env.testbench);
            let b = with_eval.evaluate(&env.testbench);
            assert_eq!(a, b);
        }
        assert_eq!(with_eval.step().unwrap(), without.step().unwrap());
    }
}
