use calgnn::calibrators::CalibratorKind;
use calgnn::graph::SbmConfig;
use calgnn::harness::{
    emit_reports, emit_sweep, load_record, run_experiment, run_sweep, DatasetSource, ExperimentConfig,
    SweepAxis, SweepSpec, UNCALIBRATED,
};
use calgnn::models::{ModelKind, ModelSpec};
use calgnn::nn::TrainConfig;

fn sbm() -> DatasetSource {
    DatasetSource::Synthetic(SbmConfig {
        blocks: 3,
        nodes_per_block: 40,
        p_in: 0.12,
        p_out: 0.01,
        num_features: 8,
        seed: 5,
    })
}

fn small_config(kind: ModelKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(sbm(), kind, 2);
    cfg.train = Some(TrainConfig {
        max_epochs: 40,
        patience: None,
        ..calgnn::models::default_train_config(kind)
    });
    cfg.calibrators = CalibratorKind::ALL.to_vec();
    cfg.jobs = Some(2);
    cfg
}

#[test]
fn identical_configs_give_identical_summaries() {
    let cfg = small_config(ModelKind::Gcn);
    let a = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn scaling_calibrators_keep_accuracy_exactly() {
    for kind in [ModelKind::Gcn, ModelKind::Sgc] {
        let rec = run_experiment(&small_config(kind)).unwrap();
        for s in &rec.seeds {
            let base = s.stage(UNCALIBRATED).unwrap().metrics.accuracy;
            for name in ["temperature", "rbs", "rrbs"] {
                let st = s.stage(name).unwrap();
                assert_eq!(st.metrics.accuracy.to_bits(), base.to_bits(), "{kind} {name}");
                assert_eq!(st.accuracy_delta, 0.0);
            }
            assert_eq!(s.stages.len(), 1 + CalibratorKind::ALL.len());
        }
    }
}

#[test]
fn reports_round_trip_and_have_expected_shapes() {
    let cfg = small_config(ModelKind::Gcn);
    let rec = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&rec, dir.path()).unwrap();
    let back = load_record(dir.path().join("summary.json")).unwrap();
    assert_eq!(back.seeds, rec.seeds);
    assert_eq!(back.summary, rec.summary);
    for s in &rec.seeds {
        let trace = std::fs::read_to_string(dir.path().join(format!("trace_{}.csv", s.seed))).unwrap();
        assert_eq!(trace.lines().count(), 1 + s.trace.len());
        assert_eq!(s.trace.len(), 40);
        let rel = std::fs::read_to_string(
            dir.path()
                .join(format!("reliability_{}_uncalibrated.csv", s.seed)),
        )
        .unwrap();
        assert_eq!(rel.lines().count(), 1 + cfg.num_bins);
        assert!(dir
            .path()
            .join(format!("reliability_{}_rbs.csv", s.seed))
            .exists());
    }
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn fully_dropped_edges_match_a_featureless_graph_run() {
    let mut base = small_config(ModelKind::Gcn);
    base.seeds = vec![3];
    base.calibrators.clear();
    let (table, records) = run_sweep(&SweepSpec {
        axis: SweepAxis::Density,
        values: vec![0.0, 1.0],
        base: base.clone(),
    })
    .unwrap();
    assert_eq!(table.rows.len(), 2);
    // with every edge removed the model sees only node features
    let g = base.dataset.load().unwrap().with_edges(vec![]).unwrap();
    let run = calgnn::models::train_model(
        &g,
        &base.model,
        &base.train_config(3),
        &calgnn::losses::LossConfig::default(),
    )
    .unwrap();
    let probs = run.model.predict_graph(&g).unwrap().probabilities;
    let acc = calgnn::metrics::accuracy(&probs, g.labels(), &g.splits().test).unwrap();
    assert_eq!(
        records[1].seeds[0].stage(UNCALIBRATED).unwrap().metrics.accuracy,
        acc
    );
    let dir = tempfile::tempdir().unwrap();
    emit_sweep(&table, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn depth_sweep_has_one_populated_row_per_value() {
    let mut base = small_config(ModelKind::Sgc);
    base.seeds = vec![0, 1];
    base.calibrators = vec![CalibratorKind::Temperature];
    base.train = Some(TrainConfig {
        max_epochs: 10,
        ..base.train.unwrap()
    });
    let values: Vec<f64> = (1..=10).map(f64::from).collect();
    let (table, _) = run_sweep(&SweepSpec {
        axis: SweepAxis::Depth,
        values,
        base,
    })
    .unwrap();
    assert_eq!(table.rows.len(), 10);
    for row in &table.rows {
        for s in &row.stages {
            assert_eq!(s.accuracy.n, 2);
            assert!(s.accuracy.mean.is_finite() && s.ece.sd.is_finite());
        }
    }
}

#[test]
fn combined_loss_picks_alpha_from_the_grid() {
    let mut cfg = small_config(ModelKind::Gcn);
    cfg.loss = calgnn::losses::LossConfig::ce_plus_cal(0.97);
    cfg.calibrators.clear();
    let rec = run_experiment(&cfg).unwrap();
    for s in &rec.seeds {
        let a = s.chosen_alpha.unwrap();
        assert!(calgnn::losses::ALPHA_GRID.contains(&a));
    }
}

#[test]
fn seed_errors_carry_the_seed() {
    let mut cfg = small_config(ModelKind::Gcn);
    cfg.model = ModelSpec {
        width: 4,
        ..cfg.model
    };
    cfg.train = Some(TrainConfig {
        learning_rate: 1e300,
        max_epochs: 30,
        patience: None,
        ..TrainConfig::default()
    });
    cfg.seeds = vec![7];
    match run_experiment(&cfg) {
        Err(calgnn::Error::Seed { seed, .. }) => assert_eq!(seed, 7),
        other => panic!("expected a seed error, got {other:?}"),
    }
}
