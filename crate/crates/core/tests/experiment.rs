//! End-to-end behaviour of the experiment harness: ingestion, reproducibility,
//! seed independence between estimators, and the emitted files.

use std::fs;

use wbic_core::experiment::{
    run_experiment, DataSection, DataSource, EstimatorKind, Experiment, ExperimentConfig, ModelKind, ModelSection,
    SamplerSection, THREADS_ENV,
};
use wbic_core::model::Dataset;
use wbic_core::{Error, ErrorClass};

fn quick(model: ModelKind, source: DataSource) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ModelSection::named(model), DataSection::of(source));
    c.sampler = SamplerSection { warmup: 1000, keep: 2000, thin: 2, ..SamplerSection::default() };
    c.experiment.replicates = Some(3);
    c.experiment.seed = 99;
    c
}

fn mixture(estimators: &[EstimatorKind]) -> ExperimentConfig {
    let mut c = quick(ModelKind::Mixture2, DataSource::Synthetic);
    c.data.n = Some(30);
    c.estimators.compute = estimators.to_vec();
    c.estimators.prior_mc_draws = 20_000;
    c
}

#[test]
fn csv_ingestion_is_strict() {
    let ok = Dataset::from_csv_reader(" x , y\n1.5, -2e-3\n+3,4.\n".as_bytes()).unwrap();
    assert_eq!(ok.column_names(), &["x".to_string(), "y".to_string()]);
    assert_eq!(ok.row(1), &[3.0, 4.0]);
    for bad in [
        "x\n1\nNaN\n",
        "x\n1\ninf\n",
        "x\n1\n-infinity\n",
        "x\n1\n\"\"\n",
        "x\n1\n0x1f\n",
        "x\n1\n1,5\n",
        "x,y\n1,2\n3\n",
        "x\n1\n",
        "x\n",
    ] {
        let err = Dataset::from_csv_reader(bad.as_bytes()).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Data, "{bad:?}: {err}");
    }
}

#[test]
fn csv_data_source_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("obs.csv"), "value\n0.1\n-0.4\n1.2\n0.3\n-1.1\n0.8\n").unwrap();
    let cfg = r#"
        [model]
        name = "normal_mean"
        [data]
        source = "csv"
        path = "obs.csv"
        [estimators]
        compute = ["exact"]
        [experiment]
        replicates = 2
    "#;
    fs::write(dir.path().join("exp.toml"), cfg).unwrap();
    let c = ExperimentConfig::from_path(dir.path().join("exp.toml")).unwrap();
    let e = Experiment::prepare(c).unwrap();
    assert_eq!(e.n_obs(), 6);
    let rep = e.run().unwrap();
    assert_eq!(rep.summary(EstimatorKind::Exact).unwrap().sd, 0.0);
}

#[test]
fn identical_configs_reproduce_bit_for_bit() {
    let c = mixture(&[EstimatorKind::Wbic, EstimatorKind::AdjustedWbic, EstimatorKind::PriorMc]);
    let a = run_experiment(c.clone()).unwrap();
    let b = run_experiment(c.clone()).unwrap();
    assert!(a.same_results(&b));
    let mut other = c;
    other.experiment.seed += 1;
    let d = run_experiment(other).unwrap();
    assert_ne!(a.records, d.records);
    assert_ne!(a.config_hash, d.config_hash);
}

#[test]
fn worker_count_does_not_change_the_report() {
    let c = mixture(&[EstimatorKind::Wbic, EstimatorKind::NuHat]);
    let default = run_experiment(c.clone()).unwrap();
    // any valid value is harmless to tests running concurrently in this binary
    std::env::set_var(THREADS_ENV, "1");
    let single = run_experiment(c);
    std::env::remove_var(THREADS_ENV);
    assert!(default.same_results(&single.unwrap()));
}

#[test]
fn adding_an_estimator_leaves_the_others_unchanged() {
    let small = run_experiment(mixture(&[EstimatorKind::Wbic])).unwrap();
    let large = run_experiment(mixture(&[
        EstimatorKind::PriorMc,
        EstimatorKind::NuHat,
        EstimatorKind::Wbic,
        EstimatorKind::AdjustedWbic,
    ]))
    .unwrap();
    let pick = |rep: &wbic_core::experiment::Report| -> Vec<(usize, u64, f64)> {
        rep.records
            .iter()
            .filter(|r| r.estimator == EstimatorKind::Wbic)
            .map(|r| (r.replicate, r.seed, r.value))
            .collect()
    };
    assert_eq!(pick(&small), pick(&large));
    assert_eq!(large.records.len(), 3 * 4);
}

#[test]
fn synthetic_replicates_differ_and_adjustment_never_raises() {
    let rep = run_experiment(mixture(&[EstimatorKind::Wbic, EstimatorKind::AdjustedWbic])).unwrap();
    let w = &rep.summary(EstimatorKind::Wbic).unwrap().values;
    let a = &rep.summary(EstimatorKind::AdjustedWbic).unwrap().values;
    assert!(w.windows(2).all(|p| p[0] != p[1]));
    assert!(w.iter().zip(a).all(|(w, a)| a <= w));
    assert!(rep.summary(EstimatorKind::Wbic).unwrap().sd > 0.0);
}

#[test]
fn fixed_data_reruns_only_the_sampler() {
    let mut c = quick(ModelKind::LinregM1, DataSource::Radiata);
    c.estimators.compute = vec![EstimatorKind::Exact, EstimatorKind::Wbic];
    let rep = run_experiment(c).unwrap();
    let exact = rep.summary(EstimatorKind::Exact).unwrap();
    assert!(exact.values.iter().all(|&v| v == exact.values[0]));
    assert_eq!(exact.sd, 0.0);
    let w = rep.summary(EstimatorKind::Wbic).unwrap();
    assert!(w.sd > 0.0);
    assert!(w.mean > exact.mean);
}

#[test]
fn single_replicate_has_zero_sd() {
    for mut c in [
        mixture(&[EstimatorKind::Wbic, EstimatorKind::NuHat, EstimatorKind::PriorMc]),
        quick(ModelKind::LinregM2, DataSource::Radiata),
    ] {
        c.experiment.replicates = Some(1);
        let rep = run_experiment(c).unwrap();
        assert_eq!(rep.replicates, 1);
        assert!(rep.summaries.iter().all(|s| s.sd == 0.0 && s.values.len() == 1));
    }
}

#[test]
fn report_files_and_draw_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick(ModelKind::NormalMean, DataSource::Synthetic);
    c.data.n = Some(12);
    c.estimators.compute = vec![EstimatorKind::Exact, EstimatorKind::Wbic, EstimatorKind::Ti];
    c.estimators.ti_rungs = 5;
    c.estimators.ti_endpoint_draws = 1000;
    c.experiment.replicates = Some(2);
    c.experiment.output_path = Some(dir.path().to_path_buf());
    c.experiment.dump_draws = true;
    let e = Experiment::prepare(c).unwrap();
    let rep = e.run().unwrap();
    e.write_outputs(&rep).unwrap();

    let csv = fs::read_to_string(dir.path().join("replicates.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "replicate,estimator,value,mcse,rhat_max,seed");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.len() == 6));
    assert_eq!(rows[0][1], "exact");
    assert_eq!(rows[0][4], "");
    assert!(rows[1][4].parse::<f64>().unwrap() >= 0.999);

    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains(&rep.config_hash));
    let json: wbic_core::experiment::Report =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(json.same_results(&rep));

    let dump = fs::read_to_string(dir.path().join("draws/replicate_0001.tsv")).unwrap();
    let mut dl = dump.lines();
    assert_eq!(dl.next().unwrap(), "# theta\tlog_lik");
    let body: Vec<&str> = dl.collect();
    assert_eq!(body.len(), 4 * 1000);
    for field in body[0].split('\t') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{field}");
        assert!(field.parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn invalid_configs_fail_before_sampling() {
    let mut c = mixture(&[EstimatorKind::Exact]);
    assert!(matches!(Experiment::prepare(c.clone()), Err(Error::Config(_))));
    c.estimators.compute = vec![EstimatorKind::Wbic];
    c.sampler.target_accept = 0.9;
    assert_eq!(Experiment::prepare(c.clone()).unwrap_err().exit_code(), 1);
    c.sampler.target_accept = 0.3;
    c.estimators.ti_rungs = 0;
    assert_eq!(Experiment::prepare(c.clone()).unwrap_err().exit_code(), 1);
    c.estimators.ti_rungs = 30;
    c.experiment.replicates = Some(0);
    assert_eq!(Experiment::prepare(c.clone()).unwrap_err().exit_code(), 1);
    c.experiment.replicates = Some(1);
    c.experiment.dump_draws = true;
    assert_eq!(Experiment::prepare(c).unwrap_err().exit_code(), 1);
}
