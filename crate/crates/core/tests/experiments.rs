use std::f64::consts::FRAC_PI_2;

use apa_core::config::{load_config, parse_config, Overrides};
use apa_core::harness::{
    is_discretely_unimodal, probe_curve, run, sum_rate_samples, ExperimentKind, ExperimentSpec, OutputFormat,
};
use apa_core::metrics::AllocatorKind;
use apa_core::output::{emit_result, read_csv, read_json};
use apa_core::precoding::{build_precoder, PrecoderKind};
use apa_core::system::SystemConfig;
use apa_core::Error;

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

#[test]
fn probe_refinement_keeps_the_minimizer() {
    let sys = SystemConfig {
        users: vec![1, 1],
        ..SystemConfig::default()
    };
    for trial in 0..10 {
        let set = sys.channel_set(trial).unwrap();
        for kind in PrecoderKind::ALL {
            let p = build_precoder(kind, set.h_est(), 1.0, 10.0).unwrap();
            let (coarse_t, coarse) = probe_curve(set.h_est(), &p, 1.0, 200).unwrap();
            let (fine_t, fine) = probe_curve(set.h_est(), &p, 1.0, 400).unwrap();
            let step = FRAC_PI_2 / 200.0;
            let gap = (coarse_t[argmin(&coarse)] - fine_t[argmin(&fine)]).abs();
            assert!(gap <= step + 1e-12, "trial {trial} {kind}: {gap}");
            assert!(is_discretely_unimodal(&fine));
        }
    }
}

#[test]
fn perfect_csit_sweep_has_identical_robust_and_plain_rates() {
    let mut spec = ExperimentSpec::defaults(ExperimentKind::SumRateSweep);
    spec.system.sigma_e2 = 0.0;
    spec.trials = 25;
    spec.allocators = vec![AllocatorKind::Rmapa, AllocatorKind::Mapa, AllocatorKind::Upa];
    let samples = sum_rate_samples(&spec).unwrap();
    for p in [PrecoderKind::Zf, PrecoderKind::Mmse] {
        let robust = samples.get(AllocatorKind::Rmapa, p).unwrap();
        let plain = samples.get(AllocatorKind::Mapa, p).unwrap();
        assert_eq!(robust.rates, plain.rates);
    }
}

#[test]
fn sweep_means_rise_with_snr() {
    let mut spec = ExperimentSpec::defaults(ExperimentKind::SumRateSweep);
    spec.trials = 40;
    spec.system.es_grid_step = 0.1;
    let res = run(&spec).unwrap();
    let table = res.table();
    assert_eq!(table.column("snr_db").unwrap(), [0.0, 5.0, 10.0, 15.0, 20.0]);
    for column in table.columns.iter().skip(1) {
        for w in column.values.windows(2) {
            assert!(w[1] > w[0], "{} not increasing: {:?}", column.name, column.values);
        }
    }
    assert!(res.metadata.notes["es_grid_step"] == "0.1");
}

#[test]
fn config_to_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "schema_version = 1\nkind = \"sum_rate_sweep\"\ntrials = 6\nsnr_grid_db = [0, 20]\n[system]\nes_grid_step = 0.1\n",
    )
    .unwrap();
    let spec = parse_config(&cfg).unwrap();
    let res = run(&spec).unwrap();

    let csv = dir.path().join("out.csv");
    emit_result(&res, OutputFormat::Csv, &csv).unwrap();
    let table = read_csv(&csv).unwrap();
    let names: Vec<_> = table.columns.iter().map(|c| c.name.clone()).collect();
    assert_eq!(names[0], "snr_db");
    assert_eq!(names[1..6], ["es_zf", "rmapa_zf", "mapa_zf", "upa_zf", "random_zf"]);
    assert_eq!(names[6..], ["es_mmse", "rmapa_mmse", "mapa_mmse", "upa_mmse", "random_mmse"]);

    let json = dir.path().join("out.json");
    emit_result(&res, OutputFormat::Json, &json).unwrap();
    let back = read_json(&json).unwrap();
    for (a, b) in res.table().columns.iter().zip(&back.table().columns) {
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
    assert_eq!(back.spec_fingerprint, spec.fingerprint());
    assert_eq!(back.metadata.effective_spec, spec);
}

#[test]
fn overrides_show_up_in_effective_spec() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "schema_version = 1\nkind = \"convexity_probe\"\n").unwrap();
    let ov = Overrides {
        seed: Some(99),
        trials: Some(2),
        ..Overrides::default()
    };
    let spec = load_config(&cfg, &ov).unwrap();
    let res = run(&spec).unwrap();
    assert_eq!(res.metadata.effective_spec.system.seed, 99);
    assert_eq!(res.metadata.effective_spec.trials, 2);
    let names: Vec<_> = res.table().columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["theta", "mf_0", "zf_0", "mmse_0", "mf_1", "zf_1", "mmse_1"]);
}

#[test]
fn probe_rejects_more_than_two_streams() {
    let mut spec = ExperimentSpec::defaults(ExperimentKind::ConvexityProbe);
    spec.system.users = vec![2, 1];
    assert!(matches!(run(&spec), Err(Error::Spec(_))));
}

#[test]
fn wrong_kind_is_refused_by_runner() {
    let spec = ExperimentSpec::defaults(ExperimentKind::ConvexityProbe);
    assert!(apa_core::harness::run_learning_curve(&spec).is_err());
}
