use super::*;
use crate::plan::Variant;
use crate::rank1::LatticeSource;

fn small(experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        dims: vec![2],
        radii: vec![1, 2, 4, 8, 16, 32],
        ..ExperimentConfig::preset(experiment)
    }
}

fn csv_body(t: &Table) -> String {
    let prov = Provenance {
        version: "x".into(),
        config_hash: "h".into(),
        timestamp: None,
    };
    let mut buf = Vec::new();
    t.write_csv(&mut buf, &prov).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn config_roundtrip_and_defaults() {
    let cfg = ExperimentConfig::from_toml(
        "experiment = \"roundtrip\"\nfamily = \"random\"\ndims = [2, 3]\nradii = [64]\nsizes = [10]\n",
    )
    .unwrap();
    assert_eq!(cfg.seeds, vec![0]);
    assert_eq!(cfg.repetitions, 1);
    assert_eq!(cfg.source, LatticeSource::Lat1);
    assert_eq!(cfg.variant(), Variant::Full);
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    let mut other = cfg.clone();
    other.output = Some("out.csv".into());
    assert_eq!(other.hash(), cfg.hash());
    other.seeds = vec![1];
    assert_ne!(other.hash(), cfg.hash());
}

#[test]
fn config_validation() {
    let bad = [
        "experiment = \"roundtrip\"\ndims = []\nradii = [4]\n",
        "experiment = \"roundtrip\"\ndims = [2]\nradii = [4]\nrepetitions = 0\n",
        "experiment = \"roundtrip\"\nfamily = \"random\"\ndims = [2]\nradii = [4]\n",
        "experiment = \"oversampling-full\"\ndims = [2]\nradii = [4]\nvariant = \"reduction\"\n",
        "experiment = \"approx-g3\"\nfamily = \"random\"\ndims = [2]\nradii = [4]\nsizes = [3]\n",
        "experiment = \"roundtrip\"\ndims = [2]\nradii = [4]\nsource = \"user\"\n",
        "experiment = \"nope\"\ndims = [2]\nradii = [4]\n",
        "experiment = \"roundtrip\"\ndims = [2]\nradii = [4]\nunknown = 1\n",
    ];
    for text in bad {
        assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
    }
    for e in Experiment::ALL {
        ExperimentConfig::preset(e).validate().unwrap();
        assert_eq!(e.as_str().parse::<Experiment>().unwrap(), e);
    }
    ExperimentConfig::random_reduction_preset().validate().unwrap();
}

#[test]
fn oversampling_reproduces_lat1_series() {
    let t = run(&small(Experiment::OversamplingFull), Some(1)).unwrap();
    assert_eq!(t.values("card"), ["1", "5", "13", "29", "65", "145"]);
    assert_eq!(t.values("total_samples"), ["2", "7", "53", "99", "215", "801"]);
    assert!(t.values("bound_ok").iter().all(|&b| b == "true"));
    assert_eq!(t.failures(), 0);
}

#[test]
fn reduction_rows() {
    let t = run(&small(Experiment::OversamplingReduction), Some(1)).unwrap();
    assert_eq!(t.values("total_samples")[0], "2");
    let os: Vec<f64> = t.values("oversampling").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(os.len(), 6);
    assert!(os[1..].iter().all(|&o| o < 3.0), "{os:?}");
}

#[test]
fn random_repetitions_report_maximum() {
    let cfg = ExperimentConfig {
        family: Family::Random,
        dims: vec![3],
        radii: vec![8],
        sizes: vec![20],
        seeds: vec![5],
        repetitions: 4,
        source: LatticeSource::Cbc,
        ..ExperimentConfig::preset(Experiment::OversamplingReduction)
    };
    let t = run(&cfg, Some(1)).unwrap();
    assert_eq!(t.len(), 1);
    let reps: Vec<u64> = t.values("samples_per_rep")[0]
        .split(';')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(reps.len(), 4);
    let total: u64 = t.values("total_samples")[0].parse().unwrap();
    assert_eq!(total, *reps.iter().max().unwrap());
}

#[test]
fn max_card_filters_grid() {
    let cfg = ExperimentConfig {
        max_card: Some(30),
        ..small(Experiment::OversamplingFull)
    };
    assert_eq!(run(&cfg, Some(1)).unwrap().len(), 4);
}

#[test]
fn thread_count_does_not_change_output() {
    let cfg = ExperimentConfig {
        dims: vec![2, 3],
        radii: vec![2, 8, 32],
        ..ExperimentConfig::preset(Experiment::OversamplingFull)
    };
    let a = csv_body(&run(&cfg, Some(1)).unwrap());
    let b = csv_body(&run(&cfg, Some(3)).unwrap());
    assert_eq!(a, b);
    let rt = ExperimentConfig {
        sizes: vec![10, 50],
        dims: vec![2, 6],
        ..ExperimentConfig::preset(Experiment::Roundtrip)
    };
    assert_eq!(
        csv_body(&run(&rt, Some(1)).unwrap()),
        csv_body(&run(&rt, Some(4)).unwrap())
    );
}

#[test]
fn roundtrip_passes() {
    for variant in [Variant::Full, Variant::Reduction] {
        let cfg = ExperimentConfig {
            dims: vec![2, 5],
            sizes: vec![10, 100],
            seeds: vec![1, 2],
            variant: Some(variant),
            ..ExperimentConfig::preset(Experiment::Roundtrip)
        };
        let t = run(&cfg, None).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.failures(), 0, "{}", csv_body(&t));
        assert!(t.values("variant").iter().all(|&v| v == variant.as_str()));
    }
}

#[test]
fn sample_ratio_rows() {
    let cfg = ExperimentConfig {
        dims: vec![2],
        radii: vec![4, 16],
        ..ExperimentConfig::preset(Experiment::SampleRatio)
    };
    let t = run(&cfg, Some(1)).unwrap();
    for row in &t.rows {
        let m: f64 = row[t.column("M").unwrap()].parse().unwrap();
        let total: f64 = row[t.column("total_samples").unwrap()].parse().unwrap();
        let ratio: f64 = row[t.column("ratio").unwrap()].parse().unwrap();
        assert!((ratio - total / m).abs() < 1e-12 * ratio);
    }
}

#[test]
fn approx_g3_errors_decrease() {
    let cfg = ExperimentConfig {
        radii: vec![2, 4, 8, 16, 32],
        k_max: Some(1024),
        ..small(Experiment::ApproxG3)
    };
    let t = run(&cfg, Some(1)).unwrap();
    assert_eq!(t.values("total_samples"), ["7", "53", "99", "215", "801"]);
    let err: Vec<f64> = t.values("rel_l2_error").iter().map(|v| v.parse().unwrap()).collect();
    let trunc: Vec<f64> = t.values("truncation_error").iter().map(|v| v.parse().unwrap()).collect();
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
    assert!(err.iter().zip(&trunc).all(|(e, t)| e >= t));
}

#[test]
fn csv_and_json_output() {
    let cfg = small(Experiment::OversamplingFull);
    let t = run(&ExperimentConfig { radii: vec![2, 4], ..cfg.clone() }, Some(1)).unwrap();
    let prov = Provenance::new(&cfg, true);
    let mut buf = Vec::new();
    t.write_csv(&mut buf, &prov).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# mr1l "));
    assert_eq!(lines[1], "# experiment oversampling-full");
    assert_eq!(lines[2], format!("# config {}", cfg.hash()));
    assert!(lines[3].starts_with("# generated "));
    assert!(lines[4].starts_with("d,R,s,seed,card,L,"));
    assert_eq!(lines.len(), 7);
    assert!(!csv_body(&t).contains("generated"));

    let json = t.to_json(&prov);
    assert_eq!(json["rows"][0]["total_samples"], 7);
    assert_eq!(json["rows"][1]["bound_ok"], true);
    assert_eq!(json["experiment"], "oversampling-full");
}
