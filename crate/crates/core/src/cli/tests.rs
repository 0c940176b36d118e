use std::path::{Path, PathBuf};

use super::*;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small(protocol: &str, extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "[experiment]\nname = \"t\"\nprotocol = \"{protocol}\"\ntrials = 40\nseed = 3\n{extra}"
    ))
    .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rspv-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn config_defaults_and_round_trip() {
    let cfg = small("kp", "");
    assert_eq!(cfg.experiment.metric, Metric::Pass);
    assert_eq!(cfg.adversary.name, "honest");
    assert_eq!(cfg.expect, Expect::default());
    let json = serde_json::to_value(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_value(json).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn config_errors() {
    assert!(matches!(ExperimentConfig::parse("[experiment]\nname = 1"), Err(CliError::ConfigParse(_))));
    let typo = "[experiment]\nname = \"t\"\nprotocol = \"kp\"\ntrials = 1\ntrails = 2\n";
    assert!(matches!(ExperimentConfig::parse(typo), Err(CliError::ConfigParse(_))));
    assert!(matches!(run_experiment(&small("nope", "")), Err(CliError::UnknownProtocol(_))));
    let bad_param = small("kp", "[protocol.params]\nwidth = 3\n");
    assert!(matches!(run_experiment(&bad_param), Err(CliError::BadParameter(_))));
    let bad_value = small("kp", "[protocol.params]\nbackend = \"quantum\"\n");
    assert!(matches!(run_experiment(&bad_value), Err(CliError::BadParameter(_))));
    let unscored = small("kp", "").tap(|c| c.experiment.metric = Metric::Win);
    assert!(matches!(run_experiment(&unscored), Err(CliError::BadParameter(_))));
    let wrong_adv = small("kp", "[adversary]\nname = \"parity-liar\"\n");
    assert!(matches!(run_experiment(&wrong_adv), Err(CliError::Adversary(_))));
    let unknown_adv = small("kp", "[adversary]\nname = \"sneaky\"\n");
    assert!(matches!(run_experiment(&unknown_adv), Err(CliError::Adversary(AdversaryError::UnknownStrategy(_)))));
}

trait Tap: Sized {
    fn tap(mut self, f: impl FnOnce(&mut Self)) -> Self {
        f(&mut self);
        self
    }
}
impl Tap for ExperimentConfig {}

#[test]
fn every_registered_protocol_builds_with_defaults() {
    for d in protocols() {
        let built = build_protocol(d.id, &ParamTable::new()).unwrap_or_else(|e| panic!("{}: {e}", d.id));
        assert!(!built.protocol.id().is_empty());
    }
}

#[test]
fn listings_are_sorted_and_complete() {
    let text = list_protocols();
    let ids: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split(':').next().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    for id in ["one_block", "multi_block_test", "kp", "qfac_test", "energy_test", "qubit_test"] {
        assert!(ids.contains(&id), "{id} missing");
    }
    let advs = list_adversaries();
    let names: Vec<&str> = advs.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split(':').next().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(names.contains(&"honest") && names.contains(&"parity-liar"));
    assert_eq!(format_protocols(&[]), "");
    assert_eq!(format_adversaries(&[]), "");
}

#[test]
fn listing_sorts_an_unsorted_registry() {
    let entries = [
        ProtocolDescriptor { id: "b", summary: "second", params: &[] },
        ProtocolDescriptor { id: "a", summary: "first", params: &[("k", "meaning", "1")] },
    ];
    assert_eq!(format_protocols(&entries), "a: first\n    k = 1    meaning\nb: second\n");
}

#[test]
fn checked_in_configs_parse_and_build() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap();
            let built = build_protocol(&cfg.experiment.protocol, &cfg.protocol.params).unwrap();
            crate::adversaries::make_adversary_for(
                &cfg.adversary.name,
                &adversary_params(&cfg.adversary.params),
                built.protocol.as_ref(),
            )
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.experiment.name);
            count += 1;
        }
    }
    assert!(count >= 11);
}

#[test]
fn output_path_precedence() {
    let mut cfg = small("kp", "");
    let env = Path::new("/env");
    assert_eq!(output_path(&cfg, None, None), PathBuf::from("t.json"));
    assert_eq!(output_path(&cfg, None, Some(env)), PathBuf::from("/env/t.json"));
    cfg.experiment.output = Some("cfg.json".into());
    assert_eq!(output_path(&cfg, None, Some(env)), PathBuf::from("cfg.json"));
    assert_eq!(output_path(&cfg, Some(Path::new("flag.json")), Some(env)), PathBuf::from("flag.json"));
}

#[test]
fn overrides_replace_config_values() {
    let mut cfg = small("kp", "");
    Overrides { seed: Some(9), trials: Some(7), workers: Some(2) }.apply(&mut cfg);
    assert_eq!((cfg.experiment.seed, cfg.experiment.trials, cfg.experiment.workers), (9, 7, Some(2)));
    Overrides::default().apply(&mut cfg);
    assert_eq!((cfg.experiment.seed, cfg.experiment.trials), (9, 7));
}

#[test]
fn run_status_follows_expectations() {
    let cfg = small("multi_block_test", "[protocol.params]\nkappa = 8\n[adversary]\nname = \"parity-liar\"\n[expect]\nmax = 0.0\n");
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.successes, 0);
    assert_eq!(run_status(&report, &cfg), Status::Ok);
    assert_eq!(run_status(&report, &cfg).exit_code(), 0);
    let strict = cfg.clone().tap(|c| c.expect = Expect { min: Some(0.5), max: None });
    assert_eq!(run_status(&report, &strict), Status::Violation);
    assert_eq!(Status::Violation.exit_code(), 2);
    assert!(summary(&report, &strict).ends_with("VIOLATION"));
}

#[test]
fn report_records_the_configuration() {
    let cfg = small("qubit_test", "[adversary]\nname = \"phase-offset\"\n[adversary.params]\nk = 2\n")
        .tap(|c| c.experiment.metric = Metric::Win);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.parameters["adversary"]["k"], "2");
    assert_eq!(report.parameters["metric"], "win");
    assert_eq!(report.parameters["code_version"], CODE_VERSION);
    assert_eq!(embedded_config(&report).unwrap(), cfg);
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = small("qfac_test", "[protocol.params]\nn = 3\n").tap(|c| c.experiment.metric = Metric::Win);
    let one = run_experiment(&cfg.clone().tap(|c| c.experiment.workers = Some(1))).unwrap();
    let four = run_experiment(&cfg.clone().tap(|c| c.experiment.workers = Some(4))).unwrap();
    assert_eq!((one.successes, one.estimate, one.interval), (four.successes, four.estimate, four.interval));
}

#[test]
fn replay_matches_and_detects_tampering() {
    let dir = scratch("replay");
    let cfg = small("qubit_test", "").tap(|c| c.experiment.metric = Metric::Win);
    let report = run_experiment(&cfg).unwrap();
    let path = dir.join("r.json");
    write_report(&report, &path).unwrap();
    let stored = read_report(&path).unwrap();
    assert!(stored.same_result(&report));

    let r = replay(&stored, Some(2)).unwrap();
    assert!(r.matches());
    assert_eq!(r.status(), Status::Ok);
    assert!(r.version_warning.is_none());

    let mut tampered = stored.clone();
    tampered.successes = (tampered.successes + 1) % (tampered.trials + 1);
    assert_eq!(replay(&tampered, None).unwrap().status(), Status::Violation);

    let mut old = stored.clone();
    old.parameters.insert("code_version".into(), "0.0.0".into());
    let r = replay(&old, None).unwrap();
    assert!(r.version_warning.as_deref().unwrap().contains("0.0.0"));
    assert!(r.matches());

    let mut bare = stored;
    bare.parameters.remove("config");
    assert!(matches!(replay(&bare, None), Err(CliError::ReportParse(_))));
    std::fs::write(dir.join("bad.json"), "{").unwrap();
    assert!(matches!(read_report(&dir.join("bad.json")), Err(CliError::ReportParse(_))));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn energy_protocol_notes_and_modes() {
    let built = build_protocol("energy_test", &ParamTable::new()).unwrap();
    assert_eq!(built.notes["paper_rounds"], 400);
    assert_eq!(built.notes["rounds"], 200);
    let mut p = ParamTable::new();
    p.insert("mode".into(), "comp".into());
    p.insert("rounds".into(), 0.into());
    let comp = build_protocol("energy_test", &p).unwrap();
    assert_eq!(comp.notes["rounds"], 400);
    assert!(comp.protocol.id().ends_with(":comp"));
    p.insert("witness".into(), "0".into());
    assert!(matches!(build_protocol("energy_test", &p), Err(CliError::BadParameter(_))));
}
