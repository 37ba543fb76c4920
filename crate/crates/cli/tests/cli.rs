use aa_cli::commands::{parse_constraints, parse_policy, parse_scenario, scenario_mdp};
use aa_cli::dto::{ConstraintDto, DelayDto, ScenarioDto};
use aa_cli::experiments::reference_constraints;
use aa_cli::run;
use aa_core::analysis::simulate_policy;
use aa_core::eu::eu_of_strategy;
use aa_core::mdp::DelayScenario;
use aa_core::solver::solve_constrained;
use aa_core::strategy::TimedStrategy;
use proptest::prelude::*;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;
use std::process::Command;

const INSTANCE: &str = r#"{
  "type": "instance",
  "entities": [
    {"id": "A", "agent": true, "quality": 1.0},
    {"id": "H", "quality": 5.0, "response": {"model": "markovian", "rate": 0.3}}
  ],
  "wait": {"model": "exponential", "omega": 0.1, "deadline": 20.0},
  "coord": {"value": 2.0, "costs": [0.5], "max_changes": 2}
}"#;

fn aa(dir: &Path, args: &[&str]) -> i32 {
    let mut v = vec!["aa".to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    v.push("--out-dir".into());
    v.push(dir.display().to_string());
    run(v)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn eval_reports_total_and_segments() {
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("s.json");
    fs::write(&sc, INSTANCE).unwrap();
    assert_eq!(aa(d.path(), &["eval", "--scenario", sc.to_str().unwrap(), "--strategy", "H(5)A"]), 0);
    let rows = csv_rows(&d.path().join("eval.csv"));
    assert_eq!(rows.len(), 1);
    let dto = parse_scenario(INSTANCE).unwrap();
    let ScenarioDto::Instance(i) = dto else { panic!() };
    let inst = i.to_instance().unwrap();
    let direct = eu_of_strategy(&inst, &TimedStrategy::parse("H(5)A", &["A", "H"]).unwrap()).unwrap();
    assert_eq!(rows[0][0], "H(5)A");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), direct.total);
    assert_eq!(rows[0][5].split(';').count(), direct.per_segment.len());

    // The manifest digests the scenario file.
    let m: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("eval.manifest.json")).unwrap()).unwrap();
    let want: String = Sha256::digest(INSTANCE.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(m["inputs"][0]["sha256"], want);
    assert_eq!(m["command"], "eval");
}

#[test]
fn strategy_may_come_from_a_file_and_be_optimized() {
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("s.json");
    fs::write(&sc, INSTANCE).unwrap();
    let st = d.path().join("strategy.txt");
    fs::write(&st, "HA\n").unwrap();
    assert_eq!(aa(d.path(), &["eval", "--scenario", sc.to_str().unwrap(), "--strategy", st.to_str().unwrap(), "--optimize"]), 0);
    let rows = csv_rows(&d.path().join("eval.csv"));
    assert!(rows[0][0].starts_with("H("), "{}", rows[0][0]);
    // Untimed transfers are rejected without --optimize.
    assert_eq!(aa(d.path(), &["eval", "--scenario", sc.to_str().unwrap(), "--strategy", "HA"]), 2);
}

#[test]
fn search_lists_the_best_strategy() {
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("s.json");
    fs::write(&sc, INSTANCE).unwrap();
    assert_eq!(aa(d.path(), &["search", "--scenario", sc.to_str().unwrap(), "--max-len", "2"]), 0);
    let rows = csv_rows(&d.path().join("search.csv"));
    assert_eq!(rows[0][3], "true");
    let eus: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(eus.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn solve_then_verify_satisfies_constraints() {
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("delay.json");
    fs::write(&sc, r#"{"type": "delay"}"#).unwrap();
    let cs = d.path().join("c.json");
    let dtos: Vec<ConstraintDto> = reference_constraints().iter().map(ConstraintDto::from).collect();
    fs::write(&cs, serde_json::to_string_pretty(&dtos).unwrap()).unwrap();
    let (s, c) = (sc.to_str().unwrap(), cs.to_str().unwrap());
    assert_eq!(aa(d.path(), &["solve", "--mdp", s, "--constraints", c]), 0);
    let policy = d.path().join("policy.csv");
    assert_eq!(aa(d.path(), &["verify", "--mdp", s, "--constraints", c, "--policy", policy.to_str().unwrap()]), 0);
    let rows = csv_rows(&d.path().join("verify.csv"));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[2] == "satisfied"), "{rows:?}");
}

#[test]
fn verify_finds_violations_of_an_unconstrained_policy() {
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("delay.json");
    fs::write(&sc, r#"{"type": "delay"}"#).unwrap();
    let (s, empty) = (sc.to_str().unwrap(), d.path().join("none.json"));
    fs::write(&empty, "[]").unwrap();
    assert_eq!(aa(d.path(), &["solve", "--scenario", s, "--constraints", empty.to_str().unwrap()]), 0);
    let cs = d.path().join("c.json");
    fs::write(&cs, r#"[{"id": "no_delay", "kind": "forbidden_action", "action_predicate": {"kind": "coord_change"}}]"#).unwrap();
    let policy = d.path().join("policy.csv");
    assert_eq!(aa(d.path(), &["verify", "--scenario", s, "--constraints", cs.to_str().unwrap(), "--policy", policy.to_str().unwrap()]), 0);
    let rows = csv_rows(&d.path().join("verify.csv"));
    assert_eq!(rows[0][2], "violated");
    assert!(!rows[0][3].is_empty());
}

#[test]
fn length_experiment_low_wait_bucket_prefers_single_transfers() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(aa(d.path(), &["experiment", "fig10", "--seed", "7"]), 0);
    let rows = csv_rows(&d.path().join("fig10.csv"));
    let low: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "0.01").collect();
    let modal = low.iter().max_by(|a, b| a[2].parse::<f64>().unwrap().total_cmp(&b[2].parse().unwrap())).unwrap();
    assert_eq!(modal[1], "1");
    let first = fs::read(d.path().join("fig10.csv")).unwrap();
    assert_eq!(aa(d.path(), &["experiment", "fig10", "--seed", "7"]), 0);
    assert_eq!(fs::read(d.path().join("fig10.csv")).unwrap(), first);
}

#[test]
fn build_and_census_write_tables() {
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("s.json");
    fs::write(&sc, INSTANCE).unwrap();
    let s = sc.to_str().unwrap();
    assert_eq!(aa(d.path(), &["build", "--scenario", s, "--grid-step", "1", "--gnuplot"]), 0);
    let tsv = fs::read_to_string(d.path().join("mdp.tsv")).unwrap();
    assert!(tsv.starts_with("# state\taction"));
    assert!(d.path().join("states.dat").exists());
    let states = csv_rows(&d.path().join("states.csv"));
    assert_eq!(states.len(), scenario_mdp(&parse_scenario(INSTANCE).unwrap(), 1.0).unwrap().len());
    assert_eq!(aa(d.path(), &["census", "--scenario", s]), 0);
    let text = fs::read_to_string(d.path().join("census.csv")).unwrap();
    assert!(text.starts_with("parameter_value,ask,wait,delay_by_stratum,"));
    assert!(!text.contains('\r'));
    // Off-grid steps are rejected as input errors.
    assert_eq!(aa(d.path(), &["build", "--scenario", s, "--grid-step", "0.3"]), 2);
}

#[test]
fn sweep_and_auction_commands() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(aa(d.path(), &["sweep", "--param", "mean_response", "--values", "1,100"]), 0);
    let rows = csv_rows(&d.path().join("sweep.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0][1].parse::<usize>().unwrap() > rows[1][1].parse::<usize>().unwrap());
    assert_eq!(aa(d.path(), &["sweep", "--param", "bogus", "--values", "1"]), 2);
    assert_eq!(aa(d.path(), &["auction", "--seeds", "5", "--seed", "3"]), 0);
    let rows = csv_rows(&d.path().join("auction.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["3", "4", "5", "6", "7"]);
}

#[test]
fn parallel_simulation_matches_serial() {
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("delay.json");
    fs::write(&sc, r#"{"type": "delay", "repair_base": 0.01}"#).unwrap();
    assert_eq!(aa(d.path(), &["simulate", "--scenario", sc.to_str().unwrap(), "--trials", "2000", "--seed", "9"]), 0);
    let rows = csv_rows(&d.path().join("simulation.csv"));
    let mut s = DelayScenario::reference();
    s.repair_base = 0.01;
    let m = aa_core::mdp::build_delay_mdp(&s).unwrap();
    let r = solve_constrained(&m, &[]).unwrap();
    let serial = simulate_policy(&m, &r.policy, 9, 2000, false).unwrap();
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), serial.mean);
    let hist = csv_rows(&d.path().join("histogram.csv"));
    let total: usize = hist.iter().map(|r| r[1].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 2000);
}

#[test]
fn bad_inputs_exit_with_code_2() {
    let d = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_aa");
    let code = |args: &[&str]| Command::new(bin).args(args).current_dir(d.path()).output().unwrap().status.code();
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["build", "--nope"]), Some(2));
    assert_eq!(code(&["--help"]), Some(0));
    let bad = d.path().join("bad.json");
    fs::write(&bad, r#"{"type": "delay", "stepz": 5}"#).unwrap();
    assert_eq!(code(&["build", "--scenario", bad.to_str().unwrap()]), Some(2));
    fs::write(&bad, r#"{"type": "delay", "step": -1}"#).unwrap();
    assert_eq!(code(&["build", "--scenario", bad.to_str().unwrap()]), Some(2));
    assert_eq!(code(&["build", "--scenario", "missing.json"]), Some(2));
}

#[test]
fn numeric_failure_exits_with_code_3() {
    // A wait cost this steep overflows the closed-form strategy value.
    let d = tempfile::tempdir().unwrap();
    let sc = d.path().join("s.json");
    fs::write(
        &sc,
        r#"{"type": "instance",
            "entities": [{"id": "A", "agent": true, "quality": 1.0},
                         {"id": "H", "quality": 5.0, "response": {"model": "markovian", "rate": 0.001}}],
            "wait": {"model": "exponential", "omega": 50.0, "deadline": 100.0}}"#,
    )
    .unwrap();
    assert_eq!(aa(d.path(), &["eval", "--scenario", sc.to_str().unwrap(), "--strategy", "H"]), 3);
}

#[test]
fn scenario_defaults_are_the_reference() {
    let ScenarioDto::Delay(d) = parse_scenario(r#"{"type": "delay"}"#).unwrap() else { panic!() };
    assert_eq!(d.to_scenario().unwrap(), DelayScenario::reference());
    assert_eq!(DelayDto::from(&DelayScenario::reference()), d);
    let cs = reference_constraints();
    let json = serde_json::to_string(&cs.iter().map(ConstraintDto::from).collect::<Vec<_>>()).unwrap();
    assert_eq!(parse_constraints(&json).unwrap(), cs);
}

#[test]
fn policy_csv_round_trips() {
    let text = "state,action_index\n0,1\n1,\n2,0\n";
    assert_eq!(parse_policy(text, 3).unwrap(), vec![Some(1), None, Some(0)]);
    assert!(parse_policy(text, 2).is_err());
    assert!(parse_policy("state\n0\n", 1).is_err());
}

proptest! {
    #[test]
    fn strategy_strings_round_trip(parts in proptest::collection::vec((0usize..3, 0.0f64..50.0), 1..6)) {
        let ents = ["A", "H", "U"];
        let mut text = String::new();
        let mut t = 0.0;
        for (i, (e, dt)) in parts.iter().enumerate() {
            t += dt;
            if i + 1 == parts.len() {
                text.push_str(ents[*e]);
            } else if *e == 2 && i > 0 {
                text.push_str(&format!("D({t})"));
            } else {
                text.push_str(&format!("{}({t})", ents[*e]));
            }
        }
        let names = ["A", "H", "U"];
        let s = TimedStrategy::parse(&text, &names).unwrap();
        let again = TimedStrategy::parse(&s.to_string(), &names).unwrap();
        prop_assert_eq!(s, again);
    }
}
