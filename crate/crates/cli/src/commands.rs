//! Subcommand implementations.

use crate::dto::{ConstraintDto, ScenarioDto};
use crate::experiments as ex;
use crate::output::{num, CliError, CliResult, Run, Table};
use crate::{Cli, Command, Experiment, ScenarioArg};
use aa_core::analysis::{run_trial, summarize};
use aa_core::eu::{eu_of_strategy, optimize_timings, EuBreakdown};
use aa_core::mdp::{build_abstract_mdp, build_auction_mdp, build_delay_mdp, AaMdp, DelayScenario, AuctionScenario};
use aa_core::model::ProblemInstance;
use aa_core::search::best_strategy;
use aa_core::solver::{solve_constrained, verify_policy, Constraint, ConstraintSet, SolveResult, Status};
use aa_core::strategy::{StrategySkeleton, TimedStrategy};
use rayon::prelude::*;
use std::path::Path;

pub fn dispatch(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    let name = match &cli.command {
        Command::Eval { .. } => "eval".to_string(),
        Command::Search { .. } => "search".into(),
        Command::Build(_) => "build".into(),
        Command::Solve { .. } => "solve".into(),
        Command::Verify { .. } => "verify".into(),
        Command::Census { .. } => "census".into(),
        Command::Sweep { .. } => "sweep".into(),
        Command::Simulate { .. } => "simulate".into(),
        Command::Auction { .. } => "auction".into(),
        Command::Experiment { which, .. } => format!("experiment {}", experiment_name(*which)),
    };
    let mut run = Run::new(&name, argv, cli.out_dir, cli.gnuplot);
    match cli.command {
        Command::Eval { scenario, strategy, optimize } => eval(&mut run, &scenario, &strategy, optimize)?,
        Command::Search { scenario, max_len } => search(&mut run, &scenario, max_len)?,
        Command::Build(s) => build(&mut run, &s)?,
        Command::Solve { scenario, constraints } => solve(&mut run, &scenario, constraints.as_deref())?,
        Command::Verify { scenario, constraints, policy } => verify(&mut run, &scenario, &constraints, policy.as_deref())?,
        Command::Census { scenario, constraints } => census(&mut run, &scenario, constraints.as_deref())?,
        Command::Sweep { scenario, param, values } => sweep(&mut run, scenario.as_deref(), &param, &values)?,
        Command::Simulate { scenario, constraints, trials, seed } => {
            simulate(&mut run, &scenario, constraints.as_deref(), trials, seed)?
        }
        Command::Auction { scenario, seed, seeds } => auction(&mut run, scenario.as_deref(), seed, seeds)?,
        Command::Experiment { which, seed, runs } => experiment(&mut run, which, seed, runs)?,
    }
    let manifest = run.finish()?;
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn experiment_name(e: Experiment) -> &'static str {
    match e {
        Experiment::Fig10 => "fig10",
        Experiment::Fig11 => "fig11",
        Experiment::Fig14 => "fig14",
        Experiment::Fig15 => "fig15",
        Experiment::Table5 => "table5",
        Experiment::Table6 => "table6",
    }
}

// ---------------------------------------------------------------- loading

pub fn parse_scenario(text: &str) -> CliResult<ScenarioDto> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("scenario: {e}")))
}

pub fn parse_constraints(text: &str) -> CliResult<Vec<Constraint>> {
    let dtos: Vec<ConstraintDto> = serde_json::from_str(text).map_err(|e| CliError::Input(format!("constraints: {e}")))?;
    Ok(dtos.iter().map(ConstraintDto::to_constraint).collect::<aa_core::Result<_>>()?)
}

fn load_scenario(run: &mut Run, path: &Path) -> CliResult<ScenarioDto> {
    parse_scenario(&run.read(path)?)
}

fn load_instance(run: &mut Run, path: &Path) -> CliResult<ProblemInstance> {
    match load_scenario(run, path)? {
        ScenarioDto::Instance(i) => Ok(i.to_instance()?),
        _ => Err(CliError::Input("this command needs a scenario of type \"instance\"".into())),
    }
}

pub fn scenario_mdp(dto: &ScenarioDto, grid_step: f64) -> CliResult<AaMdp> {
    Ok(match dto {
        ScenarioDto::Instance(i) => build_abstract_mdp(&i.to_instance()?, grid_step)?,
        ScenarioDto::Delay(d) => build_delay_mdp(&d.to_scenario()?)?,
        ScenarioDto::Auction(a) => build_auction_mdp(&a.to_scenario()?)?,
    })
}

fn load_mdp(run: &mut Run, s: &ScenarioArg) -> CliResult<AaMdp> {
    let dto = load_scenario(run, &s.scenario)?;
    scenario_mdp(&dto, s.grid_step)
}

fn load_constraints(run: &mut Run, path: Option<&Path>) -> CliResult<Vec<Constraint>> {
    match path {
        Some(p) => parse_constraints(&run.read(p)?),
        None => Ok(Vec::new()),
    }
}

/// A literal strategy, or the contents of a file when the text names one.
fn strategy_text(run: &mut Run, text: &str) -> CliResult<String> {
    let p = Path::new(text);
    if p.is_file() {
        Ok(run.read(p)?.trim().to_string())
    } else {
        Ok(text.to_string())
    }
}

// ---------------------------------------------------------------- strategies

pub fn eval_table(s: &TimedStrategy, b: &EuBreakdown) -> Table {
    let mut t = Table::new(&["strategy", "total_eu", "accumulated_wait", "coord_costs", "residual_mass", "segments"]);
    let segs = b.per_segment.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
    t.push(vec![s.to_string(), num(b.total), num(b.accumulated_wait), num(b.coord_costs), num(b.residual_mass), segs]);
    t
}

fn eval(run: &mut Run, scenario: &Path, strategy: &str, optimize: bool) -> CliResult<()> {
    let inst = load_instance(run, scenario)?;
    let text = strategy_text(run, strategy)?;
    let ids = inst.ids();
    let (s, b) = if optimize {
        let r = optimize_timings(&inst, &StrategySkeleton::parse(&text, &ids)?)?;
        (r.strategy, r.breakdown)
    } else {
        let s = TimedStrategy::parse(&text, &ids)?;
        let b = eu_of_strategy(&inst, &s)?;
        (s, b)
    };
    println!("{s}\tEU {}", b.total);
    run.write_table("eval", &eval_table(&s, &b))?;
    Ok(())
}

fn search(run: &mut Run, scenario: &Path, max_len: usize) -> CliResult<()> {
    let inst = load_instance(run, scenario)?;
    let r = best_strategy(&inst, max_len)?;
    println!("best {}\tEU {}", r.best, r.best_eu);
    println!(
        "examined {}, pruned: structural {}, take-back {}, change {}",
        r.examined, r.pruned_structural, r.pruned_by_takeback, r.pruned_by_change_bound
    );
    let mut t = Table::new(&["skeleton", "strategy", "eu", "best"]);
    let mut entries: Vec<_> = r.table.iter().collect();
    entries.sort_by(|a, b| b.eu.total_cmp(&a.eu));
    for e in entries {
        let best = e.strategy == r.best;
        t.push(vec![e.skeleton.to_string(), e.strategy.to_string(), num(e.eu), best.to_string()]);
    }
    run.write_table("search", &t)?;
    Ok(())
}

// ---------------------------------------------------------------- MDPs

pub fn states_table(m: &AaMdp) -> Table {
    let mut header = vec!["state".to_string(), "terminal".into(), "terminal_reward".into()];
    header.extend(m.schema.features.iter().map(|f| f.name.clone()));
    let mut t = Table { header, rows: Vec::new() };
    for (s, st) in m.states.iter().enumerate() {
        let mut row = vec![s.to_string(), st.terminal.to_string(), num(m.terminal_reward[s])];
        row.extend(st.values.iter().enumerate().map(|(i, v)| m.schema.render(i, *v)));
        t.rows.push(row);
    }
    t
}

fn build(run: &mut Run, s: &ScenarioArg) -> CliResult<()> {
    let m = load_mdp(run, s)?;
    let pairs: usize = m.transitions.iter().map(Vec::len).sum();
    println!("{} states, {pairs} state-action pairs, initial {}", m.len(), m.initial);
    run.write("mdp.tsv", m.dump().as_bytes())?;
    run.write_table("states", &states_table(&m))?;
    Ok(())
}

pub fn policy_table(m: &AaMdp, cs: &[Constraint], r: &SolveResult) -> CliResult<Table> {
    let set = ConstraintSet::new(cs, m)?;
    let mut t = Table::new(&["state", "label", "action_index", "action", "utility", "forbidden", "satisfied"]);
    for s in 0..m.len() {
        let a = r.policy[s];
        let action = a.map(|a| m.transitions[s][a].action.to_string()).unwrap_or_default();
        let (forbidden, satisfied) = match &r.values {
            Some(v) => {
                let ids: Vec<&str> = set
                    .bit
                    .iter()
                    .enumerate()
                    .filter_map(|(i, b)| b.filter(|b| v[s].satisfied >> b & 1 == 1).map(|_| set.ids[i].as_str()))
                    .collect();
                (v[s].forbidden, ids.join(";"))
            }
            None => (false, String::new()),
        };
        t.push(vec![
            s.to_string(),
            m.label(s),
            a.map(|a| a.to_string()).unwrap_or_default(),
            action,
            num(r.utility[s]),
            forbidden.to_string(),
            satisfied,
        ]);
    }
    Ok(t)
}

fn solve(run: &mut Run, s: &ScenarioArg, constraints: Option<&Path>) -> CliResult<()> {
    let m = load_mdp(run, s)?;
    let cs = load_constraints(run, constraints)?;
    let r = solve_constrained(&m, &cs)?;
    println!("U(initial) = {}", r.utility[m.initial]);
    for d in &r.diagnostics {
        if d.conflict {
            eprintln!("warning: constraint {} cannot be met from the initial state", d.id);
        }
    }
    run.write_table("policy", &policy_table(&m, &cs, &r)?)?;
    Ok(())
}

/// Reads `action_index` by `state` from a policy CSV.
pub fn parse_policy(text: &str, states: usize) -> CliResult<Vec<Option<usize>>> {
    let bad = |m: String| CliError::Input(format!("policy: {m}"));
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (si, ai) = (col("state")?, col("action_index")?);
    let mut policy = vec![None; states];
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let s: usize = rec[si].parse().map_err(|_| bad(format!("bad state \"{}\"", &rec[si])))?;
        if s >= states {
            return Err(bad(format!("state {s} out of range")));
        }
        if !rec[ai].is_empty() {
            policy[s] = Some(rec[ai].parse().map_err(|_| bad(format!("bad action index \"{}\"", &rec[ai])))?);
        }
    }
    Ok(policy)
}

fn verify(run: &mut Run, s: &ScenarioArg, constraints: &Path, policy: Option<&Path>) -> CliResult<()> {
    let m = load_mdp(run, s)?;
    let cs = load_constraints(run, Some(constraints))?;
    let policy = match policy {
        Some(p) => parse_policy(&run.read(p)?, m.len())?,
        None => solve_constrained(&m, &cs)?.policy,
    };
    let reports = verify_policy(&m, &policy, &cs)?;
    let mut t = Table::new(&["id", "kind", "status", "witness"]);
    for r in &reports {
        let (status, witness) = match &r.status {
            Status::Satisfied => ("satisfied", String::new()),
            Status::Violated { witness } => {
                ("violated", witness.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"))
            }
        };
        println!("{}\t{status}", r.id);
        t.push(vec![r.id.clone(), format!("{:?}", r.kind), status.into(), witness]);
    }
    run.write_table("verify", &t)?;
    Ok(())
}

fn census(run: &mut Run, s: &ScenarioArg, constraints: Option<&Path>) -> CliResult<()> {
    let m = load_mdp(run, s)?;
    let cs = load_constraints(run, constraints)?;
    let r = solve_constrained(&m, &cs)?;
    let p = ex::census_point(&m, &r.policy, None)?;
    run.write_table("census", &ex::census_table(&[p]))?;
    Ok(())
}

fn sweep(run: &mut Run, scenario: Option<&Path>, param: &str, values: &[f64]) -> CliResult<()> {
    let sc = match scenario {
        Some(p) => match load_scenario(run, p)? {
            ScenarioDto::Delay(d) => d.to_scenario()?,
            _ => return Err(CliError::Input("sweep needs a scenario of type \"delay\"".into())),
        },
        None => DelayScenario::reference(),
    };
    let points = ex::sweep(&sc, param, values)?;
    run.write_table("sweep", &ex::census_table(&points))?;
    Ok(())
}

fn simulate(run: &mut Run, s: &ScenarioArg, constraints: Option<&Path>, trials: usize, seed: u64) -> CliResult<()> {
    run.seed = Some(seed);
    let m = load_mdp(run, s)?;
    let cs = load_constraints(run, constraints)?;
    let r = solve_constrained(&m, &cs)?;
    // Trial i uses stream (seed, i) whatever the thread, so this matches
    // the serial simulation exactly.
    let traces = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&m, &r.policy, seed, i))
        .collect::<aa_core::Result<Vec<_>>>()?;
    let sum = summarize(traces, false)?;
    let u0 = r.utility[m.initial];
    println!("mean {} ± {} (solver {u0})", sum.mean, sum.std_err);
    let mut h = Table::new(&["length", "count"]);
    for (l, c) in &sum.lengths {
        h.push(vec![l.to_string(), c.to_string()]);
    }
    run.write_table("histogram", &h)?;
    let mut t = Table::new(&["trials", "mean", "std_err", "solver_utility"]);
    t.push(vec![sum.trials.to_string(), num(sum.mean), num(sum.std_err), num(u0)]);
    run.write_table("simulation", &t)?;
    Ok(())
}

fn auction(run: &mut Run, scenario: Option<&Path>, seed: u64, seeds: u64) -> CliResult<()> {
    run.seed = Some(seed);
    let sc = match scenario {
        Some(p) => match load_scenario(run, p)? {
            ScenarioDto::Auction(a) => a.to_scenario()?,
            _ => return Err(CliError::Input("auction needs a scenario of type \"auction\"".into())),
        },
        None => AuctionScenario::reference(),
    };
    if seeds == 0 {
        return Err(CliError::Input("need at least one bid stream".into()));
    }
    let outs = ex::auction(&sc, seed, seeds)?;
    println!("mean |mdp - eA| closure gap: {:.2} points", ex::mean_gap(&outs));
    run.write_table("auction", &ex::auction_table(&outs))?;
    Ok(())
}

fn experiment(run: &mut Run, which: Experiment, seed: u64, runs: usize) -> CliResult<()> {
    match which {
        Experiment::Fig10 => {
            run.seed = Some(seed);
            let hs = ex::fig10(seed)?;
            for h in &hs {
                println!("wait rate {}: modal length {}", h.wait_rate, h.modal());
            }
            run.write_table("fig10", &ex::fig10_table(&hs))?;
        }
        Experiment::Fig11 => {
            run.write_table("fig11", &ex::census_table(&ex::fig11()?))?;
        }
        Experiment::Fig14 => {
            run.write_table("fig14", &ex::census_table(&ex::fig14()?))?;
        }
        Experiment::Fig15 => {
            let rows = ex::fig15(runs)?;
            for r in &rows {
                println!(
                    "{:>2} constraints: log10 {:.3}, pairs {}, solve {:.1} us (baseline {:.1} us)",
                    r.constraints, r.log10_strategies, r.admissible_pairs, r.solve_us, r.baseline_us
                );
            }
            run.write_table("fig15", &ex::fig15_table(&rows))?;
        }
        Experiment::Table5 => {
            let rows = ex::table5()?;
            run.write_table("table5", &ex::table5_table(&rows))?;
        }
        Experiment::Table6 => {
            run.seed = Some(seed);
            let outs = ex::table6(seed)?;
            println!("mean |mdp - eA| closure gap: {:.2} points", ex::mean_gap(&outs));
            run.write_table("table6", &ex::auction_table(&outs))?;
        }
    }
    Ok(())
}
