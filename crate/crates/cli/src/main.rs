use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use inbound_te::{
    diff_ingress, evaluate_plan, ingress_map, parse_scenario, plan_inbound_te, Asn, Budget,
    FlowError, IngressMap, PlanOutcome, Scenario, SimError, Simulator,
};

mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 1;
    pub const OSCILLATION: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const EXHAUSTED: u8 = 4;
    pub const CHANGES: u8 = 5;
}

/// Simulate BGP propagation and plan inbound traffic engineering.
///
/// Exit codes: 0 success, 1 input error, 2 oscillation, 3 infeasible
/// objectives, 4 planner budget exhausted, 5 diff found moved flows.
#[derive(Debug, Parser)]
#[command(name = "inbound-te", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate routes to a fixed point and report ingress links.
    Simulate(SimulateArgs),
    /// Search for announcement changes that meet the scenario's objectives.
    Plan(PlanArgs),
    /// Compare the ingress CSVs of two output directories.
    Diff(DiffArgs),
}

#[derive(Debug, Args)]
struct ScenarioArg {
    /// Scenario file.
    #[arg(value_name = "SCENARIO", required_unless_present = "scenario")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn load(&self) -> Result<Scenario> {
        let path = self
            .path
            .as_ref()
            .or(self.scenario.as_ref())
            .ok_or_else(|| anyhow!("no scenario given"))?;
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Directory for state.txt and ingress CSVs; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Dump every round's RIBs (trace.txt, or stderr without --out).
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Directory for plan.txt and the predicted ingress CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = Budget::default().max_actions)]
    budget_actions: usize,
}

#[derive(Debug, Args)]
struct DiffArgs {
    baseline: PathBuf,
    comparison: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Plan(a) => plan(&a),
        Command::Diff(a) => diff(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::INPUT)
        }
    }
}

fn csv_name(dest: Asn) -> String {
    format!("ingress-{dest}.csv")
}

fn write_out(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<u8> {
    let scenario = args.scenario.load()?;
    let t = &scenario.topology;
    let sim = Simulator::new(t, &scenario.te_config)?;
    let mut trace = String::new();
    let run = sim.run_traced(args.max_rounds, |s| {
        if args.trace {
            let _ = writeln!(trace, "== round {}", s.rounds_used);
            trace.push_str(&s.dump());
        }
    });
    if args.trace {
        match &args.out {
            Some(dir) => write_out(dir, &[("trace.txt".into(), trace)])?,
            None => eprint!("{trace}"),
        }
    }
    let state = match run {
        Ok(s) => s,
        Err(SimError::Oscillation { rounds, changing }) => {
            eprintln!("oscillation: no fixed point after {rounds} rounds");
            for (asn, prefix) in changing {
                eprintln!("  changing {asn} {prefix}");
            }
            return Ok(exit::OSCILLATION);
        }
        Err(e) => return Err(e.into()),
    };

    let mut files = vec![("state.txt".to_string(), state.dump())];
    for dest in scenario.destinations() {
        let map = ingress_map(&state, t, dest)?;
        files.push((csv_name(dest), map.to_csv()));
    }
    match &args.out {
        Some(dir) => {
            write_out(dir, &files)?;
            println!("converged in {} rounds", state.rounds_used);
        }
        None => {
            println!("converged in {} rounds", state.rounds_used);
            for (name, body) in &files[1..] {
                println!("# {name}");
                print!("{body}");
            }
        }
    }
    Ok(exit::OK)
}

fn plan(args: &PlanArgs) -> Result<u8> {
    let scenario = args.scenario.load()?;
    if scenario.objectives.is_empty() {
        bail!("scenario has no objectives");
    }
    let dests = scenario.destinations();
    let [dest] = dests.iter().copied().collect::<Vec<_>>()[..] else {
        bail!("objectives must name a single destination AS");
    };
    let t = &scenario.topology;
    let budget = Budget {
        max_actions: args.budget_actions,
        ..Budget::default()
    };
    let outcome = plan_inbound_te(t, dest, &scenario.te_config, &scenario.objectives, &budget)?;

    let mut report = String::new();
    let mut files = Vec::new();
    let code = match &outcome {
        PlanOutcome::Planned(p) => {
            let eval = evaluate_plan(
                t,
                dest,
                &scenario.te_config,
                &p.actions,
                &scenario.objectives,
            )?;
            let _ = writeln!(report, "outcome planned");
            let _ = writeln!(report, "actions {}", p.actions.len());
            for a in &p.actions {
                let _ = writeln!(report, "  {a}");
            }
            let _ = writeln!(report, "objectives {}", scenario.objectives.len());
            for (o, ok) in scenario.objectives.iter().zip(&eval.satisfied) {
                let verdict = if *ok { "satisfied" } else { "unsatisfied" };
                let _ = writeln!(report, "  {o} {verdict}");
            }
            let _ = writeln!(report, "side-effects {}", eval.side_effects.len());
            for c in &eval.side_effects {
                let _ = writeln!(report, "  {c}");
            }
            let lp = if p.lp_constraint_violated {
                "violated, outcome not guaranteed"
            } else {
                "ok"
            };
            let _ = writeln!(report, "lp-constraint {lp}");
            let _ = writeln!(report, "rounds {}", eval.rounds_used);
            let _ = writeln!(report, "evaluated {}", p.evaluated);
            files.push((csv_name(dest), p.predicted_map.to_csv()));
            if eval.all_satisfied() {
                exit::OK
            } else {
                bail!("plan failed independent re-evaluation")
            }
        }
        PlanOutcome::Infeasible(ws) => {
            let _ = writeln!(report, "outcome infeasible");
            for w in ws {
                let _ = writeln!(report, "  {w}");
            }
            exit::INFEASIBLE
        }
        PlanOutcome::Exhausted { evaluated } => {
            let _ = writeln!(report, "outcome exhausted");
            let _ = writeln!(report, "evaluated {evaluated}");
            exit::EXHAUSTED
        }
    };
    match &args.out {
        Some(dir) => {
            files.push(("plan.txt".into(), report.clone()));
            write_out(dir, &files)?;
            print!("{report}");
        }
        None => print!("{report}"),
    }
    Ok(code)
}

fn ingress_files(dir: &Path) -> Result<BTreeMap<String, IngressMap>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(dest) = name
            .strip_prefix("ingress-")
            .and_then(|r| r.strip_suffix(".csv"))
        else {
            continue;
        };
        let dest: Asn = dest
            .parse()
            .map_err(|e| anyhow!("{}: bad destination in file name: {e}", path.display()))?;
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let map = IngressMap::from_csv(dest, &text)
            .with_context(|| format!("parsing {}", path.display()))?;
        out.insert(name.to_string(), map);
    }
    if out.is_empty() {
        bail!("{} holds no ingress CSV", dir.display());
    }
    Ok(out)
}

fn diff(args: &DiffArgs) -> Result<u8> {
    let base = ingress_files(&args.baseline)?;
    let other = ingress_files(&args.comparison)?;
    if !base.keys().eq(other.keys()) {
        bail!(
            "ingress file sets differ: {:?} vs {:?}",
            base.keys().collect::<Vec<_>>(),
            other.keys().collect::<Vec<_>>()
        );
    }
    let mut moved = 0usize;
    for (name, b) in &base {
        let changes = diff_ingress(b, &other[name]).map_err(|e| match e {
            FlowError::KeyMismatch => anyhow!("{name}: scenario keys differ"),
            e => anyhow!("{name}: {e}"),
        })?;
        for c in &changes {
            println!("{name}: {c}");
        }
        moved += changes.len();
    }
    if moved == 0 {
        println!("no changes");
        Ok(exit::OK)
    } else {
        Ok(exit::CHANGES)
    }
}
