//! `relay-attack`: NFLB runs, comparison sweeps, theory checks and fixture
//! generation.
//!
//! Exit codes: 0 success, 1 usage, 2 solver, 3 parse, 4 enumeration or
//! check cap exceeded, 5 a theory check failed.

mod fail;
mod theory;

use clap::{Args, Parser, Subcommand};
use fail::{Failure, CHECK_FAILED, USAGE};
use relay_attack::graph::gen_proposition4;
use relay_attack::interdiction::{
    heuristic_m_from_duals, nflb, run_comparison, run_experiment, ComparisonSpec, ExperimentConfig, Formulation,
};
use relay_attack::netmodel::random::{random_network, RandomSpec};
use relay_attack::netmodel::{
    budget_from_percentage, load_instance, write_instance_json, Budget, Instance, NegativeDemand, ParseOptions,
};
use relay_attack::oracle::{EnumerationMode, EnumerationOptions, TuLimits, DEFAULT_CAP};
use relay_attack::solver::{backend_with, try_default_backend, Backend, Capability, SolveOptions};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "relay-attack", version, about = "Relay attacks on DC power networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Network-flow lower bound, or one comparison formulation, at one budget.
    Nflb(NflbArgs),
    /// Run or resume a budget sweep described by a TOML config.
    Sweep(SweepArgs),
    /// Structural checks on an instance or a generated family.
    Theory {
        #[command(subcommand)]
        check: TheoryCmd,
    },
    /// Write a generated instance as JSON.
    Gen {
        #[command(subcommand)]
        kind: GenCmd,
    },
}

#[derive(Args)]
struct ParseFlags {
    /// Keep generators with status 0 as zero-capacity units.
    #[arg(long)]
    keep_inactive_generators: bool,
    /// Take |x| for branches with negative reactance.
    #[arg(long)]
    absolute_reactance: bool,
    /// Reject buses with negative demand instead of clamping them to zero.
    #[arg(long)]
    strict_demand: bool,
}

impl ParseFlags {
    fn options(&self) -> ParseOptions {
        ParseOptions {
            negative_demand: if self.strict_demand { NegativeDemand::Error } else { NegativeDemand::Clamp },
            absolute_reactance: self.absolute_reactance,
            keep_inactive_generators: self.keep_inactive_generators,
        }
    }
}

#[derive(Args)]
#[group(id = "budget", required = true, multiple = false)]
struct BudgetFlags {
    /// Budget as a percentage of the relay count.
    #[arg(long, group = "budget")]
    budget_pct: Option<f64>,
    /// Budget as a number of relays.
    #[arg(long, group = "budget")]
    budget_count: Option<usize>,
}

#[derive(Args)]
struct NflbArgs {
    instance: PathBuf,
    #[command(flatten)]
    budget: BudgetFlags,
    #[arg(long, default_value = "eq4")]
    formulation: Formulation,
    /// Big-M for eq8. Defaults to the heuristic read from the NFLB duals.
    #[arg(long = "M")]
    big_m: Option<f64>,
    /// Stop an eq7 or eq8 solve once the incumbent reaches this load shed.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, default_value_t = 14400.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    parse: ParseFlags,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-solve time limit in seconds, overriding the config.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct TheoryOut {
    /// Write the JSON verdict here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// Total unimodularity of the [G h] matrix.
    Tu {
        instance: PathBuf,
        #[arg(long, default_value_t = TuLimits::default().max_order)]
        max_order: usize,
        #[arg(long, default_value_t = TuLimits::default().max_minors)]
        max_minors: u64,
        #[arg(long, default_value_t = TuLimits::default().gh_max_cols)]
        gh_max_cols: usize,
        #[command(flatten)]
        parse: ParseFlags,
        #[command(flatten)]
        out: TheoryOut,
    },
    /// Vertex duals of the network-flow dual LP over every attack of size U.
    Duals {
        instance: PathBuf,
        /// Attack size. Defaults to every relay.
        #[arg(long)]
        budget_count: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[command(flatten)]
        parse: ParseFlags,
        #[command(flatten)]
        out: TheoryOut,
    },
    /// Random injections with block-edge limits at the uncongested threshold.
    Thm2 {
        instance: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        parse: ParseFlags,
        #[command(flatten)]
        out: TheoryOut,
    },
    /// The triangle chain where the network-flow relaxation is not tight.
    Prop4 {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: TheoryOut,
    },
    /// Injection shift factor flows against the DCOPF solution.
    Isf {
        instance: PathBuf,
        #[command(flatten)]
        parse: ParseFlags,
        #[command(flatten)]
        out: TheoryOut,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Chain of n triangles.
    Prop4 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Connected random network.
    Random {
        #[arg(long)]
        buses: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.cmd {
        Cmd::Nflb(a) => cmd_nflb(a).map(|_| 0),
        Cmd::Sweep(a) => cmd_sweep(a).map(|_| 0),
        Cmd::Theory { check } => cmd_theory(check),
        Cmd::Gen { kind } => cmd_gen(kind).map(|_| 0),
    }
}

fn backend() -> Result<Box<dyn Backend>, Failure> {
    Ok(try_default_backend()?)
}

fn load(path: &Path, flags: &ParseFlags) -> Result<Instance, Failure> {
    Ok(load_instance(path, &flags.options())?)
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    std::fs::write(path, text + "\n").map_err(fail::io(path))
}

fn pu(x: f64) -> String {
    format!("{x:.2}")
}

fn cmd_nflb(a: NflbArgs) -> Result<(), Failure> {
    let inst = load(&a.instance, &a.parse)?;
    let net = &inst.network;
    let relays = &inst.relays;
    let budget = match (a.budget.budget_pct, a.budget.budget_count) {
        (Some(p), _) => budget_from_percentage(p, relays.len())?,
        (None, Some(c)) => Budget::count(c, relays.len())?,
        (None, None) => unreachable!("clap requires one budget flag"),
    };
    if !(a.time_limit > 0.0) {
        return Err(Failure::new(USAGE, "time limit must be positive"));
    }
    let opts = SolveOptions { random_seed: a.seed, ..SolveOptions::default() }.with_time_limit(a.time_limit);
    let name = inst.name.clone().unwrap_or_else(|| a.instance.display().to_string());
    println!("instance: {name}");
    println!("buses: {}", net.n_buses());
    println!("lines: {}", net.n_lines());
    println!("generators: {}", net.n_generators());
    println!("relays: {}", relays.len());
    println!("budget: {}", budget.count);
    println!("formulation: {}", a.formulation);

    let b = backend()?;
    let needs_nflb = a.formulation == Formulation::Eq4 || (a.formulation == Formulation::Eq8 && a.big_m.is_none());
    let report = if needs_nflb { Some(nflb(b.as_ref(), net, relays, &budget, &opts)?) } else { None };
    let mut out = json!({ "instance": name, "budget": budget });
    if let Some(r) = &report {
        let ids: Vec<String> =
            r.attack.attacked_relays().iter().map(|&i| relays.relays()[i].id.0.to_string()).collect();
        println!("nflb: {}", pu(r.dcopf_value));
        println!("milp_value: {}", pu(r.milp_value));
        println!("milp_status: {}", status_name(&r.milp_result.status));
        println!("milp_time_s: {:.2}", r.milp_result.wall_time_s);
        println!("dcopf_time_s: {:.2}", r.lp_result.wall_time_s);
        println!("gap: {:.4}", r.milp_result.gap);
        println!("attacked: {}", ids.join(" "));
        if let Ok(h) = heuristic_m_from_duals(&r.lp_result) {
            println!("heuristic_m: {}", h.m);
        }
        out["nflb"] = serde_json::to_value(r).expect("report serializes");
    }

    if a.formulation != Formulation::Eq4 {
        let big_m = match (a.big_m, &report) {
            (Some(m), _) => Some(m),
            (None, Some(r)) => Some(heuristic_m_from_duals(&r.lp_result)?.m),
            (None, None) => None,
        };
        if let Some(m) = big_m {
            if !(m >= 1.0) {
                return Err(Failure::new(USAGE, format!("M must be at least 1, got {m}")));
            }
        }
        let indicator;
        let solver: &dyn Backend = if a.formulation == Formulation::Eq7 && !b.capabilities().contains(&Capability::IndicatorConstraints) {
            indicator = backend_with(Capability::IndicatorConstraints)
                .ok_or_else(|| Failure::new(fail::SOLVER, "no backend with indicator constraints is available"))?;
            indicator.as_ref()
        } else {
            b.as_ref()
        };
        let spec = ComparisonSpec { big_m, target: a.target, warm_start: None };
        let run = run_comparison(solver, net, relays, &budget, a.formulation, &spec, &opts)?;
        if let Some(m) = big_m.filter(|_| a.formulation == Formulation::Eq8) {
            println!("m: {m}");
        }
        println!("value: {}", pu(run.value));
        println!("best_bound: {}", pu(run.best_bound));
        println!("status: {}", status_name(&run.status));
        println!("time_s: {:.2}", run.time_s);
        println!("gap: {:.4}", run.gap);
        if let Some(t) = run.time_to_target_s {
            println!("time_to_target_s: {t:.2}");
        }
        out["run"] = serde_json::to_value(&run).expect("run serializes");
    }
    if let Some(p) = &a.out {
        write_json(p, &out)?;
    }
    Ok(())
}

fn status_name<T: serde::Serialize>(s: &T) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::from_file(&a.config)?;
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    if let Some(t) = a.time_limit {
        cfg.time_limit_s = t;
    }
    cfg.validate()?;
    let b = backend()?;
    let indicator = if cfg.formulations.contains(&Formulation::Eq7) && !b.capabilities().contains(&Capability::IndicatorConstraints) {
        backend_with(Capability::IndicatorConstraints)
    } else {
        None
    };
    let ind: Option<&dyn Backend> = match &indicator {
        Some(x) => Some(x.as_ref()),
        None if b.capabilities().contains(&Capability::IndicatorConstraints) => Some(b.as_ref()),
        None => None,
    };
    let s = run_experiment(&cfg, b.as_ref(), ind)?;
    let failed = s.rows.iter().filter(|r| !r.complete()).count();
    println!("results: {}", s.results_path.display());
    println!("rows: {}", s.rows.len());
    println!("new_cells: {}", s.new_cells);
    println!("skipped_cells: {}", s.skipped_cells);
    println!("failed_cells: {failed}");
    for r in s.rows.iter().filter(|r| !r.complete()) {
        eprintln!("cell {} at {}% failed: {}", r.instance, r.budget_pct, r.status);
    }
    Ok(())
}

fn cmd_theory(check: TheoryCmd) -> Result<u8, Failure> {
    let (name, verdict, out) = match check {
        TheoryCmd::Tu { instance, max_order, max_minors, gh_max_cols, parse, out } => {
            let inst = load(&instance, &parse)?;
            ("tu", theory::tu(&inst, &TuLimits { max_order, max_minors, gh_max_cols })?, out)
        }
        TheoryCmd::Duals { instance, budget_count, cap, parse, out } => {
            let inst = load(&instance, &parse)?;
            let u = budget_count.unwrap_or(inst.relays.len());
            let opts = EnumerationOptions { cap, mode: EnumerationMode::ExactlyU, solve: SolveOptions::default() };
            ("duals", theory::duals(backend()?.as_ref(), &inst, u, &opts)?, out)
        }
        TheoryCmd::Thm2 { instance, trials, seed, parse, out } => {
            let inst = load(&instance, &parse)?;
            ("thm2", theory::thm2(backend()?.as_ref(), &inst, trials, seed)?, out)
        }
        TheoryCmd::Prop4 { n, out } => {
            if n == 0 {
                return Err(Failure::new(USAGE, "n must be at least 1"));
            }
            ("prop4", theory::prop4(backend()?.as_ref(), n)?, out)
        }
        TheoryCmd::Isf { instance, parse, out } => {
            let inst = load(&instance, &parse)?;
            ("isf", theory::isf(backend()?.as_ref(), &inst, &SolveOptions::default())?, out)
        }
    };
    println!("{}: {}", if verdict.passed { "PASS" } else { "FAIL" }, verdict.summary);
    if let Some(p) = &out.out {
        write_json(p, &json!({ "check": name, "passed": verdict.passed, "summary": verdict.summary, "detail": verdict.detail }))?;
    }
    Ok(if verdict.passed { 0 } else { CHECK_FAILED })
}

fn cmd_gen(kind: GenCmd) -> Result<(), Failure> {
    let (inst, out) = match kind {
        GenCmd::Prop4 { n, out } => {
            if n == 0 {
                return Err(Failure::new(USAGE, "n must be at least 1"));
            }
            (Instance::with_default_relays(Some(format!("prop4_n{n}")), gen_proposition4(n).network), out)
        }
        GenCmd::Random { buses, seed, out } => {
            if buses == 0 {
                return Err(Failure::new(USAGE, "buses must be at least 1"));
            }
            let net = random_network(&RandomSpec::default(), buses, seed);
            (Instance::with_default_relays(Some(format!("random{buses}_s{seed}")), net), out)
        }
    };
    let text = write_instance_json(&inst);
    match out {
        Some(p) => {
            std::fs::write(&p, text).map_err(fail::io(&p))?;
            println!("wrote: {}", p.display());
            println!("buses: {}", inst.network.n_buses());
            println!("lines: {}", inst.network.n_lines());
            println!("relays: {}", inst.relays.len());
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_flags_are_exclusive() {
        assert!(Cli::try_parse_from(["relay-attack", "nflb", "x.m", "--budget-pct", "3"]).is_ok());
        assert!(Cli::try_parse_from(["relay-attack", "nflb", "x.m"]).is_err());
        assert!(Cli::try_parse_from(["relay-attack", "nflb", "x.m", "--budget-pct", "3", "--budget-count", "2"]).is_err());
    }

    #[test]
    fn formulation_and_parse_flags() {
        let cli = Cli::try_parse_from([
            "relay-attack", "nflb", "x.m", "--budget-count", "2", "--formulation", "EQ8", "--M", "2", "--strict-demand",
        ])
        .unwrap();
        let Cmd::Nflb(a) = cli.cmd else { panic!("nflb expected") };
        assert_eq!(a.formulation, Formulation::Eq8);
        assert_eq!(a.big_m, Some(2.0));
        assert_eq!(a.parse.options().negative_demand, NegativeDemand::Error);
        assert_eq!(a.time_limit, 14400.0);
    }
}
