//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Deserialize;

use crate::costmodel::{load_cost_table, CostTable};
use crate::dse::{explore, pareto_front, select_named, ExplorationConstraints, PgMode};
use crate::estimate::{estimate_caps_workload, NetworkDesc};
use crate::memconfig::{count_all, enumerate_all, enumerate_hybrid_sizes, size_sep, size_smp, OrgKind};
use crate::report::{emit, read_scatter, render_table};
use crate::units::{format_size, parse_size};
use crate::workload::{derive_offchip, load_workload, peak_usage};
use crate::{Error, Result};

pub const COST_TABLE_ENV: &str = "SPM_DSE_COST_TABLE";

#[derive(Parser, Debug)]
#[command(name = "spm-dse", version, about = "Scratchpad memory design-space exploration for capsule-network accelerators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Peak usage and SMP/SEP sizing of a workload
    Analyze {
        #[arg(long)]
        workload: PathBuf,
    },
    /// Enumerate candidate organizations
    Enumerate {
        #[arg(long)]
        workload: PathBuf,
        #[command(flatten)]
        constraints: ConstraintArgs,
        /// Print only the number of configurations
        #[arg(long)]
        count_only: bool,
        /// Write configurations.csv here instead of printing
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every configuration and write a report bundle
    Explore {
        #[arg(long)]
        workload: Option<PathBuf>,
        /// Cost table; defaults to $SPM_DSE_COST_TABLE, then the shipped table
        #[arg(long)]
        cost: Option<PathBuf>,
        #[command(flatten)]
        constraints: ConstraintArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: one per core); 1 runs the sequential reference path
        #[arg(long)]
        jobs: Option<usize>,
        /// JSON project file; explicit flags win over its values
        #[arg(long)]
        project: Option<PathBuf>,
        /// Skip writing the report bundle
        #[arg(long)]
        no_report: bool,
    },
    /// Recompute and print the Pareto front of a report directory
    Pareto {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the per-memory table of a report directory
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Generate a workload from a layer description
    Estimate {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 16)]
        rows: u64,
        #[arg(long, default_value_t = 16)]
        cols: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a cost table from calibration anchors
    Calibrate {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Default, Clone)]
pub struct ConstraintArgs {
    /// Largest shared memory, e.g. 4MiB (IEC suffixes only)
    #[arg(long, value_parser = parse_size_arg)]
    pub max_shared_size: Option<u64>,
    /// Shared-memory port limit (1, 2 or 3)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub shared_ports: Option<u8>,
    /// Banks per memory
    #[arg(long)]
    pub banks: Option<u32>,
    /// Only non-gated organizations
    #[arg(long, conflicts_with = "only_power_gating")]
    pub no_power_gating: bool,
    /// Only gated organizations
    #[arg(long)]
    pub only_power_gating: bool,
    /// Comma-separated subset of smp,sep,hy
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
}

fn parse_size_arg(s: &str) -> std::result::Result<u64, String> {
    parse_size(s).map_err(|e| e.to_string())
}

/// Size given either as a byte count or as text such as "4MiB".
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SizeValue {
    Bytes(u64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectConstraints {
    max_shared_size: Option<SizeValue>,
    shared_ports: Option<u8>,
    banks: Option<u32>,
    power_gating: Option<PgMode>,
    families: Option<Vec<String>>,
}

/// Project file accepted by `explore --project`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    workload: Option<PathBuf>,
    cost: Option<PathBuf>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    #[serde(default)]
    constraints: ProjectConstraints,
    #[serde(default = "yes")]
    report: bool,
}

fn yes() -> bool {
    true
}

impl ProjectConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut p: ProjectConfig =
            serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
        // relative paths are relative to the project file
        let base = path.parent().unwrap_or(Path::new("."));
        for f in [&mut p.workload, &mut p.cost, &mut p.out] {
            if let Some(x) = f.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        }
        Ok(p)
    }
}

fn build_constraints(args: &ConstraintArgs, project: Option<&ProjectConstraints>) -> Result<ExplorationConstraints> {
    let mut c = ExplorationConstraints::default();
    if let Some(p) = project {
        c.max_shared_size = match &p.max_shared_size {
            None => None,
            Some(SizeValue::Bytes(b)) => Some(*b),
            Some(SizeValue::Text(t)) => Some(parse_size(t)?),
        };
        c.shared_ports = p.shared_ports;
        if let Some(b) = p.banks {
            c.banks = b;
        }
        if let Some(m) = p.power_gating {
            c.power_gating = m;
        }
        if let Some(f) = &p.families {
            c.families = f.iter().map(|s| OrgKind::parse(s)).collect::<Result<_>>()?;
        }
    }
    if args.max_shared_size.is_some() {
        c.max_shared_size = args.max_shared_size;
    }
    if args.shared_ports.is_some() {
        c.shared_ports = args.shared_ports;
    }
    if let Some(b) = args.banks {
        c.banks = b;
    }
    if args.no_power_gating {
        c.power_gating = PgMode::OnlyNonPg;
    }
    if args.only_power_gating {
        c.power_gating = PgMode::OnlyPg;
    }
    if let Some(f) = &args.families {
        let mut kinds: Vec<OrgKind> = f.iter().map(|s| OrgKind::parse(s)).collect::<Result<_>>()?;
        kinds.sort();
        kinds.dedup();
        c.families = kinds;
    }
    c.validate()?;
    Ok(c)
}

fn resolve_cost(cost: Option<PathBuf>) -> Result<CostTable> {
    let path = cost
        .or_else(|| std::env::var_os(COST_TABLE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| crate::data_dir().join("cost32nm.json"));
    load_cost_table(path)
}

/// Every flag of every subcommand, for the top-level help text.
fn flag_listing() -> String {
    let cmd = Cli::command();
    let mut s = String::from("Flags by subcommand:\n");
    for sub in cmd.get_subcommands() {
        let flags: Vec<String> = sub
            .get_arguments()
            .filter_map(|a| a.get_long().map(|l| format!("--{l}")))
            .collect();
        s.push_str(&format!("  {:<10} {}\n", sub.get_name(), flags.join(" ")));
    }
    s.push_str(&format!("\nEnvironment:\n  {COST_TABLE_ENV}  default cost table path\n"));
    s.push_str("\nExit codes: 0 ok, 1 usage, 2 validation, 3 evaluation, 4 I/O\n");
    s
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { workload } => {
            let t = load_workload(&workload)?;
            let p = peak_usage(&t);
            let (d, w, a) = size_sep(&t)?;
            let off = derive_offchip(&t);
            println!("network      {}", t.network);
            println!("operations   {}", t.operations.len());
            println!("peak data    {} B", p.max_data);
            println!("peak weight  {} B", p.max_weight);
            println!("peak acc     {} B", p.max_acc);
            println!("peak sum     {} B", p.max_sum);
            println!("SMP shared   {}", format_size(size_smp(&t)?));
            println!("SEP          data {} / weight {} / acc {}", format_size(d), format_size(w), format_size(a));
            println!("HY tuples    {}", enumerate_hybrid_sizes(&t)?.len());
            println!("off-chip     {} reads, {} writes", off.total_reads(), off.total_writes());
            Ok(())
        }
        Command::Enumerate { workload, constraints, count_only, out } => {
            let t = load_workload(&workload)?;
            let c = build_constraints(&constraints, None)?;
            if count_only {
                println!("{}", count_all(&t, &c)?);
                return Ok(());
            }
            let mut text = String::from("config_id,organization\n");
            let mut n = 0u64;
            for (i, o) in enumerate_all(&t, &c)?.enumerate() {
                text.push_str(&format!("{i},{o}\n"));
                n += 1;
            }
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    let p = dir.join("configurations.csv");
                    std::fs::write(&p, text).map_err(|e| Error::io(p, e))?;
                    println!("{n}");
                }
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Explore { workload, cost, constraints, out, jobs, project, no_report } => {
            let proj = project.as_deref().map(ProjectConfig::load).transpose()?;
            let workload = workload
                .or_else(|| proj.as_ref().and_then(|p| p.workload.clone()))
                .ok_or_else(|| Error::Usage("explore needs --workload".into()))?;
            let cost = cost.or_else(|| proj.as_ref().and_then(|p| p.cost.clone()));
            let out = out.or_else(|| proj.as_ref().and_then(|p| p.out.clone()));
            let jobs = jobs.or_else(|| proj.as_ref().and_then(|p| p.jobs));
            if jobs == Some(0) {
                return Err(Error::Usage("jobs must be at least 1".into()));
            }
            // unset means one worker per core
            let jobs = jobs.unwrap_or(0);
            let want_report = !no_report && proj.as_ref().is_none_or(|p| p.report);
            let c = build_constraints(&constraints, proj.as_ref().map(|p| &p.constraints))?;
            let t = load_workload(&workload)?;
            let table = resolve_cost(cost)?;
            let ex = explore(&t, &table, &c, jobs)?;
            println!("{}: {} configurations", t.network, ex.summary.configurations);
            for (fam, n) in &ex.summary.per_family {
                println!("  {fam:<12} {n}");
            }
            let front = pareto_front(&ex.results)?;
            println!("pareto front: {} configurations", front.len());
            for (fam, r) in select_named(&ex.results) {
                println!(
                    "  {:<12} {:>10.3} mm2 {:>12.3} mJ  {}",
                    fam.to_string(),
                    r.area_mm2,
                    r.energy_j * 1e3,
                    r.organization
                );
            }
            if want_report {
                let dir = out.ok_or_else(|| Error::Usage("explore needs --out (or --no-report)".into()))?;
                let m = emit(&t, &table, &ex, &dir)?;
                println!("wrote {} files to {}", m.files.len() + 1, dir.display());
            }
            Ok(())
        }
        Command::Pareto { input } => {
            let p = input.join("scatter.csv");
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let rows = read_scatter(&text)?;
            let mut pts: Vec<_> = rows.iter().collect();
            pts.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.3.total_cmp(&b.3)).then(a.0.cmp(&b.0)));
            let mut best = f64::INFINITY;
            let mut best_area = f64::NAN;
            println!("config_id,family,area_mm2,energy_j");
            for (id, fam, area, energy) in pts {
                if *energy < best || (*energy == best && *area == best_area) {
                    if *energy < best {
                        best = *energy;
                        best_area = *area;
                    }
                    println!("{id},{fam},{area},{energy}");
                }
            }
            Ok(())
        }
        Command::Report { input } => {
            let mut results = Vec::new();
            let mut names: Vec<PathBuf> = std::fs::read_dir(&input)
                .map_err(|e| Error::io(&input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("breakdown_")))
                .collect();
            names.sort();
            for p in names {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let v: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| Error::Parse { path: p.clone(), msg: e.to_string() })?;
                results.push(crate::report::breakdown_from_json(&v).ok_or_else(|| Error::Parse {
                    path: p.clone(),
                    msg: "not a breakdown file".into(),
                })?);
            }
            results.sort_by_key(|r| r.organization.family());
            print!("{}", render_table(&results));
            Ok(())
        }
        Command::Estimate { net, rows, cols, out } => {
            let text = std::fs::read_to_string(&net).map_err(|e| Error::io(&net, e))?;
            let desc: NetworkDesc =
                serde_json::from_str(&text).map_err(|e| Error::Parse { path: net.clone(), msg: e.to_string() })?;
            let t = estimate_caps_workload(&desc, rows, cols)?;
            let json = t.to_json() + "\n";
            match out {
                Some(p) => std::fs::write(&p, json).map_err(|e| Error::io(p, e))?,
                None => print!("{json}"),
            }
            Ok(())
        }
        Command::Calibrate { anchors, out } => {
            let cal = crate::calibrate::calibrate_from_files(&anchors)?;
            std::fs::write(&out, cal.table.to_json()).map_err(|e| Error::io(&out, e))?;
            println!("{} entries written to {}", cal.table.entries().len(), out.display());
            let set = crate::calibrate::AnchorSet::load(&anchors)?;
            let workloads = set.load_workloads(anchors.parent().unwrap_or(Path::new(".")))?;
            let cells = crate::calibrate::reproduce(&set, &workloads, &cal.table)?;
            let worst = cells.iter().map(|c| c.error()).fold(0.0, f64::max);
            println!("{} printed cells reproduced, largest deviation {worst:.5}", cells.len());
            Ok(())
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cmd = Cli::command().after_help(flag_listing());
    let matches = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
