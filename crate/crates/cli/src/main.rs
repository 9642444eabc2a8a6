use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use jrank::jr::verify_jr;
use jrank::mallows::{phi_grid, run_price_sweep, SweepConfig};
use jrank::scoring::ItemScores;
use jrank::solve::{
    cohesive_groups_tight_instance, diverse_approval_worst_case, greedy_cc_with,
    optimal_jr_set_exact_with, optimal_set_with, price_of_jr_with, unbounded_price_instance,
    Method, PriceMethod, DEFAULT_BUDGET,
};
use jrank::{Instance, Rule, ScoringRule};
use jrank_cli::fetch::{
    default_cache_dir, fetch_dataset, fetch_manifest, FetchError, FetchOptions, Manifest,
};
use jrank_cli::io::{
    self, ApprovalMode, ApprovalTable, CsvSources, GroupTable, IoError, LoadedInstance, ScoreTable,
};
use jrank_cli::render::{self, Format};
use jrank_cli::report::representation_report;

/// Top-k selection under justified representation, and the price of enforcing it.
#[derive(Debug, Parser)]
#[command(name = "jrank", version, about)]
struct Cli {
    /// Master seed for anything random
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Most k-subsets the exact JR solver may enumerate
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,

    /// Never touch the network; serve fetches from the cache only
    #[arg(long, global = true)]
    offline: bool,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Binary,
    Probability,
}

/// Where the instance comes from: a JSON file, or CSV files plus `-k`.
#[derive(Debug, Args)]
struct InstanceArgs {
    /// Instance as JSON (`n`, `m`, `k`, `approvals`, optional `groups`, `external_scores`)
    #[arg(long, conflicts_with_all = ["approvals", "groups", "scores", "comments"])]
    instance: Option<PathBuf>,

    /// Approvals CSV: `user_id,item_id,value`
    #[arg(long, required_unless_present = "instance")]
    approvals: Option<PathBuf>,

    /// Group labels CSV: `user_id,group_id`
    #[arg(long)]
    groups: Option<PathBuf>,

    /// External item scores CSV: `item_id,score`
    #[arg(long)]
    scores: Option<PathBuf>,

    /// Comment text CSV `item_id,text`; empty and duplicate comments are dropped
    #[arg(long)]
    comments: Option<PathBuf>,

    /// Committee size (required with CSV input, overrides the JSON value)
    #[arg(short, long)]
    k: Option<usize>,

    #[arg(long, value_enum, default_value_t = Mode::Binary)]
    mode: Mode,

    /// Probability-mode cutoff; values strictly above it count as approval
    #[arg(long, default_value_t = 0.5)]
    cutoff: f64,
}

impl InstanceArgs {
    fn load(&self) -> anyhow::Result<LoadedInstance> {
        if let Some(path) = &self.instance {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let instance: Instance = serde_json::from_str(&text)
                .map_err(|e| IoError::Parse(format!("{}: {e}", path.display())))?;
            let instance = match self.k {
                Some(k) => instance.with_k(k)?,
                None => instance,
            };
            return Ok(LoadedInstance::indexed(instance));
        }
        let Some(approvals) = &self.approvals else {
            bail!(IoError::Parse(
                "either --instance or --approvals is required".into()
            ));
        };
        let Some(k) = self.k else {
            bail!(IoError::Parse("-k is required with --approvals".into()));
        };
        let mode = match self.mode {
            Mode::Binary => ApprovalMode::Binary,
            Mode::Probability => ApprovalMode::Probability {
                cutoff: self.cutoff,
            },
        };
        let table = ApprovalTable::read(approvals, mode)?;
        let groups = self.groups.as_deref().map(GroupTable::read).transpose()?;
        let scores = self.scores.as_deref().map(ScoreTable::read).transpose()?;
        let keep = match &self.comments {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Some(io::dedup_comments(&io::parse_comments_csv(&text)?))
            }
            None => None,
        };
        Ok(io::assemble(&CsvSources {
            approvals: &table,
            mode,
            groups: groups.as_ref(),
            scores: scores.as_ref(),
            keep_items: keep.as_deref(),
            k,
        })?)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Construction {
    /// Profile-independent scores with an unbounded price
    #[value(alias = "prop41")]
    Unbounded,
    /// Maximin diverse approval paying a price of k
    #[value(alias = "thm42")]
    DiverseWorst,
    /// Cohesive groups meeting the k / (k - gamma) bound
    #[value(alias = "thm51")]
    CohesiveTight,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select a committee
    Select {
        #[command(flatten)]
        input: InstanceArgs,
        #[arg(long)]
        rule: Rule,
        /// opt, exact or greedy
        #[arg(long, default_value = "greedy")]
        method: Method,
    },
    /// Check whether a set of items is n/k-justifying
    VerifyJr {
        #[command(flatten)]
        input: InstanceArgs,
        /// Comma-separated item ids
        #[arg(long, value_delimiter = ',')]
        items: Vec<String>,
    },
    /// Price of JR: optimal score over the best JR (exact) or GreedyCC score
    Price {
        #[command(flatten)]
        input: InstanceArgs,
        #[arg(long)]
        rule: Rule,
        /// exact or greedy
        #[arg(long, default_value = "greedy")]
        method: Method,
    },
    /// Unrepresented users for a committee, overall and per group
    Report {
        #[command(flatten)]
        input: InstanceArgs,
        /// Comma-separated item ids; if absent the committee is selected with --rule/--method
        #[arg(long, value_delimiter = ',', required_unless_present = "rule")]
        items: Vec<String>,
        #[arg(long)]
        rule: Option<Rule>,
        #[arg(long, default_value = "greedy")]
        method: Method,
    },
    /// GreedyCC price sweep over dispersions of a polarized Mallows mixture
    Simulate {
        /// Dispersion grid as start:stop:step
        #[arg(long, default_value = "0.1:1.0:0.05")]
        phi: String,
        #[arg(short, default_value_t = 100)]
        n: usize,
        #[arg(short, default_value_t = 100)]
        m: usize,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 25)]
        tau: usize,
        /// Instances per grid point
        #[arg(long, default_value_t = 100)]
        sims: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value = "engagement")]
        rule: Rule,
        /// Full scale: 1000 instances per point on a 0.01 grid
        #[arg(long)]
        full: bool,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG plot
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Generate a worst-case construction as instance files
    Construct {
        #[arg(value_enum)]
        name: Construction,
        #[arg(short)]
        n: Option<usize>,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        gamma: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Write JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write approvals.csv, groups.csv and scores.csv into this directory
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Download dataset files into the local cache
    Fetch {
        #[arg(long)]
        url: Vec<String>,
        /// JSON manifest of pinned files
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, env = "JRANK_CACHE_DIR")]
        cache_dir: Option<PathBuf>,
        /// Expected SHA-256 of the downloaded file
        #[arg(long)]
        sha256: Option<String>,
    },
}

fn resolve_items(loaded: &LoadedInstance, items: &[String]) -> anyhow::Result<Vec<usize>> {
    let mut resolved = loaded.items.resolve(items.iter().map(String::as_str))?;
    resolved.sort_unstable();
    resolved.dedup();
    Ok(resolved)
}

fn select(
    loaded: &LoadedInstance,
    rule: &Rule,
    method: Method,
    budget: u64,
) -> anyhow::Result<jrank::SelectionResult> {
    let scores = ItemScores::compute(rule, &loaded.instance)?;
    let inst = &loaded.instance;
    Ok(match method {
        Method::OptUnconstrained => optimal_set_with(inst, &scores, rule.name()),
        Method::OptJrExact => optimal_jr_set_exact_with(inst, &scores, rule.name(), budget)?,
        Method::GreedyCc => greedy_cc_with(inst, &scores, rule.name()),
    })
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts[..] else {
        bail!(jrank::Error::BadParams(format!(
            "grid '{spec}' is not start:stop:step"
        )));
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| jrank::Error::BadParams(format!("'{s}' is not a number")))
    };
    Ok(phi_grid(parse(start)?, parse(stop)?, parse(step)?)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let format = cli.format;
    match cli.command {
        Command::Select {
            input,
            rule,
            method,
        } => {
            let loaded = input.load()?;
            let result = select(&loaded, &rule, method, cli.budget)?;
            print!("{}", render::selection(&result, &loaded, format));
        }
        Command::VerifyJr { input, items } => {
            let loaded = input.load()?;
            let items = resolve_items(&loaded, &items)?;
            let set = loaded.instance.item_set(items.iter().copied())?;
            print!(
                "{}",
                render::jr_check(&items, &verify_jr(&set, &loaded.instance), &loaded, format)
            );
        }
        Command::Price {
            input,
            rule,
            method,
        } => {
            let loaded = input.load()?;
            let method = match method {
                Method::OptJrExact => PriceMethod::Exact { budget: cli.budget },
                Method::GreedyCc => PriceMethod::Greedy,
                Method::OptUnconstrained => {
                    bail!(jrank::Error::BadParams(
                        "price needs --method exact or greedy".into()
                    ))
                }
            };
            let scores = ItemScores::compute(&rule, &loaded.instance)?;
            let report = price_of_jr_with(&loaded.instance, &scores, rule.name(), method)?;
            print!("{}", render::price(&report, &loaded, format));
        }
        Command::Report {
            input,
            items,
            rule,
            method,
        } => {
            let loaded = input.load()?;
            let items = match (&rule, items.is_empty()) {
                (Some(rule), true) => select(&loaded, rule, method, cli.budget)?.committee.items,
                _ => resolve_items(&loaded, &items)?,
            };
            let set = loaded.instance.item_set(items)?;
            let report =
                representation_report(&set, &loaded.instance, rule.as_ref().map(|r| r.as_str()));
            print!("{}", render::representation(&report, &loaded, format));
        }
        Command::Simulate {
            phi,
            n,
            m,
            k,
            tau,
            sims,
            delta,
            rule,
            full,
            out,
            svg,
        } => {
            let (grid, sims) = if full {
                (phi_grid(0.1, 1.0, 0.01)?, 1000)
            } else {
                (parse_grid(&phi)?, sims)
            };
            let config = SweepConfig {
                n,
                m,
                k,
                tau,
                sims,
                delta,
                seed: cli.seed,
            };
            let report = run_price_sweep(&config, &grid, &rule)?;
            write_output(out.as_deref(), &render::simulation(&report, format))?;
            if let Some(path) = svg {
                fs::write(&path, report.to_svg())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Construct {
            name,
            n,
            k,
            gamma,
            epsilon,
            c,
            out,
            csv_dir,
        } => {
            let need_n = || {
                n.ok_or_else(|| {
                    jrank::Error::BadParams("-n is required for this construction".into())
                })
            };
            let instance = match name {
                Construction::Unbounded => unbounded_price_instance(k, epsilon, c)?,
                Construction::DiverseWorst => diverse_approval_worst_case(need_n()?, k)?,
                Construction::CohesiveTight => {
                    let gamma = gamma
                        .ok_or_else(|| jrank::Error::BadParams("--gamma is required".into()))?;
                    cohesive_groups_tight_instance(need_n()?, k, gamma)?
                }
            };
            let mut json = serde_json::to_string_pretty(&instance)?;
            json.push('\n');
            write_output(out.as_deref(), &json)?;
            if let Some(dir) = csv_dir {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let write = |name: &str, text: String| {
                    let path = dir.join(name);
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
                };
                write("approvals.csv", io::approvals_csv(&instance))?;
                if let Some(groups) = instance.groups() {
                    write("groups.csv", io::groups_csv(groups))?;
                }
                if let Some(scores) = instance.external_scores() {
                    write("scores.csv", io::scores_csv(scores))?;
                }
            }
        }
        Command::Fetch {
            url,
            manifest,
            cache_dir,
            sha256,
        } => {
            let cache_dir = cache_dir.unwrap_or_else(default_cache_dir);
            let options = FetchOptions {
                offline: cli.offline,
                sha256,
                ..FetchOptions::default()
            };
            let mut paths = Vec::new();
            if let Some(path) = manifest {
                paths.extend(fetch_manifest(
                    &Manifest::read(&path)?,
                    &cache_dir,
                    &options,
                )?);
            }
            for url in &url {
                paths.push(fetch_dataset(url, &cache_dir, &options)?);
            }
            if paths.is_empty() {
                bail!(jrank::Error::BadParams("give --url or --manifest".into()));
            }
            for path in paths {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

/// 1 for invalid input, 2 for failures at run time (budget, network, I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    let model = |e: &jrank::Error| match e {
        jrank::Error::BudgetExceeded { .. } => 2,
        _ => 1,
    };
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<jrank::Error>() {
            return model(e);
        }
        if let Some(e) = cause.downcast_ref::<IoError>() {
            return match e {
                IoError::Model(e) => model(e),
                _ => 1,
            };
        }
        if cause.is::<FetchError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
