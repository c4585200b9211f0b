use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use concord_core::cce::{self, SearchOptions, DEFAULT_CHOICE_LIMIT, HARD_CHOICE_LIMIT};
use concord_core::events::replay;
use concord_core::model::{validate_profile, Profile, ValidatedProfile, Weights};
use concord_core::pma;
use concord_core::Error;
use concord_service::store::{load_log, LoadError};
use concord_service::{Config, ServiceOptions};

mod render;

use render::{decimal, sequence, set, Format, Table};

#[derive(Parser)]
#[command(name = "concord", version, about = "Consensus-building analyses for group decisions")]
struct Cli {
    /// Table output format.
    #[arg(long, global = true, value_enum, default_value = "markdown")]
    format: Format,
    /// Largest choice set the exhaustive compromise search accepts.
    #[arg(long, global = true, default_value_t = DEFAULT_CHOICE_LIMIT)]
    cce_limit: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a profile document and report every problem found.
    Validate { profile: PathBuf },
    /// Permissible meeting analysis.
    Pma {
        profile: PathBuf,
        /// Also list every widening vector up to this total.
        #[arg(long, value_name = "MAX_TOTAL")]
        table: Option<usize>,
    },
    /// Compromise choice exploration over every common order.
    Cce {
        profile: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        w_mu: f64,
        #[arg(long, default_value_t = 1.0)]
        w_sigma: f64,
        /// Number of rows to print.
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Rebuild a session from its event log and summarize it.
    Replay { log: PathBuf },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Require bearer tokens on every session request.
        #[arg(long)]
        auth: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidProfile(_)
            | Error::Parse(_)
            | Error::MissingBallots(_)
            | Error::NotAPermutation(_)
            | Error::InvalidWeights { .. }
            | Error::ZeroLimit => 2,
            Error::TooManyChoices { .. }
            | Error::LimitAboveMaximum(_)
            | Error::TableTooLarge { .. }
            | Error::SearchSpaceTooLarge { .. } => 3,
            _ => 1,
        };
        let mut message = e.to_string();
        if let Error::InvalidProfile(violations) = &e {
            message = String::from("invalid profile:");
            for v in violations {
                message += &format!("\n  - {v}");
            }
        }
        Failure { code, message }
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if cli.cce_limit > HARD_CHOICE_LIMIT {
        return Err(Failure::new(
            3,
            format!("--cce-limit {} is above the hard maximum of {HARD_CHOICE_LIMIT}", cli.cce_limit),
        ));
    }
    if cli.cce_limit > DEFAULT_CHOICE_LIMIT {
        eprintln!(
            "warning: --cce-limit {} allows searches of up to {} orders; expect long runtimes",
            cli.cce_limit,
            (1..=cli.cce_limit as u64).product::<u64>()
        );
    }
    match cli.command {
        Command::Validate { profile } => validate(&profile),
        Command::Pma { profile, table } => cmd_pma(&profile, table, cli.format),
        Command::Cce {
            profile,
            w_mu,
            w_sigma,
            limit,
        } => cmd_cce(&profile, w_mu, w_sigma, limit, cli.cce_limit, cli.format),
        Command::Replay { log } => cmd_replay(&log),
        Command::Serve {
            data_dir,
            bind,
            auth,
        } => serve(Config {
            data_dir,
            bind,
            options: ServiceOptions {
                cce_limit: cli.cce_limit,
                auth,
            },
        }),
    }
}

fn read_profile(path: &Path) -> Result<Profile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(1, format!("cannot read {}: {e}", path.display())))?;
    Profile::from_json(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn load(path: &Path) -> Result<ValidatedProfile, Failure> {
    let profile = read_profile(path)?;
    validate_profile(profile).map_err(|v| Error::InvalidProfile(v).into())
}

fn validate(path: &Path) -> Outcome {
    let p = load(path)?;
    Ok(format!(
        "ok: {} choices, {} participants\n",
        p.n(),
        p.m()
    ))
}

fn cmd_pma(path: &Path, table: Option<usize>, format: Format) -> Outcome {
    let profile = load(path)?;
    let result = pma::analyze(&profile)?;
    let mut out = format!(
        "consensus: {}, total: {}\n",
        result.consensus_choices.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        result.total_expansion
    );
    for (choice, witness) in &result.witnesses {
        out += &format!("witness {choice}: ({})\n", join(&witness.0, ","));
    }
    if let Some(max_total) = table {
        let rows = pma::expansion_table(&profile, max_total)?;
        let ids: Vec<String> = profile.participants().iter().map(|p| p.id.to_string()).collect();
        let mut t = Table::new(
            ids.iter()
                .map(|id| format!("l_{id}"))
                .chain(["total".to_owned()])
                .chain(ids.iter().map(|id| format!("S_{id}")))
                .chain(["intersection".to_owned()]),
        );
        for row in rows {
            let mut cells: Vec<String> = row.expansion.0.iter().map(ToString::to_string).collect();
            cells.push(row.total.to_string());
            cells.extend(row.permissible_sets.iter().map(|s| set(s)));
            cells.push(set(&row.intersection));
            t.push(cells);
        }
        out.push('\n');
        out += &t.render(format);
    }
    Ok(out)
}

fn cmd_cce(
    path: &Path,
    w_mu: f64,
    w_sigma: f64,
    limit: usize,
    cce_limit: usize,
    format: Format,
) -> Outcome {
    let profile = load(path)?;
    let options = SearchOptions::new(Weights::new(w_mu, w_sigma)?).with_max_choices(cce_limit)?;
    let rows = cce::score_table_with(&profile, &options, limit)?;
    let result = cce::search_full_with(&profile, &options)?;

    let mut t = Table::new(
        ["rank".to_owned(), "order".to_owned()]
            .into_iter()
            .chain(profile.participants().iter().map(|p| format!("r_{}", p.id)))
            .chain(["mu".to_owned(), "sigma".to_owned(), "score".to_owned()]),
    );
    for (i, row) in rows.iter().enumerate() {
        let mut cells = vec![(i + 1).to_string(), sequence(&row.order)];
        cells.extend(row.r.iter().map(ToString::to_string));
        cells.extend([decimal(row.mu), decimal(row.sigma), decimal(row.score)]);
        t.push(cells);
    }
    let mut out = t.render(format);
    out.push('\n');
    for best in &result.best {
        out += &format!("consensus order: {} (score {})\n", sequence(&best.order), decimal(best.score));
    }
    out += &format!(
        "consensus choice: {}\n",
        result.consensus_choices.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    );
    out += &format!("orders explored: {}\n", result.explored);
    Ok(out)
}

fn cmd_replay(path: &Path) -> Outcome {
    let events = load_log(path).map_err(|e| match e {
        LoadError::Io { .. } => Failure::new(1, e.to_string()),
        LoadError::Corrupt { .. } => Failure::new(4, e.to_string()),
    })?;
    let state = replay(&events).map_err(|e| Failure::new(4, format!("{}: {e}", path.display())))?;
    let rounds = state.outcomes().len();
    let mut out = format!(
        "{} after {rounds} discussion round{}\n",
        state.phase(),
        if rounds == 1 { "" } else { "s" }
    );
    out += &format!("generation: {}\n", state.generation());
    out += &format!("events: {}\n", events.len());
    for (i, record) in state.outcomes().iter().enumerate() {
        let o = &record.outcome;
        let verdict = match (&o.consensus, &o.choice) {
            (true, Some(c)) => format!("consensus on {c}"),
            _ => "no consensus".to_owned(),
        };
        out += &format!(
            "round {}: {} in generation {}, {verdict}",
            i + 1,
            record.phase,
            record.generation
        );
        if !o.note.is_empty() {
            out += &format!(" ({})", o.note);
        }
        out.push('\n');
    }
    for scc in state.scc_history() {
        out += &format!(
            "scc round {}: pma {} cce {} union {}{}\n",
            scc.round,
            set(&scc.from_pma),
            set(&scc.from_cce),
            set(&scc.union),
            if scc.exhausted { " (exhausted)" } else { "" }
        );
    }
    Ok(out)
}

fn serve(config: Config) -> Outcome {
    tracing_subscriber::fmt().init();
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Failure::new(1, format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(concord_service::serve(config))
        .map_err(|e| Failure::new(1, e.to_string()))?;
    Ok(String::new())
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}
