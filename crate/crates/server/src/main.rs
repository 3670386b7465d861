use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use barangay_core::access::{Officer, Role};
use barangay_core::analytics::{cross_validate, encode_named, import_offender_csv, Dataset, LearnerKind, LikelihoodTask, TrainedModel};
use barangay_core::dates::{parse_date, DateRange};
use barangay_core::geo::fixture::synthetic_zones_json;
use barangay_core::opendata::DatasetId;
use barangay_core::registry::ResidentId;
use barangay_core::synthetic::{populate, PopulationSize};
use barangay_core::{System, SystemConfig};
use barangay_server::config::{ServeArgs, StoreArgs};
use barangay_server::sessions::SessionStore;
use barangay_server::{bootstrap_admin, serve, AppState};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "barangay", version, about = "Barangay records, casework, maps, SMS and open data")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Reoffend,
    OffendByResidency,
}

impl From<Task> for LikelihoodTask {
    fn from(t: Task) -> Self {
        match t {
            Task::Reoffend => LikelihoodTask::Reoffend,
            Task::OffendByResidency => LikelihoodTask::OffendByResidency,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    NaiveBayes,
    Tree,
}

#[derive(clap::Args)]
struct LearnerArgs {
    #[arg(long, value_enum, default_value = "naive-bayes")]
    learner: Learner,
    /// Laplace smoothing for naive Bayes.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
}

impl LearnerArgs {
    fn kind(&self) -> LearnerKind {
        match self.learner {
            Learner::NaiveBayes => LearnerKind::NaiveBayes { alpha: self.alpha },
            Learner::Tree => LearnerKind::DecisionTree {
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
            },
        }
    }
}

/// Where training records come from: the blotter, or an offender CSV.
#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Offender records with a `label` column.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Load residents or blotter cases from CSV (all rows or none).
    Import {
        #[arg(long, conflicts_with = "blotter", required_unless_present = "blotter")]
        residents: Option<PathBuf>,
        #[arg(long)]
        blotter: Option<PathBuf>,
    },
    /// Write an open-data CSV.
    Export {
        /// barangay_profile, crime_status, health_status or programs_advisories.
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        /// Output file; standard output when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Train a classifier and print the model as JSON.
    Train {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        learner: LearnerArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Cross-validate a learner and print the report as JSON.
    Evaluate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        learner: LearnerArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify one record with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// `name=value`, repeatable; omitted features are unknown.
        #[arg(long = "feature", value_parser = parse_kv)]
        features: Vec<(String, String)>,
    },
    /// Create a user account. The password is read from BARANGAY_PASSWORD
    /// or the first line of standard input.
    Useradd {
        #[arg(long)]
        username: String,
        /// secretary, treasurer, health_worker, lgu or resident_public.
        #[arg(long)]
        role: String,
        #[arg(long)]
        linked_resident: Option<String>,
        #[arg(long, env = "BARANGAY_PASSWORD", hide_env_values = true)]
        password: Option<String>,
    },
    /// Fill the store with random demo records.
    Seed {
        #[arg(long, default_value_t = 60)]
        residents: usize,
        #[arg(long, default_value_t = 40)]
        cases: usize,
        #[arg(long, default_value_t = 10)]
        children: usize,
        #[arg(long, default_value_t = 30)]
        health_cases: usize,
        #[arg(long, default_value_t = 3)]
        advisories: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the built-in demo zone layout in ZONES_FILE format.
    DemoZones,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected name=value, got {s:?}"))
}

fn cli_officer() -> Officer {
    Officer::new("cli", Role::Secretary)
}

fn open_read_only(store: &StoreArgs) -> anyhow::Result<System> {
    let cfg = SystemConfig::new(store.zones()?).data_dir(&store.data_dir).read_only();
    Ok(System::open(cfg)?)
}

fn load_dataset(store: &StoreArgs, source: &Source) -> anyhow::Result<Dataset> {
    match (&source.task, &source.csv) {
        (_, Some(path)) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(import_offender_csv(&bytes)?)
        }
        (Some(task), None) => Ok(open_read_only(store)?.training_dataset((*task).into())?),
        (None, None) => bail!("give --task or --csv"),
    }
}

fn write_out(out: Option<&PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_line<T: serde::Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let store = cli.store;
    match cli.command {
        Command::Serve(args) => {
            let addr = args.bind()?;
            let sys = Arc::new(store.open(args.gateway.gateway()?)?);
            bootstrap_admin(&sys, args.admin_user.as_deref(), args.admin_password.as_deref())?;
            let sessions = Arc::new(SessionStore::new(chrono::Duration::minutes(args.session_ttl_minutes.max(1))));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .with_context(|| format!("BIND_FAILURE: cannot bind {addr}"))?;
                let local = listener.local_addr()?;
                println!("listening on {local}");
                tracing::info!(%local, "serving");
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                serve(listener, AppState::new(sys, sessions), shutdown).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Import { residents, blotter } => {
            let sys = store.open(None)?;
            if let Some(p) = residents {
                let ids = sys.import_residents(&cli_officer(), &std::fs::read(&p)?)?;
                println!("imported {} residents", ids.len());
            }
            if let Some(p) = blotter {
                let n = sys.import_blotter(&cli_officer(), &std::fs::read(&p)?)?;
                println!("imported {} cases", n.len());
            }
        }
        Command::Export { dataset, from, to, out } => {
            let id = DatasetId::parse(&dataset)?;
            let window = match (from, to) {
                (None, None) => None,
                (f, t) => Some(DateRange::new(
                    f.map(|s| parse_date("from", &s)).transpose()?.unwrap_or(chrono::NaiveDate::MIN),
                    t.map(|s| parse_date("to", &s)).transpose()?.unwrap_or(chrono::NaiveDate::MAX),
                )?),
            };
            let bytes = open_read_only(&store)?.export_dataset(id, window.as_ref())?;
            write_out(out.as_ref(), &bytes)?;
        }
        Command::Train { source, learner, out } => {
            let data = load_dataset(&store, &source)?;
            let model = TrainedModel::train(learner.kind(), &data)?;
            write_out(out.as_ref(), &json_line(&model)?)?;
        }
        Command::Evaluate {
            source,
            learner,
            k,
            seed,
        } => {
            let data = load_dataset(&store, &source)?;
            let report = cross_validate(&data, learner.kind(), k, seed)?;
            write_out(None, &json_line(&report)?)?;
        }
        Command::Predict { model, features } => {
            let bytes = std::fs::read(&model).with_context(|| format!("reading {}", model.display()))?;
            let model: TrainedModel = serde_json::from_slice(&bytes).context("model file is not a saved model")?;
            let x = encode_named(model.schema(), &features.into_iter().collect())?;
            write_out(None, &json_line(&model.predict(&x)?)?)?;
        }
        Command::Useradd {
            username,
            role,
            linked_resident,
            password,
        } => {
            let role = Role::parse(&role)?;
            let linked = linked_resident.as_deref().map(ResidentId::parse).transpose()?;
            let password = match password {
                Some(p) => p,
                None => {
                    let mut line = String::new();
                    std::io::stdin().lock().read_line(&mut line)?;
                    line.trim_end_matches(['\r', '\n']).to_string()
                }
            };
            let sys = store.open(None)?;
            sys.create_account(&username, &password, role, linked)?;
            println!("created {role} account {username}");
        }
        Command::Seed {
            residents,
            cases,
            children,
            health_cases,
            advisories,
            seed,
        } => {
            let sys = store.open(None)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let size = PopulationSize {
                residents,
                cases,
                children,
                health_cases,
                advisories,
            };
            populate(&sys, &cli_officer(), &mut rng, size)?;
            println!("store now holds {} residents and {} cases", sys.resident_count(), sys.cases().len());
        }
        Command::DemoZones => println!("{}", synthetic_zones_json()),
    }
    Ok(())
}
