use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::de::DeserializeOwned;
use serde::Serialize;

use causal_prevent::data::{Dataset, Sample};
use causal_prevent::discretize::discretize_sample;
use causal_prevent::goal::GoalSpec;
use causal_prevent::harness::{
    demo_timely_shifted, export_heatmap, run_e1, run_e2, write_heatmap_csv, DemoConfig, E1Config, E2Config,
};
use causal_prevent::inference::{predict_success, InferenceConfig};
use causal_prevent::model::{CausalModel, LearnConfig};
use causal_prevent::prevention::{precompute_corrections, prevent, DEFAULT_TABLE_CAP};
use causal_prevent::search::{closest_success, SearchOptions};
use causal_prevent::sim::{run_episodes, SimConfig};
use causal_prevent::variables::VariableSet;

#[derive(Parser)]
#[command(name = "causal-prevent", version, about = "Learn causal models of action outcomes, then predict, explain and prevent failures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run stacking episodes and write the dataset as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the variable declarations needed by `learn`.
        #[arg(long)]
        variables_out: Option<PathBuf>,
    },
    /// Discretize a dataset, learn the structure and fit the CPTs.
    Learn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        variables: PathBuf,
        /// Bins, PC and prior settings as JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the learned graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Predicted success probability of a state.
    Predict(Query),
    /// Closest successful intervals for a state predicted to fail.
    Explain(Query),
    /// Keep a state predicted to succeed or return a corrected one.
    Prevent(Query),
    /// Precompute the correction for every cause assignment as CSV.
    Corrections {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        goal: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        inference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment pipeline and write its report.
    Evaluate {
        scenario: Scenario,
        /// Experiment settings; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write the plain-text tables here instead of stdout.
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Success probability over a grid of two variables as CSV.
    ExportHeatmap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        goal: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Variables enumerated as separate panels.
        #[arg(long, value_delimiter = ',')]
        facet: Vec<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        inference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    E1,
    E2,
    Demo,
}

#[derive(Args)]
struct Query {
    #[arg(long)]
    model: PathBuf,
    /// Variable values as a JSON object, e.g. {"xOff1": 0.02}.
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    goal: PathBuf,
    /// Overrides the threshold stored in the goal file.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Restrict the search to these cause variables.
    #[arg(long, value_delimiter = ',')]
    transitionable: Option<Vec<String>>,
    #[arg(long)]
    inference: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_optional<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_model(path: &Path) -> Result<CausalModel> {
    CausalModel::load(path).with_context(|| format!("loading {}", path.display()))
}

fn load_goal(path: &Path, epsilon: Option<f64>) -> Result<GoalSpec> {
    let goal: GoalSpec = read_json(path)?;
    Ok(match epsilon {
        Some(e) => goal.with_epsilon(e)?,
        None => goal,
    })
}

struct Loaded {
    model: CausalModel,
    state: Sample,
    goal: GoalSpec,
    options: SearchOptions,
}

fn load_query(q: &Query) -> Result<Loaded> {
    let model = load_model(&q.model)?;
    Ok(Loaded {
        state: read_json(&q.state)?,
        goal: load_goal(&q.goal, q.epsilon)?,
        options: SearchOptions {
            transitionable: q.transitionable.clone(),
            inference: read_optional(q.inference.as_deref())?,
        },
        model,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            variables_out,
        } => {
            let config: SimConfig = read_json(&config)?;
            let data = run_episodes(&config)?;
            data.write_csv(create(&out)?)?;
            if let Some(path) = variables_out {
                write_text(Some(&path), &to_json(&config.variables())?)?;
            }
            info!("wrote {} episodes to {}", data.len(), out.display());
        }
        Command::Learn {
            data,
            variables,
            config,
            out,
            dot,
        } => {
            let vars: VariableSet = read_json(&variables)?;
            let config: LearnConfig = read_json(&config)?;
            let file = File::open(&data).with_context(|| format!("opening {}", data.display()))?;
            let data = Dataset::read_csv(vars, file)?;
            let model = CausalModel::learn(&data, &config)?;
            model.save(&out)?;
            if let Some(path) = dot {
                write_text(Some(&path), &model.dag().to_dot())?;
            }
            info!("learned {} edges from {} samples", model.edges().len(), data.len());
        }
        Command::Predict(q) => {
            let l = load_query(&q)?;
            let assignment = discretize_sample(&l.state, l.model.scheme())?;
            let p = predict_success(&l.model, &assignment, &l.goal, &l.options.inference)?;
            write_text(q.out.as_deref(), &to_json(&p)?)?;
        }
        Command::Explain(q) => {
            let l = load_query(&q)?;
            let assignment = discretize_sample(&l.state, l.model.scheme())?;
            let p = predict_success(&l.model, &assignment, &l.goal, &l.options.inference)?.probability;
            if p >= l.goal.epsilon() {
                bail!("state is predicted to succeed (p = {p:.4}); nothing to explain");
            }
            let result = closest_success(&assignment, &l.model, &l.goal, &l.options)?;
            eprintln!("{}", result.explanation);
            write_text(q.out.as_deref(), &to_json(&result)?)?;
        }
        Command::Prevent(q) => {
            let l = load_query(&q)?;
            let outcome = prevent(&l.state, &l.model, &l.goal, &l.options)?;
            write_text(q.out.as_deref(), &to_json(&outcome)?)?;
        }
        Command::Corrections {
            model,
            goal,
            epsilon,
            inference,
            out,
        } => {
            let model = load_model(&model)?;
            let goal = load_goal(&goal, epsilon)?;
            let options = SearchOptions {
                transitionable: None,
                inference: read_optional(inference.as_deref())?,
            };
            let table = precompute_corrections(&model, &goal, &options, DEFAULT_TABLE_CAP)?;
            table.write_csv(create(&out)?)?;
            info!("wrote {} table entries to {}", table.len(), out.display());
        }
        Command::Evaluate {
            scenario,
            config,
            out,
            text,
        } => {
            let (json, rendered) = match scenario {
                Scenario::E1 => {
                    let report = run_e1(&read_optional::<E1Config>(config.as_deref())?)?;
                    (report.to_json()?, report.render_text())
                }
                Scenario::E2 => {
                    let (report, _) = run_e2(&read_optional::<E2Config>(config.as_deref())?)?;
                    (report.to_json()?, report.render_text())
                }
                Scenario::Demo => {
                    let report = demo_timely_shifted(&read_optional::<DemoConfig>(config.as_deref())?)?;
                    (report.to_json()?, report.render_text())
                }
            };
            write_text(Some(&out), &json)?;
            write_text(text.as_deref(), &rendered)?;
        }
        Command::ExportHeatmap {
            model,
            goal,
            x,
            y,
            facet,
            epsilon,
            inference,
            out,
        } => {
            let model = load_model(&model)?;
            let goal = load_goal(&goal, epsilon)?;
            let inference: InferenceConfig = read_optional(inference.as_deref())?;
            let facets: Vec<&str> = facet.iter().map(String::as_str).collect();
            let rows = export_heatmap(&model, &goal, &x, &y, &facets, &inference)?;
            write_heatmap_csv(&rows, &facets, &x, &y, create(&out)?)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
