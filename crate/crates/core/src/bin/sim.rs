use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use convsim::gateway::import_human_labels;
use convsim::persona::{baseline_profile, generate_profiles, read_profiles_jsonl, write_profiles_jsonl, Facets};
use convsim::prompt::{compile_baseline, compile_parameterized_omitting};
use convsim::runner::{
    self, load_result, report, store_human_labels, ExperimentConfig, ExperimentResult, ReportFormat,
};
use convsim::schema::{parse_parameters, validate_document};
use convsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Parameterized conversation simulation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a conversation parameter document.
    Validate {
        file: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Generate entrepreneur profiles as JSONL.
    Profiles {
        #[arg(short, long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Industry pool entry; repeatable. Defaults to the bundled list.
        #[arg(long = "industry")]
        industries: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Prompt utilities.
    Prompt {
        #[command(subcommand)]
        command: PromptCommand,
    },
    /// Run an experiment preset or config file.
    Run {
        /// Preset name (paper-diversity, paper-adherence, paper-drift,
        /// paper-stability, paper-revisit) or path to a TOML/JSON config.
        experiment: String,
        /// Multiplier on the profile count.
        #[arg(long)]
        scale: Option<f64>,
        /// Restrict to these provider ids; repeatable.
        #[arg(long = "provider")]
        providers: Vec<String>,
        /// Use the offline mock provider for generation and judging.
        #[arg(long)]
        mock: bool,
        /// Run directory; defaults to the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Finish the missing cells of a run directory.
    Resume { dir: PathBuf },
    /// Regenerate reports for a run directory.
    Report {
        dir: PathBuf,
        /// csv, jsonl or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Human label utilities.
    Labels {
        #[command(subcommand)]
        command: LabelsCommand,
    },
}

#[derive(Subcommand)]
enum PromptCommand {
    /// Compile a generation prompt and print it.
    Compile {
        /// Parameter document; omit with --baseline.
        #[arg(long, required_unless_present = "baseline")]
        params: Option<PathBuf>,
        /// Profiles JSONL; a generated profile is used when absent.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Line of the profiles file to use (0-based).
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Compile the unparameterized baseline prompt.
        #[arg(long, conflicts_with = "params")]
        baseline: bool,
        /// Baseline conversation length.
        #[arg(long, default_value_t = 10)]
        turns: u32,
        /// Parameter path to leave out of the block; repeatable.
        #[arg(long)]
        omit: Vec<String>,
        /// Print the whole bundle as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum LabelsCommand {
    /// Check a human-label JSONL file and optionally attach it to a run.
    Import {
        file: PathBuf,
        #[arg(long)]
        run: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn summary(r: &ExperimentResult) {
    println!("run directory: {}", r.run_dir.display());
    println!("config hash: {}", r.manifest.config_hash);
    println!(
        "cells: {} ({} completed, {} failed)",
        r.manifest.grid_size,
        r.records.len(),
        r.failures.len()
    );
    println!("provider calls: {}", r.provider_calls);
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file, json } => {
            let report = validate_document(&read(&file)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else if report.ok {
                println!("ok");
            } else {
                for v in &report.violations {
                    println!("{v}");
                }
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Profiles {
            n,
            seed,
            industries,
            out,
        } => {
            let pool = if industries.is_empty() {
                Facets::default().industries
            } else {
                industries
            };
            let profiles = generate_profiles(seed, n, &pool)?;
            match out {
                Some(path) => {
                    let f = fs::File::create(&path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    write_profiles_jsonl(f, &profiles)?;
                }
                None => write_profiles_jsonl(io::stdout().lock(), &profiles)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Prompt {
            command:
                PromptCommand::Compile {
                    params,
                    profile,
                    index,
                    seed,
                    baseline,
                    turns,
                    omit,
                    json,
                },
        } => {
            let bundle = if baseline {
                let p = match profile {
                    Some(path) => pick_profile(&path, index)?,
                    None => baseline_profile(seed),
                };
                compile_baseline(&p, turns)?
            } else {
                let params = parse_parameters(&read(params.as_deref().expect("clap requires params"))?)?;
                let p = match profile {
                    Some(path) => pick_profile(&path, index)?,
                    None => generate_profiles(seed, 1, &Facets::default().industries)?.remove(0),
                };
                let omit: Vec<&str> = omit.iter().map(String::as_str).collect();
                compile_parameterized_omitting(&p, &params, &omit)?
            };
            if json {
                println!("{}", serde_json::to_string_pretty(&bundle)?);
            } else {
                let mut out = io::stdout().lock();
                let _ = writeln!(out, "{}\n\n{}", bundle.system_text, bundle.instruction_text);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            experiment,
            scale,
            providers,
            mock,
            out,
            seed,
            workers,
        } => {
            let mut cfg = ExperimentConfig::resolve(&experiment)?;
            if let Some(f) = scale {
                cfg = cfg.scaled(f)?;
            }
            if mock {
                cfg = cfg.with_mock();
            }
            if !providers.is_empty() {
                cfg = cfg.with_providers(&providers)?;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let result = runner::run_experiment(&cfg)?;
            summary(&result);
            Ok(ExitCode::SUCCESS)
        }
        Command::Resume { dir } => {
            let result = runner::resume(&dir)?;
            summary(&result);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir, format } => {
            let format: ReportFormat = format.parse()?;
            let result = load_result(&dir)?;
            for path in report(&result, format)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Labels {
            command: LabelsCommand::Import { file, run },
        } => {
            let import = import_human_labels(&file)?;
            for e in &import.errors {
                eprintln!("line {}: {}", e.line, e.message);
            }
            println!(
                "{} judgments, {} rejected rows",
                import.records.len(),
                import.errors.len()
            );
            if let Some(dir) = run {
                let path = store_human_labels(&dir, &import.records)?;
                println!("stored in {}", path.display());
            }
            Ok(if import.errors.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn pick_profile(path: &Path, index: usize) -> Result<convsim::persona::EntrepreneurProfile> {
    let f = fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut all = read_profiles_jsonl(BufReader::new(f))?;
    if index >= all.len() {
        return Err(Error::Input(format!(
            "{} has {} profiles, no index {index}",
            path.display(),
            all.len()
        )));
    }
    Ok(all.swap_remove(index))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
