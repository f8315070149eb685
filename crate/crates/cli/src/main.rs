//! `newsmon`: command-line front end for the monitoring pipeline.
//!
//! Every configuration key is also a flag (`--topics.k_max 6`); flags win
//! over the config file and `MONITOR_SEED` wins over both for the seed.
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 stage failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use newsmon_core::corpus::{load_corpus, CorpusFormat};
use newsmon_core::pipeline::{now, run_pipeline, write_predictions_csv, RunConfig, Task, Workspace, KEYS};
use newsmon_core::Error;

fn cli() -> Command {
    let mut cmd = Command::new("newsmon")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Spatio-temporal news monitoring: volume decomposition, topic models, classifiers, regional reports")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .value_name("FILE")
                .help("run configuration (flat `section.key = value` file)"),
        );
    for k in KEYS {
        let help = if k.default.is_empty() {
            k.help.to_string()
        } else {
            format!("{} [default: {}]", k.help, k.default)
        };
        cmd = cmd.arg(
            Arg::new(k.key)
                .long(k.key)
                .global(true)
                .value_name("VALUE")
                .help(help)
                .help_heading("Configuration keys"),
        );
    }
    let task = || {
        [
            Command::new("classify").about("news class model"),
            Command::new("sentiment").about("sentiment model"),
        ]
    };
    cmd.subcommand(Command::new("ingest").about("load and validate the corpus; write counts and the config snapshot"))
        .subcommand(Command::new("prep").about("tokenize and write the vocabulary and encoded documents"))
        .subcommand(Command::new("volume").about("daily, district, division and region-week volume tables"))
        .subcommand(Command::new("decompose").about("decompose the daily volume into trend, seasonal and residual"))
        .subcommand(
            Command::new("topics")
                .about("static topic models")
                .subcommand_required(true)
                .subcommand(Command::new("sweep").about("fit every K in [k_min, k_max] and pick the most coherent"))
                .subcommand(Command::new("fit").about("fit one model (topics.k or the sweep's choice)"))
                .subcommand(Command::new("top-words").about("rewrite top_words.csv from the saved model")),
        )
        .subcommand(
            Command::new("dtm")
                .about("weekly dynamic topic model")
                .subcommand_required(true)
                .subcommand(Command::new("fit").about("fit the slice-coupled model"))
                .subcommand(Command::new("export").about("rewrite prevalence and top-word tables from the saved model")),
        )
        .subcommand(
            Command::new("train")
                .about("train a neural model and score its test split")
                .subcommand_required(true)
                .subcommands(task()),
        )
        .subcommand(
            Command::new("eval")
                .about("score a saved model on the test split")
                .subcommand_required(true)
                .subcommands(task()),
        )
        .subcommand(
            Command::new("predict")
                .about("label another corpus file with a saved model")
                .subcommand_required(true)
                .subcommands(task().map(|c| {
                    c.arg(
                        Arg::new("input")
                            .long("input")
                            .required(true)
                            .value_name("FILE")
                            .help("corpus to label (.jsonl or .csv)"),
                    )
                    .arg(
                        Arg::new("out")
                            .long("out")
                            .value_name("FILE")
                            .help("output CSV [default: <output>/<task>_predictions_<input stem>.csv]"),
                    )
                })),
        )
        .subcommand(Command::new("geo").about("regional topic and sentiment tables"))
        .subcommand(
            Command::new("report")
                .about("run the whole pipeline and write the report bundle")
                .arg(Arg::new("quiet").long("quiet").short('q').action(ArgAction::SetTrue)),
        )
}

fn build_config(m: &ArgMatches) -> Result<RunConfig, Error> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(p) => RunConfig::load(&PathBuf::from(p))?,
        None => {
            let mut c = RunConfig::default();
            c.set_base_dir(std::env::current_dir().unwrap_or_else(|_| PathBuf::from(".")));
            c
        }
    };
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k.key) {
            cfg.set(k.key, v)?;
        }
    }
    cfg.apply_env()?;
    Ok(cfg)
}

/// Flag values given on the command line resolve against the working
/// directory, not the config file's directory.
fn absolutize_flag_paths(m: &ArgMatches, cfg: &mut RunConfig) -> Result<(), Error> {
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    for key in ["paths.corpus", "paths.resources", "paths.gazetteer", "paths.embeddings", "paths.output"] {
        if let Some(v) = m.get_one::<String>(key) {
            if !v.is_empty() && PathBuf::from(v).is_relative() {
                cfg.set(key, &cwd.join(v).to_string_lossy())?;
            }
        }
    }
    Ok(())
}

fn task_of(name: &str) -> Task {
    name.parse().expect("subcommand names are tasks")
}

fn run(m: &ArgMatches) -> Result<(), Error> {
    let mut cfg = build_config(m)?;
    absolutize_flag_paths(m, &mut cfg)?;
    let (name, sub) = m.subcommand().expect("subcommand required");
    if name == "report" {
        let report = run_pipeline(cfg)?;
        if !sub.get_flag("quiet") {
            for n in &report.notices {
                eprintln!("notice: {n}");
            }
            for s in &report.stages {
                eprintln!("{:>10}  {:8.2}s", s.stage, s.seconds);
            }
            println!("{} files in {}", report.files.len(), report.out_dir.display());
        }
        return Ok(());
    }
    let started = now();
    let mut ws = Workspace::open(cfg)?;
    let mut label = name.to_string();
    let result = dispatch(&mut ws, name, sub, &mut label);
    ws.finish(&label, started, result.as_ref().err())?;
    for n in &ws.notices {
        eprintln!("notice: {n}");
    }
    result
}

fn dispatch(ws: &mut Workspace, name: &str, sub: &ArgMatches, label: &mut String) -> Result<(), Error> {
    match name {
        "ingest" => ws.stage("ingest", |ws| ws.write_ingest()),
        "prep" => ws.stage("prep", |ws| ws.write_prep()),
        "volume" => ws.stage("volume", |ws| ws.volume()),
        "decompose" => ws.stage("decompose", |ws| {
            let d = ws.decompose()?;
            println!("seasonal indices: {:?}", d.seasonal_indices);
            Ok(())
        }),
        "topics" => {
            let (op, _) = sub.subcommand().expect("subcommand required");
            *label = format!("topics {op}");
            match op {
                "sweep" => ws.stage("topics", |ws| {
                    let r = ws.topics_sweep()?;
                    for s in &r.scores {
                        println!("K={:<3} coherence={:.4} log_perplexity={:.4}", s.k, s.coherence, s.log_perplexity);
                    }
                    println!("chosen K = {}", r.chosen_k);
                    Ok(())
                }),
                "fit" => ws.stage("topics", |ws| {
                    let k = ws.resolve_k()?;
                    ws.topics_fit(k)?;
                    println!("fitted K = {k}");
                    Ok(())
                }),
                _ => ws.stage("topics", |ws| {
                    let model = ws
                        .load_topic_model()?
                        .ok_or_else(|| Error::Data("no topic_model.json in the output directory; run `topics fit`".into()))?;
                    ws.write_top_words(&model)
                }),
            }
        }
        "dtm" => {
            let (op, _) = sub.subcommand().expect("subcommand required");
            *label = format!("dtm {op}");
            match op {
                "fit" => ws.stage("dtm", |ws| {
                    let k = match ws.config.opt::<usize>("dtm.k")? {
                        Some(k) => k,
                        None => ws.resolve_k()?,
                    };
                    ws.dtm_fit(k).map(|_| ())
                }),
                _ => ws.stage("dtm", |ws| {
                    let model = ws.load_dtm()?;
                    ws.dtm_export(&model)
                }),
            }
        }
        "train" => {
            let (t, _) = sub.subcommand().expect("subcommand required");
            *label = format!("train {t}");
            let task = task_of(t);
            ws.stage(task.name(), |ws| {
                if ws.train(task)?.is_some() {
                    let r = &ws.evals[task.prefix()];
                    println!("test accuracy {:.4}, macro F1 {:.4}", r.accuracy, r.macro_avg.f1);
                }
                Ok(())
            })
        }
        "eval" => {
            let (t, _) = sub.subcommand().expect("subcommand required");
            *label = format!("eval {t}");
            let task = task_of(t);
            ws.stage("eval", |ws| {
                let ckpt = ws.load_checkpoint(task)?;
                let r = ws.evaluate(task, &ckpt)?;
                println!(
                    "accuracy {:.4}  macro P {:.4} R {:.4} F1 {:.4}  (n = {})",
                    r.accuracy, r.macro_avg.precision, r.macro_avg.recall, r.macro_avg.f1, r.n
                );
                Ok(())
            })
        }
        "predict" => {
            let (t, args) = sub.subcommand().expect("subcommand required");
            *label = format!("predict {t}");
            let task = task_of(t);
            let input = PathBuf::from(args.get_one::<String>("input").expect("required"));
            let out = args.get_one::<String>("out").map(PathBuf::from);
            ws.stage("predict", |ws| {
                let ckpt = ws.load_checkpoint(task)?;
                let corpus = load_corpus(&input, CorpusFormat::from_path(&input))?;
                let rows = ws.predict_corpus(&ckpt, &corpus)?;
                let mut bytes = Vec::new();
                write_predictions_csv(&rows, &ckpt.labels, &mut bytes)?;
                match &out {
                    Some(p) => std::fs::write(p, &bytes).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    })?,
                    None => {
                        let stem = input.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
                        ws.emit(&format!("{}_predictions_{stem}.csv", task.prefix()), &bytes)?;
                    }
                }
                println!("labeled {} articles", rows.len());
                Ok(())
            })
        }
        "geo" => ws.stage("geo", |ws| ws.geo()),
        other => unreachable!("unknown subcommand {other}"),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn every_key_is_a_flag() {
        let m = cli()
            .try_get_matches_from(["newsmon", "--topics.k_max", "4", "--seed", "9", "ingest"])
            .unwrap();
        let cfg = build_config(&m).unwrap();
        assert_eq!(cfg.raw("topics.k_max"), "4");
        for k in KEYS {
            assert!(cli().get_arguments().any(|a| a.get_id() == k.key), "{}", k.key);
        }
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Data("x".into())), 2);
        let stage = Error::Stage {
            stage: "topics".into(),
            source: Box::new(Error::Shape("x".into())),
        };
        assert_eq!(exit_code(&stage), 3);
    }
}
