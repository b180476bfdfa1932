use std::io::Write;
use std::path::{Path, PathBuf};

use subboot::calibration::{run_calibration, Calibration, CalibrationConfig};
use subboot::config::{DataSpec, RunConfig};
use subboot::experiments::{
    prepare_tuning_data, run_gamma_experiment, run_kappa_experiment, run_tuning_experiment, ExperimentConfig,
    GammaConfig, KappaConfig, Scale, TuningConfig,
};
use subboot::report::{render_text, write_csv_file, Tabular};
use subboot::source::{build_record_index, load_dataset, Noise};
use subboot::statistics::central_moments;
use subboot::{
    estimate, improve_specification, optimize_hyperparams, CostModel, Error, Execution, Hyperparams, RunOptions,
    Statistic, StatisticKind, TextFormat, TunedSpec,
};

use crate::args::{CalibrateArgs, Cli, Command, EstimateArgs, ExperimentArgs, FormatArgs, Study, TuneArgs};
use crate::Failure;

type Outcome = Result<(), Failure>;

struct Globals {
    seed: Option<u64>,
    config: Option<PathBuf>,
    execution: Execution,
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Outcome {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--threads: {e}")))?;
    }
    let g = Globals {
        seed: cli.seed,
        config: cli.config,
        execution: if cli.deterministic { Execution::Sequential } else { Execution::Parallel },
        out: cli.out,
    };
    if g.config.is_some() && !matches!(cli.command, Command::Estimate(_) | Command::Experiment(_)) {
        return Err(Failure::Usage("--config applies to `estimate` and `experiment` only".into()));
    }
    match cli.command {
        Command::Index { data, format, index } => index_cmd(&data, &format, index.as_deref()),
        Command::Estimate(a) => estimate_cmd(&g, a),
        Command::Tune(a) => tune_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(&g, a),
        Command::Experiment(a) => experiment_cmd(&g, a),
    }
}

fn text_format(a: &FormatArgs) -> Result<TextFormat, Failure> {
    let delimiter = match a.delimiter.as_str() {
        "tab" | "\\t" | "\t" => b'\t',
        d if d.len() == 1 => d.as_bytes()[0],
        d => return Err(Failure::Usage(format!("--delimiter must be a single byte, got {d:?}"))),
    };
    if !(1..=2).contains(&a.columns.len()) {
        return Err(Failure::Usage(format!("--columns takes one or two columns, got {}", a.columns.len())));
    }
    Ok(TextFormat { delimiter, has_header: a.header, columns: a.columns.clone() })
}

fn default_statistic(format: &TextFormat) -> StatisticKind {
    if format.columns.len() == 2 {
        StatisticKind::Correlation
    } else {
        StatisticKind::Mean
    }
}

/// Full precision for machine-read numbers.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn out_dir(g: &Globals) -> Result<PathBuf, Failure> {
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("serialisable") + "\n";
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn index_cmd(data: &Path, format: &FormatArgs, index: Option<&Path>) -> Outcome {
    let (path, idx) = build_record_index(data, &text_format(format)?, index)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "records={}", idx.len())?;
    writeln!(out, "index={}", path.display())?;
    Ok(())
}

fn estimate_cmd(g: &Globals, a: EstimateArgs) -> Outcome {
    let mut cfg = match &g.config {
        Some(path) => {
            if a.data.is_some() || a.method.is_some() {
                return Err(Failure::Usage("give either --config or DATA with --method, not both".into()));
            }
            let mut cfg = RunConfig::load(path)?;
            if g.execution == Execution::Sequential {
                cfg.execution = Execution::Sequential;
            }
            cfg
        }
        None => {
            let data = a.data.ok_or_else(|| Failure::Usage("estimate needs a DATA file or --config".into()))?;
            let method = a.method.ok_or_else(|| Failure::Usage("estimate needs --method".into()))?;
            let format = text_format(&a.format)?;
            let noise = match a.add_noise {
                Some(sd) if !(sd >= 0.0 && sd.is_finite()) => {
                    return Err(Error::InvalidArgument(format!("--add-noise must be a finite sd >= 0, got {sd}")).into())
                }
                Some(sd) => Some(Noise { sd, seed: a.noise_seed }),
                None => None,
            };
            RunConfig {
                statistic: a.statistic.unwrap_or_else(|| default_statistic(&format)),
                data: DataSpec::File { path: data, format, index: None, in_memory: a.in_memory, noise },
                method,
                hyperparams: Hyperparams::new(a.n, a.b, a.r).effective(method),
                seed: 0,
                execution: g.execution,
                calibration: None,
                output: None,
            }
        }
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.output = g.out.clone();

    let source = cfg.data.open()?;
    let opts = RunOptions { seed: cfg.seed, execution: cfg.execution };
    let est = estimate(cfg.method, &source, &cfg.statistic.statistic(), cfg.hyperparams, opts)?;

    let h = est.hyperparams.effective(est.method);
    let mut out = std::io::stdout().lock();
    writeln!(out, "method={}", est.method)?;
    writeln!(out, "N={}", source.len())?;
    let (un, ub, ur) = est.method.uses();
    if un {
        writeln!(out, "n={}", h.n)?;
    }
    if ub {
        writeln!(out, "B={}", h.b)?;
    }
    if ur {
        writeln!(out, "R={}", h.r)?;
    }
    writeln!(out, "seed={}", est.seed)?;
    writeln!(out, "se2={}", num(est.se2))?;
    writeln!(out, "se={}", num(est.se2.sqrt()))?;
    writeln!(out, "statistic_evals={}", est.n_statistic_evals)?;
    eprintln!("cpu_seconds={:.6}", est.cpu_seconds);

    if g.out.is_some() {
        let dir = out_dir(g)?;
        cfg.save(&dir.join("run.json"))?;
        write_json(&dir.join("estimate.json"), &est)?;
    }
    Ok(())
}

fn tune_cmd(a: TuneArgs) -> Outcome {
    let model = match (&a.calibration, a.beta1, a.beta2) {
        (Some(path), _, _) => Calibration::load(path)?.model(),
        (None, Some(b1), Some(b2)) => CostModel::new(b1, b2)?,
        _ => return Err(Failure::Usage("tune needs --calibration FILE or both --beta1 and --beta2".into())),
    };
    let c = match (a.c, &a.data) {
        (Some(c), _) => c,
        (None, Some(path)) => {
            let mut format = text_format(&a.format)?;
            format.columns.truncate(1);
            central_moments(load_dataset(path, &format, None)?.x())?.c()?
        }
        (None, None) => return Err(Failure::Usage("tune needs --c or --data to estimate it".into())),
    };
    let spec: TunedSpec = match (a.b, a.r, a.c_max) {
        (Some(b), Some(r), _) => improve_specification(&model, c, a.n, b, r)?,
        (None, None, Some(c_max)) => optimize_hyperparams(&model, c, a.n, c_max)?,
        _ => return Err(Failure::Usage("tune needs --B and --R, or --c-max".into())),
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "B*={}", spec.b_star)?;
    writeln!(out, "R*={}", spec.r_star)?;
    writeln!(out, "n={}", spec.n)?;
    writeln!(out, "c={}", num(c))?;
    writeln!(out, "c_max={}", num(spec.c_max))?;
    if let Some(ratio) = spec.predicted_mse_ratio {
        writeln!(out, "predicted_mse_ratio={}", num(ratio))?;
    }
    writeln!(out, "clamped={}", spec.clamped)?;
    Ok(())
}

fn calibrate_cmd(g: &Globals, a: CalibrateArgs) -> Outcome {
    let format = text_format(&a.format)?;
    let stat = a.statistic.unwrap_or_else(|| default_statistic(&format)).statistic();
    let source = DataSpec::File { path: a.data, format, index: None, in_memory: false, noise: None }.open()?;
    let seed = g.seed.unwrap_or(0);
    let mut config = match Scale::from(a.scale) {
        Scale::Desk => CalibrationConfig::desk(a.n, seed),
        Scale::Full => CalibrationConfig::full(a.n, seed),
    };
    if let Some(reps) = a.repetitions {
        config.repetitions = reps;
    }
    eprintln!("timing {} probes x {} repetitions at n={}", config.design().len(), config.repetitions, a.n);
    let cal = run_calibration(&source, &stat, &config)?;
    let path = out_dir(g)?.join("calibration.json");
    cal.save(&path)?;
    print_calibration(&cal, &path)
}

fn print_calibration(cal: &Calibration, path: &Path) -> Outcome {
    let mut out = std::io::stdout().lock();
    writeln!(out, "beta1={}", num(cal.beta1))?;
    writeln!(out, "beta2={}", num(cal.beta2))?;
    writeln!(out, "r_squared={}", num(cal.r_squared))?;
    writeln!(out, "probes={}", cal.probes.len())?;
    writeln!(out, "calibration={}", path.display())?;
    Ok(())
}

fn experiment_cmd(g: &Globals, a: ExperimentArgs) -> Outcome {
    let seed = g.seed.unwrap_or(0);
    let scale = Scale::from(a.scale);
    let mut cfg = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let name = match &cfg {
                ExperimentConfig::Gamma(_) => Study::Gamma,
                ExperimentConfig::Kappa(_) => Study::Kappa,
                ExperimentConfig::Tuning(_) => Study::Tuning,
            };
            if name != a.study {
                return Err(Error::Config(format!(
                    "{} holds a {} config, not {}",
                    path.display(),
                    name.name(),
                    a.study.name()
                ))
                .into());
            }
            cfg
        }
        None => match a.study {
            Study::Gamma => ExperimentConfig::Gamma(GammaConfig::at_scale(scale, seed)),
            Study::Kappa => ExperimentConfig::Kappa(KappaConfig::at_scale(scale, seed)),
            Study::Tuning => ExperimentConfig::Tuning(TuningConfig::at_scale(scale, seed)),
        },
    };
    if let Some(s) = g.seed {
        *cfg.seed_mut() = s;
    }
    if g.execution == Execution::Sequential {
        match &mut cfg {
            ExperimentConfig::Gamma(c) => c.execution = Execution::Sequential,
            ExperimentConfig::Kappa(c) => c.execution = Execution::Sequential,
            ExperimentConfig::Tuning(_) => {}
        }
    }
    cfg.validate()?;
    let dir = out_dir(g)?;
    let name = a.study.name();
    write_json(&dir.join(format!("{name}.config.json")), &cfg)?;

    match &cfg {
        ExperimentConfig::Gamma(c) => {
            eprintln!("gamma study: N={} M={} truth from {} datasets", c.big_n, c.replications, c.truth_replications);
            let report = run_gamma_experiment(c)?;
            emit(&report, &dir.join("gamma.csv"))
        }
        ExperimentConfig::Kappa(c) => {
            eprintln!("kappa study: N={} M={}", c.big_n, c.replications);
            let report = run_kappa_experiment(c)?;
            emit(&report, &dir.join("kappa.csv"))
        }
        ExperimentConfig::Tuning(c) => {
            eprintln!("tuning study: writing N={} records under {}", c.big_n, dir.display());
            let source = prepare_tuning_data(c, &dir)?;
            let model = match &a.calibration {
                Some(path) => Calibration::load(path)?.model(),
                None => {
                    let config = match scale {
                        Scale::Desk => CalibrationConfig::desk(c.n, c.seed),
                        Scale::Full => CalibrationConfig::full(c.n, c.seed),
                    };
                    eprintln!("calibrating: {} probes x {} repetitions", config.design().len(), config.repetitions);
                    let cal = run_calibration(&source, &Statistic::Correlation, &config)?;
                    let path = dir.join("calibration.json");
                    cal.save(&path)?;
                    eprintln!("beta1={:e} beta2={:e} r_squared={:.4} -> {}", cal.beta1, cal.beta2, cal.r_squared, path.display());
                    cal.model()
                }
            };
            let report = run_tuning_experiment(c, &model, &source)?;
            emit(&report, &dir.join("tuning.csv"))?;
            writeln!(std::io::stdout().lock(), "mean_improvement={}", num(report.mean_improvement()))?;
            Ok(())
        }
    }
}

fn emit(report: &impl Tabular, csv: &Path) -> Outcome {
    write_csv_file(report, csv)?;
    eprintln!("wrote {}", csv.display());
    std::io::stdout().lock().write_all(render_text(report).as_bytes())?;
    Ok(())
}
