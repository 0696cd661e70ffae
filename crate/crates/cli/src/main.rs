use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bivtail::config::Config;
use bivtail::io::{ingest, save_traces};
use bivtail::pipeline::{run_pipeline, synth_from_config, PipelineRun, Stage};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Joint lower-tail modeling of two received-power traces.
#[derive(Parser, Debug)]
#[command(name = "bivtail", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic paired traces with a known joint tail.
    Synth {
        /// Trace CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating parameters as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Decluster both traces at the screening threshold.
    Decluster(RunArgs),
    /// Select the GPD threshold of each trace.
    Threshold(RunArgs),
    /// Fit the marginal GPDs and check them with PP/QQ plots.
    FitUgpd(RunArgs),
    /// Fit a bivariate GPD to the aligned joint exceedances.
    FitBgpd {
        #[arg(long, value_enum)]
        method: Method,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check the Pickands and angular-measure constraints.
    Validate(RunArgs),
    /// Fit the margin candidates and the Gaussian extrapolation baseline.
    Baseline(RunArgs),
    /// Run every stage and compare the models on the joint-CDF grid.
    Report(RunArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    Logistic,
    Ppp,
}

#[derive(Args, Debug)]
#[group(id = "source", required = true, multiple = false, args = ["input", "synth"])]
struct RunArgs {
    /// Trace CSV with header `t,rx1_dbm,rx2_dbm`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Analyse traces generated from the `synth.*` settings instead.
    #[arg(long)]
    synth: bool,
    /// Directory for report.json and the plot-data CSVs.
    #[arg(long, default_value = "bivtail-out")]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Every flag overrides the configuration key of the same name.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "r2_min")]
    r2_min: Option<f64>,
    #[arg(long = "mean_tol")]
    mean_tol: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long = "thresholds.grid")]
    thresholds_grid: Option<i64>,
    #[arg(long = "thresholds.floor")]
    thresholds_floor: Option<i64>,
    #[arg(long = "thresholds.screen_quantile")]
    thresholds_screen_quantile: Option<f64>,
    #[arg(long = "thresholds.u_x", allow_negative_numbers = true)]
    thresholds_u_x: Option<f64>,
    #[arg(long = "thresholds.u_y", allow_negative_numbers = true)]
    thresholds_u_y: Option<f64>,
    #[arg(long = "decluster.mg")]
    decluster_mg: Option<i64>,
    /// Comma-separated run lengths.
    #[arg(long = "decluster.mg_set", value_delimiter = ',')]
    decluster_mg_set: Option<Vec<i64>>,
    #[arg(long = "align.M")]
    align_m: Option<i64>,
    #[arg(long = "align.critical")]
    align_critical: Option<f64>,
    #[arg(long = "r0.critical")]
    r0_critical: Option<f64>,
    #[arg(long = "grids.surface")]
    grids_surface: Option<i64>,
    /// `conditional` or `raw`.
    #[arg(long = "frechet.zeta")]
    frechet_zeta: Option<String>,
    /// `full` or `mixed_partial`.
    #[arg(long = "logistic.likelihood")]
    logistic_likelihood: Option<String>,
    #[arg(long = "synth.n_total")]
    synth_n_total: Option<i64>,
    #[arg(long = "synth.tail_fraction")]
    synth_tail_fraction: Option<f64>,
    #[arg(long = "synth.alpha")]
    synth_alpha: Option<f64>,
    #[arg(long = "synth.window")]
    synth_window: Option<i64>,
    /// Any other key, as `key=value` with a TOML value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<Vec<(String, toml::Value)>, String> {
        use toml::Value;
        let mut out: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        put("seed", self.seed.map(|v| Value::Integer(v as i64)));
        put("r2_min", self.r2_min.map(Value::Float));
        put("mean_tol", self.mean_tol.map(Value::Float));
        put("resolution", self.resolution.map(Value::Float));
        put("thresholds.grid", self.thresholds_grid.map(Value::Integer));
        put("thresholds.floor", self.thresholds_floor.map(Value::Integer));
        put("thresholds.screen_quantile", self.thresholds_screen_quantile.map(Value::Float));
        put("thresholds.u_x", self.thresholds_u_x.map(Value::Float));
        put("thresholds.u_y", self.thresholds_u_y.map(Value::Float));
        put("decluster.mg", self.decluster_mg.map(Value::Integer));
        put(
            "decluster.mg_set",
            self.decluster_mg_set
                .as_ref()
                .map(|v| Value::Array(v.iter().map(|&m| Value::Integer(m)).collect())),
        );
        put("align.M", self.align_m.map(Value::Integer));
        put("align.critical", self.align_critical.map(Value::Float));
        put("r0.critical", self.r0_critical.map(Value::Float));
        put("grids.surface", self.grids_surface.map(Value::Integer));
        put("frechet.zeta", self.frechet_zeta.clone().map(Value::String));
        put("logistic.likelihood", self.logistic_likelihood.clone().map(Value::String));
        put("synth.n_total", self.synth_n_total.map(Value::Integer));
        put("synth.tail_fraction", self.synth_tail_fraction.map(Value::Float));
        put("synth.alpha", self.synth_alpha.map(Value::Float));
        put("synth.window", self.synth_window.map(Value::Integer));
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            out.push((k.trim().to_string(), parse_value(v.trim())));
        }
        Ok(out)
    }

    fn load(&self) -> Result<Config, String> {
        let mut table = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                text.parse::<toml::Table>().map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in self.overrides()? {
            set_dotted(&mut table, &key, value)?;
        }
        let text = toml::to_string(&table).map_err(|e| e.to_string())?;
        Config::from_toml_str(&text).map_err(|e| e.to_string())
    }
}

/// A TOML value, or the raw text as a string when it does not parse.
fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| format!("empty key `{key}`"))?;
    let mut t = table;
    for p in parts {
        let entry = t.entry(p).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| format!("`{p}` in `{key}` is not a table"))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// A failure tagged with the stage it happened in.
struct Failure {
    stage: String,
    message: String,
}

impl Failure {
    fn new(stage: &str, message: impl ToString) -> Self {
        Self {
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }
}

fn write_outputs(dir: &Path, run: &PipelineRun) -> Result<(), Failure> {
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Failure::new("output", format!("{}: {e}", plots.display())))?;
    let path = dir.join("report.json");
    std::fs::write(&path, run.report.to_json()).map_err(|e| Failure::new("output", format!("{}: {e}", path.display())))?;
    for p in &run.plots {
        p.save(&plots).map_err(|e| Failure::new("output", e))?;
    }
    Ok(())
}

fn analyse(args: &RunArgs, targets: &[Stage]) -> Result<(), Failure> {
    let cfg = args.config.load().map_err(|e| Failure::new("config", e))?;
    let (x, y, source, truth) = match &args.input {
        Some(path) => {
            let (x, y) = ingest(path, cfg.resolution).map_err(|e| Failure::new("ingest", format!("{}: {e}", path.display())))?;
            (x, y, path.display().to_string(), None)
        }
        None => {
            let s = synth_from_config(&cfg).map_err(|e| Failure::new("synth", e))?;
            (s.x, s.y, "synth".to_string(), Some(s.truth))
        }
    };
    match run_pipeline(&cfg, &x, &y, targets, &source, truth) {
        Ok(run) => {
            write_outputs(&args.out_dir, &run)?;
            println!(
                "completed {} -> {}",
                run.report.stages_completed.join(", "),
                args.out_dir.join("report.json").display()
            );
            Ok(())
        }
        Err(f) => {
            // Keep whatever the finished stages produced.
            write_outputs(&args.out_dir, &f.partial)?;
            let message = f.partial.report.failure.as_ref().map_or_else(|| f.error.to_string(), |s| s.message.clone());
            Err(Failure::new(f.stage(), message))
        }
    }
}

fn synth(out: &Path, truth: Option<&Path>, config: &ConfigArgs) -> Result<(), Failure> {
    let cfg = config.load().map_err(|e| Failure::new("config", e))?;
    let s = synth_from_config(&cfg).map_err(|e| Failure::new("synth", e))?;
    save_traces(out, &s.x, &s.y).map_err(|e| Failure::new("synth", format!("{}: {e}", out.display())))?;
    if let Some(p) = truth {
        let mut json = serde_json::to_string_pretty(&s.truth).map_err(|e| Failure::new("synth", e))?;
        json.push('\n');
        std::fs::write(p, json).map_err(|e| Failure::new("synth", format!("{}: {e}", p.display())))?;
    }
    println!("wrote {} samples with {} joint fades to {}", s.x.len(), s.truth.joint_windows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth { out, truth, config } => synth(out, truth.as_deref(), config),
        Command::Decluster(a) => analyse(a, &[Stage::Decluster]),
        Command::Threshold(a) => analyse(a, &[Stage::Threshold]),
        Command::FitUgpd(a) => analyse(a, &[Stage::Ugpd]),
        Command::FitBgpd { method, run } => {
            let target = match method {
                Method::Logistic => Stage::Logistic,
                Method::Ppp => Stage::Poisson,
            };
            analyse(run, &[target])
        }
        Command::Validate(a) => analyse(a, &[Stage::Validation]),
        Command::Baseline(a) => analyse(a, &[Stage::Baseline]),
        Command::Report(a) => analyse(a, &Stage::ALL),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: stage `{}` failed: {}", f.stage, f.message);
            ExitCode::FAILURE
        }
    }
}
