use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kam_rg::io::{write_atomic, write_json, TorusFile};
use kam_rg::pipeline::{self, Artifact};
use kam_rg::config::RunConfig;
use kam_rg::Error;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "kamrg", version, about = "Invariant tori by continuous renormalization-group flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow the kernel and conjugacy hierarchies and write the torus.
    Flow(Common),
    /// Check a stored torus against the configured potential.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Torus JSON written by `flow`, `newton` or `lindstedt`.
        torus: PathBuf,
    },
    /// Lindstedt series on the solver box.
    Lindstedt(Common),
    /// Dense Newton solve on the solver box.
    Newton(Common),
    /// Cross-validate every solver and run the coupling sweep.
    Compare(Common),
    /// Small divisors, decay fit and the initial kernels.
    Diagnose(Common),
}

/// Each flag overrides the field of the same name in the config document.
#[derive(Args, Default)]
struct Common {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// `golden` or comma-separated components.
    #[arg(long)]
    omega: Option<String>,
    /// Fourier-data JSON file, or `cosine_sum`.
    #[arg(long)]
    potential: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long = "box-q-kernel")]
    box_q_kernel: Option<usize>,
    #[arg(long = "box-q-solver")]
    box_q_solver: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Number or `auto`.
    #[arg(long)]
    beta: Option<String>,
    /// Number or `auto`.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    /// Number or `auto`.
    #[arg(long)]
    t_end: Option<String>,
    /// Number of kappa grid points; 0 disables the kappa family.
    #[arg(long)]
    kappa_points: Option<usize>,
    /// `rk4` or `collocation`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    lindstedt_order: Option<usize>,
    #[arg(long)]
    verify_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn auto_or_number(s: &str) -> Value {
    s.parse::<f64>().map(|x| json!(x)).unwrap_or_else(|_| json!(s))
}

impl Common {
    /// Loads the config file (if any), applies the flags and validates.
    fn load(&self) -> kam_rg::Result<(RunConfig, Option<PathBuf>)> {
        let (mut doc, base) = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                (doc, p.parent().map(Path::to_path_buf))
            }
            None => (Value::Object(Map::new()), None),
        };
        let obj = doc.as_object_mut().ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let mut set = |k: &str, v: Value| {
            obj.insert(k.into(), v);
        };
        if let Some(x) = self.d {
            set("d", json!(x));
        }
        if let Some(s) = &self.omega {
            let v = if s == "golden" {
                json!(s)
            } else {
                let parts: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
                json!(parts.map_err(|e| Error::Config(format!("--omega {s}: {e}")))?)
            };
            set("omega", v);
        }
        if let Some(p) = &self.potential {
            set("potential", json!(p));
        }
        if let Some(x) = self.lambda {
            set("lambda", json!(x));
        }
        if let Some(x) = self.box_q_kernel {
            set("box_Q_kernel", json!(x));
        }
        if let Some(x) = self.box_q_solver {
            set("box_Q_solver", json!(x));
        }
        if let Some(x) = self.n_max {
            set("n_max", json!(x));
        }
        if let Some(x) = self.alpha {
            set("alpha", json!(x));
        }
        if let Some(s) = &self.beta {
            set("beta", auto_or_number(s));
        }
        if let Some(s) = &self.rho {
            set("rho", auto_or_number(s));
        }
        if let Some(x) = self.h {
            set("h", json!(x));
        }
        if let Some(s) = &self.t_end {
            set("t_end", auto_or_number(s));
        }
        if let Some(n) = self.kappa_points {
            set("kappa_grid", if n == 0 { Value::Null } else { json!({ "points": n, "range": "auto" }) });
        }
        if let Some(s) = &self.method {
            set("method", json!(s));
        }
        if let Some(x) = self.lindstedt_order {
            set("lindstedt_order", json!(x));
        }
        if let Some(x) = self.verify_tol {
            set("verify_tol", json!(x));
        }
        if let Some(x) = self.seed {
            set("seed", json!(x));
        }
        if let Some(p) = &self.output_dir {
            set("output_dir", json!(p));
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok((cfg, base))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::Reality(_) => 2,
        _ => 3,
    }
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> kam_rg::Result<()> {
    artifacts.iter().try_for_each(|a| a.write_to(dir))
}

/// `Ok(true)` when the command's own checks passed.
fn run(command: Command) -> kam_rg::Result<bool> {
    match command {
        Command::Flow(c) => {
            let (cfg, base) = c.load()?;
            let run = pipeline::run_flow(&cfg, base.as_deref())?;
            write_all(&cfg.output_dir, &run.artifacts(&cfg)?)?;
            let s = &run.summary;
            eprintln!(
                "flow: t_end = {:.4}, {} steps, transpose {:.2e}, ward {}, tail {}",
                s.t_end,
                s.steps,
                s.transpose_residual,
                s.ward_residual.map_or("n/a".into(), |w| format!("{w:.2e}")),
                s.tail_certificate.map_or("n/a".into(), |w| format!("{w:.2e}")),
            );
            if !s.passed {
                eprintln!("flow: in-run invariants exceeded tolerance, see invariants.json");
            }
            Ok(s.passed)
        }
        Command::Verify { common, torus } => {
            let (cfg, base) = common.load()?;
            let file = TorusFile::read(&torus).map_err(|e| Error::Config(format!("{}: {e}", torus.display())))?;
            let v = pipeline::verify(&cfg, &file, base.as_deref())?;
            write_json(&cfg.output_dir.join("config.json"), &cfg)?;
            write_json(&cfg.output_dir.join("verification.json"), &v.report)?;
            let r = &v.report;
            if r.passed {
                eprintln!("verify: pass (mode residual {:.2e}, tolerance {:.2e})", r.mode_residual_max, v.tolerance);
            } else {
                let q = r.worst_mode.as_ref().map_or("?".into(), |q| format!("{q:?}"));
                eprintln!(
                    "verify: FAIL at mode q = {q} (mode residual {:.2e}, zero mode {:.2e}, tolerance {:.2e})",
                    r.mode_residual_max, r.zero_mode, v.tolerance
                );
            }
            Ok(r.passed)
        }
        Command::Lindstedt(c) => {
            let (cfg, base) = c.load()?;
            let out = pipeline::run_lindstedt(&cfg, base.as_deref())?;
            write_json(&cfg.output_dir.join("config.json"), &cfg)?;
            write_json(&cfg.output_dir.join("lindstedt.json"), &out)?;
            write_json(&cfg.output_dir.join("lindstedt_torus.json"), &out.partial_sum)?;
            eprintln!("lindstedt: order {}, radius estimate {:?}", out.order, out.radius_estimate);
            Ok(true)
        }
        Command::Newton(c) => {
            let (cfg, base) = c.load()?;
            let out = pipeline::run_newton(&cfg, base.as_deref())?;
            write_json(&cfg.output_dir.join("config.json"), &cfg)?;
            write_json(&cfg.output_dir.join("newton.json"), &out)?;
            write_json(&cfg.output_dir.join("newton_torus.json"), &out.torus)?;
            eprintln!("newton: converged = {}, |F| = {:.2e}", out.converged, out.final_residual);
            Ok(out.converged)
        }
        Command::Compare(c) => {
            let (cfg, base) = c.load()?;
            let cmp = pipeline::compare(&cfg, base.as_deref())?;
            write_json(&cfg.output_dir.join("config.json"), &cfg)?;
            write_json(&cfg.output_dir.join("compare.json"), &cmp)?;
            let mut csv = String::from("lambda");
            for k in 1..=cmp.slopes.len() {
                csv.push_str(&format!(",order{k}"));
            }
            csv.push('\n');
            for row in &cmp.sweep {
                csv.push_str(&format!("{:.17e}", row.lambda));
                for r in &row.residuals {
                    csv.push_str(&format!(",{r:.17e}"));
                }
                csv.push('\n');
            }
            write_atomic(&cfg.output_dir.join("lambda_sweep.csv"), csv.as_bytes())?;
            for (name, row) in cmp.solvers.iter().zip(&cmp.distances) {
                let cells: Vec<String> = row.iter().map(|d| format!("{d:9.2e}")).collect();
                eprintln!("{name:>12} {}", cells.join(" "));
            }
            eprintln!("slopes by order: {:?}", cmp.slopes);
            Ok(true)
        }
        Command::Diagnose(c) => {
            let (cfg, base) = c.load()?;
            let (diag, dump) = pipeline::diagnose(&cfg, base.as_deref())?;
            write_json(&cfg.output_dir.join("config.json"), &cfg)?;
            write_json(&cfg.output_dir.join("diagnose.json"), &diag)?;
            write_atomic(&cfg.output_dir.join("kernels.jsonl"), &dump)?;
            eprintln!(
                "diagnose: min divisor {:.3e}, freeze time {:.3}, decay b = {:.4}",
                diag.min_divisor, diag.freeze_time, diag.decay.width_b
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
