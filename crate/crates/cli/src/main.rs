//! `mbm`: covariance diagnostics, constant estimation, tail asymptotics and
//! simulation-vs-asymptotics verification for the variance-modulated
//! fractional process defined by a Hurst profile H(t).

mod config;

use clap::{Parser, Subcommand};
use mbm_core::asymptotics::{asymptotic_curve, AsymptoticResult};
use mbm_core::constants::{estimate_pickands, estimate_piterbarg, ConstantKind};
use mbm_core::covariance::{d_kernel, CovarianceModel};
use mbm_core::harness::{ratio_study, refinement_study_multi, ExceedanceStudy, RefinementStudy};
use mbm_core::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "mbm",
    version,
    about = "Supremum tails of variance-modulated fractional processes: \
             simulation, limiting constants, and exact asymptotics"
)]
struct Cli {
    /// Run configuration: TOML, or a JSON manifest emitted by a previous run.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir from the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed override (otherwise study.seed from the config; default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print covariance diagnostics at a pair of times as JSON.
    Covariance {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
    },
    /// Run the configured constant-estimation protocol; one JSON file per
    /// constant.
    Constants,
    /// Evaluate the tail asymptotics at --u (or at every study.u_list level).
    Tail {
        #[arg(long)]
        u: Option<f64>,
    },
    /// Ratio study: Monte Carlo exceedance probabilities joined with the
    /// asymptotic curve; emits plot-ready CSV and a re-runnable manifest.
    Verify,
    /// Grid-refinement study with Richardson extrapolation at each level.
    Refine {
        #[arg(long)]
        u: Option<f64>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("--config PATH is required"))?;
    let cfg = config::load(path)?;
    let seed = cli.seed.unwrap_or_else(|| cfg.seed());
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.out_dir()));
    match cli.command {
        Command::Covariance { s, t } => cmd_covariance(&cfg, s, t),
        Command::Constants => cmd_constants(&cfg, seed, &out_dir),
        Command::Tail { u } => cmd_tail(&cfg, u, seed, &out_dir),
        Command::Verify => cmd_verify(&cli, &cfg, seed, &out_dir),
        Command::Refine { u } => cmd_refine(&cli, &cfg, u, seed, &out_dir),
    }
}

fn cmd_covariance(cfg: &config::Config, s: f64, t: f64) -> Result<()> {
    let spec = cfg.hurst_spec()?;
    let model = CovarianceModel::new(spec);
    let h_s = model.spec().value(s)?;
    let h_t = model.spec().value(t)?;
    let correlation = if s > 0.0 && t > 0.0 {
        Some(model.correlation(s, t)?)
    } else {
        None
    };
    let record = serde_json::json!({
        "s": s,
        "t": t,
        "h_s": h_s,
        "h_t": h_t,
        "d_kernel": d_kernel(h_s, h_t)?,
        "autocov": model.autocov(s, t)?,
        "sigma_s": model.sigma(s)?,
        "sigma_t": model.sigma(t)?,
        "correlation": correlation,
    });
    println!("{}", to_pretty(&record)?);
    Ok(())
}

fn cmd_constants(cfg: &config::Config, seed: u64, out_dir: &Path) -> Result<()> {
    let section = cfg
        .constants
        .as_ref()
        .ok_or_else(|| Error::config("the constants command needs a [constants] section"))?;
    let alphas = section.alphas.clone().unwrap_or_default();
    if alphas.is_empty() {
        return Err(Error::config("the constants command needs constants.alphas"));
    }
    let kinds: Vec<ConstantKind> = section
        .kinds
        .clone()
        .unwrap_or_else(|| vec!["pickands".into()])
        .iter()
        .map(|k| ConstantKind::from_wire(k))
        .collect::<Result<_>>()?;
    let s_list = section
        .s_list
        .clone()
        .unwrap_or_else(|| config::DEFAULT_S_LIST.to_vec());
    let delta = section.delta.unwrap_or(config::DEFAULT_DELTA);
    let reps = section.reps.unwrap_or(config::DEFAULT_CONST_REPS);
    // Fixed entries shadow estimation for matching (kind, alpha, a) combos.
    let mut fixed = mbm_core::asymptotics::ConstantsProvider::new();
    for f in &section.fixed {
        fixed.push_fixed(ConstantKind::from_wire(&f.kind)?, f.alpha, f.a, f.value)?;
    }
    std::fs::create_dir_all(out_dir).map_err(|e| {
        Error::config(format!("cannot create output dir {}: {e}", out_dir.display()))
    })?;
    let emit = |kind: ConstantKind, alpha: f64, a: Option<f64>| -> Result<()> {
        let record = match fixed.lookup(kind, alpha, a) {
            Ok(value) => serde_json::json!({
                "kind": kind.wire_name(),
                "alpha": alpha,
                "a": a,
                "value": value,
                "source": "fixed_override",
            }),
            Err(_) => {
                let est = match kind {
                    ConstantKind::Pickands => {
                        estimate_pickands(alpha, &s_list, delta, reps, seed)?
                    }
                    k => estimate_piterbarg(
                        alpha,
                        a.expect("piterbarg combos carry a"),
                        k == ConstantKind::PiterbargTwoSided,
                        &s_list,
                        delta,
                        reps,
                        seed,
                    )?,
                };
                for w in &est.warnings {
                    eprintln!("warning: {w}");
                }
                let mut v = serde_json::to_value(&est)
                    .map_err(|e| Error::numerical(format!("serialization failed: {e}")))?;
                v["source"] = "mc".into();
                v
            }
        };
        let suffix = a.map(|a| format!("_a{a}")).unwrap_or_default();
        let file = out_dir.join(format!("{}_alpha{alpha}{suffix}.json", kind.wire_name()));
        write_text(&file, &(to_pretty(&record)? + "\n"))?;
        println!("wrote {}", file.display());
        Ok(())
    };
    for &alpha in &alphas {
        for &kind in &kinds {
            if kind == ConstantKind::Pickands {
                emit(kind, alpha, None)?;
            } else {
                let a_values = section.a_values.clone().unwrap_or_default();
                if a_values.is_empty() {
                    return Err(Error::config("piterbarg kinds need constants.a_values"));
                }
                for &a in &a_values {
                    emit(kind, alpha, Some(a))?;
                }
            }
        }
    }
    Ok(())
}

fn cmd_tail(cfg: &config::Config, u: Option<f64>, seed: u64, out_dir: &Path) -> Result<()> {
    let scenario = cfg.scenario()?;
    let (provider, _) = cfg.build_provider(seed)?;
    let levels = match u {
        Some(x) => vec![x],
        None => cfg.u_list()?,
    };
    let curve = asymptotic_curve(&scenario, &levels, &provider)?;
    for row in &curve {
        for w in &row.warnings {
            eprintln!("warning: u = {}: {w}", row.u);
        }
    }
    if u.is_some() {
        println!("{}", to_pretty(&curve[0])?);
    } else {
        println!("{}", to_pretty(&curve)?);
    }
    let (_, csv) = cfg.formats()?;
    if csv && levels.len() > 1 {
        std::fs::create_dir_all(out_dir).map_err(|e| {
            Error::config(format!("cannot create output dir {}: {e}", out_dir.display()))
        })?;
        let file = out_dir.join("tail_curve.csv");
        write_text(&file, &tail_csv(&curve))?;
        eprintln!("wrote {}", file.display());
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, cfg: &config::Config, seed: u64, out_dir: &Path) -> Result<()> {
    let scenario = cfg.scenario()?;
    let (provider, _) = cfg.build_provider(seed)?;
    let study = ratio_study(
        &scenario,
        &cfg.u_list()?,
        cfg.grid_n(),
        cfg.reps(),
        seed,
        &provider,
    )?;
    for w in &study.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(out_dir).map_err(|e| {
        Error::config(format!("cannot create output dir {}: {e}", out_dir.display()))
    })?;
    let (json, csv) = cfg.formats()?;
    if csv {
        write_text(&out_dir.join("verify.csv"), &verify_csv(&study))?;
    }
    if json {
        write_text(&out_dir.join("verify.json"), &(to_pretty(&study)? + "\n"))?;
    }
    let manifest = cfg.resolved(cli.seed, None);
    write_text(&out_dir.join("manifest.json"), &(to_pretty(&manifest)? + "\n"))?;
    println!("{}", to_pretty(&study)?);
    Ok(())
}

fn cmd_refine(
    cli: &Cli,
    cfg: &config::Config,
    u: Option<f64>,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    let scenario = cfg.scenario()?;
    let levels = match u {
        Some(x) => vec![x],
        None => cfg.u_list()?,
    };
    let studies = refinement_study_multi(
        &scenario,
        &levels,
        &cfg.grid_n_list()?,
        cfg.reps(),
        seed,
    )?;
    for s in &studies {
        for w in &s.warnings {
            eprintln!("warning: u = {}: {w}", s.u);
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| {
        Error::config(format!("cannot create output dir {}: {e}", out_dir.display()))
    })?;
    let (json, csv) = cfg.formats()?;
    if csv {
        write_text(&out_dir.join("refine.csv"), &refine_csv(&studies))?;
    }
    if json {
        write_text(&out_dir.join("refine.json"), &(to_pretty(&studies)? + "\n"))?;
    }
    let manifest = cfg.resolved(cli.seed, u);
    write_text(&out_dir.join("manifest.json"), &(to_pretty(&manifest)? + "\n"))?;
    println!("{}", to_pretty(&studies)?);
    Ok(())
}

fn tail_csv(curve: &[AsymptoticResult]) -> String {
    let mut out = String::from("u,mu,regime,prefactor,log_value,value\n");
    for r in curve {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.u,
            r.mu,
            r.regime.as_str(),
            r.prefactor,
            r.log_value,
            r.value
        ));
    }
    out
}

fn verify_csv(study: &ExceedanceStudy) -> String {
    let mut out = String::from("u,mu,p_hat,stderr,p_asymptotic,ratio,regime\n");
    for r in &study.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.u,
            r.mu,
            r.p_hat,
            r.stderr,
            r.p_asymptotic.unwrap_or(f64::NAN),
            r.ratio.unwrap_or(f64::NAN),
            r.regime.map(|g| g.as_str()).unwrap_or("")
        ));
    }
    out
}

fn refine_csv(studies: &[RefinementStudy]) -> String {
    let mut out = String::from(
        "u,grid_n,p_hat,stderr,exceed_count,extrapolated,extrapolated_stderr\n",
    );
    for s in studies {
        for r in &s.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.u, r.grid_n, r.p_hat, r.stderr, r.exceed_count, s.extrapolated,
                s.extrapolated_stderr
            ));
        }
    }
    out
}

fn to_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Error::numerical(format!("serialization failed: {e}")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}
