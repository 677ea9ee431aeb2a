//! Implementations of the CLI verbs.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, Context};
use l2t_core::envs::{self, EnvKind, EnvSpec};
use l2t_core::orchestrator::{
    ablation_verdict, build_student, build_teacher, evaluate, train_l2t_irl, train_l2t_rl,
    train_two_stage_bc, Algorithm, EvalPolicy, ExperimentConfig, MetricsLog, Record, TrainError,
    TrainOutput,
};
use l2t_core::replay::{load_demonstrations, ExpertBuffer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config_file::{echo_config, parse_config};

/// Error wrapper carrying the process exit code: 1 for configuration
/// problems, 2 for runtime aborts.
#[derive(Debug)]
pub struct CliError {
    inner: anyhow::Error,
    exit_code: u8,
}

impl CliError {
    fn config(inner: anyhow::Error) -> Self {
        CliError {
            inner,
            exit_code: 1,
        }
    }

    fn runtime(inner: anyhow::Error) -> Self {
        CliError {
            inner,
            exit_code: 2,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.exit_code
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.inner)
    }
}

type CliResult = Result<(), CliError>;

fn rt<T>(r: anyhow::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::runtime)
}

pub fn train(config: &Path, overrides: &[String], out: &Path) -> CliResult {
    let cfg = parse_config(config, overrides).map_err(CliError::config)?;
    rt(fs::create_dir_all(out).context("creating output directory"))?;
    write_provenance(&cfg, out)?;

    let metrics_path = out.join("metrics.jsonl");
    let sink = rt(fs::File::create(&metrics_path).context("creating metrics file"))?;
    let mut metrics = MetricsLog::with_sink(Box::new(BufWriter::new(sink)));

    let output = run_algorithm(&cfg, &mut metrics, out)?;
    metrics.flush();

    save_outputs(&output, out)?;
    let summary = serde_json::to_string_pretty(&output.summary).expect("summary json");
    rt(fs::write(out.join("summary.json"), &summary).context("writing summary"))?;
    println!("{summary}");
    println!(
        "wrote {} ({} records)",
        metrics_path.display(),
        metrics.records().len()
    );
    Ok(())
}

fn run_algorithm(
    cfg: &ExperimentConfig,
    metrics: &mut MetricsLog,
    out: &Path,
) -> Result<TrainOutput, CliError> {
    let result = match cfg.experiment.algorithm {
        Algorithm::L2tRl => train_l2t_rl(cfg, metrics, Some(out)),
        Algorithm::L2tIrl => {
            let demo_path = cfg
                .irl
                .demo_path
                .as_ref()
                .ok_or_else(|| CliError::config(anyhow!("l2t_irl requires irl.demo_path")))?;
            let demos = load_demonstrations(Path::new(demo_path))
                .with_context(|| format!("loading demonstrations from {demo_path}"))
                .map_err(CliError::config)?;
            train_l2t_irl(cfg, &demos, metrics, Some(out))
        }
        Algorithm::TwoStageBc => {
            let ckpt = cfg.two_stage.teacher_checkpoint.as_ref().ok_or_else(|| {
                CliError::config(anyhow!("two_stage_bc requires two_stage.teacher_checkpoint"))
            })?;
            let spec = cfg.env_spec();
            let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed);
            let mut teacher = build_teacher(cfg, &spec, &mut seed_rng);
            teacher
                .load_checkpoint(Path::new(ckpt))
                .with_context(|| format!("loading frozen teacher from {ckpt}"))
                .map_err(CliError::config)?;
            train_two_stage_bc(cfg, &teacher, metrics, Some(out))
        }
    };
    result.map_err(|e| match e {
        TrainError::Config(_) | TrainError::WrongAlgorithm { .. } | TrainError::DemoDims { .. } => {
            CliError::config(anyhow!("{e}"))
        }
        other => CliError::runtime(anyhow!("{other}")),
    })
}

fn write_provenance(cfg: &ExperimentConfig, out: &Path) -> CliResult {
    let echoed = echo_config(cfg).map_err(CliError::runtime)?;
    rt(fs::write(out.join("config.toml"), echoed).context("echoing resolved config"))?;
    let version = format!(
        "l2t {} (core {})\nseed = {}\n",
        env!("CARGO_PKG_VERSION"),
        env!("CARGO_PKG_VERSION"),
        cfg.experiment.seed
    );
    rt(fs::write(out.join("version.txt"), version).context("writing version stamp"))?;
    Ok(())
}

fn save_outputs(output: &TrainOutput, out: &Path) -> CliResult {
    rt(output
        .teacher
        .save_checkpoint(&out.join("teacher.ckpt"))
        .context("saving teacher checkpoint"))?;
    rt(output
        .best_teacher
        .save_checkpoint(&out.join("best_teacher.ckpt"))
        .context("saving best teacher checkpoint"))?;
    rt(output
        .student
        .save_checkpoint(&out.join("student.ckpt"))
        .context("saving student checkpoint"))?;
    if let Some((reward_t, reward_s)) = &output.reward_models {
        rt(reward_t
            .save_checkpoint(&out.join("reward_teacher.ckpt"))
            .context("saving teacher reward model"))?;
        rt(reward_s
            .save_checkpoint(&out.join("reward_student.ckpt"))
            .context("saving student reward model"))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    config: &Path,
    overrides: &[String],
    teacher_ckpt: Option<&Path>,
    student_ckpt: Option<&Path>,
    alpha: Option<f64>,
    episodes: u32,
    seed: u64,
    out: Option<&Path>,
) -> CliResult {
    let cfg = parse_config(config, overrides).map_err(CliError::config)?;
    if episodes < 1 {
        return Err(CliError::config(anyhow!("episodes must be >= 1")));
    }
    let spec = cfg.env_spec();
    let alpha = alpha.unwrap_or(cfg.env.alpha);
    if alpha < 0.0 {
        return Err(CliError::config(anyhow!("alpha must be >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed);

    let mut report = serde_json::Map::new();
    report.insert("alpha".into(), alpha.into());
    report.insert("episodes".into(), episodes.into());
    report.insert("seed".into(), seed.into());

    if let Some(path) = teacher_ckpt {
        let mut teacher = build_teacher(&cfg, &spec, &mut rng);
        rt(teacher
            .load_checkpoint(path)
            .with_context(|| format!("loading teacher checkpoint {}", path.display())))?;
        let stats = evaluate(&EvalPolicy::Teacher(&teacher), &spec, 0.0, episodes, seed);
        println!(
            "teacher: return {:.3} +- {:.3} (length {:.1})",
            stats.return_mean, stats.return_std, stats.length_mean
        );
        report.insert("teacher_return_mean".into(), stats.return_mean.into());
        report.insert("teacher_return_std".into(), stats.return_std.into());
    }
    if let Some(path) = student_ckpt {
        let mut student = build_student(&cfg, &spec, &mut rng);
        rt(student
            .load_checkpoint(path)
            .with_context(|| format!("loading student checkpoint {}", path.display())))?;
        let stats = evaluate(&EvalPolicy::Student(&student), &spec, alpha, episodes, seed);
        println!(
            "student (alpha {:.2}): return {:.3} +- {:.3} (length {:.1})",
            alpha, stats.return_mean, stats.return_std, stats.length_mean
        );
        report.insert("student_return_mean".into(), stats.return_mean.into());
        report.insert("student_return_std".into(), stats.return_std.into());
    }
    if teacher_ckpt.is_none() && student_ckpt.is_none() {
        return Err(CliError::config(anyhow!(
            "nothing to evaluate: pass --teacher and/or --student"
        )));
    }
    if let Some(dir) = out {
        rt(fs::create_dir_all(dir).context("creating output directory"))?;
        let json = serde_json::to_string_pretty(&report).expect("eval json");
        rt(fs::write(dir.join("eval.json"), json).context("writing eval.json"))?;
    }
    Ok(())
}

pub fn sweep(
    config: &Path,
    overrides: &[String],
    param: &str,
    values: &[String],
    seeds: u64,
    out: &Path,
) -> CliResult {
    if values.is_empty() {
        return Err(CliError::config(anyhow!("sweep needs at least one value")));
    }
    if seeds < 1 {
        return Err(CliError::config(anyhow!("seeds must be >= 1")));
    }
    rt(fs::create_dir_all(out).context("creating sweep directory"))?;
    let base_cfg = parse_config(config, overrides).map_err(CliError::config)?;
    let base_seed = base_cfg.experiment.seed;

    let mut rows = Vec::new();
    let mut series = Vec::new();
    for value in values {
        let mut seed_returns = Vec::new();
        for s in 0..seeds {
            let mut run_overrides = overrides.to_vec();
            run_overrides.push(format!("{param}={value}"));
            run_overrides.push(format!("experiment.seed={}", base_seed + s));
            let cfg = parse_config(config, &run_overrides).map_err(CliError::config)?;
            let run_dir = out.join(format!("{}_{}_seed{}", param.replace('.', "_"), value, base_seed + s));
            rt(fs::create_dir_all(&run_dir).context("creating run directory"))?;
            write_provenance(&cfg, &run_dir)?;
            let sink = rt(fs::File::create(run_dir.join("metrics.jsonl")).context("metrics file"))?;
            let mut metrics = MetricsLog::with_sink(Box::new(BufWriter::new(sink)));
            let output = run_algorithm(&cfg, &mut metrics, &run_dir)?;
            save_outputs(&output, &run_dir)?;
            let final_student = output.summary.final_student_return;
            println!(
                "{param}={value} seed={}: final student return {final_student:.3}",
                base_seed + s
            );
            seed_returns.push(final_student);
        }
        let mean = seed_returns.iter().sum::<f64>() / seed_returns.len() as f64;
        rows.push((value.clone(), seed_returns, mean));
        if let Ok(v) = value.parse::<f64>() {
            series.push((v, mean));
        }
    }

    let mut csv = String::from("value,seed,final_student_return\n");
    for (value, returns, _) in &rows {
        for (i, r) in returns.iter().enumerate() {
            let _ = writeln!(csv, "{value},{},{r}", base_seed + i as u64);
        }
    }
    rt(fs::write(out.join("sweep.csv"), csv).context("writing sweep.csv"))?;

    if param == "env.alpha" && series.len() >= 2 {
        let verdict = ablation_verdict(&series);
        println!(
            "alpha-monotonicity verdict: {} (student return non-increasing in alpha: {verdict})",
            if verdict { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}

pub fn export(metrics: &Path, out: &Path) -> CliResult {
    let text = rt(fs::read_to_string(metrics)
        .with_context(|| format!("reading metrics file {}", metrics.display())))?;
    let records = l2t_core::orchestrator::metrics::parse_jsonl(&text)
        .context("parsing metrics records")
        .map_err(CliError::config)?;
    let mut csv = String::from("step,agent,metric,value\n");
    for record in &records {
        match record {
            Record::Eval(e) => {
                let rows = [
                    ("teacher", "return_mean", e.teacher_return_mean),
                    ("teacher", "return_std", e.teacher_return_std),
                    ("student", "return_mean", e.student_return_mean),
                    ("student", "return_std", e.student_return_std),
                    ("student", "episode_length_mean", e.episode_length_mean),
                    ("env", "alpha_current", e.alpha_current),
                ];
                for (agent, metric, value) in rows {
                    let _ = writeln!(csv, "{},{agent},{metric},{value}", e.step);
                }
            }
            Record::Update(u) => {
                let rows = [
                    ("teacher", "critic_loss", u.critic_loss),
                    ("teacher", "actor_loss", u.actor_loss),
                    ("student", "bc_loss", u.student_bc),
                    ("student", "asym_loss", u.student_asym),
                    ("student", "total_loss", u.student_total),
                ];
                for (agent, metric, value) in rows {
                    let _ = writeln!(csv, "{},{agent},{metric},{value}", u.step);
                }
            }
            Record::IrlUpdate(u) => {
                let rows = [
                    ("teacher", "reward_objective", u.teacher_reward_objective),
                    ("student", "reward_objective", u.student_reward_objective),
                    ("teacher", "irl_objective", u.irl_objective),
                ];
                for (agent, metric, value) in rows {
                    let _ = writeln!(csv, "{},{agent},{metric},{value}", u.step);
                }
            }
        }
    }
    rt(fs::write(out, csv).with_context(|| format!("writing {}", out.display())))?;
    println!("exported {} records to {}", records.len(), out.display());
    Ok(())
}

pub fn gen_demos(env: &str, episodes: u32, seed: u64, out: &Path) -> CliResult {
    let kind = EnvKind::parse(env).map_err(|e| CliError::config(anyhow!("{e}")))?;
    let spec = EnvSpec::for_kind(kind);
    if episodes < 1 {
        return Err(CliError::config(anyhow!("episodes must be >= 1")));
    }
    let buffer = rt(generate_demos(&spec, episodes, seed))?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            rt(fs::create_dir_all(parent).context("creating demo directory"))?;
        }
    }
    rt(buffer
        .save(out)
        .with_context(|| format!("writing demo file {}", out.display())))?;
    println!(
        "wrote {} pairs over {} episodes to {}",
        buffer.len(),
        buffer.episodes(),
        out.display()
    );
    Ok(())
}

fn generate_demos(spec: &EnvSpec, episodes: u32, seed: u64) -> anyhow::Result<ExpertBuffer> {
    let mut buffer = ExpertBuffer::new(spec.state_dim, spec.action_dim);
    for ep in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(ep as u64));
        let mut state = envs::reset(spec, &mut rng);
        while !state.done {
            let action = envs::scripted_oracle(spec, &state).map_err(|e| anyhow!("{e}"))?;
            buffer.push_pair(state.s.clone(), action.clone());
            let (next, _) = envs::step(spec, &state, &action).map_err(|e| anyhow!("{e}"))?;
            state = next;
        }
        buffer.end_episode();
    }
    Ok(buffer)
}
