mod manifest;
mod models;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use splitonn::area::{area_report, in_ten_thousands, DeviceProfile};
use splitonn::assignment::SchemeKind;
use splitonn::checkpoint::{load_network, save_network};
use splitonn::codec::DecoderKind;
use splitonn::data::{downsample2, load_standard, resolve_data_dir, Dataset, DatasetName};
use splitonn::model::{Architecture, ModelSpec};
use splitonn::netlist::{compile_network_threaded, read_netlists, verify, write_netlists};
use splitonn::nn::optim::OptimizerKind;
use splitonn::nn::train::{
    evaluate, mutual_train_with_progress, run_rng, train_with_progress, EpochRecord, MutualMode, TrainConfig,
    TrainHistory,
};
use splitonn::nn::Network;
use splitonn::Error;

use manifest::RunManifest;
use models::{resolve, tag, Overrides};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser, Debug)]
#[command(name = "splitonn", version, about = "Split-complex optical neural networks: area, training, compilation")]
struct Cli {
    /// Seed for weight initialization, batch order and subsets.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Dataset directory (falls back to $OPLIXNET_DATA).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Where outputs and manifests go.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Device profile used for DC/PS counts: 2dc2ps or 2dc1ps.
    #[arg(long, global = true, default_value = "2dc2ps")]
    device_profile: DeviceProfile,
    /// Worker threads for mesh compilation. Training is single-threaded.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Zoo name (fcnn, fcnn-m1..m4, lenet5, resnet20, resnet32, resnet56),
    /// optionally suffixed -cvnn/-scvnn/-rvnn, or a .toml model file.
    #[arg(long)]
    model: String,
    /// Input assignment: si, sh, ss, cl or cr. Implies the scvnn flavor.
    #[arg(long)]
    assignment: Option<SchemeKind>,
    #[arg(long)]
    decoder: Option<DecoderKind>,
}

impl ModelArgs {
    fn spec(&self) -> splitonn::Result<ModelSpec> {
        resolve(&self.model, &Overrides { assignment: self.assignment, decoder: self.decoder })
    }
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// adam or sgd (momentum 0.9).
    #[arg(long, default_value = "adam")]
    optimizer: OptimizerKind,
    /// Train on a class-balanced subset with this many images per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Evaluate only the first N test images.
    #[arg(long)]
    test_limit: Option<usize>,
    /// Record test accuracy after every epoch (slower).
    #[arg(long)]
    eval_each_epoch: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Device counts for one model; writes CSV and JSON reports.
    Count {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train one network with cross-entropy.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train a student alongside a teacher with the distillation term.
    Distill {
        /// Student model (zoo name or .toml).
        #[arg(long)]
        student: String,
        /// Teacher model, e.g. lenet5-cvnn.
        #[arg(long)]
        teacher: String,
        /// Student assignment.
        #[arg(long)]
        assignment: Option<SchemeKind>,
        #[arg(long)]
        decoder: Option<DecoderKind>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        /// Start the teacher from this checkpoint and keep it fixed.
        #[arg(long)]
        teacher_checkpoint: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Test accuracy of a checkpoint, or of a freshly initialized model.
    Eval {
        #[arg(long, conflicts_with = "model")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        assignment: Option<SchemeKind>,
        #[arg(long)]
        decoder: Option<DecoderKind>,
        #[arg(long)]
        test_limit: Option<usize>,
    },
    /// Compile a checkpoint into per-layer MZI netlists.
    Compile {
        #[arg(long = "in")]
        input: PathBuf,
        /// Netlist directory (default: <out-dir>/<checkpoint name>-netlist).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run test images through compiled netlists and compare with software.
    Simulate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Area and decoder tables for the zoo, plus accuracies of earlier runs
    /// found in the output directory.
    Report,
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Count { .. } => "count",
            Command::Train { .. } => "train",
            Command::Distill { .. } => "distill",
            Command::Eval { .. } => "eval",
            Command::Compile { .. } => "compile",
            Command::Simulate { .. } => "simulate",
            Command::Report => "report",
            Command::Replay { .. } => "replay",
        }
    }
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    error: Error,
}

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_DIVERGED: u8 = 5;

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Config(_) | Error::DimensionMismatch { .. } | Error::InvalidShape(_) | Error::Json(_) => EXIT_CONFIG,
            Error::Format { .. } | Error::InsufficientSamples { .. } => EXIT_DATA,
            Error::Verification { .. } => EXIT_VERIFY,
            Error::Divergence { .. } => EXIT_DIVERGED,
            _ => EXIT_OTHER,
        };
        Failure { code, error }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn data_failure(error: Error) -> Failure {
    Failure { code: EXIT_DATA, error }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Run {
    seed: u64,
    data_dir: Option<PathBuf>,
    out_dir: PathBuf,
    profile: DeviceProfile,
    threads: usize,
    manifest: RunManifest,
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn record(&mut self, name: &str) {
        self.manifest.outputs.push(name.to_string());
    }

    fn write_csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> splitonn::Result<()>) -> Outcome<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        fs::write(self.out(name), buf)?;
        self.record(name);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl serde::Serialize) -> Outcome<()> {
        fs::write(self.out(name), serde_json::to_vec_pretty(value).map_err(Error::from)?)?;
        self.record(name);
        Ok(())
    }

    fn data_dir(&self) -> Outcome<PathBuf> {
        resolve_data_dir(self.data_dir.as_deref()).map_err(data_failure)
    }

    /// One split of the standard dataset matching `spec`'s input shape.
    fn split(&self, spec: &ModelSpec, train: bool) -> Outcome<Dataset> {
        let name = DatasetName::for_input(spec.arch.input, spec.arch.classes).ok_or_else(|| {
            Failure::from(Error::Config(format!(
                "no standard dataset has {:?} inputs and {} classes",
                spec.arch.input, spec.arch.classes
            )))
        })?;
        let ds = load_standard(&self.data_dir()?, name, train).map_err(data_failure)?;
        if ds.image_shape() == spec.arch.input {
            Ok(ds)
        } else {
            downsample2(&ds).map_err(data_failure)
        }
    }

    fn datasets(&self, spec: &ModelSpec, per_class: Option<usize>, test_limit: Option<usize>) -> Outcome<(Dataset, Dataset)> {
        let mut train = self.split(spec, true)?;
        if let Some(n) = per_class {
            train = train.subset(n, self.seed).map_err(data_failure)?;
        }
        Ok((train, self.test_set(spec, test_limit)?))
    }

    fn test_set(&self, spec: &ModelSpec, limit: Option<usize>) -> Outcome<Dataset> {
        let test = self.split(spec, false)?;
        Ok(match limit {
            Some(n) => test.take(n.min(test.len())),
            None => test,
        })
    }
}

fn progress(label: &str) -> impl FnMut(&EpochRecord) + '_ {
    move |r| {
        eprintln!(
            "[{label}] epoch {:>3}  loss {:.4}  ce {:.4}  kd {:.4}  train {:.2}%{}",
            r.epoch + 1,
            r.loss,
            r.ce,
            r.kd,
            100.0 * r.train_accuracy,
            r.eval_accuracy.map(|a| format!("  test {:.2}%", 100.0 * a)).unwrap_or_default()
        )
    }
}

fn train_config(run: &Run, t: &TrainArgs, alpha: f64, temperature: f64) -> TrainConfig {
    TrainConfig {
        epochs: t.epochs,
        batch_size: t.batch_size,
        lr: t.lr,
        optimizer: t.optimizer,
        seed: run.seed,
        alpha,
        temperature,
    }
}

fn cmd_count(run: &mut Run, model: &ModelArgs) -> Outcome<String> {
    let spec = model.spec()?;
    let report = area_report(&spec, run.profile)?;
    let stem = format!("count-{}", tag(&spec));
    run.write_csv(&format!("{stem}.csv"), |w| report.write_csv(w))?;
    run.write_json(&format!("{stem}.json"), &report)?;
    println!("{}", report.summary());
    run.manifest.config = json!({ "model": spec, "device_profile": run.profile.to_string() });
    run.manifest.results = json!({
        "mzi": report.mzi_count,
        "baseline_mzi": report.baseline_mzi_count,
        "reduction": report.reduction_ratio,
    });
    Ok(stem)
}

fn save_history(run: &mut Run, name: &str, h: &TrainHistory) -> Outcome<()> {
    run.write_csv(name, |w| h.write_csv(w))
}

fn cmd_train(run: &mut Run, model: &ModelArgs, t: &TrainArgs) -> Outcome<String> {
    let spec = model.spec()?;
    let cfg = train_config(run, t, 0.0, 1.0);
    cfg.validate()?;
    let (train_set, test_set) = run.datasets(&spec, t.per_class, t.test_limit)?;
    let mut net = Network::new(spec.clone(), &mut run_rng(run.seed, 0))?;
    let stem = format!("{}-s{}", tag(&spec), run.seed);
    eprintln!("training {stem}: {} images, {} parameters", train_set.len(), net.parameter_count());
    let eval = t.eval_each_epoch.then_some(&test_set);
    let history = train_with_progress(&mut net, &train_set, eval, &cfg, progress(&stem))?;
    let acc = evaluate(&net, &test_set)?;
    println!("{stem}: test accuracy {:.2}% on {} images", 100.0 * acc, test_set.len());
    save_history(run, &format!("{stem}-history.csv"), &history)?;
    let ckpt = format!("{stem}.ckpt");
    save_network(&net, run.out(&ckpt), json!({ "seed": run.seed, "epochs": t.epochs, "test_accuracy": acc }))?;
    run.record(&ckpt);
    run.manifest.config = json!({ "model": spec, "train": cfg, "train_images": train_set.len(), "test_images": test_set.len() });
    run.manifest.results = json!({ "test_accuracy": acc });
    Ok(stem)
}

#[allow(clippy::too_many_arguments)]
fn cmd_distill(
    run: &mut Run,
    student: &str,
    teacher: &str,
    assignment: Option<SchemeKind>,
    decoder: Option<DecoderKind>,
    alpha: f64,
    temperature: f64,
    teacher_checkpoint: Option<&Path>,
    t: &TrainArgs,
) -> Outcome<String> {
    let s_spec = resolve(student, &Overrides { assignment, decoder })?;
    let (mut teacher_net, mode) = match teacher_checkpoint {
        Some(p) => (load_network(p)?.0, MutualMode::FrozenTeacher),
        None => {
            let t_spec = resolve(teacher, &Overrides { assignment: None, decoder })?;
            (Network::new(t_spec, &mut run_rng(run.seed, 0))?, MutualMode::Mutual)
        }
    };
    let cfg = train_config(run, t, alpha, temperature);
    cfg.validate()?;
    let (train_set, test_set) = run.datasets(&s_spec, t.per_class, t.test_limit)?;
    let mut student_net = Network::new(s_spec.clone(), &mut run_rng(run.seed, 0))?;
    let stem = format!("distill-{}-{}-s{}", tag(&s_spec), tag(&teacher_net.spec), run.seed);
    let eval = t.eval_each_epoch.then_some(&test_set);
    let (hs, ht) = mutual_train_with_progress(&mut student_net, &mut teacher_net, &train_set, eval, &cfg, mode, progress("student"))?;
    let s_acc = evaluate(&student_net, &test_set)?;
    let t_acc = evaluate(&teacher_net, &test_set)?;
    println!(
        "{stem}: student {:.2}%, teacher {:.2}% on {} test images",
        100.0 * s_acc,
        100.0 * t_acc,
        test_set.len()
    );
    save_history(run, &format!("{stem}-student-history.csv"), &hs)?;
    save_history(run, &format!("{stem}-teacher-history.csv"), &ht)?;
    for (name, net, acc) in [("student", &student_net, s_acc), ("teacher", &teacher_net, t_acc)] {
        let file = format!("{stem}-{name}.ckpt");
        save_network(net, run.out(&file), json!({ "seed": run.seed, "epochs": t.epochs, "test_accuracy": acc, "role": name }))?;
        run.record(&file);
    }
    run.manifest.config = json!({
        "student": s_spec,
        "teacher": teacher_net.spec,
        "mode": mode,
        "train": cfg,
        "train_images": train_set.len(),
        "test_images": test_set.len(),
    });
    run.manifest.results = json!({ "test_accuracy": s_acc, "teacher_test_accuracy": t_acc });
    Ok(stem)
}

fn cmd_eval(
    run: &mut Run,
    checkpoint: Option<&Path>,
    model: Option<&str>,
    over: Overrides,
    limit: Option<usize>,
) -> Outcome<String> {
    let (net, source) = match (checkpoint, model) {
        (Some(p), _) => (load_network(p)?.0, p.display().to_string()),
        (None, Some(m)) => (Network::new(resolve(m, &over)?, &mut run_rng(run.seed, 0))?, "random initialization".to_string()),
        (None, None) => return Err(Error::Config("eval needs --checkpoint or --model".into()).into()),
    };
    let test = run.test_set(&net.spec, limit)?;
    let acc = evaluate(&net, &test)?;
    let stem = format!("eval-{}-s{}", tag(&net.spec), run.seed);
    println!("{} ({source}): test accuracy {:.2}% on {} images", tag(&net.spec), 100.0 * acc, test.len());
    run.manifest.config = json!({ "model": net.spec, "source": source, "test_images": test.len() });
    run.manifest.results = json!({ "test_accuracy": acc });
    run.write_json(&format!("{stem}.json"), &run.manifest.results.clone())?;
    Ok(stem)
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}

fn cmd_compile(run: &mut Run, input: &Path, out: Option<&Path>) -> Outcome<String> {
    let (net, _) = load_network(input)?;
    let stem = format!("compile-{}", file_stem(input));
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| run.out(&format!("{}-netlist", file_stem(input))));
    let compiled = compile_network_threaded(&net, run.threads)?;
    write_netlists(&compiled, &dir)?;
    for l in &compiled.layers {
        println!("layer {:>2} {:<24} {:>8} MZIs", l.layer(), l.label(), l.mzi_count());
    }
    println!("{} layers, {} MZIs -> {}", compiled.layers.len(), compiled.mzi_count(), dir.display());
    run.manifest.config = json!({ "checkpoint": input, "netlist_dir": dir, "model": net.spec });
    run.manifest.results = json!({ "layers": compiled.layers.len(), "mzi": compiled.mzi_count() });
    run.record(&dir.display().to_string());
    Ok(stem)
}

fn cmd_simulate(run: &mut Run, checkpoint: &Path, netlist: &Path, samples: usize) -> Outcome<String> {
    let (net, _) = load_network(checkpoint)?;
    let compiled = read_netlists(netlist)?;
    let test = run.test_set(&net.spec, Some(samples))?;
    let indices: Vec<usize> = (0..test.len()).collect();
    let v = verify(&net, &compiled, &test, &indices)?;
    let stem = format!("simulate-{}", file_stem(checkpoint));
    println!(
        "{} images: max logit deviation {:.3e} (tolerance {:.0e}) {}",
        v.samples,
        v.max_logit_deviation,
        v.tolerance,
        if v.passed { "PASS" } else { "FAIL" }
    );
    for (layer, dev) in &v.layer_deviation {
        println!("  layer {layer:>2}: max output deviation {dev:.3e}");
    }
    run.manifest.config = json!({ "checkpoint": checkpoint, "netlist_dir": netlist, "samples": v.samples });
    run.manifest.results = json!(v);
    run.write_json(&format!("{stem}.json"), &v)?;
    v.into_result(&net, &compiled)?;
    Ok(stem)
}

fn cmd_report(run: &mut Run) -> Outcome<String> {
    let mut area = String::from("model,assignment,conventional_mzi,conventional_x1e4,split_mzi,split_x1e4,reduction_pct,reduction_without_output_doubling_pct\n");
    let mut decoders = String::from("model,merge,linear,unitary,coherent,merge_overhead_vs_coherent_pct\n");
    println!("{:<10} {:>4} {:>12} {:>7} {:>12} {:>7} {:>9}", "model", "asg", "conv MZI", "x1e4", "split MZI", "x1e4", "red.");
    for name in Architecture::ZOO {
        let conv = area_report(&resolve(name, &Overrides::default())?, run.profile)?;
        let split_spec = resolve(&format!("{name}-scvnn"), &Overrides::default())?;
        let split = area_report(&split_spec, run.profile)?;
        let code = split.scheme.clone().unwrap_or_default();
        println!(
            "{name:<10} {code:>4} {:>12} {:>7} {:>12} {:>7} {:>8.2}%",
            conv.mzi_count,
            in_ten_thousands(conv.mzi_count),
            split.mzi_count,
            in_ten_thousands(split.mzi_count),
            100.0 * split.reduction_ratio
        );
        area.push_str(&format!(
            "{name},{code},{},{},{},{},{:.4},{}\n",
            conv.mzi_count,
            in_ten_thousands(conv.mzi_count),
            split.mzi_count,
            in_ten_thousands(split.mzi_count),
            100.0 * split.reduction_ratio,
            split.reduction_without_output_doubling.map(|r| format!("{:.4}", 100.0 * r)).unwrap_or_default()
        ));
        let count = |d: DecoderKind| -> Outcome<u64> {
            let spec = resolve(&format!("{name}-scvnn"), &Overrides { assignment: None, decoder: Some(d) })?;
            Ok(area_report(&spec, run.profile)?.mzi_count)
        };
        let (m, l, u, c) = (
            count(DecoderKind::Merge)?,
            count(DecoderKind::Linear)?,
            count(DecoderKind::Unitary)?,
            count(DecoderKind::Coherent)?,
        );
        decoders.push_str(&format!("{name},{m},{l},{u},{c},{:.4}\n", 100.0 * (m as f64 - c as f64) / m as f64));
    }
    fs::write(run.out("report-area.csv"), &area)?;
    run.record("report-area.csv");
    fs::write(run.out("report-decoders.csv"), &decoders)?;
    run.record("report-decoders.csv");

    let mut runs = String::from("manifest,command,test_accuracy\n");
    let mut found: Vec<(String, RunManifest)> = Vec::new();
    for entry in fs::read_dir(&run.out_dir)? {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name.ends_with(".manifest.json") {
            if let Ok(m) = RunManifest::read(&path) {
                found.push((name, m));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    if !found.is_empty() {
        println!("\nruns in {}:", run.out_dir.display());
    }
    for (name, m) in &found {
        if let Some(acc) = m.results.get("test_accuracy").and_then(|v| v.as_f64()) {
            println!("  {name:<60} {:>7.2}%", 100.0 * acc);
            runs.push_str(&format!("{name},{},{acc:.6}\n", m.command));
        }
    }
    fs::write(run.out("report-runs.csv"), &runs)?;
    run.record("report-runs.csv");
    run.manifest.config = json!({ "device_profile": run.profile.to_string() });
    Ok("report".into())
}

fn execute(cli: Cli, argv: Vec<String>) -> Outcome<()> {
    if let Command::Replay { manifest } = &cli.command {
        let m = RunManifest::read(manifest)?;
        let args = m.replay_args(cli.out_dir.as_deref());
        eprintln!("replaying: splitonn {}", args.join(" "));
        let replayed = Cli::try_parse_from(std::iter::once("splitonn".to_string()).chain(args.iter().cloned()))
            .map_err(|e| Error::Config(format!("manifest arguments no longer parse: {e}")))?;
        if matches!(replayed.command, Command::Replay { .. }) {
            return Err(Error::Config("a manifest cannot replay another replay".into()).into());
        }
        return execute(replayed, args);
    }
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()).into());
    }
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    fs::create_dir_all(&out_dir)?;
    let mut run = Run {
        seed: cli.seed,
        data_dir: cli.data_dir.clone(),
        out_dir,
        profile: cli.device_profile,
        threads: cli.threads,
        manifest: RunManifest::new(cli.command.name(), argv, cli.seed, cli.threads),
    };
    let stem = match &cli.command {
        Command::Count { model } => cmd_count(&mut run, model)?,
        Command::Train { model, train } => cmd_train(&mut run, model, train)?,
        Command::Distill { student, teacher, assignment, decoder, alpha, temperature, teacher_checkpoint, train } => {
            cmd_distill(&mut run, student, teacher, *assignment, *decoder, *alpha, *temperature, teacher_checkpoint.as_deref(), train)?
        }
        Command::Eval { checkpoint, model, assignment, decoder, test_limit } => cmd_eval(
            &mut run,
            checkpoint.as_deref(),
            model.as_deref(),
            Overrides { assignment: *assignment, decoder: *decoder },
            *test_limit,
        )?,
        Command::Compile { input, out } => cmd_compile(&mut run, input, out.as_deref())?,
        Command::Simulate { checkpoint, netlist, samples } => {
            // The manifest is written even when verification fails.
            match cmd_simulate(&mut run, checkpoint, netlist, *samples) {
                Err(f) if f.code == EXIT_VERIFY => {
                    let stem = format!("simulate-{}", file_stem(checkpoint));
                    run.manifest.write(&run.out_dir.clone(), &stem)?;
                    return Err(f);
                }
                other => other?,
            }
        }
        Command::Report => cmd_report(&mut run)?,
        Command::Replay { .. } => unreachable!("handled above"),
    };
    let out_dir = run.out_dir.clone();
    let path = run.manifest.write(&out_dir, &stem)?;
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use splitonn::model::Flavor;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            Failure::from(Error::Config("x".into())).code,
            data_failure(Error::Config("x".into())).code,
            Failure::from(Error::Verification { layer: 0, stage: None, deviation: 1.0 }).code,
            Failure::from(Error::Divergence { epoch: 0, step: 0, loss: f64::NAN }).code,
            Failure::from(Error::NonFinite("x")).code,
        ];
        assert_eq!(codes, [2, 3, 4, 5, 1]);
    }

    #[test]
    fn flavor_suffix_beats_default() {
        let spec = resolve("fcnn-rvnn", &Overrides::default()).unwrap();
        assert_eq!(spec.flavor, Flavor::Rvnn);
    }
}
