use std::fmt::Write as _;
use std::io::Write as _;
use std::fs;
use std::path::Path;

use mips_screen::distill::{self, DistillConfig, DualEncoder, LabeledPair, PlantedTaskSpec};
use mips_screen::eval::{self, Searcher};
use mips_screen::io;
use mips_screen::screening::{self, ScreeningModel, ScreeningTrainSet, TrainConfig};
use mips_screen::synth::{gen_synthetic, SyntheticSpec};
use mips_screen::{build_labels, exact_argmax, EmbeddingMatrix};

use crate::args::*;
use crate::DataError;

type CmdResult = Result<(), DataError>;

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Labels(a) => labels(a),
        Command::TrainScreen(a) => train_screen(a),
        Command::EvalScreen(a) => eval_screen(a),
        Command::Grid(a) => grid(a),
        Command::Search(a) => search(a),
        Command::GenPairs(a) => gen_pairs(a),
        Command::Distill(a) => distill_cmd(a),
        Command::Bench(a) => bench(a),
    }
}

fn load_emb(flag: &str, path: &Path) -> Result<EmbeddingMatrix, DataError> {
    io::read_embeddings(path).map_err(|e| DataError::at(format!("{flag} '{}'", path.display()), e))
}

fn load_model(flag: &str, path: &Path) -> Result<ScreeningModel, DataError> {
    io::read_model(path).map_err(|e| DataError::at(format!("{flag} '{}'", path.display()), e))
}

fn save(flag: &str, path: &Path, res: mips_screen::Result<()>) -> CmdResult {
    res.map_err(|e| DataError::at(format!("{flag} '{}'", path.display()), e))
}

fn write_report(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| DataError::at(format!("--report '{}'", p.display()), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_n(model: &ScreeningModel, candidates: &EmbeddingMatrix, cand_path: &Path) -> CmdResult {
    if model.n() != candidates.len() {
        return Err(DataError(format!(
            "--candidates '{}': model screens N = {} candidates but the file has {}",
            cand_path.display(),
            model.n(),
            candidates.len()
        )));
    }
    if model.dim() != candidates.dim() {
        return Err(DataError(format!(
            "--candidates '{}': model dimension {} but candidates have {}",
            cand_path.display(),
            model.dim(),
            candidates.dim()
        )));
    }
    Ok(())
}

fn train_config(k: usize, lambda: f64, t: &TrainOpts) -> TrainConfig {
    let mut cfg = TrainConfig::new(k, lambda).with_seed(t.seed);
    cfg.alternations = t.t;
    cfg.sgd.learning_rate = t.lr;
    cfg.sgd.epochs_per_alternation = t.epochs;
    cfg.sgd.batch_size = t.batch;
    cfg
}

fn train_set(
    contexts: &Path,
    candidates: &Path,
    labels: Option<&Path>,
) -> Result<ScreeningTrainSet, DataError> {
    let ctx = load_emb("--contexts", contexts)?;
    let cand = load_emb("--candidates", candidates)?;
    match labels {
        Some(p) => {
            let lab = io::read_labels(p).map_err(|e| DataError::at(format!("--labels '{}'", p.display()), e))?;
            ScreeningTrainSet::new(ctx, cand, lab).map_err(|e| DataError::at(format!("--labels '{}'", p.display()), e))
        }
        None => ScreeningTrainSet::from_oracle(ctx, cand)
            .map_err(|e| DataError::at(format!("--contexts '{}'", contexts.display()), e)),
    }
}

fn gen(a: GenArgs) -> CmdResult {
    let spec = SyntheticSpec {
        m_train: a.m_train,
        m_test: a.m_test,
        n: a.n,
        dim: a.d,
        topics: a.topics,
        noise_sigma: a.sigma,
        seed: a.seed,
    };
    let data = gen_synthetic(&spec).map_err(|e| DataError::at("gen", e))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| DataError::at(format!("--out-dir '{}'", a.out_dir.display()), e))?;
    for (name, m) in [
        ("train.emb", &data.train_contexts),
        ("test.emb", &data.test_contexts),
        ("candidates.emb", &data.candidates),
    ] {
        let p = a.out_dir.join(name);
        save("--out-dir", &p, io::write_embeddings(m, &p))?;
    }
    println!(
        "wrote {} train / {} test contexts and {} candidates (D = {}) to {}",
        a.m_train,
        a.m_test,
        a.n,
        a.d,
        a.out_dir.display()
    );
    Ok(())
}

fn labels(a: LabelsArgs) -> CmdResult {
    let ctx = load_emb("--contexts", &a.contexts)?;
    let cand = load_emb("--candidates", &a.candidates)?;
    let labels = build_labels(&ctx, &cand).map_err(|e| DataError::at("--contexts/--candidates", e))?;
    save("--out", &a.out, io::write_labels(&labels, &a.out))?;
    let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    println!("labelled {} contexts, {distinct} distinct winners", labels.len());
    Ok(())
}

fn train_screen(a: TrainScreenArgs) -> CmdResult {
    let set = train_set(&a.contexts, &a.candidates, a.labels.as_deref())?;
    let cfg = train_config(a.k, a.lambda, &a.train);
    let out = screening::train(&set, &cfg).map_err(|e| DataError::at("train-screen", e))?;
    save("--out-model", &a.out_model, io::write_model(&out.model, &a.out_model))?;
    println!("# K = {}, lambda = {:e}, T = {}, seed = {}", a.k, a.lambda, a.train.t, a.train.seed);
    println!("alternation,loss_before_subsets,loss_after_subsets,loss_after_sgd,mean_subset_size");
    for s in &out.trajectory {
        println!(
            "{},{:.6},{:.6},{:.6},{:.2}",
            s.alternation, s.loss_before_subsets, s.loss_after_subsets, s.loss_after_sgd, s.mean_subset_size
        );
    }
    println!("# kept alternation {} with loss {:.6}", out.best_alternation, out.best_loss);
    Ok(())
}

fn eval_screen(a: EvalScreenArgs) -> CmdResult {
    let model = load_model("--model", &a.model)?;
    let ctx = load_emb("--contexts", &a.contexts)?;
    let cand = load_emb("--candidates", &a.candidates)?;
    check_n(&model, &cand, &a.candidates)?;
    let r = eval::evaluate(&model, &ctx, &cand).map_err(|e| DataError::at("eval-screen", e))?;
    let mut out = String::new();
    let _ = writeln!(out, "# model = {}", a.model.display());
    let _ = writeln!(out, "# contexts = {} ({} rows)", a.contexts.display(), ctx.len());
    let _ = writeln!(out, "# candidates = {} ({} rows)", a.candidates.display(), cand.len());
    let _ = writeln!(out, "# K = {}, lambda = {:e}", model.k(), model.lambda());
    let _ = writeln!(out, "metric,value");
    let _ = writeln!(out, "accuracy,{:.6}", r.accuracy);
    let _ = writeln!(out, "speedup,{:.6}", r.speedup_ratio);
    let _ = writeln!(out, "mean_subset,{:.3}", r.mean_subset_size);
    let _ = writeln!(out, "top1_agreement,{:.6}", r.top1_agreement);
    write_report(a.report.as_deref(), &out)
}

fn grid(a: GridArgs) -> CmdResult {
    let set = train_set(&a.contexts, &a.candidates, a.labels.as_deref())?;
    let test = load_emb("--test-contexts", &a.test_contexts)?;
    let base = train_config(a.k[0], a.lambda[0], &a.train);
    let rows = eval::grid_sweep(&set, &test, &a.k, &a.lambda, &base).map_err(|e| DataError::at("grid", e))?;
    let comments = vec![
        format!("contexts = {} ({} rows)", a.contexts.display(), set.m()),
        format!("test_contexts = {} ({} rows)", a.test_contexts.display(), test.len()),
        format!("candidates = {} ({} rows)", a.candidates.display(), set.n()),
        format!(
            "T = {}, lr = {}, epochs = {}, batch = {}, seed = {}",
            a.train.t, a.train.lr, a.train.epochs, a.train.batch, a.train.seed
        ),
    ];
    write_report(a.report.as_deref(), &eval::grid_csv(&rows, &comments))?;
    if a.report.is_some() {
        eprint!("{}", eval::grid_table(&rows));
    }
    Ok(())
}

fn search(a: SearchArgs) -> CmdResult {
    let ctx = load_emb("--context-file", &a.context_file)?;
    let cand = load_emb("--candidates", &a.candidates)?;
    let model = match (&a.model, a.screened) {
        (Some(p), true) => {
            let m = load_model("--model", p)?;
            check_n(&m, &cand, &a.candidates)?;
            Some(m)
        }
        (None, true) => return Err(DataError("--model: required with --screened".into())),
        _ => None,
    };
    let mut out = std::io::stdout().lock();
    // A closed pipe (e.g. `| head`) just ends the listing.
    if writeln!(out, "context,index,score").is_err() {
        return Ok(());
    }
    for (i, c) in ctx.rows().enumerate() {
        let r = match &model {
            Some(m) => m.screened_search(c, &cand),
            None => exact_argmax(c, &cand),
        }
        .map_err(|e| DataError::at(format!("--context-file '{}' row {i}", a.context_file.display()), e))?;
        if writeln!(out, "{i},{},{:.9}", r.index, r.score).is_err() {
            break;
        }
    }
    Ok(())
}

fn gen_pairs(a: GenPairsArgs) -> CmdResult {
    let spec = PlantedTaskSpec {
        features: a.features,
        rank: a.rank,
        tanh_units: a.tanh_units,
        train_positives: a.positives,
        test_contexts: a.test_contexts,
        response_noise: a.noise,
        teacher_seed: a.teacher_seed,
        data_seed: a.seed,
    };
    let task = distill::planted_task(&spec).map_err(|e| DataError::at("gen-pairs", e))?;
    let write = |flag: &str, path: &Path, pairs: &[LabeledPair]| {
        let scores = distill::teacher_scores(pairs, &task.teacher);
        save(flag, path, io::write_pairs(pairs, &scores, path))
    };
    write("--out", &a.out, &task.train)?;
    if let Some(p) = &a.out_test {
        write("--out-test", p, &task.test_pairs)?;
    }
    println!("wrote {} training pairs ({} features)", task.train.len(), a.features);
    Ok(())
}

fn load_pairs(flag: &str, path: &Path) -> Result<(Vec<LabeledPair>, Vec<f64>), DataError> {
    io::read_pairs(path).map_err(|e| DataError::at(format!("{flag} '{}'", path.display()), e))
}

/// Mean squared student/teacher gap and the fraction of pairs classified
/// correctly at threshold 0.5.
fn held_out(enc: &DualEncoder, pairs: &[LabeledPair], teacher: &[f64]) -> mips_screen::Result<(f64, f64)> {
    let mut gap = 0.0;
    let mut correct = 0usize;
    for (p, t) in pairs.iter().zip(teacher) {
        let s = enc.score(&p.context, &p.response)?;
        gap += (s - t).powi(2);
        if (s > 0.5) == p.label {
            correct += 1;
        }
    }
    Ok((gap / pairs.len() as f64, correct as f64 / pairs.len() as f64))
}

fn distill_cmd(a: DistillArgs) -> CmdResult {
    let (pairs, teacher) = load_pairs("--pairs", &a.pairs)?;
    let cfg = DistillConfig {
        beta: a.beta,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        embed_dim: a.dim,
    };
    let out = distill::train_with_scores(&pairs, &teacher, &cfg)
        .map_err(|e| DataError::at(format!("--pairs '{}'", a.pairs.display()), e))?;
    save("--out-encoder", &a.out_encoder, io::write_encoder(&out.encoder, &a.out_encoder))?;
    if let Some(r) = &a.report {
        let mut text = String::new();
        let _ = writeln!(text, "# pairs = {} ({} rows)", a.pairs.display(), pairs.len());
        let _ = writeln!(
            text,
            "# beta = {}, lr = {}, epochs = {}, batch = {}, dim = {}, seed = {}",
            a.beta, a.lr, a.epochs, a.batch, a.dim, a.seed
        );
        let _ = writeln!(text, "epoch,loss");
        for (i, l) in out.loss_trajectory.iter().enumerate() {
            let _ = writeln!(text, "{},{l:.9}", i + 1);
        }
        write_report(Some(r), &text)?;
    }
    if let Some(last) = out.loss_trajectory.last() {
        println!("final training loss {last:.6}");
    }
    if let Some(p) = &a.test_pairs {
        let (tp, tt) = load_pairs("--test-pairs", p)?;
        let (gap, acc) = held_out(&out.encoder, &tp, &tt)
            .map_err(|e| DataError::at(format!("--test-pairs '{}'", p.display()), e))?;
        println!("held-out teacher gap {gap:.6}, pair accuracy {acc:.4}");
    }
    Ok(())
}

fn bench(a: BenchArgs) -> CmdResult {
    let ctx = load_emb("--contexts", &a.contexts)?;
    let cand = load_emb("--candidates", &a.candidates)?;
    let model = match &a.model {
        Some(p) => {
            let m = load_model("--model", p)?;
            check_n(&m, &cand, &a.candidates)?;
            Some(m)
        }
        None => None,
    };
    println!("# contexts = {} ({} rows), candidates = {} ({} rows)", a.contexts.display(), ctx.len(), a.candidates.display(), cand.len());
    println!("# warmup = {}, iters = {}", a.warmup, a.iters);
    println!("searcher,mean_us,p50_us,p99_us,queries,mismatches");
    let exact = eval::bench_latency(Searcher::Exact, &ctx, &cand, a.warmup, a.iters).map_err(|e| DataError::at("bench", e))?;
    let line = |name: &str, s: &eval::LatencyStats| {
        println!(
            "{name},{:.3},{:.3},{:.3},{},{}",
            s.mean_ns / 1e3,
            s.p50_ns / 1e3,
            s.p99_ns / 1e3,
            s.queries,
            s.mismatches
        )
    };
    line("exact", &exact);
    if let Some(m) = &model {
        let s = eval::bench_latency(Searcher::Screened(m), &ctx, &cand, a.warmup, a.iters)
            .map_err(|e| DataError::at("bench", e))?;
        line("screened", &s);
        let ratio = eval::speedup_ratio(m, &ctx).map_err(|e| DataError::at("bench", e))?;
        println!("# speedup_ratio = {ratio:.3}, wall-clock ratio = {:.3}", exact.mean_ns / s.mean_ns);
    }
    Ok(())
}
