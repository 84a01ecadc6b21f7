//! Subcommand implementations.

use std::io::Read;
use std::path::Path;

use neoxkit_eval_harness::{evaluate_with, ChoiceScoring, PromptTemplate, Scorer};
use neoxkit_infra_model::{
    allreduce_count, derive_layout, emissions, mix_intensity, ClusterTopology, EnergyMix,
    ResidualMode,
};
use neoxkit_model_core::{load_checkpoint, param_count};
use neoxkit_tokenizer::{train_bpe, TokenizerModel};
use neoxkit_tokscope::{
    format_count, format_ratio, longest_tokens, ratio_report, worst_case_words,
};
use neoxkit_trainer::{train, TrainOptions};

use crate::{
    apply_env_seed, load_components, load_documents, model_config_from, train_config_from,
    warn_unknown_keys, CliError, RunConfig,
};

pub fn tok_train(
    corpus: &Path,
    vocab: usize,
    out: &Path,
    reserved: &[String],
) -> Result<(), CliError> {
    let docs = load_documents(corpus)?;
    let reserved_bytes: Vec<Vec<u8>> = reserved.iter().map(|r| r.as_bytes().to_vec()).collect();
    let report = train_bpe(&docs, vocab, &reserved_bytes).map_err(CliError::validation)?;
    for warning in &report.warnings {
        eprintln!("neoxkit: warning: {warning}");
    }
    report.model.save(out).map_err(CliError::runtime)?;
    println!(
        "{{\"vocab_size\":{},\"merges\":{},\"halted_early\":{}}}",
        report.model.vocab_size(),
        report.model.merges().len(),
        report.halted_early
    );
    eprintln!(
        "neoxkit: trained tokenizer with {} entries ({} merges) -> {}",
        report.model.vocab_size(),
        report.model.merges().len(),
        out.display()
    );
    Ok(())
}

fn read_text_arg(text: Option<&str>, input: Option<&Path>) -> Result<Vec<u8>, CliError> {
    match (text, input) {
        (Some(t), None) => Ok(t.as_bytes().to_vec()),
        (None, Some(path)) => std::fs::read(path).map_err(CliError::runtime),
        (None, None) => {
            let mut buf = Vec::new();
            std::io::stdin()
                .read_to_end(&mut buf)
                .map_err(CliError::runtime)?;
            Ok(buf)
        }
        (Some(_), Some(_)) => Err(CliError::Validation(
            "pass either --text or --input, not both".into(),
        )),
    }
}

pub fn encode(tok: &Path, text: Option<&str>, input: Option<&Path>) -> Result<(), CliError> {
    let model = TokenizerModel::load(tok).map_err(CliError::validation)?;
    let bytes = read_text_arg(text, input)?;
    let ids = model.encode(&bytes);
    let rendered: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    println!("{}", rendered.join(" "));
    eprintln!("neoxkit: {} bytes -> {} tokens", bytes.len(), ids.len());
    Ok(())
}

pub fn decode(tok: &Path, ids_arg: Option<&str>) -> Result<(), CliError> {
    let model = TokenizerModel::load(tok).map_err(CliError::validation)?;
    let raw = match ids_arg {
        Some(s) => s.to_string(),
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(CliError::runtime)?;
            buf
        }
    };
    let ids: Vec<u32> = raw
        .split_whitespace()
        .map(|p| {
            p.parse::<u32>()
                .map_err(|_| CliError::Validation(format!("bad token id `{p}`")))
        })
        .collect::<Result<_, _>>()?;
    let bytes = model.decode(&ids).map_err(CliError::validation)?;
    let mut stdout = std::io::stdout();
    use std::io::Write;
    stdout.write_all(&bytes).map_err(CliError::runtime)?;
    stdout.write_all(b"\n").map_err(CliError::runtime)?;
    Ok(())
}

pub fn tokscope_ratio(
    corpus: &Path,
    tok_a: &Path,
    tok_b: &Path,
    no_whitespace: bool,
) -> Result<(), CliError> {
    let model_a = TokenizerModel::load(tok_a).map_err(CliError::validation)?;
    let model_b = TokenizerModel::load(tok_b).map_err(CliError::validation)?;
    let components = load_components(corpus)?;
    let report = ratio_report(&components, &model_a, &model_b, no_whitespace);
    for row in report.rows.iter().chain(std::iter::once(&report.totals)) {
        println!(
            "{{\"component\":{},\"tokens_a\":{},\"tokens_b\":{},\"ratio\":{}}}",
            serde_json::to_string(&row.component).expect("string serializes"),
            row.count_a,
            row.count_b,
            format_ratio(row.ratio)
        );
    }
    eprint!("{}", report.render());
    Ok(())
}

pub fn tokscope_longest(tok: &Path, k: usize) -> Result<(), CliError> {
    let model = TokenizerModel::load(tok).map_err(CliError::validation)?;
    for (rank, token) in longest_tokens(&model, k).iter().enumerate() {
        let text = String::from_utf8_lossy(token);
        println!(
            "{{\"rank\":{},\"bytes\":{},\"token\":{}}}",
            rank + 1,
            token.len(),
            serde_json::to_string(&text).expect("string serializes")
        );
        eprintln!("{:>3}. ({:>2} bytes) {:?}", rank + 1, token.len(), text);
    }
    Ok(())
}

pub fn tokscope_worstcase(
    corpus: &Path,
    tok_a: &Path,
    tok_b: &Path,
    min_count: u64,
    top: usize,
) -> Result<(), CliError> {
    let model_a = TokenizerModel::load(tok_a).map_err(CliError::validation)?;
    let model_b = TokenizerModel::load(tok_b).map_err(CliError::validation)?;
    for component in load_components(corpus)? {
        let report = worst_case_words(&component, &model_a, &model_b, min_count, top);
        for (direction, list) in [
            ("worst_for_a", &report.worst_for_a),
            ("worst_for_b", &report.worst_for_b),
        ] {
            for w in list {
                let word = String::from_utf8_lossy(&w.word);
                println!(
                    "{{\"component\":{},\"direction\":\"{}\",\"word\":{},\"tokens_a\":{},\"tokens_b\":{}}}",
                    serde_json::to_string(&component.name).expect("string serializes"),
                    direction,
                    serde_json::to_string(&word).expect("string serializes"),
                    w.tokens_a,
                    w.tokens_b
                );
                eprintln!(
                    "[{}] {direction}: {word:?} {} vs {}",
                    component.name, w.tokens_a, w.tokens_b
                );
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn train_cmd(
    config_path: Option<&Path>,
    train_iters: Option<u64>,
    seed: Option<u64>,
    corpus: &Path,
    tok: &Path,
    out_dir: &Path,
    val: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = match config_path {
        Some(p) => RunConfig::parse_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(iters) = train_iters {
        cfg.apply_flag("train-iters", iters);
    }
    if let Some(seed) = seed {
        cfg.apply_flag("seed", seed);
    }
    apply_env_seed(&mut cfg)?;
    warn_unknown_keys(&cfg);

    let tokenizer = TokenizerModel::load(tok).map_err(CliError::validation)?;
    cfg.set_default("vocab-size", tokenizer.vocab_size());
    let model_cfg = model_config_from(&mut cfg)?;
    if model_cfg.vocab_size < tokenizer.vocab_size() {
        return Err(CliError::Validation(format!(
            "vocab-size {} smaller than the tokenizer's {} entries",
            model_cfg.vocab_size,
            tokenizer.vocab_size()
        )));
    }
    let train_cfg = train_config_from(&mut cfg)?;

    let encode_stream = |path: &Path| -> Result<Vec<u32>, CliError> {
        let docs = load_documents(path)?;
        let mut stream = Vec::new();
        for doc in docs {
            stream.extend(tokenizer.encode(&doc));
        }
        Ok(stream)
    };
    let stream = encode_stream(corpus)?;
    let mut val_stream = val.map(encode_stream).transpose()?;
    // Without an explicit held-out file, a `split` ratio such as
    // `995,4,1` carves train/validation(/test) slices from the stream.
    let stream = if val_stream.is_none() && cfg.get_raw("split").is_some() {
        let parts = cfg.get_scalar_list("split")?;
        if parts.len() < 2 || parts.iter().any(|&p| p < 0.0) || parts.iter().sum::<f64>() <= 0.0 {
            return Err(CliError::Validation(
                "split needs at least two non-negative ratios, e.g. `995,4,1`".into(),
            ));
        }
        let total: f64 = parts.iter().sum();
        let n_train = ((parts[0] / total) * stream.len() as f64).floor() as usize;
        let n_val = ((parts[1] / total) * stream.len() as f64).ceil() as usize;
        let val_end = (n_train + n_val).min(stream.len());
        eprintln!(
            "neoxkit: split {}: {} train tokens, {} validation tokens",
            cfg.get_raw("split").unwrap_or_default(),
            n_train,
            val_end - n_train
        );
        val_stream = Some(stream[n_train..val_end].to_vec());
        stream[..n_train].to_vec()
    } else {
        stream
    };

    std::fs::create_dir_all(out_dir).map_err(CliError::runtime)?;
    let mut model = neoxkit_model_core::init_params(&model_cfg).map_err(CliError::validation)?;
    eprintln!(
        "neoxkit: training {} params for {} steps of {} tokens",
        neoxkit_model_core::param_count(&model_cfg).total,
        train_cfg.total_steps,
        train_cfg.batch_tokens
    );
    let opts = TrainOptions {
        checkpoint_dir: Some(out_dir),
        val_ids: val_stream.as_deref(),
    };
    let output = train(&mut model, &stream, &train_cfg, &opts).map_err(CliError::runtime)?;

    let mut log_bytes = Vec::new();
    output
        .log
        .write_jsonl(&mut log_bytes)
        .map_err(CliError::runtime)?;
    std::fs::write(out_dir.join("loss.jsonl"), &log_bytes).map_err(CliError::runtime)?;
    print!("{}", String::from_utf8_lossy(&log_bytes));
    for step in &output.epoch_boundaries {
        eprintln!("neoxkit: epoch boundary crossed at step {step}");
    }
    eprintln!(
        "neoxkit: loss {:.4} -> {:.4}; {} checkpoints in {}",
        output.initial_loss,
        output.final_loss,
        output.checkpoints.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn eval_cmd(
    task_path: &Path,
    shots: usize,
    model_path: &Path,
    tok: &Path,
    per_token: bool,
    max_gen_tokens: usize,
) -> Result<(), CliError> {
    let file = std::fs::File::open(task_path).map_err(CliError::runtime)?;
    let task = neoxkit_eval_harness::load_task(std::io::BufReader::new(file))
        .map_err(CliError::validation)?;
    let model = load_checkpoint(model_path).map_err(CliError::validation)?;
    let tokenizer = TokenizerModel::load(tok).map_err(CliError::validation)?;
    let scorer = Scorer::new(&model, &tokenizer);
    let scoring = if per_token {
        ChoiceScoring::PerToken
    } else {
        ChoiceScoring::RawSum
    };
    let result = evaluate_with(
        &scorer,
        &task,
        shots,
        scoring,
        &PromptTemplate::default(),
        max_gen_tokens,
    )
    .map_err(CliError::runtime)?;
    println!(
        "{{\"task\":{},\"shots\":{},\"n\":{},\"accuracy\":{:?},\"stderr\":{:?}}}",
        serde_json::to_string(&result.task).expect("string serializes"),
        result.shots,
        result.n,
        result.accuracy,
        result.stderr
    );
    eprintln!(
        "{} ({}-shot, n={}): {}",
        result.task,
        result.shots,
        result.n,
        result.render()
    );
    Ok(())
}

pub fn plan(nodes: u64, gpus: u64, tp: u64, pp: u64, layers: Option<u64>) -> Result<(), CliError> {
    let topo = ClusterTopology {
        nodes,
        gpus_per_node: gpus,
    };
    let layout = derive_layout(topo, tp, pp).map_err(CliError::validation)?;
    let reduce = layers
        .map(|l| -> Result<_, CliError> {
            let serial = allreduce_count(l, ResidualMode::Serial).map_err(CliError::validation)?;
            let parallel =
                allreduce_count(l, ResidualMode::Parallel).map_err(CliError::validation)?;
            Ok((serial, parallel))
        })
        .transpose()?;
    let mut line = format!(
        "{{\"tp\":{},\"pp\":{},\"dp\":{},\"intra_node\":{}",
        layout.tp, layout.pp, layout.dp, layout.intra_node
    );
    if let Some((serial, parallel)) = reduce {
        line.push_str(&format!(
            ",\"allreduce_serial\":[{},{}],\"allreduce_parallel\":[{},{}]",
            serial.0, serial.1, parallel.0, parallel.1
        ));
    }
    line.push('}');
    println!("{line}");
    eprintln!(
        "neoxkit: {} GPUs as tp={} x pp={} x dp={} ({})",
        topo.total_gpus(),
        layout.tp,
        layout.pp,
        layout.dp,
        if layout.intra_node {
            "model parallelism stays intra-node"
        } else {
            "model replica spans nodes"
        }
    );
    Ok(())
}

pub fn carbon(mix_path: &Path, mwh: Option<f64>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(mix_path).map_err(CliError::runtime)?;
    let mix = EnergyMix::parse(&text).map_err(CliError::validation)?;
    let intensity = mix_intensity(&mix).map_err(CliError::validation)?;
    match mwh {
        Some(mwh) => {
            let tons = emissions(mwh, intensity).map_err(CliError::validation)?;
            println!(
                "{{\"intensity_t_per_mwh\":{intensity:?},\"mwh\":{mwh:?},\"emissions_t\":{tons:?}}}"
            );
            eprintln!(
                "neoxkit: {:.5} t CO2/MWh x {mwh} MWh = {:.2} t CO2",
                intensity, tons
            );
        }
        None => {
            println!("{{\"intensity_t_per_mwh\":{intensity:?}}}");
            eprintln!("neoxkit: mix averages {intensity:.5} t CO2/MWh");
        }
    }
    Ok(())
}

pub fn params(config_path: &Path) -> Result<(), CliError> {
    let mut cfg = RunConfig::parse_file(config_path)?;
    apply_env_seed(&mut cfg)?;
    warn_unknown_keys(&cfg);
    let model_cfg = model_config_from(&mut cfg)?;
    let counts = param_count(&model_cfg);
    println!(
        "{{\"total\":{},\"non_embedding\":{}}}",
        counts.total, counts.non_embedding
    );
    eprintln!(
        "neoxkit: {} total parameters, {} non-embedding",
        format_count(counts.total),
        format_count(counts.non_embedding)
    );
    Ok(())
}
