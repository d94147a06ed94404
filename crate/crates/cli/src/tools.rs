use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use xcrossnet::data::{synth_generate, write_tsv};
use xcrossnet::gradcheck::{run_gradcheck, GradcheckOptions};
use xcrossnet::metrics::auc;
use xcrossnet::model::{balance_index, DimConvention, ModelConfig, ParamCounts, XCrossNetModel};
use xcrossnet::optim::logloss;

use crate::config::{merge, read_config_file, resolve, synth_preset, to_value, Overrides};
use crate::error::CliError;
use crate::source::open_checkpoint;

pub fn gradcheck(
    config: Option<&Path>,
    seed: u64,
    batch_size: usize,
    inject_fault: Option<String>,
) -> Result<ExitCode, CliError> {
    let mut model_cfg = ModelConfig::gradcheck_default();
    if let Some(path) = config {
        let mut merged = to_value(&model_cfg);
        merge(&mut merged, read_config_file(path)?);
        model_cfg = merged
            .try_into()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    let opts = GradcheckOptions {
        config: model_cfg,
        seed,
        batch_size,
        inject_fault,
        ..GradcheckOptions::default()
    };
    let started = Instant::now();
    let report = run_gradcheck(&opts)?;
    println!("{report}");
    println!("runtime_ms={}", started.elapsed().as_millis());
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(CliError::Check(String::new()).exit_code() as u8)
    })
}

fn write_probs(probs: &[f64], path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
    for p in probs {
        writeln!(w, "{p}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn synth(
    preset: &str,
    seed: Option<u64>,
    n_train: Option<usize>,
    n_valid: Option<usize>,
    out: &Path,
    gzip: bool,
) -> Result<(), CliError> {
    let mut spec = synth_preset(preset)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(n) = n_train {
        spec.n_train = n;
    }
    if let Some(n) = n_valid {
        spec.n_valid = n;
    }
    let data = synth_generate(&spec)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let ext = if gzip { "tsv.gz" } else { "tsv" };
    write_tsv(&data.train, &out.join(format!("train.{ext}")))?;
    write_tsv(&data.valid, &out.join(format!("valid.{ext}")))?;
    write_probs(&data.train_probs, &out.join("train_probs.txt"))?;
    write_probs(&data.valid_probs, &out.join("valid_probs.txt"))?;

    for (name, set, probs) in [("train", &data.train, &data.train_probs), ("valid", &data.valid, &data.valid_probs)] {
        if set.is_empty() {
            continue;
        }
        let labels = set.labels();
        let pos = labels.iter().filter(|&&y| y == 1).count();
        println!("n_{name}={}", set.len());
        println!("positive_rate.{name}={}", pos as f64 / set.len() as f64);
        match auc(probs, &labels) {
            Ok(a) => println!("bayes_auc.{name}={a}"),
            Err(_) => println!("bayes_auc.{name}=unavailable"),
        }
        println!("bayes_logloss.{name}={}", logloss(probs, &labels)?);
    }
    println!("out={}", out.display());
    Ok(())
}

/// Parameter counts; the embedding count is unknown without vocabularies.
fn counts_for(cfg: &ModelConfig) -> Result<(ParamCounts, bool), CliError> {
    if cfg.vocab_sizes.len() == cfg.num_sparse {
        return Ok((XCrossNetModel::zeros(cfg)?.param_counts(), true));
    }
    let placeholder = ModelConfig {
        vocab_sizes: vec![1; cfg.num_sparse],
        ..cfg.clone()
    };
    Ok((XCrossNetModel::zeros(&placeholder)?.param_counts(), false))
}

fn print_model(cfg: &ModelConfig) -> Result<(), CliError> {
    let widths: Vec<String> = cfg.mlp_widths.iter().map(usize::to_string).collect();
    println!("model.num_dense={}", cfg.num_dense);
    println!("model.num_sparse={}", cfg.num_sparse);
    if cfg.vocab_sizes.len() == cfg.num_sparse {
        let v: Vec<String> = cfg.vocab_sizes.iter().map(usize::to_string).collect();
        println!("model.vocab_sizes={}", v.join(","));
    } else {
        println!("model.vocab_sizes=unknown");
    }
    println!("model.embedding_dim={}", cfg.embedding_dim);
    println!("model.product_units={}", cfg.product_units);
    println!("model.cross_depth={}", cfg.cross_depth);
    println!("model.mlp_widths={}", widths.join(","));
    println!("model.seed={}", cfg.seed);
    println!("dims.dense_cross={}", cfg.dense_cross_dim());
    println!("dims.sparse_cross={}", cfg.sparse_cross_dim());
    println!("dims.concat={}", cfg.concat_dim());
    println!("dims.mlp_input={}", cfg.mlp_input_dim());

    let (c, known) = counts_for(cfg)?;
    println!("params.cross={}", c.cross);
    if known {
        println!("params.embedding={}", c.embedding);
    } else {
        println!("params.embedding=unknown");
    }
    println!("params.product={}", c.product);
    println!("params.concat={}", c.concat);
    println!("params.mlp={}", c.mlp);
    if known {
        println!("params.total={}", c.total);
    } else {
        println!("params.total_without_embedding={}", c.total - c.embedding);
    }
    println!("balance_index.with_input={}", balance_index(cfg, DimConvention::WithInput));
    println!("balance_index.cross_only={}", balance_index(cfg, DimConvention::CrossOnly));
    Ok(())
}

pub fn inspect(checkpoint: Option<&Path>, config: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = checkpoint {
        let (model, header) = open_checkpoint(path)?;
        println!("source=checkpoint");
        println!("checkpoint.format_version={}", header.format_version);
        for (k, v) in &header.meta {
            println!("checkpoint.{k}={}", v.as_str().map_or_else(|| v.to_string(), str::to_string));
        }
        print_model(model.config())?;
        if model.param_counts() != header.counts {
            return Err(CliError::Io(format!("{}: stored parameter counts disagree with the topology", path.display())));
        }
        return Ok(());
    }

    let cfg = match config {
        Some(path) => {
            println!("source=config");
            let file = read_config_file(path)?;
            // Data paths are not needed to describe the topology.
            let has_data = file.get("data").is_some_and(|d| d.get("synth").is_some() || d.get("train").is_some());
            let flags = Overrides {
                data: (!has_data).then(|| "unused".into()),
                ..Overrides::default()
            };
            resolve(Some(file), &flags)?
        }
        None => {
            println!("source=defaults");
            resolve(
                None,
                &Overrides {
                    data: Some("unused".into()),
                    ..Overrides::default()
                },
            )?
        }
    };
    let (m, n) = cfg.schema();
    let vocab = cfg.data.synth.as_ref().map(|s| s.vocab_sizes.clone()).unwrap_or_default();
    print_model(&cfg.model.to_model_config(m, n, vocab))
}
