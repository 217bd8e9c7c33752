use std::path::Path;

use anyhow::{bail, Context};
use serde_json::json;
use vgd_core::backends::cache::CACHE_VERSION;
use vgd_core::backends::{
    GatewayClient, InitIndex, ScorerSession, ToyBackend, VocabCache, Vocabulary,
};
use vgd_core::engine::DecodeTrace;
use vgd_core::templates::TemplateRegistry;
use vgd_core::{tasks, DecodeOutput, Decoder, Mode};

use crate::args::{CacheCommand, Command, TraceCommand};
use crate::settings::{BackendSpec, Settings, Usage};

struct Backend {
    session: ScorerSession,
    id: String,
    vocab: Option<Vocabulary>,
}

fn open_backend(settings: &Settings) -> anyhow::Result<Backend> {
    let mut backend = match settings.backend_spec()? {
        BackendSpec::Toy(path) => {
            let toy = ToyBackend::load(&path)
                .with_context(|| format!("loading toy backend {}", path.display()))?;
            Backend {
                id: toy.backend_id().to_string(),
                vocab: Some(toy.vocabulary()),
                session: ScorerSession::from_backend(toy),
            }
        }
        BackendSpec::Gateway(url) => {
            let client =
                GatewayClient::connect(&url).with_context(|| format!("connecting to gateway {url}"))?;
            Backend {
                id: client.backend_id(),
                vocab: None,
                session: ScorerSession::from_backend(client),
            }
        }
    };
    if let Some(path) = &settings.vocab {
        backend.vocab = Some(
            Vocabulary::load(path).with_context(|| format!("reading vocabulary {}", path.display()))?,
        );
    }
    Ok(backend)
}

fn init_index(settings: &Settings, backend: &Backend) -> anyhow::Result<Option<InitIndex>> {
    if settings.mode == Mode::LlmOnly || settings.init_tokens == 0 {
        return Ok(None);
    }
    let Some(vocab) = &backend.vocab else {
        return Err(Usage(
            "beam initialization needs a vocabulary: pass --vocab FILE or --init-tokens 0".into(),
        )
        .into());
    };
    let index = match &settings.cache {
        Some(path) => {
            let cache = VocabCache::load(path)
                .with_context(|| format!("reading cache {}", path.display()))?;
            if cache.backend_id() != backend.id {
                bail!(
                    "cache {} was built for {:?}, backend is {:?}",
                    path.display(),
                    cache.backend_id(),
                    backend.id
                );
            }
            InitIndex::new(cache, vocab)?
        }
        None => InitIndex::build(backend.session.align.as_ref(), &backend.id, vocab)?,
    };
    Ok(Some(index))
}

fn decoder(settings: &Settings, backend: &Backend) -> anyhow::Result<Decoder> {
    let mut templates = TemplateRegistry::builtin();
    if let Some(path) = &settings.template_file {
        templates
            .load_overrides(path)
            .with_context(|| format!("reading templates {}", path.display()))?;
    }
    let mut decoder = Decoder::new(backend.session.clone()).with_templates(templates);
    if let Some(index) = init_index(settings, backend)? {
        decoder = decoder.with_init_index(index);
    }
    Ok(decoder)
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn emit_decode(settings: &Settings, out: &DecodeOutput) -> anyhow::Result<()> {
    if let Some(path) = &settings.trace {
        let f = std::fs::File::create(path)
            .with_context(|| format!("creating trace {}", path.display()))?;
        out.trace.write_jsonl(std::io::BufWriter::new(f))?;
    }
    if settings.json {
        let v = json!({
            "prompt": out.prompt(),
            "score": out.best.combined_score,
            "align": out.best.align_score,
            "lm_logprob": out.best.lm_logprob_sum,
            "steps": out.steps(),
        });
        println!("{v}");
    } else {
        println!("{}", out.prompt());
    }
    Ok(())
}

pub fn run(command: &Command, settings: &Settings) -> anyhow::Result<()> {
    if settings.dry_run {
        if settings.json {
            println!("{}", serde_json::to_string_pretty(settings)?);
        } else {
            print!("{}", toml::to_string(settings)?);
        }
        return Ok(());
    }
    match command {
        Command::Fuse { prompts } => {
            let fused = tasks::fuse(prompts)?;
            if settings.json {
                println!("{}", json!({ "prompt": fused }));
            } else {
                println!("{fused}");
            }
            Ok(())
        }
        Command::Cache(CacheCommand::Inspect { file }) => {
            let cache = VocabCache::load(file).with_context(|| format!("reading {}", file.display()))?;
            if settings.json {
                println!(
                    "{}",
                    json!({
                        "backend_id": cache.backend_id(),
                        "version": CACHE_VERSION,
                        "vocab_size": cache.len(),
                        "dim": cache.dim(),
                    })
                );
            } else {
                println!("backend_id: {}", cache.backend_id());
                println!("version: {CACHE_VERSION}");
                println!("vocab_size: {}", cache.len());
                println!("dim: {}", cache.dim());
            }
            Ok(())
        }
        Command::Trace(TraceCommand::Replay { file }) => {
            let trace = DecodeTrace::load(file).with_context(|| format!("reading {}", file.display()))?;
            let checked = trace.replay()?;
            if settings.json {
                println!(
                    "{}",
                    json!({
                        "ok": true,
                        "records": trace.records.len(),
                        "hypotheses": checked,
                        "termination": trace.final_reason(),
                    })
                );
            } else {
                println!(
                    "ok: {checked} scores recomputed over {} steps",
                    trace.records.len()
                );
            }
            Ok(())
        }
        _ => run_with_backend(command, settings),
    }
}

fn run_with_backend(command: &Command, settings: &Settings) -> anyhow::Result<()> {
    let backend = open_backend(settings)?;
    let config = settings.decode_config(backend.session.align.logit_scale());
    match command {
        Command::Invert { image } => {
            let out = tasks::invert(&decoder(settings, &backend)?, &read(image)?, &config)?;
            emit_decode(settings, &out)
        }
        Command::Style { images } => {
            let blobs = images.iter().map(|p| read(p)).collect::<anyhow::Result<Vec<_>>>()?;
            let out = tasks::style(&decoder(settings, &backend)?, &blobs, &config)?;
            emit_decode(settings, &out)
        }
        Command::Distill { prompt, max_tokens } => {
            let out = tasks::distill(&decoder(settings, &backend)?, prompt, *max_tokens, &config)?;
            emit_decode(settings, &out)
        }
        Command::Score {
            prompt,
            image,
            generated,
        } => {
            let source = read(image)?;
            let mut report = tasks::align_report(&backend.session, prompt, &source)?;
            report.scaled = report.cosine * config.logit_scale;
            let similarity = match generated {
                Some(p) => Some(tasks::image_similarity(&backend.session, &source, &read(p)?)?),
                None => None,
            };
            if settings.json {
                let mut v = serde_json::to_value(report)?;
                if let Some(s) = similarity {
                    v["image_similarity"] = json!(s);
                }
                println!("{v}");
            } else {
                println!("cosine: {}", report.cosine);
                println!("scaled: {}", report.scaled);
                println!("tokens: {}", report.token_count);
                if let Some(s) = similarity {
                    println!("image_similarity: {s}");
                }
            }
            Ok(())
        }
        Command::Cache(CacheCommand::Build { out }) => {
            let Some(vocab) = &backend.vocab else {
                return Err(Usage("building a cache needs --vocab FILE for this backend".into()).into());
            };
            let cache = VocabCache::build(backend.session.align.as_ref(), &backend.id, vocab)?;
            cache.save(out).with_context(|| format!("writing {}", out.display()))?;
            if settings.json {
                println!(
                    "{}",
                    json!({ "path": out, "vocab_size": cache.len(), "dim": cache.dim(), "backend_id": cache.backend_id() })
                );
            } else {
                println!("wrote {} entries of dim {} to {}", cache.len(), cache.dim(), out.display());
            }
            Ok(())
        }
        Command::Fuse { .. } | Command::Cache(CacheCommand::Inspect { .. }) | Command::Trace(_) => {
            unreachable!("handled without a backend")
        }
    }
}
