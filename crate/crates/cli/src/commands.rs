use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ctgs_core::catalog::vocabulary_checksum;
use ctgs_core::corpus::{build_vocabulary, encode, split_corpus, tokenize_words, verify_lipogram};
use ctgs_core::eval::{constraint_error_rate, run_experiment, ExperimentConfig, ModelCell, DEFAULT_GENERATION_LENGTH};
use ctgs_core::filter::preset;
use ctgs_core::letters::LetterSet;
use ctgs_core::lm::train_ngram;
use ctgs_core::{CompositeFilter, DecodeError, Session64, SharedModel64, TokenCatalog, TokenId};
use ctgs_service::{AppState, ModelRegistry};

use crate::config::{FileConfig, DEFAULT_LENGTH};
use crate::error::CliError;
use crate::resources::{io_error, load_model, read_corpus, train_on_text, ModelSource, Resources, BUNDLED_LIPOGRAM};

/// Writes to `--out` when given, stdout otherwise.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(io_error(p)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(io_error(Path::new("<stdout>")))
        }
    }
}

fn open_model(cfg: &FileConfig, res: &Resources) -> Result<(Arc<TokenCatalog>, SharedModel64), CliError> {
    load_model(&ModelSource::parse(cfg.model.as_deref()), cfg.vocab.as_deref(), res)
}

fn open_session(cfg: &FileConfig, res: &Resources) -> Result<Session64, CliError> {
    let specs = cfg.specs()?;
    let sampling = cfg.sampling()?;
    let (catalog, model) = open_model(cfg, res)?;
    Ok(Session64::new(catalog, model, specs, sampling, cfg.seed())?)
}

pub fn train(corpus: &Path, order: usize, k: f64, cfg: &FileConfig, res: &Resources) -> Result<u8, CliError> {
    let text = read_corpus(corpus)?;
    let t = train_on_text(&text, order, k, res)?;
    let json = t.model.to_json(&t.tokens, &[ctgs_core::catalog::UNKNOWN_TOKEN.to_string()])?;
    emit(cfg.out.as_deref(), &json)?;
    log::info!("trained order-{order} model over {} tokens", t.catalog.size());
    Ok(0)
}

pub fn generate(cfg: &FileConfig, res: &Resources) -> Result<u8, CliError> {
    let mut session = open_session(cfg, res)?;
    let n = cfg.n.unwrap_or(DEFAULT_LENGTH);
    match session.generate(n, cfg.backtrack.unwrap_or(0)) {
        Ok(_) => {
            emit(cfg.out.as_deref(), &format!("{}\n", session.text()))?;
            Ok(0)
        }
        Err(DecodeError::DeadEnd(report)) => {
            let partial = session.catalog().render(&report.partial);
            Err(CliError::Domain(format!("{report}\npartial output: {partial}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn show_menu(session: &Session64, m: usize, err: &mut impl Write) -> std::io::Result<Vec<TokenId>> {
    writeln!(err, "\n{}", session.text())?;
    match session.list_continuations(m) {
        Ok(list) => {
            let catalog = session.catalog();
            writeln!(err, "{} tokens allowed", list.allowed_count)?;
            for (i, (id, p)) in list.entries.iter().enumerate() {
                let f = catalog.features(*id);
                let syl = f.syllables.map_or_else(|| "?".to_string(), |s| s.to_string());
                let rhyme = f.rhyme_key.as_ref().map_or_else(|| "-".to_string(), |r| r.to_string());
                writeln!(err, "{:>3}. {:<18} {:.4}  syl={syl} rhyme={rhyme}", i + 1, f.surface, p)?;
            }
            Ok(list.entries.iter().map(|(id, _)| *id).collect())
        }
        Err(e) => {
            writeln!(err, "{e}")?;
            Ok(Vec::new())
        }
    }
}

/// Interactive completion. Commands: a menu number or a word accepts it,
/// `!word` forces a word past the filters, `u [N]` undoes, `g N` generates,
/// `q` quits. The final text goes to `--out` or stdout.
pub fn complete(cfg: &FileConfig, res: &Resources, m: usize, input: impl BufRead) -> Result<u8, CliError> {
    if m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let mut session = open_session(cfg, res)?;
    let mut err = std::io::stderr().lock();
    let io = |e| CliError::Io { path: PathBuf::from("<stderr>"), source: e };
    let mut menu = show_menu(&session, m, &mut err).map_err(io)?;
    for line in input.lines() {
        let line = line.map_err(|e| CliError::Io { path: PathBuf::from("<stdin>"), source: e })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "q" {
            break;
        }
        let outcome = interpret(&mut session, &menu, line, cfg);
        if let Err(e) = outcome {
            writeln!(err, "error: {e}").map_err(io)?;
        }
        menu = show_menu(&session, m, &mut err).map_err(io)?;
    }
    emit(cfg.out.as_deref(), &format!("{}\n", session.text()))?;
    Ok(0)
}

fn interpret(session: &mut Session64, menu: &[TokenId], line: &str, cfg: &FileConfig) -> Result<(), CliError> {
    let count = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("not a count: {s:?}")));
    if line == "u" {
        return Ok(session.undo(1)?);
    }
    if let Some(n) = line.strip_prefix("u ") {
        return Ok(session.undo(count(n)?)?);
    }
    if let Some(n) = line.strip_prefix("g ") {
        return session.generate(count(n)?, cfg.backtrack.unwrap_or(0)).map(drop).map_err(Into::into);
    }
    if let Ok(k) = line.parse::<usize>() {
        let id = k
            .checked_sub(1)
            .and_then(|i| menu.get(i))
            .ok_or_else(|| CliError::Usage(format!("no menu entry {k}")))?;
        return Ok(session.accept_token(*id, false)?);
    }
    let (word, forced) = match line.strip_prefix('!') {
        Some(w) => (w, true),
        None => (line, false),
    };
    let id = session
        .catalog()
        .id_of(word)
        .ok_or_else(|| CliError::Usage(format!("{word:?} is not in the vocabulary")))?;
    Ok(session.accept_token(id, forced)?)
}

pub fn analyze(words: &[String], res: &Resources) -> Result<u8, CliError> {
    let mut out = String::new();
    for (i, word) in words.iter().enumerate() {
        let catalog = res.catalog(std::slice::from_ref(word), &[])?;
        let f = catalog.features(TokenId(0));
        let dash = || "-".to_string();
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("word={}\n", f.surface));
        out.push_str(&format!("pronunciations={}\n", f.pronunciations.len()));
        out.push_str(&format!("syllables={}\n", f.syllables.map_or_else(dash, |s| s.to_string())));
        out.push_str(&format!("stress={}\n", f.stress_pattern.clone().unwrap_or_else(dash)));
        out.push_str(&format!("rhyme_key={}\n", f.rhyme_key.as_ref().map_or_else(dash, |r| r.to_string())));
        out.push_str(&format!("metaphone={}\n", f.metaphone.as_ref().map_or_else(dash, |m| m.to_string())));
    }
    emit(None, &out)?;
    Ok(0)
}

/// 1-based line and column (in characters) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

pub fn verify(ban: &str, files: &[PathBuf]) -> Result<u8, CliError> {
    let banned: LetterSet = ban.parse().map_err(|e| CliError::Usage(format!("--ban {ban:?}: {e}")))?;
    if banned.is_empty() {
        return Err(CliError::Usage("--ban needs at least one letter".into()));
    }
    let mut out = String::new();
    let mut total = 0;
    for path in files {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        for v in verify_lipogram(&text, banned) {
            let (line, col) = line_col(&text, v.offset);
            out.push_str(&format!("{}:{line}:{col}: {} contains '{}'\n", path.display(), v.word, v.letter));
            total += 1;
        }
    }
    out.push_str(&format!("{total} violation{}\n", if total == 1 { "" } else { "s" }));
    emit(None, &out)?;
    Ok(if total == 0 { 0 } else { 1 })
}

pub struct EvalArgs {
    pub corpus: Option<PathBuf>,
    pub extra: Vec<PathBuf>,
    pub orders: Vec<usize>,
    pub k: f64,
    pub ratio: f64,
    pub length: Option<usize>,
}

/// Splits the constrained corpus, trains one model per order on the extra
/// corpora plus the training split, and reports every cell as TSV.
pub fn eval(args: &EvalArgs, cfg: &FileConfig, res: &Resources) -> Result<u8, CliError> {
    if args.orders.is_empty() {
        return Err(CliError::Usage("--orders needs at least one order".into()));
    }
    let constraint = if cfg.has_constraint() { cfg.specs()? } else { preset("lipogram-e")? };
    let text = match &args.corpus {
        Some(p) => read_corpus(p)?,
        None => BUNDLED_LIPOGRAM.to_string(),
    };
    let words = tokenize_words(&text);
    let split = split_corpus(&words, args.ratio, cfg.seed())?;
    let mut train_words = Vec::new();
    for p in &args.extra {
        train_words.extend(tokenize_words(&read_corpus(p)?));
    }
    let extra_len = train_words.len();
    train_words.extend(split.train.iter().cloned());

    let mut all_words = train_words.clone();
    all_words.extend(split.test.iter().cloned());
    let tokens = build_vocabulary(&all_words);
    let catalog = Arc::new(res.catalog(&tokens, &[ctgs_core::catalog::UNKNOWN_TOKEN.to_string()])?);
    let train_ids = encode(&train_words, &catalog)?;
    let test = encode(&split.test, &catalog)?;

    let filter = CompositeFilter::compose(&constraint, &catalog)?;
    if constraint_error_rate(&test, &filter, &catalog) > 0.0 {
        let bad = test
            .iter()
            .enumerate()
            .find(|(i, &id)| !filter.passes(catalog.features(id), &filter.context_for(&catalog, &test[..*i])))
            .map(|(i, &id)| format!("{} at test position {i}", catalog.surface(id)))
            .unwrap_or_default();
        return Err(CliError::Domain(format!(
            "test split violates the constraint ({}): {bad}",
            filter.describe()
        )));
    }

    let mut models = Vec::new();
    for &order in &args.orders {
        let model = train_ngram(&train_ids, order, args.k, catalog.size(), catalog.checksum())?;
        models.push(ModelCell { label: format!("ngram{order}"), model: Arc::new(model) as SharedModel64 });
    }
    let config = ExperimentConfig {
        catalog: Arc::clone(&catalog),
        models,
        constraint,
        test,
        generation_length: args.length.or(cfg.n).unwrap_or(DEFAULT_GENERATION_LENGTH),
        sampling: cfg.sampling()?,
        seed: cfg.seed(),
        corpus_checksum: vocabulary_checksum(&all_words),
    };
    let mut report = run_experiment(&config)?;
    report.metadata.push(("extra_training_tokens".into(), extra_len.to_string()));
    report.metadata.push(("split_ratio".into(), args.ratio.to_string()));
    emit(cfg.out.as_deref(), &report.to_tsv())?;
    Ok(0)
}

pub fn serve(addr: &str, cfg: &FileConfig, res: &Resources) -> Result<u8, CliError> {
    let source = ModelSource::parse(cfg.model.as_deref());
    let (catalog, model) = load_model(&source, cfg.vocab.as_deref(), res)?;
    let mut registry = ModelRegistry::new();
    registry.register(source.label(), catalog, model);
    let state = AppState::new(registry);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Domain(format!("runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Usage(format!("--addr {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Domain(e.to_string()))?;
        eprintln!("listening on http://{local}/v1");
        ctgs_service::serve(listener, state).await.map_err(|e| CliError::Domain(format!("server: {e}")))
    })?;
    Ok(0)
}
