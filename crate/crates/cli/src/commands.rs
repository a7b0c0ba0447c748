//! Command implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use log::{info, warn};
use votecast::evaluate::{cell_seed, run_grid, Forecaster, GridConfig, ModelKind};
use votecast::ingest::{
    assemble_dataset, parse_interactions, parse_polls, FeatureSet, IngestError, InteractionTable, PollBook, SubjectId,
    UNDECIDED,
};
use votecast::scenario::{redistribute_undecided, round_half_up, summarize, ScenarioConfig, ScenarioError, ShareVector};
use votecast::series::{decompose, interpolate_daily, DayIndex};
use votecast::synth;

use crate::config::{RunConfig, Settings};
use crate::{Cli, Command};

/// Why a command failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let invalid_input = e.chain().any(|c| {
            c.is::<IngestError>()
                || c.is::<serde_json::Error>()
                || matches!(c.downcast_ref::<ScenarioError>(), Some(ScenarioError::Config(_)))
        });
        if invalid_input {
            Failure::Validation(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn invalid(e: anyhow::Error) -> Failure {
    Failure::Validation(e)
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let file = match &cli.common.config {
        Some(path) => RunConfig::load(path).map_err(invalid)?,
        None => RunConfig::default(),
    };
    let settings = Settings::resolve(file.overlay(cli.common.overrides())).map_err(invalid)?;
    let out = Output {
        dir: settings.output_dir.clone(),
        deterministic: cli.common.deterministic,
    };
    match &cli.command {
        Command::Synth { days, cadence } => synth_cmd(&settings, &out, *days, *cadence),
        Command::Validate => validate(&settings),
        Command::Grid => grid(&settings, &out),
        Command::Forecast {
            window,
            feature_set,
            model,
        } => forecast(&settings, &out, *window, feature_set.as_deref(), model.as_deref()),
        Command::Redistribute { shares } => redistribute(&out, shares),
        Command::Scenario {
            scenario_config,
            builtin,
        } => scenario(&out, scenario_config, *builtin),
        Command::Decompose { subject, period } => decompose_cmd(&settings, &out, subject, *period),
    }
}

struct Output {
    dir: PathBuf,
    deterministic: bool,
}

impl Output {
    /// Creates `name` in the output directory. Report files start with a
    /// `# generated-at` line unless running deterministically.
    fn create(&self, name: &str, report: bool) -> anyhow::Result<(PathBuf, BufWriter<File>)> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        if report && !self.deterministic {
            writeln!(w, "# generated-at {}", chrono::Utc::now().to_rfc3339())?;
        }
        Ok((path, w))
    }

    fn finish(path: PathBuf, mut w: BufWriter<File>) -> anyhow::Result<()> {
        w.flush()?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn file_stem(subject: &SubjectId) -> String {
    subject
        .as_str()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn load_inputs(settings: &Settings) -> anyhow::Result<(InteractionTable, PollBook)> {
    let table = parse_interactions(settings.interactions_path()?).context("interactions")?;
    let polls = parse_polls(settings.polls_path()?).context("polls")?;
    Ok((table, polls))
}

/// Configured subjects, or every polled subject that also has interactions.
fn subjects(settings: &Settings, table: &InteractionTable, polls: &PollBook) -> anyhow::Result<Vec<SubjectId>> {
    let list: Vec<SubjectId> = match &settings.subjects {
        Some(s) => s.clone(),
        None => polls.subjects().filter(|s| table.contains(s)).cloned().collect(),
    };
    if list.is_empty() {
        bail!("no subject has both interactions and polls");
    }
    for s in &list {
        if !table.contains(s) || polls.get(s).is_none() {
            return Err(IngestError::UnknownSubject(s.to_string())).context("field `subjects`");
        }
    }
    Ok(list)
}

fn warn_unusual_orders(settings: &Settings) {
    for order in settings.arimax_orders() {
        if order.is_unusual() {
            warn!(
                "ARIMAX differencing order d = {} is unusually high; orders above 2 rarely suit real series",
                order.d
            );
        }
    }
}

fn synth_cmd(settings: &Settings, out: &Output, days: usize, cadence: usize) -> Result<(), Failure> {
    let run = || -> anyhow::Result<()> {
        let start: DayIndex = synth::BENCHMARK_START.parse().map_err(|e| anyhow!("{e}"))?;
        let table = synth::gen_interactions(&synth::benchmark_targets(), start, days, settings.seed)?;
        let mut book: Option<PollBook> = None;
        for (subject, link) in synth::benchmark_links() {
            let b = synth::gen_polls(&link, &table, &subject, cadence, settings.seed)?;
            book = Some(match book {
                None => b,
                Some(prev) => prev.merge(b)?,
            });
        }
        let (path, mut w) = out.create("interactions.csv", false)?;
        table.write_csv(&mut w)?;
        Output::finish(path, w)?;
        let (path, mut w) = out.create("polls.csv", false)?;
        book.expect("benchmark has subjects").write_csv(&mut w)?;
        Output::finish(path, w)
    };
    run().map_err(Failure::Runtime)
}

fn validate(settings: &Settings) -> Result<(), Failure> {
    if settings.interactions.is_none() && settings.polls.is_none() {
        return Err(invalid(anyhow!("give --interactions and/or --polls to validate")));
    }
    if settings.interactions.is_some() {
        let path = settings.interactions_path().map_err(invalid)?;
        let table = parse_interactions(path)
            .with_context(|| path.display().to_string())
            .map_err(invalid)?;
        let (start, end) = table.coverage();
        println!(
            "{}: ok, {} subjects, {} days ({start} to {end})",
            path.display(),
            table.subjects().count(),
            table.days()
        );
    }
    if settings.polls.is_some() {
        let path = settings.polls_path().map_err(invalid)?;
        let polls = parse_polls(path)
            .with_context(|| path.display().to_string())
            .map_err(invalid)?;
        let points: usize = polls.subjects().filter_map(|s| polls.get(s)).map(|o| o.len()).sum();
        println!(
            "{}: ok, {} subjects, {} observations{}",
            path.display(),
            polls.subjects().count(),
            points,
            if polls.undecided().is_some() { ", undecided series present" } else { "" }
        );
    }
    Ok(())
}

fn grid(settings: &Settings, out: &Output) -> Result<(), Failure> {
    let (table, polls) = load_inputs(settings)?;
    let list = subjects(settings, &table, &polls)?;
    warn_unusual_orders(settings);
    let config = GridConfig {
        windows: settings.windows.clone(),
        feature_sets: settings.feature_sets.clone(),
        models: settings.models.clone(),
        anchors: settings.anchors,
        walk_forward: settings.walk_forward,
        seed: settings.seed,
    };
    for subject in list {
        info!("evaluating {subject}");
        let result = run_grid(&table, &polls, &subject, &config).with_context(|| format!("grid for {subject}"))?;
        for f in &result.failures {
            warn!(
                "{subject}: skipped {}/w={}/{}: {}",
                f.feature_set, f.window, f.model, f.reason
            );
        }
        let (path, mut w) = out.create(&format!("grid_{}.csv", file_stem(&subject)), true)?;
        result.write_csv(&mut w).map_err(anyhow::Error::from)?;
        Output::finish(path, w)?;
    }
    Ok(())
}

fn forecast(
    settings: &Settings,
    out: &Output,
    window: Option<usize>,
    feature_set: Option<&str>,
    model: Option<&str>,
) -> Result<(), Failure> {
    let (table, polls) = load_inputs(settings)?;
    let list = subjects(settings, &table, &polls)?;
    let window = window.unwrap_or(settings.windows[0]);
    if window == 0 {
        return Err(invalid(anyhow!("--window must be positive")));
    }
    let fs: FeatureSet = match feature_set {
        Some(s) => s.parse().map_err(|e| invalid(anyhow!("--feature-set: {e}")))?,
        None => settings.feature_sets[0],
    };
    let spec = match model {
        Some(m) => {
            let kind: ModelKind = m.parse().map_err(|e| invalid(anyhow!("--model: {e}")))?;
            *settings
                .models
                .iter()
                .find(|s| s.kind() == kind)
                .ok_or_else(|| invalid(anyhow!("--model {m}: not among configured models")))?
        }
        // the model the evaluation favours, when configured
        None => *settings
            .models
            .iter()
            .find(|s| s.kind() == ModelKind::Arimax)
            .unwrap_or(&settings.models[0]),
    };
    if let votecast::evaluate::ModelSpec::Arimax { order, .. } = spec {
        if order.is_unusual() {
            warn!("ARIMAX differencing order d = {} is unusually high", order.d);
        }
    }

    let (path, mut w) = out.create("forecast.csv", true)?;
    writeln!(w, "subject,anchor,share_pct").map_err(anyhow::Error::from)?;
    let mut last_anchor: Option<DayIndex> = None;
    for subject in &list {
        let ds = assemble_dataset(&table, &polls, subject, fs, window, settings.anchors).map_err(|e| invalid(e.into()))?;
        let rows = ds.rows();
        let model = spec.with_seed(cell_seed(settings.seed, fs, window, spec.kind()));
        let n = rows.len();
        if n < model.min_train_rows(ds.feature_names().len()) + 1 {
            return Err(Failure::Runtime(anyhow!(
                "{subject}: {n} rows are too few to fit {}",
                spec.kind()
            )));
        }
        let predicted = model
            .fit_predict(&rows[..n - 1], &rows[n - 1..])
            .with_context(|| format!("forecast for {subject}"))?;
        let anchor = rows[n - 1].anchor;
        last_anchor = Some(last_anchor.map_or(anchor, |a| a.max(anchor)));
        writeln!(w, "{subject},{anchor},{:.2}", predicted.clamp(0.0, 100.0)).map_err(anyhow::Error::from)?;
    }
    if let (Some(undecided), Some(anchor)) = (polls.undecided(), last_anchor) {
        if let Some(u) = undecided.interpolate_at(anchor) {
            writeln!(w, "{UNDECIDED},{anchor},{u:.2}").map_err(anyhow::Error::from)?;
        }
    }
    Output::finish(path, w)?;
    Ok(())
}

/// Reads `subject` and `share_pct` columns; the undecided marker row (or a
/// subject named `undecided`) fills the undecided share.
fn read_shares(path: &Path) -> anyhow::Result<ShareVector> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = reader.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ScenarioError::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let (si, vi) = (col("subject")?, col("share_pct")?);
    let mut shares = Vec::new();
    let mut undecided = 0.0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let name = rec.get(si).unwrap_or_default();
        let value: f64 = rec
            .get(vi)
            .unwrap_or_default()
            .parse()
            .map_err(|e| ScenarioError::Config(format!("line {line}: share_pct: {e}")))?;
        if name == UNDECIDED || name.eq_ignore_ascii_case("undecided") {
            undecided += value;
        } else {
            let id = SubjectId::new(name).map_err(|e| ScenarioError::Config(format!("line {line}: {e}")))?;
            shares.push((id, value));
        }
    }
    Ok(ShareVector::new(shares, undecided)?)
}

fn redistribute(out: &Output, shares: &Path) -> Result<(), Failure> {
    let base = read_shares(shares).map_err(invalid)?;
    let result = redistribute_undecided(&base).map_err(|e| Failure::Runtime(e.into()))?;
    let (path, mut w) = out.create("redistributed.csv", true)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "subject,share_before_pct,share_after_pct")?;
        for ((s, before), (_, after)) in base.shares().iter().zip(result.shares()) {
            writeln!(w, "{s},{:.1},{:.1}", round_half_up(*before, 1), round_half_up(*after, 1))?;
        }
        Ok(())
    };
    write().map_err(anyhow::Error::from)?;
    Output::finish(path, w)?;
    Ok(())
}

fn scenario(out: &Output, config_path: &Path, builtin: bool) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))
        .map_err(Failure::Runtime)?;
    let mut config: ScenarioConfig = serde_json::from_str(&text)
        .with_context(|| config_path.display().to_string())
        .map_err(invalid)?;
    if builtin {
        config.builtin = true;
        config.rules.clear();
    }
    let results = config.run().map_err(|e| {
        let e = anyhow::Error::from(e);
        Failure::Validation(e)
    })?;
    let (path, mut w) = out.create("scenario.csv", true)?;
    votecast::scenario::write_results_csv(&results, &mut w).map_err(anyhow::Error::from)?;
    Output::finish(path, w)?;

    let summary = summarize(&results).map_err(|e| Failure::Runtime(e.into()))?;
    let (path, mut w) = out.create("scenario_summary.csv", true)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "subject,min_pct,max_pct,mean_pct")?;
        for s in &summary {
            writeln!(
                w,
                "{},{:.1},{:.1},{:.1}",
                s.subject,
                round_half_up(s.min, 1),
                round_half_up(s.max, 1),
                round_half_up(s.mean, 1)
            )?;
        }
        Ok(())
    };
    write().map_err(anyhow::Error::from)?;
    Output::finish(path, w)?;
    Ok(())
}

fn decompose_cmd(settings: &Settings, out: &Output, subject: &str, period: usize) -> Result<(), Failure> {
    let polls = parse_polls(settings.polls_path().map_err(invalid)?).context("polls")?;
    let id = SubjectId::new(subject).context("--subject")?;
    let obs = polls
        .get(&id)
        .ok_or_else(|| IngestError::UnknownSubject(id.to_string()))
        .context("--subject")?;
    let daily = interpolate_daily(obs).map_err(|e| Failure::Runtime(e.into()))?;
    let parts = decompose(&daily, period).map_err(|e| Failure::Runtime(e.into()))?;
    let (path, mut w) = out.create(&format!("decompose_{}.csv", file_stem(&id)), true)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "date,observed,trend,seasonal,residual")?;
        for i in 0..parts.len() {
            writeln!(
                w,
                "{},{:.6},{},{:.6},{}",
                parts.start.offset(i as i64),
                parts.observed[i],
                opt(parts.trend[i]),
                parts.seasonal[i],
                opt(parts.residual[i])
            )?;
        }
        Ok(())
    };
    write().map_err(anyhow::Error::from)?;
    Output::finish(path, w)?;
    Ok(())
}
