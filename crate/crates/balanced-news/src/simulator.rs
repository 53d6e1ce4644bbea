//! Scripted users driving sessions, for regression runs and analysis.
//!
//! A run creates one session, then for each iteration lets the user model
//! look at the configured feed and either click one article or move on.
//! Rows record the realized liberal share of both pages after every step.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use balanced_news_core::feed::slot_bounds;
use balanced_news_core::{FeedPage, Pools, TypeIndex, TypeLabels};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::api::{ClickBody, ConstraintBody, CreateBody, FeedsView, PageView, SessionDescriptor, StepResponse};
use crate::ingestion::{self, synthetic_pools};
use crate::session::{FeedKind, HistoryPoint, SessionConfig, SessionError, SessionState};

const FIG3: &str = include_str!("../scenarios/fig3.toml");
const NO_PREFERENCE: &str = include_str!("../scenarios/no-preference.toml");
/// ChaCha stream for user decisions; page shuffles use the iteration.
const USER_STREAM: u64 = u64::MAX;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Ingest(#[from] ingestion::IngestError),
    #[error("http: {0}")]
    Http(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub preferred_type: String,
    pub click_prob: f64,
    pub preference_strength: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    /// Generated articles per type when no corpus file is given.
    pub synthetic_per_type: Option<usize>,
    pub path: Option<PathBuf>,
    pub bias_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub iterations: u64,
    #[serde(default = "default_click_feed")]
    pub click_feed: FeedKind,
    #[serde(default)]
    pub session: SessionConfig,
    pub user: UserSpec,
    #[serde(default)]
    pub corpus: CorpusSpec,
}

fn default_click_feed() -> FeedKind {
    FeedKind::Balanced
}

impl Scenario {
    pub fn preset(name: &str) -> Option<Self> {
        let text = match name {
            "fig3" => FIG3,
            "no-preference" => NO_PREFERENCE,
            _ => return None,
        };
        Some(toml::from_str(text).expect("checked-in preset parses"))
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["fig3", "no-preference"]
    }

    /// A preset name, or a path to a scenario file.
    pub fn load(name_or_path: &str) -> Result<Self, SimError> {
        if let Some(preset) = Self::preset(name_or_path) {
            return Ok(preset);
        }
        let text = fs::read_to_string(name_or_path).map_err(|e| {
            SimError::InvalidScenario(format!(
                "{name_or_path:?} is neither a preset ({}) nor a readable file: {e}",
                Self::preset_names().join(", ")
            ))
        })?;
        toml::from_str(&text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<UserModel, SimError> {
        let invalid = |msg: String| Err(SimError::InvalidScenario(msg));
        if self.iterations < 1 {
            return invalid("iterations must be at least 1".into());
        }
        self.session
            .validate()
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        // Feasibility of the bounds, including at page granularity.
        let labels = self.session.labels().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        SessionState::create("validate", self.session.clone(), 0, &synthetic_pools(&labels, self.session.page_size))
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        for (name, p) in [
            ("click_prob", self.user.click_prob),
            ("preference_strength", self.user.preference_strength),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let Some(preferred_type) = labels.index_of(&self.user.preferred_type) else {
            return invalid(format!("unknown preferred_type {:?}", self.user.preferred_type));
        };
        Ok(UserModel {
            preferred_type,
            click_prob: self.user.click_prob,
            preference_strength: self.user.preference_strength,
        })
    }

    /// Article pools for this scenario: the configured corpus, or the
    /// synthetic one.
    pub fn pools(&self) -> Result<Pools, SimError> {
        let labels = self.session.labels().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        match (&self.corpus.path, &self.corpus.bias_map) {
            (Some(corpus), Some(map)) => Ok(ingestion::ingest(corpus, map, &labels)?.pools),
            (None, None) => {
                let per_type = self
                    .corpus
                    .synthetic_per_type
                    .unwrap_or(self.session.page_size * (self.iterations as usize + 1));
                Ok(synthetic_pools(&labels, per_type))
            }
            _ => Err(SimError::InvalidScenario("corpus.path and corpus.bias_map go together".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserModel {
    pub preferred_type: TypeIndex,
    /// Probability of clicking anything on a page.
    pub click_prob: f64,
    /// Probability that a click targets the preferred type.
    pub preference_strength: f64,
}

/// Picks the article the user clicks, if any.
///
/// When the page shows both the preferred type and something else, the
/// click goes to a uniformly chosen preferred slot with probability
/// `preference_strength` and to a uniformly chosen other slot otherwise.
/// A page showing a single type gets a uniformly chosen slot.
pub fn sample_click(model: &UserModel, page: &FeedPage, rng: &mut impl Rng) -> Option<String> {
    let slots: Vec<(&str, TypeIndex)> = page.slots.iter().map(|a| (a.id.as_str(), a.type_index)).collect();
    sample_from_slots(model, &slots, rng)
}

fn sample_from_slots(model: &UserModel, slots: &[(&str, TypeIndex)], rng: &mut impl Rng) -> Option<String> {
    if slots.is_empty() || rng.gen::<f64>() >= model.click_prob {
        return None;
    }
    let (preferred, other): (Vec<_>, Vec<_>) = slots.iter().partition(|(_, t)| *t == model.preferred_type);
    let targeted = rng.gen::<f64>() < model.preference_strength;
    let candidates: Vec<&str> = match (preferred.is_empty(), other.is_empty()) {
        (false, false) if targeted => preferred.iter().map(|(id, _)| *id).collect(),
        (false, false) => other.iter().map(|(id, _)| *id).collect(),
        _ => slots.iter().map(|(id, _)| *id).collect(),
    };
    Some(candidates[rng.gen_range(0..candidates.len())].to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub t: u64,
    pub pct_lib_unfiltered: f64,
    pub pct_lib_balanced: f64,
    pub lower: f64,
    pub upper: f64,
    pub clicked_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: u64,
    pub final_pct_lib_unfiltered: f64,
    pub final_pct_lib_balanced: f64,
    /// First iteration at which the balanced page sits on an integer bound.
    pub first_cap_contact: Option<u64>,
    /// First iteration at which the unfiltered page shows a single type.
    pub first_unfiltered_saturation: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<RunRow>,
    pub summary: RunSummary,
}

/// Something that can host one session: the session layer in-process, or
/// the HTTP service.
pub trait SessionDriver {
    fn create(&mut self, config: &SessionConfig, seed: u64) -> Result<(FeedsView, HistoryPoint), SimError>;
    fn click(&mut self, feed: FeedKind, article_id: &str) -> Result<(FeedsView, HistoryPoint), SimError>;
    fn advance(&mut self) -> Result<(FeedsView, HistoryPoint), SimError>;
}

/// Drives [`SessionState`] directly.
pub struct LocalDriver<'a> {
    pools: &'a Pools,
    state: Option<SessionState>,
}

impl<'a> LocalDriver<'a> {
    pub fn new(pools: &'a Pools) -> Self {
        Self { pools, state: None }
    }

    pub fn state(&self) -> Option<&SessionState> {
        self.state.as_ref()
    }

    fn snapshot(&self) -> (FeedsView, HistoryPoint) {
        let state = self.state.as_ref().expect("session created");
        (FeedsView::new(state), *state.history.last().expect("history"))
    }

    fn current(&self) -> Result<&SessionState, SimError> {
        self.state
            .as_ref()
            .ok_or_else(|| SimError::InvalidScenario("session not created".into()))
    }
}

impl SessionDriver for LocalDriver<'_> {
    fn create(&mut self, config: &SessionConfig, seed: u64) -> Result<(FeedsView, HistoryPoint), SimError> {
        self.state = Some(SessionState::create(format!("sim-{seed}"), config.clone(), seed, self.pools)?.state);
        Ok(self.snapshot())
    }

    fn click(&mut self, feed: FeedKind, article_id: &str) -> Result<(FeedsView, HistoryPoint), SimError> {
        let next = self.current()?.apply_click(self.pools, feed, article_id)?.state;
        self.state = Some(next);
        Ok(self.snapshot())
    }

    fn advance(&mut self) -> Result<(FeedsView, HistoryPoint), SimError> {
        let next = self.current()?.advance_without_click(self.pools)?.state;
        self.state = Some(next);
        Ok(self.snapshot())
    }
}

/// Drives a running service over HTTP.
///
/// The service applies its own defaults for page size and learning rates;
/// only the seed and the liberal bounds are sent.
pub struct HttpDriver {
    base: String,
    client: reqwest::blocking::Client,
    session_id: Option<String>,
}

impl HttpDriver {
    pub fn new(base_url: &str) -> Self {
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            client: reqwest::blocking::Client::new(),
            session_id: None,
        }
    }

    fn url(&self, suffix: &str) -> Result<String, SimError> {
        let id = self
            .session_id
            .as_deref()
            .ok_or_else(|| SimError::Http("session not created".into()))?;
        Ok(format!("{}/sessions/{id}/{suffix}", self.base))
    }

    fn send<T: serde::de::DeserializeOwned>(request: reqwest::blocking::RequestBuilder) -> Result<T, SimError> {
        let response = request.send().map_err(|e| SimError::Http(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| SimError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(SimError::Http(format!("{status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| SimError::Http(format!("bad response body: {e}")))
    }

    pub fn set_constraints(&mut self, lower: f64, upper: f64) -> Result<(), SimError> {
        let body = ConstraintBody {
            lower_liberal: lower,
            upper_liberal: upper,
        };
        let _: serde_json::Value = Self::send(self.client.put(self.url("constraints")?).json(&body))?;
        Ok(())
    }
}

impl SessionDriver for HttpDriver {
    fn create(&mut self, config: &SessionConfig, seed: u64) -> Result<(FeedsView, HistoryPoint), SimError> {
        let body = CreateBody {
            seed: Some(seed),
            lower_liberal: Some(config.lower_liberal),
            upper_liberal: Some(config.upper_liberal),
        };
        let created: SessionDescriptor = Self::send(self.client.post(format!("{}/sessions", self.base)).json(&body))?;
        self.session_id = Some(created.session_id);
        let point = *created.history.last().ok_or_else(|| SimError::Http("empty history".into()))?;
        Ok((created.feeds, point))
    }

    fn click(&mut self, feed: FeedKind, article_id: &str) -> Result<(FeedsView, HistoryPoint), SimError> {
        let body = ClickBody {
            feed,
            article_id: article_id.to_string(),
        };
        let step: StepResponse = Self::send(self.client.post(self.url("clicks")?).json(&body))?;
        Ok((step.feeds, step.history_point))
    }

    fn advance(&mut self) -> Result<(FeedsView, HistoryPoint), SimError> {
        let step: StepResponse = Self::send(self.client.post(self.url("advance")?))?;
        Ok((step.feeds, step.history_point))
    }
}

fn page_slots<'p>(page: &'p PageView, labels: &TypeLabels) -> Vec<(&'p str, TypeIndex)> {
    page.slots
        .iter()
        .filter_map(|a| Some((a.id.as_str(), labels.index_of(&a.type_name)?)))
        .collect()
}

/// Runs `scenario` in-process with the given pools.
pub fn run_scenario(scenario: &Scenario, seed: u64, pools: &Pools) -> Result<RunResult, SimError> {
    run_with(scenario, seed, &mut LocalDriver::new(pools))
}

/// Runs `scenario` against any driver. Invalid scenarios fail before the
/// session is created.
pub fn run_with(scenario: &Scenario, seed: u64, driver: &mut impl SessionDriver) -> Result<RunResult, SimError> {
    let model = scenario.validate()?;
    let labels = scenario.session.labels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(USER_STREAM);

    let (mut feeds, point) = driver.create(&scenario.session, seed)?;
    let mut rows = vec![row(&point, None)];
    for _ in 0..scenario.iterations {
        let page = feeds.get(scenario.click_feed);
        let slots = page_slots(page, &labels);
        let choice = sample_from_slots(&model, &slots, &mut rng);
        let (next, point, clicked) = match choice {
            Some(id) => {
                let clicked = page
                    .slots
                    .iter()
                    .find(|a| a.id == id)
                    .map(|a| a.type_name.clone());
                let (next, point) = driver.click(scenario.click_feed, &id)?;
                (next, point, clicked)
            }
            None => {
                let (next, point) = driver.advance()?;
                (next, point, None)
            }
        };
        rows.push(row(&point, clicked));
        feeds = next;
    }
    let summary = summarize(&rows, scenario.session.page_size);
    Ok(RunResult {
        scenario: scenario.name.clone(),
        seed,
        rows,
        summary,
    })
}

fn row(point: &HistoryPoint, clicked_type: Option<String>) -> RunRow {
    RunRow {
        t: point.t,
        pct_lib_unfiltered: point.pct_liberal_unfiltered,
        pct_lib_balanced: point.pct_liberal_balanced,
        lower: point.lower_liberal,
        upper: point.upper_liberal,
        clicked_type,
    }
}

fn summarize(rows: &[RunRow], page_size: usize) -> RunSummary {
    let last = rows.last().expect("at least the initial row");
    let k = page_size as f64;
    let first_cap_contact = rows
        .iter()
        .find(|r| {
            let cfg = balanced_news_core::ConstraintConfig::two_type(r.lower, r.upper).expect("row bounds are feasible");
            let (lo, hi) = slot_bounds(&cfg, page_size)[0];
            let count = (r.pct_lib_balanced * k).round() as usize;
            count == lo || count == hi
        })
        .map(|r| r.t);
    let first_unfiltered_saturation = rows
        .iter()
        .find(|r| r.pct_lib_unfiltered == 0.0 || r.pct_lib_unfiltered == 1.0)
        .map(|r| r.t);
    RunSummary {
        iterations: rows.len() as u64 - 1,
        final_pct_lib_unfiltered: last.pct_lib_unfiltered,
        final_pct_lib_balanced: last.pct_lib_balanced,
        first_cap_contact,
        first_unfiltered_saturation,
    }
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<u64>| v.map_or_else(|| "none".to_string(), |t| t.to_string());
        write!(
            f,
            "iterations={} final_pct_lib_unfiltered={} final_pct_lib_balanced={} first_cap_contact={} first_unfiltered_saturation={}",
            self.iterations,
            self.final_pct_lib_unfiltered,
            self.final_pct_lib_balanced,
            opt(self.first_cap_contact),
            opt(self.first_unfiltered_saturation)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

/// Writes the rows to `path`. The file appears atomically: on failure
/// nothing is left behind.
pub fn emit(result: &RunResult, path: &Path, format: OutputFormat) -> Result<(), SimError> {
    let write_err = |source: std::io::Error| SimError::Write {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(write_err)?;
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(&mut tmp);
            for row in &result.rows {
                writer.serialize(row).map_err(|e| write_err(e.into()))?;
            }
            writer.flush().map_err(write_err)?;
        }
        OutputFormat::Jsonl => {
            for row in &result.rows {
                let line = serde_json::to_string(row).map_err(|e| write_err(e.into()))?;
                writeln!(tmp, "{line}").map_err(write_err)?;
            }
        }
    }
    tmp.persist(path).map_err(|e| write_err(e.error))?;
    Ok(())
}
