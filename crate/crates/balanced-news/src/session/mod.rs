//! One user's interactive loop over two feeds.
//!
//! A session owns two independent learners fed the same click stream: the
//! unfiltered learner samples from its base distribution, the balanced
//! learner from that distribution projected onto the user's constraints.
//! Every mutation is computed on a copy and returned as a [`Transition`]
//! carrying the new state and the events that describe it; callers persist
//! the events before adopting the state.

mod log;

pub use log::{replay, EventPayload, EventSink, FileEventLog, MemoryEventLog, SessionEvent};

use std::fmt;

use balanced_news_core::{
    allocate_slots, compose_page, project_to_constraints, resolve_click, BanditParams, BanditState,
    ConstraintConfig, Error as CoreError, FeedPage, Pools, SeenSet, TypeIndex, TypeLabels,
};
use serde::{Deserialize, Serialize};

pub const LIBERAL: &str = "liberal";

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("click on unknown article {0:?}")]
    UnknownArticle(String),
    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),
    #[error("{0}")]
    PoolExhausted(CoreError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("event log corrupt at sequence {seq}: {reason}")]
    CorruptLog { seq: u64, reason: String },
    #[error("event log line {line} unreadable: {reason}")]
    MalformedLog { line: u64, reason: String },
    #[error("event log write failed: {0}")]
    Persist(#[from] std::io::Error),
    #[error(transparent)]
    Core(CoreError),
}

impl From<CoreError> for SessionError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::UnknownArticle(id) => Self::UnknownArticle(id),
            CoreError::EmptyPolytope | CoreError::UnsatisfiableAtPageSize { .. } => {
                Self::InfeasibleConstraints(err.to_string())
            }
            CoreError::PoolExhausted { .. } => Self::PoolExhausted(err),
            other => Self::Core(other),
        }
    }
}

/// Defaults bundle for new sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub page_size: usize,
    pub eta: f64,
    pub gamma: f64,
    pub lower_liberal: f64,
    pub upper_liberal: f64,
    /// Type order; must name exactly two types, one of them `liberal`.
    pub type_order: Vec<String>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let params = BanditParams::default();
        Self {
            page_size: 10,
            eta: params.eta,
            gamma: params.gamma,
            lower_liberal: 0.2,
            upper_liberal: 0.8,
            type_order: TypeLabels::liberal_conservative().names().to_vec(),
        }
    }
}

impl SessionConfig {
    pub fn labels(&self) -> Result<TypeLabels, SessionError> {
        let labels = TypeLabels::new(self.type_order.clone())
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        if labels.len() != 2 || labels.index_of(LIBERAL).is_none() {
            return Err(SessionError::InvalidConfig(format!(
                "type_order must be two types including {LIBERAL:?}, got {:?}",
                self.type_order
            )));
        }
        Ok(labels)
    }

    pub fn params(&self) -> BanditParams {
        BanditParams {
            eta: self.eta,
            gamma: self.gamma,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        self.labels()?;
        if self.page_size == 0 {
            return Err(SessionError::InvalidConfig("page_size must be positive".into()));
        }
        self.params()
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedKind {
    Unfiltered,
    Balanced,
}

impl fmt::Display for FeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unfiltered => "unfiltered",
            Self::Balanced => "balanced",
        })
    }
}

/// One dashboard sample: realized liberal share of each page and the
/// liberal bounds in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub t: u64,
    pub pct_liberal_unfiltered: f64,
    pub pct_liberal_balanced: f64,
    pub lower_liberal: f64,
    pub upper_liberal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pages {
    pub unfiltered: FeedPage,
    pub balanced: FeedPage,
}

impl Pages {
    pub fn get(&self, feed: FeedKind) -> &FeedPage {
        match feed {
            FeedKind::Unfiltered => &self.unfiltered,
            FeedKind::Balanced => &self.balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub config: SessionConfig,
    pub labels: TypeLabels,
    pub seed: u64,
    pub unfiltered: BanditState,
    pub balanced: BanditState,
    pub lower_liberal: f64,
    pub upper_liberal: f64,
    pub constraints: ConstraintConfig,
    pub seen_unfiltered: SeenSet,
    pub seen_balanced: SeenSet,
    pub history: Vec<HistoryPoint>,
    pub pages: Pages,
    /// Sequence number the next logged event will carry.
    pub next_seq: u64,
}

/// A computed but not yet committed mutation.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: SessionState,
    pub events: Vec<SessionEvent>,
}

/// Liberal bounds to a two-type constraint config in `labels` order.
fn constraints_for(labels: &TypeLabels, lower: f64, upper: f64) -> Result<ConstraintConfig, SessionError> {
    if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower > upper {
        return Err(SessionError::InfeasibleConstraints(format!(
            "need 0 <= lower <= upper <= 1, got lower={lower} upper={upper}"
        )));
    }
    let liberal = labels.index_of(LIBERAL).expect("validated labels").get();
    let mut lo = vec![1.0 - upper; 2];
    let mut hi = vec![1.0 - lower; 2];
    lo[liberal] = lower;
    hi[liberal] = upper;
    Ok(ConstraintConfig::new(lo, hi)?)
}

impl SessionState {
    /// Fresh learners, first pages for both feeds, history point 0.
    pub fn create(session_id: impl Into<String>, config: SessionConfig, seed: u64, pools: &Pools) -> Result<Transition, SessionError> {
        config.validate()?;
        let labels = config.labels()?;
        if pools.num_types() != labels.len() {
            return Err(SessionError::InvalidConfig(format!(
                "pools hold {} types, configuration names {}",
                pools.num_types(),
                labels.len()
            )));
        }
        let constraints = constraints_for(&labels, config.lower_liberal, config.upper_liberal)?;
        let learner = BanditState::init(labels.len(), config.params())?;
        let empty_page = FeedPage {
            iteration: 0,
            slots: Vec::new(),
            allocation: balanced_news_core::SlotAllocation {
                counts: vec![0; labels.len()],
                page_size: config.page_size,
            },
            sampling_dist: balanced_news_core::Distribution::uniform(labels.len()),
        };
        let mut state = SessionState {
            session_id: session_id.into(),
            lower_liberal: config.lower_liberal,
            upper_liberal: config.upper_liberal,
            config: config.clone(),
            labels,
            seed,
            unfiltered: learner.clone(),
            balanced: learner,
            constraints,
            seen_unfiltered: SeenSet::new(),
            seen_balanced: SeenSet::new(),
            history: Vec::new(),
            pages: Pages {
                unfiltered: empty_page.clone(),
                balanced: empty_page,
            },
            next_seq: 0,
        };
        let mut events = vec![state.event(EventPayload::Created { config, seed })];
        state.serve(FeedKind::Unfiltered, pools, &mut events)?;
        state.serve(FeedKind::Balanced, pools, &mut events)?;
        state.record_history();
        Ok(Transition { state, events })
    }

    /// Rewards the clicked article's type in both learners, each weighted
    /// by its own page's sampling distribution, then serves new pages.
    pub fn apply_click(&self, pools: &Pools, feed: FeedKind, article_id: &str) -> Result<Transition, SessionError> {
        let signal = resolve_click(self.pages.get(feed), article_id)?;
        let mut state = self.clone();
        let mut events = vec![state.event(EventPayload::Click {
            feed,
            article_id: article_id.to_string(),
        })];
        state.unfiltered = learn(&self.unfiltered, &self.pages.unfiltered, signal.clicked_type, signal)?;
        state.balanced = learn(&self.balanced, &self.pages.balanced, signal.clicked_type, signal)?;
        state.serve(FeedKind::Unfiltered, pools, &mut events)?;
        state.serve(FeedKind::Balanced, pools, &mut events)?;
        state.record_history();
        Ok(Transition { state, events })
    }

    /// An iteration in which the user clicked nothing.
    pub fn advance_without_click(&self, pools: &Pools) -> Result<Transition, SessionError> {
        let mut state = self.clone();
        let mut events = vec![state.event(EventPayload::NoClickAdvance)];
        state.unfiltered = self.unfiltered.no_click_step();
        state.balanced = self.balanced.no_click_step();
        state.serve(FeedKind::Unfiltered, pools, &mut events)?;
        state.serve(FeedKind::Balanced, pools, &mut events)?;
        state.record_history();
        Ok(Transition { state, events })
    }

    /// Replaces the liberal bounds and immediately re-serves the balanced
    /// page at the current iteration. Learners are untouched.
    pub fn apply_constraint_change(&self, pools: &Pools, lower_liberal: f64, upper_liberal: f64) -> Result<Transition, SessionError> {
        let constraints = constraints_for(&self.labels, lower_liberal, upper_liberal)?;
        let mut state = self.clone();
        state.constraints = constraints;
        state.lower_liberal = lower_liberal;
        state.upper_liberal = upper_liberal;
        let mut events = vec![state.event(EventPayload::ConstraintChange {
            lower_liberal,
            upper_liberal,
        })];
        state.serve(FeedKind::Balanced, pools, &mut events)?;
        state.record_history();
        Ok(Transition { state, events })
    }

    pub fn history(&self) -> &[HistoryPoint] {
        &self.history
    }

    pub fn t(&self) -> u64 {
        self.unfiltered.t()
    }

    pub fn liberal_index(&self) -> TypeIndex {
        self.labels.index_of(LIBERAL).expect("validated labels")
    }

    fn event(&mut self, payload: EventPayload) -> SessionEvent {
        let event = SessionEvent::new(&self.session_id, self.next_seq, self.t(), payload);
        self.next_seq += 1;
        event
    }

    fn serve(&mut self, feed: FeedKind, pools: &Pools, events: &mut Vec<SessionEvent>) -> Result<(), SessionError> {
        let t = self.t();
        let page = match feed {
            FeedKind::Unfiltered => {
                let dist = self.unfiltered.base_distribution();
                let alloc = allocate_slots(&dist, self.config.page_size, None)?;
                compose_page(&alloc, pools, &mut self.seen_unfiltered, t, &dist, self.seed)?
            }
            FeedKind::Balanced => {
                let dist = project_to_constraints(&self.balanced.base_distribution(), &self.constraints)?;
                let alloc = allocate_slots(&dist, self.config.page_size, Some(&self.constraints))?;
                compose_page(&alloc, pools, &mut self.seen_balanced, t, &dist, self.seed)?
            }
        };
        let article_ids = page.ids().map(str::to_string).collect();
        match feed {
            FeedKind::Unfiltered => self.pages.unfiltered = page,
            FeedKind::Balanced => self.pages.balanced = page,
        }
        let served = self.event(EventPayload::PageServed {
            feed,
            iteration: t,
            article_ids,
        });
        events.push(served);
        Ok(())
    }

    fn record_history(&mut self) {
        let liberal = self.liberal_index();
        self.history.push(HistoryPoint {
            t: self.t(),
            pct_liberal_unfiltered: self.pages.unfiltered.fraction_of(liberal),
            pct_liberal_balanced: self.pages.balanced.fraction_of(liberal),
            lower_liberal: self.lower_liberal,
            upper_liberal: self.upper_liberal,
        });
    }
}

/// A learner whose page gave the clicked type zero probability cannot
/// importance-weight the click; it advances without signal.
fn learn(
    learner: &BanditState,
    page: &FeedPage,
    clicked: TypeIndex,
    signal: balanced_news_core::RewardSignal,
) -> Result<BanditState, SessionError> {
    if page.sampling_dist.get(clicked).unwrap_or(0.0) > 0.0 {
        Ok(learner.update(signal, &page.sampling_dist)?)
    } else {
        Ok(learner.no_click_step())
    }
}

/// A session bound to the sink its events are persisted to.
pub struct Session<S> {
    state: SessionState,
    sink: S,
}

impl<S: EventSink> Session<S> {
    pub fn create(session_id: impl Into<String>, config: SessionConfig, seed: u64, pools: &Pools, mut sink: S) -> Result<Self, SessionError> {
        let transition = SessionState::create(session_id, config, seed, pools)?;
        sink.append(&transition.events)?;
        Ok(Self {
            state: transition.state,
            sink,
        })
    }

    pub fn from_parts(state: SessionState, sink: S) -> Self {
        Self { state, sink }
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn sink_mut(&mut self) -> &mut S {
        &mut self.sink
    }

    pub fn apply_click(&mut self, pools: &Pools, feed: FeedKind, article_id: &str) -> Result<&SessionState, SessionError> {
        let transition = self.state.apply_click(pools, feed, article_id)?;
        self.commit(transition)
    }

    pub fn apply_constraint_change(&mut self, pools: &Pools, lower: f64, upper: f64) -> Result<&SessionState, SessionError> {
        let transition = self.state.apply_constraint_change(pools, lower, upper)?;
        self.commit(transition)
    }

    pub fn advance_without_click(&mut self, pools: &Pools) -> Result<&SessionState, SessionError> {
        let transition = self.state.advance_without_click(pools)?;
        self.commit(transition)
    }

    /// Persists the transition's events, then adopts its state. A failed
    /// write leaves the session unchanged.
    pub fn commit(&mut self, transition: Transition) -> Result<&SessionState, SessionError> {
        self.sink.append(&transition.events)?;
        self.state = transition.state;
        Ok(&self.state)
    }
}
