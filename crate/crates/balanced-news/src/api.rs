//! JSON views exchanged over HTTP. Field names are snake_case; the full
//! reference is in `docs/api.md`.

use balanced_news_core::{Article, FeedPage, TypeLabels};
use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::session::{FeedKind, HistoryPoint, SessionState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleView {
    pub id: String,
    pub title: String,
    pub url: String,
    pub source_domain: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub rating: f64,
    pub published_at: String,
}

impl ArticleView {
    pub fn new(article: &Article, labels: &TypeLabels) -> Self {
        Self {
            id: article.id.clone(),
            title: article.title.clone(),
            url: article.url.clone(),
            source_domain: article.source_domain.clone(),
            type_name: labels.name(article.type_index).unwrap_or_default().to_string(),
            rating: article.rating,
            published_at: DateTime::from_timestamp(article.published_at, 0)
                .map(|ts| ts.to_rfc3339())
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageView {
    pub feed: FeedKind,
    pub iteration: u64,
    pub page_size: usize,
    pub liberal_count: usize,
    pub sampling_dist: Vec<f64>,
    pub slots: Vec<ArticleView>,
}

impl PageView {
    pub fn new(state: &SessionState, feed: FeedKind) -> Self {
        let page: &FeedPage = state.pages.get(feed);
        Self {
            feed,
            iteration: page.iteration,
            page_size: page.allocation.page_size,
            liberal_count: page.count_of(state.liberal_index()),
            sampling_dist: page.sampling_dist.probs().to_vec(),
            slots: page.slots.iter().map(|a| ArticleView::new(a, &state.labels)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedsView {
    pub unfiltered: PageView,
    pub balanced: PageView,
}

impl FeedsView {
    pub fn new(state: &SessionState) -> Self {
        Self {
            unfiltered: PageView::new(state, FeedKind::Unfiltered),
            balanced: PageView::new(state, FeedKind::Balanced),
        }
    }

    pub fn get(&self, feed: FeedKind) -> &PageView {
        match feed {
            FeedKind::Unfiltered => &self.unfiltered,
            FeedKind::Balanced => &self.balanced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintsView {
    pub lower_liberal: f64,
    pub upper_liberal: f64,
}

impl ConstraintsView {
    pub fn new(state: &SessionState) -> Self {
        Self {
            lower_liberal: state.lower_liberal,
            upper_liberal: state.upper_liberal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub seed: u64,
    pub t: u64,
    pub constraints: ConstraintsView,
    pub feeds: FeedsView,
    pub history: Vec<HistoryPoint>,
}

impl SessionDescriptor {
    pub fn new(state: &SessionState) -> Self {
        Self {
            session_id: state.session_id.clone(),
            seed: state.seed,
            t: state.t(),
            constraints: ConstraintsView::new(state),
            feeds: FeedsView::new(state),
            history: state.history.clone(),
        }
    }
}

/// Response to a click or a no-click advance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub feeds: FeedsView,
    pub history_point: HistoryPoint,
}

impl StepResponse {
    pub fn new(state: &SessionState) -> Self {
        Self {
            feeds: FeedsView::new(state),
            history_point: *state.history.last().expect("history starts at creation"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResponse {
    pub constraints: ConstraintsView,
    pub balanced: PageView,
    pub history_point: HistoryPoint,
}

impl ConstraintResponse {
    pub fn new(state: &SessionState) -> Self {
        Self {
            constraints: ConstraintsView::new(state),
            balanced: PageView::new(state, FeedKind::Balanced),
            history_point: *state.history.last().expect("history starts at creation"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_liberal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_liberal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickBody {
    pub feed: FeedKind,
    pub article_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintBody {
    pub lower_liberal: f64,
    pub upper_liberal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    InvalidInput,
    InfeasibleConstraints,
    PoolExhausted,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}
