//! Registry of live sessions shared by the HTTP handlers.
//!
//! Mutations of one session are serialized by that session's mutex; the
//! registry lock is only held to look sessions up or insert new ones, so
//! distinct sessions proceed in parallel. Events from all sessions go to a
//! single shared sink.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use balanced_news_core::Pools;

use crate::session::{replay, EventSink, FeedKind, SessionConfig, SessionError, SessionEvent, SessionState, Transition};

type SharedSink = Mutex<Box<dyn EventSink + Send>>;

pub struct SessionStore {
    pools: Arc<Pools>,
    defaults: SessionConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    sink: SharedSink,
}

/// Optional overrides for a new session.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CreateRequest {
    pub seed: Option<u64>,
    pub lower_liberal: Option<f64>,
    pub upper_liberal: Option<f64>,
}

impl SessionStore {
    pub fn new(pools: Arc<Pools>, defaults: SessionConfig, sink: Box<dyn EventSink + Send>) -> Self {
        Self {
            pools,
            defaults,
            sessions: RwLock::new(HashMap::new()),
            sink: Mutex::new(sink),
        }
    }

    /// Rebuilds every session found in `events`.
    pub fn recover(
        pools: Arc<Pools>,
        defaults: SessionConfig,
        sink: Box<dyn EventSink + Send>,
        events: &[SessionEvent],
    ) -> Result<Self, SessionError> {
        let store = Self::new(pools, defaults, sink);
        let ids: BTreeSet<&str> = events.iter().map(|e| e.session_id.as_str()).collect();
        {
            let mut sessions = store.sessions.write().expect("registry lock");
            for id in ids {
                let state = replay(events, id, &store.pools, None)?;
                sessions.insert(id.to_string(), Arc::new(Mutex::new(state)));
            }
        }
        Ok(store)
    }

    pub fn defaults(&self) -> &SessionConfig {
        &self.defaults
    }

    pub fn pools(&self) -> &Pools {
        &self.pools
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, request: CreateRequest) -> Result<SessionState, SessionError> {
        let mut config = self.defaults.clone();
        if let Some(lower) = request.lower_liberal {
            config.lower_liberal = lower;
        }
        if let Some(upper) = request.upper_liberal {
            config.upper_liberal = upper;
        }
        let seed = request.seed.unwrap_or_else(rand::random);
        let id = uuid::Uuid::new_v4().simple().to_string();
        let transition = SessionState::create(id.clone(), config, seed, &self.pools)?;
        self.persist(&transition)?;
        let snapshot = transition.state.clone();
        self.sessions
            .write()
            .expect("registry lock")
            .insert(id, Arc::new(Mutex::new(transition.state)));
        Ok(snapshot)
    }

    pub fn get(&self, id: &str) -> Result<SessionState, SessionError> {
        let handle = self.handle(id)?;
        let state = handle.lock().expect("session lock");
        Ok(state.clone())
    }

    pub fn click(&self, id: &str, feed: FeedKind, article_id: &str) -> Result<SessionState, SessionError> {
        self.mutate(id, |s, pools| s.apply_click(pools, feed, article_id))
    }

    pub fn set_constraints(&self, id: &str, lower: f64, upper: f64) -> Result<SessionState, SessionError> {
        self.mutate(id, |s, pools| s.apply_constraint_change(pools, lower, upper))
    }

    pub fn advance(&self, id: &str) -> Result<SessionState, SessionError> {
        self.mutate(id, |s, pools| s.advance_without_click(pools))
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, SessionError> {
        self.sessions
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    fn mutate(
        &self,
        id: &str,
        op: impl FnOnce(&SessionState, &Pools) -> Result<Transition, SessionError>,
    ) -> Result<SessionState, SessionError> {
        let handle = self.handle(id)?;
        let mut state = handle.lock().expect("session lock");
        let transition = op(&state, &self.pools)?;
        self.persist(&transition)?;
        *state = transition.state;
        Ok(state.clone())
    }

    fn persist(&self, transition: &Transition) -> Result<(), SessionError> {
        self.sink.lock().expect("sink lock").append(&transition.events)?;
        Ok(())
    }
}
