//! Blinded forced-choice review sessions: tag-matched pairs of one
//! synthetic and one external case, with an append-only session log.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::gateway::derive_seed;
use crate::sampling::ExternalCase;
use crate::triage::TriageTag;

pub const DEFAULT_QUESTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewPair {
    /// 1-based question index.
    pub index: usize,
    pub tag: TriageTag,
    pub left: String,
    pub right: String,
    pub synthetic_side: Side,
    pub synthetic_id: String,
    pub external_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub index: usize,
    pub chosen: Side,
    pub answered_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub rater_id: String,
    pub seed: u64,
    pub quotas: BTreeMap<TriageTag, usize>,
    pub pairs: Vec<ReviewPair>,
    #[serde(default)]
    pub answers: Vec<Answer>,
}

impl ReviewSession {
    pub fn total(&self) -> usize {
        self.pairs.len()
    }

    pub fn status(&self) -> SessionStatus {
        if self.answers.len() >= self.pairs.len() {
            SessionStatus::Complete
        } else {
            SessionStatus::Open
        }
    }

    pub fn is_answered(&self, index: usize) -> bool {
        self.answers.iter().any(|a| a.index == index)
    }

    /// Lowest-indexed unanswered question, blinded.
    pub fn next_question(&self) -> Option<QuestionView> {
        self.pairs.iter().find(|p| !self.is_answered(p.index)).map(|p| QuestionView {
            session_id: self.session_id.clone(),
            index: p.index,
            total: self.total(),
            left: p.left.clone(),
            right: p.right.clone(),
        })
    }

    pub fn correct(&self) -> usize {
        self.answers
            .iter()
            .filter(|a| self.pairs.get(a.index - 1).is_some_and(|p| p.synthetic_side == a.chosen))
            .count()
    }
}

/// What a rater's client receives for one question. Carries nothing that
/// depends on which side is synthetic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionView {
    pub session_id: String,
    pub index: usize,
    pub total: usize,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub index: usize,
    pub answered: usize,
    pub remaining: usize,
    pub status: SessionStatus,
}

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("not enough {tag} cases for the pairing plan: need {needed}, have {available}")]
    InsufficientPairs { tag: TriageTag, needed: usize, available: usize },
    #[error("question {0} was already answered")]
    AlreadyAnswered(usize),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is complete")]
    SessionComplete(String),
    #[error("session {0} is not complete")]
    SessionIncomplete(String),
    #[error("question {index} is out of range 1..={total}")]
    UnknownQuestion { index: usize, total: usize },
    #[error("invalid review configuration: {0}")]
    InvalidConfig(String),
    #[error("review log {path}: {message}")]
    Log { path: PathBuf, message: String },
}

/// Split `q` questions across tags in proportion to `availability`
/// (largest remainder; ties go to the earlier tag).
pub fn proportional_quotas(q: usize, availability: &BTreeMap<TriageTag, usize>) -> BTreeMap<TriageTag, usize> {
    let total: usize = availability.values().sum();
    let mut quotas: BTreeMap<TriageTag, usize> = TriageTag::ALL.iter().map(|t| (*t, 0)).collect();
    if total == 0 {
        return quotas;
    }
    let mut remainders = Vec::new();
    let mut assigned = 0;
    for tag in TriageTag::ALL {
        let share = q * availability.get(&tag).copied().unwrap_or(0);
        quotas.insert(tag, share / total);
        assigned += share / total;
        remainders.push((share % total, tag));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, tag) in remainders.into_iter().take(q - assigned) {
        *quotas.get_mut(&tag).expect("all tags present") += 1;
    }
    quotas
}

/// A candidate for one side of a pair.
#[derive(Debug, Clone)]
pub struct PairSource {
    pub id: String,
    pub tag: TriageTag,
    pub description: String,
}

pub fn synthetic_sources(corpus: &Corpus) -> Vec<PairSource> {
    corpus
        .cases
        .iter()
        .map(|c| PairSource { id: c.id.clone(), tag: c.tag, description: c.description.clone() })
        .collect()
}

pub fn external_sources(cases: &[ExternalCase]) -> Vec<PairSource> {
    cases.iter().map(|c| PairSource { id: c.id.clone(), tag: c.tag, description: c.description.clone() }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub questions: usize,
    pub seed: u64,
    /// Explicit per-tag quotas; defaults to proportional to external supply.
    pub quotas: Option<BTreeMap<TriageTag, usize>>,
}

impl Default for SessionPlan {
    fn default() -> Self {
        SessionPlan { questions: DEFAULT_QUESTIONS, seed: 0, quotas: None }
    }
}

fn by_tag(sources: &[PairSource]) -> BTreeMap<TriageTag, Vec<&PairSource>> {
    let mut out: BTreeMap<TriageTag, Vec<&PairSource>> = BTreeMap::new();
    for s in sources {
        out.entry(s.tag).or_default().push(s);
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.id.cmp(&b.id));
    }
    out
}

/// Build a session of tag-matched pairs drawn without replacement from each
/// source, with question order and sides randomized from `plan.seed`.
pub fn create_session(
    session_id: &str,
    rater_id: &str,
    synthetic: &[PairSource],
    external: &[PairSource],
    plan: &SessionPlan,
) -> Result<ReviewSession, ReviewError> {
    if plan.questions == 0 {
        return Err(ReviewError::InvalidConfig("at least one question is required".into()));
    }
    let mut syn = by_tag(synthetic);
    let mut ext = by_tag(external);
    let availability: BTreeMap<TriageTag, usize> =
        TriageTag::ALL.iter().map(|t| (*t, ext.get(t).map_or(0, Vec::len))).collect();
    let quotas = match &plan.quotas {
        Some(q) => {
            let sum: usize = q.values().sum();
            if sum != plan.questions {
                return Err(ReviewError::InvalidConfig(format!("quotas sum to {sum}, not {}", plan.questions)));
            }
            q.clone()
        }
        None => proportional_quotas(plan.questions, &availability),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, "review-pairs"));
    let mut drafts = Vec::with_capacity(plan.questions);
    for (&tag, &k) in &quotas {
        if k == 0 {
            continue;
        }
        for (pool, _name) in [(&mut syn, "synthetic"), (&mut ext, "external")] {
            let available = pool.get(&tag).map_or(0, Vec::len);
            if available < k {
                return Err(ReviewError::InsufficientPairs { tag, needed: k, available });
            }
        }
        let s = syn.get_mut(&tag).expect("checked");
        let e = ext.get_mut(&tag).expect("checked");
        s.shuffle(&mut rng);
        e.shuffle(&mut rng);
        for i in 0..k {
            drafts.push((tag, s[i], e[i]));
        }
    }
    drafts.shuffle(&mut rng);
    let pairs = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (tag, s, e))| {
            let synthetic_side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
            let (left, right) = match synthetic_side {
                Side::Left => (s.description.clone(), e.description.clone()),
                Side::Right => (e.description.clone(), s.description.clone()),
            };
            ReviewPair {
                index: i + 1,
                tag,
                left,
                right,
                synthetic_side,
                synthetic_id: s.id.clone(),
                external_id: e.id.clone(),
            }
        })
        .collect();
    Ok(ReviewSession {
        session_id: session_id.to_string(),
        rater_id: rater_id.to_string(),
        seed: plan.seed,
        quotas,
        pairs,
        answers: Vec::new(),
    })
}

/// Record the side the rater judged synthetic for one question.
pub fn submit_answer(
    session: &mut ReviewSession,
    index: usize,
    chosen: Side,
    answered_at: &str,
) -> Result<Ack, ReviewError> {
    if session.status() == SessionStatus::Complete {
        return Err(ReviewError::SessionComplete(session.session_id.clone()));
    }
    if index == 0 || index > session.total() {
        return Err(ReviewError::UnknownQuestion { index, total: session.total() });
    }
    if session.is_answered(index) {
        return Err(ReviewError::AlreadyAnswered(index));
    }
    session.answers.push(Answer { index, chosen, answered_at: answered_at.to_string() });
    Ok(Ack {
        session_id: session.session_id.clone(),
        index,
        answered: session.answers.len(),
        remaining: session.total() - session.answers.len(),
        status: session.status(),
    })
}

/// Rows: truth (synthetic, external); columns: judged (synthetic, external).
pub type Confusion2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterResult {
    pub session_id: String,
    pub rater_id: String,
    pub correct: usize,
    pub total: usize,
    pub confusion: Confusion2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewResults {
    pub raters: Vec<RaterResult>,
    pub averaged_confusion: Confusion2,
    pub mean_correct: f64,
    pub chance_level: f64,
}

pub fn results(sessions: &[&ReviewSession]) -> Result<ReviewResults, ReviewError> {
    if sessions.is_empty() {
        return Err(ReviewError::InvalidConfig("no sessions given".into()));
    }
    let mut raters = Vec::with_capacity(sessions.len());
    for s in sessions {
        if s.status() != SessionStatus::Complete {
            return Err(ReviewError::SessionIncomplete(s.session_id.clone()));
        }
        let correct = s.correct();
        let wrong = (s.total() - correct) as f64;
        let c = correct as f64;
        raters.push(RaterResult {
            session_id: s.session_id.clone(),
            rater_id: s.rater_id.clone(),
            correct,
            total: s.total(),
            confusion: [[c, wrong], [wrong, c]],
        });
    }
    let k = raters.len() as f64;
    let mut avg = [[0.0; 2]; 2];
    for r in &raters {
        for (row, src) in avg.iter_mut().zip(&r.confusion) {
            for (cell, v) in row.iter_mut().zip(src) {
                *cell += v / k;
            }
        }
    }
    Ok(ReviewResults {
        mean_correct: raters.iter().map(|r| r.correct as f64).sum::<f64>() / k,
        chance_level: raters.iter().map(|r| r.total as f64 / 2.0).sum::<f64>() / k,
        averaged_confusion: avg,
        raters,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum LogEvent {
    Created { session: ReviewSession },
    Answer { session_id: String, answer: Answer },
}

/// In-memory sessions backed by an optional append-only JSONL log.
pub struct ReviewStore {
    sessions: HashMap<String, ReviewSession>,
    order: Vec<String>,
    log: Option<(PathBuf, File)>,
}

impl ReviewStore {
    pub fn in_memory() -> Self {
        ReviewStore { sessions: HashMap::new(), order: Vec::new(), log: None }
    }

    /// Open (or create) a log and replay it. A torn final line, as left by
    /// a crash mid-write, is ignored.
    pub fn open(path: &Path) -> Result<Self, ReviewError> {
        let log_err = |m: String| ReviewError::Log { path: path.to_path_buf(), message: m };
        let mut store = Self::in_memory();
        if path.exists() {
            let bytes = std::fs::read(path).map_err(|e| log_err(e.to_string()))?;
            if !bytes.is_empty() && bytes.last() != Some(&b'\n') {
                // Drop the torn tail so later appends start on a fresh line.
                let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
                let file = OpenOptions::new().write(true).open(path).map_err(|e| log_err(e.to_string()))?;
                file.set_len(keep as u64).map_err(|e| log_err(e.to_string()))?;
                log::warn!("{}: dropped {} byte(s) of a torn final record", path.display(), bytes.len() - keep);
            }
            let reader = BufReader::new(File::open(path).map_err(|e| log_err(e.to_string()))?);
            let lines: Vec<String> = reader.lines().collect::<Result<_, _>>().map_err(|e| log_err(e.to_string()))?;
            let last = lines.len();
            for (i, line) in lines.into_iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<LogEvent>(&line) {
                    Ok(event) => store.apply(event),
                    Err(e) if i + 1 == last => log::warn!("{}: ignoring torn final line: {e}", path.display()),
                    Err(e) => return Err(log_err(format!("line {}: {e}", i + 1))),
                }
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| log_err(e.to_string()))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| log_err(e.to_string()))?;
        store.log = Some((path.to_path_buf(), file));
        Ok(store)
    }

    fn apply(&mut self, event: LogEvent) {
        match event {
            LogEvent::Created { session } => {
                if !self.sessions.contains_key(&session.session_id) {
                    self.order.push(session.session_id.clone());
                }
                self.sessions.insert(session.session_id.clone(), session);
            }
            LogEvent::Answer { session_id, answer } => {
                if let Some(s) = self.sessions.get_mut(&session_id) {
                    if !s.is_answered(answer.index) {
                        s.answers.push(answer);
                    }
                }
            }
        }
    }

    fn append(&mut self, event: &LogEvent) -> Result<(), ReviewError> {
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_vec(event).expect("serializable");
            line.push(b'\n');
            file.write_all(&line)
                .and_then(|_| file.sync_data())
                .map_err(|e| ReviewError::Log { path: path.clone(), message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// A fresh session id, unique within this store.
    pub fn next_session_id(&self, rater_id: &str, seed: u64) -> String {
        let mut n = self.order.len();
        loop {
            let id = format!("s{:04}-{:08x}", n + 1, derive_seed(seed, &format!("{rater_id}:{n}")) as u32);
            if !self.sessions.contains_key(&id) {
                return id;
            }
            n += 1;
        }
    }

    pub fn insert(&mut self, session: ReviewSession) -> Result<(), ReviewError> {
        let event = LogEvent::Created { session };
        self.append(&event)?;
        self.apply(event);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&ReviewSession, ReviewError> {
        self.sessions.get(id).ok_or_else(|| ReviewError::UnknownSession(id.to_string()))
    }

    pub fn sessions(&self) -> impl Iterator<Item = &ReviewSession> {
        self.order.iter().filter_map(|id| self.sessions.get(id))
    }

    pub fn submit(&mut self, id: &str, index: usize, chosen: Side, answered_at: &str) -> Result<Ack, ReviewError> {
        let session = self.sessions.get_mut(id).ok_or_else(|| ReviewError::UnknownSession(id.to_string()))?;
        let mut probe = session.clone();
        let ack = submit_answer(&mut probe, index, chosen, answered_at)?;
        let answer = probe.answers.pop().expect("just pushed");
        self.append(&LogEvent::Answer { session_id: id.to_string(), answer: answer.clone() })?;
        self.sessions.get_mut(id).expect("present").answers.push(answer);
        Ok(ack)
    }

    pub fn results(&self, ids: &[String]) -> Result<ReviewResults, ReviewError> {
        let sessions = ids.iter().map(|id| self.get(id)).collect::<Result<Vec<_>, _>>()?;
        results(&sessions)
    }
}
