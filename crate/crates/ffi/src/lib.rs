//! C ABI over the `openki` library.
//!
//! Every fallible function returns an [`OpenkiStatus`]; on failure the
//! message is available from [`openki_last_error`] until the next call on
//! the same thread. Sessions are opaque and must be released with
//! [`openki_session_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use openki::error::Error;
use openki::eval::{auc_pr, average_precision};
use openki::model::{score, ModelConfig, ModelParams, PairContext};
use openki::store::{EntityId, NeighborIndex, RelationId, RelationKind, SplitSpec, Vocabulary};
use openki::trainer::{load_checkpoint, training_index};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpenkiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    MalformedInput = 4,
    UnknownName = 5,
    UnseenEntity = 6,
    UnseenPair = 7,
    EmptyPairEvidence = 8,
    InvalidArgument = 9,
    CorruptCheckpoint = 10,
    VersionMismatch = 11,
    NoPositives = 12,
    Panic = 13,
}

/// Trained model bound to its split.
pub struct OpenkiSession {
    vocab: Vocabulary,
    config: ModelConfig,
    params: ModelParams,
    index: NeighborIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> OpenkiStatus {
    match err {
        Error::Io { .. } => OpenkiStatus::Io,
        Error::MalformedLine { .. } | Error::MixedKind { .. } | Error::Json(_) => OpenkiStatus::MalformedInput,
        Error::Unknown { .. } | Error::NotKbRelation(_) => OpenkiStatus::UnknownName,
        Error::UnseenEntity(_) => OpenkiStatus::UnseenEntity,
        Error::UnseenPair(_) => OpenkiStatus::UnseenPair,
        Error::EmptyPairEvidence(_) => OpenkiStatus::EmptyPairEvidence,
        Error::CorruptCheckpoint(_) => OpenkiStatus::CorruptCheckpoint,
        Error::VersionMismatch { .. } => OpenkiStatus::VersionMismatch,
        Error::NoPositives => OpenkiStatus::NoPositives,
        _ => OpenkiStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (OpenkiStatus, String)>) -> OpenkiStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OpenkiStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            OpenkiStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (OpenkiStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (OpenkiStatus, String) {
    (OpenkiStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (OpenkiStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (OpenkiStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn session_ref<'a>(s: *const OpenkiSession) -> Result<&'a OpenkiSession, (OpenkiStatus, String)> {
    s.as_ref().ok_or_else(|| null("session"))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn openki_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn openki_status_name(status: OpenkiStatus) -> *const c_char {
    let s: &'static CStr = match status {
        OpenkiStatus::Ok => c"ok",
        OpenkiStatus::NullPointer => c"null pointer",
        OpenkiStatus::InvalidUtf8 => c"invalid UTF-8",
        OpenkiStatus::Io => c"I/O error",
        OpenkiStatus::MalformedInput => c"malformed input",
        OpenkiStatus::UnknownName => c"unknown name",
        OpenkiStatus::UnseenEntity => c"unseen entity",
        OpenkiStatus::UnseenPair => c"unseen pair",
        OpenkiStatus::EmptyPairEvidence => c"no shared predicates",
        OpenkiStatus::InvalidArgument => c"invalid argument",
        OpenkiStatus::CorruptCheckpoint => c"corrupt checkpoint",
        OpenkiStatus::VersionMismatch => c"checkpoint version mismatch",
        OpenkiStatus::NoPositives => c"no positive labels",
        OpenkiStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Opens a split directory and a checkpoint trained on it.
///
/// # Safety
/// `split_dir` and `checkpoint` must be NUL-terminated strings; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn openki_session_open(
    split_dir: *const c_char,
    checkpoint: *const c_char,
    out: *mut *mut OpenkiSession,
) -> OpenkiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let dir = str_arg(split_dir, "split_dir")?;
        let ckpt_path = str_arg(checkpoint, "checkpoint")?;
        let (vocab, split) = SplitSpec::read(Path::new(dir)).map_err(lib_err)?;
        let ckpt = load_checkpoint(Path::new(ckpt_path)).map_err(lib_err)?;
        ckpt.check_vocab(&vocab).map_err(lib_err)?;
        let index = training_index(&split, &ckpt.model_config);
        let session = OpenkiSession {
            vocab,
            params: ckpt.final_params().clone(),
            config: ckpt.model_config,
            index,
        };
        *out = Box::into_raw(Box::new(session));
        Ok(())
    })
}

/// Releases a session; null is ignored.
///
/// # Safety
/// `session` must come from [`openki_session_open`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn openki_session_free(session: *mut OpenkiSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Number of KB relations; 0 for a null session.
///
/// # Safety
/// `session` must be null or a live session.
#[no_mangle]
pub unsafe extern "C" fn openki_session_num_kb_relations(session: *const OpenkiSession) -> usize {
    session.as_ref().map_or(0, |s| s.vocab.kb_relations().len())
}

/// Id of the `i`-th KB relation (ascending id order).
///
/// # Safety
/// `session` must be a live session and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn openki_session_kb_relation(session: *const OpenkiSession, i: usize, out: *mut u32) -> OpenkiStatus {
    guard(|| {
        let s = session_ref(session)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rels = s.vocab.kb_relations();
        let r = rels
            .get(i)
            .ok_or_else(|| (OpenkiStatus::InvalidArgument, format!("index {i} out of {} KB relations", rels.len())))?;
        *out = r.0;
        Ok(())
    })
}

/// Looks up an entity id by name.
///
/// # Safety
/// `session` must be a live session, `name` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn openki_session_entity_id(session: *const OpenkiSession, name: *const c_char, out: *mut u32) -> OpenkiStatus {
    guard(|| {
        let s = session_ref(session)?;
        let name = str_arg(name, "name")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let id = s.vocab.entity_id(name).ok_or_else(|| {
            lib_err(Error::Unknown {
                what: "entity",
                name: name.to_owned(),
            })
        })?;
        *out = id.0;
        Ok(())
    })
}

/// Looks up a relation or predicate id by name.
///
/// # Safety
/// As for [`openki_session_entity_id`].
#[no_mangle]
pub unsafe extern "C" fn openki_session_relation_id(session: *const OpenkiSession, name: *const c_char, out: *mut u32) -> OpenkiStatus {
    guard(|| {
        let s = session_ref(session)?;
        let name = str_arg(name, "name")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let id = s.vocab.relation_id(name).ok_or_else(|| {
            lib_err(Error::Unknown {
                what: "relation",
                name: name.to_owned(),
            })
        })?;
        *out = id.0;
        Ok(())
    })
}

/// Name of an entity (`is_relation == 0`) or relation, or null for an
/// unknown id. The string lives as long as the session.
///
/// # Safety
/// `session` must be null or a live session.
#[no_mangle]
pub unsafe extern "C" fn openki_session_name(session: *const OpenkiSession, id: u32, is_relation: bool) -> *const c_char {
    thread_local! {
        static NAME: RefCell<CString> = RefCell::new(CString::default());
    }
    let Some(s) = session.as_ref() else { return ptr::null() };
    let name = if is_relation {
        (id as usize) < s.vocab.num_relations()
    } else {
        (id as usize) < s.vocab.num_entities()
    };
    if !name {
        return ptr::null();
    }
    let text = if is_relation {
        s.vocab.relation_name(RelationId(id))
    } else {
        s.vocab.entity_name(EntityId(id))
    };
    NAME.with(|n| {
        *n.borrow_mut() = CString::new(text).unwrap_or_default();
        n.borrow().as_ptr()
    })
}

fn score_ids(s: &OpenkiSession, subject: u32, object: u32, relation: u32, predicates: Option<&[u32]>) -> Result<f64, (OpenkiStatus, String)> {
    let r = RelationId(relation);
    if relation as usize >= s.vocab.num_relations() || s.vocab.relation_kind(r) != RelationKind::Kb {
        return Err(lib_err(Error::NotKbRelation(r)));
    }
    let mut ctx = PairContext::full(&s.index, EntityId(subject), EntityId(object));
    if let Some(preds) = predicates {
        if let Some(bad) = preds.iter().find(|&&p| p as usize >= s.vocab.num_relations()) {
            return Err((OpenkiStatus::UnknownName, format!("relation id {bad} is outside the vocabulary")));
        }
        ctx.pair_relations = preds.iter().map(|&p| RelationId(p)).collect();
    }
    score(&s.params, &s.config, &ctx, r).map_err(lib_err)
}

/// Scores `(subject, relation, object)` using the evidence recorded in the
/// split. Entity ids outside the vocabulary are treated as unseen entities.
///
/// # Safety
/// `session` must be a live session and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn openki_session_score(
    session: *const OpenkiSession,
    subject: u32,
    object: u32,
    relation: u32,
    out: *mut f64,
) -> OpenkiStatus {
    guard(|| {
        let s = session_ref(session)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = score_ids(s, subject, object, relation, None)?;
        Ok(())
    })
}

/// Like [`openki_session_score`], with the pair's predicates replaced by
/// `predicates[0..n]`.
///
/// # Safety
/// `predicates` must point to `n` readable ids (or be null with `n == 0`).
#[no_mangle]
pub unsafe extern "C" fn openki_session_score_with_predicates(
    session: *const OpenkiSession,
    subject: u32,
    object: u32,
    relation: u32,
    predicates: *const u32,
    n: usize,
    out: *mut f64,
) -> OpenkiStatus {
    guard(|| {
        let s = session_ref(session)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let preds: &[u32] = if n == 0 {
            &[]
        } else if predicates.is_null() {
            return Err(null("predicates"));
        } else {
            std::slice::from_raw_parts(predicates, n)
        };
        *out = score_ids(s, subject, object, relation, Some(preds))?;
        Ok(())
    })
}

/// Average precision of `relevance[0..n]` in ranked order (non-zero =
/// relevant).
///
/// # Safety
/// `relevance` must point to `n` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn openki_average_precision(relevance: *const u8, n: usize, out: *mut f64) -> OpenkiStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if relevance.is_null() && n > 0 {
            return Err(null("relevance"));
        }
        let rel: Vec<bool> = (0..n).map(|i| *relevance.add(i) != 0).collect();
        *out = average_precision(&rel).ok_or_else(|| lib_err(Error::NoPositives))?;
        Ok(())
    })
}

/// Step-interpolated area under the precision-recall curve.
///
/// # Safety
/// `scores` and `labels` must point to `n` readable elements; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn openki_auc_pr(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> OpenkiStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if n > 0 && (scores.is_null() || labels.is_null()) {
            return Err(null("scores or labels"));
        }
        let s: Vec<f64> = (0..n).map(|i| *scores.add(i)).collect();
        let l: Vec<bool> = (0..n).map(|i| *labels.add(i) != 0).collect();
        *out = auc_pr(&s, &l).map_err(lib_err)?;
        Ok(())
    })
}
