//! C ABI for the cpcausal engine.
//!
//! Theories and stories are opaque handles created by `cp_*_parse` and
//! released with the matching `cp_*_free`. Every fallible call returns a
//! [`CpStatus`]; on failure [`cp_last_error`] describes the problem until the
//! next call on the same thread. Strings returned through out-parameters are
//! owned by the caller and released with [`cp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cpcausal::causation::{causal_score, DefinitionSpec, Options};
use cpcausal::neuron::{translate, NeuronDiagram};
use cpcausal::parser::{format_story, format_theory, parse_literal, parse_literals, parse_story, parse_theory};
use cpcausal::semantics::{marginal, Budget};
use cpcausal::story::{Context, Story};
use cpcausal::transform::counterfactual;
use cpcausal::{CpTheory, Error, Rational};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Source text could not be parsed.
    Syntax = 3,
    /// Well-formed input that violates a domain rule.
    Invalid = 4,
    /// The probability-tree node budget was exhausted.
    Budget = 5,
    /// An internal failure; the library state is unchanged.
    Internal = 6,
}

/// Opaque theory handle.
pub struct CpTheoryHandle(Arc<CpTheory>);

/// Opaque story handle; keeps its theory alive.
pub struct CpStoryHandle(Story);

/// An exact probability: `exact` is a heap string such as `"49/50"`.
#[repr(C)]
pub struct CpProbability {
    pub exact: *mut c_char,
    pub approx: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Syntax(_) | Error::Numeral(_) => CpStatus::Syntax,
            Error::BudgetExceeded(_) => CpStatus::Budget,
            _ => CpStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal error".into());
            CpStatus::Internal
        }
    }
}

/// # Safety
/// `p` is null or a valid nul-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` is null or points to a live value of type `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(CpStatus::NullArgument, format!("{what} is null")))
}

fn out<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(CpStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn owned(s: String) -> *mut c_char {
    CString::new(s).expect("library output has no nul bytes").into_raw()
}

fn probability(r: &Rational) -> CpProbability {
    CpProbability {
        exact: owned(r.to_string()),
        approx: r.to_f64(),
    }
}

fn budget(nodes: u64) -> Budget {
    if nodes == 0 {
        Budget::DEFAULT
    } else {
        Budget(usize::try_from(nodes).unwrap_or(usize::MAX))
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn cp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a theory.
///
/// # Safety
/// `source` is a nul-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cp_theory_parse(source: *const c_char, out_theory: *mut *mut CpTheoryHandle) -> CpStatus {
    guard(|| {
        out(out_theory, "out_theory")?;
        let theory = parse_theory(text(source, "source")?)?;
        *out_theory = Box::into_raw(Box::new(CpTheoryHandle(Arc::new(theory))));
        Ok(())
    })
}

/// # Safety
/// `theory` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_theory_free(theory: *mut CpTheoryHandle) {
    if !theory.is_null() {
        drop(Box::from_raw(theory));
    }
}

/// Number of laws in the theory.
///
/// # Safety
/// `theory` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_theory_len(theory: *const CpTheoryHandle) -> usize {
    theory.as_ref().map_or(0, |t| t.0.len())
}

/// Canonical text of the theory.
///
/// # Safety
/// `theory` is a live handle; `out_text` is writable.
#[no_mangle]
pub unsafe extern "C" fn cp_theory_format(theory: *const CpTheoryHandle, out_text: *mut *mut c_char) -> CpStatus {
    guard(|| {
        out(out_text, "out_text")?;
        *out_text = owned(format_theory(&handle(theory, "theory")?.0));
        Ok(())
    })
}

/// Probability of a comma-separated conjunction of literals. A zero budget
/// selects the default.
///
/// # Safety
/// Pointers are valid; `out_prob` is writable.
#[no_mangle]
pub unsafe extern "C" fn cp_marginal(
    theory: *const CpTheoryHandle,
    query: *const c_char,
    budget_nodes: u64,
    out_prob: *mut CpProbability,
) -> CpStatus {
    guard(|| {
        out(out_prob, "out_prob")?;
        let theory = handle(theory, "theory")?;
        let p = marginal(&theory.0, &parse_literals(text(query, "query")?)?, budget(budget_nodes))?;
        *out_prob = probability(&p);
        Ok(())
    })
}

/// Parses and validates a story against `theory`.
///
/// # Safety
/// Pointers are valid; `out_story` is writable.
#[no_mangle]
pub unsafe extern "C" fn cp_story_parse(
    theory: *const CpTheoryHandle,
    source: *const c_char,
    out_story: *mut *mut CpStoryHandle,
) -> CpStatus {
    guard(|| {
        out(out_story, "out_story")?;
        let theory = handle(theory, "theory")?;
        let story = parse_story(text(source, "source")?, theory.0.clone())?;
        *out_story = Box::into_raw(Box::new(CpStoryHandle(story)));
        Ok(())
    })
}

/// # Safety
/// `story` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_story_free(story: *mut CpStoryHandle) {
    if !story.is_null() {
        drop(Box::from_raw(story));
    }
}

/// Canonical text of the story, e.g. `"1:1 2:none"`.
///
/// # Safety
/// `story` is a live handle; `out_text` is writable.
#[no_mangle]
pub unsafe extern "C" fn cp_story_format(story: *const CpStoryHandle, out_text: *mut *mut c_char) -> CpStatus {
    guard(|| {
        out(out_text, "out_text")?;
        *out_text = owned(format_story(&handle(story, "story")?.0));
        Ok(())
    })
}

/// Probability of `query` in the story's determinized theory after the
/// intervention `action` (`~A` or `A`).
///
/// # Safety
/// Pointers are valid; `out_prob` is writable.
#[no_mangle]
pub unsafe extern "C" fn cp_counterfactual(
    story: *const CpStoryHandle,
    action: *const c_char,
    query: *const c_char,
    budget_nodes: u64,
    out_prob: *mut CpProbability,
) -> CpStatus {
    guard(|| {
        out(out_prob, "out_prob")?;
        let story = handle(story, "story")?;
        let action = parse_literal(text(action, "action")?)?;
        let query = parse_literals(text(query, "query")?)?;
        let p = counterfactual(&story.0, &action, &query, budget(budget_nodes))?;
        *out_prob = probability(&p);
        Ok(())
    })
}

/// Score of `cause` for `effect` under the named definition. `out_is_cause`
/// receives 1 when the score is positive, 0 otherwise.
///
/// # Safety
/// Pointers are valid; the out-parameters are writable.
#[no_mangle]
pub unsafe extern "C" fn cp_cause_score(
    story: *const CpStoryHandle,
    cause: *const c_char,
    effect: *const c_char,
    definition: *const c_char,
    budget_nodes: u64,
    out_prob: *mut CpProbability,
    out_is_cause: *mut c_int,
) -> CpStatus {
    guard(|| {
        out(out_prob, "out_prob")?;
        out(out_is_cause, "out_is_cause")?;
        let story = handle(story, "story")?;
        let name = text(definition, "definition")?;
        let spec = DefinitionSpec::by_name(name)
            .ok_or_else(|| Failure(CpStatus::Invalid, format!("unknown definition `{name}`")))?;
        let ctx = Context::new(
            story.0.clone(),
            parse_literal(text(cause, "cause")?)?,
            parse_literal(text(effect, "effect")?)?,
        )?
        .with_budget(budget(budget_nodes));
        let verdict = causal_score(spec, &ctx, Options::default())?;
        *out_prob = probability(&verdict.score);
        *out_is_cause = c_int::from(verdict.is_cause);
        Ok(())
    })
}

/// Translates a neuron diagram (JSON) into a theory and its actual story.
///
/// # Safety
/// `json` is a nul-terminated string; both out-parameters are writable.
#[no_mangle]
pub unsafe extern "C" fn cp_neuron_translate(
    json: *const c_char,
    out_theory: *mut *mut CpTheoryHandle,
    out_story: *mut *mut CpStoryHandle,
) -> CpStatus {
    guard(|| {
        out(out_theory, "out_theory")?;
        out(out_story, "out_story")?;
        let diagram = NeuronDiagram::from_json(text(json, "json")?)?;
        let (theory, story) = translate(&diagram)?;
        *out_theory = Box::into_raw(Box::new(CpTheoryHandle(theory)));
        *out_story = Box::into_raw(Box::new(CpStoryHandle(story)));
        Ok(())
    })
}
