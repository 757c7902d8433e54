//! Byte-level token masking for constrained generation.
//!
//! A [`Grammar`] of literal alternatives compiles to a trie-shaped
//! [`ByteDfa`] whose alphabet is bytes, not characters. A token is admissible
//! from a state when running its bytes keeps the automaton alive, so a token
//! holding half of a multi-byte character (`E2 88` of `∀`) is admitted
//! exactly when the rest of that character can still follow.

use std::fmt;

use thiserror::Error;

use crate::exec::Execution;
use crate::token_model::{TokenId, Vocabulary};
use crate::utf8_codec::{hex, is_well_formed};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("grammar has no alternatives")]
    EmptyGrammar,
    #[error("grammar alternative {index} is empty")]
    EmptyAlternative { index: usize },
    #[error("grammar line {line} is not well-formed UTF-8: {}", hex(bytes))]
    IllFormedAlternative { line: usize, bytes: Vec<u8> },
    #[error("state {0} does not exist")]
    UnknownState(StateId),
    #[error("token {token} is not admissible from state {state}")]
    Masked { state: StateId, token: TokenId },
    #[error("token {0} is not in the vocabulary")]
    UnknownToken(TokenId),
    #[error("unsatisfiable at step {step}: no admissible token can reach an accepting state")]
    Unsatisfiable { step: usize },
}

/// Literal alternation: the output must be exactly one of the alternatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    alternatives: Vec<String>,
}

impl Grammar {
    pub fn new<S: Into<String>>(alternatives: impl IntoIterator<Item = S>) -> Result<Self, ConstraintError> {
        let alternatives: Vec<String> = alternatives.into_iter().map(Into::into).collect();
        if alternatives.is_empty() {
            return Err(ConstraintError::EmptyGrammar);
        }
        if let Some(index) = alternatives.iter().position(String::is_empty) {
            return Err(ConstraintError::EmptyAlternative { index });
        }
        Ok(Grammar { alternatives })
    }

    /// One alternative per line. Blank lines are skipped; a trailing `\r`
    /// is stripped.
    pub fn parse(contents: &[u8]) -> Result<Self, ConstraintError> {
        let mut alternatives = Vec::new();
        for (n, raw) in contents.split(|&b| b == b'\n').enumerate() {
            let line = raw.strip_suffix(b"\r").unwrap_or(raw);
            if !is_well_formed(line) {
                return Err(ConstraintError::IllFormedAlternative { line: n + 1, bytes: line.to_vec() });
            }
            let line = std::str::from_utf8(line).expect("checked above");
            if !line.trim().is_empty() {
                alternatives.push(line.to_owned());
            }
        }
        Grammar::new(alternatives)
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct DfaState {
    next: Vec<(u8, u32)>,
    accepting: bool,
}

/// Deterministic automaton over bytes. Missing transitions go to an
/// implicit dead state; every materialized state is live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteDfa {
    states: Vec<DfaState>,
}

impl ByteDfa {
    pub const START: StateId = StateId(0);

    pub fn compile(grammar: &Grammar) -> Result<Self, ConstraintError> {
        if grammar.alternatives.is_empty() {
            return Err(ConstraintError::EmptyGrammar);
        }
        let mut states = vec![DfaState::default()];
        for alt in &grammar.alternatives {
            let mut s = 0usize;
            for &b in alt.as_bytes() {
                let found = states[s].next.binary_search_by_key(&b, |&(k, _)| k);
                s = match found {
                    Ok(i) => states[s].next[i].1 as usize,
                    Err(i) => {
                        let fresh = states.len();
                        states.push(DfaState::default());
                        states[s].next.insert(i, (b, fresh as u32));
                        fresh
                    }
                };
            }
            states[s].accepting = true;
        }
        Ok(ByteDfa { states })
    }

    pub fn start(&self) -> StateId {
        Self::START
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    fn state(&self, s: StateId) -> Result<&DfaState, ConstraintError> {
        self.states.get(s.0 as usize).ok_or(ConstraintError::UnknownState(s))
    }

    pub fn is_accepting(&self, s: StateId) -> bool {
        self.states.get(s.0 as usize).is_some_and(|st| st.accepting)
    }

    /// Some accepting state is reachable from `s`.
    pub fn is_live(&self, s: StateId) -> bool {
        (s.0 as usize) < self.states.len()
    }

    pub fn step(&self, s: StateId, b: u8) -> Option<StateId> {
        let st = self.states.get(s.0 as usize)?;
        st.next
            .binary_search_by_key(&b, |&(k, _)| k)
            .ok()
            .map(|i| StateId(st.next[i].1))
    }

    pub fn run(&self, s: StateId, bytes: &[u8]) -> Option<StateId> {
        bytes.iter().try_fold(s, |s, &b| self.step(s, b))
    }

    /// Outgoing transitions of `s`, in byte order.
    pub fn transitions(&self, s: StateId) -> impl Iterator<Item = (u8, StateId)> + '_ {
        self.states
            .get(s.0 as usize)
            .into_iter()
            .flat_map(|st| st.next.iter().map(|&(b, t)| (b, StateId(t))))
    }
}

/// Where a token leads: another automaton state, or the end of output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Next {
    State(StateId),
    Terminal,
}

fn admissible(dfa: &ByteDfa, s: StateId, vocab: &Vocabulary, id: TokenId) -> Option<Next> {
    let tok = vocab.get(id)?;
    if tok.special {
        dfa.is_accepting(s).then_some(Next::Terminal)
    } else {
        dfa.run(s, &tok.bytes).map(Next::State)
    }
}

/// Ids admissible from `s`, ascending.
pub fn token_mask(dfa: &ByteDfa, s: StateId, vocab: &Vocabulary) -> Result<Vec<TokenId>, ConstraintError> {
    dfa.state(s)?;
    Ok(vocab
        .iter()
        .filter(|t| admissible(dfa, s, vocab, t.id).is_some())
        .map(|t| t.id)
        .collect())
}

/// Runs token `id` from `s`. Masked-out tokens are a contract violation.
pub fn advance(dfa: &ByteDfa, s: StateId, vocab: &Vocabulary, id: TokenId) -> Result<Next, ConstraintError> {
    dfa.state(s)?;
    if vocab.get(id).is_none() {
        return Err(ConstraintError::UnknownToken(id));
    }
    admissible(dfa, s, vocab, id).ok_or(ConstraintError::Masked { state: s, token: id })
}

/// Precomputed masks for every state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    masks: Vec<Vec<TokenId>>,
}

impl MaskSet {
    pub fn build(dfa: &ByteDfa, vocab: &Vocabulary, exec: Execution) -> Self {
        // Per token, record every state it is admissible from, then invert.
        let per_token = exec.map(vocab.tokens(), |tok| {
            (0..dfa.num_states() as u32)
                .map(StateId)
                .filter(|&s| admissible(dfa, s, vocab, tok.id).is_some())
                .map(|s| s.0)
                .collect::<Vec<_>>()
        });
        let mut masks = vec![Vec::new(); dfa.num_states()];
        for (tok, states) in vocab.tokens().iter().zip(per_token) {
            for s in states {
                masks[s as usize].push(tok.id);
            }
        }
        MaskSet { masks }
    }

    pub fn mask(&self, s: StateId) -> Option<&[TokenId]> {
        self.masks.get(s.0 as usize).map(Vec::as_slice)
    }

    pub fn contains(&self, s: StateId, id: TokenId) -> bool {
        self.mask(s).is_some_and(|m| m.binary_search(&id).is_ok())
    }
}

/// States from which the vocabulary can still spell its way to acceptance.
fn viable_states(dfa: &ByteDfa, vocab: &Vocabulary) -> Vec<bool> {
    let mut viable: Vec<bool> = (0..dfa.num_states()).map(|s| dfa.is_accepting(StateId(s as u32))).collect();
    loop {
        let mut changed = false;
        for s in 0..dfa.num_states() {
            if viable[s] {
                continue;
            }
            let reaches = vocab.iter().filter(|t| !t.special).any(|t| {
                dfa.run(StateId(s as u32), &t.bytes).is_some_and(|n| viable[n.0 as usize])
            });
            if reaches {
                viable[s] = true;
                changed = true;
            }
        }
        if !changed {
            return viable;
        }
    }
}

/// Proposes candidate tokens, best first, for each generation step.
pub trait Proposer {
    fn rank(&mut self, step: usize, context: &[TokenId]) -> Vec<TokenId>;
}

/// A scripted ranking per step. Steps past the end of the script rank
/// nothing, so the run falls back to the lowest admissible id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedProposer {
    steps: Vec<Vec<TokenId>>,
}

impl ScriptedProposer {
    pub fn new(steps: Vec<Vec<TokenId>>) -> Self {
        ScriptedProposer { steps }
    }

    /// Whitespace-separated ids, one ranked list per line.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut steps = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ranked = line
                .split_whitespace()
                .map(|w| w.parse::<TokenId>().map_err(|_| format!("line {}: bad token id {w:?}", n + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            steps.push(ranked);
        }
        Ok(ScriptedProposer { steps })
    }
}

impl Proposer for ScriptedProposer {
    fn rank(&mut self, step: usize, _context: &[TokenId]) -> Vec<TokenId> {
        self.steps.get(step).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepLog {
    pub step: usize,
    pub state: StateId,
    pub mask_size: usize,
    pub chosen: TokenId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedRun {
    pub bytes: Vec<u8>,
    pub tokens: Vec<TokenId>,
    pub steps: Vec<StepLog>,
}

pub fn run_constrained(
    proposer: &mut impl Proposer,
    dfa: &ByteDfa,
    vocab: &Vocabulary,
) -> Result<ConstrainedRun, ConstraintError> {
    run_constrained_with(proposer, dfa, vocab, |_| {})
}

/// Generates until the output is a complete alternative. At each step the
/// highest-ranked admissible token that keeps acceptance reachable is taken;
/// if the proposer ranks none, the lowest such id is. Generation ends on a
/// special token (only admissible in accepting states), or in an accepting
/// state that no token can extend.
pub fn run_constrained_with(
    proposer: &mut impl Proposer,
    dfa: &ByteDfa,
    vocab: &Vocabulary,
    mut on_step: impl FnMut(&StepLog),
) -> Result<ConstrainedRun, ConstraintError> {
    let viable = viable_states(dfa, vocab);
    let mut state = dfa.start();
    let mut run = ConstrainedRun { bytes: Vec::new(), tokens: Vec::new(), steps: Vec::new() };
    for step in 0.. {
        if dfa.is_accepting(state) && dfa.transitions(state).next().is_none() {
            break;
        }
        let mask = token_mask(dfa, state, vocab)?;
        let keeps_viable = |id: &TokenId| match admissible(dfa, state, vocab, *id) {
            Some(Next::Terminal) => true,
            Some(Next::State(n)) => viable[n.0 as usize],
            None => false,
        };
        let choice = proposer
            .rank(step, &run.tokens)
            .into_iter()
            .find(|id| mask.binary_search(id).is_ok() && keeps_viable(id))
            .or_else(|| mask.iter().copied().find(keeps_viable));
        let choice = match choice {
            Some(id) => id,
            None if dfa.is_accepting(state) => break,
            None => return Err(ConstraintError::Unsatisfiable { step }),
        };
        let log = StepLog { step, state, mask_size: mask.len(), chosen: choice };
        on_step(&log);
        run.steps.push(log);
        run.tokens.push(choice);
        match advance(dfa, state, vocab, choice)? {
            Next::Terminal => break,
            Next::State(n) => {
                run.bytes.extend_from_slice(vocab.bytes(choice).expect("admissible ids exist"));
                state = n;
            }
        }
    }
    Ok(run)
}
