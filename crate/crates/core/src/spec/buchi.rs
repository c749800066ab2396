use super::ltl::{BuiltinLtl, Ltl, LtlFormula, LassoWord};
use super::machine::MAX_TABLE_PROPOSITIONS;
use crate::error::{Error, Result};
use crate::mdp::LabelSet;

/// A Büchi automaton over labels of its own proposition list. Transitions
/// are dense over all labels; deterministic automata have exactly one
/// successor per `(state, label)`.
///
/// Reading convention: the state after reading the `i`-th letter is
/// `q_i = δ(q_{i-1}, w_i)` with `q_{-1}` the initial state, and a word is
/// accepted when some run visits `accepting` infinitely often.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuchiAutomaton {
    num_states: usize,
    initial: usize,
    propositions: Vec<String>,
    accepting: Vec<bool>,
    /// `edges[q << k | label]`
    edges: Vec<Vec<usize>>,
}

impl BuchiAutomaton {
    pub fn new(
        propositions: Vec<String>,
        num_states: usize,
        initial: usize,
        accepting: Vec<bool>,
        edges: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if propositions.len() > MAX_TABLE_PROPOSITIONS {
            return Err(Error::InvalidAutomaton(format!(
                "at most {MAX_TABLE_PROPOSITIONS} propositions are supported"
            )));
        }
        if num_states == 0 || initial >= num_states {
            return Err(Error::InvalidAutomaton("initial state out of range".into()));
        }
        if accepting.len() != num_states {
            return Err(Error::InvalidAutomaton("accepting set has the wrong length".into()));
        }
        if edges.len() != num_states << propositions.len() {
            return Err(Error::InvalidAutomaton("transition table has the wrong size".into()));
        }
        let mut edges = edges;
        for targets in &mut edges {
            targets.sort_unstable();
            targets.dedup();
            if targets.iter().any(|&q| q >= num_states) {
                return Err(Error::InvalidAutomaton("transition target out of range".into()));
            }
        }
        Ok(Self { num_states, initial, propositions, accepting, edges })
    }

    /// Deterministic automaton from a total transition function.
    pub fn deterministic<S: AsRef<str>>(
        propositions: &[S],
        num_states: usize,
        initial: usize,
        accepting: &[usize],
        mut delta: impl FnMut(usize, LabelSet) -> usize,
    ) -> Result<Self> {
        let props: Vec<String> = propositions.iter().map(|p| p.as_ref().to_string()).collect();
        let width = 1usize << props.len().min(MAX_TABLE_PROPOSITIONS + 1);
        let edges = (0..num_states * width)
            .map(|i| vec![delta(i / width, (i % width) as LabelSet)])
            .collect();
        let mut acc = vec![false; num_states];
        for &q in accepting {
            if q >= num_states {
                return Err(Error::InvalidAutomaton("accepting state out of range".into()));
            }
            acc[q] = true;
        }
        Self::new(props, num_states, initial, acc, edges)
    }

    /// The built-in deterministic automaton for `F p`, `G p` or `G F p`.
    pub fn for_builtin(formula: &LtlFormula) -> Option<Self> {
        let shape = formula.builtin()?;
        let props = &formula.propositions;
        let holds = |p: &Ltl, l: LabelSet| p.holds_on(l);
        let aut = match shape {
            BuiltinLtl::Eventually(p) => {
                Self::deterministic(props, 2, 0, &[1], |q, l| if q == 1 || holds(&p, l) { 1 } else { 0 })
            }
            BuiltinLtl::Always(p) => {
                Self::deterministic(props, 2, 0, &[0], |q, l| if q == 0 && holds(&p, l) { 0 } else { 1 })
            }
            BuiltinLtl::InfinitelyOften(p) => {
                Self::deterministic(props, 2, 0, &[1], |_, l| if holds(&p, l) { 1 } else { 0 })
            }
        };
        aut.ok()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn propositions(&self) -> &[String] {
        &self.propositions
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting(&self) -> &[bool] {
        &self.accepting
    }

    pub fn num_labels(&self) -> usize {
        1 << self.propositions.len()
    }

    pub fn successors(&self, q: usize, label: LabelSet) -> &[usize] {
        &self.edges[(q << self.propositions.len()) | label as usize]
    }

    pub fn is_deterministic(&self) -> bool {
        self.edges.iter().all(|t| t.len() == 1)
    }

    /// Largest number of successors of any `(state, label)`.
    pub fn max_branching(&self) -> usize {
        self.edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Successor of a deterministic automaton.
    pub fn next(&self, q: usize, label: LabelSet) -> usize {
        self.successors(q, label)[0]
    }

    /// Acceptance of a lasso word by a deterministic automaton.
    pub fn accepts_lasso(&self, word: &LassoWord) -> Result<bool> {
        if !self.is_deterministic() {
            return Err(Error::Unsupported("lasso acceptance needs a deterministic automaton".into()));
        }
        let mut q = self.initial;
        for &l in &word.prefix {
            q = self.next(q, l);
        }
        let mut starts = Vec::new();
        loop {
            if let Some(pos) = starts.iter().position(|&s| s == q) {
                // Replay the periodic passes and look for an accepting state.
                let mut r = starts[pos];
                for _ in pos..starts.len() {
                    for &l in &word.cycle {
                        r = self.next(r, l);
                        if self.accepting[r] {
                            return Ok(true);
                        }
                    }
                }
                return Ok(false);
            }
            starts.push(q);
            for &l in &word.cycle {
                q = self.next(q, l);
            }
        }
    }
}
