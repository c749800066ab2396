//! JSON documents for MDPs, machines, automata, specifications, reduction
//! descriptors and reduction reports.
//!
//! Floats are written by `serde_json` in shortest round-trip form, so
//! save/load cycles reproduce tables bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Discount, LabelSet, Mdp};
use crate::reduce::{validate_reduction, PreservationReport, ReductionDescriptor, ReductionViolation};
use crate::refute::SweepPoint;
use crate::spec::{parse_ltl, AbstractRewardMachine, BuchiAutomaton, Machine, RewardMachine, Specification};

fn names_of(props: &[String], label: LabelSet) -> Vec<String> {
    props.iter().enumerate().filter(|&(j, _)| label >> j & 1 == 1).map(|(_, p)| p.clone()).collect()
}

fn mask_of(props: &[String], names: &[String]) -> Result<LabelSet> {
    names.iter().try_fold(0, |acc, name| {
        props
            .iter()
            .position(|p| p == name)
            .map(|j| acc | 1 << j)
            .ok_or_else(|| Error::UnknownProposition(name.clone()))
    })
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

fn render<T: Serialize>(doc: &T) -> String {
    serde_json::to_string_pretty(doc).expect("documents always serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub from: usize,
    pub action: usize,
    pub to: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDoc {
    pub propositions: Vec<String>,
    pub states: usize,
    pub initial: usize,
    pub actions: Vec<String>,
    pub labels: Vec<Vec<String>>,
    pub transitions: Vec<TransitionDoc>,
}

impl MdpDoc {
    pub fn from_mdp(mdp: &Mdp<f64>) -> Self {
        let props = mdp.propositions().to_vec();
        let mut transitions = Vec::new();
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                for &(to, prob) in mdp.row(s, a) {
                    transitions.push(TransitionDoc { from: s, action: a, to, prob });
                }
            }
        }
        Self {
            labels: (0..mdp.num_states()).map(|s| names_of(&props, mdp.label(s))).collect(),
            propositions: props,
            states: mdp.num_states(),
            initial: mdp.initial(),
            actions: mdp.action_names().to_vec(),
            transitions,
        }
    }

    /// Assembles the MDP without checking stochasticity, so that callers can
    /// report every violation. Structural problems (indices out of range,
    /// repeated triples, unknown propositions) are still errors.
    pub fn to_mdp_unchecked(&self) -> Result<Mdp<f64>> {
        let (n, m) = (self.states, self.actions.len());
        if self.labels.len() != n {
            return Err(Error::InvalidParameter(format!("{} label sets for {n} states", self.labels.len())));
        }
        let labels = self.labels.iter().map(|l| mask_of(&self.propositions, l)).collect::<Result<Vec<_>>>()?;
        let mut rows = vec![Vec::new(); n * m];
        let mut seen = std::collections::HashSet::new();
        for t in &self.transitions {
            if t.from >= n || t.to >= n {
                return Err(Error::StateOutOfRange { state: t.from.max(t.to), num_states: n });
            }
            if t.action >= m {
                return Err(Error::ActionOutOfRange { action: t.action, num_actions: m });
            }
            if !seen.insert((t.from, t.action, t.to)) {
                return Err(Error::InvalidParameter(format!(
                    "transition ({}, {}, {}) listed twice",
                    t.from, t.action, t.to
                )));
            }
            rows[t.from * m + t.action].push((t.to, t.prob));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
        }
        Ok(Mdp::from_parts_unchecked(n, m, self.initial, self.propositions.clone(), labels, rows)
            .with_action_names(self.actions.clone()))
    }

    pub fn to_mdp(&self) -> Result<Mdp<f64>> {
        let raw = self.to_mdp_unchecked()?;
        let names = raw.action_names().to_vec();
        Ok(Mdp::new(
            raw.num_states(),
            raw.num_actions(),
            raw.initial(),
            raw.propositions().to_vec(),
            raw.labels().to_vec(),
            raw.rows().to_vec(),
        )?
        .with_action_names(names))
    }
}

pub fn mdp_to_json(mdp: &Mdp<f64>) -> String {
    render(&MdpDoc::from_mdp(mdp))
}

/// Parses and validates an MDP document.
pub fn mdp_from_json(text: &str) -> Result<Mdp<f64>> {
    parse::<MdpDoc>(text)?.to_mdp()
}

/// What a machine entry applies to. Label sets are exact; a missing `on`
/// matches everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OnDoc {
    Label(Vec<String>),
    /// State machines: `state` is the successor MDP state, `from` and
    /// `action` optionally restrict the source and action.
    Transition {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateDoc {
    pub from: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on: Option<OnDoc>,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardDoc {
    pub at: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on: Option<OnDoc>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MachineKind {
    Arm,
    Rm,
}

/// Entries are applied in order, later ones overriding earlier ones.
/// Unlisted updates are self-loops and unlisted rewards are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineDoc {
    pub states: usize,
    pub initial: usize,
    pub kind: MachineKind,
    /// Abstract machines: the propositions labels refer to.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub propositions: Vec<String>,
    /// State machines: the MDP state and action counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp_states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp_actions: Option<usize>,
    pub update: Vec<UpdateDoc>,
    pub rewards: Vec<RewardDoc>,
    #[serde(default)]
    pub normalized: bool,
}

impl MachineDoc {
    pub fn from_machine(machine: &Machine<f64>) -> Self {
        match machine {
            Machine::Abstract(arm) => {
                let props = arm.propositions().to_vec();
                let mut update = Vec::new();
                let mut rewards = Vec::new();
                for u in 0..arm.num_states() {
                    for l in 0..arm.num_labels() as LabelSet {
                        let on = Some(OnDoc::Label(names_of(&props, l)));
                        if arm.next(u, l) != u {
                            update.push(UpdateDoc { from: u, on: on.clone(), to: arm.next(u, l) });
                        }
                        if arm.reward(u, l) != 0.0 {
                            rewards.push(RewardDoc { at: u, on, value: arm.reward(u, l) });
                        }
                    }
                }
                Self {
                    states: arm.num_states(),
                    initial: arm.initial(),
                    kind: MachineKind::Arm,
                    propositions: props,
                    mdp_states: None,
                    mdp_actions: None,
                    update,
                    rewards,
                    normalized: arm.is_normalized(),
                }
            }
            Machine::State(rm) => {
                let (n, m) = (rm.num_mdp_states(), rm.num_actions());
                let mut update = Vec::new();
                let mut rewards = Vec::new();
                for u in 0..rm.num_states() {
                    for t in 0..n {
                        if rm.next(u, t) != u {
                            let on = Some(OnDoc::Transition { from: None, action: None, state: Some(t) });
                            update.push(UpdateDoc { from: u, on, to: rm.next(u, t) });
                        }
                    }
                    for s in 0..n {
                        for a in 0..m {
                            for t in 0..n {
                                let value = rm.reward(u, s, a, t);
                                if value != 0.0 {
                                    let on = Some(OnDoc::Transition { from: Some(s), action: Some(a), state: Some(t) });
                                    rewards.push(RewardDoc { at: u, on, value });
                                }
                            }
                        }
                    }
                }
                Self {
                    states: rm.num_states(),
                    initial: rm.initial(),
                    kind: MachineKind::Rm,
                    propositions: Vec::new(),
                    mdp_states: Some(n),
                    mdp_actions: Some(m),
                    update,
                    rewards,
                    normalized: rm.is_normalized(),
                }
            }
        }
    }

    fn check_machine_state(&self, u: usize) -> Result<()> {
        if u >= self.states {
            return Err(Error::InvalidMachine(format!("machine state {u} out of range")));
        }
        Ok(())
    }

    pub fn to_machine(&self) -> Result<Machine<f64>> {
        let k = self.states;
        match self.kind {
            MachineKind::Arm => {
                let width = 1usize << self.propositions.len().min(crate::spec::machine::MAX_TABLE_PROPOSITIONS + 1);
                let mut update: Vec<usize> = (0..k * width).map(|i| i / width).collect();
                let mut rewards = vec![0.0; k * width];
                let labels = |on: &Option<OnDoc>| -> Result<Vec<usize>> {
                    match on {
                        None => Ok((0..width).collect()),
                        Some(OnDoc::Label(names)) => Ok(vec![mask_of(&self.propositions, names)? as usize]),
                        Some(OnDoc::Transition { .. }) => {
                            Err(Error::InvalidMachine("abstract machines match label sets".into()))
                        }
                    }
                };
                for e in &self.update {
                    self.check_machine_state(e.from)?;
                    for l in labels(&e.on)? {
                        update[e.from * width + l] = e.to;
                    }
                }
                for e in &self.rewards {
                    self.check_machine_state(e.at)?;
                    for l in labels(&e.on)? {
                        rewards[e.at * width + l] = e.value;
                    }
                }
                let arm = AbstractRewardMachine::new(self.propositions.clone(), k, self.initial, update, rewards, self.normalized)?;
                Ok(Machine::Abstract(arm))
            }
            MachineKind::Rm => {
                let (Some(n), Some(m)) = (self.mdp_states, self.mdp_actions) else {
                    return Err(Error::InvalidMachine("state machines need mdp_states and mdp_actions".into()));
                };
                let pick = |x: Option<usize>, bound: usize| -> Result<Vec<usize>> {
                    match x {
                        None => Ok((0..bound).collect()),
                        Some(v) if v < bound => Ok(vec![v]),
                        Some(v) => Err(Error::InvalidMachine(format!("index {v} out of range"))),
                    }
                };
                let parts = |on: &Option<OnDoc>| -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
                    match on {
                        None => Ok(((0..n).collect(), (0..m).collect(), (0..n).collect())),
                        Some(OnDoc::Transition { from, action, state }) => {
                            Ok((pick(*from, n)?, pick(*action, m)?, pick(*state, n)?))
                        }
                        Some(OnDoc::Label(_)) => {
                            Err(Error::InvalidMachine("state machines match MDP transitions".into()))
                        }
                    }
                };
                let mut update: Vec<usize> = (0..k * n).map(|i| i / n).collect();
                let mut rewards = vec![0.0; k * n * m * n];
                for e in &self.update {
                    self.check_machine_state(e.from)?;
                    let (froms, actions, succ) = parts(&e.on)?;
                    if froms.len() != n || actions.len() != m {
                        return Err(Error::InvalidMachine("updates depend on the successor state only".into()));
                    }
                    for t in succ {
                        update[e.from * n + t] = e.to;
                    }
                }
                for e in &self.rewards {
                    self.check_machine_state(e.at)?;
                    let (froms, actions, succ) = parts(&e.on)?;
                    for &s in &froms {
                        for &a in &actions {
                            for &t in &succ {
                                rewards[((e.at * n + s) * m + a) * n + t] = e.value;
                            }
                        }
                    }
                }
                Ok(Machine::State(RewardMachine::new(k, self.initial, n, m, update, rewards, self.normalized)?))
            }
        }
    }
}

pub fn machine_to_json(machine: &Machine<f64>) -> String {
    render(&MachineDoc::from_machine(machine))
}

pub fn machine_from_json(text: &str) -> Result<Machine<f64>> {
    parse::<MachineDoc>(text)?.to_machine()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on: Option<Vec<String>>,
    pub to: Vec<usize>,
}

/// Edges accumulate: the successors of `(q, label)` are the union over all
/// matching entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuchiDoc {
    pub propositions: Vec<String>,
    pub states: usize,
    pub initial: usize,
    pub accepting: Vec<usize>,
    pub edges: Vec<EdgeDoc>,
}

impl BuchiDoc {
    pub fn from_automaton(aut: &BuchiAutomaton) -> Self {
        let props = aut.propositions().to_vec();
        let mut edges = Vec::new();
        for q in 0..aut.num_states() {
            for l in 0..aut.num_labels() as LabelSet {
                let to = aut.successors(q, l).to_vec();
                if !to.is_empty() {
                    edges.push(EdgeDoc { from: q, on: Some(names_of(&props, l)), to });
                }
            }
        }
        Self {
            states: aut.num_states(),
            initial: aut.initial(),
            accepting: (0..aut.num_states()).filter(|&q| aut.is_accepting(q)).collect(),
            propositions: props,
            edges,
        }
    }

    pub fn to_automaton(&self) -> Result<BuchiAutomaton> {
        let width = 1usize << self.propositions.len().min(crate::spec::machine::MAX_TABLE_PROPOSITIONS + 1);
        let mut table = vec![Vec::new(); self.states * width];
        for e in &self.edges {
            if e.from >= self.states {
                return Err(Error::InvalidAutomaton(format!("state {} out of range", e.from)));
            }
            let labels: Vec<usize> = match &e.on {
                None => (0..width).collect(),
                Some(names) => vec![mask_of(&self.propositions, names)? as usize],
            };
            for l in labels {
                table[e.from * width + l].extend_from_slice(&e.to);
            }
        }
        let mut accepting = vec![false; self.states];
        for &q in &self.accepting {
            *accepting
                .get_mut(q)
                .ok_or_else(|| Error::InvalidAutomaton(format!("accepting state {q} out of range")))? = true;
        }
        BuchiAutomaton::new(self.propositions.clone(), self.states, self.initial, accepting, table)
    }
}

pub fn buchi_to_json(aut: &BuchiAutomaton) -> String {
    render(&BuchiDoc::from_automaton(aut))
}

pub fn buchi_from_json(text: &str) -> Result<BuchiAutomaton> {
    parse::<BuchiDoc>(text)?.to_automaton()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecDoc {
    Reach { props: Vec<String> },
    Safe { props: Vec<String> },
    Ltl {
        formula: String,
        /// Propositions the formula refers to; defaults to those of the
        /// model it is evaluated on.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        propositions: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        automaton: Option<BuchiDoc>,
    },
    Discounted { machine: MachineDoc, gamma: Discount<f64> },
    LimitAverage { machine: MachineDoc },
}

impl SpecDoc {
    pub fn from_spec(spec: &Specification<f64>) -> Self {
        match spec {
            Specification::Reach(p) => SpecDoc::Reach { props: p.clone() },
            Specification::Safe(p) => SpecDoc::Safe { props: p.clone() },
            Specification::Ltl { formula, automaton } => SpecDoc::Ltl {
                formula: formula.to_string(),
                propositions: Some(formula.propositions.clone()),
                automaton: automaton.as_ref().map(BuchiDoc::from_automaton),
            },
            Specification::DiscountedRm { machine, gamma } => {
                SpecDoc::Discounted { machine: MachineDoc::from_machine(machine), gamma: gamma.clone() }
            }
            Specification::LimitAvgRm { machine } => SpecDoc::LimitAverage { machine: MachineDoc::from_machine(machine) },
        }
    }

    /// `propositions` resolves LTL formulas without their own list.
    pub fn to_spec(&self, propositions: &[String]) -> Result<Specification<f64>> {
        Ok(match self {
            SpecDoc::Reach { props } => Specification::Reach(props.clone()),
            SpecDoc::Safe { props } => Specification::Safe(props.clone()),
            SpecDoc::Ltl { formula, propositions: own, automaton } => Specification::Ltl {
                formula: parse_ltl(formula, own.as_deref().unwrap_or(propositions))?,
                automaton: automaton.as_ref().map(BuchiDoc::to_automaton).transpose()?,
            },
            SpecDoc::Discounted { machine, gamma } => {
                Specification::DiscountedRm { machine: machine.to_machine()?, gamma: gamma.clone() }
            }
            SpecDoc::LimitAverage { machine } => Specification::LimitAvgRm { machine: machine.to_machine()? },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDoc {
    pub from: usize,
    pub action: usize,
    pub to: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDoc {
    pub from: usize,
    pub action: usize,
    pub base_action: usize,
    pub to: usize,
    pub weight: f64,
}

/// Explicit tables of a reduction descriptor. `alpha` has one row per
/// `(s̄, ā)` in row-major order; `q1` and `q2` list their nonzero entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorDoc {
    pub propositions: Vec<String>,
    pub states: usize,
    pub initial: usize,
    pub actions: Vec<String>,
    pub labels: Vec<Vec<String>>,
    pub base_actions: usize,
    pub beta: Vec<usize>,
    pub alpha: Vec<Vec<f64>>,
    pub q1: Vec<JumpDoc>,
    pub q2: Vec<BranchDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_out: Option<SpecDoc>,
}

impl DescriptorDoc {
    pub fn from_descriptor(rd: &ReductionDescriptor<f64>) -> Self {
        let (na, nb) = (rd.num_actions, rd.base_actions);
        let mut q1 = Vec::new();
        let mut q2 = Vec::new();
        for s in 0..rd.num_states {
            for a in 0..na {
                for &(to, mass) in rd.q1_row(s, a) {
                    q1.push(JumpDoc { from: s, action: a, to, mass });
                }
                for b in 0..nb {
                    for &(to, weight) in &rd.q2[(s * na + a) * nb + b] {
                        q2.push(BranchDoc { from: s, action: a, base_action: b, to, weight });
                    }
                }
            }
        }
        Self {
            labels: rd.labels.iter().map(|&l| names_of(&rd.propositions, l)).collect(),
            propositions: rd.propositions.clone(),
            states: rd.num_states,
            initial: rd.initial,
            actions: rd.action_names.clone(),
            base_actions: nb,
            beta: rd.beta.clone(),
            alpha: rd.alpha.clone(),
            q1,
            q2,
            spec_out: rd.spec_out.as_ref().map(SpecDoc::from_spec),
        }
    }

    /// Rebuilds the tables without validating them; see
    /// [`validate_reduction`].
    pub fn to_descriptor(&self) -> Result<ReductionDescriptor<f64>> {
        let (n, na, nb) = (self.states, self.actions.len(), self.base_actions);
        let labels = self.labels.iter().map(|l| mask_of(&self.propositions, l)).collect::<Result<Vec<_>>>()?;
        let mut q1 = vec![Vec::new(); n * na];
        let mut q2 = vec![Vec::new(); n * na * nb];
        let oob = |what: &str| Error::DescriptorCorruption(format!("{what} entry out of range"));
        for j in &self.q1 {
            if j.from >= n || j.action >= na {
                return Err(oob("q1"));
            }
            q1[j.from * na + j.action].push((j.to, j.mass));
        }
        for b in &self.q2 {
            if b.from >= n || b.action >= na || b.base_action >= nb {
                return Err(oob("q2"));
            }
            q2[(b.from * na + b.action) * nb + b.base_action].push((b.to, b.weight));
        }
        Ok(ReductionDescriptor {
            num_states: n,
            num_actions: na,
            initial: self.initial,
            propositions: self.propositions.clone(),
            labels,
            action_names: self.actions.clone(),
            base_actions: nb,
            beta: self.beta.clone(),
            alpha: self.alpha.clone(),
            q1,
            q2,
            spec_out: self.spec_out.as_ref().map(|s| s.to_spec(&self.propositions)).transpose()?,
        })
    }
}

pub fn descriptor_to_json(rd: &ReductionDescriptor<f64>) -> String {
    render(&DescriptorDoc::from_descriptor(rd))
}

pub fn descriptor_from_json(text: &str) -> Result<ReductionDescriptor<f64>> {
    parse::<DescriptorDoc>(text)?.to_descriptor()
}

/// Summary of checking one reduction descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub valid: bool,
    pub violations: Vec<String>,
    pub preserved: Option<bool>,
    /// Actions of the reduced policy that broke preservation, one per state.
    pub witness: Option<Vec<usize>>,
    #[serde(default)]
    pub sweep: Vec<SweepPoint>,
    /// Further numbers, such as values and policy counts.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl ReductionReport {
    pub fn from_violations(violations: &[ReductionViolation]) -> Self {
        Self {
            valid: violations.is_empty(),
            violations: violations.iter().map(ToString::to_string).collect(),
            preserved: None,
            witness: None,
            sweep: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn validate(rd: &ReductionDescriptor<f64>, base: &Mdp<f64>) -> Self {
        Self::from_violations(&validate_reduction(rd, &base.shape()))
    }

    pub fn with_preservation(mut self, p: &PreservationReport<f64>) -> Self {
        self.preserved = p.preserved;
        if !p.witness_optimal {
            self.witness = Some(p.witness.clone());
        }
        self.details.insert("exhaustive".into(), p.exhaustive.into());
        self.details.insert("optimal".into(), p.optimal.into());
        self.details.insert("reduced_optimal".into(), p.reduced_optimal.into());
        self.details.insert("policies_checked".into(), p.policies_checked.into());
        self.details.insert("witness_value".into(), p.witness_value.into());
        self
    }

    pub fn to_json(&self) -> String {
        render(self)
    }
}
