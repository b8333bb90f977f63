//! Discrete factor graph over triplet states: seen triplets carry unary
//! beliefs, composition factors tie three triplets `(AB:C, BC:D, AB:D)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::composition::{CompositionTensor, Slot};
use crate::error::{Error, Result};
use crate::metrics::{entropy, information_score};
use crate::models::TripletId;
use crate::partition::StateVector;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const CONNECTIVITY_BINS: usize = 10;
/// Largest graph `eliminate_exact` accepts.
pub const MAX_EXACT_VARIABLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct VariableNode {
    pub id: usize,
    pub triplet: TripletId,
    pub belief: StateVector,
    pub seen: bool,
    pub updated: bool,
    pub isc: f64,
    pub tsc: f64,
    pub cl: Option<u32>,
}

/// Variables in slot order: `[AB:C, BC:D, AB:D]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompositionFactor {
    pub id: usize,
    pub variables: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphFile", try_from = "GraphFile")]
pub struct QualitativeFactorGraph {
    pub d: usize,
    pub variables: BTreeMap<usize, VariableNode>,
    /// Keyed by the id of the seen variable the factor attaches to.
    pub unary_factors: BTreeMap<usize, StateVector>,
    pub composition_factors: Vec<CompositionFactor>,
}

/// On-disk graph layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub d: usize,
    pub variables: Vec<VariableFile>,
    pub composition_factors: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableFile {
    pub id: usize,
    pub triplet: [u32; 3],
    pub seen: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tsc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cl: Option<u32>,
}

/// Outcome of one propagation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropagationReport {
    pub iterations: usize,
    /// Variables in commit order.
    pub committed: Vec<usize>,
}

impl From<QualitativeFactorGraph> for GraphFile {
    fn from(g: QualitativeFactorGraph) -> Self {
        g.to_file()
    }
}

impl TryFrom<GraphFile> for QualitativeFactorGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        Self::from_file(&file)
    }
}

struct Candidate<T> {
    score: f64,
    receivers: Vec<(usize, T)>,
    factor: usize,
}

impl<T> Candidate<T> {
    fn first_receiver(&self) -> usize {
        self.receivers.iter().map(|r| r.0).min().unwrap_or(usize::MAX)
    }

    /// Higher score wins (or lower when `prefer_low`); ties go to the lowest
    /// receiver id, then the lowest factor index.
    fn beats(&self, other: &Self, prefer_low: bool) -> bool {
        let ord = if prefer_low {
            other.score.total_cmp(&self.score)
        } else {
            self.score.total_cmp(&other.score)
        };
        ord.then_with(|| other.first_receiver().cmp(&self.first_receiver()))
            .then_with(|| other.factor.cmp(&self.factor))
            .is_gt()
    }
}

impl QualitativeFactorGraph {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            variables: BTreeMap::new(),
            unary_factors: BTreeMap::new(),
            composition_factors: Vec::new(),
        }
    }

    /// Adds an unseen variable with a uniform belief.
    pub fn add_variable(&mut self, id: usize, triplet: TripletId) -> Result<()> {
        if self.variables.contains_key(&id) {
            return Err(Error::InvalidArgument(format!("duplicate variable id {id}")));
        }
        self.variables.insert(
            id,
            VariableNode {
                id,
                triplet,
                belief: StateVector::uniform(self.d),
                seen: false,
                updated: false,
                isc: 0.0,
                tsc: 0.0,
                cl: None,
            },
        );
        Ok(())
    }

    /// Attaches a unary factor and marks the variable seen.
    pub fn set_unary(&mut self, id: usize, belief: StateVector) -> Result<()> {
        if belief.len() != self.d {
            return Err(Error::InvalidArgument(format!(
                "belief of length {} in a graph of dimension {}",
                belief.len(),
                self.d
            )));
        }
        let var = self
            .variables
            .get_mut(&id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variable {id}")))?;
        let belief = belief.normalized();
        var.seen = true;
        var.isc = information_score(&belief);
        var.belief = belief.clone();
        self.unary_factors.insert(id, belief);
        Ok(())
    }

    /// Marks a variable seen without a belief yet (uniform unary).
    pub fn mark_seen(&mut self, id: usize) -> Result<()> {
        self.set_unary(id, StateVector::uniform(self.d))
    }

    pub fn add_factor(&mut self, variables: [usize; 3]) -> Result<usize> {
        for v in variables {
            if !self.variables.contains_key(&v) {
                return Err(Error::InvalidArgument(format!("factor references unknown variable {v}")));
            }
        }
        if variables[0] == variables[1] || variables[1] == variables[2] || variables[0] == variables[2] {
            return Err(Error::InvalidArgument(format!("factor {variables:?} repeats a variable")));
        }
        let id = self.composition_factors.len();
        self.composition_factors.push(CompositionFactor { id, variables });
        Ok(id)
    }

    pub fn seen_ids(&self) -> Vec<usize> {
        self.variables.values().filter(|v| v.seen).map(|v| v.id).collect()
    }

    pub fn unseen_ids(&self) -> Vec<usize> {
        self.variables.values().filter(|v| !v.seen).map(|v| v.id).collect()
    }

    /// Variable id of an ordered triplet, if present.
    pub fn find(&self, triplet: TripletId) -> Option<usize> {
        self.variables.values().find(|v| v.triplet == triplet).map(|v| v.id)
    }

    pub fn from_file(file: &GraphFile) -> Result<Self> {
        if file.d == 0 {
            return Err(Error::InvalidArgument("graph dimension must be positive".into()));
        }
        let mut g = Self::new(file.d);
        for v in &file.variables {
            g.add_variable(v.id, (v.triplet[0], v.triplet[1], v.triplet[2]))?;
        }
        for v in &file.variables {
            if v.seen {
                match &v.belief {
                    Some(b) => g.set_unary(v.id, StateVector::new(b.clone()))?,
                    None => g.mark_seen(v.id)?,
                }
            } else if let Some(b) = &v.belief {
                let node = g.variables.get_mut(&v.id).expect("just added");
                if b.len() != file.d {
                    return Err(Error::InvalidArgument(format!("variable {} belief has wrong length", v.id)));
                }
                node.belief = StateVector::new(b.clone()).normalized();
                node.isc = information_score(&node.belief);
            }
            let node = g.variables.get_mut(&v.id).expect("just added");
            node.tsc = v.tsc.unwrap_or(node.tsc);
            node.cl = v.cl;
        }
        for f in &file.composition_factors {
            g.add_factor(*f)?;
        }
        Ok(g)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            d: self.d,
            variables: self
                .variables
                .values()
                .map(|v| VariableFile {
                    id: v.id,
                    triplet: [v.triplet.0, v.triplet.1, v.triplet.2],
                    seen: v.seen,
                    belief: Some(v.belief.values.clone()),
                    isc: Some(v.isc),
                    tsc: Some(v.tsc),
                    cl: v.cl,
                })
                .collect(),
            composition_factors: self.composition_factors.iter().map(|f| f.variables).collect(),
        }
    }

    pub fn from_json_str(source_name: &str, text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::from_json(source_name, e))?;
        Self::from_file(&file)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Label-correcting schedule shared by the propagation algorithms.
    /// `start` holds the values of the initially updated variables; `eval`
    /// produces the candidate of one open factor. Each round commits the
    /// single best candidate and closes its factor.
    fn schedule<T: Clone>(
        &self,
        start: BTreeMap<usize, T>,
        prefer_low: bool,
        mut eval: impl FnMut(&CompositionFactor, &BTreeMap<usize, T>) -> Result<Option<Candidate<T>>>,
    ) -> Result<(BTreeMap<usize, T>, PropagationReport)> {
        let mut values = start;
        let mut closed = vec![false; self.composition_factors.len()];
        let mut report = PropagationReport::default();
        loop {
            let mut best: Option<Candidate<T>> = None;
            for (n, f) in self.composition_factors.iter().enumerate() {
                if closed[n] {
                    continue;
                }
                let known = f.variables.iter().filter(|v| values.contains_key(v)).count();
                if known == 0 {
                    continue;
                }
                if known == 3 {
                    closed[n] = true;
                    continue;
                }
                if let Some(c) = eval(f, &values)? {
                    let c = Candidate { factor: n, ..c };
                    if best.as_ref().is_none_or(|b| c.beats(b, prefer_low)) {
                        best = Some(c);
                    }
                }
            }
            let Some(best) = best else {
                break;
            };
            closed[best.factor] = true;
            report.iterations += 1;
            for (id, value) in best.receivers {
                report.committed.push(id);
                values.insert(id, value);
            }
        }
        Ok((values, report))
    }

    /// Composition-based propagation of beliefs from seen to unseen
    /// variables. Unreached unseen variables end uniform with zero score.
    pub fn propagate(&mut self, tensor: &CompositionTensor) -> Result<PropagationReport> {
        if tensor.d != self.d {
            return Err(Error::InvalidArgument(format!(
                "tensor dimension {} does not match graph dimension {}",
                tensor.d, self.d
            )));
        }
        let start: BTreeMap<usize, StateVector> =
            self.unary_factors.iter().map(|(id, b)| (*id, b.clone())).collect();
        let uniform = StateVector::uniform(self.d);
        let (beliefs, report) = self.schedule(start, false, |f, known| {
            let receivers: Vec<usize> = (0..3).filter(|s| !known.contains_key(&f.variables[*s])).collect();
            let mut out = Vec::new();
            for &s in &receivers {
                let others: Vec<&StateVector> = (0..3)
                    .filter(|o| *o != s)
                    .map(|o| known.get(&f.variables[o]).unwrap_or(&uniform))
                    .collect();
                let m = tensor.marginal_for(Slot::ALL[s], others[0], others[1])?;
                out.push((f.variables[s], m.state));
            }
            let score = out.iter().map(|(_, b)| information_score(b)).sum::<f64>() / out.len() as f64;
            Ok(Some(Candidate {
                score,
                receivers: out,
                factor: 0,
            }))
        })?;
        for var in self.variables.values_mut() {
            match beliefs.get(&var.id) {
                Some(b) => {
                    var.belief = b.clone();
                    var.updated = true;
                }
                None => {
                    var.belief = StateVector::uniform(self.d);
                    var.updated = false;
                }
            }
            var.isc = information_score(&var.belief);
        }
        Ok(report)
    }

    fn numeric_schedule(
        &self,
        start: BTreeMap<usize, f64>,
        prefer_low: bool,
        one: impl Fn(f64) -> f64,
        two: impl Fn(f64, f64) -> f64,
    ) -> Result<BTreeMap<usize, f64>> {
        let (values, _) = self.schedule(start, prefer_low, |f, known| {
            let src: Vec<f64> = f.variables.iter().filter_map(|v| known.get(v).copied()).collect();
            let value = match src.as_slice() {
                [a] => one(*a),
                [a, b] => two(*a, *b),
                _ => return Ok(None),
            };
            let receivers = f
                .variables
                .iter()
                .filter(|v| !known.contains_key(v))
                .map(|v| (*v, value))
                .collect();
            Ok(Some(Candidate {
                score: value,
                receivers,
                factor: 0,
            }))
        })?;
        Ok(values)
    }

    /// Topology score of every variable under the information-decay model.
    /// Seen variables start at their information score, or at 1 when
    /// `selection` is set.
    pub fn topology_score(&mut self, alpha: f64, selection: bool) -> Result<()> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let start = self
            .variables
            .values()
            .filter(|v| v.seen)
            .map(|v| (v.id, if selection { 1.0 } else { v.isc }))
            .collect();
        let values = self.numeric_schedule(
            start,
            false,
            |a| (1.0 - alpha) * a,
            |a, b| (1.0 - alpha * alpha) * 0.5 * (a + b),
        )?;
        for var in self.variables.values_mut() {
            var.tsc = values.get(&var.id).copied().unwrap_or(0.0);
        }
        Ok(())
    }

    /// Composition level: hops from the seen set, `min + 1` when a factor
    /// has two updated sources. Unreached variables get `None`.
    pub fn composition_level(&mut self) -> Result<()> {
        let start = self.variables.values().filter(|v| v.seen).map(|v| (v.id, 0.0)).collect();
        let values = self.numeric_schedule(start, true, |a| a + 1.0, |a, b| a.min(b) + 1.0)?;
        for var in self.variables.values_mut() {
            var.cl = values.get(&var.id).map(|c| *c as u32);
        }
        Ok(())
    }

    /// `1 - cl / cl_max` per variable; unreached variables score 0.
    pub fn normalized_composition_level(&self) -> BTreeMap<usize, f64> {
        let max = self.variables.values().filter_map(|v| v.cl).max().unwrap_or(0);
        self.variables
            .values()
            .map(|v| {
                let s = match v.cl {
                    Some(_) if max == 0 => 1.0,
                    Some(c) => 1.0 - c as f64 / max as f64,
                    None => 0.0,
                };
                (v.id, s)
            })
            .collect()
    }

    /// Entropy of the 10-bin histogram of the current topology scores.
    pub fn connectivity_score(&self) -> f64 {
        let mut hist = vec![0.0; CONNECTIVITY_BINS];
        for v in self.variables.values() {
            let bin = ((v.tsc * CONNECTIVITY_BINS as f64).floor().max(0.0) as usize).min(CONNECTIVITY_BINS - 1);
            hist[bin] += 1.0;
        }
        let state = StateVector::new(hist);
        if state.sum() == 0.0 {
            return 0.0;
        }
        entropy(&state.normalized())
    }

    /// Exact marginals of the product of all unary and composition factors,
    /// by depth-first enumeration of the joint with zero pruning.
    pub fn eliminate_exact(&self, tensor: &CompositionTensor) -> Result<BTreeMap<usize, StateVector>> {
        let n = self.variables.len();
        if n > MAX_EXACT_VARIABLES {
            return Err(Error::SizeLimit(format!(
                "exact elimination supports at most {MAX_EXACT_VARIABLES} variables, got {n}"
            )));
        }
        if tensor.d != self.d {
            return Err(Error::InvalidArgument("tensor and graph dimensions differ".into()));
        }
        let ids: Vec<usize> = self.variables.keys().copied().collect();
        let pos: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(p, id)| (*id, p)).collect();
        let unary: Vec<Option<&StateVector>> = ids.iter().map(|id| self.unary_factors.get(id)).collect();
        // Factors become checkable once their last variable is assigned.
        let mut ready: Vec<Vec<[usize; 3]>> = vec![Vec::new(); n];
        for f in &self.composition_factors {
            let p = f.variables.map(|v| pos[&v]);
            ready[*p.iter().max().expect("three slots")].push(p);
        }
        let mut acc = vec![vec![0.0; self.d]; n];
        let mut assign = vec![0usize; n];
        enumerate(0, 1.0, &mut assign, &unary, &ready, tensor, &mut acc);
        Ok(ids
            .iter()
            .zip(acc)
            .map(|(id, m)| (*id, StateVector::new(m).normalized()))
            .collect())
    }

    /// Variables reachable from the seen set through composition factors.
    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut reached: BTreeSet<usize> = self.seen_ids().into_iter().collect();
        loop {
            let before = reached.len();
            for f in &self.composition_factors {
                if f.variables.iter().any(|v| reached.contains(v)) {
                    reached.extend(f.variables);
                }
            }
            if reached.len() == before {
                return reached;
            }
        }
    }
}

fn enumerate(
    depth: usize,
    weight: f64,
    assign: &mut [usize],
    unary: &[Option<&StateVector>],
    ready: &[Vec<[usize; 3]>],
    tensor: &CompositionTensor,
    acc: &mut [Vec<f64>],
) {
    if depth == assign.len() {
        for (p, a) in assign.iter().enumerate() {
            acc[p][*a] += weight;
        }
        return;
    }
    for s in 0..tensor.d {
        let mut w = weight * unary[depth].map_or(1.0, |u| u.values[s]);
        if w == 0.0 {
            continue;
        }
        assign[depth] = s;
        for f in &ready[depth] {
            w *= tensor.get(assign[f[0]] + 1, assign[f[1]] + 1, assign[f[2]] + 1).expect("in range");
            if w == 0.0 {
                break;
            }
        }
        if w > 0.0 {
            enumerate(depth + 1, w, assign, unary, ready, tensor, acc);
        }
    }
}
