//! The sequential interval algorithm: the coin interval is refined by each
//! observed coin symbol, and a target symbol is emitted every time the coin
//! interval fits inside one child of the current target partition. Also
//! builds the induced algorithm tree by breadth-first expansion.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::exactnum::{format_ratio, Ratio, UnitInterval};
use crate::process::{format_symbols, ProcState, ProcessSpec};
use crate::{Error, Result};

/// Default expansion depth for algorithm trees.
pub const DEFAULT_DEPTH_LIMIT: usize = 64;
/// Default cap on simultaneously live (undecided) nodes during expansion.
pub const DEFAULT_FRONTIER_CAP: usize = 1 << 22;

/// Interval state of one generation run.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorState {
    pub coin_interval: UnitInterval,
    pub target_interval: UnitInterval,
    pub coin_prefix: Vec<usize>,
    pub emitted: Vec<usize>,
    pub n: usize,
}

impl GeneratorState {
    pub fn new(n: usize) -> Self {
        GeneratorState {
            coin_interval: UnitInterval::full(),
            target_interval: UnitInterval::full(),
            coin_prefix: Vec::new(),
            emitted: Vec::new(),
            n,
        }
    }

    /// Coin symbols consumed so far.
    pub fn coin_count(&self) -> usize {
        self.coin_prefix.len()
    }

    pub fn is_done(&self) -> bool {
        self.emitted.len() == self.n
    }
}

/// Replaces the coin interval by its x-th child under the given conditional
/// law and records the symbol. A zero-probability symbol yields an empty
/// child; rejecting such symbols is the caller's concern.
pub fn refine_coin(mut state: GeneratorState, x: usize, pmf: &[Ratio]) -> Result<GeneratorState> {
    if x >= pmf.len() {
        return Err(Error::SymbolOutOfRange(x));
    }
    let children = state.coin_interval.partition(pmf);
    state.coin_interval = children[x].clone();
    state.coin_prefix.push(x);
    Ok(state)
}

/// Result of feeding coin symbols to a generator.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    /// New target symbols were determined, but the run is not finished.
    Emitted(Vec<usize>),
    /// No symbol could be determined yet.
    NeedMoreCoins,
    /// All n symbols are out; t is the stopping time.
    Done { y: Vec<usize>, t: usize },
}

/// A generation run binding the interval state to its two models. Keeps the
/// model memory states cached so each step costs one conditional law.
#[derive(Clone)]
pub struct Generator<'a> {
    coin: &'a ProcessSpec,
    target: &'a ProcessSpec,
    state: GeneratorState,
    coin_state: ProcState,
    target_state: ProcState,
}

impl<'a> Generator<'a> {
    /// Validates both models and runs the initial emission pass (which only
    /// emits when the target law is degenerate). Both models must have
    /// rational conditional laws; the named Bernoulli families have
    /// irrational interval endpoints and are rejected.
    pub fn new(coin: &'a ProcessSpec, target: &'a ProcessSpec, n: usize) -> Result<Self> {
        coin.validate()?;
        target.validate()?;
        if !coin.has_rational_conditionals() || !target.has_rational_conditionals() {
            return Err(Error::RationalConditionalsRequired);
        }
        let mut g = Generator {
            coin,
            target,
            state: GeneratorState::new(n),
            coin_state: coin.start(),
            target_state: target.start(),
        };
        g.emit_greedy()?;
        Ok(g)
    }

    pub fn state(&self) -> &GeneratorState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.is_done()
    }

    /// Emits every target symbol already determined by the current coin
    /// interval, then stops. Returns the newly emitted symbols.
    fn emit_greedy(&mut self) -> Result<Vec<usize>> {
        let mut newly = Vec::new();
        while !self.state.is_done() {
            let pmf = self.target.state_pmf_ratios(&self.target_state)?;
            let children = self.state.target_interval.partition(&pmf);
            // A nonempty coin interval fits in at most one child; empty
            // children cannot contain it.
            let hit = children
                .iter()
                .position(|c| c.contains_interval(&self.state.coin_interval));
            match hit {
                Some(j) => {
                    self.target.advance(&mut self.target_state, j)?;
                    self.state.target_interval = children[j].clone();
                    self.state.emitted.push(j);
                    newly.push(j);
                }
                None => break,
            }
            debug_assert!(self
                .state
                .target_interval
                .contains_interval(&self.state.coin_interval));
        }
        Ok(newly)
    }

    /// Consumes one coin symbol and reports what it determined. Calling
    /// after completion returns Done again without consuming anything.
    pub fn push_coin(&mut self, x: usize) -> Result<Step> {
        if self.state.is_done() {
            return Ok(self.done_step());
        }
        if x >= self.coin.alphabet_size() {
            return Err(Error::SymbolOutOfRange(x));
        }
        let pmf = self.coin.state_pmf_ratios(&self.coin_state)?;
        if pmf[x].is_zero() {
            return Err(Error::InvalidCoinRealization);
        }
        self.state = refine_coin(self.state.clone(), x, &pmf)?;
        self.coin.advance(&mut self.coin_state, x)?;
        let newly = self.emit_greedy()?;
        if self.state.is_done() {
            Ok(self.done_step())
        } else if newly.is_empty() {
            Ok(Step::NeedMoreCoins)
        } else {
            Ok(Step::Emitted(newly))
        }
    }

    fn done_step(&self) -> Step {
        Step::Done {
            y: self.state.emitted.clone(),
            t: self.state.coin_count(),
        }
    }
}

/// Feeds coin symbols from the stream until the run completes or the stream
/// is exhausted. Reports Done, the symbols newly emitted during this call,
/// or NeedMoreCoins when nothing was determined.
pub fn step_generate(gen: &mut Generator, coin_stream: &[usize]) -> Result<Step> {
    if gen.is_done() {
        return Ok(gen.done_step());
    }
    let mut emitted = Vec::new();
    for &x in coin_stream {
        match gen.push_coin(x)? {
            Step::Done { y, t } => return Ok(Step::Done { y, t }),
            Step::Emitted(mut v) => emitted.append(&mut v),
            Step::NeedMoreCoins => {}
        }
    }
    if emitted.is_empty() {
        Ok(Step::NeedMoreCoins)
    } else {
        Ok(Step::Emitted(emitted))
    }
}

/// Outcome of a complete generation run.
#[derive(Clone, Debug, PartialEq)]
pub struct GenOutcome {
    pub y: Vec<usize>,
    pub t: usize,
    /// Coin symbols actually consumed (a prefix of the provided stream).
    pub transcript: Vec<usize>,
}

/// Runs a full generation over a finite coin stream; fails if the stream
/// ends before all n target symbols are determined.
pub fn generate(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    coin_stream: &[usize],
) -> Result<GenOutcome> {
    let mut gen = Generator::new(coin, target, n)?;
    match step_generate(&mut gen, coin_stream)? {
        Step::Done { y, t } => Ok(GenOutcome {
            y,
            t,
            transcript: gen.state().coin_prefix.clone(),
        }),
        _ => Err(Error::CoinStreamExhausted {
            emitted: gen.state().emitted.len(),
            n,
            consumed: gen.state().coin_count(),
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    /// Expanded into all M children.
    Internal,
    /// Emitted all n symbols; carries its complete output.
    Terminal,
    /// Cut by the depth limit with positive residual mass.
    Unresolved,
}

impl NodeStatus {
    fn label(self) -> &'static str {
        match self {
            NodeStatus::Internal => "internal",
            NodeStatus::Terminal => "terminal",
            NodeStatus::Unresolved => "unresolved",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub depth: usize,
    /// Coin symbols from the root.
    pub path: Vec<usize>,
    /// Target symbols emitted at this node (possibly several, possibly none).
    pub emitted: Vec<usize>,
    pub status: NodeStatus,
    /// Exact probability of the coin prefix.
    pub prob: Ratio,
    pub parent: Option<usize>,
}

/// The algorithm as a full M-ary tree, expanded breadth-first to a depth
/// limit. Node order is breadth-first with children in symbol order, so the
/// layout is deterministic.
#[derive(Clone, Debug)]
pub struct AlgorithmTree {
    pub n: usize,
    pub depth_limit: usize,
    pub coin_alphabet: usize,
    pub target_alphabet: usize,
    pub nodes: Vec<TreeNode>,
}

struct LiveNode {
    idx: usize,
    state: GeneratorState,
    coin_state: ProcState,
    target_state: ProcState,
}

/// Expands the interval algorithm for (coin, target, n) into its tree, to
/// `depth_limit` coin symbols, keeping at most `cap` undecided nodes alive.
pub fn build_tree_with_cap(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    depth_limit: usize,
    cap: usize,
) -> Result<AlgorithmTree> {
    let gen = Generator::new(coin, target, n)?;
    let m = coin.alphabet_size();
    let root_done = gen.is_done();
    let mut tree = AlgorithmTree {
        n,
        depth_limit,
        coin_alphabet: m,
        target_alphabet: target.alphabet_size(),
        nodes: vec![TreeNode {
            depth: 0,
            path: Vec::new(),
            emitted: gen.state().emitted.clone(),
            status: if root_done {
                NodeStatus::Terminal
            } else if depth_limit == 0 {
                NodeStatus::Unresolved
            } else {
                NodeStatus::Internal
            },
            prob: Ratio::one(),
            parent: None,
        }],
    };
    let mut live = Vec::new();
    if !root_done && depth_limit > 0 {
        live.push(LiveNode {
            idx: 0,
            state: gen.state.clone(),
            coin_state: gen.coin_state.clone(),
            target_state: gen.target_state.clone(),
        });
    }
    while let Some(front) = live.first().map(|l| tree.nodes[l.idx].depth) {
        if live.len() > cap {
            return Err(Error::FrontierCapExceeded);
        }
        let depth = front + 1;
        let mut next = Vec::new();
        for node in &live {
            let pmf = coin.state_pmf_ratios(&node.coin_state)?;
            for x in 0..m {
                let idx = tree.nodes.len();
                let mut path = node.state.coin_prefix.clone();
                path.push(x);
                let prob = &tree.nodes[node.idx].prob * &pmf[x];
                if pmf[x].is_zero() {
                    // Zero-mass child: complete its output by walking the
                    // degenerate point through the target partitions so the
                    // leaf still carries a full y^n.
                    let emitted = complete_zero_mass(
                        target,
                        &node.target_state,
                        &node.state,
                        x,
                        &pmf,
                    )?;
                    tree.nodes.push(TreeNode {
                        depth,
                        path,
                        emitted,
                        status: NodeStatus::Terminal,
                        prob,
                        parent: Some(node.idx),
                    });
                    continue;
                }
                let mut child = Generator {
                    coin,
                    target,
                    state: node.state.clone(),
                    coin_state: node.coin_state.clone(),
                    target_state: node.target_state.clone(),
                };
                child.push_coin(x)?;
                let newly = child.state.emitted[node.state.emitted.len()..].to_vec();
                let status = if child.is_done() {
                    NodeStatus::Terminal
                } else if depth == depth_limit {
                    NodeStatus::Unresolved
                } else {
                    NodeStatus::Internal
                };
                tree.nodes.push(TreeNode {
                    depth,
                    path,
                    emitted: newly,
                    status,
                    prob,
                    parent: Some(node.idx),
                });
                if status == NodeStatus::Internal {
                    next.push(LiveNode {
                        idx,
                        state: child.state,
                        coin_state: child.coin_state,
                        target_state: child.target_state,
                    });
                }
            }
        }
        live = next;
        if live.len() > cap {
            return Err(Error::FrontierCapExceeded);
        }
    }
    Ok(tree)
}

pub fn build_tree(
    coin: &ProcessSpec,
    target: &ProcessSpec,
    n: usize,
    depth_limit: usize,
) -> Result<AlgorithmTree> {
    build_tree_with_cap(coin, target, n, depth_limit, DEFAULT_FRONTIER_CAP)
}

/// Completes the output of a zero-mass tree child. Its interval is the
/// single point at the child's lower endpoint; we walk that point down the
/// target partitions, always through positive-probability children, until n
/// symbols stand.
fn complete_zero_mass(
    target: &ProcessSpec,
    target_state: &ProcState,
    parent: &GeneratorState,
    x: usize,
    coin_pmf: &[Ratio],
) -> Result<Vec<usize>> {
    let child = refine_coin(parent.clone(), x, coin_pmf)?;
    let point = child.coin_interval.lo().clone();
    let mut st = target_state.clone();
    let mut cell = parent.target_interval.clone();
    let mut emitted = Vec::new();
    let mut total = parent.emitted.len();
    while total < parent.n {
        let pmf = target.state_pmf_ratios(&st)?;
        let children = cell.partition(&pmf);
        let j = children
            .iter()
            .enumerate()
            .position(|(k, c)| !pmf[k].is_zero() && *c.lo() <= point && point <= *c.hi())
            .expect("positive children cover the cell");
        target.advance(&mut st, j)?;
        cell = children[j].clone();
        emitted.push(j);
        total += 1;
    }
    Ok(emitted)
}

impl AlgorithmTree {
    /// Total probability still undecided at the depth limit.
    pub fn unresolved_mass(&self) -> Ratio {
        self.nodes
            .iter()
            .filter(|n| n.status == NodeStatus::Unresolved)
            .map(|n| n.prob.clone())
            .sum()
    }

    /// Full output sequence at a node: emitted labels along the root path.
    pub fn output_at(&self, mut idx: usize) -> Vec<usize> {
        let mut rev = Vec::new();
        loop {
            let node = &self.nodes[idx];
            rev.extend(node.emitted.iter().rev().copied());
            match node.parent {
                Some(p) => idx = p,
                None => break,
            }
        }
        rev.reverse();
        rev
    }

    /// Law of the output restricted to runs that terminate within m coin
    /// symbols: exactly the mass the algorithm has committed by depth m.
    pub fn terminal_law_at(&self, m: usize) -> BTreeMap<Vec<usize>, Ratio> {
        let mut law: BTreeMap<Vec<usize>, Ratio> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.status == NodeStatus::Terminal && node.depth <= m {
                *law.entry(self.output_at(i)).or_insert_with(Ratio::zero) += &node.prob;
            }
        }
        law
    }

    pub fn terminal_law(&self) -> BTreeMap<Vec<usize>, Ratio> {
        self.terminal_law_at(self.depth_limit)
    }

    /// One line per node in breadth-first order: depth, coin path, emitted
    /// labels, status, exact probability. Symbols print 1-based.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                node.depth,
                format_symbols(&node.path, self.coin_alphabet),
                format_symbols(&node.emitted, self.target_alphabet),
                node.status.label(),
                format_ratio(&node.prob),
            );
        }
        out
    }
}
