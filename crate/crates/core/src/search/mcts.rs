use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{mutate, random_tree, SearchSpace};
use super::{better, Budget, Candidate, Evaluator, OperatorSet, ParetoArchive, SearchError, SearchResult};
use crate::dataset::Dataset;
use crate::eic::EicConfig;
use crate::fitting::FitnessConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub ucb_c: f64,
    pub max_children: usize,
    /// Iterations or seconds.
    pub budget: Budget,
    pub max_nodes: usize,
    pub seed: u64,
    pub operators: OperatorSet,
    pub fitness_cfg: FitnessConfig,
    pub eic_cfg: EicConfig,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            ucb_c: std::f64::consts::SQRT_2,
            max_children: 16,
            budget: Budget::Steps(2000),
            max_nodes: 50,
            seed: 0,
            operators: OperatorSet::default(),
            fitness_cfg: FitnessConfig::default().with_alpha(FitnessConfig::MCTS_ALPHA),
            eic_cfg: EicConfig::default(),
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.ucb_c >= 0.0) {
            return Err(SearchError::InvalidConfig("ucb_c must be non-negative".into()));
        }
        if self.max_children == 0 {
            return Err(SearchError::InvalidConfig("max_children must be at least 1".into()));
        }
        if self.max_nodes < 3 {
            return Err(SearchError::InvalidConfig("max_nodes must be at least 3".into()));
        }
        self.fitness_cfg
            .validate()
            .map_err(|e| SearchError::InvalidConfig(e.to_string()))?;
        self.eic_cfg
            .validate()
            .map_err(|e| SearchError::InvalidConfig(e.to_string()))?;
        self.budget.check()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MctsNode {
    pub candidate: Candidate,
    pub visits: u64,
    pub total_reward: f64,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

impl MctsNode {
    pub fn mean_reward(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total_reward / self.visits as f64
        }
    }
}

/// Arena-allocated search tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MctsTree {
    nodes: Vec<MctsNode>,
}

impl MctsTree {
    pub fn new(root: Candidate) -> Self {
        MctsTree {
            nodes: vec![MctsNode {
                candidate: root,
                visits: 0,
                total_reward: 0.0,
                children: Vec::new(),
                parent: None,
            }],
        }
    }

    pub fn nodes(&self) -> &[MctsNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &MctsNode {
        &self.nodes[i]
    }

    pub fn root(&self) -> &MctsNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an unvisited child and returns its index.
    pub fn add_child(&mut self, parent: usize, candidate: Candidate) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(MctsNode {
            candidate,
            visits: 0,
            total_reward: 0.0,
            children: Vec::new(),
            parent: Some(parent),
        });
        self.nodes[parent].children.push(idx);
        idx
    }

    /// UCB score of `child`; `+inf` while unvisited.
    pub fn ucb(&self, child: usize, c: f64) -> f64 {
        let node = &self.nodes[child];
        if node.visits == 0 {
            return f64::INFINITY;
        }
        let parent_visits = node.parent.map_or(node.visits, |p| self.nodes[p].visits) as f64;
        let explore = if parent_visits > 1.0 {
            (parent_visits.ln() / node.visits as f64).sqrt()
        } else {
            0.0
        };
        node.mean_reward() + c * explore
    }

    /// Highest-UCB child, first one on ties.
    pub fn select_child(&self, i: usize, c: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &ch in &self.nodes[i].children {
            let score = self.ucb(ch, c);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((ch, score));
            }
        }
        best.map(|(ch, _)| ch)
    }

    /// Descends through fully expanded nodes to the one to expand next.
    pub fn select_leaf(&self, c: f64, max_children: usize) -> usize {
        let mut i = 0;
        while self.nodes[i].children.len() >= max_children {
            match self.select_child(i, c) {
                Some(ch) => i = ch,
                None => break,
            }
        }
        i
    }

    /// Adds one visit and `reward` to `from` and each of its ancestors.
    pub fn backpropagate(&mut self, from: usize, reward: f64) {
        let mut cur = Some(from);
        while let Some(i) = cur {
            let node = &mut self.nodes[i];
            node.visits += 1;
            node.total_reward += reward;
            cur = node.parent;
        }
    }
}

/// Runs MCTS and also returns the final tree.
pub fn mcts_run(data: &Dataset, cfg: &MctsConfig) -> Result<(SearchResult, MctsTree), SearchError> {
    cfg.validate()?;
    if data.arity() == 0 {
        return Err(SearchError::NoInputs);
    }
    let started = Instant::now();
    let space = SearchSpace {
        operators: cfg.operators.clone(),
        arity: data.arity(),
        max_nodes: cfg.max_nodes,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluator = Evaluator::new(data, cfg.fitness_cfg.clone(), cfg.eic_cfg.clone());
    let mut archive = ParetoArchive::new();

    let root = evaluator.evaluate(&random_tree(&space, 2, true, &mut rng));
    archive.insert(&root);
    let mut best = root.clone();
    let mut tree = MctsTree::new(root);
    let mut history = Vec::new();

    let mut iterations = 0;
    while !cfg.budget.exhausted(iterations, started) {
        let leaf = tree.select_leaf(cfg.ucb_c, cfg.max_children);
        let expr = mutate(&tree.node(leaf).candidate.expr, &space, &mut rng);
        let cand = evaluator.evaluate(&expr);
        let reward = cand.fitness;
        archive.insert(&cand);
        if better(&cand, &best).is_lt() {
            best = cand.clone();
        }
        let child = tree.add_child(leaf, cand);
        tree.backpropagate(child, reward);
        history.push(best.fitness);
        iterations += 1;
    }

    let result = SearchResult {
        archive: archive.into_sorted(),
        best,
        history,
        evaluations: evaluator.evaluations(),
        steps: iterations,
    };
    Ok((result, tree))
}

/// Runs MCTS on `data` and returns the Pareto archive of everything
/// evaluated.
pub fn mcts_search(data: &Dataset, cfg: &MctsConfig) -> Result<SearchResult, SearchError> {
    mcts_run(data, cfg).map(|(r, _)| r)
}
