//! Support selection: exhaustive enumeration and per-component
//! branch-and-bound.
//!
//! Supports are ranked by a [`Criterion`]. For uncorrelated components
//! both criteria coincide. Branch-and-bound prunes a node when an upper
//! bound on every support below it falls under the incumbent: the solver
//! objective itself for [`Criterion::Objective`], the
//! [`SolveContext::incremental_bound`] for [`Criterion::Vexp`]. Neither can
//! grow when a variable is dropped.
//!
//! Ties: every support whose value is within [`TIE_TOL`]` · tr(S)` of the
//! best one is considered optimal and the lexicographically smallest such
//! support is returned. The result does not depend on exploration order or
//! thread count.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ComponentSet, CovarianceMatrix, IndexSet, Mode, SparseComponent};
use crate::solver::SolveContext;

/// Relative tolerance under which two objective values tie.
pub const TIE_TOL: f64 = 1e-12;
/// Default cap on the number of supports [`exhaustive_search`] enumerates.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// What a search maximises for correlated and orthogonal components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    /// Incremental variance explained (`SparseComponent::vexp`).
    #[default]
    Vexp,
    /// The deflated approximation `a'S_jS_ja / a'Sa`
    /// (`SparseComponent::objective`).
    Objective,
}

impl Criterion {
    pub fn value(self, comp: &SparseComponent) -> f64 {
        match self {
            Criterion::Vexp => comp.vexp,
            Criterion::Objective => comp.objective,
        }
    }

    /// The criterion actually in effect for a mode.
    fn effective(self, mode: Mode) -> Self {
        if mode == Mode::Uncorrelated {
            Criterion::Objective
        } else {
            self
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Target cardinality of each component.
    pub cardinalities: Vec<usize>,
    pub mode: Mode,
    pub criterion: Criterion,
    /// Candidate variables per component; `None` (or a missing entry) means
    /// all variables.
    pub start_sets: Vec<Option<IndexSet>>,
    /// Presort candidates by the residual variance each explains alone, so
    /// strong supports are reached first and weak subtrees get pruned.
    pub order_variables: bool,
    /// Known lower bound on the optimum of a single
    /// [`branch_and_bound`] call, used to seed the incumbent.
    pub best_so_far: Option<f64>,
    /// Worker threads for branch-and-bound; 1 runs on the calling thread.
    pub threads: usize,
}

impl SearchConfig {
    pub fn new(cardinalities: Vec<usize>, mode: Mode) -> Self {
        Self {
            cardinalities,
            mode,
            criterion: Criterion::default(),
            start_sets: Vec::new(),
            order_variables: true,
            best_so_far: None,
            threads: 1,
        }
    }

    pub fn start_set(&self, order: usize) -> Option<&IndexSet> {
        self.start_sets.get(order - 1).and_then(Option::as_ref)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.cardinalities.is_empty() {
            return Err(Error::InvalidConfig("no cardinalities given".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        for (k, &c) in self.cardinalities.iter().enumerate() {
            let order = k + 1;
            let available = self.start_set(order).map_or(p, IndexSet::len);
            if c == 0 || c > available {
                return Err(Error::InvalidConfig(format!(
                    "cardinality {c} of component {order} must be in 1..={available}"
                )));
            }
            if let Some(set) = self.start_set(order) {
                if set.as_slice().last().is_some_and(|&i| i >= p) {
                    return Err(Error::InvalidIndexSet(format!(
                        "start set of component {order} exceeds dimension {p}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub component: SparseComponent,
    /// Supports evaluated by the solver.
    pub nodes_visited: usize,
    /// Whether the component is the optimum for its position in the chain.
    pub optimal: bool,
}

/// Supports within the tie tolerance of the best value seen so far.
#[derive(Debug, Default)]
struct Leaders {
    best: f64,
    entries: Vec<(f64, SparseComponent)>,
}

impl Leaders {
    fn new() -> Self {
        Self {
            best: f64::NEG_INFINITY,
            entries: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, tol: f64, component: SparseComponent) {
        if value < self.best - tol {
            return;
        }
        if value > self.best {
            self.best = value;
            let floor = value - tol;
            self.entries.retain(|(v, _)| *v >= floor);
        }
        self.entries.push((value, component));
    }

    fn merge(&mut self, other: Leaders, tol: f64) {
        for (v, c) in other.entries {
            self.offer(v, tol, c);
        }
    }

    fn winner(self) -> Option<SparseComponent> {
        self.entries
            .into_iter()
            .min_by(|(_, a), (_, b)| a.support.cmp(&b.support))
            .map(|(_, c)| c)
    }
}

fn check_order(ctx: &SolveContext<'_>, c: usize) -> Result<()> {
    if ctx.mode() == Mode::Uncorrelated && c < ctx.order() {
        return Err(Error::CardinalityTooSmall {
            cardinality: c,
            order: ctx.order(),
        });
    }
    Ok(())
}

/// Solver failures that only rule out the support at hand.
fn is_local_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularSupport(_) | Error::InfeasibleConstraints | Error::DegenerateComponent
    )
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

/// Evaluates every cardinality-`c` support drawn from all variables.
pub fn exhaustive_search(
    ctx: &SolveContext<'_>,
    c: usize,
    criterion: Criterion,
) -> Result<SearchResult> {
    exhaustive_search_within(ctx, &IndexSet::full(ctx.cov().dim()), c, criterion, DEFAULT_BUDGET)
}

/// Evaluates every cardinality-`c` subset of `candidates`, refusing when
/// there are more than `budget` of them.
pub fn exhaustive_search_within(
    ctx: &SolveContext<'_>,
    candidates: &IndexSet,
    c: usize,
    criterion: Criterion,
    budget: u128,
) -> Result<SearchResult> {
    let criterion = criterion.effective(ctx.mode());
    if c == 0 || c > candidates.len() {
        return Err(Error::InvalidConfig(format!(
            "cardinality must be in 1..={}",
            candidates.len()
        )));
    }
    check_order(ctx, c)?;
    let count = binomial(candidates.len(), c);
    if count > budget {
        return Err(Error::BudgetExceeded(count));
    }
    let tol = TIE_TOL * ctx.cov().trace();
    let mut leaders = Leaders::new();
    let mut visited = 0;
    for subset in candidates.as_slice().iter().copied().combinations(c) {
        visited += 1;
        let ind = IndexSet::from_sorted(subset);
        match ctx.solve(&ind) {
            Ok(comp) => leaders.offer(criterion.value(&comp), tol, comp),
            Err(e) if is_local_failure(&e) => {}
            Err(e) => return Err(e),
        }
    }
    let component = leaders.winner().ok_or(Error::NoFeasibleSupport)?;
    Ok(SearchResult {
        component,
        nodes_visited: visited,
        optimal: true,
    })
}

struct Explorer<'c, 'a> {
    ctx: &'c SolveContext<'a>,
    /// Candidate variables in removal-priority order.
    vars: Vec<usize>,
    target: usize,
    criterion: Criterion,
    tol: f64,
    /// Bits of the best objective value found by any worker (values are
    /// non-negative, so the bit patterns order like the floats).
    incumbent: AtomicU64,
    nodes: AtomicUsize,
}

enum Node {
    Leaf(SparseComponent),
    Bound(f64),
    /// Unusable for bounding; its subsets may still be fine.
    Unbounded,
    /// No subset can be feasible.
    Dead,
}

impl Explorer<'_, '_> {
    fn incumbent(&self) -> f64 {
        f64::from_bits(self.incumbent.load(Ordering::Relaxed))
    }

    fn raise(&self, value: f64) {
        if value >= 0.0 {
            self.incumbent.fetch_max(value.to_bits(), Ordering::Relaxed);
        }
    }

    fn evaluate(&self, kept: &[bool], leaf: bool) -> Result<Node> {
        self.nodes.fetch_add(1, Ordering::Relaxed);
        let mut members: Vec<usize> = self
            .vars
            .iter()
            .zip(kept)
            .filter_map(|(&v, &k)| k.then_some(v))
            .collect();
        members.sort_unstable();
        let ind = IndexSet::from_sorted(members);
        if !leaf && self.criterion == Criterion::Vexp {
            return Ok(Node::Bound(self.ctx.incremental_bound(&ind)));
        }
        match self.ctx.solve(&ind) {
            Ok(comp) if leaf => Ok(Node::Leaf(comp)),
            Ok(comp) => Ok(Node::Bound(comp.objective)),
            Err(Error::SingularSupport(_)) => Ok(Node::Unbounded),
            Err(e) if is_local_failure(&e) => Ok(Node::Dead),
            Err(e) => Err(e),
        }
    }

    /// Depth-first search below a node. `next` is the first position that
    /// may still be removed and `remaining` the number of removals left.
    fn explore(
        &self,
        kept: &mut Vec<bool>,
        next: usize,
        remaining: usize,
        leaders: &mut Leaders,
    ) -> Result<()> {
        let node = self.evaluate(kept, remaining == 0)?;
        if remaining == 0 {
            if let Node::Leaf(comp) = node {
                let value = self.criterion.value(&comp);
                self.raise(value);
                leaders.offer(value, self.tol, comp);
            }
            return Ok(());
        }
        match node {
            Node::Dead => return Ok(()),
            Node::Bound(b) if b < self.incumbent() - self.tol => return Ok(()),
            _ => {}
        }
        self.children(kept, next, remaining, leaders)
    }

    fn children(
        &self,
        kept: &mut Vec<bool>,
        next: usize,
        remaining: usize,
        leaders: &mut Leaders,
    ) -> Result<()> {
        let m = self.vars.len();
        for pos in (next..=(m - remaining)).rev() {
            kept[pos] = false;
            let res = self.explore(kept, pos + 1, remaining - 1, leaders);
            kept[pos] = true;
            res?;
        }
        Ok(())
    }
}

/// Exact best support of cardinality `c` for the next component of `ctx`.
///
/// Explores the subset lattice top-down from the candidate set, removing one
/// variable per level; a node is pruned when its bound falls below the
/// incumbent. Candidates come from `cfg.start_set(ctx.order())`.
pub fn branch_and_bound(
    ctx: &SolveContext<'_>,
    c: usize,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    let p = ctx.cov().dim();
    let candidates = cfg
        .start_set(ctx.order())
        .cloned()
        .unwrap_or_else(|| IndexSet::full(p));
    if c == 0 || c > candidates.len() {
        return Err(Error::InvalidConfig(format!(
            "cardinality must be in 1..={}",
            candidates.len()
        )));
    }
    check_order(ctx, c)?;
    if cfg.threads == 0 {
        return Err(Error::InvalidConfig("threads must be at least 1".into()));
    }

    let mut vars = candidates.as_slice().to_vec();
    if cfg.order_variables {
        let scores: Vec<f64> = (0..p).map(|i| ctx.singleton_score(i)).collect();
        vars.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    }
    let m = vars.len();
    let explorer = Explorer {
        ctx,
        vars,
        target: c,
        criterion: cfg.criterion.effective(ctx.mode()),
        tol: TIE_TOL * ctx.cov().trace(),
        incumbent: AtomicU64::new(cfg.best_so_far.unwrap_or(0.0).max(0.0).to_bits()),
        nodes: AtomicUsize::new(0),
    };
    let removals = m - explorer.target;

    let mut leaders = Leaders::new();
    if removals == 0 || cfg.threads == 1 {
        explorer.explore(&mut vec![true; m], 0, removals, &mut leaders)?;
    } else {
        // Root evaluated here; each first-level subtree is one task.
        let root = explorer.evaluate(&vec![true; m], false)?;
        if !matches!(root, Node::Dead) {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let shared = Mutex::new(Leaders::new());
            pool.install(|| {
                (0..=(m - removals)).into_par_iter().try_for_each(|pos| {
                    let mut kept = vec![true; m];
                    kept[pos] = false;
                    let mut local = Leaders::new();
                    explorer.explore(&mut kept, pos + 1, removals - 1, &mut local)?;
                    shared
                        .lock()
                        .expect("leader lock poisoned")
                        .merge(local, explorer.tol);
                    Ok::<(), Error>(())
                })
            })?;
            leaders = shared.into_inner().expect("leader lock poisoned");
        }
    }

    let nodes_visited = explorer.nodes.load(Ordering::Relaxed);
    let component = leaders.winner().ok_or(Error::NoFeasibleSupport)?;
    if let Some(seed) = cfg.best_so_far {
        if explorer.criterion.value(&component) < seed - explorer.tol {
            return Err(Error::NoFeasibleSupport);
        }
    }
    Ok(SearchResult {
        component,
        nodes_visited,
        optimal: true,
    })
}

/// Greedy chain: each component's support is the branch-and-bound optimum
/// given the components before it.
pub fn sequential_fit(cov: &CovarianceMatrix, cfg: &SearchConfig) -> Result<ComponentSet> {
    sequential_search(cov, cfg).map(|(set, _)| set)
}

/// [`sequential_fit`] that also returns the per-component search results.
/// `cfg.best_so_far` is not used here.
pub fn sequential_search(
    cov: &CovarianceMatrix,
    cfg: &SearchConfig,
) -> Result<(ComponentSet, Vec<SearchResult>)> {
    cfg.validate(cov.dim())?;
    let per_component = SearchConfig {
        best_so_far: None,
        ..cfg.clone()
    };
    let mut components: Vec<SparseComponent> = Vec::new();
    let mut results = Vec::new();
    for (k, &c) in cfg.cardinalities.iter().enumerate() {
        let ctx = SolveContext::new(cov, &components, cfg.mode);
        let result =
            branch_and_bound(&ctx, c, &per_component).map_err(|e| e.at_component(k + 1))?;
        components.push(result.component.clone());
        results.push(result);
    }
    Ok((ComponentSet::new(cov.clone(), components), results))
}
