//! Backward elimination: start from a (possibly full) support, repeatedly
//! drop the smallest loadings and re-solve, until a stopping rule fires.

use crate::error::{Error, Result};
use crate::model::{ComponentSet, CovarianceMatrix, IndexSet, Mode, SparseComponent};
use crate::solver::SolveContext;

/// Normalisation of loadings for the threshold test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrimNorm {
    /// `|a_i| / Σ|a_k|`, the share of the L1 norm.
    #[default]
    L1,
    /// `|a_i| / ‖a‖₂`.
    L2,
}

/// Stopping rules for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRule {
    /// Variables the elimination starts from; `None` means all.
    pub start_set: Option<IndexSet>,
    /// Loadings whose normalised size is at most `tau` are trimmable.
    pub tau: f64,
    pub min_cardinality: usize,
    /// Largest tolerated relative loss of variance explained with respect
    /// to the untrimmed solution.
    pub max_loss: Option<f64>,
}

impl Default for ComponentRule {
    fn default() -> Self {
        Self {
            start_set: None,
            tau: 1.0,
            min_cardinality: 1,
            max_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimConfig {
    /// Maximum number of components.
    pub d: usize,
    /// Stop adding components once the cumulative variance explained
    /// reaches this fraction of `tr(S)`.
    pub mv: Option<f64>,
    pub mode: Mode,
    pub norm: TrimNorm,
    /// Loadings removed per iteration while possible.
    pub batch: usize,
    /// Rules per component; the last one is reused for later components.
    pub rules: Vec<ComponentRule>,
}

impl TrimConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            mv: None,
            mode: Mode::Correlated,
            norm: TrimNorm::L1,
            batch: 1,
            rules: vec![ComponentRule::default()],
        }
    }

    /// Trims every component down to the given cardinality (`tau = 1`).
    pub fn with_cardinalities(cards: &[usize]) -> Self {
        Self {
            rules: cards
                .iter()
                .map(|&k| ComponentRule {
                    min_cardinality: k,
                    ..ComponentRule::default()
                })
                .collect(),
            ..Self::new(cards.len())
        }
    }

    pub fn rule(&self, j: usize) -> &ComponentRule {
        &self.rules[(j - 1).min(self.rules.len() - 1)]
    }

    /// Minimum cardinality of component `j` after the mode's own bound.
    pub fn effective_min_cardinality(&self, j: usize) -> usize {
        let k = self.rule(j).min_cardinality;
        if self.mode == Mode::Uncorrelated {
            k.max(j)
        } else {
            k
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if self.rules.is_empty() {
            return bad("no component rules".into());
        }
        if let Some(mv) = self.mv {
            if !(0.0..=1.0).contains(&mv) {
                return bad(format!("mv = {mv} outside [0, 1]"));
            }
        }
        for (k, r) in self.rules.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.tau) {
                return bad(format!("tau of component {} outside [0, 1]", k + 1));
            }
            if r.min_cardinality == 0 {
                return bad(format!("min cardinality of component {} is 0", k + 1));
            }
            if let Some(l) = r.max_loss {
                if !(0.0..=1.0).contains(&l) {
                    return bad(format!("max loss of component {} outside [0, 1]", k + 1));
                }
            }
            if let Some(s) = &r.start_set {
                if s.is_empty() || s.as_slice().last().is_some_and(|&i| i >= p) {
                    return Err(Error::InvalidIndexSet(format!(
                        "start set of component {} not within 0..{p}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ThresholdMet,
    MinCardinality,
    VarianceLoss,
    TotalVariance,
    /// The next trimmed support had no usable solution.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimStep {
    /// Variables removed, in increasing order of normalised loading.
    pub removed: Vec<usize>,
    /// Their normalised loadings before removal.
    pub magnitudes: Vec<f64>,
    /// Support after removal.
    pub support: IndexSet,
    /// Variance explained after removal (not set if the solve failed).
    pub vexp: Option<f64>,
    /// The step was undone.
    pub rolled_back: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimTrace {
    pub order: usize,
    pub start: IndexSet,
    pub initial_vexp: f64,
    pub steps: Vec<TrimStep>,
    pub stop: StopReason,
    /// Set on the last component when the cumulative target ended the chain.
    pub chain_stop: Option<StopReason>,
}

/// Normalised loadings `|a_i| / L(a)` over the support, in support order.
pub fn normalized_loadings(comp: &SparseComponent, norm: TrimNorm) -> Vec<f64> {
    let l = match norm {
        TrimNorm::L1 => comp.loadings.lp_norm(1),
        TrimNorm::L2 => comp.loadings.norm(),
    };
    comp.support
        .as_slice()
        .iter()
        .map(|&i| comp.loadings[i].abs() / l)
        .collect()
}

/// Trims component `j` (1-based; must equal `ctx.order()`).
pub fn trim_component(
    ctx: &SolveContext<'_>,
    cfg: &TrimConfig,
    j: usize,
) -> Result<(SparseComponent, TrimTrace)> {
    if j != ctx.order() {
        return Err(Error::InvalidConfig(format!(
            "component {j} requested from a context for component {}",
            ctx.order()
        )));
    }
    let p = ctx.cov().dim();
    let rule = cfg.rule(j);
    let start = rule.start_set.clone().unwrap_or_else(|| IndexSet::full(p));
    if ctx.mode() == Mode::Uncorrelated && start.len() < j {
        return Err(Error::StartSetInfeasible {
            cardinality: start.len(),
            order: j,
        });
    }
    let k = cfg.effective_min_cardinality(j);
    let mut comp = ctx.solve(&start)?;
    let full = comp.vexp;
    let mut steps = Vec::new();
    let mut batching = cfg.batch > 1;

    let stop = loop {
        let card = comp.cardinality();
        if card <= k {
            break StopReason::MinCardinality;
        }
        let norm = normalized_loadings(&comp, cfg.norm);
        let mut ranked: Vec<(f64, usize)> = norm
            .iter()
            .zip(comp.support.as_slice())
            .map(|(&v, &i)| (v, i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let trimmable = ranked.iter().take_while(|(v, _)| *v <= rule.tau).count();
        if trimmable == 0 {
            break StopReason::ThresholdMet;
        }
        if batching && cfg.batch > trimmable.min(card - k) {
            batching = false;
        }
        let n = if batching { cfg.batch } else { 1 };
        let (magnitudes, removed): (Vec<f64>, Vec<usize>) = ranked[..n].iter().copied().unzip();
        let support = comp.support.without(&removed);
        let mut step = TrimStep {
            removed,
            magnitudes,
            support: support.clone(),
            vexp: None,
            rolled_back: false,
        };
        match ctx.solve(&support) {
            Ok(next) => {
                step.vexp = Some(next.vexp);
                let loss = 1.0 - next.vexp / full;
                if rule.max_loss.is_some_and(|mv| loss > mv) {
                    step.rolled_back = true;
                    steps.push(step);
                    break StopReason::VarianceLoss;
                }
                steps.push(step);
                comp = next;
            }
            Err(Error::SingularSupport(_) | Error::InfeasibleConstraints | Error::DegenerateComponent) => {
                step.rolled_back = true;
                steps.push(step);
                break StopReason::Exhausted;
            }
            Err(e) => return Err(e),
        }
    };

    let trace = TrimTrace {
        order: j,
        start,
        initial_vexp: full,
        steps,
        stop,
        chain_stop: None,
    };
    Ok((comp, trace))
}

/// Computes up to `cfg.d` trimmed components in sequence.
pub fn backward_eliminate(
    cov: &CovarianceMatrix,
    cfg: &TrimConfig,
) -> Result<(ComponentSet, Vec<TrimTrace>)> {
    cfg.validate(cov.dim())?;
    let mut components: Vec<SparseComponent> = Vec::new();
    let mut traces: Vec<TrimTrace> = Vec::new();
    let mut total = 0.0;
    for j in 1..=cfg.d {
        let ctx = SolveContext::new(cov, &components, cfg.mode);
        let (comp, trace) = trim_component(&ctx, cfg, j).map_err(|e| e.at_component(j))?;
        total += comp.vexp;
        components.push(comp);
        traces.push(trace);
        if cfg.mv.is_some_and(|mv| total >= mv * cov.trace()) {
            traces.last_mut().expect("just pushed").chain_stop = Some(StopReason::TotalVariance);
            break;
        }
    }
    Ok((ComponentSet::new(cov.clone(), components), traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::zou_table1;

    #[test]
    fn zero_tau_keeps_start_solution() {
        let zou = zou_table1();
        let mut cfg = TrimConfig::new(1);
        cfg.rules[0].tau = 0.0;
        let (set, traces) = backward_eliminate(&zou.matrix, &cfg).unwrap();
        assert_eq!(set.components[0].cardinality(), 10);
        assert!(traces[0].steps.is_empty());
        assert_eq!(traces[0].stop, StopReason::ThresholdMet);
    }

    #[test]
    fn start_at_min_cardinality_returns_immediately() {
        let zou = zou_table1();
        let mut cfg = TrimConfig::with_cardinalities(&[3]);
        cfg.rules[0].start_set = Some(IndexSet::new(vec![0, 4, 8]).unwrap());
        let (set, traces) = backward_eliminate(&zou.matrix, &cfg).unwrap();
        assert_eq!(set.components[0].support.as_slice(), &[0, 4, 8]);
        assert_eq!(traces[0].stop, StopReason::MinCardinality);
        assert!(traces[0].steps.is_empty());
    }

    #[test]
    fn zero_mv_stops_after_one_component() {
        let zou = zou_table1();
        let mut cfg = TrimConfig::with_cardinalities(&[4, 4, 4]);
        cfg.mv = Some(0.0);
        let (set, traces) = backward_eliminate(&zou.matrix, &cfg).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(traces[0].chain_stop, Some(StopReason::TotalVariance));
    }

    #[test]
    fn trims_to_cardinality_one_at_a_time() {
        let zou = zou_table1();
        let (set, traces) = backward_eliminate(&zou.matrix, &TrimConfig::with_cardinalities(&[4])).unwrap();
        assert_eq!(set.components[0].cardinality(), 4);
        assert_eq!(traces[0].steps.len(), 6);
        assert!(traces[0].steps.iter().all(|s| s.removed.len() == 1));
    }

    #[test]
    fn batches_fall_back_to_single_removals() {
        let zou = zou_table1();
        let mut cfg = TrimConfig::with_cardinalities(&[3]);
        cfg.batch = 4;
        let (_, traces) = backward_eliminate(&zou.matrix, &cfg).unwrap();
        let sizes: Vec<usize> = traces[0].steps.iter().map(|s| s.removed.len()).collect();
        assert_eq!(sizes, vec![4, 1, 1, 1]);
    }

    #[test]
    fn variance_loss_rolls_back() {
        let zou = zou_table1();
        let mut cfg = TrimConfig::with_cardinalities(&[1]);
        cfg.rules[0].max_loss = Some(0.0001);
        let (set, traces) = backward_eliminate(&zou.matrix, &cfg).unwrap();
        let t = &traces[0];
        assert_eq!(t.stop, StopReason::VarianceLoss);
        let last = t.steps.last().unwrap();
        assert!(last.rolled_back);
        assert!(1.0 - last.vexp.unwrap() / t.initial_vexp > 0.0001);
        assert!(1.0 - set.components[0].vexp / t.initial_vexp <= 0.0001);
    }

    #[test]
    fn uncorrelated_start_set_too_small() {
        let zou = zou_table1();
        let mut cfg = TrimConfig::with_cardinalities(&[2, 1]);
        cfg.mode = Mode::Uncorrelated;
        cfg.rules[1].start_set = Some(IndexSet::new(vec![3]).unwrap());
        let err = backward_eliminate(&zou.matrix, &cfg).unwrap_err();
        assert!(matches!(err.root(), Error::StartSetInfeasible { cardinality: 1, order: 2 }));
        cfg.rules[1].start_set = None;
        let (set, _) = backward_eliminate(&zou.matrix, &cfg).unwrap();
        assert_eq!(set.components[1].cardinality(), 2);
    }

    #[test]
    fn invalid_configs() {
        let p = 10;
        let mut cfg = TrimConfig::new(1);
        cfg.batch = 0;
        assert!(cfg.validate(p).is_err());
        let mut cfg = TrimConfig::new(1);
        cfg.rules[0].tau = 1.5;
        assert!(cfg.validate(p).is_err());
        let mut cfg = TrimConfig::new(1);
        cfg.mv = Some(-0.1);
        assert!(cfg.validate(p).is_err());
        let mut cfg = TrimConfig::new(1);
        cfg.rules[0].start_set = Some(IndexSet::new(vec![10]).unwrap());
        assert!(matches!(cfg.validate(p), Err(Error::InvalidIndexSet(_))));
    }
}
