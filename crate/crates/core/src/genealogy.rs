//! Individual-level branching random walks with full ancestry.
//!
//! Generations are stored as flat arrays; each individual keeps the index of
//! its parent in the previous generation, and children of one parent are
//! contiguous. That makes descendant questions a single backward pass.

use std::io::Write;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{EngineError, PopulationState};
use crate::offspring::OffspringSpec;

/// Default cap on the number of individuals in one generation.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenealogyError {
    #[error("population budget exceeded: {needed} individuals expected/needed, budget {budget}")]
    BudgetExceeded { needed: f64, budget: u64 },
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `(generation, index)` identifier of an individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndividualId {
    pub generation: u32,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Individual {
    pub id: IndividualId,
    pub parent: Option<IndividualId>,
    pub position: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Node {
    parent: u32,
    position: i64,
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    generations: Vec<Vec<Node>>,
    maxima: Vec<i64>,
}

/// Grows a full tree from one individual at `start` up to `horizon`.
pub fn grow<R: Rng + ?Sized>(
    spec: &OffspringSpec,
    start: i64,
    horizon: u32,
    budget: u64,
    rng: &mut R,
) -> Result<Tree, GenealogyError> {
    let expected = spec.mean_offspring().powi(horizon as i32);
    if expected > budget as f64 {
        return Err(GenealogyError::BudgetExceeded { needed: expected, budget });
    }
    let mut generations = vec![vec![Node { parent: NO_PARENT, position: start }]];
    let mut maxima = vec![start];
    for _ in 0..horizon {
        let prev = generations.last().expect("root generation");
        let mut next = Vec::with_capacity(prev.len() * 2);
        for (i, node) in prev.iter().enumerate() {
            for &(d, m) in spec.sample(rng).points() {
                for _ in 0..m {
                    next.push(Node { parent: i as u32, position: node.position + d });
                }
            }
            if next.len() as u64 > budget {
                return Err(GenealogyError::BudgetExceeded { needed: next.len() as f64, budget });
            }
        }
        maxima.push(next.iter().map(|n| n.position).max().expect("no extinction"));
        generations.push(next);
    }
    Ok(Tree { generations, maxima })
}

impl Tree {
    /// Largest generation index stored.
    pub fn depth(&self) -> u32 {
        self.generations.len() as u32 - 1
    }

    pub fn generation_size(&self, generation: u32) -> usize {
        self.generations.get(generation as usize).map_or(0, Vec::len)
    }

    /// Right-most position at every generation.
    pub fn maxima(&self) -> &[i64] {
        &self.maxima
    }

    pub fn individual(&self, id: IndividualId) -> Option<Individual> {
        let node = self.generations.get(id.generation as usize)?.get(id.index as usize)?;
        let parent = (node.parent != NO_PARENT)
            .then(|| IndividualId { generation: id.generation - 1, index: node.parent });
        Some(Individual { id, parent, position: node.position })
    }

    pub fn individuals(&self, generation: u32) -> impl Iterator<Item = Individual> + '_ {
        (0..self.generation_size(generation) as u32)
            .filter_map(move |index| self.individual(IndividualId { generation, index }))
    }

    /// Aggregate occupancy of one generation.
    pub fn project(&self, generation: u32) -> Result<PopulationState, GenealogyError> {
        let nodes = self
            .generations
            .get(generation as usize)
            .ok_or_else(|| GenealogyError::InvalidRange(format!("generation {generation} not grown")))?;
        let start = self.generations[0][0].position;
        Ok(PopulationState::from_counts(
            generation as u64,
            start,
            nodes.iter().map(|n| (n.position, 1)),
        )?)
    }

    /// Marks, for each individual of generation `q`, whether one of its
    /// descendants (itself included) sits at the right-most position at some
    /// generation in `[q, horizon]`.
    pub fn extremal_ancestors(&self, q: u32, horizon: u32) -> Result<Vec<bool>, GenealogyError> {
        if q > horizon || horizon > self.depth() {
            return Err(GenealogyError::InvalidRange(format!(
                "need q <= horizon <= depth, got q={q}, horizon={horizon}, depth={}",
                self.depth()
            )));
        }
        let at_max = |g: u32| -> Vec<bool> {
            let m = self.maxima[g as usize];
            self.generations[g as usize].iter().map(|n| n.position == m).collect()
        };
        let mut flags = at_max(horizon);
        for g in (q..horizon).rev() {
            let mut upper = at_max(g);
            for (child, &hit) in self.generations[g as usize + 1].iter().zip(&flags) {
                if hit {
                    upper[child.parent as usize] = true;
                }
            }
            flags = upper;
        }
        Ok(flags)
    }

    /// CSV with columns `generation, index, parent_index, position` (root parent is -1).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        #[derive(Serialize)]
        struct Row {
            generation: u32,
            index: u32,
            parent_index: i64,
            position: i64,
        }
        let mut writer = csv::Writer::from_writer(out);
        for (g, nodes) in self.generations.iter().enumerate() {
            for (i, n) in nodes.iter().enumerate() {
                writer.serialize(Row {
                    generation: g as u32,
                    index: i as u32,
                    parent_index: if n.parent == NO_PARENT { -1 } else { n.parent as i64 },
                    position: n.position,
                })?;
            }
        }
        writer.flush()?;
        Ok(())
    }
}

/// Fraction of generation-`q` individuals with a descendant at the
/// right-most position at some generation in `[q, horizon]`.
pub fn democracy_stats(tree: &Tree, q: u32, horizon: u32) -> Result<f64, GenealogyError> {
    let flags = tree.extremal_ancestors(q, horizon)?;
    Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

/// One generation simulated particle by particle; the brute-force
/// counterpart of the aggregate engine step.
pub fn brute_force_step<R: Rng + ?Sized>(
    state: &PopulationState,
    spec: &OffspringSpec,
    rng: &mut R,
) -> Result<PopulationState, GenealogyError> {
    let mut children: Vec<(i64, u64)> = Vec::new();
    for (site, count) in state.occupied() {
        for _ in 0..count {
            for &(d, m) in spec.sample(rng).points() {
                children.push((site + d, m));
            }
        }
    }
    Ok(PopulationState::from_counts(state.generation() + 1, state.start(), children)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::{CountLaw, StepLaw};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pm1(count: CountLaw) -> OffspringSpec {
        OffspringSpec::product(count, StepLaw::uniform(&[-1, 1]).unwrap())
    }

    #[test]
    fn frozen_spec_is_a_path() {
        let spec = OffspringSpec::product(CountLaw::constant(1).unwrap(), StepLaw::dirac(0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = grow(&spec, 0, 5, DEFAULT_BUDGET, &mut rng).unwrap();
        assert_eq!(tree.depth(), 5);
        assert!((0..=5).all(|g| tree.generation_size(g) == 1));
        assert!(tree.individuals(5).all(|i| i.position == 0));
        assert_eq!(democracy_stats(&tree, 2, 5).unwrap(), 1.0);
    }

    #[test]
    fn binary_tree_leaf_profile() {
        // 8 leaves; each leaf position is a sum of 3 independent +-1 steps,
        // so the expected number of leaves at -3,-1,1,3 is 8 * (1,3,3,1)/8.
        let spec = pm1(CountLaw::constant(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trees = 100_000;
        let mut hist = [0u64; 4];
        for _ in 0..trees {
            let tree = grow(&spec, 0, 3, DEFAULT_BUDGET, &mut rng).unwrap();
            assert_eq!(tree.generation_size(3), 8);
            for ind in tree.individuals(3) {
                hist[((ind.position + 3) / 2) as usize] += 1;
            }
        }
        for (h, w) in hist.iter().zip([1.0, 3.0, 3.0, 1.0]) {
            let mean = *h as f64 / trees as f64;
            assert!((mean - w).abs() < 0.02, "{mean} vs {w}");
        }
    }

    #[test]
    fn ancestry_is_consistent() {
        let spec = pm1(CountLaw::new([(1, 0.5), (2, 0.5)]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tree = grow(&spec, 0, 12, DEFAULT_BUDGET, &mut rng).unwrap();
        for g in 0..=tree.depth() {
            for ind in tree.individuals(g) {
                let mut steps = 0;
                let mut cur = ind;
                while let Some(p) = cur.parent {
                    let parent = tree.individual(p).unwrap();
                    assert_eq!((cur.position - parent.position).abs(), 1);
                    cur = parent;
                    steps += 1;
                }
                assert_eq!(steps, g);
            }
            let projected = tree.project(g).unwrap();
            assert_eq!(projected.max_position().unwrap(), tree.maxima()[g as usize]);
            assert_eq!(projected.total() as usize, tree.generation_size(g));
        }
    }

    #[test]
    fn democracy_root_and_monotonicity() {
        let spec = pm1(CountLaw::new([(1, 0.5), (2, 0.5)]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let tree = grow(&spec, 0, 14, DEFAULT_BUDGET, &mut rng).unwrap();
            assert_eq!(democracy_stats(&tree, 0, 14).unwrap(), 1.0);
            let mut last = 0.0;
            for h in 3..=14 {
                let f = democracy_stats(&tree, 3, h).unwrap();
                assert!(f >= last && (0.0..=1.0).contains(&f));
                last = f;
            }
        }
    }

    #[test]
    fn budget_guard() {
        let spec = pm1(CountLaw::constant(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            grow(&spec, 0, 30, 1_000_000, &mut rng),
            Err(GenealogyError::BudgetExceeded { .. })
        ));
        let tree = grow(&spec, 0, 4, 100, &mut rng).unwrap();
        assert!(democracy_stats(&tree, 5, 4).is_err());
        assert!(democracy_stats(&tree, 2, 9).is_err());
    }

    #[test]
    fn tree_csv() {
        let spec = pm1(CountLaw::constant(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = grow(&spec, 0, 1, 100, &mut rng).unwrap();
        let mut buf = Vec::new();
        tree.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "generation,index,parent_index,position");
        assert_eq!(lines[1], "0,0,-1,0");
        assert_eq!(lines.len(), 4);
    }
}
