//! Branching Brownian motion genealogies, sampled depth-first.
//!
//! Particles diffuse with diffusivity `√2` (generator `Δ`, so each coordinate
//! of an increment over time `s` has variance `2s`), branch at rate `β` and are
//! replaced by `k` children with probability `p_k`. A tree is never stored:
//! [`fold_tree`] hands leaves to one callback and folds children into parents
//! with another.
//!
//! Randomness is keyed by position in the tree. The key of a particle is a hash
//! of its parent's key and its child index, and the root key is a hash of the
//! master seed and the replicate index. Each key seeds two ChaCha8 streams: one
//! for the tree itself (lifetime, displacement, number of children) and one for
//! auxiliary draws made by the callbacks (votes, labels, thresholds). Estimators
//! that share a master seed therefore see identical trees whatever their vote
//! sampling does, and results never depend on traversal order or thread count.

use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use thiserror::Error;

use crate::models::OffspringDistribution;

/// Diffusivity of every particle.
pub const DIFFUSIVITY: f64 = std::f64::consts::SQRT_2;

/// Default cap on the number of leaves in one tree.
pub const DEFAULT_POPULATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BbmError {
    #[error("tree exceeded the population cap of {cap} leaves (expected population {expected:.3e}); raise the cap or shorten t")]
    PopulationExceeded { cap: usize, expected: f64 },
    #[error("invalid genealogy parameters: {0}")]
    Params(String),
    #[error("time must be finite and non-negative, got {0}")]
    Time(f64),
    #[error("start point has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
}

/// Branching rate, offspring law and spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GenealogyParams {
    rate: f64,
    offspring: OffspringDistribution,
    dimension: usize,
}

impl GenealogyParams {
    /// `rate = 0` is allowed and gives a single Brownian particle.
    pub fn new(
        rate: f64,
        offspring: OffspringDistribution,
        dimension: usize,
    ) -> Result<Self, BbmError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(BbmError::Params(format!(
                "rate must be finite and >= 0, got {rate}"
            )));
        }
        if dimension == 0 {
            return Err(BbmError::Params("dimension must be at least 1".into()));
        }
        Ok(Self {
            rate,
            offspring,
            dimension,
        })
    }

    /// One-dimensional BBM with pure `arity`-ary branching.
    pub fn pure(rate: f64, arity: usize) -> Result<Self, BbmError> {
        let offspring =
            OffspringDistribution::pure(arity).map_err(|e| BbmError::Params(e.to_string()))?;
        Self::new(rate, offspring, 1)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn offspring(&self) -> &OffspringDistribution {
        &self.offspring
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn diffusivity(&self) -> f64 {
        DIFFUSIVITY
    }
}

/// `E N_t = exp(β (m₁ - 1) t)`.
pub fn expected_population(params: &GenealogyParams, t: f64) -> f64 {
    (params.rate * (params.offspring.mean() - 1.0) * t).exp()
}

const TREE_STREAM: u64 = 0;
const AUX_STREAM: u64 = 1;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix(splitmix(a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Master seed of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedScheme {
    pub master_seed: u64,
}

impl SeedScheme {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Key of the root particle of replicate `index`.
    pub fn replicate(&self, index: u64) -> NodeKey {
        NodeKey(mix(mix(self.master_seed, 0x5EED), index))
    }
}

/// Hash identifying one particle of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeKey(pub u64);

impl NodeKey {
    pub fn child(self, index: usize) -> NodeKey {
        NodeKey(mix(self.0, index as u64 + 1))
    }

    fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    pub fn tree_rng(self) -> ChaCha8Rng {
        self.stream(TREE_STREAM)
    }

    pub fn aux_rng(self) -> AuxRng {
        AuxRng {
            key: self,
            rng: None,
        }
    }
}

/// Auxiliary stream of one particle, created on first use.
pub struct AuxRng {
    key: NodeKey,
    rng: Option<ChaCha8Rng>,
}

impl AuxRng {
    fn inner(&mut self) -> &mut ChaCha8Rng {
        let key = self.key;
        self.rng.get_or_insert_with(|| key.stream(AUX_STREAM))
    }
}

impl RngCore for AuxRng {
    fn next_u32(&mut self) -> u32 {
        self.inner().next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner().next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner().fill_bytes(dst)
    }
}

/// A particle alive at the final time.
#[derive(Debug)]
pub struct LeafRecord<'a> {
    pub position: &'a [f64],
    /// Position where the final Brownian segment started (the last branching, or `x0`).
    pub origin: &'a [f64],
    /// Duration of the final segment.
    pub segment: f64,
    /// Child indices from the root.
    pub path: &'a [u32],
}

/// A branching event.
#[derive(Debug)]
pub struct BranchRecord<'a> {
    /// Time of the event since the start.
    pub time: f64,
    pub position: &'a [f64],
    pub path: &'a [u32],
}

#[derive(Debug, Clone, Copy)]
pub struct FoldOptions {
    pub population_cap: usize,
}

impl Default for FoldOptions {
    fn default() -> Self {
        Self {
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }
}

struct Walker<'p, L, C> {
    params: &'p GenealogyParams,
    t_end: f64,
    cap: usize,
    leaves: usize,
    path: Vec<u32>,
    leaf_fn: L,
    combine_fn: C,
}

impl<T, L, C> Walker<'_, L, C>
where
    L: FnMut(&LeafRecord<'_>, &mut AuxRng) -> T,
    C: FnMut(&BranchRecord<'_>, Vec<T>, &mut AuxRng) -> T,
{
    fn visit(&mut self, key: NodeKey, start: &[f64], born: f64) -> Result<T, BbmError> {
        let mut rng = key.tree_rng();
        let lifetime = if self.params.rate > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.params.rate
        } else {
            f64::INFINITY
        };
        let remaining = self.t_end - born;
        let dt = lifetime.min(remaining);
        let sd = (2.0 * dt).sqrt();
        let position: Vec<f64> = start
            .iter()
            .map(|&x| x + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();

        if lifetime >= remaining {
            self.leaves += 1;
            if self.leaves > self.cap {
                return Err(BbmError::PopulationExceeded {
                    cap: self.cap,
                    expected: expected_population(self.params, self.t_end),
                });
            }
            let record = LeafRecord {
                position: &position,
                origin: start,
                segment: dt,
                path: &self.path,
            };
            return Ok((self.leaf_fn)(&record, &mut key.aux_rng()));
        }

        let time = born + lifetime;
        let arity = self.params.offspring.sample(rng.random::<f64>());
        let mut children = Vec::with_capacity(arity);
        for i in 0..arity {
            self.path.push(i as u32);
            let value = self.visit(key.child(i), &position, time);
            self.path.pop();
            children.push(value?);
        }
        let record = BranchRecord {
            time,
            position: &position,
            path: &self.path,
        };
        Ok((self.combine_fn)(&record, children, &mut key.aux_rng()))
    }
}

/// Samples one genealogy up to time `t` from `x0` and folds it bottom-up.
///
/// `leaf_fn` maps each particle alive at `t` to a value; `combine_fn` maps a
/// branching event and its children's values (one per child, in child order)
/// to the parent's value. The root's value is returned.
pub fn fold_tree<T, L, C>(
    params: &GenealogyParams,
    t: f64,
    x0: &[f64],
    root: NodeKey,
    options: FoldOptions,
    leaf_fn: L,
    combine_fn: C,
) -> Result<T, BbmError>
where
    L: FnMut(&LeafRecord<'_>, &mut AuxRng) -> T,
    C: FnMut(&BranchRecord<'_>, Vec<T>, &mut AuxRng) -> T,
{
    if !(t.is_finite() && t >= 0.0) {
        return Err(BbmError::Time(t));
    }
    if x0.len() != params.dimension {
        return Err(BbmError::Dimension {
            expected: params.dimension,
            found: x0.len(),
        });
    }
    let mut walker = Walker {
        params,
        t_end: t,
        cap: options.population_cap,
        leaves: 0,
        path: Vec::new(),
        leaf_fn,
        combine_fn,
    };
    walker.visit(root, x0, 0.0)
}

/// Indented outline of one tree: branch events with time, position and arity, then leaves.
pub fn dump_tree(
    params: &GenealogyParams,
    t: f64,
    x0: &[f64],
    root: NodeKey,
) -> Result<String, BbmError> {
    fn fmt_pos(p: &[f64]) -> String {
        let parts: Vec<String> = p.iter().map(|x| format!("{x:.6}")).collect();
        parts.join(", ")
    }
    let lines = fold_tree(
        params,
        t,
        x0,
        root,
        FoldOptions::default(),
        |leaf, _| vec![format!("leaf t={t:.6} x=({})", fmt_pos(leaf.position))],
        |branch, children, _| {
            let mut out = vec![format!(
                "branch t={:.6} x=({}) arity={}",
                branch.time,
                fmt_pos(branch.position),
                children.len()
            )];
            for line in children.into_iter().flatten() {
                out.push(format!("  {line}"));
            }
            out
        },
    )?;
    let mut text = String::new();
    for line in lines {
        let _ = writeln!(text, "{line}");
    }
    Ok(text)
}
