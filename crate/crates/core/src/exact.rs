//! Exhaustive oracle on complete graphs with at most four vertices.
//!
//! A configuration is a bitmask over the `C(n,2)` edge slots (lexicographic
//! pair order). Transition matrices are built by summing over every
//! activation or colouring choice and every resampled edge subset.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::dsu::DisjointSets;
use crate::error::{invalid, Error, Result};
use crate::inference::compensated_sum;
use crate::params::ModelParams;

/// Largest vertex count handled here (64 states at n = 4).
pub const EXACT_MAX_N: usize = 4;

/// Step cap for [`mixing_time_exact`].
pub const MAX_MIXING_STEPS: usize = 1_000_000;

fn edge_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect()
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > EXACT_MAX_N {
        return Err(Error::TooLarge(format!(
            "exact enumeration needs 1 <= n <= {EXACT_MAX_N}, got {n}"
        )));
    }
    Ok(())
}

/// Vertex -> component root for the configuration `mask`.
fn component_roots(n: usize, pairs: &[(usize, usize)], mask: u32) -> Vec<usize> {
    let mut dsu = DisjointSets::new(n);
    for (bit, &(i, j)) in pairs.iter().enumerate() {
        if mask >> bit & 1 == 1 {
            dsu.union(i, j);
        }
    }
    (0..n).map(|v| dsu.find(v)).collect()
}

fn component_count(roots: &[usize]) -> usize {
    roots.iter().enumerate().filter(|&(v, &r)| v == r).count()
}

/// Edge slots whose endpoints both satisfy `inside`.
fn slots_within(pairs: &[(usize, usize)], inside: impl Fn(usize) -> bool) -> u32 {
    pairs
        .iter()
        .enumerate()
        .filter(|&(_, &(i, j))| inside(i) && inside(j))
        .fold(0u32, |m, (bit, _)| m | 1 << bit)
}

/// Adds the percolation law on the slot set `free` to `row`, keeping the bits
/// `kept` fixed, scaled by `weight`.
fn add_percolation(row: &mut [f64], kept: u32, free: u32, p: f64, weight: f64) {
    let k = free.count_ones() as i32;
    // enumerate all submasks of `free`
    let mut sub = free;
    loop {
        let open = sub.count_ones() as i32;
        row[(kept | sub) as usize] += weight * p.powi(open) * (1.0 - p).powi(k - open);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & free;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix {
    pub n: usize,
    /// Configuration masks, `states[i] == i`.
    pub states: Vec<u32>,
    pub matrix: DMatrix<f64>,
    pub pi: Vec<f64>,
}

impl ChainMatrix {
    /// Wraps an arbitrary chain; used for hand-built examples.
    pub fn new(matrix: DMatrix<f64>, pi: Vec<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != pi.len() {
            return Err(invalid("matrix and stationary vector dimensions disagree"));
        }
        Ok(ChainMatrix {
            n: 0,
            states: (0..pi.len() as u32).collect(),
            matrix,
            pi,
        })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `max_y |(πP)(y) - π(y)|`.
    pub fn stationarity_residual(&self) -> f64 {
        (0..self.len())
            .map(|y| {
                let flow = compensated_sum((0..self.len()).map(|x| self.pi[x] * self.matrix[(x, y)]));
                (flow - self.pi[y]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max_{x,y} |π(x)P(x,y) - π(y)P(y,x)|`.
    pub fn reversibility_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.len() {
            for y in (x + 1)..self.len() {
                let diff = self.pi[x] * self.matrix[(x, y)] - self.pi[y] * self.matrix[(y, x)];
                worst = worst.max(diff.abs());
            }
        }
        worst
    }

    /// `max_x |Σ_y P(x,y) - 1|`.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.len())
            .map(|x| (compensated_sum(self.matrix.row(x).iter().copied()) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `min π(A)` over configurations with at most `max_edges` open edges.
    pub fn pi_min_over(&self, max_edges: u32) -> f64 {
        self.states
            .iter()
            .zip(&self.pi)
            .filter(|(s, _)| s.count_ones() <= max_edges)
            .map(|(_, &p)| p)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Exact Gibbs vector indexed by configuration mask.
pub fn gibbs_exact(n: usize, params: &ModelParams) -> Result<Vec<f64>> {
    check_n(n)?;
    let pairs = edge_pairs(n);
    let e = pairs.len() as i32;
    let (p, q) = (params.p(), params.q());
    let weights: Vec<f64> = (0..1u32 << e)
        .map(|mask| {
            let open = mask.count_ones() as i32;
            let c = component_count(&component_roots(n, &pairs, mask)) as i32;
            p.powi(open) * (1.0 - p).powi(e - open) * q.powi(c)
        })
        .collect();
    let total = compensated_sum(weights.iter().copied());
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn assemble(n: usize, params: &ModelParams, rows: Vec<Vec<f64>>) -> Result<ChainMatrix> {
    let size = rows.len();
    let matrix = DMatrix::from_fn(size, size, |i, j| rows[i][j]);
    Ok(ChainMatrix {
        n,
        states: (0..size as u32).collect(),
        matrix,
        pi: gibbs_exact(n, params)?,
    })
}

fn check_params(n: usize, params: &ModelParams) -> Result<()> {
    check_n(n)?;
    if params.n() != n {
        return Err(invalid("parameters were built for a different n"));
    }
    Ok(())
}

/// Exact CM transition matrix. Each component is active with probability
/// `1/q`; edges with both endpoints active are resampled, all others kept.
pub fn cm_matrix_exact(n: usize, params: &ModelParams) -> Result<ChainMatrix> {
    check_params(n, params)?;
    params.require_cm()?;
    let pairs = edge_pairs(n);
    let states = 1usize << pairs.len();
    let r = params.activation_probability();
    let p = params.p();
    let mut rows = Vec::with_capacity(states);
    for mask in 0..states as u32 {
        let roots = component_roots(n, &pairs, mask);
        let comp_roots: Vec<usize> = (0..n).filter(|&v| roots[v] == v).collect();
        let c = comp_roots.len();
        let mut row = vec![0.0; states];
        for subset in 0u32..1 << c {
            let k = subset.count_ones() as i32;
            let weight = r.powi(k) * (1.0 - r).powi(c as i32 - k);
            if weight == 0.0 {
                continue;
            }
            let active = |v: usize| {
                let idx = comp_roots.iter().position(|&x| x == roots[v]).expect("root listed");
                subset >> idx & 1 == 1
            };
            for (bit, &(i, j)) in pairs.iter().enumerate() {
                if mask >> bit & 1 == 1 && active(i) != active(j) {
                    return Err(Error::Invariant(format!(
                        "open edge ({i},{j}) joins an active and an inactive vertex"
                    )));
                }
            }
            let free = slots_within(&pairs, active);
            add_percolation(&mut row, mask & !free, free, p, weight);
        }
        rows.push(row);
    }
    assemble(n, params, rows)
}

/// Exact Swendsen-Wang matrix for integer `q`: uniform colours per
/// component, every edge inside a colour class resampled, all others closed.
pub fn sw_matrix_exact(n: usize, params: &ModelParams) -> Result<ChainMatrix> {
    check_params(n, params)?;
    let colours = params.integer_q()?;
    let pairs = edge_pairs(n);
    let states = 1usize << pairs.len();
    let p = params.p();
    let mut rows = Vec::with_capacity(states);
    for mask in 0..states as u32 {
        let roots = component_roots(n, &pairs, mask);
        let comp_roots: Vec<usize> = (0..n).filter(|&v| roots[v] == v).collect();
        let c = comp_roots.len() as u32;
        let mut row = vec![0.0; states];
        let weight = (colours as f64).powi(-(c as i32));
        for code in 0..(colours as u32).pow(c) {
            let colour_of = |v: usize| {
                let idx = comp_roots.iter().position(|&x| x == roots[v]).expect("root listed") as u32;
                code / (colours as u32).pow(idx) % colours as u32
            };
            let same: u32 = pairs
                .iter()
                .enumerate()
                .filter(|&(_, &(i, j))| colour_of(i) == colour_of(j))
                .fold(0, |m, (bit, _)| m | 1 << bit);
            add_percolation(&mut row, 0, same, p, weight);
        }
        rows.push(row);
    }
    assemble(n, params, rows)
}

/// Exact heat-bath Glauber matrix.
pub fn glauber_matrix_exact(n: usize, params: &ModelParams) -> Result<ChainMatrix> {
    check_params(n, params)?;
    params.require_glauber()?;
    let pairs = edge_pairs(n);
    if pairs.is_empty() {
        return Err(invalid("Glauber dynamics needs at least one edge"));
    }
    let states = 1usize << pairs.len();
    let choice = 1.0 / pairs.len() as f64;
    let mut rows = Vec::with_capacity(states);
    for mask in 0..states as u32 {
        let mut row = vec![0.0; states];
        for (bit, &(i, j)) in pairs.iter().enumerate() {
            let without = mask & !(1 << bit);
            let roots = component_roots(n, &pairs, without);
            let prob = if roots[i] != roots[j] {
                params.cut_edge_open_probability()
            } else {
                params.p()
            };
            row[(without | 1 << bit) as usize] += choice * prob;
            row[without as usize] += choice * (1.0 - prob);
        }
        rows.push(row);
    }
    assemble(n, params, rows)
}

/// One CM step on an explicit edge configuration; used to cross-check
/// [`cm_matrix_exact`] by simulation.
pub fn sample_cm_transition<R: Rng + ?Sized>(
    n: usize,
    mask: u32,
    params: &ModelParams,
    rng: &mut R,
) -> Result<u32> {
    check_params(n, params)?;
    let pairs = edge_pairs(n);
    let roots = component_roots(n, &pairs, mask);
    let r = params.activation_probability();
    let mut active_root = vec![false; n];
    for v in 0..n {
        if roots[v] == v {
            active_root[v] = r >= 1.0 || rng.random::<f64>() < r;
        }
    }
    let free = slots_within(&pairs, |v| active_root[roots[v]]);
    let mut next = mask & !free;
    for bit in 0..pairs.len() {
        if free >> bit & 1 == 1 && rng.random::<f64>() < params.p() {
            next |= 1 << bit;
        }
    }
    Ok(next)
}

/// `1 - SLEM` of the π-symmetrised matrix `D^{1/2} P D^{-1/2}`.
pub fn spectral_gap(chain: &ChainMatrix) -> Result<f64> {
    let residual = chain.reversibility_residual();
    if residual > 1e-9 {
        return Err(invalid(format!(
            "spectral gap needs a reversible chain; detailed balance residual {residual:e}"
        )));
    }
    if chain.pi.iter().any(|&p| p <= 0.0) {
        return Err(invalid("stationary vector must be strictly positive"));
    }
    let size = chain.len();
    let root: Vec<f64> = chain.pi.iter().map(|p| p.sqrt()).collect();
    let sym = DMatrix::from_fn(size, size, |i, j| {
        let a = root[i] * chain.matrix[(i, j)] / root[j];
        let b = root[j] * chain.matrix[(j, i)] / root[i];
        0.5 * (a + b)
    });
    let mut eigen: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigen.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    // the top eigenvalue belongs to sqrt(π); the rest give the SLEM
    let slem = eigen[1..].iter().map(|l| l.abs()).fold(0.0, f64::max);
    Ok((1.0 - slem).max(0.0))
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * compensated_sum(a.iter().zip(b).map(|(x, y)| (x - y).abs()))
}

/// Worst-start total variation distance of `P^t` from `π`.
pub fn worst_distance(chain: &ChainMatrix, power: &DMatrix<f64>) -> f64 {
    (0..chain.len())
        .map(|x| {
            let row: Vec<f64> = power.row(x).iter().copied().collect();
            total_variation(&row, &chain.pi)
        })
        .fold(0.0, f64::max)
}

/// Smallest `t` with `max_x TV(P^t(x, ·), π) <= eps`.
pub fn mixing_time_exact(chain: &ChainMatrix, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(invalid("mixing threshold must be positive"));
    }
    // guard for summation noise
    let eps = eps + 1e-12;
    let mut power = DMatrix::identity(chain.len(), chain.len());
    for t in 0..=MAX_MIXING_STEPS {
        if worst_distance(chain, &power) <= eps {
            return Ok(t);
        }
        power = &power * &chain.matrix;
    }
    Err(invalid(format!("chain did not mix within {MAX_MIXING_STEPS} steps")))
}

/// Summary emitted by the `exact` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSummary {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub gap_cm: f64,
    pub gap_gd: f64,
    pub tmix_cm: usize,
    pub tmix_gd: usize,
    pub stationarity_residual: f64,
    pub reversibility_residual: f64,
    pub pi_empty: f64,
    pub pi_min: f64,
}

pub fn exact_summary(params: &ModelParams) -> Result<ExactSummary> {
    let n = params.n();
    let cm = cm_matrix_exact(n, params)?;
    let gd = glauber_matrix_exact(n, params)?;
    Ok(ExactSummary {
        n,
        p: params.p(),
        q: params.q(),
        gap_cm: spectral_gap(&cm)?,
        gap_gd: spectral_gap(&gd)?,
        tmix_cm: mixing_time_exact(&cm, 0.25)?,
        tmix_gd: mixing_time_exact(&gd, 0.25)?,
        stationarity_residual: cm.stationarity_residual().max(gd.stationarity_residual()),
        reversibility_residual: cm.reversibility_residual().max(gd.reversibility_residual()),
        pi_empty: cm.pi[0],
        pi_min: cm.pi.iter().copied().fold(f64::INFINITY, f64::min),
    })
}
