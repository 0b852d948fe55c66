//! Lazy symmetric random walks with bounded steps, the difference coupling
//! built on them, and the maximal coupling of a binomial with its shift.

use rand::Rng;
use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::error::{domain, invalid, Result};
use crate::inference::{Proportion, Z_999};

/// Step sizes `c_1..c_m`, scale `A`, laziness `r` and target gap `d`.
///
/// Step `i` is `+c_i` or `-c_i` with probability `r` each and `0` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkSpec {
    pub step_sizes: Vec<u64>,
    pub scale: u64,
    pub r: f64,
    pub d: u64,
}

impl WalkSpec {
    pub fn new(step_sizes: Vec<u64>, scale: u64, r: f64, d: u64) -> Result<Self> {
        if scale == 0 {
            return Err(invalid("walk scale A must be positive"));
        }
        if !(r > 0.0 && r <= 0.5) {
            return Err(domain(format!("walk laziness r must lie in (0, 1/2], got {r}")));
        }
        if step_sizes.is_empty() {
            return Err(invalid("walk needs at least one step"));
        }
        Ok(WalkSpec {
            step_sizes,
            scale,
            r,
            d,
        })
    }

    /// Constant steps `c_i = c`.
    pub fn constant(c: u64, m: usize, scale: u64, r: f64, d: u64) -> Result<Self> {
        Self::new(vec![c; m], scale, r, d)
    }

    /// Steps drawn uniformly from `[A, max_factor * A]`.
    pub fn random_steps<R: Rng + ?Sized>(
        m: usize,
        scale: u64,
        max_factor: u64,
        r: f64,
        d: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let steps = (0..m)
            .map(|_| rng.random_range(scale..=max_factor * scale))
            .collect();
        Self::new(steps, scale, r, d)
    }

    pub fn len(&self) -> usize {
        self.step_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.step_sizes.is_empty()
    }

    fn check_steps(&self, max_factor: u64) -> Result<()> {
        let hi = max_factor * self.scale;
        match self
            .step_sizes
            .iter()
            .find(|&&c| c < self.scale || c > hi)
        {
            Some(c) => Err(invalid(format!(
                "step size {c} outside [{}, {hi}]",
                self.scale
            ))),
            None => Ok(()),
        }
    }
}

#[inline]
fn lazy_step<R: Rng + ?Sized>(c: u64, r: f64, rng: &mut R) -> i64 {
    let u: f64 = rng.random();
    if u < r {
        c as i64
    } else if u < 2.0 * r {
        -(c as i64)
    } else {
        0
    }
}

/// Empirical check of `Pr[M_n >= y] >= 2 Pr[S_n >= y + 8A + 1]`, where
/// `M_n = max(S_1..S_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxTailReport {
    pub y: i64,
    pub threshold: i64,
    pub max_tail: Proportion,
    pub shifted_sum_tail: Proportion,
    /// `max_tail - 2 shifted_sum_tail`.
    pub margin: f64,
    /// Allowed sampling slack: the 99.9% Wilson half-widths of both sides.
    pub slack: f64,
    pub holds: bool,
}

pub fn rw_max_tail<R: Rng + ?Sized>(
    spec: &WalkSpec,
    y: i64,
    trials: u64,
    rng: &mut R,
) -> Result<MaxTailReport> {
    spec.check_steps(4)?;
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let threshold = y + 8 * spec.scale as i64 + 1;
    let (mut max_hits, mut sum_hits) = (0u64, 0u64);
    for _ in 0..trials {
        let mut s = 0i64;
        let mut max = i64::MIN;
        for &c in &spec.step_sizes {
            s += lazy_step(c, spec.r, rng);
            max = max.max(s);
        }
        max_hits += u64::from(max >= y);
        sum_hits += u64::from(s >= threshold);
    }
    let max_tail = Proportion::wilson(max_hits, trials, Z_999);
    let shifted_sum_tail = Proportion::wilson(sum_hits, trials, Z_999);
    let margin = max_tail.estimate - 2.0 * shifted_sum_tail.estimate;
    let slack = max_tail.half_width() + 2.0 * shifted_sum_tail.half_width();
    Ok(MaxTailReport {
        y,
        threshold,
        max_tail,
        shifted_sum_tail,
        margin,
        slack,
        holds: margin >= -slack,
    })
}

/// Outcome of the difference coupling against its guaranteed lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceCouplingReport {
    pub success: Proportion,
    /// `delta = 10 / sqrt(r)`.
    pub delta: f64,
    /// `1 - delta (d + A) / (A sqrt(m))`; may be negative (vacuous).
    pub bound: f64,
    pub holds: bool,
}

/// Lower bound on the success probability of the difference coupling.
pub fn difference_coupling_bound(spec: &WalkSpec) -> (f64, f64) {
    let delta = 10.0 / spec.r.sqrt();
    let a = spec.scale as f64;
    let bound = 1.0 - delta * (spec.d as f64 + a) / (a * (spec.len() as f64).sqrt());
    (delta, bound)
}

/// Couples two copies of the walk so that `X - Y ∈ [d, d + 2A]` with high
/// probability: the step pairs are independent while the running difference
/// is below `d`, and identical from the first time it reaches `d`.
pub fn rw_difference_coupling<R: Rng + ?Sized>(
    spec: &WalkSpec,
    trials: u64,
    rng: &mut R,
) -> Result<DifferenceCouplingReport> {
    spec.check_steps(2)?;
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let d = spec.d as i64;
    let hi = d + 2 * spec.scale as i64;
    let mut hits = 0u64;
    for _ in 0..trials {
        // once diff >= d the remaining pairs are identical, so diff is final
        let mut diff = 0i64;
        for &c in &spec.step_sizes {
            if diff >= d {
                break;
            }
            diff += lazy_step(c, spec.r, rng) - lazy_step(c, spec.r, rng);
        }
        hits += u64::from(diff >= d && diff <= hi);
    }
    let success = Proportion::wilson(hits, trials, Z_999);
    let (delta, bound) = difference_coupling_bound(spec);
    Ok(DifferenceCouplingReport {
        holds: success.estimate >= bound - success.half_width(),
        success,
        delta,
        bound,
    })
}

/// Discrete law on `offset..offset + pmf.len()` with a cumulative table.
#[derive(Debug, Clone)]
pub struct DiscreteLaw {
    pub offset: i64,
    pub pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(offset: i64, pmf: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        DiscreteLaw { offset, pmf, cdf }
    }

    pub fn total(&self) -> f64 {
        self.cdf.last().copied().unwrap_or(0.0)
    }

    pub fn prob(&self, x: i64) -> f64 {
        let i = x - self.offset;
        if i < 0 || i as usize >= self.pmf.len() {
            0.0
        } else {
            self.pmf[i as usize]
        }
    }

    /// Samples proportionally to the (possibly unnormalized) weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u = rng.random::<f64>() * self.total();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.pmf.len() - 1);
        // skip zero-weight cells that share a cumulative value
        let mut i = i;
        while self.pmf[i] == 0.0 && i + 1 < self.pmf.len() {
            i += 1;
        }
        self.offset + i as i64
    }
}

/// `Binomial(m, r)` pmf, truncated to the window where it exceeds ~1e-60.
pub fn binomial_law(m: u64, r: f64) -> DiscreteLaw {
    if m == 0 {
        return DiscreteLaw::new(0, vec![1.0]);
    }
    let mean = m as f64 * r;
    let sd = (m as f64 * r * (1.0 - r)).sqrt();
    let half = (20.0 * sd + 30.0).ceil();
    let lo = (mean - half).floor().max(0.0) as u64;
    let hi = ((mean + half).ceil() as u64).min(m);
    let (ln_r, ln_q) = (r.ln(), (1.0 - r).ln());
    let pmf: Vec<f64> = (lo..=hi)
        .map(|k| (ln_binomial(m, k) + k as f64 * ln_r + (m - k) as f64 * ln_q).exp())
        .collect();
    let total: f64 = pmf.iter().sum();
    DiscreteLaw::new(lo as i64, pmf.into_iter().map(|p| p / total).collect())
}

/// Maximal coupling of `X ~ Binomial(m, r)` and `Y ~ Binomial(m, r)` that
/// maximises `Pr[X - Y = y]`. Both marginals are exact.
#[derive(Debug, Clone)]
pub struct BinomialShiftCoupling {
    shift: i64,
    overlap: DiscreteLaw,
    x_excess: DiscreteLaw,
    y_excess: DiscreteLaw,
    success: f64,
}

impl BinomialShiftCoupling {
    pub fn new(m: u64, r: f64, shift: i64) -> Self {
        let base = binomial_law(m, r);
        let lo = base.offset.min(base.offset + shift);
        let hi = base.offset + base.pmf.len() as i64 + shift.max(0);
        let mut overlap = Vec::new();
        let mut x_excess = Vec::new();
        let mut y_excess = Vec::new();
        for x in lo..hi {
            let bx = base.prob(x);
            let shifted = base.prob(x - shift);
            let o = bx.min(shifted);
            overlap.push(o);
            x_excess.push(bx - o);
            // Y + shift = x, Y = x - shift
            y_excess.push(shifted - o);
        }
        let overlap = DiscreteLaw::new(lo, overlap);
        let success = overlap.total().min(1.0);
        BinomialShiftCoupling {
            shift,
            overlap,
            x_excess: DiscreteLaw::new(lo, x_excess),
            y_excess: DiscreteLaw::new(lo - shift, y_excess),
            success,
        }
    }

    /// `1 - TV(Binomial, Binomial + y)`.
    pub fn success_probability(&self) -> f64 {
        self.success
    }

    /// Returns `(X, Y, coupled)`; `coupled` implies `X - Y = shift`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64, bool) {
        if self.success >= 1.0 || rng.random::<f64>() < self.success {
            let x = self.overlap.sample(rng);
            (x as u64, (x - self.shift) as u64, true)
        } else {
            let x = self.x_excess.sample(rng);
            let y = self.y_excess.sample(rng);
            (x as u64, y as u64, x - y == self.shift)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftCouplingReport {
    pub success: Proportion,
    pub exact_success: f64,
}

/// Empirical success frequency of [`BinomialShiftCoupling`] for `X - Y = y`.
pub fn binomial_shift_coupling<R: Rng + ?Sized>(
    m: u64,
    r: f64,
    y: u64,
    trials: u64,
    rng: &mut R,
) -> Result<ShiftCouplingReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(domain(format!("binomial parameter r must lie in (0,1), got {r}")));
    }
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if y > m {
        return Ok(ShiftCouplingReport {
            success: Proportion::wilson(0, trials, Z_999),
            exact_success: 0.0,
        });
    }
    let coupling = BinomialShiftCoupling::new(m, r, y as i64);
    let hits = (0..trials)
        .filter(|_| {
            let (x, yv, _) = coupling.sample(rng);
            x as i64 - yv as i64 == y as i64
        })
        .count() as u64;
    Ok(ShiftCouplingReport {
        success: Proportion::wilson(hits, trials, Z_999),
        exact_success: coupling.success_probability(),
    })
}
