//! Model scalars, the unnormalized Gibbs weight and the critical point.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};

/// Parameters of the mean-field random-cluster model on `n` vertices.
///
/// The edge probability is always derived as `lambda / n`; it is never
/// stored on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: usize,
    q: f64,
    lambda: f64,
    /// Permits `q = 1` in the Chayes-Machta routines, where the chain
    /// degenerates to independent re-percolation of every vertex.
    #[serde(default)]
    unit_q_oracle: bool,
}

impl ModelParams {
    pub fn new(n: usize, q: f64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("vertex count must be positive"));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(domain(format!("cluster weight q must be positive, got {q}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(domain(format!("lambda must be positive, got {lambda}")));
        }
        if lambda >= n as f64 {
            return Err(domain(format!(
                "edge probability lambda/n = {lambda}/{n} must lie in (0,1)"
            )));
        }
        Ok(ModelParams {
            n,
            q,
            lambda,
            unit_q_oracle: false,
        })
    }

    /// Parameters given by the edge probability instead of `lambda`.
    pub fn with_edge_probability(n: usize, q: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("edge probability must lie in (0,1), got {p}")));
        }
        Self::new(n, q, p * n as f64)
    }

    /// `q = 1` parameters with the Chayes-Machta oracle flag set.
    pub fn unit_q_oracle(n: usize, lambda: f64) -> Result<Self> {
        let mut params = Self::new(n, 1.0, lambda)?;
        params.unit_q_oracle = true;
        Ok(params)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.lambda / self.n as f64
    }

    pub fn is_unit_q_oracle(&self) -> bool {
        self.unit_q_oracle
    }

    /// Probability with which the Chayes-Machta step activates a component.
    pub fn activation_probability(&self) -> f64 {
        1.0 / self.q
    }

    /// Heat-bath probability of opening a cut edge, `p / (p + q(1-p))`.
    pub fn cut_edge_open_probability(&self) -> f64 {
        let p = self.p();
        p / (p + self.q * (1.0 - p))
    }

    /// The Chayes-Machta chain needs `q > 1`, or `q = 1` behind the oracle flag.
    pub fn require_cm(&self) -> Result<()> {
        if self.q > 1.0 || (self.q == 1.0 && self.unit_q_oracle) {
            Ok(())
        } else if self.q == 1.0 {
            Err(domain("q = 1 requires the unit-q oracle flag"))
        } else {
            Err(domain(format!("CM dynamics requires q > 1, got {}", self.q)))
        }
    }

    pub fn require_glauber(&self) -> Result<()> {
        if self.q >= 1.0 {
            Ok(())
        } else {
            Err(domain(format!("Glauber dynamics requires q >= 1, got {}", self.q)))
        }
    }

    /// Number of colours for Swendsen-Wang; `q` must be a positive integer.
    pub fn integer_q(&self) -> Result<usize> {
        if self.q >= 1.0 && self.q.fract() == 0.0 {
            Ok(self.q as usize)
        } else {
            Err(domain(format!(
                "Swendsen-Wang dynamics requires integer q, got {}",
                self.q
            )))
        }
    }
}

/// Edge and component counts of a configuration `A ⊆ E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub open_edges: u64,
    pub total_edges: u64,
    pub components: u64,
}

impl ConfigSummary {
    pub fn new(open_edges: u64, total_edges: u64, components: u64) -> Result<Self> {
        if open_edges > total_edges {
            return Err(invalid(format!(
                "open edge count {open_edges} exceeds total {total_edges}"
            )));
        }
        if components == 0 {
            return Err(invalid("a configuration has at least one component"));
        }
        Ok(ConfigSummary {
            open_edges,
            total_edges,
            components,
        })
    }
}

/// Unnormalized log Gibbs weight `|A| ln p + (|E|-|A|) ln(1-p) + c(A) ln q`.
pub fn gibbs_log_weight(summary: &ConfigSummary, params: &ModelParams) -> Result<f64> {
    let p = params.p();
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("log weight diverges at p = {p}")));
    }
    if summary.open_edges > summary.total_edges {
        return Err(invalid("open edges exceed total edges"));
    }
    if summary.components == 0 || summary.components > params.n() as u64 {
        return Err(invalid(format!(
            "component count {} outside [1, {}]",
            summary.components,
            params.n()
        )));
    }
    let open = summary.open_edges as f64;
    let closed = (summary.total_edges - summary.open_edges) as f64;
    Ok(open * p.ln() + closed * (1.0 - p).ln() + summary.components as f64 * params.q().ln())
}

/// Critical value of `lambda` for cluster weight `q`.
///
/// Equals `q` on `(0, 2]` and `2 (q-1)/(q-2) ln(q-1)` above 2.
pub fn critical_lambda(q: f64) -> Result<f64> {
    if !(q.is_finite() && q > 0.0) {
        return Err(domain(format!("critical point needs q > 0, got {q}")));
    }
    if q <= 2.0 {
        return Ok(q);
    }
    let x = q - 2.0;
    // (q-1)/(q-2) ln(q-1) = ln(1+x)/x * (1+x); use ln_1p to stay accurate at q -> 2+.
    Ok(2.0 * (1.0 + x) * x.ln_1p() / x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_p(n: usize, q: f64, p: f64) -> ModelParams {
        ModelParams::with_edge_probability(n, q, p).unwrap()
    }

    #[test]
    fn gibbs_weight_examples() {
        let params = params_p(3, 2.0, 0.5);
        let empty = ConfigSummary::new(0, 3, 3).unwrap();
        assert!(gibbs_log_weight(&empty, &params).unwrap().abs() < 1e-12);

        let one_edge = ConfigSummary::new(1, 3, 2).unwrap();
        let w = gibbs_log_weight(&one_edge, &params).unwrap();
        assert!((w - 0.5f64.ln()).abs() < 1e-12);

        for &(p, q) in &[(0.3, 1.5), (0.5, 3.0), (0.9, 2.0)] {
            let params = params_p(3, q, p);
            let full = ConfigSummary::new(3, 3, 1).unwrap();
            let w = gibbs_log_weight(&full, &params).unwrap();
            assert!((w - (3.0 * p.ln() + q.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_weight_rejects_bad_summary() {
        let params = params_p(3, 2.0, 0.5);
        assert!(ConfigSummary::new(4, 3, 1).is_err());
        assert!(ConfigSummary::new(0, 3, 0).is_err());
        let too_many = ConfigSummary::new(0, 3, 4).unwrap();
        assert!(gibbs_log_weight(&too_many, &params).is_err());
    }

    #[test]
    fn degenerate_edge_probability_is_rejected() {
        assert!(ModelParams::with_edge_probability(3, 2.0, 0.0).is_err());
        assert!(ModelParams::with_edge_probability(3, 2.0, 1.0).is_err());
        assert!(ModelParams::new(3, 2.0, 3.0).is_err());
    }

    #[test]
    fn critical_lambda_examples() {
        assert_eq!(critical_lambda(1.5).unwrap(), 1.5);
        assert_eq!(critical_lambda(2.0).unwrap(), 2.0);
        let three = critical_lambda(3.0).unwrap();
        assert!((three - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert!((three - 2.77259).abs() < 1e-5);
        assert!(critical_lambda(0.0).is_err());
        assert!(critical_lambda(-1.0).is_err());
    }

    #[test]
    fn critical_lambda_is_continuous_at_two() {
        // Both branches have unit slope at q = 2, so at 2 ± h the value sits within h of the limit.
        for h in [1e-6, 1e-9, 1e-12] {
            let below = critical_lambda(2.0 - h).unwrap();
            let above = critical_lambda(2.0 + h).unwrap();
            assert!((below - 2.0).abs() <= h + 1e-9, "{below}");
            assert!((above - 2.0).abs() <= h + 1e-9, "{above}");
        }
    }

    #[test]
    fn heat_bath_probability_never_exceeds_p() {
        for &q in &[1.0, 1.5, 2.0, 3.0, 10.0] {
            for &p in &[0.01, 0.3, 0.5, 0.99] {
                let params = params_p(10, q, p);
                assert!(params.cut_edge_open_probability() <= p + 1e-15);
            }
        }
        let params = params_p(2, 2.0, 0.5);
        assert!((params.cut_edge_open_probability() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cm_requires_flag_for_unit_q() {
        let plain = ModelParams::new(10, 1.0, 1.0).unwrap();
        assert!(plain.require_cm().is_err());
        let oracle = ModelParams::unit_q_oracle(10, 1.0).unwrap();
        assert!(oracle.require_cm().is_ok());
        assert!(ModelParams::new(10, 0.5, 1.0).unwrap().require_cm().is_err());
        assert!(ModelParams::new(10, 2.5, 1.0).unwrap().integer_q().is_err());
        assert_eq!(ModelParams::new(10, 3.0, 1.0).unwrap().integer_q().unwrap(), 3);
    }
}
