//! Distance from an explicit source to the family of `k`-block-sources.
//!
//! The family is cut out by linear constraints on a candidate distribution
//! `q` over `{0,1}^n`, written with left half `a` and right half `b`:
//!
//! * `q_L(a) = sum_b q(a,b) <= 2^-k` for every `a`;
//! * `q(a,b) <= 2^-k * q_L(a)` for every `(a,b)`.
//!
//! The statistical distance to `p` is `sum_x max(p(x) - q(x), 0)`, so only the
//! support of `p` enters the objective. Mass placed outside the support is
//! aggregated: per supported left value, one variable for the extra mass
//! spread evenly over its unsupported right halves, and one variable for the
//! mass spread evenly over unsupported left values (with uniform right
//! halves, whose conditionals are always `2^-(n/2) <= 2^-k`). Even spreading
//! only loosens the constraints, so the aggregated program has the same
//! optimum as the full one.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::source::{mass_to_f64, ExplicitSource};

/// Values below this are reported as exactly zero.
const ZERO_SNAP: f64 = 1e-10;

impl ExplicitSource {
    /// Minimum statistical distance to a `k`-block-source with halves of
    /// `n/2` bits.
    pub fn distance_to_block_source(&self, k: f64) -> Result<f64> {
        if self.n() % 2 == 1 {
            return Err(Error::OddLength(self.n()));
        }
        let half = self.n() / 2;
        if !(k <= half as f64) || k.is_nan() {
            return Err(Error::EntropyOutOfRange { k, max: half as f64 });
        }
        if k <= 0.0 {
            return Ok(0.0);
        }
        let cap = (-k).exp2();
        let right_values = (half as f64).exp2();
        let fibers = self.fibers()?;

        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let mut total: Vec<(Variable, f64)> = Vec::new();

        for fiber in &fibers {
            let q: Vec<Variable> = fiber.atoms.iter().map(|_| lp.add_var(0.0, (0.0, cap))).collect();
            for ((_, p), &qv) in fiber.atoms.iter().zip(&q) {
                let p = mass_to_f64(p);
                let shortfall = lp.add_var(1.0, (0.0, p));
                lp.add_constraint([(qv, 1.0), (shortfall, 1.0)], ComparisonOp::Ge, p);
            }
            let free_slots = right_values - fiber.atoms.len() as f64;
            let extra = (free_slots > 0.0).then(|| lp.add_var(0.0, (0.0, cap)));

            // left marginal q_L(a) as a linear expression
            let mut marginal: Vec<(Variable, f64)> = q.iter().map(|&v| (v, 1.0)).collect();
            if let Some(e) = extra {
                marginal.push((e, 1.0));
            }
            lp.add_constraint(marginal.iter().copied(), ComparisonOp::Le, cap);

            for &qv in &q {
                let row = marginal.iter().map(|&(v, c)| if v == qv { (v, c - cap * c) } else { (v, -cap * c) });
                lp.add_constraint(row, ComparisonOp::Le, 0.0);
            }
            if let Some(e) = extra {
                let slot_cap = free_slots * cap;
                let row = marginal.iter().map(|&(v, c)| if v == e { (v, c - slot_cap * c) } else { (v, -slot_cap * c) });
                lp.add_constraint(row, ComparisonOp::Le, 0.0);
            }
            total.extend(marginal);
        }

        let free_left = right_values - fibers.len() as f64;
        if free_left > 0.0 {
            let outside = lp.add_var(0.0, (0.0, free_left * cap));
            total.push((outside, 1.0));
        }
        lp.add_constraint(total, ComparisonOp::Eq, 1.0);

        let solution = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
        let d = solution.objective().clamp(0.0, 1.0);
        Ok(if d < ZERO_SNAP { 0.0 } else { d })
    }
}
