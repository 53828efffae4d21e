use serde::{Deserialize, Serialize};

/// One iteration of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// `||M - U V||_F`
    pub error: f64,
    /// `||min(V, 0)||_F / ||V||_F`
    pub neg_residual: f64,
    /// `||V V^T - I||_F`
    pub orth_residual: f64,
    /// Accepted line-search step; `None` for the EM-type methods.
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub elapsed_ms: f64,
}

impl TraceRow {
    /// Equality on every field except wall time.
    pub fn same_numerics(&self, other: &Self) -> bool {
        self.iteration == other.iteration
            && self.error.to_bits() == other.error.to_bits()
            && self.neg_residual.to_bits() == other.neg_residual.to_bits()
            && self.orth_residual.to_bits() == other.orth_residual.to_bits()
            && self.beta.map(f64::to_bits) == other.beta.map(f64::to_bits)
            && self.rho.map(f64::to_bits) == other.rho.map(f64::to_bits)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Bit-level comparison of the numeric columns, ignoring `elapsed_ms`.
    pub fn same_numerics(&self, other: &Self) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_numerics(b))
    }
}
