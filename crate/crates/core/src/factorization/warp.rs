/// Precomputed rank weights Φ(k) = Σ_{i=1..k} 1/i.
#[derive(Clone, Debug)]
pub struct WarpWeights {
    table: Vec<f64>,
}

impl WarpWeights {
    /// Table covering `0..=max_rank`; Φ(0) = 0.
    pub fn new(max_rank: usize) -> Self {
        let mut table = Vec::with_capacity(max_rank + 1);
        let mut acc = 0.0;
        table.push(acc);
        for i in 1..=max_rank {
            acc += 1.0 / i as f64;
            table.push(acc);
        }
        WarpWeights { table }
    }

    pub fn max_rank(&self) -> usize {
        self.table.len() - 1
    }

    pub fn phi(&self, rank: usize) -> f64 {
        self.table[rank.min(self.max_rank())]
    }
}

/// Rank estimate ⌊C / n⌋ for a violator found at trial `n` among `C` candidates,
/// never below 1 since a violator exists.
pub fn estimated_rank(candidates: usize, trial: usize) -> usize {
    (candidates / trial.max(1)).max(1)
}
