//! Seeded 2-D t-SNE over interaction embeddings.

use bhtsne::tSNE;
use nmmp::pedestrian::sample_noise;

use crate::{CliError, CliResult};

/// Perplexity used when none is given: a third of the neighbourhood, capped at 30.
pub fn default_perplexity(n: usize) -> f64 {
    ((n.saturating_sub(1)) as f64 / 3.0).clamp(0.5, 30.0)
}

/// Exact t-SNE with a seeded Gaussian start, run on a single thread so repeated runs
/// produce identical coordinates.
pub fn project(points: &[Vec<f64>], seed: u64, perplexity: Option<f64>, epochs: usize) -> CliResult<Vec<[f64; 2]>> {
    let n = points.len();
    if n < 2 {
        return Err(CliError::data(format!("need at least 2 interactions to project, got {n}")));
    }
    let perplexity = perplexity.unwrap_or_else(|| default_perplexity(n));
    if !(perplexity > 0.0) || (n - 1) < 3 * perplexity.floor() as usize {
        return Err(CliError::config(format!("perplexity {perplexity} is too large for {n} points")));
    }
    let init: Vec<f64> = sample_noise::<f64>(n, 2, seed).data().iter().map(|v| v * 1e-4).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| CliError::data(e.to_string()))?;
    let rows: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    let flat = pool.install(|| {
        let mut t: tSNE<f64, &[f64]> = tSNE::new(&rows);
        t.perplexity(perplexity).epochs(epochs.max(1)).initial_embedding(init);
        t.exact(|a, b| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
        t.embedding()
    });
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(CliError::data("projection produced non-finite coordinates"));
    }
    Ok(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}
