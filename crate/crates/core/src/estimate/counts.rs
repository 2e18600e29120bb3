/// Law of the number of successes among independent Bernoulli trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pub probs: Vec<f64>,
}

impl CountDistribution {
    /// `sum_k probs[k] * alpha[k]`.
    pub fn expect(&self, alpha: &[f64]) -> f64 {
        self.probs.iter().zip(alpha).map(|(p, a)| p * a).sum()
    }

    /// Probability of at least `k` successes.
    pub fn tail(&self, k: usize) -> f64 {
        self.probs.iter().skip(k).sum()
    }
}

/// Exact `O(n^2)` convolution.
pub fn poisson_binomial(q: &[f64]) -> CountDistribution {
    let mut probs = Vec::with_capacity(q.len() + 1);
    probs.push(1.0);
    for &qi in q {
        probs.push(0.0);
        for k in (1..probs.len()).rev() {
            probs[k] = probs[k] * (1.0 - qi) + probs[k - 1] * qi;
        }
        probs[0] *= 1.0 - qi;
    }
    CountDistribution { probs }
}
