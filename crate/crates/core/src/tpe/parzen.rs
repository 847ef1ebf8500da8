use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// One-dimensional Parzen mixture on `[low, high]`: a truncated normal per
/// observation plus a uniform prior component, all equally weighted.
#[derive(Debug, Clone)]
pub struct ParzenEstimator {
    low: f64,
    high: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
}

/// Smallest bandwidth as a share of the range, reached at 99 observations.
const MIN_BANDWIDTH: f64 = 0.01;

impl ParzenEstimator {
    pub fn new(observations: &[f64], low: f64, high: f64) -> Self {
        let range = high - low;
        // the floor shrinks from the full range toward 1% as observations accumulate
        let floor = range * (1.0 / (observations.len() as f64 + 1.0)).max(MIN_BANDWIDTH);
        let mut mus: Vec<f64> = observations.iter().map(|x| x.clamp(low, high)).collect();
        mus.sort_by(|a, b| a.partial_cmp(b).expect("finite observations"));
        let sigmas = (0..mus.len())
            .map(|i| {
                let left = if i == 0 { mus[i] - low } else { mus[i] - mus[i - 1] };
                let right = if i + 1 == mus.len() { high - mus[i] } else { mus[i + 1] - mus[i] };
                left.max(right).clamp(floor, range)
            })
            .collect();
        ParzenEstimator { low, high, mus, sigmas }
    }

    fn n_components(&self) -> usize {
        self.mus.len() + 1
    }

    fn component(&self, i: usize) -> (Normal, f64) {
        let n = Normal::new(self.mus[i], self.sigmas[i]).expect("positive bandwidth");
        let mass = n.cdf(self.high) - n.cdf(self.low);
        (n, mass)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x < self.low || x > self.high {
            return f64::NEG_INFINITY;
        }
        let w = -(self.n_components() as f64).ln();
        let mut terms = Vec::with_capacity(self.n_components());
        terms.push(w - (self.high - self.low).ln());
        for i in 0..self.mus.len() {
            let (n, mass) = self.component(i);
            terms.push(w + n.ln_pdf(x) - mass.max(f64::MIN_POSITIVE).ln());
        }
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = rng.gen_range(0..self.n_components());
        if c == self.mus.len() {
            return rng.gen_range(self.low..=self.high);
        }
        let (n, _) = self.component(c);
        let (a, b) = (n.cdf(self.low), n.cdf(self.high));
        let u = a + (b - a) * rng.gen::<f64>();
        let x = if b - a > 1e-12 { n.inverse_cdf(u) } else { self.mus[c] };
        x.clamp(self.low, self.high)
    }
}

/// Log of the density ratio used to rank candidates.
pub fn selection_score(good: &ParzenEstimator, bad: &ParzenEstimator, z: f64) -> f64 {
    good.log_pdf(z) - bad.log_pdf(z)
}
