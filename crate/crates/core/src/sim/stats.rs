use serde::Serialize;

/// Streaming mean and variance. Merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Accumulator) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n > 0 {
            (self.variance() / self.n as f64).sqrt()
        } else {
            f64::NAN
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean(),
            std_error: self.std_error(),
            n: self.n,
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut a = Accumulator::new();
        for x in iter {
            a.push(x);
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let all: Accumulator = xs.iter().copied().collect();
        let mut a: Accumulator = xs[..40].iter().copied().collect();
        let b: Accumulator = xs[40..].iter().copied().collect();
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
        assert_eq!(a.count(), 100);
    }
}
