//! Log-domain accumulation, compensated sums and small numeric helpers.

/// Compensated (Kahan) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// log(Σ exp(x_i)) over a slice, stable against overflow; empty input gives −∞.
/// Entries of −∞ are skipped; any +∞ entry makes the result +∞.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v.is_infinite() && v > 0.0 {
            return f64::INFINITY;
        }
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = KahanSum::new();
    for &v in values {
        if v > f64::NEG_INFINITY {
            acc.add((v - max).exp());
        }
    }
    max + acc.value().ln()
}

/// Streaming log-sum-exp accumulator for enumerations too large to collect.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    max: f64,
    acc: KahanSum,
    saw_pos_inf: bool,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            acc: KahanSum::new(),
            saw_pos_inf: false,
        }
    }

    pub fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v == f64::INFINITY {
            self.saw_pos_inf = true;
            return;
        }
        if v > self.max {
            // rescale the running sum to the new maximum
            if self.max > f64::NEG_INFINITY {
                let scale = (self.max - v).exp();
                let mut rescaled = KahanSum::new();
                rescaled.add(self.acc.value() * scale);
                self.acc = rescaled;
            }
            self.max = v;
        }
        self.acc.add((v - self.max).exp());
    }

    pub fn value(&self) -> f64 {
        if self.saw_pos_inf {
            f64::INFINITY
        } else if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.value().ln()
        }
    }
}

/// Cumulative table of ln(i!) for i in 0..=n.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    let mut acc = KahanSum::new();
    t.push(0.0);
    for i in 1..=n {
        acc.add((i as f64).ln());
        t.push(acc.value());
    }
    t
}

/// |I_n^k| = n·(n−1)···(n−k+1) as an exact integer; None when n < k.
pub fn falling_factorial(n: usize, k: usize) -> Option<u128> {
    if n < k {
        return None;
    }
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.checked_mul((n - j) as u128)?;
    }
    Some(acc)
}

/// Deterministic seed derivation (splitmix64 finalizer over seed ⊕ tagged stream).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mean and standard error of the mean over a slice (batch of estimates).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Leave-one-out jackknife standard error of log(mean(x)) over block means.
pub fn jackknife_log_mean_stderr(block_means: &[f64]) -> f64 {
    let b = block_means.len();
    if b < 2 {
        return 0.0;
    }
    let total: f64 = block_means.iter().sum();
    let mut loo = Vec::with_capacity(b);
    for &m in block_means {
        let rest = (total - m) / (b - 1) as f64;
        loo.push(if rest > 0.0 { rest.ln() } else { f64::NEG_INFINITY });
    }
    if loo.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let loo_mean = loo.iter().sum::<f64>() / b as f64;
    let ss: f64 = loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).sum();
    ((b - 1) as f64 / b as f64 * ss).sqrt()
}

/// Visit every way of writing `total` as an ordered sum of `parts` nonnegative integers.
pub fn for_each_composition(total: usize, parts: usize, mut f: impl FnMut(&[usize])) {
    let mut counts = vec![0usize; parts];
    fn rec(counts: &mut [usize], idx: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if idx + 1 == counts.len() {
            counts[idx] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[idx] = c;
            rec(counts, idx + 1, left - c, f);
        }
    }
    if parts == 0 {
        return;
    }
    rec(&mut counts, 0, total, &mut f);
}

/// Number of compositions of `total` into `parts` nonnegative integers, C(total+parts−1, parts−1).
pub fn composition_count(total: usize, parts: usize) -> u128 {
    if parts == 0 {
        return 0;
    }
    let mut acc: u128 = 1;
    for j in 1..parts {
        acc = acc.saturating_mul((total + j) as u128) / j as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.3f64, -1.2, 4.0, 2.2];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
        let mut s = LogSumExp::new();
        for &x in &xs {
            s.add(x);
        }
        assert!((s.value() - direct).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_empty_and_infinite() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[0.0, f64::INFINITY]), f64::INFINITY);
    }

    #[test]
    fn falling_factorial_exact() {
        assert_eq!(falling_factorial(5, 2), Some(20));
        assert_eq!(falling_factorial(10, 3), Some(720));
        assert_eq!(falling_factorial(2, 3), None);
    }

    #[test]
    fn composition_enumeration_counts() {
        let mut seen = 0u128;
        for_each_composition(10, 3, |_| seen += 1);
        assert_eq!(seen, composition_count(10, 3));
        assert_eq!(composition_count(10, 3), 66);
    }

    #[test]
    fn derive_seed_is_stable() {
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
        assert_ne!(derive_seed(42, 7), derive_seed(42, 8));
    }
}
