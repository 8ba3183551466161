//! Order-independent summation and seed derivation.

/// Exact floating-point accumulator (Shewchuk's non-overlapping partials).
///
/// [`ExactSum::value`] returns the correctly rounded sum of everything added,
/// so the result does not depend on the order of additions.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Adds `factor * value` without rounding the product.
    pub fn add_product(&mut self, factor: f64, value: f64) {
        let p = factor * value;
        let err = factor.mul_add(value, -p);
        self.add(p);
        if err != 0.0 {
            self.add(err);
        }
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction when the remaining partials push past a tie.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Correctly rounded sum of a slice.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    acc.extend(values.iter().copied());
    acc.value()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent task seed from a base seed and a path of tags.
///
/// Every randomised sub-task (fold split, training run, per-instance
/// sampler) gets its own seed so that parallel and serial execution consume
/// identical random streams.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Stable 64-bit tag for a string label (FNV-1a).
pub fn label_tag(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_beats_naive_cancellation() {
        let vals = [1e16, 1.0, -1e16];
        assert_eq!(exact_sum(&vals), 1.0);
        let naive: f64 = vals.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn exact_sum_of_tenths() {
        let vals = vec![0.1; 10];
        assert_eq!(exact_sum(&vals), 1.0);
    }

    #[test]
    fn add_product_is_exact() {
        let mut a = ExactSum::new();
        a.add_product(3.0, 0.1);
        a.add_product(-3.0, 0.1);
        assert_eq!(a.value(), 0.0);
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        let a = derive_seed(7, &[1, 2]);
        let b = derive_seed(7, &[2, 1]);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, &[1, 2]));
    }

    proptest::proptest! {
        #[test]
        fn exact_sum_is_order_independent(mut v in proptest::collection::vec(-1e6f64..1e6, 0..40)) {
            let forward = exact_sum(&v);
            v.reverse();
            proptest::prop_assert_eq!(forward, exact_sum(&v));
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            proptest::prop_assert_eq!(forward, exact_sum(&v));
        }
    }
}
