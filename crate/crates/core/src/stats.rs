//! Compensated sums and normal-approximation intervals.

use serde::Serialize;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.5758293035489004;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// First and second moments of paired `(alg, opt)` observations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairedMoments {
    pub count: f64,
    pub alg: CompensatedSum,
    pub alg_sq: CompensatedSum,
    pub opt: CompensatedSum,
    pub opt_sq: CompensatedSum,
    pub cross: CompensatedSum,
}

/// Means and 99% half-widths derived from [`PairedMoments`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairedEstimate {
    pub e_alg: f64,
    pub e_opt: f64,
    pub hw_alg: f64,
    pub hw_opt: f64,
    /// `E[OPT] / E[ALG]`; absent when `E[ALG] = 0`.
    pub ratio: Option<f64>,
    /// Delta-method half-width of the ratio.
    pub hw_ratio: Option<f64>,
}

impl PairedMoments {
    pub fn push(&mut self, alg: f64, opt: f64) {
        self.push_weighted(alg, opt, 1.0);
    }

    /// Adds an observation carrying probability mass `w`.
    pub fn push_weighted(&mut self, alg: f64, opt: f64, w: f64) {
        self.count += w;
        self.alg.add(w * alg);
        self.alg_sq.add(w * alg * alg);
        self.opt.add(w * opt);
        self.opt_sq.add(w * opt * opt);
        self.cross.add(w * alg * opt);
    }

    pub fn merge(&mut self, other: &PairedMoments) {
        self.count += other.count;
        self.alg.merge(&other.alg);
        self.alg_sq.merge(&other.alg_sq);
        self.opt.merge(&other.opt);
        self.opt_sq.merge(&other.opt_sq);
        self.cross.merge(&other.cross);
    }

    /// Means with 99% half-widths over `n` i.i.d. trials; `n = None` gives
    /// exact expectations with zero widths.
    pub fn estimate(&self, trials: Option<f64>) -> PairedEstimate {
        let c = self.count;
        let a = self.alg.value() / c;
        let o = self.opt.value() / c;
        let ratio = (a > 0.0).then(|| o / a);
        let Some(n) = trials else {
            return PairedEstimate {
                e_alg: a,
                e_opt: o,
                hw_alg: 0.0,
                hw_opt: 0.0,
                ratio,
                hw_ratio: ratio.map(|_| 0.0),
            };
        };
        if n < 2.0 {
            // one trial carries no variance information
            return PairedEstimate {
                e_alg: a,
                e_opt: o,
                hw_alg: f64::INFINITY,
                hw_opt: f64::INFINITY,
                ratio,
                hw_ratio: ratio.map(|_| f64::INFINITY),
            };
        }
        let var_a = (self.alg_sq.value() / c - a * a).max(0.0) * n / (n - 1.0);
        let var_o = (self.opt_sq.value() / c - o * o).max(0.0) * n / (n - 1.0);
        let cov = (self.cross.value() / c - a * o) * n / (n - 1.0);
        let hw_ratio = ratio.map(|r| {
            let v = (var_o - 2.0 * r * cov + r * r * var_a).max(0.0) / (a * a);
            Z99 * (v / n).sqrt()
        });
        PairedEstimate {
            e_alg: a,
            e_opt: o,
            hw_alg: Z99 * (var_a / n).sqrt(),
            hw_opt: Z99 * (var_o / n).sqrt(),
            ratio,
            hw_ratio,
        }
    }
}

/// Half-width of a 99% interval for a proportion, evaluated at `p`.
pub fn proportion_half_width(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    Z99 * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compensation_recovers_lost_bits() {
        let mut s = CompensatedSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn exact_estimate_has_zero_width() {
        let mut m = PairedMoments::default();
        m.push_weighted(1.0, 2.0, 0.5);
        m.push_weighted(0.0, 1.0, 0.5);
        let e = m.estimate(None);
        assert_eq!((e.e_alg, e.e_opt, e.ratio), (0.5, 1.5, Some(3.0)));
        assert_eq!((e.hw_alg, e.hw_opt, e.hw_ratio), (0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn zero_alg_has_no_ratio() {
        let mut m = PairedMoments::default();
        m.push(0.0, 1.0);
        m.push(0.0, 2.0);
        let e = m.estimate(Some(2.0));
        assert_eq!(e.ratio, None);
        assert_eq!(e.hw_ratio, None);
    }

    #[test]
    fn sample_variance_half_width() {
        let mut m = PairedMoments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x, x);
        }
        let e = m.estimate(Some(4.0));
        // sample variance 5/3
        let want = Z99 * (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((e.hw_alg - want).abs() < 1e-12);
        // alg == opt: the ratio is exactly 1 in every trial
        assert!(e.hw_ratio.unwrap() < 1e-9);
    }

    #[test]
    fn one_trial_has_unbounded_width() {
        let mut m = PairedMoments::default();
        m.push(1.0, 2.0);
        let e = m.estimate(Some(1.0));
        assert_eq!(e.ratio, Some(2.0));
        assert!(e.hw_alg.is_infinite() && e.hw_ratio.unwrap().is_infinite());
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let mut all = PairedMoments::default();
            let mut left = PairedMoments::default();
            let mut right = PairedMoments::default();
            for (k, &(a, o)) in xs.iter().enumerate() {
                all.push(a, o);
                if k < cut { left.push(a, o) } else { right.push(a, o) }
            }
            left.merge(&right);
            let (x, y) = (all.estimate(Some(xs.len() as f64)), left.estimate(Some(xs.len() as f64)));
            prop_assert!((x.e_alg - y.e_alg).abs() < 1e-12);
            prop_assert!((x.e_opt - y.e_opt).abs() < 1e-12);
        }
    }
}
