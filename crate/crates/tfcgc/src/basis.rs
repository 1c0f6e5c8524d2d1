//! Cardinal B-splines, the multiwavelet atom dictionary built from them,
//! and the smoothing test functions used to augment the regression.
//!
//! Atoms are dilated/shifted splines on normalized time u = t/N. The
//! dictionary enumerates every shift whose support touches [0, 1] for each
//! requested order at a single scale, so coefficient trajectories are
//! linear combinations of a fixed, deterministic column set.

use crate::{Error, Result};
use ndarray::Array2;

/// Cardinal B-spline of the given order (order 1 is the unit box on
/// [0, 1)), evaluated by the Cox-de Boor triangle.
pub fn eval_bspline(order: usize, u: f64) -> Result<f64> {
    if order < 1 {
        return Err(Error::InvalidOrder { order });
    }
    if !(0.0..order as f64).contains(&u) {
        return Ok(0.0);
    }
    // vals[i] holds B_k(u - i); each pass raises k by one.
    let mut vals = vec![0.0f64; order];
    let cell = u.floor() as usize;
    if cell < order {
        vals[cell] = 1.0;
    }
    for k in 2..=order {
        let denom = (k - 1) as f64;
        for i in 0..=(order - k) {
            let x = u - i as f64;
            vals[i] = (x * vals[i] + (k as f64 - x) * vals[i + 1]) / denom;
        }
    }
    Ok(vals[0])
}

/// v-th derivative of the order-r cardinal B-spline via the difference
/// identity B_r' = B_{r-1}(u) - B_{r-1}(u - 1), applied v times.
pub fn eval_bspline_deriv(order: usize, u: f64, v: usize) -> Result<f64> {
    if v == 0 {
        return eval_bspline(order, u);
    }
    if order <= v {
        return Err(Error::InvalidOrder { order });
    }
    let mut acc = 0.0;
    let mut coef = 1.0f64;
    for i in 0..=v {
        acc += coef * eval_bspline(order - v, u - i as f64)?;
        coef *= -((v - i) as f64) / (i + 1) as f64;
    }
    Ok(acc)
}

/// One dictionary column: spline order, dyadic scale, integer shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveletAtom {
    pub order: usize,
    pub scale: u32,
    pub shift: i64,
}

impl WaveletAtom {
    /// Value at sample t of an N-sample record: 2^{j/2} B_r(2^j t/N - k).
    pub fn eval(&self, t: usize, n_samples: usize) -> f64 {
        let u = t as f64 / n_samples as f64;
        let arg = (1u64 << self.scale) as f64 * u - self.shift as f64;
        let gain = ((1u64 << self.scale) as f64).sqrt();
        gain * eval_bspline(self.order, arg).expect("order validated at construction")
    }
}

/// Shifts whose support [k/2^j, (k+r)/2^j] touches [0, 1].
fn shift_range(order: usize, scale: u32) -> std::ops::RangeInclusive<i64> {
    -(order as i64)..=((1i64 << scale) - 1)
}

/// Fixed atom set over a set of orders at one dyadic scale, ordered by
/// (order, shift).
#[derive(Debug, Clone)]
pub struct BasisDictionary {
    pub scale: u32,
    pub orders: Vec<usize>,
    atoms: Vec<WaveletAtom>,
}

impl BasisDictionary {
    pub fn atoms(&self) -> &[WaveletAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atom values tabulated for t = 1..=n_samples; row m is atom m.
    pub fn tabulate(&self, n_samples: usize) -> Array2<f64> {
        let mut table = Array2::zeros((self.atoms.len(), n_samples));
        for (m, atom) in self.atoms.iter().enumerate() {
            for t in 1..=n_samples {
                table[(m, t - 1)] = atom.eval(t, n_samples);
            }
        }
        table
    }
}

/// Enumerate the dictionary for `orders` at dyadic scale `scale`.
/// Duplicate orders collapse; the atom count is sum(2^scale + r).
pub fn build_dictionary(orders: &[usize], scale: u32) -> Result<BasisDictionary> {
    if orders.is_empty() {
        return Err(Error::InvalidConfig("dictionary needs at least one spline order".into()));
    }
    if let Some(&bad) = orders.iter().find(|&&r| r < 1) {
        return Err(Error::InvalidOrder { order: bad });
    }
    if scale > 20 {
        return Err(Error::InvalidConfig(format!("scale {scale} is unreasonably large")));
    }
    let mut uniq: Vec<usize> = orders.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let mut atoms = Vec::new();
    for &order in &uniq {
        for shift in shift_range(order, scale) {
            atoms.push(WaveletAtom { order, scale, shift });
        }
    }
    Ok(BasisDictionary { scale, orders: uniq, atoms })
}

/// Sampled, unit-norm derivatives of the smoothing test function (the
/// degree d+1 cardinal B-spline on n0 uniform samples of its support).
#[derive(Debug, Clone)]
pub struct TestFunctionBank {
    pub deriv_order: usize,
    pub support_len: usize,
    rows: Vec<Vec<f64>>,
}

impl TestFunctionBank {
    /// Degenerate bank: no derivative rows, plain least squares downstream.
    pub fn empty() -> Self {
        TestFunctionBank { deriv_order: 0, support_len: 0, rows: Vec::new() }
    }

    /// Sampled normalized derivative of order v (1-based).
    pub fn derivative(&self, v: usize) -> &[f64] {
        &self.rows[v - 1]
    }
}

/// Build the bank for derivative orders 1..=d on an n0-sample support.
/// The window is the degree-(d+1) B-spline, the lowest degree whose d-th
/// derivative is still continuous.
pub fn build_test_bank(d: usize, n0: usize) -> Result<TestFunctionBank> {
    if d < 1 {
        return Err(Error::InvalidConfig("derivative order d must be >= 1 (use an empty bank for none)".into()));
    }
    if n0 < d + 3 {
        return Err(Error::InvalidSupport { needed: d + 3, got: n0 });
    }
    let omega_order = d + 2;
    let step = omega_order as f64 / (n0 - 1) as f64;
    let mut rows = Vec::with_capacity(d);
    for v in 1..=d {
        let mut row: Vec<f64> = (0..n0)
            .map(|q| eval_bspline_deriv(omega_order, q as f64 * step, v))
            .collect::<Result<_>>()?;
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidSupport { needed: d + 2, got: n0 });
        }
        row.iter_mut().for_each(|x| *x /= norm);
        rows.push(row);
    }
    Ok(TestFunctionBank { deriv_order: d, support_len: n0, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_and_hat_values() {
        assert_eq!(eval_bspline(1, 0.0).unwrap(), 1.0);
        assert_eq!(eval_bspline(1, 0.5).unwrap(), 1.0);
        assert_eq!(eval_bspline(1, 0.999).unwrap(), 1.0);
        // support is half-open: the right endpoint is outside
        assert_eq!(eval_bspline(1, 1.0).unwrap(), 0.0);
        assert_eq!(eval_bspline(1, -0.2).unwrap(), 0.0);
        assert_abs_diff_eq!(eval_bspline(2, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_bspline(2, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_bspline(2, 1.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cubic_center_is_two_thirds() {
        assert_abs_diff_eq!(eval_bspline(4, 2.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_order_rejected() {
        assert!(matches!(eval_bspline(0, 0.5), Err(Error::InvalidOrder { order: 0 })));
    }

    // Truncated-power form: B_r(u) = sum_i (-1)^i C(r,i) (u-i)_+^{r-1} / (r-1)!
    fn truncated_power_bspline(order: usize, u: f64) -> f64 {
        let mut acc = 0.0;
        let mut coef = 1.0f64;
        for i in 0..=order {
            let x = u - i as f64;
            if x > 0.0 {
                acc += coef * x.powi(order as i32 - 1);
            }
            coef *= -((order - i) as f64) / (i + 1) as f64;
        }
        let fact: f64 = (1..order).map(|k| k as f64).product();
        acc / fact
    }

    #[test]
    fn matches_truncated_power_form() {
        for order in 2..=6usize {
            let mut u = -0.5;
            while u < order as f64 + 0.5 {
                let got = eval_bspline(order, u).unwrap();
                assert_abs_diff_eq!(got, truncated_power_bspline(order, u), epsilon = 1e-10);
                u += 0.0371;
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for order in 1..=6usize {
            let mut u = 0.0f64;
            while u < 6.0 {
                let lo = u.floor() as i64 - order as i64 + 1;
                let sum: f64 = (lo..=u.floor() as i64)
                    .map(|k| eval_bspline(order, u - k as f64).unwrap())
                    .sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
                u += 0.0789;
            }
        }
    }

    #[test]
    fn derivative_identity_matches_central_differences() {
        let h = 1e-5;
        for order in 3..=6usize {
            for base in 0..order {
                for frac in [0.23, 0.57, 0.81] {
                    let u = base as f64 + frac;
                    let analytic = eval_bspline_deriv(order, u, 1).unwrap();
                    let numeric = (eval_bspline(order, u + h).unwrap()
                        - eval_bspline(order, u - h).unwrap())
                        / (2.0 * h);
                    assert_abs_diff_eq!(analytic, numeric, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn second_derivative_of_quadratic_spline() {
        // B_3'' = B_1(u) - 2 B_1(u-1) + B_1(u-2)
        assert_abs_diff_eq!(eval_bspline_deriv(3, 0.5, 2).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eval_bspline_deriv(3, 1.5, 2).unwrap(), -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eval_bspline_deriv(3, 2.5, 2).unwrap(), 1.0, epsilon = 1e-14);
        assert!(eval_bspline_deriv(3, 0.5, 3).is_err());
    }

    #[test]
    fn constant_atom_inside_the_record() {
        let atom = WaveletAtom { order: 1, scale: 0, shift: 0 };
        let n = 1000;
        for t in [1, 250, 500, 999] {
            assert_eq!(atom.eval(t, n), 1.0);
        }
        // u = 1 falls outside the half-open box support
        assert_eq!(atom.eval(n, n), 0.0);
    }

    #[test]
    fn dilated_atom_value() {
        let atom = WaveletAtom { order: 2, scale: 1, shift: 0 };
        // 2^{1/2} B_2(2 * 250/1000) = sqrt(2) * 0.5
        assert_abs_diff_eq!(atom.eval(250, 1000), std::f64::consts::SQRT_2 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dictionary_sizes() {
        assert_eq!(build_dictionary(&[3, 4, 5, 6], 4).unwrap().len(), 82);
        assert_eq!(build_dictionary(&[1], 0).unwrap().len(), 2);
        assert_eq!(build_dictionary(&[3, 4, 5], 4).unwrap().len(), 60);
    }

    #[test]
    fn dictionary_is_sorted_and_deduped() {
        let dict = build_dictionary(&[5, 3, 3], 2).unwrap();
        assert_eq!(dict.orders, vec![3, 5]);
        let atoms = dict.atoms();
        assert_eq!(atoms.len(), (4 + 3) + (4 + 5));
        for pair in atoms.windows(2) {
            assert!((pair[0].order, pair[0].shift) < (pair[1].order, pair[1].shift));
        }
        assert_eq!(atoms[0], WaveletAtom { order: 3, scale: 2, shift: -3 });
    }

    #[test]
    fn dictionary_rejects_bad_input() {
        assert!(build_dictionary(&[], 4).is_err());
        assert!(matches!(build_dictionary(&[0], 4), Err(Error::InvalidOrder { order: 0 })));
    }

    #[test]
    fn bank_rows_are_unit_norm() {
        for (d, n0) in [(1, 8), (2, 20), (3, 24)] {
            let bank = build_test_bank(d, n0).unwrap();
            for v in 1..=d {
                let norm: f64 = bank.derivative(v).iter().map(|x| x * x).sum::<f64>().sqrt();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn first_derivative_row_sums_to_zero() {
        // odd derivative of a symmetric spline on a symmetric grid
        let bank = build_test_bank(2, 20).unwrap();
        let sum: f64 = bank.derivative(1).iter().sum();
        assert!(sum.abs() < 1e-6, "sum = {sum}");
    }

    #[test]
    fn bank_rejects_short_support() {
        assert!(matches!(build_test_bank(2, 4), Err(Error::InvalidSupport { needed: 5, got: 4 })));
        assert!(build_test_bank(0, 20).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn partition_of_unity_everywhere(order in 1usize..7, u in 0.0f64..10.0) {
                let lo = u.floor() as i64 - order as i64 + 1;
                let sum: f64 = (lo..=u.floor() as i64)
                    .map(|k| eval_bspline(order, u - k as f64).unwrap())
                    .sum();
                prop_assert!((sum - 1.0).abs() < 1e-10);
            }
        }
    }
}
