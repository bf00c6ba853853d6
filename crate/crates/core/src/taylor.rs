//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Taylor`] holds the Taylor coefficients of a smooth function of the
//! `n` chart coordinates around a base point, up to total degree `order ≤ 3`.
//! Products, reciprocals, logarithms and exponentials are exact on the
//! truncated polynomial, so every derived quantity carries its partial
//! derivatives along. Taking a partial derivative lowers the order by one;
//! mixing operands of different order truncates to the smaller one.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use nalgebra::DMatrix;

pub(crate) const MAX_ORDER: usize = 3;
const MAX_VARS: usize = 6;

type Exponents = [u8; MAX_VARS];

/// Monomial bookkeeping for one dimension.
pub(crate) struct Space {
    n: usize,
    exps: Vec<Exponents>,
    lookup: HashMap<Exponents, usize>,
    /// `count[d]` = number of monomials of degree ≤ d.
    count: [usize; MAX_ORDER + 1],
    /// `(a, b, c)` with `exps[a] + exps[b] = exps[c]`, sorted by degree of `c`.
    mul: Vec<(u16, u16, u16)>,
    mul_count: [usize; MAX_ORDER + 1],
    /// Per variable: `(dst, src, factor)` for `∂_v`, sorted by degree of `dst`.
    deriv: Vec<Vec<(u16, u16, f64)>>,
    deriv_count: Vec<[usize; MAX_ORDER]>,
}

/// Append the exponent vectors of all nondecreasing variable tuples of
/// length `remaining`, in lexicographic order.
fn push_tuples(n: usize, remaining: usize, start: usize, prefix: &mut Vec<usize>, out: &mut Vec<Exponents>) {
    if remaining == 0 {
        let mut e = [0u8; MAX_VARS];
        for &v in prefix.iter() {
            e[v] += 1;
        }
        out.push(e);
        return;
    }
    for v in start..n {
        prefix.push(v);
        push_tuples(n, remaining - 1, v, prefix, out);
        prefix.pop();
    }
}

impl Space {
    fn build(n: usize) -> Space {
        let mut exps: Vec<Exponents> = Vec::new();
        let mut count = [0; MAX_ORDER + 1];
        for (d, slot) in count.iter_mut().enumerate() {
            push_tuples(n, d, 0, &mut Vec::new(), &mut exps);
            *slot = exps.len();
        }
        let lookup: HashMap<Exponents, usize> = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut mul = Vec::new();
        let mut mul_count = [0; MAX_ORDER + 1];
        for (d, &upto) in count.iter().enumerate() {
            let from = if d == 0 { 0 } else { count[d - 1] };
            for c in from..upto {
                for a in 0..=c {
                    let ea = exps[a];
                    let ec = exps[c];
                    if (0..MAX_VARS).all(|v| ea[v] <= ec[v]) {
                        let mut eb = [0u8; MAX_VARS];
                        for v in 0..MAX_VARS {
                            eb[v] = ec[v] - ea[v];
                        }
                        let b = lookup[&eb];
                        mul.push((a as u16, b as u16, c as u16));
                    }
                }
            }
            mul_count[d] = mul.len();
        }

        let mut deriv = Vec::with_capacity(n);
        let mut deriv_count = Vec::with_capacity(n);
        for v in 0..n {
            let mut list = Vec::new();
            let mut counts = [0; MAX_ORDER];
            for (d, slot) in counts.iter_mut().enumerate() {
                let from = if d == 0 { 0 } else { count[d - 1] };
                for dst in from..count[d] {
                    let mut e = exps[dst];
                    e[v] += 1;
                    let src = lookup[&e];
                    list.push((dst as u16, src as u16, e[v] as f64));
                }
                *slot = list.len();
            }
            deriv.push(list);
            deriv_count.push(counts);
        }

        Space {
            n,
            exps,
            lookup,
            count,
            mul,
            mul_count,
            deriv,
            deriv_count,
        }
    }

    pub(crate) fn len(&self, order: usize) -> usize {
        self.count[order]
    }

    /// Index of the monomial ∏ x_v for the multiset of variables `vars`.
    pub(crate) fn monomial(&self, vars: &[usize]) -> usize {
        let mut e = [0u8; MAX_VARS];
        for &v in vars {
            e[v] += 1;
        }
        self.lookup[&e]
    }

    /// Nondecreasing variable tuple of monomial `m`.
    pub(crate) fn tuple(&self, m: usize) -> Vec<usize> {
        let mut vars = Vec::with_capacity(MAX_ORDER);
        for (v, &k) in self.exps[m].iter().enumerate() {
            vars.extend(std::iter::repeat_n(v, k as usize));
        }
        vars
    }

    /// For a monomial of degree ≥ 1: the monomial with its largest variable
    /// removed, and that variable.
    pub(crate) fn parent(&self, m: usize) -> (usize, usize) {
        let mut vars = self.tuple(m);
        let last = vars.pop().expect("constant monomial has no parent");
        (self.monomial(&vars), last)
    }

    /// `∏ m_v!` for monomial `m`; converts coefficients to derivatives.
    pub(crate) fn factorial(&self, m: usize) -> f64 {
        self.exps[m]
            .iter()
            .map(|&k| (1..=k as u32).product::<u32>() as f64)
            .product()
    }
}

/// Shared monomial tables for dimension `n` (1 ≤ n ≤ 6).
pub(crate) fn space(n: usize) -> &'static Space {
    static SPACES: [OnceLock<Space>; MAX_VARS + 1] = [const { OnceLock::new() }; MAX_VARS + 1];
    assert!((1..=MAX_VARS).contains(&n), "dimension {n} unsupported");
    SPACES[n].get_or_init(|| Space::build(n))
}

#[derive(Clone, Debug)]
pub(crate) struct Taylor {
    space: &'static Space,
    order: usize,
    c: Vec<f64>,
}

impl std::fmt::Debug for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Space(n={})", self.n)
    }
}

impl Taylor {
    pub(crate) fn zero(space: &'static Space, order: usize) -> Self {
        Taylor {
            space,
            order,
            c: vec![0.0; space.len(order)],
        }
    }

    pub(crate) fn constant(space: &'static Space, order: usize, value: f64) -> Self {
        let mut t = Self::zero(space, order);
        t.c[0] = value;
        t
    }

    /// Build from partial derivatives: `deriv(vars)` returns `∂_{vars} f` at
    /// the base point for every nondecreasing variable tuple.
    pub(crate) fn from_derivatives(
        space: &'static Space,
        order: usize,
        mut deriv: impl FnMut(&[usize]) -> f64,
    ) -> Self {
        let mut t = Self::zero(space, order);
        for m in 0..t.c.len() {
            t.c[m] = deriv(&space.tuple(m)) / space.factorial(m);
        }
        t
    }

    pub(crate) fn order(&self) -> usize {
        self.order
    }

    pub(crate) fn value(&self) -> f64 {
        self.c[0]
    }

    /// `∂_{vars} f` at the base point.
    pub(crate) fn derivative(&self, vars: &[usize]) -> f64 {
        assert!(vars.len() <= self.order);
        let m = self.space.monomial(vars);
        self.c[m] * self.space.factorial(m)
    }

    /// Partial derivative in variable `v`, one order lower.
    pub(crate) fn d(&self, v: usize) -> Taylor {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut out = Taylor::zero(self.space, order);
        let list = &self.space.deriv[v][..self.space.deriv_count[v][order]];
        for &(dst, src, factor) in list {
            out.c[dst as usize] = factor * self.c[src as usize];
        }
        out
    }

    pub(crate) fn scale(&self, k: f64) -> Taylor {
        Taylor {
            space: self.space,
            order: self.order,
            c: self.c.iter().map(|x| x * k).collect(),
        }
    }

    /// `self += k · a · b`, truncating to the lowest order involved.
    pub(crate) fn add_product(&mut self, k: f64, a: &Taylor, b: &Taylor) {
        let order = self.order.min(a.order).min(b.order);
        if order < self.order {
            self.order = order;
            self.c.truncate(self.space.len(order));
        }
        for &(i, j, m) in &self.space.mul[..self.space.mul_count[order]] {
            self.c[m as usize] += k * a.c[i as usize] * b.c[j as usize];
        }
    }

    /// `self += k · a`, truncating to the lower order.
    pub(crate) fn add_scaled(&mut self, k: f64, a: &Taylor) {
        let order = self.order.min(a.order);
        if order < self.order {
            self.order = order;
            self.c.truncate(self.space.len(order));
        }
        for (x, y) in self.c.iter_mut().zip(&a.c) {
            *x += k * y;
        }
    }

    /// `φ(f)` from the derivatives `φ^{(k)}(f(0))`, k = 0..=order.
    fn compose(&self, derivs: [f64; MAX_ORDER + 1]) -> Taylor {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut out = Taylor::constant(self.space, self.order, derivs[0]);
        let mut power = Taylor::constant(self.space, self.order, 1.0);
        let mut fact = 1.0;
        for (k, dk) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            let mut next = Taylor::zero(self.space, self.order);
            next.add_product(1.0, &power, &h);
            power = next;
            fact *= k as f64;
            out.add_scaled(dk / fact, &power);
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn recip(&self) -> Taylor {
        let x = self.value();
        self.compose([1.0 / x, -1.0 / x.powi(2), 2.0 / x.powi(3), -6.0 / x.powi(4)])
    }

    pub(crate) fn exp(&self) -> Taylor {
        let e = self.value().exp();
        self.compose([e; MAX_ORDER + 1])
    }

    /// `ln |f|`; requires `f(0) ≠ 0`.
    #[cfg(test)]
    pub(crate) fn ln_abs(&self) -> Taylor {
        let x = self.value();
        self.compose([x.abs().ln(), 1.0 / x, -1.0 / x.powi(2), 2.0 / x.powi(3)])
    }
}

impl Add for &Taylor {
    type Output = Taylor;
    fn add(self, rhs: &Taylor) -> Taylor {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub for &Taylor {
    type Output = Taylor;
    fn sub(self, rhs: &Taylor) -> Taylor {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl Mul for &Taylor {
    type Output = Taylor;
    fn mul(self, rhs: &Taylor) -> Taylor {
        let mut out = Taylor::zero(self.space, self.order.min(rhs.order));
        out.add_product(1.0, self, rhs);
        out
    }
}

impl Mul<f64> for &Taylor {
    type Output = Taylor;
    fn mul(self, k: f64) -> Taylor {
        self.scale(k)
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl AddAssign<&Taylor> for Taylor {
    fn add_assign(&mut self, rhs: &Taylor) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&Taylor> for Taylor {
    fn sub_assign(&mut self, rhs: &Taylor) {
        self.add_scaled(-1.0, rhs);
    }
}

/// Square matrix of jets, row-major.
#[derive(Clone, Debug)]
pub(crate) struct JetMatrix {
    pub n: usize,
    pub e: Vec<Taylor>,
}

impl JetMatrix {
    pub(crate) fn from_fn(n: usize, f: impl FnMut(usize) -> Taylor) -> Self {
        JetMatrix {
            n,
            e: (0..n * n).map(f).collect(),
        }
    }

    pub(crate) fn at(&self, i: usize, j: usize) -> &Taylor {
        &self.e[i * self.n + j]
    }

    pub(crate) fn order(&self) -> usize {
        self.e.iter().map(Taylor::order).min().unwrap_or(0)
    }

    pub(crate) fn values(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.at(i, j).value())
    }

    fn space(&self) -> &'static Space {
        self.e[0].space
    }

    /// `A · B` for jet matrices.
    pub(crate) fn matmul(&self, other: &JetMatrix) -> JetMatrix {
        let n = self.n;
        let order = self.order().min(other.order());
        JetMatrix::from_fn(n, |f| {
            let (i, j) = (f / n, f % n);
            let mut acc = Taylor::zero(self.space(), order);
            for k in 0..n {
                acc.add_product(1.0, self.at(i, k), other.at(k, j));
            }
            acc
        })
    }

    /// `C · A` for a constant matrix `C`.
    pub(crate) fn left_const(c: &DMatrix<f64>, a: &JetMatrix) -> JetMatrix {
        let n = a.n;
        let order = a.order();
        JetMatrix::from_fn(n, |f| {
            let (i, j) = (f / n, f % n);
            let mut acc = Taylor::zero(a.space(), order);
            for k in 0..n {
                acc.add_scaled(c[(i, k)], a.at(k, j));
            }
            acc
        })
    }

    /// `A · C` for a constant matrix `C`.
    pub(crate) fn right_const(a: &JetMatrix, c: &DMatrix<f64>) -> JetMatrix {
        let n = a.n;
        let order = a.order();
        JetMatrix::from_fn(n, |f| {
            let (i, j) = (f / n, f % n);
            let mut acc = Taylor::zero(a.space(), order);
            for k in 0..n {
                acc.add_scaled(c[(k, j)], a.at(i, k));
            }
            acc
        })
    }

    /// Inverse and `ln |det|` through the nilpotent expansion around the
    /// base-point value `A0`: with `Y = A0⁻¹ (A − A0)`,
    /// `A⁻¹ = Σ_k (−Y)^k A0⁻¹` and `ln|det A| = ln|det A0| + Σ_k (−1)^{k+1} tr(Y^k)/k`,
    /// both exact because `Y^{order+1}` vanishes in the truncated algebra.
    /// Returns `None` when `A0` is not invertible.
    pub(crate) fn inverse_and_log_det(&self) -> Option<(JetMatrix, Taylor, f64)> {
        let n = self.n;
        let order = self.order();
        let space = self.space();
        let a0 = self.values();
        let det0 = a0.determinant();
        let inv0 = a0.clone().try_inverse()?;
        if !det0.is_finite() || det0 == 0.0 {
            return None;
        }
        let mut h = self.clone();
        for t in h.e.iter_mut() {
            t.c[0] = 0.0;
        }
        let y = JetMatrix::left_const(&inv0, &h);

        let mut logdet = Taylor::constant(space, order, det0.abs().ln());
        let mut sum = JetMatrix::from_fn(n, |f| {
            Taylor::constant(space, order, if f / n == f % n { 1.0 } else { 0.0 })
        });
        let mut power = sum.clone();
        for k in 1..=order {
            power = power.matmul(&y);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            for i in 0..n {
                logdet.add_scaled(sign / k as f64, power.at(i, i));
            }
            let alt = if k % 2 == 1 { -1.0 } else { 1.0 };
            for (s, p) in sum.e.iter_mut().zip(&power.e) {
                s.add_scaled(alt, p);
            }
        }
        let inv = JetMatrix::right_const(&sum, &inv0);
        Some((inv, logdet, det0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(space: &'static Space, order: usize, v: usize, at: f64) -> Taylor {
        let mut t = Taylor::constant(space, order, at);
        t.c[1 + v] = 1.0;
        t
    }

    #[test]
    fn monomial_counts() {
        let s = space(4);
        assert_eq!(s.len(0), 1);
        assert_eq!(s.len(1), 5);
        assert_eq!(s.len(2), 15);
        assert_eq!(s.len(3), 35);
        assert_eq!(space(6).len(3), 84);
    }

    #[test]
    fn product_rule_on_polynomials() {
        let s = space(2);
        let x = var(s, 3, 0, 0.5);
        let y = var(s, 3, 1, -1.5);
        // f = x^2 y at (0.5, -1.5)
        let f = &(&x * &x) * &y;
        assert!((f.value() - 0.25 * -1.5).abs() < 1e-15);
        assert!((f.derivative(&[0]) - 2.0 * 0.5 * -1.5).abs() < 1e-15);
        assert!((f.derivative(&[0, 1]) - 1.0).abs() < 1e-15);
        assert!((f.derivative(&[0, 0, 1]) - 2.0).abs() < 1e-15);
        assert!(f.derivative(&[1, 1]).abs() < 1e-15);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let s = space(1);
        let x = var(s, 3, 0, 0.7);
        let e = x.exp();
        for k in 0..=3 {
            let vars = vec![0; k];
            assert!((e.derivative(&vars) - 0.7f64.exp()).abs() < 1e-14);
        }
        let l = x.ln_abs();
        assert!((l.derivative(&[0, 0, 0]) - 2.0 / 0.7f64.powi(3)).abs() < 1e-12);
        let r = x.recip();
        assert!((r.derivative(&[0, 0]) - 2.0 / 0.7f64.powi(3)).abs() < 1e-12);
        let one = &r * &x;
        assert!((one.value() - 1.0).abs() < 1e-15);
        for k in 1..=3 {
            assert!(one.derivative(&vec![0; k]).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_lowers_order() {
        let s = space(3);
        let x = var(s, 3, 2, 2.0);
        let f = &(&x * &x) * &x;
        let df = f.d(2);
        assert_eq!(df.order(), 2);
        assert!((df.value() - 12.0).abs() < 1e-14);
        assert!((df.derivative(&[2, 2]) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn matrix_inverse_and_log_det() {
        let s = space(2);
        let x = var(s, 3, 0, 0.3);
        let y = var(s, 3, 1, 0.4);
        let one = Taylor::constant(s, 3, 1.0);
        // A = [[1 + x^2, x y], [x y, 2 + y]]
        let a = JetMatrix {
            n: 2,
            e: vec![&one + &(&x * &x), &x * &y, &x * &y, &(&one + &one) + &y],
        };
        let (inv, logdet, det0) = a.inverse_and_log_det().unwrap();
        let prod = a.matmul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let t = prod.at(i, j);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t.value() - want).abs() < 1e-14);
                for vars in [&[0][..], &[1], &[0, 1], &[0, 0, 1], &[1, 1, 1]] {
                    assert!(t.derivative(vars).abs() < 1e-12, "{vars:?}");
                }
            }
        }
        // det = (1+x^2)(2+y) - x^2 y^2
        let det = |x: f64, y: f64| (1.0 + x * x) * (2.0 + y) - x * x * y * y;
        assert!((det0 - det(0.3, 0.4)).abs() < 1e-14);
        let h = 1e-5;
        let fd = (det(0.3 + h, 0.4).ln() - det(0.3 - h, 0.4).ln()) / (2.0 * h);
        assert!((logdet.derivative(&[0]) - fd).abs() < 1e-9);
    }
}
