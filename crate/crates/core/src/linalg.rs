//! Dense integer matrices, Smith normal form with unimodular certificates,
//! and exact solving of `A·x = b` over `ℤ`.
//!
//! All arithmetic is checked; an overflow surfaces as [`Error::Overflow`]
//! rather than a wrong answer.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

fn add(a: i64, b: i64) -> Result<i64> {
    a.checked_add(b).ok_or(Error::Overflow("matrix arithmetic"))
}

fn mul(a: i64, b: i64) -> Result<i64> {
    a.checked_mul(b).ok_or(Error::Overflow("matrix arithmetic"))
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return domain("ragged matrix rows");
        }
        Ok(IntMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn entries(&self) -> &[i64] {
        &self.data
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return domain(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b != 0 {
                        let v = add(out.get(i, j), mul(a, b)?)?;
                        out.set(i, j, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// `M·x`.
    pub fn mul_vec(&self, x: &[i64]) -> Result<Vec<i64>> {
        if x.len() != self.cols {
            return domain("vector length does not match column count");
        }
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).try_fold(0i64, |acc, (a, b)| add(acc, mul(*a, *b)?)))
            .collect()
    }

    /// `u·M`.
    pub fn vec_mul(&self, u: &[i64]) -> Result<Vec<i64>> {
        if u.len() != self.rows {
            return domain("vector length does not match row count");
        }
        let mut out = vec![0i64; self.cols];
        for (i, &c) in u.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = add(*o, mul(c, a)?)?;
            }
        }
        Ok(out)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// row `dst` += q · row `src`
    fn row_add(&mut self, dst: usize, src: usize, q: i64) -> Result<()> {
        for j in 0..self.cols {
            let v = add(self.get(dst, j), mul(q, self.get(src, j))?)?;
            self.set(dst, j, v);
        }
        Ok(())
    }

    /// col `dst` += q · col `src`
    fn col_add(&mut self, dst: usize, src: usize, q: i64) -> Result<()> {
        for i in 0..self.rows {
            let v = add(self.get(i, dst), mul(q, self.get(i, src))?)?;
            self.set(i, dst, v);
        }
        Ok(())
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -self.get(i, j);
            self.set(i, j, v);
        }
    }

    fn negate_col(&mut self, j: usize) {
        for i in 0..self.rows {
            let v = -self.get(i, j);
            self.set(i, j, v);
        }
    }
}

/// Smith normal form `U·M·V = D` with the inverses of both transforms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snf {
    /// Nonzero diagonal entries `d₁ | d₂ | …`, all positive.
    pub invariants: Vec<i64>,
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
}

struct Reducer {
    a: IntMatrix,
    // (U, U⁻¹, V, V⁻¹) when certificates are wanted
    t: Option<[IntMatrix; 4]>,
}

impl Reducer {
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.a.swap_rows(i, j);
        if let Some([u, ui, _, _]) = &mut self.t {
            u.swap_rows(i, j);
            ui.swap_cols(i, j);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        self.a.swap_cols(i, j);
        if let Some([_, _, v, vi]) = &mut self.t {
            v.swap_cols(i, j);
            vi.swap_rows(i, j);
        }
    }

    fn row_add(&mut self, dst: usize, src: usize, q: i64) -> Result<()> {
        self.a.row_add(dst, src, q)?;
        if let Some([u, ui, _, _]) = &mut self.t {
            u.row_add(dst, src, q)?;
            ui.col_add(src, dst, -q)?;
        }
        Ok(())
    }

    fn col_add(&mut self, dst: usize, src: usize, q: i64) -> Result<()> {
        self.a.col_add(dst, src, q)?;
        if let Some([_, _, v, vi]) = &mut self.t {
            v.col_add(dst, src, q)?;
            vi.row_add(src, dst, -q)?;
        }
        Ok(())
    }

    fn negate_row(&mut self, i: usize) {
        self.a.negate_row(i);
        if let Some([u, ui, _, _]) = &mut self.t {
            u.negate_row(i);
            ui.negate_col(i);
        }
    }

    fn smallest_in_block(&self, t: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, i64)> = None;
        for i in t..self.a.rows {
            for j in t..self.a.cols {
                let x = self.a.get(i, j).unsigned_abs() as i64;
                if x != 0 && best.is_none_or(|(_, _, b)| x < b) {
                    best = Some((i, j, x));
                    if x == 1 {
                        return Some((i, j));
                    }
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }

    fn reduce(mut self) -> Result<(Vec<i64>, Option<[IntMatrix; 4]>)> {
        let mut invariants = Vec::new();
        let n = self.a.rows.min(self.a.cols);
        let mut t = 0;
        while t < n {
            let Some((pi, pj)) = self.smallest_in_block(t) else {
                break;
            };
            self.swap_rows(t, pi);
            self.swap_cols(t, pj);
            loop {
                let p = self.a.get(t, t);
                let mut clean = true;
                for i in t + 1..self.a.rows {
                    let x = self.a.get(i, t);
                    if x != 0 {
                        self.row_add(i, t, -(x / p))?;
                        clean &= self.a.get(i, t) == 0;
                    }
                }
                for j in t + 1..self.a.cols {
                    let x = self.a.get(t, j);
                    if x != 0 {
                        self.col_add(j, t, -(x / p))?;
                        clean &= self.a.get(t, j) == 0;
                    }
                }
                if !clean {
                    // a remainder smaller than the pivot remains in row or column t
                    let mut best = (t, t, p.abs());
                    for i in t + 1..self.a.rows {
                        let x = self.a.get(i, t).abs();
                        if x != 0 && x < best.2 {
                            best = (i, t, x);
                        }
                    }
                    for j in t + 1..self.a.cols {
                        let x = self.a.get(t, j).abs();
                        if x != 0 && x < best.2 {
                            best = (t, j, x);
                        }
                    }
                    self.swap_rows(t, best.0);
                    self.swap_cols(t, best.1);
                    continue;
                }
                let bad = (t + 1..self.a.rows).find(|&i| (t + 1..self.a.cols).any(|j| self.a.get(i, j) % p != 0));
                match bad {
                    Some(i) => self.row_add(t, i, 1)?,
                    None => break,
                }
            }
            if self.a.get(t, t) < 0 {
                self.negate_row(t);
            }
            invariants.push(self.a.get(t, t));
            t += 1;
        }
        Ok((invariants, self.t))
    }
}

/// Full Smith normal form with unimodular transforms and their inverses.
pub fn smith_normal_form(m: &IntMatrix) -> Result<Snf> {
    let r = Reducer {
        a: m.clone(),
        t: Some([
            IntMatrix::identity(m.rows),
            IntMatrix::identity(m.rows),
            IntMatrix::identity(m.cols),
            IntMatrix::identity(m.cols),
        ]),
    };
    let (invariants, t) = r.reduce()?;
    let [u, u_inv, v, v_inv] = t.expect("transforms tracked");
    Ok(Snf {
        invariants,
        u,
        u_inv,
        v,
        v_inv,
    })
}

/// Invariant factors only; cheaper than [`smith_normal_form`].
pub fn invariant_factors(m: &IntMatrix) -> Result<Vec<i64>> {
    Ok(Reducer { a: m.clone(), t: None }.reduce()?.0)
}

impl Snf {
    pub fn rank(&self) -> usize {
        self.invariants.len()
    }

    /// The diagonal matrix `D` with the shape of the reduced matrix.
    pub fn diagonal(&self) -> IntMatrix {
        let mut d = IntMatrix::zeros(self.u.rows(), self.v.rows());
        for (i, &x) in self.invariants.iter().enumerate() {
            d.set(i, i, x);
        }
        d
    }

    /// Re-checks `U·M·V = D`, `U·U⁻¹ = I`, `V·V⁻¹ = I` and the divisibility chain.
    pub fn verify(&self, m: &IntMatrix) -> Result<bool> {
        let chain = self.invariants.iter().all(|&d| d > 0) && self.invariants.windows(2).all(|w| w[1] % w[0] == 0);
        Ok(chain
            && self.u.mul(m)?.mul(&self.v)? == self.diagonal()
            && self.u.mul(&self.u_inv)? == IntMatrix::identity(m.rows())
            && self.v.mul(&self.v_inv)? == IntMatrix::identity(m.cols()))
    }

    /// Solves `M·x = b` over `ℤ` for the matrix this form was computed from.
    pub fn solve(&self, b: &[i64]) -> Result<LinearSolution> {
        let c = self.u.mul_vec(b)?;
        let mut y = vec![0i64; self.v.rows()];
        for (i, &ci) in c.iter().enumerate() {
            match self.invariants.get(i) {
                Some(&d) => {
                    if ci % d != 0 {
                        return Ok(LinearSolution::Infeasible(Infeasibility {
                            multiplier: self.u.row(i).to_vec(),
                            modulus: d,
                        }));
                    }
                    y[i] = ci / d;
                }
                None if ci != 0 => {
                    return Ok(LinearSolution::Infeasible(Infeasibility {
                        multiplier: self.u.row(i).to_vec(),
                        modulus: 0,
                    }));
                }
                None => {}
            }
        }
        Ok(LinearSolution::Solution(self.v.mul_vec(&y)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearSolution {
    Solution(Vec<i64>),
    Infeasible(Infeasibility),
}

/// A row multiplier `u` with `u·A ≡ 0` and `u·b ≢ 0` modulo `modulus`
/// (`modulus = 0` meaning exact equality). Either way no integer `x` can
/// satisfy `A·x = b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infeasibility {
    pub multiplier: Vec<i64>,
    pub modulus: i64,
}

fn reduces_to_zero(x: i64, m: i64) -> bool {
    if m == 0 {
        x == 0
    } else {
        x % m == 0
    }
}

impl Infeasibility {
    pub fn verify(&self, a: &IntMatrix, b: &[i64]) -> Result<bool> {
        if b.len() != a.rows() {
            return domain("right-hand side length does not match row count");
        }
        let ua = a.vec_mul(&self.multiplier)?;
        let ub = self.multiplier.iter().zip(b).try_fold(0i64, |acc, (u, x)| add(acc, mul(*u, *x)?))?;
        Ok(self.modulus != 1 && ua.iter().all(|&x| reduces_to_zero(x, self.modulus)) && !reduces_to_zero(ub, self.modulus))
    }
}

/// Solves `A·x = b` over `ℤ` via a fresh Smith normal form.
pub fn solve_integer(a: &IntMatrix, b: &[i64]) -> Result<LinearSolution> {
    if b.len() != a.rows() {
        return domain("right-hand side length does not match row count");
    }
    smith_normal_form(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn snf_examples() {
        let z = IntMatrix::zeros(3, 2);
        assert!(smith_normal_form(&z).unwrap().invariants.is_empty());
        let i3 = IntMatrix::identity(3);
        assert_eq!(smith_normal_form(&i3).unwrap().invariants, vec![1, 1, 1]);
        let a = m(&[&[2, 4], &[6, 8]]);
        let s = smith_normal_form(&a).unwrap();
        // 2·4 = |det| = 8 and 2 | 4
        assert_eq!(s.invariants, vec![2, 4]);
        assert!(s.verify(&a).unwrap());
    }

    #[test]
    fn torsion_example() {
        // ℤ² / ⟨(2,0),(0,3)⟩ ≅ ℤ/6
        let a = m(&[&[2, 0], &[0, 3]]);
        assert_eq!(invariant_factors(&a).unwrap(), vec![1, 6]);
    }

    #[test]
    fn solve_and_certify() {
        let a = m(&[&[2, 0], &[0, 2]]);
        match solve_integer(&a, &[4, 6]).unwrap() {
            LinearSolution::Solution(x) => assert_eq!(a.mul_vec(&x).unwrap(), vec![4, 6]),
            other => panic!("{other:?}"),
        }
        match solve_integer(&a, &[4, 5]).unwrap() {
            LinearSolution::Infeasible(c) => {
                assert_eq!(c.modulus, 2);
                assert!(c.verify(&a, &[4, 5]).unwrap());
            }
            other => panic!("{other:?}"),
        }
        let b = m(&[&[1], &[1]]);
        match solve_integer(&b, &[1, 2]).unwrap() {
            LinearSolution::Infeasible(c) => {
                assert_eq!(c.modulus, 0);
                assert!(c.verify(&b, &[1, 2]).unwrap());
            }
            other => panic!("{other:?}"),
        }
    }

    fn small_matrix() -> impl Strategy<Value = IntMatrix> {
        (1usize..6, 1usize..6)
            .prop_flat_map(|(r, c)| prop::collection::vec(-4i64..=4, r * c).prop_map(move |d| IntMatrix { rows: r, cols: c, data: d }))
    }

    /// Product of all k×k minors' gcd equals the product of the first k invariants.
    fn gcd_of_minors(a: &IntMatrix, k: usize) -> i64 {
        fn det(m: &[Vec<i64>]) -> i64 {
            if m.len() == 1 {
                return m[0][0];
            }
            (0..m.len())
                .map(|c| {
                    let minor: Vec<Vec<i64>> = m[1..]
                        .iter()
                        .map(|r| r.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| *x).collect())
                        .collect();
                    let s = if c % 2 == 0 { 1 } else { -1 };
                    s * m[0][c] * det(&minor)
                })
                .sum()
        }
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let rows = crate::grid::increasing_tuples(&(0..a.rows()).collect::<Vec<_>>(), k);
        let cols = crate::grid::increasing_tuples(&(0..a.cols()).collect::<Vec<_>>(), k);
        let mut g = 0;
        for r in &rows {
            for c in &cols {
                let sub: Vec<Vec<i64>> = r.iter().map(|&i| c.iter().map(|&j| a.get(i, j)).collect()).collect();
                g = gcd(g, det(&sub));
            }
        }
        g
    }

    proptest! {
        #[test]
        fn certificates_reproduce_input(a in small_matrix()) {
            let s = smith_normal_form(&a).unwrap();
            prop_assert!(s.verify(&a).unwrap());
            prop_assert_eq!(invariant_factors(&a).unwrap(), s.invariants.clone());
        }

        #[test]
        fn invariants_match_determinantal_divisors(a in small_matrix()) {
            let s = smith_normal_form(&a).unwrap();
            let mut prod = 1i64;
            for k in 1..=a.rows().min(a.cols()) {
                let g = gcd_of_minors(&a, k);
                if k <= s.rank() {
                    prod *= s.invariants[k - 1];
                    prop_assert_eq!(prod, g);
                } else {
                    prop_assert_eq!(g, 0);
                }
            }
        }

        #[test]
        fn solver_is_exact(a in small_matrix(), seed in prop::collection::vec(-3i64..=3, 6), noise in prop::collection::vec(-2i64..=2, 6)) {
            let x: Vec<i64> = seed[..a.cols()].to_vec();
            let b = a.mul_vec(&x).unwrap();
            match solve_integer(&a, &b).unwrap() {
                LinearSolution::Solution(y) => prop_assert_eq!(a.mul_vec(&y).unwrap(), b.clone()),
                LinearSolution::Infeasible(_) => prop_assert!(false, "feasible by construction"),
            }
            let b2: Vec<i64> = b.iter().zip(&noise).map(|(p, q)| p + q).collect();
            match solve_integer(&a, &b2).unwrap() {
                LinearSolution::Solution(y) => prop_assert_eq!(a.mul_vec(&y).unwrap(), b2.clone()),
                LinearSolution::Infeasible(c) => prop_assert!(c.verify(&a, &b2).unwrap()),
            }
        }
    }
}
