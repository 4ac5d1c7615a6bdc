//! Dense operators on labelled tensor-product spaces.
//!
//! A [`LabelledMatrix`] carries one ordered list of wires for its rows and one
//! for its columns. The first wire is the most significant digit of the flat
//! index. All operators that act on states or Choi matrices require the row
//! and column wire lists to coincide.

use std::collections::HashSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest flat dimension accepted per matrix axis.
pub const MAX_AXIS_DIM: usize = 1 << 10;
/// Tolerance used when deciding that a matrix is hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_FLOOR` make a matrix non positive semidefinite.
pub const PSD_FLOOR: f64 = 1e-9;
/// Default relative tolerance for numerical ranks.
pub const RANK_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wire {
    pub label: String,
    pub dim: usize,
    pub direction: Direction,
}

impl Wire {
    pub fn new(label: impl Into<String>, dim: usize, direction: Direction) -> Self {
        Self { label: label.into(), dim, direction }
    }

    pub fn input(label: impl Into<String>, dim: usize) -> Self {
        Self::new(label, dim, Direction::Input)
    }

    pub fn output(label: impl Into<String>, dim: usize) -> Self {
        Self::new(label, dim, Direction::Output)
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Product of the dimensions of `wires` (1 for the empty list).
pub fn total_dim(wires: &[Wire]) -> usize {
    wires.iter().map(|w| w.dim).product()
}

/// Sort key that orders `A2` before `A10`.
pub fn natural_key(label: &str) -> (String, u64, String) {
    let split = label.find(|c: char| c.is_ascii_digit()).unwrap_or(label.len());
    let (prefix, rest) = label.split_at(split);
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let number = rest[..end].parse().unwrap_or(0);
    (prefix.to_string(), number, rest[end..].to_string())
}

fn dims_of(wires: &[Wire]) -> Vec<usize> {
    wires.iter().map(|w| w.dim).collect()
}

fn check_unique(wires: &[Wire]) -> Result<()> {
    let mut seen = HashSet::new();
    for w in wires {
        if !seen.insert(w.label.as_str()) {
            return Err(Error::LabelCollision(w.label.clone()));
        }
    }
    Ok(())
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Flat offsets of every multi-index over `positions`, enumerated in
/// row-major order of those positions.
pub(crate) fn offsets(dims: &[usize], positions: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &base in &out {
            for digit in 0..dims[p] {
                next.push(base + digit * st[p]);
            }
        }
        out = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledMatrix {
    pub rows: Vec<Wire>,
    pub cols: Vec<Wire>,
    pub data: CMatrix,
}

impl LabelledMatrix {
    pub fn new(rows: Vec<Wire>, cols: Vec<Wire>, data: CMatrix) -> Result<Self> {
        check_unique(&rows)?;
        check_unique(&cols)?;
        let (r, c) = (total_dim(&rows), total_dim(&cols));
        if data.nrows() != r || data.ncols() != c {
            return Err(Error::DimensionMismatch(format!(
                "wires describe {r}x{c} but matrix is {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if r > MAX_AXIS_DIM || c > MAX_AXIS_DIM {
            return Err(Error::DimensionMismatch(format!(
                "axis dimension exceeds {MAX_AXIS_DIM}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Operator whose row and column spaces share the same wires.
    pub fn square(wires: Vec<Wire>, data: CMatrix) -> Result<Self> {
        Self::new(wires.clone(), wires, data)
    }

    pub fn identity(wires: Vec<Wire>) -> Result<Self> {
        let d = total_dim(&wires);
        Self::square(wires, CMatrix::identity(d, d))
    }

    /// `I/d` on `wires`.
    pub fn maximally_mixed(wires: Vec<Wire>) -> Result<Self> {
        let d = total_dim(&wires);
        Self::square(wires, CMatrix::identity(d, d).unscale(d as f64))
    }

    pub fn scalar(value: C64) -> Self {
        Self { rows: vec![], cols: vec![], data: CMatrix::from_element(1, 1, value) }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Wires of a square operator.
    pub fn wires(&self) -> Result<&[Wire]> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("operator row and column wires differ".into()));
        }
        Ok(&self.rows)
    }

    pub fn labels(&self) -> Vec<String> {
        self.rows.iter().map(|w| w.label.clone()).collect()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.rows
            .iter()
            .position(|w| w.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_abs(&(&self.data - self.data.adjoint()))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_TOL
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows.clone(), cols: self.cols.clone(), data: self.data.scale(s) }
    }

    /// `self - other` after aligning `other` to this operator's wire order.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        let aligned = other.aligned_to(self)?;
        Ok(Self { rows: self.rows.clone(), cols: self.cols.clone(), data: &self.data - aligned.data })
    }

    /// Copy of `self` with wires reordered to match `target`.
    pub fn aligned_to(&self, target: &Self) -> Result<Self> {
        let order: Vec<&str> = target.wires()?.iter().map(|w| w.label.as_str()).collect();
        let mine: HashSet<&str> = self.wires()?.iter().map(|w| w.label.as_str()).collect();
        if mine.len() != order.len() || order.iter().any(|l| !mine.contains(l)) {
            return Err(Error::DimensionMismatch("operators act on different wires".into()));
        }
        permute_wires(self, &order)
    }
}

pub fn tensor_product(a: &LabelledMatrix, b: &LabelledMatrix) -> Result<LabelledMatrix> {
    let mut rows = a.rows.clone();
    rows.extend(b.rows.iter().cloned());
    let mut cols = a.cols.clone();
    cols.extend(b.cols.iter().cloned());
    check_unique(&rows)?;
    check_unique(&cols)?;
    LabelledMatrix::new(rows, cols, a.data.kronecker(&b.data))
}

/// Trace over every wire not listed in `keep`. Kept wires retain their
/// original relative order.
pub fn partial_trace<S: AsRef<str>>(m: &LabelledMatrix, keep: &[S]) -> Result<LabelledMatrix> {
    let wires = m.wires()?;
    let keep_set: HashSet<&str> = keep.iter().map(|s| s.as_ref()).collect();
    for l in &keep_set {
        m.position(l)?;
    }
    let kept: Vec<usize> = (0..wires.len()).filter(|&i| keep_set.contains(wires[i].label.as_str())).collect();
    let traced: Vec<usize> = (0..wires.len()).filter(|&i| !keep_set.contains(wires[i].label.as_str())).collect();
    let dims = dims_of(wires);
    let ko = offsets(&dims, &kept);
    let to = offsets(&dims, &traced);
    let dk = ko.len();
    let out = CMatrix::from_fn(dk, dk, |i, j| {
        let (bi, bj) = (ko[i], ko[j]);
        to.iter().map(|&t| m.data[(bi + t, bj + t)]).sum()
    });
    LabelledMatrix::square(kept.iter().map(|&i| wires[i].clone()).collect(), out)
}

/// Trace out the listed wires.
pub fn trace_out<S: AsRef<str>>(m: &LabelledMatrix, remove: &[S]) -> Result<LabelledMatrix> {
    let drop: HashSet<&str> = remove.iter().map(|s| s.as_ref()).collect();
    for l in &drop {
        m.position(l)?;
    }
    let keep: Vec<String> =
        m.labels().into_iter().filter(|l| !drop.contains(l.as_str())).collect();
    partial_trace(m, &keep)
}

/// Reorder the wires of a square operator to `order`.
pub fn permute_wires<S: AsRef<str>>(m: &LabelledMatrix, order: &[S]) -> Result<LabelledMatrix> {
    let wires = m.wires()?;
    if order.len() != wires.len() {
        return Err(Error::InvalidPermutation(format!(
            "expected {} labels, got {}",
            wires.len(),
            order.len()
        )));
    }
    let mut positions = Vec::with_capacity(order.len());
    let mut seen = HashSet::new();
    for l in order {
        let l = l.as_ref();
        if !seen.insert(l) {
            return Err(Error::InvalidPermutation(format!("label `{l}` repeated")));
        }
        positions.push(m.position(l).map_err(|_| Error::InvalidPermutation(format!("label `{l}` unknown")))?);
    }
    let map = offsets(&dims_of(wires), &positions);
    let data = CMatrix::from_fn(map.len(), map.len(), |i, j| m.data[(map[i], map[j])]);
    LabelledMatrix::square(positions.iter().map(|&p| wires[p].clone()).collect(), data)
}

/// Eigenvalues of the hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).unscale(2.0);
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigen-decomposition of the hermitian part of `m` as (eigenvalues, eigenvectors in columns).
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()).unscale(2.0);
    let e = h.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

fn raw_trace_norm(m: &CMatrix) -> f64 {
    let scale = max_abs(m).max(1.0);
    if max_abs(&(m - m.adjoint())) <= HERMITIAN_TOL * scale {
        hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
    } else {
        m.clone().svd(false, false).singular_values.iter().sum()
    }
}

/// Sum of singular values.
pub fn trace_norm(m: &LabelledMatrix) -> f64 {
    raw_trace_norm(&m.data)
}

pub fn trace_norm_matrix(m: &CMatrix) -> f64 {
    raw_trace_norm(m)
}

/// Frobenius norm.
pub fn hs_norm(m: &LabelledMatrix) -> f64 {
    m.data.norm()
}

fn psd_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let dev = max_abs(&(m - m.adjoint()));
    if dev > HERMITIAN_TOL * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let ev = hermitian_eigenvalues(m);
    if let Some(&min) = ev.first() {
        if min < -PSD_FLOOR {
            return Err(Error::NotPsd(min));
        }
    }
    Ok(ev)
}

/// Number of eigenvalues above `rel_tol * max_eigenvalue`.
pub fn matrix_rank(m: &LabelledMatrix, rel_tol: f64) -> Result<usize> {
    let ev = psd_eigenvalues(&m.data)?;
    let max = ev.last().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return Ok(0);
    }
    Ok(ev.iter().filter(|&&x| x > rel_tol * max).count())
}

/// Smallest `r >= 1` such that discarding all but the `r` largest eigenvalues
/// leaves a tail of Hilbert-Schmidt norm at most `eta`. Eigenvalues below the
/// default relative rank tolerance count as zero, so `rank_eta(m, 0)` agrees
/// with `matrix_rank(m, RANK_REL_TOL)`. The zero matrix has rank 0.
pub fn rank_eta(m: &LabelledMatrix, eta: f64) -> Result<usize> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be non-negative, got {eta}")));
    }
    let ev = psd_eigenvalues(&m.data)?;
    let max = ev.last().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return Ok(0);
    }
    let cleaned: Vec<f64> =
        ev.iter().map(|&x| if x > RANK_REL_TOL * max { x } else { 0.0 }).collect();
    // cleaned is ascending; the tail after keeping r largest is cleaned[..d-r].
    let d = cleaned.len();
    let mut tail_sq = 0.0;
    let mut r = d;
    for (i, &x) in cleaned.iter().enumerate() {
        tail_sq += x * x;
        if tail_sq.sqrt() <= eta {
            r = d - (i + 1);
        } else {
            break;
        }
    }
    Ok(r.max(1))
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    wires: Option<Vec<Wire>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    row_wires: Option<Vec<Wire>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    col_wires: Option<Vec<Wire>>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Split a complex matrix into nested real and imaginary row arrays.
pub fn to_re_im(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
    let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
    (re, im)
}

/// Inverse of [`to_re_im`]. An empty `im` means a real matrix.
pub fn from_re_im(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMatrix> {
    let r = re.len();
    let c = re.first().map_or(0, |row| row.len());
    if re.iter().any(|row| row.len() != c) {
        return Err(Error::DimensionMismatch("ragged real part".into()));
    }
    if !im.is_empty() && (im.len() != r || im.iter().any(|row| row.len() != c)) {
        return Err(Error::DimensionMismatch("imaginary part shape differs from real part".into()));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| {
        C64::new(re[i][j], if im.is_empty() { 0.0 } else { im[i][j] })
    }))
}

impl Serialize for LabelledMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (re, im) = to_re_im(&self.data);
        let json = if self.is_square() {
            MatrixJson { wires: Some(self.rows.clone()), row_wires: None, col_wires: None, re, im }
        } else {
            MatrixJson {
                wires: None,
                row_wires: Some(self.rows.clone()),
                col_wires: Some(self.cols.clone()),
                re,
                im,
            }
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelledMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let json = MatrixJson::deserialize(d)?;
        let (rows, cols) = match (json.wires, json.row_wires, json.col_wires) {
            (Some(w), None, None) => (w.clone(), w),
            (None, Some(r), Some(c)) => (r, c),
            _ => return Err(D::Error::custom("expected `wires` or both `row_wires` and `col_wires`")),
        };
        let data = from_re_im(&json.re, &json.im).map_err(D::Error::custom)?;
        LabelledMatrix::new(rows, cols, data).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diag(wires: Vec<Wire>, d: &[f64]) -> LabelledMatrix {
        let m = CMatrix::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i]) } else { c(0.0) });
        LabelledMatrix::square(wires, m).unwrap()
    }

    fn phi_plus() -> LabelledMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for &i in &[0usize, 3] {
            for &j in &[0usize, 3] {
                m[(i, j)] = c(0.5);
            }
        }
        LabelledMatrix::square(vec![Wire::input("A1", 2), Wire::output("B1", 2)], m).unwrap()
    }

    fn random_matrix(d: usize, vals: &[f64]) -> CMatrix {
        CMatrix::from_fn(d, d, |i, j| C64::new(vals[(i * d + j) % vals.len()], vals[(i + 3 * j) % vals.len()]))
    }

    #[test]
    fn product_of_qubit_states() {
        let a = diag(vec![Wire::input("A1", 2)], &[1.0, 0.0]);
        let b = diag(vec![Wire::output("B1", 2)], &[0.0, 1.0]);
        let ab = tensor_product(&a, &b).unwrap();
        assert_eq!(ab.labels(), vec!["A1", "B1"]);
        assert_eq!(ab.data[(1, 1)], c(1.0));
        assert_eq!(ab.data.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn product_rejects_shared_label() {
        let a = diag(vec![Wire::input("A1", 2)], &[1.0, 0.0]);
        assert!(matches!(tensor_product(&a, &a), Err(Error::LabelCollision(_))));
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let r = partial_trace(&phi_plus(), &["A1"]).unwrap();
        assert_eq!(r.labels(), vec!["A1"]);
        assert_abs_diff_eq!((r.data - CMatrix::identity(2, 2).unscale(2.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn full_trace_gives_scalar() {
        let r = partial_trace::<&str>(&phi_plus(), &[]).unwrap();
        assert_eq!(r.data.shape(), (1, 1));
        assert_abs_diff_eq!(r.data[(0, 0)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn unknown_label_is_rejected() {
        assert!(matches!(partial_trace(&phi_plus(), &["X"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn permutation_swaps_product_factors() {
        let a = diag(vec![Wire::input("A1", 2)], &[0.2, 0.8]);
        let b = diag(vec![Wire::output("B1", 3)], &[0.1, 0.3, 0.6]);
        let ab = tensor_product(&a, &b).unwrap();
        let ba = tensor_product(&b, &a).unwrap();
        let p = permute_wires(&ab, &["B1", "A1"]).unwrap();
        assert_eq!(p, ba);
    }

    #[test]
    fn permutation_rejects_bad_orders() {
        let m = phi_plus();
        assert!(matches!(permute_wires(&m, &["A1"]), Err(Error::InvalidPermutation(_))));
        assert!(matches!(permute_wires(&m, &["A1", "A1"]), Err(Error::InvalidPermutation(_))));
        assert!(matches!(permute_wires(&m, &["A1", "Z"]), Err(Error::InvalidPermutation(_))));
    }

    #[test]
    fn norms_of_simple_operators() {
        let w = vec![Wire::input("A1", 2)];
        let m = diag(w.clone(), &[0.5, -0.5]);
        assert_abs_diff_eq!(trace_norm(&m), 1.0, epsilon = 1e-12);
        let pure = diag(w.clone(), &[1.0, 0.0]);
        let mixed = LabelledMatrix::maximally_mixed(w).unwrap();
        assert_abs_diff_eq!(hs_norm(&pure.sub(&mixed).unwrap()), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn trace_norm_of_non_hermitian_uses_singular_values() {
        let m = LabelledMatrix::new(
            vec![Wire::output("B1", 2)],
            vec![Wire::input("A1", 2)],
            CMatrix::from_row_slice(2, 2, &[c(0.0), c(2.0), c(0.0), c(0.0)]),
        )
        .unwrap();
        assert_abs_diff_eq!(trace_norm(&m), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ranks() {
        let w = vec![Wire::input("A1", 2), Wire::output("B1", 2)];
        assert_eq!(matrix_rank(&diag(w.clone(), &[0.5, 0.5, 0.0, 0.0]), RANK_REL_TOL).unwrap(), 2);
        assert_eq!(matrix_rank(&phi_plus(), RANK_REL_TOL).unwrap(), 1);
        let neg = diag(w.clone(), &[0.5, 0.5, 0.1, -0.1]);
        assert!(matches!(matrix_rank(&neg, RANK_REL_TOL), Err(Error::NotPsd(_))));
        let zero = diag(w, &[0.0; 4]);
        assert_eq!(matrix_rank(&zero, RANK_REL_TOL).unwrap(), 0);
    }

    #[test]
    fn soft_rank_examples() {
        let w = vec![Wire::input("A1", 2), Wire::output("B1", 2)];
        assert_eq!(rank_eta(&diag(w.clone(), &[0.7, 0.2, 0.1, 0.0]), 0.12).unwrap(), 2);
        assert_eq!(rank_eta(&diag(w.clone(), &[0.25; 4]), 0.6).unwrap(), 1);
        assert_eq!(rank_eta(&diag(w.clone(), &[0.25; 4]), 0.0).unwrap(), 4);
        assert!(rank_eta(&diag(w, &[0.25; 4]), -1.0).is_err());
    }

    #[test]
    fn natural_label_order() {
        let mut v = vec!["A10", "B1", "A2", "A1"];
        v.sort_by_key(|l| natural_key(l));
        assert_eq!(v, vec!["A1", "A2", "A10", "B1"]);
    }

    #[test]
    fn json_round_trip() {
        let m = phi_plus();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"wires\""));
        let back: LabelledMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn product_then_trace_recovers_factor(vals in prop::collection::vec(-1.0f64..1.0, 9), wa in 0.1f64..1.0) {
            let a = LabelledMatrix::square(vec![Wire::input("A", 2)], random_matrix(2, &vals)).unwrap();
            let mut b = LabelledMatrix::square(vec![Wire::output("B", 3)], random_matrix(3, &vals[1..])).unwrap();
            let tr = b.trace();
            prop_assume!(tr.norm() > 1e-3);
            b.data = b.data.unscale(1.0) * (C64::new(wa, 0.0) / tr);
            let ab = tensor_product(&a, &b).unwrap();
            let back = partial_trace(&ab, &["A"]).unwrap();
            let expected = a.data.scale(1.0) * C64::new(wa, 0.0);
            prop_assert!((back.data - expected).norm() < 1e-12);
        }

        #[test]
        fn permutation_round_trip(vals in prop::collection::vec(-1.0f64..1.0, 13)) {
            let wires = vec![Wire::input("A", 2), Wire::input("B", 3), Wire::output("C", 2)];
            let m = LabelledMatrix::square(wires, random_matrix(12, &vals)).unwrap();
            let p = permute_wires(&m, &["C", "A", "B"]).unwrap();
            let back = permute_wires(&p, &["A", "B", "C"]).unwrap();
            prop_assert_eq!(back, m.clone());
            // trace over permuted wires commutes with permutation
            let t1 = partial_trace(&p, &["B", "C"]).unwrap();
            let t2 = partial_trace(&m, &["C", "B"]).unwrap();
            prop_assert!((permute_wires(&t1, &["B", "C"]).unwrap().data - t2.data).norm() < 1e-12);
        }

        #[test]
        fn hermitian_trace_norm_matches_svd(vals in prop::collection::vec(-1.0f64..1.0, 17)) {
            let a = random_matrix(4, &vals);
            let h = &a + a.adjoint();
            let svd: f64 = h.clone().svd(false, false).singular_values.iter().sum();
            prop_assert!((trace_norm_matrix(&h) - svd).abs() < 1e-9);
        }
    }
}
