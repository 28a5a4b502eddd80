//! Arithmetic in GF(2^w) for 1 ≤ w ≤ 16, and dense linear algebra over it.
//!
//! A [`Field`] is built from a [`FieldSpec`] (bit width plus reduction
//! polynomial). Construction verifies that the polynomial is irreducible,
//! finds a primitive element and fills log/antilog tables, so that every
//! multiplication afterwards is two lookups and an add.
//!
//! Matrices are plain row-major [`GfMatrix`] values. Elimination pivots on the
//! first nonzero entry of each column, lowest row index first, so results are
//! reproducible across runs.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Well-known primitive polynomials, indexed by bit width.
const DEFAULT_POLYS: [u32; 17] =
    [0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003, 0x1100B];

/// Parameters of a binary extension field: width `w` and the reduction
/// polynomial, with bit `i` holding the coefficient of `x^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub w: u32,
    pub poly: u32,
}

impl FieldSpec {
    pub const GF256: FieldSpec = FieldSpec { w: 8, poly: 0x11D };
    pub const GF65536: FieldSpec = FieldSpec { w: 16, poly: 0x1100B };

    /// The default field of the given width.
    pub fn with_bits(w: u32) -> Result<FieldSpec> {
        if !(1..=16).contains(&w) {
            return Err(Error::InvalidField(format!("bit width {w} outside 1..=16")));
        }
        Ok(FieldSpec { w, poly: DEFAULT_POLYS[w as usize] })
    }

    pub fn order(&self) -> u32 {
        1 << self.w
    }
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::GF256
    }
}

/// An element of GF(2^w), w ≤ 16.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(pub u16);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl From<u16> for FieldElement {
    fn from(v: u16) -> Self {
        FieldElement(v)
    }
}

// Characteristic 2: addition and subtraction are both XOR.
impl Add for FieldElement {
    type Output = FieldElement;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: FieldElement) -> FieldElement {
        FieldElement(self.0 ^ rhs.0)
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: FieldElement) -> FieldElement {
        FieldElement(self.0 ^ rhs.0)
    }
}

impl AddAssign for FieldElement {
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: FieldElement) {
        self.0 ^= rhs.0;
    }
}

fn degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u32, m: u32) -> u32 {
    let dm = degree(m);
    while a != 0 && degree(a) >= dm {
        a ^= m << (degree(a) - dm);
    }
    a
}

/// Carry-less product reduced modulo `poly`. Slow path, used only while
/// building tables.
fn clmul_mod(a: u32, b: u32, poly: u32, w: u32) -> u32 {
    let mut acc = 0u32;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & (1 << w) != 0 {
            a ^= poly;
        }
    }
    acc
}

fn is_irreducible(poly: u32, w: u32) -> bool {
    // Any factorization has a factor of degree ≤ w/2.
    let limit = 1u32 << (w / 2 + 1);
    (2..limit).all(|d| poly_mod(poly, d) != 0)
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

#[derive(Debug)]
struct Tables {
    exp: Vec<u16>,
    log: Vec<u32>,
}

/// A constructed finite field. Cheap to clone; the tables are shared.
#[derive(Clone)]
pub struct Field {
    spec: FieldSpec,
    tables: Arc<Tables>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("w", &self.spec.w).field("poly", &format_args!("{:#x}", self.spec.poly)).finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Eq for Field {}

impl Field {
    pub fn new(spec: FieldSpec) -> Result<Field> {
        let FieldSpec { w, poly } = spec;
        if !(1..=16).contains(&w) {
            return Err(Error::InvalidField(format!("bit width {w} outside 1..=16")));
        }
        if degree(poly) != w as i32 {
            return Err(Error::InvalidField(format!("polynomial {poly:#x} does not have degree {w}")));
        }
        if !is_irreducible(poly, w) {
            return Err(Error::InvalidField(format!("polynomial {poly:#x} is reducible")));
        }
        let q = 1u32 << w;
        let group = q - 1;
        let factors = prime_factors(group);
        let pow = |mut base: u32, mut e: u32| {
            let mut acc = 1u32;
            while e > 0 {
                if e & 1 == 1 {
                    acc = clmul_mod(acc, base, poly, w);
                }
                base = clmul_mod(base, base, poly, w);
                e >>= 1;
            }
            acc
        };
        let generator = (1..q)
            .find(|&g| factors.iter().all(|&p| pow(g, group / p) != 1))
            .ok_or_else(|| Error::InvalidField("no primitive element".into()))?;

        let mut exp = vec![0u16; 2 * group as usize];
        let mut log = vec![0u32; q as usize];
        let mut x = 1u32;
        for i in 0..group {
            exp[i as usize] = x as u16;
            exp[(i + group) as usize] = x as u16;
            log[x as usize] = i;
            x = clmul_mod(x, generator, poly, w);
        }
        Ok(Field { spec, tables: Arc::new(Tables { exp, log }) })
    }

    /// GF(2^8) with reduction polynomial 0x11D.
    pub fn gf256() -> Field {
        Field::new(FieldSpec::GF256).expect("0x11D is irreducible")
    }

    /// GF(2^16) with reduction polynomial 0x1100B.
    pub fn gf65536() -> Field {
        Field::new(FieldSpec::GF65536).expect("0x1100B is irreducible")
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn bits(&self) -> u32 {
        self.spec.w
    }

    /// Number of field elements, q = 2^w.
    pub fn order(&self) -> u32 {
        self.spec.order()
    }

    pub fn contains(&self, a: FieldElement) -> bool {
        (a.0 as u32) < self.order()
    }

    /// Checked conversion from a raw value.
    pub fn element(&self, v: u32) -> Result<FieldElement> {
        if v < self.order() {
            Ok(FieldElement(v as u16))
        } else {
            Err(Error::InvalidField(format!("{v} is not an element of GF(2^{})", self.spec.w)))
        }
    }

    /// All elements in increasing order of their integer encoding.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.order()).map(|v| FieldElement(v as u16))
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        a + b
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        let t = &self.tables;
        FieldElement(t.exp[(t.log[a.0 as usize] + t.log[b.0 as usize]) as usize])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        let t = &self.tables;
        let group = self.order() - 1;
        Ok(FieldElement(t.exp[((group - t.log[a.0 as usize]) % group) as usize]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        if e == 0 {
            return FieldElement::ONE;
        }
        if a.is_zero() {
            return FieldElement::ZERO;
        }
        let group = (self.order() - 1) as u64;
        let l = self.tables.log[a.0 as usize] as u64;
        FieldElement(self.tables.exp[((l * (e % group)) % group) as usize])
    }

    /// `dst[i] += c * src[i]` for every position.
    pub fn mul_add_slice(&self, dst: &mut [FieldElement], src: &[FieldElement], c: FieldElement) {
        debug_assert_eq!(dst.len(), src.len());
        if c.is_zero() {
            return;
        }
        if c == FieldElement::ONE {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
            return;
        }
        let t = &self.tables;
        let lc = t.log[c.0 as usize];
        for (d, s) in dst.iter_mut().zip(src) {
            if s.0 != 0 {
                d.0 ^= t.exp[(t.log[s.0 as usize] + lc) as usize];
            }
        }
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&self, a: &[FieldElement], b: &[FieldElement]) -> FieldElement {
        a.iter().zip(b).fold(FieldElement::ZERO, |acc, (&x, &y)| acc + self.mul(x, y))
    }
}

/// Dense row-major matrix over a binary extension field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GfMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<FieldElement>,
}

impl GfMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<FieldElement>) -> Result<GfMatrix> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries for a {rows}x{cols} matrix", entries.len())));
        }
        Ok(GfMatrix { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> GfMatrix {
        GfMatrix { rows, cols, entries: vec![FieldElement::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> GfMatrix {
        let mut m = GfMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, FieldElement::ONE);
        }
        m
    }

    /// Builds a matrix from raw row values. Rows must have equal length.
    pub fn from_rows<R: AsRef<[u16]>>(rows: &[R]) -> Result<GfMatrix> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension("ragged rows".into()));
            }
            entries.extend(r.iter().map(|&v| FieldElement(v)));
        }
        Ok(GfMatrix { rows: rows.len(), cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[FieldElement] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElement] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<FieldElement> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Raw values, row by row.
    pub fn to_rows(&self) -> Vec<Vec<u16>> {
        (0..self.rows).map(|r| self.row(r).iter().map(|e| e.0).collect()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    /// Submatrix on the given row and column indices, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> GfMatrix {
        let mut entries = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                entries.push(self.get(r, c));
            }
        }
        GfMatrix { rows: rows.len(), cols: cols.len(), entries }
    }

    pub fn select_rows(&self, rows: &[usize]) -> GfMatrix {
        let cols: Vec<usize> = (0..self.cols).collect();
        self.select(rows, &cols)
    }

    pub fn select_cols(&self, cols: &[usize]) -> GfMatrix {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.select(&rows, cols)
    }

    /// `[self | other]`.
    pub fn hconcat(&self, other: &GfMatrix) -> Result<GfMatrix> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!("hconcat of {} and {} rows", self.rows, other.rows)));
        }
        let mut entries = Vec::with_capacity(self.rows * (self.cols + other.cols));
        for r in 0..self.rows {
            entries.extend_from_slice(self.row(r));
            entries.extend_from_slice(other.row(r));
        }
        Ok(GfMatrix { rows: self.rows, cols: self.cols + other.cols, entries })
    }

    /// `[self ; other]`.
    pub fn vconcat(&self, other: &GfMatrix) -> Result<GfMatrix> {
        if self.cols != other.cols {
            return Err(Error::Dimension(format!("vconcat of {} and {} cols", self.cols, other.cols)));
        }
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Ok(GfMatrix { rows: self.rows + other.rows, cols: self.cols, entries })
    }

    pub fn transpose(&self) -> GfMatrix {
        let mut t = GfMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, other: &GfMatrix, field: &Field) -> Result<GfMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let mut out = GfMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.entries[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                field.mul_add_slice(dst, other.row(k), self.get(r, k));
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &[FieldElement], field: &Field) -> Result<Vec<FieldElement>> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!("vector of {} against {} rows", v.len(), self.rows)));
        }
        let mut out = vec![FieldElement::ZERO; self.cols];
        for (r, &c) in v.iter().enumerate() {
            field.mul_add_slice(&mut out, self.row(r), c);
        }
        Ok(out)
    }

    /// Reduces `self` in place to reduced row echelon form over its first
    /// `pivot_cols` columns and returns the pivot column of each leading row.
    fn row_reduce(&mut self, pivot_cols: usize, field: &Field) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..pivot_cols {
            if row == self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&r| !self.get(r, col).is_zero()) else {
                continue;
            };
            if p != row {
                for c in 0..self.cols {
                    self.entries.swap(p * self.cols + c, row * self.cols + c);
                }
            }
            let inv = field.inv(self.get(row, col)).expect("pivot is nonzero");
            for c in 0..self.cols {
                let v = self.get(row, c);
                self.set(row, c, field.mul(v, inv));
            }
            let pivot_row: Vec<FieldElement> = self.row(row).to_vec();
            for r in 0..self.rows {
                if r == row {
                    continue;
                }
                let factor = self.get(r, col);
                if !factor.is_zero() {
                    let dst = &mut self.entries[r * self.cols..(r + 1) * self.cols];
                    field.mul_add_slice(dst, &pivot_row, factor);
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self, field: &Field) -> usize {
        let mut m = self.clone();
        m.row_reduce(self.cols, field).len()
    }

    /// Solves `self · x = b` for square nonsingular `self`.
    pub fn solve(&self, b: &GfMatrix, field: &Field) -> Result<GfMatrix> {
        if self.rows != self.cols {
            return Err(Error::Dimension(format!("solve needs a square matrix, got {}x{}", self.rows, self.cols)));
        }
        if b.rows != self.rows {
            return Err(Error::Dimension(format!("right-hand side has {} rows, expected {}", b.rows, self.rows)));
        }
        let n = self.rows;
        let mut aug = self.hconcat(b)?;
        if aug.row_reduce(n, field).len() < n {
            return Err(Error::SingularMatrix);
        }
        let right: Vec<usize> = (n..n + b.cols).collect();
        let rows: Vec<usize> = (0..n).collect();
        Ok(aug.select(&rows, &right))
    }

    pub fn inverse(&self, field: &Field) -> Result<GfMatrix> {
        self.solve(&GfMatrix::identity(self.rows), field)
    }

    /// Finds some `x` with `self · x = b` for arbitrary shapes, or `None` when
    /// the system is inconsistent. Free variables are set to zero.
    pub fn solve_consistent(&self, b: &GfMatrix, field: &Field) -> Result<Option<GfMatrix>> {
        if b.rows != self.rows {
            return Err(Error::Dimension(format!("right-hand side has {} rows, expected {}", b.rows, self.rows)));
        }
        let n = self.cols;
        let mut aug = self.hconcat(b)?;
        let pivots = aug.row_reduce(n, field);
        for r in pivots.len()..aug.rows {
            if (n..n + b.cols).any(|c| !aug.get(r, c).is_zero()) {
                return Ok(None);
            }
        }
        let mut x = GfMatrix::zeros(n, b.cols);
        for (r, &pc) in pivots.iter().enumerate() {
            for c in 0..b.cols {
                x.set(pc, c, aug.get(r, n + c));
            }
        }
        Ok(Some(x))
    }
}
