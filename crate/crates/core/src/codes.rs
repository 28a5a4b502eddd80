//! Systematic MDS codes: construction, verification, shortening and
//! lengthening.
//!
//! Every code here has a generator of the form `[I | P]`, with `I` the k×k
//! identity and `P` the k×r parity block. A systematic code is MDS exactly when
//! every square submatrix of `P` is nonsingular, which is what [`MdsCode::is_mds`]
//! checks exhaustively.

use itertools::Itertools;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement, GfMatrix};

/// Default ceiling on the work spent by exhaustive minor enumeration,
/// measured in approximate field operations.
pub const DEFAULT_MDS_BUDGET: u64 = 50_000_000;

/// Attempts per appended row when searching for an MDS lengthening.
pub const LENGTHEN_ATTEMPTS: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdsCode {
    n: usize,
    k: usize,
    generator: GfMatrix,
    field: Field,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// Work estimate for checking every square submatrix of a `rows × cols` block.
pub fn minor_work(rows: usize, cols: usize) -> u64 {
    (1..=rows.min(cols))
        .map(|s| binomial(rows, s).saturating_mul(binomial(cols, s)).saturating_mul((s * s * s) as u64))
        .fold(0u64, u64::saturating_add)
}

/// Checks that every square submatrix of `m` is nonsingular.
pub fn all_minors_nonsingular(m: &GfMatrix, field: &Field, budget: u64) -> Result<bool> {
    let work = minor_work(m.rows(), m.cols());
    if work > budget {
        return Err(Error::Budget(format!(
            "checking all minors of a {}x{} block needs ~{work} operations (budget {budget})",
            m.rows(),
            m.cols()
        )));
    }
    if m.entries().iter().any(|e| e.is_zero()) {
        return Ok(false);
    }
    for s in 2..=m.rows().min(m.cols()) {
        for cols in (0..m.cols()).combinations(s) {
            for rows in (0..m.rows()).combinations(s) {
                if m.select(&rows, &cols).rank(field) < s {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

impl MdsCode {
    /// Builds `[I | parity]`. The MDS property is not checked here.
    pub fn from_parity(parity: GfMatrix, field: Field) -> Result<MdsCode> {
        let k = parity.rows();
        let r = parity.cols();
        if k == 0 || r == 0 {
            return Err(Error::Parameter(format!("need n > k >= 1, got parity block {k}x{r}")));
        }
        if !parity.entries().iter().all(|&e| field.contains(e)) {
            return Err(Error::InvalidField("parity entry outside the field".into()));
        }
        let generator = GfMatrix::identity(k).hconcat(&parity)?;
        Ok(MdsCode { n: k + r, k, generator, field })
    }

    /// Accepts a generator that is already in systematic form.
    pub fn from_generator(generator: GfMatrix, field: Field) -> Result<MdsCode> {
        let k = generator.rows();
        let n = generator.cols();
        if !(n > k && k >= 1) {
            return Err(Error::Parameter(format!("need n > k >= 1, got [{n}, {k}]")));
        }
        let idx: Vec<usize> = (0..k).collect();
        if generator.select(&idx, &idx) != GfMatrix::identity(k) {
            return Err(Error::Parameter("generator is not systematic".into()));
        }
        let parity_cols: Vec<usize> = (k..n).collect();
        MdsCode::from_parity(generator.select_cols(&parity_cols), field)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.n - self.k
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn generator(&self) -> &GfMatrix {
        &self.generator
    }

    /// The k×r parity block.
    pub fn parity(&self) -> GfMatrix {
        let cols: Vec<usize> = (self.k..self.n).collect();
        self.generator.select_cols(&cols)
    }

    /// Entry of the parity block: coefficient of message position `row` in
    /// parity `t`.
    #[inline]
    pub fn parity_coeff(&self, row: usize, t: usize) -> FieldElement {
        self.generator.get(row, self.k + t)
    }

    pub fn is_mds(&self) -> Result<bool> {
        self.is_mds_with_budget(DEFAULT_MDS_BUDGET)
    }

    pub fn is_mds_with_budget(&self, budget: u64) -> Result<bool> {
        all_minors_nonsingular(&self.parity(), &self.field, budget)
    }

    pub fn encode(&self, message: &[FieldElement]) -> Result<Vec<FieldElement>> {
        self.generator.left_mul_vec(message, &self.field)
    }

    /// Encodes per-node payloads: `message[p]` is the payload of systematic
    /// node `p`; the result holds all `n` node payloads.
    pub fn encode_payloads(&self, message: &[Vec<FieldElement>]) -> Result<Vec<Vec<FieldElement>>> {
        if message.len() != self.k {
            return Err(Error::Dimension(format!("{} payloads for k = {}", message.len(), self.k)));
        }
        let len = message.first().map_or(0, Vec::len);
        if message.iter().any(|m| m.len() != len) {
            return Err(Error::Dimension("payloads of unequal length".into()));
        }
        let mut out: Vec<Vec<FieldElement>> = message.to_vec();
        for t in 0..self.r() {
            let mut parity = vec![FieldElement::ZERO; len];
            for (p, data) in message.iter().enumerate() {
                self.field.mul_add_slice(&mut parity, data, self.parity_coeff(p, t));
            }
            out.push(parity);
        }
        Ok(out)
    }

    /// Recovers the message from symbols at `k` distinct coordinates.
    pub fn decode(&self, available: &[(usize, FieldElement)]) -> Result<Vec<FieldElement>> {
        let payloads: Vec<(usize, Vec<FieldElement>)> = available.iter().map(|&(c, v)| (c, vec![v])).collect();
        Ok(self.decode_payloads(&payloads)?.into_iter().map(|p| p[0]).collect())
    }

    /// Recovers the `k` systematic payloads from any `k` node payloads.
    pub fn decode_payloads(&self, available: &[(usize, Vec<FieldElement>)]) -> Result<Vec<Vec<FieldElement>>> {
        if available.len() < self.k {
            return Err(Error::Parameter(format!("{} symbols cannot decode k = {}", available.len(), self.k)));
        }
        let chosen = &available[..self.k];
        let cols: Vec<usize> = chosen.iter().map(|(c, _)| *c).collect();
        if cols.iter().any(|&c| c >= self.n) || cols.iter().duplicates().next().is_some() {
            return Err(Error::Parameter("coordinates must be distinct and < n".into()));
        }
        let len = chosen[0].1.len();
        // values = message · G[:, cols]  ⇔  G[:, cols]^T · message^T = values^T
        let system = self.generator.select_cols(&cols).transpose();
        let inv = system.inverse(&self.field)?;
        let mut out = vec![vec![FieldElement::ZERO; len]; self.k];
        for (p, row) in out.iter_mut().enumerate() {
            for (j, (_, data)) in chosen.iter().enumerate() {
                self.field.mul_add_slice(row, data, inv.get(p, j));
            }
        }
        Ok(out)
    }

    /// Keeps the first `k_f` systematic coordinates and the first `r_f`
    /// parities of the first `k_f` rows.
    pub fn project(&self, k_f: usize, r_f: usize) -> Result<MdsCode> {
        if k_f == 0 || k_f > self.k || r_f == 0 || r_f > self.r() {
            return Err(Error::Parameter(format!("cannot project [{}, {}] onto k = {k_f}, r = {r_f}", self.n, self.k)));
        }
        let rows: Vec<usize> = (0..k_f).collect();
        let cols: Vec<usize> = (self.k..self.k + r_f).collect();
        MdsCode::from_parity(self.generator.select(&rows, &cols), self.field.clone())
    }

    /// Shortening on systematic coordinates: keeps codewords that vanish on
    /// `positions` and deletes those coordinates.
    pub fn shorten(&self, positions: &[usize]) -> Result<MdsCode> {
        let s = positions.len();
        if positions.iter().any(|&p| p >= self.n) {
            return Err(Error::Parameter("shortening position out of range".into()));
        }
        if positions.iter().any(|&p| p >= self.k) {
            return Err(Error::Parameter("only systematic coordinates can be shortened".into()));
        }
        if positions.iter().duplicates().next().is_some() {
            return Err(Error::Parameter("duplicate shortening position".into()));
        }
        if s >= self.k {
            return Err(Error::Parameter(format!("cannot shorten {s} of k = {} coordinates", self.k)));
        }
        let keep: Vec<usize> = (0..self.k).filter(|p| !positions.contains(p)).collect();
        let parity_cols: Vec<usize> = (self.k..self.n).collect();
        MdsCode::from_parity(self.generator.select(&keep, &parity_cols), self.field.clone())
    }

    /// Appends `s` systematic coordinates (after the existing ones) keeping
    /// `n - k` fixed. Shortening the result on positions `k..k+s` returns
    /// this code. The new parity rows are found by seeded search.
    pub fn lengthen(&self, s: usize, seed: u64) -> Result<MdsCode> {
        if s == 0 {
            return Ok(self.clone());
        }
        let r = self.r();
        let q = self.field.order();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parity = self.parity();
        for added in 0..s {
            let mut found = None;
            for _ in 0..LENGTHEN_ATTEMPTS {
                let row: Vec<FieldElement> = (0..r).map(|_| FieldElement(rng.gen_range(1..q) as u16)).collect();
                let candidate = parity.vconcat(&GfMatrix::new(1, r, row)?)?;
                if all_minors_nonsingular(&candidate, &self.field, DEFAULT_MDS_BUDGET)? {
                    found = Some(candidate);
                    break;
                }
            }
            parity = found.ok_or_else(|| {
                Error::SearchExhausted(format!(
                    "no MDS lengthening row {} of {s} within {LENGTHEN_ATTEMPTS} attempts in GF(2^{})",
                    added + 1,
                    self.field.bits()
                ))
            })?;
        }
        MdsCode::from_parity(parity, self.field.clone())
    }
}

/// Systematic `[n, k]` code whose parity block is a Cauchy matrix on two
/// disjoint sets of field elements drawn deterministically from `seed`.
pub fn make_systematic_mds(n: usize, k: usize, field: &Field, seed: u64) -> Result<MdsCode> {
    if !(n > k && k >= 1) {
        return Err(Error::Parameter(format!("need n > k >= 1, got [{n}, {k}]")));
    }
    let q = field.order() as usize;
    if n > q {
        return Err(Error::Parameter(format!("n = {n} exceeds field size {q}")));
    }
    let r = n - k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<FieldElement> = sample(&mut rng, q, n).into_iter().map(|v| FieldElement(v as u16)).collect();
    let (xs, ys) = points.split_at(k);
    let mut parity = GfMatrix::zeros(k, r);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let v = field.inv(x + y).map_err(|_| Error::Construction("Cauchy points are not distinct".into()))?;
            parity.set(i, j, v);
        }
    }
    MdsCode::from_parity(parity, field.clone())
}
