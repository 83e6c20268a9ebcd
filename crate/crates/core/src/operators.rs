//! Unitary operator constructions: generalized DFT matrices, modular
//! multiplication in full and reduced dimension, Balazs-Voros quantized
//! A-baker maps, and the block-phase baker variants whose equal-weight
//! superposition reconstructs modular multiplication exactly.
//!
//! Phase conventions are pinned down numerically by two identities that the
//! test suite certifies at machine precision:
//!
//! * cross-construction: the DFT product form of the reduced modular
//!   multiplication operator equals its permutation-table form, and
//! * decomposition: `U = (1/sqrt(A)) * sum_k B~_k` over the A cyclic-shift
//!   baker variants.
//!
//! The conventions that make both hold are: the `N = Aq + 1` (plus) case
//! carries an index offset of 1 (its reduced basis drops the fixed point
//! `|0>`, so basis labels are shifted by one), the `N = Aq - 1` (minus) case
//! carries offset 0, and the block phase factors live on the lattice
//! `e^{+-2 pi i j l / A}` (denominator A).

use std::f64::consts::TAU;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::CMatrix;

pub(crate) fn gcd(mut x: u64, mut y: u64) -> u64 {
    while y != 0 {
        let t = x % y;
        x = y;
        y = t;
    }
    x
}

/// e^{2 pi i num / den} with the fraction reduced into [0, 1) in integer
/// arithmetic, so the phase stays accurate for large index products.
fn unit_phase(num: i64, den: i64) -> Complex64 {
    let r = num.rem_euclid(den);
    Complex64::from_polar(1.0, TAU * (r as f64) / (den as f64))
}

/// Angle of the (n, m) entry of F_D^{alpha,beta}. The integer product n*m is
/// reduced mod D exactly; only the alpha/beta cross terms go through floats.
fn dft_angle(n: usize, m: usize, d: usize, alpha: f64, beta: f64) -> f64 {
    let dd = d as f64;
    let int_part = ((n as u64 * m as u64) % (d as u64)) as f64;
    let rest = (n as f64) * beta + alpha * (m as f64) + alpha * beta;
    -TAU * ((int_part + rest.rem_euclid(dd)) / dd)
}

/// Parameters of a generalized DFT matrix: dimension D and the boundary
/// phases alpha (momentum) and beta (position).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DftSpec {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl DftSpec {
    pub fn new(d: usize, alpha: f64, beta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("DFT dimension must be >= 1".into()));
        }
        if !(-1.0..=1.0).contains(&alpha) || !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "boundary phases must lie in [-1, 1], got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(DftSpec { d, alpha, beta })
    }

    pub fn standard(d: usize) -> Result<Self> {
        DftSpec::new(d, 0.0, 0.0)
    }
}

/// The generalized DFT matrix with entries
/// `(1/sqrt(D)) exp(-2 pi i (n + alpha)(m + beta) / D)`,
/// unitary for all real boundary phases.
pub fn generalized_dft(spec: &DftSpec) -> CMatrix {
    let d = spec.d;
    let scale = 1.0 / (d as f64).sqrt();
    CMatrix::from_fn(d, d, |n, m| {
        Complex64::from_polar(scale, dft_angle(n, m, d, spec.alpha, spec.beta))
    })
}

/// Inverse of the generalized DFT, i.e. its conjugate transpose, built
/// directly so that `generalized_dft_inv(s) == generalized_dft(s).dagger()`
/// entry for entry.
pub fn generalized_dft_inv(spec: &DftSpec) -> CMatrix {
    let d = spec.d;
    let scale = 1.0 / (d as f64).sqrt();
    CMatrix::from_fn(d, d, |r, k| {
        Complex64::from_polar(scale, -dft_angle(k, r, d, spec.alpha, spec.beta))
    })
}

/// Max-abs residual of the block relation between F_{D/A}^{alpha,beta} and
/// the full F_D: for every block pair (j, l) and in-block indices, the
/// (m - jD/A, xi - lD/A) entry of F_{D/A}^{alpha,beta} must equal
/// `sqrt(A) * F_D[Am - jD, xi] * exp(-2 pi i (beta A m / D + alpha A xi / D
/// - j beta - alpha l + alpha beta A / D))`.
pub fn dft_block_identity_residual(d: usize, a: usize, alpha: f64, beta: f64) -> Result<f64> {
    if a == 0 || d == 0 || d % a != 0 {
        return Err(Error::InvalidDimension(format!(
            "A = {a} must divide D = {d}"
        )));
    }
    let w = d / a;
    let scale_small = 1.0 / (w as f64).sqrt();
    let scale_big = (a as f64).sqrt() / (d as f64).sqrt();
    let dd = d as f64;
    let mut max_res: f64 = 0.0;
    for j in 0..a {
        for l in 0..a {
            for mi in 0..w {
                let m = j * w + mi;
                for xii in 0..w {
                    let xi = l * w + xii;
                    let lhs =
                        Complex64::from_polar(scale_small, dft_angle(mi, xii, w, alpha, beta));
                    let row = a * m - j * d;
                    let extra = -TAU
                        * (beta * (a as f64) * (m as f64) / dd
                            + alpha * (a as f64) * (xi as f64) / dd
                            - (j as f64) * beta
                            - alpha * (l as f64)
                            + alpha * beta * (a as f64) / dd);
                    let rhs = Complex64::from_polar(scale_big, dft_angle(row, xi, d, 0.0, 0.0))
                        * Complex64::from_polar(1.0, extra);
                    max_res = max_res.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(max_res)
}

/// Sign of the relation N = Aq +/- 1 between the modulus and the reduced
/// dimension D = Aq.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// +1.0 for plus, -1.0 for minus; this sign also selects the exponent of
    /// the block phase lattice e^{s 2 pi i j l / A}.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn factor_i(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// Index origin of the reduced basis labels: the plus case drops `|0>`
    /// so labels shift by one; the minus case appends a state at the end and
    /// keeps 0-based labels.
    pub fn index_offset(self) -> usize {
        match self {
            Sign::Plus => 1,
            Sign::Minus => 0,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Plus => write!(f, "plus"),
            Sign::Minus => write!(f, "minus"),
        }
    }
}

impl FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Sign::Plus),
            "minus" | "-" => Ok(Sign::Minus),
            other => Err(Error::InvalidParameter(format!(
                "sign must be 'plus' or 'minus', got '{other}'"
            ))),
        }
    }
}

/// Parameters of a reduced modular multiplication operator: multiplier A,
/// block size q, and the sign of N = Aq +/- 1. The reduced dimension is
/// D = Aq.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModMultSpec {
    pub a: u64,
    pub q: u64,
    pub sign: Sign,
}

impl ModMultSpec {
    pub fn new(a: u64, q: u64, sign: Sign) -> Result<Self> {
        if a == 0 || q == 0 {
            return Err(Error::SpecMismatch(format!("A = {a} and q = {q} must be >= 1")));
        }
        let aq = a
            .checked_mul(q)
            .ok_or_else(|| Error::InvalidDimension("A*q overflows".into()))?;
        let n = match sign {
            Sign::Plus => aq + 1,
            Sign::Minus => {
                if aq < 3 {
                    return Err(Error::SpecMismatch(format!(
                        "minus sign needs Aq >= 3, got Aq = {aq}"
                    )));
                }
                aq - 1
            }
        };
        if n <= a {
            return Err(Error::SpecMismatch(format!("N = {n} must exceed A = {a}")));
        }
        // automatic for N = Aq +/- 1, but assert anyway
        if gcd(a, n) != 1 {
            return Err(Error::NonCoprime { a, n });
        }
        Ok(ModMultSpec { a, q, sign })
    }

    /// The modulus N = Aq +/- 1.
    pub fn n(&self) -> u64 {
        match self.sign {
            Sign::Plus => self.a * self.q + 1,
            Sign::Minus => self.a * self.q - 1,
        }
    }

    /// The reduced Hilbert-space dimension D = Aq.
    pub fn d(&self) -> usize {
        (self.a * self.q) as usize
    }
}

/// The full N x N modular multiplication operator `U_A |m> = |mA mod N>`,
/// a permutation matrix with entry (n, m) = 1 iff n = A m mod N.
pub fn modmult_full(a: u64, n: u64) -> Result<CMatrix> {
    if a == 0 || n == 0 || a >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= A < N, got A = {a}, N = {n}"
        )));
    }
    if gcd(a, n) != 1 {
        return Err(Error::NonCoprime { a, n });
    }
    let dim = n as usize;
    let mut u = CMatrix::zeros(dim, dim);
    for m in 0..n {
        let row = (a * m % n) as usize;
        u[(row, m as usize)] = Complex64::new(1.0, 0.0);
    }
    Ok(u)
}

/// The D x D (D = Aq) reduced modular multiplication operator.
///
/// Plus case (N = Aq + 1): basis index i represents the original state
/// |i + 1> (the fixed point |0> is dropped); entry (r, c) = 1 iff
/// r + 1 = A (c + 1) mod N.
///
/// Minus case (N = Aq - 1): basis index i represents |i> with index D - 1
/// the appended fixed point; entry (r, c) = 1 iff r = A c mod N for
/// c < D - 1, and (D - 1, D - 1) = 1.
pub fn modmult_reduced(spec: &ModMultSpec) -> CMatrix {
    let d = spec.d();
    let (a, n) = (spec.a, spec.n());
    let one = Complex64::new(1.0, 0.0);
    let mut u = CMatrix::zeros(d, d);
    match spec.sign {
        Sign::Plus => {
            for c in 0..d as u64 {
                let row = (a * (c + 1) % n) - 1;
                u[(row as usize, c as usize)] = one;
            }
        }
        Sign::Minus => {
            for c in 0..(d - 1) as u64 {
                let row = a * c % n;
                u[(row as usize, c as usize)] = one;
            }
            u[(d - 1, d - 1)] = one;
        }
    }
    u
}

/// Reduced phase fraction of the combined block-phase and q-block DFT entry
/// used by the baker variants and the DFT product form: the (k', c') entry
/// of `e^{s 2 pi i j l / A} F_q^{0, t - s l / A}` equals
/// `(1/sqrt(q)) e^{2 pi i num / D}` with
/// `num = s j l q - A k'(c' + t) + s k' l`.
fn tilde_phase_num(
    s: i64,
    a: i64,
    q: i64,
    j: i64,
    l: i64,
    kp: i64,
    cp: i64,
    t: i64,
) -> i64 {
    s * j * l * q - a * kp * (cp + t) + s * kp * l
}

/// Shared assembly for `F_inv * M` where M has exactly one q x q block per
/// block row: the block of column-block l sits at row-block `row_block[l]`
/// and its transposed entries are `blocks_t[l][c' * q + k']`.
fn permuted_block_product(
    f_inv: &CMatrix,
    a: usize,
    q: usize,
    row_block: &[usize],
    blocks_t: &[Vec<Complex64>],
) -> CMatrix {
    let d = a * q;
    let mut out = CMatrix::zeros(d, d);
    let fill = |r: usize, orow: &mut [Complex64]| {
        let frow = f_inv.row(r);
        for l in 0..a {
            let fseg = &frow[row_block[l] * q..(row_block[l] + 1) * q];
            let bt = &blocks_t[l];
            for cp in 0..q {
                let col = &bt[cp * q..(cp + 1) * q];
                let mut acc = Complex64::new(0.0, 0.0);
                for (f, b) in fseg.iter().zip(col) {
                    acc += f * b;
                }
                orow[l * q + cp] = acc;
            }
        }
    };
    if d < 64 {
        for (r, orow) in out.data_mut().chunks_mut(d).enumerate() {
            fill(r, orow);
        }
    } else {
        out.data_mut()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(r, orow)| fill(r, orow));
    }
    out
}

/// DFT product form of the reduced modular multiplication operator:
/// `(F_D^{0,t})^{-1} (M ⊙ Phi)` where every block row of M is
/// `[F_q^{0,t}, F_q^{0,t-s/A}, ..., F_q^{0,t-s(A-1)/A}]`, Phi is the
/// block-phase lattice `(1/sqrt(A)) e^{s 2 pi i j l / A} ⊗ J_q`, s is the
/// spec sign and t its index offset. Equals `modmult_reduced(spec)` to
/// machine precision; that equality is what fixes t and the phase lattice.
pub fn modmult_via_dft(spec: &ModMultSpec) -> CMatrix {
    modmult_via_dft_with_offset(spec, spec.sign.index_offset())
}

/// Same as [`modmult_via_dft`] but with an explicit index offset for the
/// reduced basis labels. Only the offset returned by
/// `spec.sign.index_offset()` reproduces the permutation operator; the other
/// choice leaves an O(1) residual.
pub fn modmult_via_dft_with_offset(spec: &ModMultSpec, offset: usize) -> CMatrix {
    let d = spec.d();
    let (a, q) = (spec.a as usize, spec.q as usize);
    let s = spec.sign.factor_i();
    let t = offset as i64;
    let f_inv = generalized_dft_inv(&DftSpec { d, alpha: 0.0, beta: offset as f64 });
    let scale = 1.0 / (d as f64).sqrt();
    let middle = CMatrix::from_fn(d, d, |kg, cg| {
        let (j, kp) = ((kg / q) as i64, (kg % q) as i64);
        let (l, cp) = ((cg / q) as i64, (cg % q) as i64);
        let num = tilde_phase_num(s, a as i64, q as i64, j, l, kp, cp, t);
        scale * unit_phase(num, d as i64)
    });
    f_inv.mul(&middle)
}

/// The cyclic-shift quantized A-baker map variant `B~_A^{+-(k)}`: the unitary
/// `(F_D^{0,t})^{-1} (M_k ⊙ Phi)` where M_k keeps, in block row j, only the
/// block at column l = (j + k) mod A (holding `F_q^{0, t - s l/A}`) and Phi
/// carries the unit-modulus phases `e^{s 2 pi i j l / A}`. Satisfies
/// `(1/sqrt(A)) sum_k B~_k = modmult_reduced(spec)` exactly.
pub fn tilde_baker(spec: &ModMultSpec, k: usize) -> Result<CMatrix> {
    let a = spec.a as usize;
    if k >= a {
        return Err(Error::InvalidParameter(format!(
            "shift k = {k} out of range for A = {a}"
        )));
    }
    let q = spec.q as usize;
    let d = spec.d();
    let s = spec.sign.factor_i();
    let t = spec.sign.index_offset() as i64;
    let f_inv = generalized_dft_inv(&DftSpec { d, alpha: 0.0, beta: t as f64 });
    let scale = 1.0 / (q as f64).sqrt();
    let mut row_block = vec![0usize; a];
    let mut blocks_t = Vec::with_capacity(a);
    for l in 0..a {
        let j = (l + a - k) % a;
        row_block[l] = j;
        let mut bt = vec![Complex64::new(0.0, 0.0); q * q];
        for cp in 0..q {
            for kp in 0..q {
                let num = tilde_phase_num(
                    s, a as i64, q as i64, j as i64, l as i64, kp as i64, cp as i64, t,
                );
                bt[cp * q + kp] = scale * unit_phase(num, d as i64);
            }
        }
        blocks_t.push(bt);
    }
    Ok(permuted_block_product(&f_inv, a, q, &row_block, &blocks_t))
}

/// Block permutation of an A-baker map: either the cyclic shift
/// `Pi(l) = (l - k) mod A` or an explicit bijection of {0, ..., A-1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockPermutation {
    CyclicShift(usize),
    Explicit(Vec<usize>),
}

impl BlockPermutation {
    pub fn validate(&self, a: usize) -> Result<()> {
        match self {
            BlockPermutation::CyclicShift(k) => {
                if *k >= a {
                    return Err(Error::InvalidParameter(format!(
                        "shift k = {k} out of range for A = {a}"
                    )));
                }
            }
            BlockPermutation::Explicit(p) => {
                if p.len() != a {
                    return Err(Error::InvalidParameter(format!(
                        "permutation length {} != A = {a}",
                        p.len()
                    )));
                }
                let mut seen = vec![false; a];
                for &v in p {
                    if v >= a || seen[v] {
                        return Err(Error::InvalidParameter(format!(
                            "not a bijection of 0..{a}: {p:?}"
                        )));
                    }
                    seen[v] = true;
                }
            }
        }
        Ok(())
    }

    /// Pi(l).
    pub fn apply(&self, l: usize, a: usize) -> usize {
        match self {
            BlockPermutation::CyclicShift(k) => (l + a - k % a) % a,
            BlockPermutation::Explicit(p) => p[l],
        }
    }
}

/// Per-block DFT phases and scalar phase factor of a general baker variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPhases {
    pub alpha: f64,
    pub beta: f64,
    pub omega: Complex64,
}

/// The Balazs-Voros quantized A-baker map with cyclic block shift k:
/// `(F_D^{alpha,beta})^{-1} P_k blockdiag(F_{D/A}^{alpha,beta}, ...)` where
/// P_k stacks the block of column l at row block (l - k) mod A.
pub fn bv_baker(d: usize, a: usize, k: usize, alpha: f64, beta: f64) -> Result<CMatrix> {
    if a == 0 || d == 0 || d % a != 0 {
        return Err(Error::InvalidDimension(format!(
            "A = {a} must divide D = {d}"
        )));
    }
    if k >= a {
        return Err(Error::InvalidParameter(format!(
            "shift k = {k} out of range for A = {a}"
        )));
    }
    let q = d / a;
    let f_inv = generalized_dft_inv(&DftSpec::new(d, alpha, beta)?);
    let scale = 1.0 / (q as f64).sqrt();
    let mut bt = vec![Complex64::new(0.0, 0.0); q * q];
    for cp in 0..q {
        for kp in 0..q {
            bt[cp * q + kp] = Complex64::from_polar(scale, dft_angle(kp, cp, q, alpha, beta));
        }
    }
    let row_block: Vec<usize> = (0..a).map(|l| (l + a - k) % a).collect();
    let blocks_t = vec![bt; a];
    Ok(permuted_block_product(&f_inv, a, q, &row_block, &blocks_t))
}

/// The general block-phase baker variant
/// `F_D^{-1} P_Pi blockdiag(omega_0 F_{D/A}^{alpha_0,beta_0}, ...)` with an
/// arbitrary block permutation and per-block phases; unitary whenever every
/// |omega_j| = 1.
pub fn general_tilde_baker(
    d: usize,
    a: usize,
    perm: &BlockPermutation,
    phases: &[BlockPhases],
) -> Result<CMatrix> {
    if a == 0 || d == 0 || d % a != 0 {
        return Err(Error::InvalidDimension(format!(
            "A = {a} must divide D = {d}"
        )));
    }
    perm.validate(a)?;
    if phases.len() != a {
        return Err(Error::InvalidParameter(format!(
            "need {a} block phase triples, got {}",
            phases.len()
        )));
    }
    for (l, ph) in phases.iter().enumerate() {
        if (ph.omega.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "|omega_{l}| = {} is not 1",
                ph.omega.norm()
            )));
        }
    }
    let q = d / a;
    let f_inv = generalized_dft_inv(&DftSpec::standard(d)?);
    let scale = 1.0 / (q as f64).sqrt();
    let mut row_block = vec![0usize; a];
    let mut blocks_t = Vec::with_capacity(a);
    for (l, ph) in phases.iter().enumerate() {
        row_block[l] = perm.apply(l, a);
        let mut bt = vec![Complex64::new(0.0, 0.0); q * q];
        for cp in 0..q {
            for kp in 0..q {
                bt[cp * q + kp] = ph.omega
                    * Complex64::from_polar(scale, dft_angle(kp, cp, q, ph.alpha, ph.beta));
            }
        }
        blocks_t.push(bt);
    }
    Ok(permuted_block_product(&f_inv, a, q, &row_block, &blocks_t))
}

/// Canonical (permutation, per-block phases) parametrization under which
/// [`general_tilde_baker`] reproduces `tilde_baker(spec, k)`: for the plus
/// case `beta_l = (A - 1 - l)/A` and `omega_l = e^{+2 pi i Pi(l)(l+1)/A}`;
/// for the minus case `beta_l = l/A` and `omega_l = e^{-2 pi i Pi(l) l / A}`;
/// `alpha_l = 0` throughout and `Pi(l) = (l - k) mod A`.
pub fn tilde_block_parameters(spec: &ModMultSpec, k: usize) -> Result<(BlockPermutation, Vec<BlockPhases>)> {
    let a = spec.a as usize;
    if k >= a {
        return Err(Error::InvalidParameter(format!(
            "shift k = {k} out of range for A = {a}"
        )));
    }
    let perm = BlockPermutation::CyclicShift(k);
    let phases = (0..a)
        .map(|l| {
            let j = perm.apply(l, a) as i64;
            let (beta, omega) = match spec.sign {
                Sign::Plus => (
                    (a - 1 - l) as f64 / a as f64,
                    unit_phase(j * (l as i64 + 1), a as i64),
                ),
                Sign::Minus => (
                    l as f64 / a as f64,
                    unit_phase(-j * l as i64, a as i64),
                ),
            };
            BlockPhases { alpha: 0.0, beta, omega }
        })
        .collect();
    Ok((perm, phases))
}

/// Frobenius norm of
/// `modmult_reduced(spec) - (1/sqrt(A)) sum_k tilde_baker(spec, k)`.
pub fn decomposition_residual(spec: &ModMultSpec) -> Result<f64> {
    Ok(decomposition_residual_detail(spec)?.0)
}

/// Frobenius and max-abs-entry residuals of the superposition identity.
pub fn decomposition_residual_detail(spec: &ModMultSpec) -> Result<(f64, f64)> {
    let a = spec.a as usize;
    let d = spec.d();
    let mut sum = CMatrix::zeros(d, d);
    for k in 0..a {
        sum = sum.add(&tilde_baker(spec, k)?);
    }
    let sum = sum.scale(Complex64::new(1.0 / (a as f64).sqrt(), 0.0));
    let u = modmult_reduced(spec);
    Ok((u.frobenius_distance(&sum), u.max_abs_distance(&sum)))
}

/// Smallest r >= 1 with A^r = 1 mod N.
pub fn multiplicative_order(a: u64, n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("modulus N = {n} must be >= 2")));
    }
    if gcd(a, n) != 1 {
        return Err(Error::NonCoprime { a, n });
    }
    let a = a % n;
    let mut acc = a;
    let mut r = 1;
    while acc != 1 {
        acc = acc * a % n;
        r += 1;
    }
    Ok(r)
}

/// Residual summary of the operator identities for one spec, as printed by
/// the `verify` command.
#[derive(Debug, Clone, Copy)]
pub struct VerifyReport {
    pub decomposition: f64,
    pub decomposition_max_abs: f64,
    pub cross: f64,
    pub cross_max_abs: f64,
    pub unitarity_max: f64,
}

impl VerifyReport {
    pub fn all_below(&self, tol: f64) -> bool {
        self.decomposition < tol && self.cross < tol && self.unitarity_max < tol
    }
}

pub fn verify_spec(spec: &ModMultSpec) -> Result<VerifyReport> {
    let u = modmult_reduced(spec);
    let a = spec.a as usize;
    let d = spec.d();
    let mut sum = CMatrix::zeros(d, d);
    let mut unitarity_max: f64 = 0.0;
    for k in 0..a {
        let b = tilde_baker(spec, k)?;
        unitarity_max = unitarity_max.max(b.unitarity_residual());
        sum = sum.add(&b);
    }
    let sum = sum.scale(Complex64::new(1.0 / (a as f64).sqrt(), 0.0));
    let via = modmult_via_dft(spec);
    Ok(VerifyReport {
        decomposition: u.frobenius_distance(&sum),
        decomposition_max_abs: u.max_abs_distance(&sum),
        cross: via.frobenius_distance(&u),
        cross_max_abs: via.max_abs_distance(&u),
        unitarity_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_close(m: &CMatrix, expect: &[(usize, usize, Complex64)], tol: f64) {
        for &(r, cc, v) in expect {
            assert!(
                (m[(r, cc)] - v).norm() < tol,
                "entry ({r},{cc}) = {} expected {v}",
                m[(r, cc)]
            );
        }
    }

    #[test]
    fn dft_dimension_one() {
        let f = generalized_dft(&DftSpec::standard(1).unwrap());
        assert!((f[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dft_dimension_two_no_phase() {
        let f = generalized_dft(&DftSpec::standard(2).unwrap());
        assert_close(
            &f,
            &[
                (0, 0, c(SQ2, 0.0)),
                (0, 1, c(SQ2, 0.0)),
                (1, 0, c(SQ2, 0.0)),
                (1, 1, c(-SQ2, 0.0)),
            ],
            1e-15,
        );
    }

    #[test]
    fn dft_dimension_two_half_beta() {
        let f = generalized_dft(&DftSpec::new(2, 0.0, 0.5).unwrap());
        assert_close(
            &f,
            &[
                (0, 0, c(SQ2, 0.0)),
                (0, 1, c(SQ2, 0.0)),
                (1, 0, c(0.0, -SQ2)),
                (1, 1, c(0.0, SQ2)),
            ],
            1e-15,
        );
    }

    #[test]
    fn dft_rejects_zero_dimension() {
        assert!(DftSpec::new(0, 0.0, 0.0).is_err());
    }

    #[test]
    fn dft_inverse_is_conjugate_transpose() {
        let spec = DftSpec::new(7, 0.31, -0.62).unwrap();
        let f = generalized_dft(&spec);
        let finv = generalized_dft_inv(&spec);
        assert!(finv.max_abs_distance(&f.dagger()) < 1e-15);
        assert!(finv.mul(&f).frobenius_distance(&CMatrix::identity(7)) < 1e-13);
    }

    #[test]
    fn block_identity_examples() {
        assert!(dft_block_identity_residual(6, 3, 0.0, 0.0).unwrap() < 1e-13);
        assert!(dft_block_identity_residual(8, 2, 1.0 / 3.0, -0.5).unwrap() < 1e-13);
        assert!(dft_block_identity_residual(4, 1, 0.7, -0.2).unwrap() < 1e-14);
        assert!(dft_block_identity_residual(6, 4, 0.0, 0.0).is_err());
    }

    #[test]
    fn modmult_full_identity_multiplier() {
        let u = modmult_full(1, 7).unwrap();
        assert!(u.frobenius_distance(&CMatrix::identity(7)) == 0.0);
    }

    #[test]
    fn modmult_full_times_two_mod_five() {
        let u = modmult_full(2, 5).unwrap();
        // column m carries its 1 at row 2m mod 5
        for (m, r) in [(0, 0), (1, 2), (2, 4), (3, 1), (4, 3)] {
            assert_eq!(u[(r, m)], c(1.0, 0.0));
        }
        assert_eq!(u.data().iter().filter(|z| z.re != 0.0).count(), 5);
    }

    #[test]
    fn modmult_full_spot_check_fig2_modulus() {
        let u = modmult_full(3, 52).unwrap();
        assert_eq!(u[(2, 18)], c(1.0, 0.0)); // 54 mod 52
        assert!(u.unitarity_residual() < 1e-14);
    }

    #[test]
    fn modmult_full_rejects_non_coprime() {
        assert!(matches!(modmult_full(2, 4), Err(Error::NonCoprime { .. })));
    }

    #[test]
    fn modmult_reduced_plus_case() {
        let spec = ModMultSpec::new(2, 2, Sign::Plus).unwrap();
        assert_eq!(spec.n(), 5);
        let u = modmult_reduced(&spec);
        for (m, r) in [(0, 1), (1, 3), (2, 0), (3, 2)] {
            assert_eq!(u[(r, m)], c(1.0, 0.0));
        }
    }

    #[test]
    fn modmult_reduced_minus_case_appends_fixed_point() {
        let spec = ModMultSpec::new(2, 2, Sign::Minus).unwrap();
        assert_eq!(spec.n(), 3);
        let u = modmult_reduced(&spec);
        for (m, r) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            assert_eq!(u[(r, m)], c(1.0, 0.0));
        }
    }

    #[test]
    fn modmult_reduced_is_a_permutation_at_fig2_size() {
        let spec = ModMultSpec::new(3, 17, Sign::Plus).unwrap();
        let u = modmult_reduced(&spec);
        assert_eq!(u.rows(), 51);
        for r in 0..51 {
            assert_eq!(u.row(r).iter().filter(|z| z.re == 1.0).count(), 1);
        }
        assert!(u.unitarity_residual() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(ModMultSpec::new(0, 3, Sign::Plus).is_err());
        assert!(ModMultSpec::new(2, 1, Sign::Minus).is_err()); // N = 1
        assert!(ModMultSpec::new(1, 2, Sign::Minus).is_err()); // N = 1 <= A... N must exceed A
        assert!(ModMultSpec::new(1, 3, Sign::Minus).is_ok()); // N = 2 > 1
    }

    #[test]
    fn via_dft_equals_permutation_form() {
        for (a, q, sign) in [
            (2, 2, Sign::Plus),
            (2, 2, Sign::Minus),
            (3, 17, Sign::Plus),
            (3, 17, Sign::Minus),
            (4, 5, Sign::Plus),
        ] {
            let spec = ModMultSpec::new(a, q, sign).unwrap();
            let via = modmult_via_dft(&spec);
            let red = modmult_reduced(&spec);
            let res = via.frobenius_distance(&red);
            assert!(res < 1e-12, "(A={a}, q={q}, {sign}): residual {res:.3e}");
        }
    }

    #[test]
    fn via_dft_multiplier_one_collapses_to_identity() {
        let spec = ModMultSpec::new(1, 3, Sign::Plus).unwrap();
        let via = modmult_via_dft(&spec);
        assert!(via.max_abs_distance(&CMatrix::identity(3)) < 1e-14);
    }

    #[test]
    fn via_dft_wrong_offset_fails_loudly() {
        let spec = ModMultSpec::new(3, 4, Sign::Plus).unwrap();
        let red = modmult_reduced(&spec);
        let good = modmult_via_dft_with_offset(&spec, 1);
        let bad = modmult_via_dft_with_offset(&spec, 0);
        assert!(good.frobenius_distance(&red) < 1e-12);
        assert!(bad.frobenius_distance(&red) > 1e-1);
    }

    #[test]
    fn bv_baker_two_level() {
        let b = bv_baker(2, 2, 0, 0.0, 0.0).unwrap();
        assert_close(
            &b,
            &[
                (0, 0, c(SQ2, 0.0)),
                (0, 1, c(SQ2, 0.0)),
                (1, 0, c(SQ2, 0.0)),
                (1, 1, c(-SQ2, 0.0)),
            ],
            1e-15,
        );
    }

    #[test]
    fn bv_baker_is_unitary() {
        let b = bv_baker(6, 3, 0, 0.0, 0.0).unwrap();
        assert!(b.unitarity_residual() < 1e-13);
        let b = bv_baker(12, 4, 2, 0.25, -0.4).unwrap();
        assert!(b.unitarity_residual() < 1e-13);
    }

    #[test]
    fn bv_baker_shift_places_blocks_on_the_antidiagonal() {
        // k = 1 at A = 2: block of column 0 moves to row block 1 and vice versa
        let b = bv_baker(4, 2, 1, 0.0, 0.0).unwrap();
        let f_inv = generalized_dft_inv(&DftSpec::standard(4).unwrap());
        let f2 = generalized_dft(&DftSpec::standard(2).unwrap());
        let mut m = CMatrix::zeros(4, 4);
        for r in 0..2 {
            for cc in 0..2 {
                m[(r, 2 + cc)] = f2[(r, cc)];
                m[(2 + r, cc)] = f2[(r, cc)];
            }
        }
        assert!(b.frobenius_distance(&f_inv.mul(&m)) < 1e-14);
    }

    #[test]
    fn bv_baker_requires_divisibility() {
        assert!(bv_baker(7, 3, 0, 0.0, 0.0).is_err());
    }

    #[test]
    fn tilde_baker_multiplier_one_is_identity() {
        let spec = ModMultSpec::new(1, 3, Sign::Plus).unwrap();
        let b = tilde_baker(&spec, 0).unwrap();
        assert!(b.max_abs_distance(&CMatrix::identity(3)) < 1e-14);
    }

    #[test]
    fn tilde_baker_rejects_out_of_range_shift() {
        let spec = ModMultSpec::new(2, 2, Sign::Plus).unwrap();
        assert!(tilde_baker(&spec, 2).is_err());
    }

    #[test]
    fn tilde_baker_is_unitary_at_fig2_size() {
        let spec = ModMultSpec::new(3, 17, Sign::Plus).unwrap();
        for k in 0..3 {
            let b = tilde_baker(&spec, k).unwrap();
            assert!(b.unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn superposition_reconstructs_modmult() {
        let spec = ModMultSpec::new(2, 2, Sign::Plus).unwrap();
        let (fro, _) = decomposition_residual_detail(&spec).unwrap();
        assert!(fro < 1e-13, "residual {fro:.3e}");
        let spec = ModMultSpec::new(2, 2, Sign::Minus).unwrap();
        assert!(decomposition_residual(&spec).unwrap() < 1e-13);
        let spec = ModMultSpec::new(3, 17, Sign::Plus).unwrap();
        assert!(decomposition_residual(&spec).unwrap() < 1e-11);
        let spec = ModMultSpec::new(5, 10, Sign::Plus).unwrap();
        assert!(decomposition_residual(&spec).unwrap() < 1e-11);
    }

    #[test]
    fn general_tilde_matches_bv_at_trivial_phases() {
        let phases = vec![BlockPhases { alpha: 0.0, beta: 0.0, omega: c(1.0, 0.0) }; 2];
        let g = general_tilde_baker(4, 2, &BlockPermutation::Explicit(vec![0, 1]), &phases)
            .unwrap();
        let b = bv_baker(4, 2, 0, 0.0, 0.0).unwrap();
        assert!(g.frobenius_distance(&b) < 1e-14);
    }

    #[test]
    fn general_tilde_cross_construction_equals_tilde() {
        for sign in [Sign::Plus, Sign::Minus] {
            let spec = ModMultSpec::new(3, 2, sign).unwrap();
            for k in 0..3 {
                let (perm, phases) = tilde_block_parameters(&spec, k).unwrap();
                let g = general_tilde_baker(6, 3, &perm, &phases).unwrap();
                let b = tilde_baker(&spec, k).unwrap();
                let res = g.frobenius_distance(&b);
                assert!(res < 1e-12, "{sign} k={k}: {res:.3e}");
            }
        }
    }

    #[test]
    fn general_tilde_random_phases_stay_unitary() {
        let phases: Vec<BlockPhases> = (0..3)
            .map(|l| BlockPhases {
                alpha: 0.1 * l as f64,
                beta: -0.3 + 0.2 * l as f64,
                omega: Complex64::from_polar(1.0, 1.7 * l as f64 + 0.3),
            })
            .collect();
        let g = general_tilde_baker(6, 3, &BlockPermutation::Explicit(vec![2, 0, 1]), &phases)
            .unwrap();
        assert!(g.unitarity_residual() < 1e-13);
    }

    #[test]
    fn general_tilde_rejects_bad_permutations_and_omegas() {
        let ok = BlockPhases { alpha: 0.0, beta: 0.0, omega: c(1.0, 0.0) };
        assert!(general_tilde_baker(6, 3, &BlockPermutation::Explicit(vec![0, 0, 1]), &[ok; 3])
            .is_err());
        let bad = BlockPhases { alpha: 0.0, beta: 0.0, omega: c(0.5, 0.0) };
        assert!(general_tilde_baker(6, 3, &BlockPermutation::CyclicShift(1), &[ok, ok, bad])
            .is_err());
    }

    #[test]
    fn multiplicative_order_examples() {
        assert_eq!(multiplicative_order(1, 7).unwrap(), 1);
        assert_eq!(multiplicative_order(2, 5).unwrap(), 4);
        assert_eq!(multiplicative_order(3, 52).unwrap(), 6);
        assert!(multiplicative_order(2, 4).is_err());
    }

    #[test]
    fn construction_is_independent_of_the_thread_count() {
        let spec = ModMultSpec::new(3, 40, Sign::Plus).unwrap();
        let build = || {
            let b = tilde_baker(&spec, 1).unwrap();
            let v = modmult_via_dft(&spec);
            (b, v)
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(build);
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(build);
        // per-entry accumulation order is fixed, so the results are bitwise equal
        assert_eq!(single.0.data(), quad.0.data());
        assert_eq!(single.1.data(), quad.1.data());
    }
}
