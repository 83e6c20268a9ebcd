//! Eigenphase extraction and the spectral diagnostics that distinguish the
//! exactly periodic modular multiplication operator from the baker
//! quantizations: degeneracy histograms, the cycle-structure oracle, exact
//! periods, and nearest-neighbor spacing ratios.

use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Once;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{fmt17, CMatrix};
use crate::operators::gcd;

#[allow(non_snake_case)]
extern "C" {
    fn LAPACKE_zgeev(
        matrix_layout: i32,
        jobvl: u8,
        jobvr: u8,
        n: i32,
        a: *mut Complex64,
        lda: i32,
        w: *mut Complex64,
        vl: *mut Complex64,
        ldvl: i32,
        vr: *mut Complex64,
        ldvr: i32,
    ) -> i32;
    fn LAPACKE_dgeev(
        matrix_layout: i32,
        jobvl: u8,
        jobvr: u8,
        n: i32,
        a: *mut f64,
        lda: i32,
        wr: *mut f64,
        wi: *mut f64,
        vl: *mut f64,
        ldvl: i32,
        vr: *mut f64,
        ldvr: i32,
    ) -> i32;
    fn LAPACKE_dhseqr(
        matrix_layout: i32,
        job: u8,
        compz: u8,
        n: i32,
        ilo: i32,
        ihi: i32,
        h: *mut f64,
        ldh: i32,
        wr: *mut f64,
        wi: *mut f64,
        z: *mut f64,
        ldz: i32,
    ) -> i32;
    fn openblas_set_num_threads(num: i32);
}

const LAPACK_COL_MAJOR: i32 = 102;

static BLAS_SINGLE_THREAD: Once = Once::new();

/// Pin the BLAS backend to one thread; outer parallelism happens at the
/// matrix level and per-call determinism must not depend on a thread pool.
fn ensure_single_threaded_blas() {
    BLAS_SINGLE_THREAD.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// Column-to-row map when the matrix is exactly a 0/1 permutation matrix.
fn permutation_of(m: &CMatrix) -> Option<Vec<usize>> {
    let n = m.rows();
    let mut sigma = vec![usize::MAX; n];
    let mut row_used = vec![false; n];
    for c in 0..n {
        for r in 0..n {
            let z = m[(r, c)];
            if z.im != 0.0 {
                return None;
            }
            if z.re == 1.0 {
                if sigma[c] != usize::MAX || row_used[r] {
                    return None;
                }
                sigma[c] = r;
                row_used[r] = true;
            } else if z.re != 0.0 {
                return None;
            }
        }
        if sigma[c] == usize::MAX {
            return None;
        }
    }
    Some(sigma)
}

/// Eigenvalues of a permutation matrix. Reordering the basis along the
/// orbits block-diagonalizes the matrix exactly into cyclic-shift blocks,
/// one per orbit; blocks of equal size are identical matrices, so each
/// distinct block is solved once with the Hessenberg QR eigensolver (a
/// cyclic shift is already unreduced upper Hessenberg) and its spectrum is
/// replicated per orbit.
fn permutation_eigenvalues(sigma: &[usize]) -> Result<Vec<Complex64>> {
    use std::collections::BTreeMap;
    let n = sigma.len();
    let mut seen = vec![false; n];
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut v = start;
        while !seen[v] {
            seen[v] = true;
            v = sigma[v];
            len += 1;
        }
        *counts.entry(len).or_insert(0) += 1;
    }
    let mut vals = Vec::with_capacity(n);
    for (&c, &mult) in &counts {
        let block = cyclic_shift_eigenvalues(c)?;
        for _ in 0..mult {
            vals.extend_from_slice(&block);
        }
    }
    Ok(vals)
}

/// LAPACK spectrum of the c x c cyclic shift block e_i -> e_{i+1 mod c}.
/// The row-major buffer holds the transpose (superdiagonal plus corner),
/// which LAPACK reads column-major as the upper Hessenberg shift block.
fn cyclic_shift_eigenvalues(c: usize) -> Result<Vec<Complex64>> {
    if c == 1 {
        return Ok(vec![Complex64::new(1.0, 0.0)]);
    }
    let mut h = vec![0.0f64; c * c];
    for i in 0..c - 1 {
        h[i * c + i + 1] = 1.0;
    }
    h[(c - 1) * c] = 1.0;
    let mut wr = vec![0.0f64; c];
    let mut wi = vec![0.0f64; c];
    let info = unsafe {
        LAPACKE_dhseqr(
            LAPACK_COL_MAJOR,
            b'E',
            b'N',
            c as i32,
            1,
            c as i32,
            h.as_mut_ptr(),
            c as i32,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            1,
        )
    };
    if info != 0 {
        return Err(Error::InvalidParameter(format!("dhseqr failed with info = {info}")));
    }
    Ok(wr.into_iter().zip(wi).map(|(r, i)| Complex64::new(r, i)).collect())
}

/// Eigenvalues of a square complex matrix via LAPACK, unsorted.
fn geev_eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    ensure_single_threaded_blas();
    let n = m.rows();
    let ni = n as i32;
    if let Some(sigma) = permutation_of(m) {
        return permutation_eigenvalues(&sigma);
    }
    // The row-major buffer read as column-major is the transpose, which has
    // the same eigenvalues; this skips LAPACKE's internal transposition.
    if m.is_real() {
        let mut a: Vec<f64> = m.data().iter().map(|z| z.re).collect();
        let mut wr = vec![0.0f64; n];
        let mut wi = vec![0.0f64; n];
        let info = unsafe {
            LAPACKE_dgeev(
                LAPACK_COL_MAJOR,
                b'N',
                b'N',
                ni,
                a.as_mut_ptr(),
                ni,
                wr.as_mut_ptr(),
                wi.as_mut_ptr(),
                std::ptr::null_mut(),
                1,
                std::ptr::null_mut(),
                1,
            )
        };
        if info != 0 {
            return Err(Error::InvalidParameter(format!("dgeev failed with info = {info}")));
        }
        Ok(wr.into_iter().zip(wi).map(|(r, i)| Complex64::new(r, i)).collect())
    } else {
        let mut a = m.data().to_vec();
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        let info = unsafe {
            LAPACKE_zgeev(
                LAPACK_COL_MAJOR,
                b'N',
                b'N',
                ni,
                a.as_mut_ptr(),
                ni,
                w.as_mut_ptr(),
                std::ptr::null_mut(),
                1,
                std::ptr::null_mut(),
                1,
            )
        };
        if info != 0 {
            return Err(Error::InvalidParameter(format!("zgeev failed with info = {info}")));
        }
        Ok(w)
    }
}

/// Eigenvalues of a unitary matrix. Errors when the unitarity residual
/// exceeds 1e-10 * dim or when any eigenvalue modulus strays more than 1e-8
/// from 1.
pub fn eigenvalues(u: &CMatrix) -> Result<Vec<Complex64>> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch { left: u.rows(), right: u.cols() });
    }
    let dim = u.rows();
    let tol = 1e-10 * dim as f64;
    let residual = u.unitarity_residual();
    if residual >= tol {
        return Err(Error::NonUnitary { residual, tol });
    }
    let vals = geev_eigenvalues(u)?;
    for v in &vals {
        if (v.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::NonUnitary { residual: (v.norm() - 1.0).abs(), tol: 1e-8 });
        }
    }
    Ok(vals)
}

/// Sorted eigenphases in [0, 2 pi) of a unitary matrix.
pub fn eigenphases(u: &CMatrix) -> Result<Vec<f64>> {
    let mut phases: Vec<f64> = eigenvalues(u)?
        .into_iter()
        .map(|v| {
            let arg = v.arg();
            if arg < 0.0 {
                arg + TAU
            } else {
                arg
            }
        })
        .map(|p| if p >= TAU { p - TAU } else { p })
        .collect();
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

/// Cycle lengths (sorted) of the permutation m -> A m mod N on {0..N-1}.
/// Each c-cycle contributes one eigenvalue at every c-th root of unity, so
/// this is the brute-force oracle for the modular multiplication spectrum.
pub fn cycle_structure(a: u64, n: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidParameter("modulus must be >= 1".into()));
    }
    if gcd(a, n) != 1 {
        return Err(Error::NonCoprime { a, n });
    }
    let mut seen = vec![false; n as usize];
    let mut cycles = Vec::new();
    for start in 0..n {
        if seen[start as usize] {
            continue;
        }
        let mut len = 0;
        let mut m = start;
        while !seen[m as usize] {
            seen[m as usize] = true;
            m = a * m % n;
            len += 1;
        }
        cycles.push(len);
    }
    cycles.sort_unstable();
    Ok(cycles)
}

/// Aggregated (phase, multiplicity) spectrum predicted by a cycle multiset:
/// phases 2 pi t / c for t = 0..c-1 from each c-cycle, merged exactly over
/// reduced fractions and sorted by phase.
pub fn predicted_degeneracies(cycles: &[usize]) -> Vec<(f64, usize)> {
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for &c in cycles {
        for t in 0..c {
            let g = gcd(t as u64, c as u64).max(1);
            let key = (t as u64 / g, c as u64 / g);
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(f64, usize)> = counts
        .into_iter()
        .map(|((num, den), mult)| (TAU * num as f64 / den as f64, mult))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// ||U^r - I||_F via repeated squaring.
pub fn period_residual(u: &CMatrix, r: u64) -> f64 {
    u.pow(r).frobenius_distance(&CMatrix::identity(u.rows()))
}

/// Cluster sorted phases whose circular gap is <= tol; returns one
/// (representative, multiplicity) per class sorted by representative.
pub fn degeneracy_histogram(phases: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let n = phases.len();
    if n == 0 {
        return Vec::new();
    }
    // circular gaps; gap[i] follows phases[i]
    let gaps: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 < n {
                phases[i + 1] - phases[i]
            } else {
                phases[0] + TAU - phases[n - 1]
            }
        })
        .collect();
    // cut the circle at the first gap exceeding tol; if none, all phases
    // form one class
    let cut = match gaps.iter().position(|&g| g > tol) {
        Some(i) => (i + 1) % n,
        None => {
            let mean = circular_mean(phases[0], phases);
            return vec![(mean, n)];
        }
    };
    let mut classes = Vec::new();
    let mut members: Vec<f64> = Vec::new();
    let mut unwrapped = phases[cut];
    members.push(unwrapped);
    for step in 0..n - 1 {
        let gap = gaps[(cut + step) % n];
        if gap > tol {
            classes.push(finish_class(&members));
            members.clear();
        }
        unwrapped += gap;
        members.push(unwrapped);
    }
    classes.push(finish_class(&members));
    classes.sort_by(|a, b| a.0.total_cmp(&b.0));
    classes
}

fn finish_class(members: &[f64]) -> (f64, usize) {
    let mean = members.iter().sum::<f64>() / members.len() as f64;
    (mean.rem_euclid(TAU), members.len())
}

fn circular_mean(anchor: f64, phases: &[f64]) -> f64 {
    // used only when every circular gap is small: unwrap relative to anchor
    let mut sum = 0.0;
    for &p in phases {
        let mut dp = p - anchor;
        if dp > std::f64::consts::PI {
            dp -= TAU;
        } else if dp < -std::f64::consts::PI {
            dp += TAU;
        }
        sum += dp;
    }
    (anchor + sum / phases.len() as f64).rem_euclid(TAU)
}

/// Consecutive-spacing ratios of sorted phases on the circle:
/// r_n = min(s_n, s_{n+1}) / max(s_n, s_{n+1}) over the n circular spacings,
/// with 0/0 taken as 0. Returns the per-level list and its mean.
pub fn spacing_ratios(phases: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = phases.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "spacing ratios need at least 3 phases, got {n}"
        )));
    }
    let spacings: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 < n {
                phases[i + 1] - phases[i]
            } else {
                phases[0] + TAU - phases[n - 1]
            }
        })
        .collect();
    let ratios: Vec<f64> = (0..n)
        .map(|i| {
            let (s0, s1) = (spacings[i], spacings[(i + 1) % n]);
            let (lo, hi) = (s0.min(s1), s0.max(s1));
            if hi == 0.0 {
                0.0
            } else {
                lo / hi
            }
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / n as f64;
    Ok((ratios, mean))
}

/// Full spectral summary of one unitary operator.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub dim: usize,
    pub phases: Vec<f64>,
    pub degeneracy_classes: Vec<(f64, usize)>,
    pub mean_spacing_ratio: Option<f64>,
}

pub fn spectrum_report(u: &CMatrix, tol: f64) -> Result<SpectrumReport> {
    let phases = eigenphases(u)?;
    let degeneracy_classes = degeneracy_histogram(&phases, tol);
    let mean_spacing_ratio = spacing_ratios(&phases).ok().map(|(_, mean)| mean);
    Ok(SpectrumReport { dim: u.rows(), phases, degeneracy_classes, mean_spacing_ratio })
}

/// Spectrum CSV: header `index,phase`.
pub fn write_spectrum_csv<W: Write>(phases: &[f64], w: &mut W) -> Result<()> {
    writeln!(w, "index,phase")?;
    for (i, p) in phases.iter().enumerate() {
        writeln!(w, "{},{}", i, fmt17(*p))?;
    }
    Ok(())
}

/// Degeneracy CSV: header `phase,multiplicity`.
pub fn write_degeneracy_csv<W: Write>(classes: &[(f64, usize)], w: &mut W) -> Result<()> {
    writeln!(w, "phase,multiplicity")?;
    for (p, m) in classes {
        writeln!(w, "{},{}", fmt17(*p), m)?;
    }
    Ok(())
}

/// Ratios CSV: header `n,ratio`, then a trailing `# mean=<value>` line.
pub fn write_ratios_csv<W: Write>(ratios: &[f64], mean: f64, w: &mut W) -> Result<()> {
    writeln!(w, "n,ratio")?;
    for (i, r) in ratios.iter().enumerate() {
        writeln!(w, "{},{}", i, fmt17(*r))?;
    }
    writeln!(w, "# mean={}", fmt17(mean))?;
    Ok(())
}
