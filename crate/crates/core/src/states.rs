//! Torus Gaussian (coherent) states, phase-insensitive distances, the
//! momentum representation and Husimi phase-space grids.
//!
//! The underlying line state localized at `z0 = (x0, p0)` with squeezing
//! `sigma` is
//! `Psi(x) = (2 D sigma)^{1/4} e^{-i pi D x0 p0} e^{2 pi i D p0 x}
//!  e^{-sigma D pi (x - x0)^2}`;
//! the torus state periodicizes it, `<m|Psi_T2> = sum_v Psi(m/D + v)`, and is
//! then normalized numerically.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{fmt17, parse_complex};

/// Center, squeezing and Hilbert dimension of a torus coherent state.
/// Centers are reduced mod 1 (a unit shift of either coordinate only changes
/// the state by a global phase).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentParams {
    pub x0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub d: usize,
}

impl CoherentParams {
    pub fn new(x0: f64, p0: f64, sigma: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("state dimension must be >= 1".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be > 0")));
        }
        if sigma * (d as f64) < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma * D = {} is below 1; the localization regime needs sigma * D >= 1",
                sigma * d as f64
            )));
        }
        if !x0.is_finite() || !p0.is_finite() {
            return Err(Error::InvalidParameter("center coordinates must be finite".into()));
        }
        Ok(CoherentParams { x0: x0.rem_euclid(1.0), p0: p0.rem_euclid(1.0), sigma, d })
    }
}

/// A length-D complex vector; a torus wavefunction in the position
/// representation.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidDimension("state must have D >= 1 amplitudes".into()));
        }
        Ok(StateVector { amps })
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); d];
        amps[i] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amp(&self, i: usize) -> Complex64 {
        self.amps[i]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>` with the conjugate on self.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, s: Complex64) -> StateVector {
        StateVector { amps: self.amps.iter().map(|z| z * s).collect() }
    }

    pub fn normalized(mut self) -> Result<StateVector> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::InvalidParameter("cannot normalize a zero state".into()));
        }
        for z in &mut self.amps {
            *z /= n;
        }
        Ok(self)
    }
}

fn r2_gaussian(p: &CoherentParams, x: f64) -> Complex64 {
    let dd = p.d as f64;
    let mag = (2.0 * dd * p.sigma).powf(0.25)
        * (-p.sigma * dd * std::f64::consts::PI * (x - p.x0) * (x - p.x0)).exp();
    let phase = std::f64::consts::PI * dd * p.p0 * (2.0 * x - p.x0);
    Complex64::from_polar(mag, phase)
}

const SHELL_EPS: f64 = 1e-16;
const SHELL_FLOOR: i64 = 2;
const SHELL_CAP: i64 = 64;

/// Torus coherent state with the periodicization cutoff chosen adaptively:
/// shells |v| = 0, 1, ... are accumulated until a shell past the floor V = 2
/// contributes less than 1e-16 in absolute value. Returns the normalized
/// state and the cutoff used.
pub fn torus_coherent_state_adaptive(params: &CoherentParams) -> Result<(StateVector, i64)> {
    let d = params.d;
    let mut amps: Vec<Complex64> = (0..d).map(|m| r2_gaussian(params, m as f64 / d as f64)).collect();
    let mut v_used = 0;
    for v in 1..=SHELL_CAP {
        let mut shell_max: f64 = 0.0;
        for (m, amp) in amps.iter_mut().enumerate() {
            let x = m as f64 / d as f64;
            let plus = r2_gaussian(params, x + v as f64);
            let minus = r2_gaussian(params, x - v as f64);
            *amp += plus + minus;
            shell_max = shell_max.max(plus.norm()).max(minus.norm());
        }
        v_used = v;
        if v >= SHELL_FLOOR && shell_max < SHELL_EPS {
            break;
        }
    }
    Ok((StateVector::new(amps)?.normalized()?, v_used))
}

/// Normalized torus coherent state (adaptive periodicization cutoff).
pub fn torus_coherent_state(params: &CoherentParams) -> Result<StateVector> {
    Ok(torus_coherent_state_adaptive(params)?.0)
}

/// Torus coherent state with a fixed periodicization cutoff |v| <= v_max;
/// shells accumulate in the same order as the adaptive construction.
pub fn torus_coherent_state_with_cutoff(params: &CoherentParams, v_max: i64) -> Result<StateVector> {
    let d = params.d;
    let mut amps: Vec<Complex64> = (0..d).map(|m| r2_gaussian(params, m as f64 / d as f64)).collect();
    for v in 1..=v_max {
        for (m, amp) in amps.iter_mut().enumerate() {
            let x = m as f64 / d as f64;
            *amp += r2_gaussian(params, x + v as f64) + r2_gaussian(params, x - v as f64);
        }
    }
    StateVector::new(amps)?.normalized()
}

/// `min_theta ||psi - theta phi||`, which for unit-norm states equals
/// `sqrt(2 - 2 |<phi|psi>|)`; invariant under global phases of either
/// argument. Evaluated as the explicit residual at the optimal phase
/// `theta* = <phi|psi> / |<phi|psi>|`, which stays accurate near zero where
/// the closed form loses half the significand to cancellation.
pub fn distance_up_to_phase(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    let overlap = phi.inner(psi)?;
    let mag = overlap.norm();
    if mag == 0.0 {
        return Ok((psi.norm().powi(2) + phi.norm().powi(2)).sqrt());
    }
    let theta = overlap / mag;
    let residual: f64 = psi
        .amps
        .iter()
        .zip(&phi.amps)
        .map(|(a, b)| (a - theta * b).norm_sqr())
        .sum();
    Ok(residual.sqrt())
}

/// `F_D psi` with the standard DFT (alpha = beta = 0); the momentum index m
/// is read as p = m/D.
pub fn momentum_representation(psi: &StateVector) -> StateVector {
    let d = psi.dim();
    let scale = 1.0 / (d as f64).sqrt();
    let tw: Vec<Complex64> = (0..d)
        .map(|r| Complex64::from_polar(1.0, -std::f64::consts::TAU * r as f64 / d as f64))
        .collect();
    let amps: Vec<Complex64> = (0..d)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, a) in psi.amplitudes().iter().enumerate() {
                acc += tw[(n * m) % d] * a;
            }
            acc * scale
        })
        .collect();
    StateVector { amps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    UnitMax,
}

/// Phase-space grid of coherent-state overlap magnitudes
/// `values[i][j] = |<Psi_{(i/nx, j/np), sigma} | psi>|^2`, row-major in x
/// then p; grid points sit at cell corners.
#[derive(Debug, Clone)]
pub struct HusimiGrid {
    pub nx: usize,
    pub np: usize,
    pub sigma: f64,
    pub normalization: Normalization,
    values: Vec<f64>,
}

impl HusimiGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.np + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid coordinates (i/nx, j/np) of the first maximal cell in row-major
    /// order.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (0usize, 0usize);
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..self.nx {
            for j in 0..self.np {
                let v = self.value(i, j);
                if v > best_v {
                    best_v = v;
                    best = (i, j);
                }
            }
        }
        (best.0 as f64 / self.nx as f64, best.1 as f64 / self.np as f64)
    }

    pub fn into_unit_max(mut self) -> HusimiGrid {
        let max = self.values.iter().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            for v in &mut self.values {
                *v /= max;
            }
        }
        self.normalization = Normalization::UnitMax;
        self
    }
}

/// Husimi function of `psi` on an nx x np corner grid with coherent-state
/// squeezing `sigma`; raw (unnormalized) values.
pub fn husimi(psi: &StateVector, nx: usize, np: usize, sigma: f64) -> Result<HusimiGrid> {
    if nx < 2 || np < 2 {
        return Err(Error::InvalidDimension(format!(
            "Husimi grid must be at least 2x2, got {nx}x{np}"
        )));
    }
    let d = psi.dim();
    let mut values = vec![0.0f64; nx * np];
    values
        .par_chunks_mut(np)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let x = i as f64 / nx as f64;
            for (j, slot) in row.iter_mut().enumerate() {
                let p = j as f64 / np as f64;
                let grid_state = torus_coherent_state(&CoherentParams::new(x, p, sigma, d)?)?;
                *slot = grid_state.inner(psi)?.norm_sqr();
            }
            Ok(())
        })?;
    Ok(HusimiGrid { nx, np, sigma, normalization: Normalization::Raw, values })
}

/// Write a state in the STATE v1 format: first line `STATE v1 <D>`, then one
/// `<re>,<im>` line per amplitude at 17 significant digits.
pub fn write_state<W: Write>(psi: &StateVector, w: &mut W) -> Result<()> {
    writeln!(w, "STATE v1 {}", psi.dim())?;
    for z in psi.amplitudes() {
        writeln!(w, "{},{}", fmt17(z.re), fmt17(z.im))?;
    }
    Ok(())
}

pub fn read_state<R: BufRead>(r: &mut R) -> Result<StateVector> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "STATE" || fields[1] != "v1" {
        return Err(Error::Parse(format!("bad STATE header: {}", header.trim())));
    }
    let d: usize = fields[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad dimension {}", fields[2])))?;
    let mut amps = Vec::with_capacity(d);
    let mut line = String::new();
    for i in 0..d {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Parse(format!("unexpected EOF at amplitude {i}")));
        }
        let (re, im) = parse_complex(line.trim())?;
        amps.push(Complex64::new(re, im));
    }
    StateVector::new(amps)
}

pub fn save_state(psi: &StateVector, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_state(psi, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<StateVector> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_state(&mut r)
}

/// Husimi CSV: header `x,p,value`, then nx*np rows, row-major in x then p.
pub fn write_husimi_csv<W: Write>(grid: &HusimiGrid, w: &mut W) -> Result<()> {
    writeln!(w, "x,p,value")?;
    for i in 0..grid.nx {
        let x = i as f64 / grid.nx as f64;
        for j in 0..grid.np {
            let p = j as f64 / grid.np as f64;
            writeln!(w, "{},{},{}", fmt17(x), fmt17(p), fmt17(grid.value(i, j)))?;
        }
    }
    Ok(())
}
