//! Brute-force bosonic state-vector simulator on a photon-number-truncated
//! Fock space. Independent of the covariance-matrix engine: every gate is
//! `exp(K)` for an explicit normally ordered generator `K`, applied by a
//! Taylor series.
#![allow(dead_code)]

use std::collections::HashMap;

use num_complex::Complex64;
use qwalk_core::gaussian::{CouplerKind, ModeNetwork, Stage};

/// `(mode, creation?)`, applied right to left within a monomial.
type Ladder = (usize, bool);

pub struct Generator {
    terms: Vec<(Complex64, Vec<Ladder>)>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Generator {
    /// `phi (a_j^dagger a_i - a_i^dagger a_j)`: `a_i -> cos a_i - sin a_j`.
    pub fn passive(i: usize, j: usize, phi: f64) -> Self {
        Self {
            terms: vec![
                (c(phi, 0.0), vec![(j, true), (i, false)]),
                (c(-phi, 0.0), vec![(i, true), (j, false)]),
            ],
        }
    }

    /// `i chi (a_i^dagger a_j^dagger + a_i a_j)`:
    /// `a_i -> cosh a_i + i sinh a_j^dagger`.
    pub fn active(i: usize, j: usize, chi: f64) -> Self {
        Self {
            terms: vec![
                (c(0.0, chi), vec![(i, true), (j, true)]),
                (c(0.0, chi), vec![(i, false), (j, false)]),
            ],
        }
    }

    /// `(r/2)(a^2 - a^dagger^2)`: `a -> cosh a - sinh a^dagger`.
    pub fn squeeze(i: usize, r: f64) -> Self {
        Self {
            terms: vec![
                (c(r / 2.0, 0.0), vec![(i, false), (i, false)]),
                (c(-r / 2.0, 0.0), vec![(i, true), (i, true)]),
            ],
        }
    }

    /// `alpha a^dagger - alpha^* a`: `a -> a + alpha`.
    pub fn displace(i: usize, alpha: Complex64) -> Self {
        Self {
            terms: vec![(alpha, vec![(i, true)]), (-alpha.conj(), vec![(i, false)])],
        }
    }

    /// `i phi a^dagger a`: `a -> exp(i phi) a`.
    pub fn phase(i: usize, phi: f64) -> Self {
        Self {
            terms: vec![(c(0.0, phi), vec![(i, true), (i, false)])],
        }
    }
}

pub struct Fock {
    modes: usize,
    cutoff: usize,
    basis: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    pub psi: Vec<Complex64>,
}

fn occupations(modes: usize, cutoff: usize) -> Vec<Vec<usize>> {
    if modes == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in occupations(modes - 1, cutoff) {
        let used: usize = rest.iter().sum();
        for n in 0..=cutoff - used {
            let mut v = rest.clone();
            v.push(n);
            out.push(v);
        }
    }
    out
}

impl Fock {
    /// Vacuum on `modes` modes keeping states with at most `cutoff` photons.
    pub fn vacuum(modes: usize, cutoff: usize) -> Self {
        let basis = occupations(modes, cutoff);
        let index = basis
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, b)| (b, i))
            .collect();
        let mut psi = vec![c(0.0, 0.0); basis.len()];
        psi[0] = c(1.0, 0.0);
        Self {
            modes,
            cutoff,
            basis,
            index,
            psi,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Sparse `(to, from, value)` entries of `K` on the truncated space.
    fn matrix(&self, g: &Generator) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::new();
        let mut occ = vec![0usize; self.modes];
        for k in 0..self.basis.len() {
            'term: for (coeff, ops) in &g.terms {
                occ.copy_from_slice(&self.basis[k]);
                let mut factor = 1.0;
                for &(m, dagger) in ops.iter().rev() {
                    if dagger {
                        occ[m] += 1;
                        factor *= (occ[m] as f64).sqrt();
                    } else {
                        if occ[m] == 0 {
                            continue 'term;
                        }
                        factor *= (occ[m] as f64).sqrt();
                        occ[m] -= 1;
                    }
                }
                if occ.iter().sum::<usize>() > self.cutoff {
                    continue;
                }
                out.push((self.index[&occ], k, coeff * factor));
            }
        }
        out
    }

    /// `psi -> exp(K) psi` on the truncated space.
    pub fn apply(&mut self, g: &Generator) {
        let entries = self.matrix(g);
        // row sums bound the operator norm
        let mut rows = vec![0.0; self.dim()];
        for &(to, _, v) in &entries {
            rows[to] += v.norm();
        }
        let bound = rows.iter().copied().fold(0.0, f64::max);
        let slices = (bound / 2.0).ceil().max(1.0) as usize;
        let inv_slices = 1.0 / slices as f64;
        for _ in 0..slices {
            let mut term = self.psi.clone();
            let mut sum = self.psi.clone();
            for k in 1..80 {
                let mut next = vec![c(0.0, 0.0); term.len()];
                for &(to, from, v) in &entries {
                    next[to] += v * term[from];
                }
                let f = inv_slices / k as f64;
                let mut size = 0.0;
                for (s, t) in sum.iter_mut().zip(next.iter_mut()) {
                    *t *= f;
                    *s += *t;
                    size += t.norm_sqr();
                }
                term = next;
                if size < 1e-36 {
                    break;
                }
            }
            self.psi = sum;
        }
    }

    /// Mode `i` becomes mode `dest[i]`.
    pub fn permute(&mut self, dest: &[usize]) {
        let mut out = vec![c(0.0, 0.0); self.psi.len()];
        let mut occ = vec![0usize; self.modes];
        for (k, amp) in self.psi.iter().enumerate() {
            for (i, &d) in dest.iter().enumerate() {
                occ[d] = self.basis[k][i];
            }
            out[self.index[&occ]] = *amp;
        }
        self.psi = out;
    }

    /// Probability missing from, or sitting within two photons of, the
    /// truncation shell.
    pub fn tail(&self) -> f64 {
        let norm: f64 = self.psi.iter().map(|a| a.norm_sqr()).sum();
        let edge: f64 = self
            .basis
            .iter()
            .zip(&self.psi)
            .filter(|(b, _)| b.iter().sum::<usize>() + 2 > self.cutoff)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        (1.0 - norm).abs() + edge
    }

    fn expect(&self, f: impl Fn(&[usize]) -> f64) -> f64 {
        self.basis
            .iter()
            .zip(&self.psi)
            .map(|(b, a)| a.norm_sqr() * f(b))
            .sum()
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.expect(|b| b[i] as f64)
    }

    pub fn variance(&self, i: usize) -> f64 {
        let n = self.mean(i);
        self.expect(|b| (b[i] * b[i]) as f64) - n * n
    }

    /// `<a_i^dagger a_j^dagger a_j a_i> / (<n_i><n_j>)`.
    pub fn g2(&self, i: usize, j: usize) -> f64 {
        let num = if i == j {
            self.expect(|b| (b[i] * b[i].saturating_sub(1)) as f64)
        } else {
            self.expect(|b| (b[i] * b[j]) as f64)
        };
        num / (self.mean(i) * self.mean(j))
    }
}

/// Run every step of `net` on `fock`.
pub fn run_network(fock: &mut Fock, net: &ModeNetwork) {
    for _ in 0..net.steps() {
        for stage in net.stages() {
            match stage {
                Stage::Couplers(cs) => {
                    for cp in cs {
                        let g = match cp.kind {
                            CouplerKind::Active { chi } => Generator::active(cp.a, cp.b, chi),
                            CouplerKind::Passive { phi } => Generator::passive(cp.a, cp.b, phi),
                        };
                        fock.apply(&g);
                    }
                }
                Stage::Permute(dest) => fock.permute(dest),
            }
        }
    }
}
