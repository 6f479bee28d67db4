//! Pauli transfer matrices on the two-qubit computational subspace and the
//! average gate fidelity with local Z corrections.

use super::{GateKind, GateResult};
use crate::optimize::nelder_mead;
use crate::TWO_PI;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// 4×4 complex matrix on {|00⟩, |01⟩, |10⟩, |11⟩}, row-major.
pub(crate) type Block = [[Complex64; 4]; 4];

/// Grid resolution per angle before local refinement.
pub const Z_GRID: usize = 64;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

fn pauli1(k: usize) -> [[Complex64; 2]; 2] {
    match k {
        0 => [[C1, C0], [C0, C1]],
        1 => [[C0, C1], [C1, C0]],
        2 => [[C0, -CI], [CI, C0]],
        _ => [[C1, C0], [C0, -C1]],
    }
}

/// Two-qubit Pauli P_i = σ_{i/4} ⊗ σ_{i%4}, fixed qubit first.
fn pauli2(i: usize) -> Block {
    let (a, b) = (pauli1(i / 4), pauli1(i % 4));
    std::array::from_fn(|r| std::array::from_fn(|c| a[r / 2][c / 2] * b[r % 2][c % 2]))
}

fn ideal_unitary(gate: GateKind) -> Block {
    let mut u = [[C0; 4]; 4];
    match gate {
        GateKind::Identity => (0..4).for_each(|i| u[i][i] = C1),
        GateKind::Cz02 | GateKind::Cz20 => {
            (0..3).for_each(|i| u[i][i] = C1);
            u[3][3] = -C1;
        }
        GateKind::Iswap => {
            u[0][0] = C1;
            u[3][3] = C1;
            u[1][2] = CI;
            u[2][1] = CI;
        }
    }
    u
}

fn mul(a: &Block, b: &Block) -> Block {
    std::array::from_fn(|r| std::array::from_fn(|c| (0..4).map(|k| a[r][k] * b[k][c]).sum()))
}

fn dagger(a: &Block) -> Block {
    std::array::from_fn(|r| std::array::from_fn(|c| a[c][r].conj()))
}

fn trace(a: &Block) -> Complex64 {
    (0..4).map(|i| a[i][i]).sum()
}

/// Real 16×16 R_ij = Tr[P_i ℰ(P_j)]/4 of a process on the computational subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessMatrix {
    pub entries: [[f64; 16]; 16],
    /// Modulation frequency the process was generated with (Hz).
    pub f_m_hz: f64,
    /// Pulse length (s).
    pub t_f: f64,
}

impl ProcessMatrix {
    /// From the images ℰ(|a⟩⟨b|), indexed `outputs[a][b]`.
    pub(crate) fn from_outputs(outputs: &[[Block; 4]; 4], f_m_hz: f64, t_f: f64) -> Self {
        let mut entries = [[0.0; 16]; 16];
        let paulis: Vec<Block> = (0..16).map(pauli2).collect();
        for j in 0..16 {
            let mut image = [[C0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    let w = paulis[j][a][b];
                    if w != C0 {
                        for r in 0..4 {
                            for c in 0..4 {
                                image[r][c] += w * outputs[a][b][r][c];
                            }
                        }
                    }
                }
            }
            for i in 0..16 {
                entries[i][j] = 0.25 * trace(&mul(&paulis[i], &image)).re;
            }
        }
        ProcessMatrix { entries, f_m_hz, t_f }
    }

    /// Process ρ ↦ K ρ K† for a (possibly non-unitary) 4×4 `k`.
    pub(crate) fn from_kraus(k: &Block, f_m_hz: f64, t_f: f64) -> Self {
        let kd = dagger(k);
        let outputs: [[Block; 4]; 4] = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut e = [[C0; 4]; 4];
                e[a][b] = C1;
                mul(&mul(k, &e), &kd)
            })
        });
        Self::from_outputs(&outputs, f_m_hz, t_f)
    }

    pub fn ideal(gate: GateKind) -> Self {
        Self::from_kraus(&ideal_unitary(gate), f64::NAN, f64::NAN)
    }

    /// Population left outside the computational subspace, averaged over inputs.
    pub fn leakage(&self) -> f64 {
        1.0 - self.entries[0][0]
    }

    /// ℰ(ρ) reconstructed from the transfer matrix.
    pub fn apply(&self, rho: &[[Complex64; 4]; 4]) -> [[Complex64; 4]; 4] {
        let paulis: Vec<Block> = (0..16).map(pauli2).collect();
        let coeff: Vec<f64> = paulis.iter().map(|p| 0.25 * trace(&mul(p, rho)).re).collect();
        let coeff_im: Vec<f64> = paulis.iter().map(|p| 0.25 * trace(&mul(p, rho)).im).collect();
        let mut out = [[C0; 4]; 4];
        for i in 0..16 {
            let (re, im): (f64, f64) = (0..16).fold((0.0, 0.0), |(s, t), j| {
                (s + self.entries[i][j] * coeff[j], t + self.entries[i][j] * coeff_im[j])
            });
            let w = Complex64::new(re, im);
            for r in 0..4 {
                for c in 0..4 {
                    out[r][c] += w * paulis[i][r][c];
                }
            }
        }
        out
    }

    /// Output populations for computational input state `q`.
    pub fn populations_from(&self, q: usize) -> [f64; 4] {
        let mut rho = [[C0; 4]; 4];
        rho[q][q] = C1;
        let out = self.apply(&rho);
        std::array::from_fn(|i| out[i][i].re)
    }

    /// |⟨00|ℰ(|00⟩⟨01|)|01⟩|: surviving coherence of the tunable qubit with
    /// the fixed qubit in |0⟩.
    pub fn transverse_t(&self) -> f64 {
        let mut rho = [[C0; 4]; 4];
        rho[0][1] = C1;
        self.apply(&rho)[0][1].norm()
    }

    /// Choi matrix Σ_ab |a⟩⟨b| ⊗ ℰ(|a⟩⟨b|), 16×16 row-major.
    pub fn choi(&self) -> Vec<Vec<Complex64>> {
        let mut m = vec![vec![C0; 16]; 16];
        for a in 0..4 {
            for b in 0..4 {
                let mut e = [[C0; 4]; 4];
                e[a][b] = C1;
                let img = self.apply(&e);
                for r in 0..4 {
                    for c in 0..4 {
                        m[4 * a + r][4 * b + c] = img[r][c];
                    }
                }
            }
        }
        m
    }
}

// Transfer matrix of exp(−iθZ/2): X → cos θ X + sin θ Y, Y → cos θ Y − sin θ X.
fn z_rotation(theta: f64) -> [[f64; 4]; 4] {
    let (s, c) = theta.sin_cos();
    [[1.0, 0.0, 0.0, 0.0], [0.0, c, -s, 0.0], [0.0, s, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

/// Fidelity (Tr[R_idealᵀ R_Z R] + d)/(d(d+1)) after local rotations
/// R_Z(θ_F) ⊗ R_Z(θ_T) applied to the output.
pub fn average_fidelity_at(process: &ProcessMatrix, ideal: GateKind, theta_f: f64, theta_t: f64) -> f64 {
    let c = overlap(process, ideal);
    fidelity_from_overlap(&c, theta_f, theta_t)
}

// C = R_ideal R^T, so that Tr[R_idealᵀ Z R] = Σ_ik Z_ik C_ik.
fn overlap(process: &ProcessMatrix, ideal: GateKind) -> [[f64; 16]; 16] {
    let a = ProcessMatrix::ideal(ideal).entries;
    let r = &process.entries;
    std::array::from_fn(|i| std::array::from_fn(|k| (0..16).map(|j| a[i][j] * r[k][j]).sum()))
}

fn fidelity_from_overlap(c: &[[f64; 16]; 16], theta_f: f64, theta_t: f64) -> f64 {
    let (zf, zt) = (z_rotation(theta_f), z_rotation(theta_t));
    let mut tr = 0.0;
    for i1 in 0..4 {
        for k1 in 0..4 {
            if zf[i1][k1] == 0.0 {
                continue;
            }
            for i2 in 0..4 {
                for k2 in 0..4 {
                    let z = zf[i1][k1] * zt[i2][k2];
                    if z != 0.0 {
                        tr += z * c[4 * i1 + i2][4 * k1 + k2];
                    }
                }
            }
        }
    }
    (tr + 4.0) / 20.0
}

/// Average gate fidelity against `ideal`; with `optimize`, maximized over
/// the output Z rotations by a grid search and Nelder–Mead polish.
pub fn average_fidelity(process: &ProcessMatrix, ideal: GateKind, optimize: bool) -> GateResult {
    let c = overlap(process, ideal);
    let f = |tf: f64, tt: f64| fidelity_from_overlap(&c, tf, tt);
    let (mut best, mut tf, mut tt) = (f(0.0, 0.0), 0.0, 0.0);
    if optimize {
        let step = TWO_PI / Z_GRID as f64;
        for i in 0..Z_GRID {
            for j in 0..Z_GRID {
                let v = f(i as f64 * step, j as f64 * step);
                if v > best {
                    (best, tf, tt) = (v, i as f64 * step, j as f64 * step);
                }
            }
        }
        let (x, v) = nelder_mead(|x: &[f64]| -f(x[0], x[1]), &[tf, tt], &[step, step], 1e-14, 400);
        if -v > best {
            best = -v;
            tf = x[0].rem_euclid(TWO_PI);
            tt = x[1].rem_euclid(TWO_PI);
        }
    }
    GateResult {
        fidelity: best.clamp(0.0, 1.0),
        theta_f: tf,
        theta_t: tt,
        f_m_opt: process.f_m_hz,
        t_f_opt: process.t_f,
        leakage: process.leakage(),
    }
}
