use super::{identity, sigma_x, sigma_y, sigma_z, CMatrix};
use crate::error::{QfpmeError, Result};

/// Default cap on the Hilbert-space dimension (four qubits). Dense
/// superoperators scale as `R⁴`.
pub const MAX_HILBERT_DIM: usize = 16;

/// Pauli operators embedded on each site of an `L`-qubit register, plus the
/// collective sums `S_q = Σ_i σ_i^q`. Site 0 is the leftmost tensor factor.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sites: Vec<[CMatrix; 3]>,
    pub collective: [CMatrix; 3],
}

impl SpinOperators {
    pub fn qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.sites.len()
    }

    pub fn x(&self, site: usize) -> &CMatrix {
        &self.sites[site][0]
    }

    pub fn y(&self, site: usize) -> &CMatrix {
        &self.sites[site][1]
    }

    pub fn z(&self, site: usize) -> &CMatrix {
        &self.sites[site][2]
    }
}

pub fn spin_operators(qubits: usize) -> Result<SpinOperators> {
    spin_operators_with_limit(qubits, MAX_HILBERT_DIM)
}

pub fn spin_operators_with_limit(qubits: usize, max_dim: usize) -> Result<SpinOperators> {
    if qubits == 0 {
        return Err(QfpmeError::InvalidParameter(
            "qubit count must be at least 1".into(),
        ));
    }
    if qubits >= usize::BITS as usize - 1 || (1usize << qubits) > max_dim {
        return Err(QfpmeError::TooLarge {
            dim: 1usize.checked_shl(qubits as u32).unwrap_or(usize::MAX),
            limit: max_dim,
        });
    }
    let dim = 1usize << qubits;
    let paulis = [sigma_x(), sigma_y(), sigma_z()];
    let embed = |site: usize, op: &CMatrix| -> CMatrix {
        let left = identity(1 << site);
        let right = identity(1 << (qubits - site - 1));
        left.kronecker(op).kronecker(&right)
    };
    let sites: Vec<[CMatrix; 3]> = (0..qubits)
        .map(|j| {
            [
                embed(j, &paulis[0]),
                embed(j, &paulis[1]),
                embed(j, &paulis[2]),
            ]
        })
        .collect();
    let mut collective = [
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
    ];
    for site in &sites {
        for q in 0..3 {
            collective[q] += &site[q];
        }
    }
    Ok(SpinOperators { sites, collective })
}
