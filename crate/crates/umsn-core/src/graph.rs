//! SNR-weighted communication graph, normalized Laplacian, and algebraic
//! connectivity.
//!
//! Link gains are received SNRs in dB, zeroed below the modem detection
//! threshold, and the Laplacian is normalized by the ideal SNR so its
//! spectrum stays bounded. Team sizes are single-digit, so eigenvalues come
//! from a dense symmetric solver.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // f64 math methods; unused when tests link std
use num_traits::Float;

/// Tolerance below which the second Laplacian eigenvalue counts as zero
/// (disconnected graph).
pub const CONNECTIVITY_EPS: f64 = 1e-9;

/// Errors from graph operations.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    /// Gain or Laplacian matrix is not square or is too small.
    BadDimensions,
    /// Matrix is not symmetric.
    Asymmetric,
    /// An off-diagonal gain is negative or a diagonal gain is nonzero.
    InvalidGains,
    /// Laplacian rows do not sum to zero.
    NonZeroRowSum,
}

impl core::fmt::Display for GraphError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GraphError::BadDimensions => write!(f, "matrix must be square with n >= 2"),
            GraphError::Asymmetric => write!(f, "matrix must be symmetric"),
            GraphError::InvalidGains => {
                write!(f, "gains must be nonnegative with a zero diagonal")
            }
            GraphError::NonZeroRowSum => write!(f, "laplacian rows must sum to zero"),
        }
    }
}

impl core::error::Error for GraphError {}

/// Pass an SNR through the modem detection threshold: the gain of a link
/// is the SNR itself when detectable, zero otherwise.
pub fn link_gain(snr_db: f64, detection_threshold_db: f64) -> f64 {
    if snr_db >= detection_threshold_db {
        snr_db
    } else {
        0.0
    }
}

/// Undirected communication graph with SNR-derived link gains.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    gains: DMatrix<f64>,
    ideal_snr_db: f64,
}

impl CommGraph {
    /// Empty graph (no links) over `n` nodes.
    pub fn new(n: usize, ideal_snr_db: f64) -> Self {
        Self {
            gains: DMatrix::zeros(n, n),
            ideal_snr_db,
        }
    }

    /// Build from an explicit gain matrix, validating symmetry, sign, and
    /// a zero diagonal.
    pub fn from_gains(gains: DMatrix<f64>, ideal_snr_db: f64) -> Result<Self, GraphError> {
        if !gains.is_square() {
            return Err(GraphError::BadDimensions);
        }
        let n = gains.nrows();
        for i in 0..n {
            if gains[(i, i)] != 0.0 {
                return Err(GraphError::InvalidGains);
            }
            for j in 0..n {
                if gains[(i, j)] < 0.0 {
                    return Err(GraphError::InvalidGains);
                }
                if gains[(i, j)] != gains[(j, i)] {
                    return Err(GraphError::Asymmetric);
                }
            }
        }
        Ok(Self {
            gains,
            ideal_snr_db,
        })
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.gains.nrows()
    }

    /// Normalization constant (ideal SNR, dB).
    pub fn ideal_snr_db(&self) -> f64 {
        self.ideal_snr_db
    }

    /// Gain of the `i`-`j` link (0 when absent).
    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gains[(i, j)]
    }

    /// Set the gain of an (undirected) link. Self-loops are ignored.
    pub fn set_gain(&mut self, i: usize, j: usize, gain: f64) {
        if i == j {
            return;
        }
        let g = gain.max(0.0);
        self.gains[(i, j)] = g;
        self.gains[(j, i)] = g;
    }

    /// Nodes with a live link to `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&j| j != i && self.gains[(i, j)] > 0.0)
            .collect()
    }

    /// Normalized weighted Laplacian: off-diagonal `-gain/ideal`, diagonal
    /// the sum of the row's normalized gains, so every row sums to zero.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut degree = 0.0;
            for j in 0..n {
                if j != i {
                    let w = self.gains[(i, j)] / self.ideal_snr_db;
                    l[(i, j)] = -w;
                    degree += w;
                }
            }
            l[(i, i)] = degree;
        }
        l
    }
}

/// Second-smallest eigenvalue of a Laplacian (the algebraic connectivity,
/// or Fiedler value). Zero iff the graph is disconnected.
///
/// The input must be a symmetric matrix with zero row sums, `n >= 2`.
pub fn fiedler(laplacian: &DMatrix<f64>) -> Result<f64, GraphError> {
    let n = laplacian.nrows();
    if !laplacian.is_square() || n < 2 {
        return Err(GraphError::BadDimensions);
    }
    let scale = laplacian.amax().max(1.0);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if (laplacian[(i, j)] - laplacian[(j, i)]).abs() > 1e-9 * scale {
                return Err(GraphError::Asymmetric);
            }
            row_sum += laplacian[(i, j)];
        }
        if row_sum.abs() > 1e-9 * scale.max(1.0) * n as f64 {
            return Err(GraphError::NonZeroRowSum);
        }
    }

    let mut eigenvalues: Vec<f64> = laplacian
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("symmetric eigenvalues are finite"));
    let sigma2 = eigenvalues[1];
    // Clamp the tiny negatives a dense solver can produce for PSD input.
    Ok(sigma2.max(0.0))
}
