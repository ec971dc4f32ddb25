use crate::netmodel::Network;
use nalgebra::DMatrix;

/// Node-edge incidence matrix N (|ℬ|×|𝒦|). Column k has +1 at o(k) and −1 at d(k).
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n_buses: usize,
    ends: Vec<(usize, usize)>,
}

impl IncidenceMatrix {
    pub fn new(net: &Network) -> Self {
        IncidenceMatrix {
            n_buses: net.n_buses(),
            ends: net.lines().iter().map(|l| (l.from, l.to)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.n_buses
    }
    pub fn cols(&self) -> usize {
        self.ends.len()
    }

    pub fn get(&self, bus: usize, line: usize) -> i8 {
        let (o, d) = self.ends[line];
        if bus == o {
            1
        } else if bus == d {
            -1
        } else {
            0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_buses, self.ends.len());
        for (k, &(o, d)) in self.ends.iter().enumerate() {
            m[(o, k)] = 1.0;
            m[(d, k)] = -1.0;
        }
        m
    }

    /// N x for a vector of line values.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_buses];
        for (k, &(o, d)) in self.ends.iter().enumerate() {
            out[o] += x[k];
            out[d] -= x[k];
        }
        out
    }

    pub fn rank(&self) -> usize {
        if self.ends.is_empty() {
            return 0;
        }
        self.to_dense().rank(1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::random::{random_network, RandomSpec};

    #[test]
    fn structure_on_random_graphs() {
        for seed in 0..20 {
            let n = 2 + seed as usize % 10;
            let net = random_network(&RandomSpec::default(), n, seed);
            let inc = IncidenceMatrix::new(&net);
            let m = inc.to_dense();
            for k in 0..inc.cols() {
                let col = m.column(k);
                assert_eq!(col.iter().filter(|&&x| x == 1.0).count(), 1);
                assert_eq!(col.iter().filter(|&&x| x == -1.0).count(), 1);
            }
            assert_eq!(inc.rank(), n - 1);
            // any row is the negative sum of the others
            let total = m.row_sum();
            assert!(total.iter().all(|&x| x == 0.0));
        }
    }
}
