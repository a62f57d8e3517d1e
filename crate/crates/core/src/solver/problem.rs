use nalgebra::DMatrix;

use crate::dist::{JointDistribution, Marginals};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowKind {
    Sy { s: usize, y: usize },
    Sz { s: usize, z: usize },
}

/// One marginal equality `Σ q over cells = rhs`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub kind: RowKind,
    pub rhs: f64,
    pub cells: Vec<usize>,
}

/// The cells of one `(y, z)` fiber.
#[derive(Debug, Clone)]
pub(crate) struct Fiber {
    pub y: usize,
    pub z: usize,
    pub cells: Vec<usize>,
}

/// Index structure of the coupling program for a fixed `p`.
///
/// Cells are the admissible triples (`p_{s,y,*} > 0` and `p_{s,*,z} > 0`);
/// every other triple is forced to zero by the marginals. Rows are all
/// marginal equalities with positive right-hand side. Within one `s` the
/// admissible cells form a complete bipartite `Y_s × Z_s` grid, so dropping
/// the last `(s, z)` row of every `s` leaves a full-rank system (`reduced`).
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub shape: [usize; 3],
    pub marg: Marginals,
    /// Dense index of each admissible cell.
    pub dense: Vec<usize>,
    pub coords: Vec<(usize, usize, usize)>,
    pub fiber_of: Vec<usize>,
    pub fibers: Vec<Fiber>,
    pub rows: Vec<Row>,
    pub reduced: Vec<usize>,
}

impl Problem {
    pub fn new(p: &JointDistribution) -> Problem {
        let shape = p.shape();
        let [ns, ny, nz] = shape;
        let marg = Marginals::of(p);
        let mut dense = Vec::new();
        let mut coords = Vec::new();
        let mut cell_at = vec![usize::MAX; ns * ny * nz];
        for (s, y, z) in p.cells() {
            if marg.sy(s, y) > 0.0 && marg.sz(s, z) > 0.0 {
                let k = p.index(s, y, z);
                cell_at[k] = dense.len();
                dense.push(k);
                coords.push((s, y, z));
            }
        }

        let mut fibers = Vec::new();
        let mut fiber_of = vec![0; dense.len()];
        for y in 0..ny {
            for z in 0..nz {
                let cells: Vec<usize> = (0..ns)
                    .map(|s| cell_at[p.index(s, y, z)])
                    .filter(|&c| c != usize::MAX)
                    .collect();
                if !cells.is_empty() {
                    for &c in &cells {
                        fiber_of[c] = fibers.len();
                    }
                    fibers.push(Fiber { y, z, cells });
                }
            }
        }

        let mut rows = Vec::new();
        let mut reduced = Vec::new();
        for s in 0..ns {
            for y in 0..ny {
                if marg.sy(s, y) > 0.0 {
                    let cells = (0..nz)
                        .map(|z| cell_at[p.index(s, y, z)])
                        .filter(|&c| c != usize::MAX)
                        .collect();
                    reduced.push(rows.len());
                    rows.push(Row {
                        kind: RowKind::Sy { s, y },
                        rhs: marg.sy(s, y),
                        cells,
                    });
                }
            }
            let zs: Vec<usize> = (0..nz).filter(|&z| marg.sz(s, z) > 0.0).collect();
            for (i, &z) in zs.iter().enumerate() {
                let cells = (0..ny)
                    .map(|y| cell_at[p.index(s, y, z)])
                    .filter(|&c| c != usize::MAX)
                    .collect();
                if i + 1 < zs.len() {
                    reduced.push(rows.len());
                }
                rows.push(Row {
                    kind: RowKind::Sz { s, z },
                    rhs: marg.sz(s, z),
                    cells,
                });
            }
        }

        Problem {
            shape,
            marg,
            dense,
            coords,
            fiber_of,
            fibers,
            rows,
            reduced,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.dense.len()
    }

    /// Dense constraint matrix for the given rows.
    pub fn matrix(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(rows.len(), self.n_cells());
        for (i, &r) in rows.iter().enumerate() {
            for &c in &self.rows[r].cells {
                a[(i, c)] = 1.0;
            }
        }
        a
    }

    /// Removes from the row multipliers their component along the per-`s`
    /// gauge (`+c` on every `(s,y)` row, `-c` on every `(s,z)` row), which
    /// leaves every pair sum unchanged.
    pub fn balance_gauge(&self, x: &mut [f64]) {
        let ns = self.shape[0];
        let mut shift = vec![0.0; ns];
        let mut count = vec![0usize; ns];
        for (row, &v) in self.rows.iter().zip(x.iter()) {
            match row.kind {
                RowKind::Sy { s, .. } => {
                    shift[s] += v;
                    count[s] += 1;
                }
                RowKind::Sz { s, .. } => {
                    shift[s] -= v;
                    count[s] += 1;
                }
            }
        }
        for (c, n) in shift.iter_mut().zip(&count) {
            if *n > 0 {
                *c /= *n as f64;
            }
        }
        for (row, v) in self.rows.iter().zip(x.iter_mut()) {
            match row.kind {
                RowKind::Sy { s, .. } => *v -= shift[s],
                RowKind::Sz { s, .. } => *v += shift[s],
            }
        }
    }

    pub fn fiber_mass(&self, q: &[f64]) -> Vec<f64> {
        self.fibers
            .iter()
            .map(|f| f.cells.iter().map(|&c| q[c]).sum())
            .collect()
    }

    /// `q⁰_{s,y,z} = p_{s,y,*} p_{s,*,z} / p_{s,*,*}`, strictly positive on
    /// every admissible cell and feasible.
    pub fn start(&self) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&(s, y, z)| self.marg.sy(s, y) * self.marg.sz(s, z) / self.marg.s[s])
            .collect()
    }

    /// `-h(q) = Σ q ln(q / q_{*,y,z})` over admissible cells.
    pub fn neg_entropy(&self, q: &[f64]) -> f64 {
        let mass = self.fiber_mass(q);
        self.fibers
            .iter()
            .zip(&mass)
            .map(|(f, &qf)| {
                f.cells
                    .iter()
                    .filter(|&&c| q[c] > 0.0)
                    .map(|&c| q[c] * (q[c] / qf).ln())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Embeds admissible-cell values into a dense table.
    pub fn to_dense(&self, q: &[f64]) -> Vec<f64> {
        let [ns, ny, nz] = self.shape;
        let mut out = vec![0.0; ns * ny * nz];
        for (c, &k) in self.dense.iter().enumerate() {
            out[k] = q[c];
        }
        out
    }

    #[cfg(test)]
    pub fn primal_residual(&self, q: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.cells.iter().map(|&c| q[c]).sum::<f64>() - r.rhs).abs())
            .fold(0.0, f64::max)
    }
}
