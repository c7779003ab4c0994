//! Banded matrices with an LU factorization (partial pivoting).
//!
//! All discrete operators on the grid have bandwidth at most one grid line,
//! so factoring and solving in band form keeps implicit Euler steps at
//! O(n·b) per solve instead of O(n²).

use nalgebra::DVector;

use goed_core::{Error, Result};

/// Square banded matrix with `bl` sub- and `bu` super-diagonals, stored as
/// (diagonal offset, row) with zero padding outside the band.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bl: usize,
    bu: usize,
    /// data[(offset + bl) * n + i] = entry (i, i + offset), offset in [-bl, bu]
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bl: usize, bu: usize) -> Self {
        BandedMatrix {
            n,
            bl,
            bu,
            data: vec![0.0; (bl + bu + 1) * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.bl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.bu
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize;
        if off < -(self.bl as isize) || off > self.bu as isize {
            return None;
        }
        Some(((off + self.bl as isize) as usize) * self.n + i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[s] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[s] += value;
    }

    /// `y = A v`.
    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.n);
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bl);
            let hi = (i + self.bu).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.get(i, j) * v[j];
            }
            y[i] = s;
        }
        y
    }

    /// `Aᵀ` as a banded matrix (bandwidths swapped).
    pub fn transposed(&self) -> BandedMatrix {
        let mut t = BandedMatrix::zeros(self.n, self.bu, self.bl);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bl);
            let hi = (i + self.bu).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j);
                if v != 0.0 {
                    t.set(j, i, v);
                }
            }
        }
        t
    }

    /// Largest absolute deviation from symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let hi = (i + self.bu.max(self.bl)).min(self.n - 1);
            for j in (i + 1)..=hi {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// LU factorization of a banded matrix with partial pivoting
/// (band storage with `bl` extra super-diagonals for pivot fill-in).
pub struct BandedLu {
    n: usize,
    bl: usize,
    /// upper bandwidth including fill: bu + bl
    buf: usize,
    /// row-major padded band: lu[i * (bl + buf + 1) + (j - i + bl)]
    lu: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let n = a.dim();
        let bl = a.lower_bandwidth();
        let buf = a.upper_bandwidth() + bl;
        let width = bl + buf + 1;
        let mut lu = vec![0.0f64; n * width];
        let at = |i: usize, j: usize| -> usize { i * width + (j + bl - i) };
        for i in 0..n {
            let lo = i.saturating_sub(bl);
            let hi = (i + a.upper_bandwidth()).min(n - 1);
            for j in lo..=hi {
                lu[at(i, j)] = a.get(i, j);
            }
        }
        let mut ipiv = vec![0usize; n];
        let mut scale = 0.0f64;
        for v in &lu {
            scale = scale.max(v.abs());
        }
        if scale == 0.0 {
            return Err(Error::SingularSystem("banded LU of zero matrix".into()));
        }
        for k in 0..n {
            // pivot search within band reach
            let reach = (k + bl).min(n - 1);
            let mut p = k;
            let mut best = lu[at(k, k)].abs();
            for i in (k + 1)..=reach {
                let v = lu[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::SingularSystem(format!(
                    "banded LU pivot breakdown at column {k}"
                )));
            }
            ipiv[k] = p;
            if p != k {
                let hij = (k + buf).min(n - 1);
                for j in k..=hij {
                    lu.swap(at(k, j), at(p, j));
                }
            }
            let pivot = lu[at(k, k)];
            for i in (k + 1)..=reach {
                let m = lu[at(i, k)] / pivot;
                lu[at(i, k)] = m;
                if m != 0.0 {
                    let hij = (k + buf).min(n - 1);
                    for j in (k + 1)..=hij {
                        lu[at(i, j)] -= m * lu[at(k, j)];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            bl,
            buf,
            lu,
            ipiv,
        })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.bl + self.buf + 1) + (j + self.bl - i)
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.clone();
        for k in 0..self.n {
            x.swap_rows(k, self.ipiv[k]);
            let reach = (k + self.bl).min(self.n - 1);
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=reach {
                    x[i] -= self.lu[self.at(i, k)] * xk;
                }
            }
        }
        for k in (0..self.n).rev() {
            let hij = (k + self.buf).min(self.n - 1);
            let mut s = x[k];
            for j in (k + 1)..=hij {
                s -= self.lu[self.at(k, j)] * x[j];
            }
            x[k] = s / self.lu[self.at(k, k)];
        }
        x
    }
}
