//! Diffusion–decay–secretion field on the voxel lattice, relaxed by Jacobi
//! sweeps towards the steady state
//!
//! `D ∇²u − (λ + k·[consumer]) u + s·[source] = 0`
//!
//! with zero-flux walls. The 7-point discretisation gives the update
//! `u ← (D Σ u_nb + s) / (n_nb D + λ + k)`.

use crate::num::Real;

/// Role a voxel plays in the oxygen balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoxelRole {
    #[default]
    Inert,
    Source,
    Consumer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OxygenParams<T> {
    /// voxel²/step
    pub diffusion: T,
    /// 1/step
    pub decay: T,
    /// concentration/step per source voxel
    pub secretion: T,
    /// 1/step, applied on consumer voxels
    pub uptake: T,
}

/// Scalar field over a `dims[0] × dims[1] × dims[2]` lattice, row-major
/// (`z` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct OxygenField<T> {
    dims: [usize; 3],
    values: Vec<T>,
}

impl<T: Real> OxygenField<T> {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            values: vec![T::zero(); dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_values(dims: [usize; 3], values: Vec<T>) -> Option<Self> {
        (values.len() == dims[0] * dims[1] * dims[2]).then_some(Self { dims, values })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    #[inline]
    pub fn at(&self, voxel: [usize; 3]) -> T {
        self.values[self.index(voxel)]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Per-voxel update coefficients for fixed roles.
    fn stencil(&self, roles: &[VoxelRole], params: &OxygenParams<T>) -> Stencil<T> {
        assert_eq!(roles.len(), self.values.len(), "role mask does not match lattice");
        let [nx, ny, nz] = self.dims;
        let mut a = vec![T::zero(); self.values.len()];
        let mut b = vec![T::zero(); self.values.len()];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let i = self.index([x, y, z]);
                    let n = [x > 0, x + 1 < nx, y > 0, y + 1 < ny, z > 0, z + 1 < nz]
                        .iter()
                        .filter(|&&v| v)
                        .count();
                    let (source, sink) = match roles[i] {
                        VoxelRole::Inert => (T::zero(), T::zero()),
                        VoxelRole::Source => (params.secretion, T::zero()),
                        VoxelRole::Consumer => (T::zero(), params.uptake),
                    };
                    let denom = T::lit(n as f64) * params.diffusion + params.decay + sink;
                    if denom > T::zero() {
                        a[i] = params.diffusion / denom;
                        b[i] = source / denom;
                    }
                }
            }
        }
        let frozen = a.iter().zip(&b).map(|(&a, &b)| a == T::zero() && b == T::zero()).collect();
        Stencil { a, b, frozen }
    }

    /// One pass over the lattice. Reads from `src` and writes to `dst`;
    /// with `omega` set, updates `dst` in place by over-relaxation and
    /// ignores `src`.
    fn sweep(&self, st: &Stencil<T>, src: &[T], dst: &mut [T], omega: Option<T>) -> T {
        let [nx, ny, nz] = self.dims;
        let (sy, sx) = (nz, ny * nz);
        let mut delta = T::zero();
        for x in 0..nx {
            for y in 0..ny {
                let row = x * sx + y * sy;
                let nbrs = [
                    (x > 0).then(|| row - sx),
                    (x + 1 < nx).then(|| row + sx),
                    (y > 0).then(|| row - sy),
                    (y + 1 < ny).then(|| row + sy),
                ];
                for z in 0..nz {
                    let i = row + z;
                    if st.frozen[i] {
                        if omega.is_none() {
                            dst[i] = src[i];
                        }
                        continue;
                    }
                    let u: &[T] = if omega.is_some() { dst } else { src };
                    let mut sum = T::zero();
                    for r in nbrs.iter().flatten() {
                        sum = sum + u[r + z];
                    }
                    if z > 0 {
                        sum = sum + u[i - 1];
                    }
                    if z + 1 < nz {
                        sum = sum + u[i + 1];
                    }
                    let target = st.a[i] * sum + st.b[i];
                    let value = match omega {
                        Some(w) => u[i] + w * (target - u[i]),
                        None => target,
                    };
                    delta = delta.max((value - u[i]).abs());
                    dst[i] = value;
                }
            }
        }
        delta
    }

    /// Run `sweeps` Jacobi iterations. Returns the largest absolute change in
    /// the final sweep.
    pub fn relax(&mut self, roles: &[VoxelRole], params: &OxygenParams<T>, sweeps: usize) -> T {
        let st = self.stencil(roles, params);
        let mut next = vec![T::zero(); self.values.len()];
        let mut delta = T::zero();
        for _ in 0..sweeps {
            delta = self.sweep(&st, &self.values, &mut next, None);
            std::mem::swap(&mut self.values, &mut next);
        }
        delta
    }

    /// Solve for the steady state by successive over-relaxation until the
    /// largest change in a sweep drops below `tol` or `max_sweeps` is
    /// reached. Returns the number of sweeps performed.
    pub fn solve_steady(
        &mut self,
        roles: &[VoxelRole],
        params: &OxygenParams<T>,
        tol: T,
        max_sweeps: usize,
    ) -> usize {
        let st = self.stencil(roles, params);
        let omega = Some(T::lit(SOR_OMEGA));
        let mut values = std::mem::take(&mut self.values);
        let mut done = 0;
        while done < max_sweeps {
            let delta = self.sweep(&st, &[], &mut values, omega);
            done += 1;
            if delta < tol {
                break;
            }
        }
        self.values = values;
        done
    }
}

const SOR_OMEGA: f64 = 1.9;

struct Stencil<T> {
    a: Vec<T>,
    b: Vec<T>,
    frozen: Vec<bool>,
}
