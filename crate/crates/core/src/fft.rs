//! Unitary M-point DFT with an instrumented transform counter.
//!
//! `forward` applies `F_M` and `inverse` applies `F_M^H`, both normalized by
//! `1/sqrt(M)`. Every call bumps a counter so the per-iteration transform
//! budget of the equalizers can be asserted in tests. A `UnitaryDft` is meant
//! to be owned by a single worker; it is `Send` but not `Sync`.

use std::cell::{Cell, RefCell};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct UnitaryDft {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
    scratch: RefCell<Vec<Complex64>>,
    count: Cell<usize>,
}

impl std::fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryDft")
            .field("len", &self.len)
            .field("count", &self.count.get())
            .finish()
    }
}

impl UnitaryDft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DFT length must be positive");
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            len,
            fwd,
            inv,
            scale: 1.0 / (len as f64).sqrt(),
            scratch: RefCell::new(vec![Complex64::new(0.0, 0.0); scratch_len]),
            count: Cell::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `buf <- F_M buf`
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.apply(&*self.fwd, buf);
    }

    /// `buf <- F_M^H buf`
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.apply(&*self.inv, buf);
    }

    fn apply(&self, plan: &dyn Fft<f64>, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "DFT buffer length");
        let mut scratch = self.scratch.borrow_mut();
        plan.process_with_scratch(buf, &mut scratch);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
        self.count.set(self.count.get() + 1);
    }

    /// Number of transforms applied since construction or the last reset.
    pub fn count(&self) -> usize {
        self.count.get()
    }

    pub fn reset_count(&self) {
        self.count.set(0);
    }
}
