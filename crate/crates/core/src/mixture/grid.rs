use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::distance::trapezoid;
use crate::error::{Error, Result};

/// Accepted trapezoidal mass before renormalization in [`tabulate_density`].
pub const TABULATE_MASS_TOL: f64 = 0.01;
/// Accepted trapezoidal mass for an explicitly constructed grid.
pub const GRID_MASS_TOL: f64 = 1e-3;

/// A probability density sampled at `lo, lo + step, …, hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    raw_mass: f64,
}

impl DensityGrid {
    /// Wraps already-normalized samples. The trapezoidal mass must be within
    /// `GRID_MASS_TOL` of one.
    pub fn new(lo: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        validate_samples(lo, step, &values)?;
        let mass = trapezoid(&values, step);
        if (mass - 1.0).abs() > GRID_MASS_TOL {
            return Err(Error::GridMassOutOfRange(mass));
        }
        Ok(Self { lo, step, values, raw_mass: mass })
    }

    fn normalized(lo: f64, step: f64, mut values: Vec<f64>, mass_tol: f64) -> Result<Self> {
        validate_samples(lo, step, &values)?;
        let mass = trapezoid(&values, step);
        if !((mass - 1.0).abs() <= mass_tol) {
            return Err(Error::GridMassOutOfRange(mass));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { lo, step, values, raw_mass: mass })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoidal mass of the samples before renormalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.step)
    }

    pub fn mean(&self) -> f64 {
        let w: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| self.x(i) * v).collect();
        trapezoid(&w, self.step) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let w: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| (self.x(i) - mean).powi(2) * v).collect();
        trapezoid(&w, self.step) / self.mass()
    }

    pub fn same_grid(&self, other: &DensityGrid) -> bool {
        self.values.len() == other.values.len()
            && (self.step - other.step).abs() <= 1e-12 * self.step
            && (self.lo - other.lo).abs() <= 1e-9 * self.step
    }
}

fn validate_samples(lo: f64, step: f64, values: &[f64]) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() || !lo.is_finite() {
        return Err(Error::invalid("grid needs finite lo and positive step"));
    }
    if values.len() < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!("density value {v} is not finite and nonnegative")));
    }
    Ok(())
}

/// Samples `density` on `[lo, hi]` and renormalizes by the trapezoidal
/// mass, which must already be within 1% of one.
pub fn tabulate_density(density: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Result<DensityGrid> {
    if !(step > 0.0) || !(lo < hi) {
        return Err(Error::invalid(format!("bad grid [{lo}, {hi}] with step {step}")));
    }
    let intervals = ((hi - lo) / step).round() as usize;
    let values = (0..=intervals).map(|i| density(lo + i as f64 * step)).collect();
    DensityGrid::normalized(lo, step, values, TABULATE_MASS_TOL)
}

/// Density of the sum of two independent variables.
///
/// The output covers `[lo_f + lo_g, hi_f + hi_g]`; the discrete convolution
/// is evaluated by FFT, scaled by the step and renormalized.
pub fn convolve(f: &DensityGrid, g: &DensityGrid) -> Result<DensityGrid> {
    if (f.step - g.step).abs() > 1e-12 * f.step {
        return Err(Error::GridMismatch);
    }
    let out_len = f.len() + g.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    let spectrum = |values: &[f64], fft: &Arc<dyn rustfft::Fft<f64>>| {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        buf
    };
    let a = spectrum(&f.values, &forward);
    let b = spectrum(&g.values, &forward);
    let mut prod: Vec<Complex<f64>> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    inverse.process(&mut prod);

    let scale = f.step / size as f64;
    // roundoff leaves tiny negative values where the true density vanishes
    let values: Vec<f64> = prod[..out_len].iter().map(|c| (c.re * scale).max(0.0)).collect();
    DensityGrid::normalized(f.lo + g.lo, f.step, values, TABULATE_MASS_TOL)
}
