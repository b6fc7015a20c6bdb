//! Compensated accumulation in a fixed order.
//!
//! Every reduction in the crate goes through these accumulators so that a
//! result depends only on the order of its inputs, never on thread timing.

use num_complex::Complex64;

#[inline]
fn neumaier_add(sum: &mut f64, c: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *c += (*sum - t) + v;
    } else {
        *c += (v - t) + *sum;
    }
    *sum = t;
}

/// Neumaier accumulator for `f64`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        neumaier_add(&mut self.sum, &mut self.c, v);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Neumaier accumulator for complex values, compensated per component.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexNeumaier {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexNeumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: Complex64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn sum_f64<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Neumaier::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn sum_complex<I: IntoIterator<Item = Complex64>>(values: I) -> Complex64 {
    let mut acc = ComplexNeumaier::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
