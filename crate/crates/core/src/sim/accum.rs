/// Neumaier-compensated running sum. Queue and work ledgers use it so the
/// conservation identity holds well below 1e-9 over long runs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    pub fn new(x: f64) -> Self {
        Accum { sum: x, comp: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
