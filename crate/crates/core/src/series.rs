use serde::{Deserialize, Serialize};

/// A step-indexed input series. Reads past the end return the last value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SeriesRepr", into = "SeriesRepr")]
pub struct StepSeries(Vec<f64>);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SeriesRepr {
    Scalar(f64),
    Steps(Vec<f64>),
}

impl From<SeriesRepr> for StepSeries {
    fn from(r: SeriesRepr) -> Self {
        match r {
            SeriesRepr::Scalar(v) => StepSeries(vec![v]),
            SeriesRepr::Steps(v) => StepSeries(v),
        }
    }
}

impl From<StepSeries> for SeriesRepr {
    fn from(s: StepSeries) -> Self {
        if s.0.len() == 1 {
            SeriesRepr::Scalar(s.0[0])
        } else {
            SeriesRepr::Steps(s.0)
        }
    }
}

impl StepSeries {
    pub fn constant(v: f64) -> Self {
        StepSeries(vec![v])
    }

    pub fn from_steps(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "step series needs at least one value");
        StepSeries(values)
    }

    /// Piecewise-constant profile from `(first_step, value)` breakpoints.
    pub fn piecewise(breaks: &[(usize, f64)]) -> Self {
        assert!(!breaks.is_empty() && breaks[0].0 == 0, "first breakpoint must start at step 0");
        let last = breaks.last().unwrap().0;
        let mut out = Vec::with_capacity(last + 1);
        for w in breaks.windows(2) {
            out.extend(std::iter::repeat(w[0].1).take(w[1].0 - w[0].0));
        }
        out.push(breaks.last().unwrap().1);
        StepSeries(out)
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        match self.0.get(k) {
            Some(v) => *v,
            None => *self.0.last().expect("non-empty series"),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    /// True when every step in `from..=to` reads the same value.
    pub fn is_constant_over(&self, from: usize, to: usize) -> bool {
        if from >= self.0.len() {
            return true;
        }
        let v = self.at(from);
        (from..=to.min(self.0.len())).all(|k| self.at(k) == v)
    }

    /// Minimum over the defined range (the extension repeats the last value).
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Resample onto a different step length, reading each new step at its start time.
    pub fn resample(&self, old_dt: f64, new_dt: f64, steps: usize) -> Self {
        if self.0.len() == 1 {
            return self.clone();
        }
        let n = steps.max(1);
        StepSeries(
            (0..n)
                .map(|k| self.at(((k as f64 * new_dt) / old_dt + 1e-9).floor() as usize))
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        StepSeries(self.0.iter().map(|v| f(*v)).collect())
    }
}

/// Block averaging: every `window` consecutive values are replaced by their mean.
pub fn block_average(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let mut out = Vec::with_capacity(values.len());
    for chunk in values.chunks(window) {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        out.extend(std::iter::repeat(mean).take(chunk.len()));
    }
    out
}
