use super::LinkParams;

/// One link's parameters plus its cumulative-curve history.
///
/// Index `k` is the state at time `k * dt`; index 0 is the empty initial
/// state and negative indices read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkRecord {
    pub params: LinkParams,
    pub cum_in: Vec<f64>,
    pub cum_queue: Vec<f64>,
    pub cum_out: Vec<f64>,
    pub queue_length: Vec<f64>,
    pub queue_density: Vec<f64>,
}

impl LinkRecord {
    pub fn new(params: LinkParams) -> Self {
        Self::with_capacity(params, 0)
    }

    pub fn with_capacity(params: LinkParams, steps: usize) -> Self {
        let mut r = LinkRecord {
            params,
            cum_in: Vec::with_capacity(steps + 1),
            cum_queue: Vec::with_capacity(steps + 1),
            cum_out: Vec::with_capacity(steps + 1),
            queue_length: Vec::with_capacity(steps + 1),
            queue_density: Vec::with_capacity(steps + 1),
        };
        r.cum_in.push(0.0);
        r.cum_out.push(0.0);
        r
    }

    /// Latest step with known inflow and outflow.
    #[inline]
    pub fn step(&self) -> usize {
        self.cum_in.len() - 1
    }

    #[inline]
    pub fn n_in(&self, k: i64) -> f64 {
        read(&self.cum_in, k)
    }

    #[inline]
    pub fn n_out(&self, k: i64) -> f64 {
        read(&self.cum_out, k)
    }

    #[inline]
    pub fn n_queue(&self, k: i64) -> f64 {
        read(&self.cum_queue, k)
    }

    /// Vehicles currently on the link.
    pub fn occupancy(&self) -> f64 {
        self.cum_in.last().unwrap() - self.cum_out.last().unwrap()
    }
}

#[inline]
pub(crate) fn read(series: &[f64], k: i64) -> f64 {
    if k < 0 {
        0.0
    } else {
        series[k as usize]
    }
}
