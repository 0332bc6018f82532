use crate::error::{Error, Result};

/// Strictly increasing, finite evaluation times starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        match points.first() {
            None => return Err(Error::BadGrid("grid is empty".into())),
            Some(&t0) if t0 != 0.0 => return Err(Error::BadGrid(format!("grid starts at {t0}, not 0"))),
            _ => {}
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::BadGrid("grid contains a non-finite time".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadGrid("grid is not strictly increasing".into()));
        }
        Ok(TimeGrid(points))
    }

    /// `0, step, 2·step, …` up to `horizon`; a final point at `horizon` is
    /// added when the horizon is not a multiple of the step.
    pub fn uniform(horizon: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::BadGrid(format!("step must be positive, got {step}")));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::BadGrid(format!("horizon must be non-negative, got {horizon}")));
        }
        let ratio = horizon / step;
        let n = (ratio + 1e-9).floor() as usize;
        let mut points: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let last = *points.last().unwrap();
        if (horizon - last).abs() <= 1e-9 * step {
            *points.last_mut().unwrap() = horizon;
        } else if horizon > last {
            points.push(horizon);
        }
        TimeGrid::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.0.last().expect("grid is non-empty")
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let idx = self.0.partition_point(|&x| x < t);
        if idx == 0 {
            0
        } else if idx == self.0.len() {
            idx - 1
        } else if (self.0[idx] - t) < (t - self.0[idx - 1]) {
            idx
        } else {
            idx - 1
        }
    }
}

impl std::ops::Deref for TimeGrid {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid() {
        let g = TimeGrid::uniform(50.0, 0.5).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g.last(), 50.0);
        assert_eq!(g[20], 10.0);
        assert_eq!(g.nearest_index(10.1), 20);

        let g = TimeGrid::uniform(1.0, 0.3).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.last(), 1.0);
        assert_eq!(TimeGrid::uniform(0.0, 0.1).unwrap().len(), 1);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![0.5, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(TimeGrid::uniform(1.0, 0.0).is_err());
        assert!(TimeGrid::uniform(-1.0, 0.1).is_err());
    }
}
