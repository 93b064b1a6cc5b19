use serde::Serialize;

use super::domain::check_weights;
use super::ConvexError;

/// A piecewise-linear path `f : [t_start, 0] -> R^d`, stored as its values at
/// evenly spaced parameters. Rescaling every path onto `[-1, 0]` makes the
/// waypoint index the shared parameter, so pointwise mixing is just mixing
/// waypoints with matching index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub t_start: f64,
    pub waypoints: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(t_start: f64, waypoints: Vec<Vec<f64>>) -> Result<Self, ConvexError> {
        if !t_start.is_finite() || t_start > 0.0 {
            return Err(ConvexError::Carrier(format!("path start time {t_start} is not <= 0")));
        }
        let d = waypoints.first().map_or(0, Vec::len);
        if waypoints.len() < 2 || waypoints.iter().any(|w| w.len() != d || w.iter().any(|x| !x.is_finite())) {
            return Err(ConvexError::Carrier("waypoints must be >= 2 finite points of one dimension".into()));
        }
        Ok(Self { t_start, waypoints })
    }

    /// Straight segment from `a` to `b` sampled at `k` waypoints.
    pub fn linear(t_start: f64, a: &[f64], b: &[f64], k: usize) -> Result<Self, ConvexError> {
        let waypoints = (0..k)
            .map(|i| {
                let s = i as f64 / (k - 1).max(1) as f64;
                a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
            })
            .collect();
        Self::new(t_start, waypoints)
    }

    pub fn loc_dim(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &[f64] {
        self.waypoints.last().expect("at least two waypoints")
    }

    /// Position at absolute time `t` in `[t_start, 0]` by linear interpolation.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let k = self.waypoints.len();
        if self.t_start == 0.0 {
            return self.waypoints[0].clone();
        }
        let s = ((t - self.t_start) / -self.t_start).clamp(0.0, 1.0) * (k - 1) as f64;
        let i = (s.floor() as usize).min(k - 2);
        let frac = s - i as f64;
        self.waypoints[i]
            .iter()
            .zip(&self.waypoints[i + 1])
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }

    /// Flattened as `[t_start, p0..., p1..., ...]`.
    pub fn to_vars(&self) -> Vec<f64> {
        let mut v = vec![self.t_start];
        for w in &self.waypoints {
            v.extend_from_slice(w);
        }
        v
    }

    pub fn from_vars(vars: &[f64], loc_dim: usize) -> Self {
        Self {
            t_start: vars[0],
            waypoints: vars[1..].chunks(loc_dim).map(<[f64]>::to_vec).collect(),
        }
    }

    pub(crate) fn mix_many(weights: &[f64], trs: &[&Trajectory]) -> Result<Self, ConvexError> {
        check_weights(weights, trs.len())?;
        let (k, d) = (trs[0].waypoints.len(), trs[0].loc_dim());
        if trs.iter().any(|t| t.waypoints.len() != k || t.loc_dim() != d) {
            return Err(ConvexError::ShapeMismatch("trajectories differ in waypoint count or dimension".into()));
        }
        let mut t_start = 0.0;
        let mut waypoints = vec![vec![0.0; d]; k];
        for (w, tr) in weights.iter().zip(trs) {
            t_start += w * tr.t_start;
            for (acc, p) in waypoints.iter_mut().zip(&tr.waypoints) {
                for (a, x) in acc.iter_mut().zip(p) {
                    *a += w * x;
                }
            }
        }
        Ok(Self { t_start, waypoints })
    }
}

/// `p f1 + (1-p) f2` after rescaling both onto `[-1, 0]`: the start time mixes
/// linearly and waypoint `i` is the mixture of the two waypoints `i`.
pub fn mix_trajectories(p: f64, f1: &Trajectory, f2: &Trajectory) -> Result<Trajectory, ConvexError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ConvexError::WeightSum(format!("mixing parameter {p} outside [0, 1]")));
    }
    Trajectory::mix_many(&[p, 1.0 - p], &[f1, f2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(t: f64, a: [f64; 2], b: [f64; 2]) -> Trajectory {
        Trajectory::linear(t, &a, &b, 5).unwrap()
    }

    #[test]
    fn mixing_with_p_one_returns_first() {
        let f1 = seg(-2.0, [0.0, 0.0], [6.0, 1.0]);
        let f2 = seg(-4.0, [1.0, 9.0], [8.0, 2.0]);
        assert_eq!(mix_trajectories(1.0, &f1, &f2).unwrap(), f1);
    }

    #[test]
    fn start_times_mix_linearly() {
        let f1 = seg(-2.0, [0.0, 0.0], [6.0, 1.0]);
        let f2 = seg(-4.0, [1.0, 9.0], [8.0, 2.0]);
        let m = mix_trajectories(0.5, &f1, &f2).unwrap();
        assert_eq!(m.t_start, -3.0);
        assert_eq!(m.start(), &[0.5, 4.5]);
        assert_eq!(m.end(), &[7.0, 1.5]);
    }

    #[test]
    fn rescaled_parameter_is_shared() {
        // Evaluating the mixture at rescaled time tau equals mixing f1(-t1 tau)
        // and f2(-t2 tau).
        let f1 = seg(-2.0, [0.0, 0.0], [6.0, 1.0]);
        let f2 = seg(-4.0, [1.0, 9.0], [8.0, 2.0]);
        let p = 0.3;
        let m = mix_trajectories(p, &f1, &f2).unwrap();
        for tau in [-1.0, -0.6, -0.25, 0.0] {
            let lhs = m.at(-m.t_start * tau);
            let a = f1.at(-f1.t_start * tau);
            let b = f2.at(-f2.t_start * tau);
            for i in 0..2 {
                assert!((lhs[i] - (p * a[i] + (1.0 - p) * b[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_and_parameter_errors() {
        let f1 = seg(-2.0, [0.0, 0.0], [6.0, 1.0]);
        let f3 = Trajectory::linear(-1.0, &[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        assert!(matches!(mix_trajectories(0.5, &f1, &f3), Err(ConvexError::ShapeMismatch(_))));
        assert!(mix_trajectories(1.5, &f1, &f1).is_err());
        assert!(Trajectory::new(1.0, vec![vec![0.0], vec![1.0]]).is_err());
    }
}
