use serde::{Deserialize, Serialize};

use super::KernelError;

/// Time points `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Mesh {
    points: Vec<f64>,
}

impl Mesh {
    pub fn new(points: Vec<f64>) -> Result<Self, KernelError> {
        match points.first() {
            None => return Err(KernelError::InvalidMesh("mesh has no points".into())),
            Some(&t0) if t0 != 0.0 => {
                return Err(KernelError::InvalidMesh(format!("mesh starts at {t0}, not 0")))
            }
            _ => {}
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(KernelError::InvalidMesh("non-finite mesh point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(KernelError::InvalidMesh(format!(
                "mesh points {} and {} are not strictly increasing",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `n` equal steps on `[0, t_final]`.
    pub fn uniform(t_final: f64, n: usize) -> Result<Self, KernelError> {
        if n == 0 {
            return Self::new(vec![0.0]);
        }
        let mut points: Vec<f64> = (0..=n).map(|i| t_final * i as f64 / n as f64).collect();
        points[n] = t_final;
        Self::new(points)
    }

    /// Uniform mesh whose step does not exceed `max_step`.
    pub fn with_max_step(t_final: f64, max_step: f64) -> Result<Self, KernelError> {
        if max_step.is_nan() || max_step <= 0.0 {
            return Err(KernelError::InvalidMesh(format!("step {max_step} must be positive")));
        }
        let n = (t_final / max_step - 1e-9).ceil().max(0.0) as usize;
        Self::uniform(t_final, n)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n_steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        *self.points.last().expect("mesh is non-empty")
    }

    /// Step sizes `tau_j = t_j - t_{j-1}`.
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }

    /// `|Pi|`, the largest step (0 for the single-point mesh).
    pub fn max_step(&self) -> f64 {
        self.steps().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for Mesh {
    type Error = KernelError;

    fn try_from(points: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<Mesh> for Vec<f64> {
    fn from(m: Mesh) -> Self {
        m.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mesh() {
        let m = Mesh::uniform(1.0, 4).unwrap();
        assert_eq!(m.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.max_step(), 0.25);
        assert_eq!(m.n_steps(), 4);
        assert_eq!(Mesh::with_max_step(1.0, 1.0 / 32.0).unwrap().n_steps(), 32);
        assert_eq!(Mesh::with_max_step(1.0, 0.3).unwrap().n_steps(), 4);
    }

    #[test]
    fn invalid_meshes() {
        assert!(Mesh::new(vec![]).is_err());
        assert!(Mesh::new(vec![0.1, 0.2]).is_err());
        assert!(Mesh::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(Mesh::new(vec![0.0, f64::NAN]).is_err());
        let single = Mesh::new(vec![0.0]).unwrap();
        assert_eq!(single.n_steps(), 0);
        assert_eq!(single.max_step(), 0.0);
    }
}
