//! Fixed per-environment input featurization for the function approximators.
//!
//! States and observations cross module boundaries raw (the noise model,
//! replay buffer, and demo files all see the plain state vector); the
//! networks consume a fixed deterministic encoding of them. The pendulum
//! angle maps to (cos, sin) so the wrap at +-pi - which every swing-up
//! trajectory crosses - does not put a discontinuity into the policy or
//! value inputs. Velocities are scaled toward unit range.

use super::EnvKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// Raw pass-through of `dim` values.
    Identity { dim: usize },
    /// [theta, theta_dot] -> [cos theta, sin theta, theta_dot / 8].
    Pendulum,
    /// [x, x_dot, theta, theta_dot] scaled toward unit magnitudes.
    Cartpole,
    /// [x, y, vx, vy] with velocities scaled by the speed limit.
    Pointmass,
}

impl FeatureMap {
    pub fn for_kind(kind: EnvKind) -> FeatureMap {
        match kind {
            EnvKind::Pendulum => FeatureMap::Pendulum,
            EnvKind::CartpoleContinuous => FeatureMap::Cartpole,
            EnvKind::Pointmass => FeatureMap::Pointmass,
        }
    }

    pub fn identity(dim: usize) -> FeatureMap {
        FeatureMap::Identity { dim }
    }

    /// Raw input length.
    pub fn raw_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::Pendulum => 2,
            FeatureMap::Cartpole | FeatureMap::Pointmass => 4,
        }
    }

    /// Encoded length (network input width).
    pub fn feature_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::Pendulum => 3,
            FeatureMap::Cartpole | FeatureMap::Pointmass => 4,
        }
    }

    pub fn apply_into(&self, raw: &[f64], out: &mut [f64]) {
        debug_assert_eq!(raw.len(), self.raw_dim());
        debug_assert_eq!(out.len(), self.feature_dim());
        match self {
            FeatureMap::Identity { .. } => out.copy_from_slice(raw),
            FeatureMap::Pendulum => {
                let (s, c) = raw[0].sin_cos();
                out[0] = c;
                out[1] = s;
                out[2] = raw[1] / 8.0;
            }
            FeatureMap::Cartpole => {
                out[0] = raw[0] / 2.4;
                out[1] = raw[1] / 3.0;
                out[2] = raw[2] / 0.21;
                out[3] = raw[3] / 3.0;
            }
            FeatureMap::Pointmass => {
                out[0] = raw[0];
                out[1] = raw[1];
                out[2] = raw[2] / 5.0;
                out[3] = raw[3] / 5.0;
            }
        }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_dim()];
        self.apply_into(raw, &mut out);
        out
    }

    /// Row-wise encoding of a flat `[rows, raw_dim]` matrix.
    pub fn apply_batch(&self, raw: &[f64], rows: usize) -> Vec<f64> {
        let rd = self.raw_dim();
        let fd = self.feature_dim();
        debug_assert_eq!(raw.len(), rows * rd);
        let mut out = vec![0.0; rows * fd];
        for r in 0..rows {
            let (src, dst) = (&raw[r * rd..(r + 1) * rd], &mut out[r * fd..(r + 1) * fd]);
            match self {
                FeatureMap::Identity { .. } => dst.copy_from_slice(src),
                FeatureMap::Pendulum => {
                    let (s, c) = src[0].sin_cos();
                    dst[0] = c;
                    dst[1] = s;
                    dst[2] = src[1] / 8.0;
                }
                FeatureMap::Cartpole => {
                    dst[0] = src[0] / 2.4;
                    dst[1] = src[1] / 3.0;
                    dst[2] = src[2] / 0.21;
                    dst[3] = src[3] / 3.0;
                }
                FeatureMap::Pointmass => {
                    dst[0] = src[0];
                    dst[1] = src[1];
                    dst[2] = src[2] / 5.0;
                    dst[3] = src[3] / 5.0;
                }
            }
        }
        out
    }
}
