//! Minkowski space ℝ^{n,1} with the form dx₁² + ⋯ + dxₙ² − dt².

use std::fmt;

use thiserror::Error;

/// Relative band inside which a squared norm counts as null.
pub const NULL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LorentzError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("spatial dimension must be at least 1")]
    ZeroDimension,
    #[error("non-finite component")]
    NonFinite,
}

/// A point or vector of ℝ^{n,1}, split into its spatial part and time component.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkVector {
    spatial: Vec<f64>,
    time: f64,
}

impl MinkVector {
    pub fn new(spatial: Vec<f64>, time: f64) -> Result<Self, LorentzError> {
        if spatial.is_empty() {
            return Err(LorentzError::ZeroDimension);
        }
        if !time.is_finite() || spatial.iter().any(|c| !c.is_finite()) {
            return Err(LorentzError::NonFinite);
        }
        Ok(Self { spatial, time })
    }

    /// Builds a vector from `[x₁, …, xₙ, t]`.
    pub fn from_components(components: &[f64]) -> Result<Self, LorentzError> {
        match components.split_last() {
            Some((&t, xs)) => Self::new(xs.to_vec(), t),
            None => Err(LorentzError::ZeroDimension),
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self { spatial: vec![0.0; dim.max(1)], time: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.spatial.len()
    }

    pub fn spatial(&self) -> &[f64] {
        &self.spatial
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn euclidean_norm_sq(&self) -> f64 {
        self.spatial.iter().map(|x| x * x).sum::<f64>() + self.time * self.time
    }

    pub fn sub(&self, other: &MinkVector) -> Result<MinkVector, LorentzError> {
        check_dims(self, other)?;
        Ok(MinkVector {
            spatial: self.spatial.iter().zip(&other.spatial).map(|(a, b)| a - b).collect(),
            time: self.time - other.time,
        })
    }

    pub fn add(&self, other: &MinkVector) -> Result<MinkVector, LorentzError> {
        check_dims(self, other)?;
        Ok(MinkVector {
            spatial: self.spatial.iter().zip(&other.spatial).map(|(a, b)| a + b).collect(),
            time: self.time + other.time,
        })
    }

    pub fn scale(&self, s: f64) -> MinkVector {
        MinkVector { spatial: self.spatial.iter().map(|x| s * x).collect(), time: s * self.time }
    }

    pub fn neg(&self) -> MinkVector {
        self.scale(-1.0)
    }
}

impl fmt::Display for MinkVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, x) in self.spatial.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "; {})", self.time)
    }
}

fn check_dims(v: &MinkVector, w: &MinkVector) -> Result<(), LorentzError> {
    if v.dim() != w.dim() {
        return Err(LorentzError::DimensionMismatch(v.dim(), w.dim()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CausalClass {
    Spacelike,
    TimelikeFuture,
    TimelikePast,
    NullFuture,
    NullPast,
    Zero,
}

impl CausalClass {
    pub fn is_future_causal(self) -> bool {
        matches!(self, CausalClass::TimelikeFuture | CausalClass::NullFuture)
    }
}

pub fn minkowski_inner(v: &MinkVector, w: &MinkVector) -> Result<f64, LorentzError> {
    check_dims(v, w)?;
    Ok(inner_parts(&v.spatial, v.time, &w.spatial, w.time))
}

/// ⟨(x, s), (y, t)⟩ on raw parts; callers guarantee equal lengths.
#[inline]
pub(crate) fn inner_parts(x: &[f64], s: f64, y: &[f64], t: f64) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - s * t
}

pub fn causal_class(v: &MinkVector) -> CausalClass {
    classify_parts(&v.spatial, v.time)
}

pub(crate) fn classify_parts(x: &[f64], t: f64) -> CausalClass {
    let spatial_sq: f64 = x.iter().map(|a| a * a).sum();
    let euclid = spatial_sq + t * t;
    if euclid == 0.0 {
        return CausalClass::Zero;
    }
    let q = spatial_sq - t * t;
    if q.abs() <= NULL_TOLERANCE * euclid.max(1.0) {
        if t > 0.0 {
            CausalClass::NullFuture
        } else {
            CausalClass::NullPast
        }
    } else if q > 0.0 {
        CausalClass::Spacelike
    } else if t > 0.0 {
        CausalClass::TimelikeFuture
    } else {
        CausalClass::TimelikePast
    }
}

/// Lorentzian distance from `p` to `q`: `Some(√(−⟨q−p, q−p⟩))` when `q ∈ J⁺(p)`,
/// `None` when the points are not causally related in that order.
pub fn lorentzian_distance(p: &MinkVector, q: &MinkVector) -> Result<Option<f64>, LorentzError> {
    check_dims(p, q)?;
    Ok(distance_parts(&p.spatial, p.time, &q.spatial, q.time))
}

#[inline]
pub(crate) fn distance_parts(px: &[f64], pt: f64, qx: &[f64], qt: f64) -> Option<f64> {
    let dt = qt - pt;
    let dx_sq: f64 = px.iter().zip(qx).map(|(a, b)| (b - a) * (b - a)).sum();
    let euclid = dx_sq + dt * dt;
    if euclid == 0.0 {
        return Some(0.0);
    }
    if dt <= 0.0 {
        return None;
    }
    let q = dx_sq - dt * dt;
    if q.abs() <= NULL_TOLERANCE * euclid.max(1.0) {
        return Some(0.0);
    }
    if q > 0.0 {
        None
    } else {
        Some((-q).sqrt())
    }
}

/// Lorentz boost with rapidity `rapidity` along the unit spatial direction `axis`.
pub fn boost(v: &MinkVector, axis: &[f64], rapidity: f64) -> Result<MinkVector, LorentzError> {
    if axis.len() != v.dim() {
        return Err(LorentzError::DimensionMismatch(axis.len(), v.dim()));
    }
    let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0) || !rapidity.is_finite() {
        return Err(LorentzError::NonFinite);
    }
    let n: Vec<f64> = axis.iter().map(|a| a / norm).collect();
    let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
    let along: f64 = v.spatial.iter().zip(&n).map(|(a, b)| a * b).sum();
    let new_along = ch * along + sh * v.time;
    let time = sh * along + ch * v.time;
    let spatial = v.spatial.iter().zip(&n).map(|(x, e)| x + (new_along - along) * e).collect();
    Ok(MinkVector { spatial, time })
}
