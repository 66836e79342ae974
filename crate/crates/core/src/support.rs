//! Null support functions: the asymptotic data of an entire spacelike hypersurface.
//!
//! A support function is stored as finitely many samples `(θ, φ(θ))` with `θ` a unit
//! direction of S^{n−1}. Directions where φ = +∞ are simply absent.

use std::f64::consts::PI;

use thiserror::Error;

use crate::lorentz::MinkVector;

/// Tolerance under which two normalized directions are the same point of S^{n−1}.
pub const DIRECTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupportError {
    #[error("support: fewer than two directions")]
    FewerThanTwoDirections,
    #[error("support: non-finite value or direction component in sample {0}")]
    NonFinite(usize),
    #[error("support: sample {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("support: sample {0} has a zero direction")]
    ZeroDirection(usize),
    #[error("support: dimension must be 1, 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("support: sample count {0} is too small for the preset")]
    TooFewPresetSamples(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub direction: Vec<f64>,
    pub value: f64,
}

/// How a support function was produced. `Cone` is the only preset whose evaluators
/// use the continuum φ(θ) = ⟨θ, apex_x⟩ − apex_t rather than the finite samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Cone { apex: MinkVector },
    Wedge { axis: Vec<f64>, offsets: (f64, f64) },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportFunction {
    dim: usize,
    samples: Vec<Sample>,
    preset: Preset,
}

/// Validates raw samples into a support function.
///
/// Directions are normalized, exact duplicates are merged keeping the smaller value,
/// and at least two distinct directions must remain.
pub fn make_support_function(dim: usize, samples: Vec<(Vec<f64>, f64)>) -> Result<SupportFunction, SupportError> {
    if !(1..=3).contains(&dim) {
        return Err(SupportError::UnsupportedDimension(dim));
    }
    let mut kept: Vec<Sample> = Vec::with_capacity(samples.len());
    for (index, (direction, value)) in samples.into_iter().enumerate() {
        if direction.len() != dim {
            return Err(SupportError::DimensionMismatch { index, expected: dim, found: direction.len() });
        }
        if !value.is_finite() || direction.iter().any(|c| !c.is_finite()) {
            return Err(SupportError::NonFinite(index));
        }
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SupportError::ZeroDirection(index));
        }
        let direction: Vec<f64> = direction.iter().map(|c| c / norm).collect();
        match kept.iter_mut().find(|s| same_direction(&s.direction, &direction)) {
            Some(existing) => existing.value = existing.value.min(value),
            None => kept.push(Sample { direction, value }),
        }
    }
    if kept.len() < 2 {
        return Err(SupportError::FewerThanTwoDirections);
    }
    Ok(SupportFunction { dim, samples: kept, preset: Preset::Custom })
}

fn same_direction(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DIRECTION_TOLERANCE)
}

/// Unit direction at `angle` radians in the plane.
pub fn planar_direction(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

impl SupportFunction {
    /// Support function of the future cone of `apex`: φ(θ) = ⟨θ, apex_x⟩ − apex_t.
    ///
    /// `sample_count` directions are stored for export and asymptotics; horizon and
    /// level-set evaluation use the exact cone.
    pub fn cone(apex: MinkVector, sample_count: usize) -> Result<Self, SupportError> {
        let dim = apex.dim();
        let directions = match dim {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => {
                if sample_count < 3 {
                    return Err(SupportError::TooFewPresetSamples(sample_count));
                }
                (0..sample_count).map(|k| planar_direction(2.0 * PI * k as f64 / sample_count as f64)).collect()
            }
            3 => {
                if sample_count < 4 {
                    return Err(SupportError::TooFewPresetSamples(sample_count));
                }
                fibonacci_sphere(sample_count)
            }
            d => return Err(SupportError::UnsupportedDimension(d)),
        };
        let samples = directions
            .into_iter()
            .map(|theta| {
                let value = dot(&theta, apex.spatial()) - apex.time();
                (theta, value)
            })
            .collect();
        let mut sf = make_support_function(dim, samples)?;
        sf.preset = Preset::Cone { apex };
        Ok(sf)
    }

    /// Two null half-spaces with normals ±axis: v₀(x) = max(⟨a,x⟩ − c₊, −⟨a,x⟩ − c₋).
    pub fn wedge(axis: Vec<f64>, offsets: (f64, f64)) -> Result<Self, SupportError> {
        let dim = axis.len();
        let minus: Vec<f64> = axis.iter().map(|c| -c).collect();
        let mut sf = make_support_function(dim, vec![(axis, offsets.0), (minus, offsets.1)])?;
        let axis = sf.samples[0].direction.clone();
        sf.preset = Preset::Wedge { axis, offsets };
        Ok(sf)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn preset(&self) -> &Preset {
        &self.preset
    }

    /// φ(θ) for a sampled direction, `None` where φ is +∞ (unsampled).
    pub fn value_at(&self, direction: &[f64]) -> Option<f64> {
        if let Preset::Cone { apex } = &self.preset {
            if direction.len() == self.dim {
                let n = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (n - 1.0).abs() <= 1e-9 {
                    return Some(dot(direction, apex.spatial()) - apex.time());
                }
            }
        }
        self.samples
            .iter()
            .find(|s| s.direction.len() == direction.len() && direction_close(&s.direction, direction))
            .map(|s| s.value)
    }

    /// φ − c for every sample: the domain translated by c in time.
    pub fn shifted(&self, c: f64) -> Self {
        self.map_values(|v| v - c, |apex| apex.add(&time_vector(apex.dim(), c)).ok())
    }

    /// λ·φ: the domain scaled by λ > 0 about the origin.
    pub fn scaled(&self, lambda: f64) -> Self {
        self.map_values(|v| lambda * v, |apex| Some(apex.scale(lambda)))
    }

    fn map_values(&self, f: impl Fn(f64) -> f64, apex_map: impl Fn(&MinkVector) -> Option<MinkVector>) -> Self {
        let samples =
            self.samples.iter().map(|s| Sample { direction: s.direction.clone(), value: f(s.value) }).collect();
        let preset = match &self.preset {
            Preset::Cone { apex } => match apex_map(apex) {
                Some(apex) => Preset::Cone { apex },
                None => Preset::Custom,
            },
            Preset::Wedge { axis, .. } => {
                let plus = f(self.samples[0].value);
                let minus = f(self.samples[1].value);
                Preset::Wedge { axis: axis.clone(), offsets: (plus, minus) }
            }
            Preset::Custom => Preset::Custom,
        };
        Self { dim: self.dim, samples, preset }
    }

    /// Drops the preset, keeping only the finite samples.
    pub fn into_sampled(mut self) -> Self {
        self.preset = Preset::Custom;
        self
    }
}

fn direction_close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

fn time_vector(dim: usize, c: f64) -> MinkVector {
    MinkVector::new(vec![0.0; dim], c).expect("finite")
}

/// Asymptotic cut at future null infinity: ψ(θ) = −φ(θ) on the sampled directions.
pub fn null_cut(sf: &SupportFunction) -> Vec<Sample> {
    sf.samples.iter().map(|s| Sample { direction: s.direction.clone(), value: -s.value }).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wedge_from_two_opposite_directions() {
        let sf = make_support_function(2, vec![(vec![1.0, 0.0], 0.0), (vec![-1.0, 0.0], 0.0)]).unwrap();
        assert_eq!(sf.samples().len(), 2);
        assert_eq!(sf.preset(), &Preset::Custom);
    }

    #[test]
    fn single_direction_is_rejected() {
        let err = make_support_function(2, vec![(vec![1.0, 0.0], 0.0)]).unwrap_err();
        assert_eq!(err, SupportError::FewerThanTwoDirections);
        assert_eq!(err.to_string(), "support: fewer than two directions");
        // a duplicate does not count as a second direction
        let err = make_support_function(2, vec![(vec![1.0, 0.0], 0.0), (vec![2.0, 0.0], 1.0)]).unwrap_err();
        assert_eq!(err, SupportError::FewerThanTwoDirections);
    }

    #[test]
    fn duplicates_keep_lower_envelope() {
        let sf = make_support_function(2, vec![(vec![1.0, 0.0], 0.0), (vec![1.0, 0.0], 5.0), (vec![-1.0, 0.0], 1.0)])
            .unwrap();
        let got: Vec<(Vec<f64>, f64)> = sf.samples().iter().map(|s| (s.direction.clone(), s.value)).collect();
        assert_eq!(got, vec![(vec![1.0, 0.0], 0.0), (vec![-1.0, 0.0], 1.0)]);
    }

    #[test]
    fn directions_are_normalized() {
        let sf = make_support_function(2, vec![(vec![3.0, 4.0], 1.0), (vec![0.0, -2.0], 0.0)]).unwrap();
        for s in sf.samples() {
            let n = s.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= DIRECTION_TOLERANCE);
        }
        assert_eq!(sf.samples()[0].direction, vec![0.6, 0.8]);
    }

    #[test]
    fn rejects_non_finite_and_zero() {
        assert_eq!(
            make_support_function(2, vec![(vec![1.0, 0.0], f64::INFINITY), (vec![0.0, 1.0], 0.0)]),
            Err(SupportError::NonFinite(0))
        );
        assert_eq!(
            make_support_function(2, vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 0.0], 0.0)]),
            Err(SupportError::ZeroDirection(1))
        );
        assert!(matches!(
            make_support_function(2, vec![(vec![1.0], 0.0), (vec![0.0, 1.0], 0.0)]),
            Err(SupportError::DimensionMismatch { index: 0, .. })
        ));
    }

    #[test]
    fn null_cut_negates() {
        let sf = make_support_function(2, vec![(vec![1.0, 0.0], 2.0), (vec![-1.0, 0.0], -1.0)]).unwrap();
        let cut = null_cut(&sf);
        assert_eq!(cut[0], Sample { direction: vec![1.0, 0.0], value: -2.0 });
        assert_eq!(cut[1], Sample { direction: vec![-1.0, 0.0], value: 1.0 });

        let cone = SupportFunction::cone(MinkVector::origin(2), 8).unwrap();
        assert!(null_cut(&cone).iter().all(|s| s.value == 0.0));
        let wedge = SupportFunction::wedge(vec![1.0, 0.0], (0.0, 0.0)).unwrap();
        let cut = null_cut(&wedge);
        assert_eq!(cut.len(), 2);
        assert!(cut.iter().all(|s| s.value == 0.0));
    }

    #[test]
    fn cone_values_follow_apex() {
        let apex = MinkVector::new(vec![1.0, 2.0], 0.5).unwrap();
        let sf = SupportFunction::cone(apex, 16).unwrap();
        for s in sf.samples() {
            assert!((s.value - (s.direction[0] + 2.0 * s.direction[1] - 0.5)).abs() < 1e-15);
        }
        assert_eq!(sf.value_at(&[0.0, 1.0]), Some(1.5));
    }

    #[test]
    fn value_at_absent_direction_is_infinite() {
        let wedge = SupportFunction::wedge(vec![1.0, 0.0], (0.0, 3.0)).unwrap();
        assert_eq!(wedge.value_at(&[0.0, 1.0]), None);
        assert_eq!(wedge.value_at(&[-1.0, 0.0]), Some(3.0));
    }
}
