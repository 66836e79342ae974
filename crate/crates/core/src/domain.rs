//! Regular domains generated by a null support function.
//!
//! The past horizon is the graph of v₀(x) = max_θ ⟨θ, x⟩ − φ(θ). For finitely many
//! samples v₀ is a polyhedral convex function, and both the cosmological time and its
//! level sets are realized on the creases of v₀ (a single null plane has no interior
//! critical point). The model precomputes those creases once, after which
//!
//! * T(p) = max over crease points r ≺ p of √(−⟨p − r, p − r⟩), a concave quadratic
//!   maximization along each crease segment, and
//! * v_a(x) = min over y of v₀(y) + √(a² + |x − y|²), a convex minimization along each
//!   crease segment, since (x, s) has T ≥ a exactly when some horizon point sits at
//!   Lorentzian distance ≥ a below it.
//!
//! Both reduce to closed forms per segment. The cone preset uses the exact continuum.

use thiserror::Error;

use crate::lorentz::MinkVector;
use crate::support::{dot, Preset, SupportFunction};

/// Slack allowed when deciding whether a crease segment is non-empty.
const CREASE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("point {0} is not in the domain (t ≤ v₀(x))")]
    NotInDomain(MinkVector),
    #[error("expected spatial dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cosmological time is implemented for n ≤ 2 (got n = {0})")]
    UnsupportedDimension(usize),
    #[error("level must be positive, got {0}")]
    NonPositiveLevel(f64),
}

/// One affine piece x ↦ ⟨θ, x⟩ − φ of the horizon.
#[derive(Debug, Clone, PartialEq)]
struct Piece {
    direction: Vec<f64>,
    value: f64,
}

impl Piece {
    fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.direction, x) - self.value
    }
}

/// A crease of v₀ where two pieces tie and dominate: the segment
/// `base + s·dir`, `s ∈ [lo, hi]`, on which v₀ equals piece `piece`.
#[derive(Debug, Clone, PartialEq)]
struct Crease {
    piece: usize,
    base: Vec<f64>,
    dir: Vec<f64>,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Horizon {
    Cone { apex_x: Vec<f64>, apex_t: f64 },
    Polyhedral { pieces: Vec<Piece>, creases: Vec<Crease> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularDomainModel {
    support: SupportFunction,
    horizon: Horizon,
}

impl RegularDomainModel {
    pub fn new(support: SupportFunction) -> Self {
        let horizon = match support.preset() {
            Preset::Cone { apex } => Horizon::Cone { apex_x: apex.spatial().to_vec(), apex_t: apex.time() },
            _ => {
                let pieces: Vec<Piece> = support
                    .samples()
                    .iter()
                    .map(|s| Piece { direction: s.direction.clone(), value: s.value })
                    .collect();
                let creases = match support.dim() {
                    1 => creases_1d(&pieces),
                    2 => creases_2d(&pieces),
                    _ => Vec::new(),
                };
                Horizon::Polyhedral { pieces, creases }
            }
        };
        Self { support, horizon }
    }

    pub fn support(&self) -> &SupportFunction {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Height v₀(x) of the past horizon.
    pub fn horizon_height(&self, x: &[f64]) -> f64 {
        match &self.horizon {
            Horizon::Cone { apex_x, apex_t } => apex_t + euclid_dist(x, apex_x),
            Horizon::Polyhedral { pieces, .. } => pieces.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, p: &MinkVector) -> bool {
        p.dim() == self.dim() && p.time() > self.horizon_height(p.spatial())
    }

    /// Cosmological time T(p), the Lorentzian distance from the past horizon to `p`.
    pub fn cosmological_time(&self, p: &MinkVector) -> Result<f64, DomainError> {
        self.check_dim(p.dim())?;
        if !self.contains(p) {
            return Err(DomainError::NotInDomain(p.clone()));
        }
        let (px, pt) = (p.spatial(), p.time());
        match &self.horizon {
            Horizon::Cone { apex_x, apex_t } => {
                let dt = pt - apex_t;
                let r2 = euclid_dist_sq(px, apex_x);
                Ok((dt * dt - r2).max(0.0).sqrt())
            }
            Horizon::Polyhedral { pieces, creases } => {
                if self.dim() > 2 {
                    return Err(DomainError::UnsupportedDimension(self.dim()));
                }
                let mut best = 0.0f64;
                for c in creases {
                    let piece = &pieces[c.piece];
                    // a(s) = t − v₀(x(s)) = A − B s, |p_x − x(s)|² = (s − s0)² + d²
                    let q: Vec<f64> = px.iter().zip(&c.base).map(|(a, b)| a - b).collect();
                    let a0 = pt - piece.eval(&c.base);
                    let b = dot(&piece.direction, &c.dir);
                    let s0 = dot(&q, &c.dir);
                    let d2 = (dot(&q, &q) - s0 * s0).max(0.0);
                    let s_star = if c.dir.is_empty() { 0.0 } else { (s0 - a0 * b) / (1.0 - b * b) };
                    let s = s_star.clamp(c.lo, c.hi);
                    let a = a0 - b * s;
                    if a <= 0.0 {
                        continue;
                    }
                    let f2 = a * a - (s - s0) * (s - s0) - d2;
                    if f2 > best * best {
                        best = f2.sqrt();
                    }
                }
                Ok(best)
            }
        }
    }

    /// Height v_a(x) of the level set T⁻¹(a).
    pub fn level_set_height(&self, a: f64, x: &[f64]) -> Result<f64, DomainError> {
        self.check_dim(x.len())?;
        if !(a > 0.0) {
            return Err(DomainError::NonPositiveLevel(a));
        }
        match &self.horizon {
            Horizon::Cone { apex_x, apex_t } => Ok(apex_t + (a * a + euclid_dist_sq(x, apex_x)).sqrt()),
            Horizon::Polyhedral { pieces, creases } => {
                if self.dim() > 2 {
                    return Err(DomainError::UnsupportedDimension(self.dim()));
                }
                let mut best = f64::INFINITY;
                for c in creases {
                    let piece = &pieces[c.piece];
                    let q: Vec<f64> = x.iter().zip(&c.base).map(|(a, b)| a - b).collect();
                    let c0 = piece.eval(&c.base);
                    let b = dot(&piece.direction, &c.dir);
                    let s0 = dot(&q, &c.dir);
                    let d2 = (dot(&q, &q) - s0 * s0).max(0.0);
                    let beta2 = a * a + d2;
                    let s_star = if c.dir.is_empty() { 0.0 } else { s0 - b * beta2.sqrt() / (1.0 - b * b).sqrt() };
                    let s = s_star.clamp(c.lo, c.hi);
                    let g = c0 + b * s + (beta2 + (s - s0) * (s - s0)).sqrt();
                    best = best.min(g);
                }
                Ok(best)
            }
        }
    }

    fn check_dim(&self, found: usize) -> Result<(), DomainError> {
        if found != self.dim() {
            return Err(DomainError::DimensionMismatch { expected: self.dim(), found });
        }
        Ok(())
    }
}

fn euclid_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    euclid_dist_sq(a, b).sqrt()
}

/// In one dimension the pieces are θ = ±1 and the only crease is the point where they meet.
fn creases_1d(pieces: &[Piece]) -> Vec<Crease> {
    let plus = pieces.iter().position(|p| p.direction[0] > 0.0);
    let minus = pieces.iter().position(|p| p.direction[0] < 0.0);
    match (plus, minus) {
        (Some(i), Some(j)) => {
            let x = (pieces[i].value - pieces[j].value) / 2.0;
            vec![Crease { piece: i, base: vec![x], dir: Vec::new(), lo: 0.0, hi: 0.0 }]
        }
        _ => Vec::new(),
    }
}

fn creases_2d(pieces: &[Piece]) -> Vec<Crease> {
    let mut out = Vec::new();
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            let (ti, tj) = (&pieces[i].direction, &pieces[j].direction);
            let d = [ti[0] - tj[0], ti[1] - tj[1]];
            let dn2 = d[0] * d[0] + d[1] * d[1];
            let dn = dn2.sqrt();
            let rhs = pieces[i].value - pieces[j].value;
            let base = vec![d[0] * rhs / dn2, d[1] * rhs / dn2];
            let dir = vec![-d[1] / dn, d[0] / dn];
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            let mut empty = false;
            for (k, pk) in pieces.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                // ℓ_i − ℓ_k along the line: c + m s ≥ 0
                let c = pieces[i].eval(&base) - pk.eval(&base);
                let m = (ti[0] - pk.direction[0]) * dir[0] + (ti[1] - pk.direction[1]) * dir[1];
                let scale = 1.0 + c.abs();
                if m.abs() <= 1e-14 {
                    if c < -CREASE_TOLERANCE * scale {
                        empty = true;
                        break;
                    }
                } else if m > 0.0 {
                    lo = lo.max(-c / m);
                } else {
                    hi = hi.min(-c / m);
                }
                if lo > hi + CREASE_TOLERANCE * (1.0 + lo.abs().min(hi.abs())) {
                    empty = true;
                    break;
                }
            }
            if !empty {
                let hi = hi.max(lo);
                out.push(Crease { piece: i, base, dir, lo, hi });
            }
        }
    }
    out
}
