//! State vectors: the solution at a single time point.
//!
//! Anything the solver stores per time point implements [`StateVector`]. The
//! solver only ever combines vectors through `add`/`sub`, measures them with
//! `norm` and ships them between workers as flat `f64` buffers via
//! `pack`/`unpack`.

use std::fmt::Debug;

use rand::{Rng, RngCore};

use crate::error::{MgritError, Result};

/// Contract for the per-time-point solution object.
pub trait StateVector: Clone + Debug + Send + Sync + 'static {
    /// A vector of the same shape with every entry zero.
    fn clone_zero(&self) -> Self;

    /// A vector of the same shape filled with i.i.d. uniform values in `[0, 1)`.
    fn clone_rand(&self, rng: &mut dyn RngCore) -> Self;

    fn add(&self, other: &Self) -> Self;

    fn sub(&self, other: &Self) -> Self;

    /// Number of reals produced by [`pack`](Self::pack).
    fn packed_len(&self) -> usize;

    /// Flatten the payload into a contiguous buffer.
    fn pack(&self) -> Vec<f64>;

    /// Rebuild a vector shaped like `self` from a buffer produced by `pack`.
    fn unpack(&self, buffer: &[f64]) -> Result<Self>;

    /// Euclidean norm of the packed payload unless overridden.
    fn norm(&self) -> f64 {
        euclidean_norm(&self.pack())
    }

    fn is_finite(&self) -> bool {
        self.pack().iter().all(|v| v.is_finite())
    }
}

pub fn euclidean_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scalar state, as used by Dahlquist's test equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarVector {
    pub value: f64,
}

impl ScalarVector {
    pub fn new(value: f64) -> Self {
        Self { value }
    }
}

impl StateVector for ScalarVector {
    fn clone_zero(&self) -> Self {
        Self::new(0.0)
    }

    fn clone_rand(&self, rng: &mut dyn RngCore) -> Self {
        Self::new(rng.gen::<f64>())
    }

    fn add(&self, other: &Self) -> Self {
        Self::new(self.value + other.value)
    }

    fn sub(&self, other: &Self) -> Self {
        Self::new(self.value - other.value)
    }

    fn packed_len(&self) -> usize {
        1
    }

    fn pack(&self) -> Vec<f64> {
        vec![self.value]
    }

    fn unpack(&self, buffer: &[f64]) -> Result<Self> {
        match buffer {
            [v] => Ok(Self::new(*v)),
            _ => Err(MgritError::Structure {
                expected: 1,
                actual: buffer.len(),
            }),
        }
    }

    fn norm(&self) -> f64 {
        self.value.abs()
    }
}

/// Dense array of grid values (boundary entries included). Packs as-is, in
/// storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVector {
    values: Vec<f64>,
}

impl GridVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: Vec<f64>) {
        self.values = values;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl StateVector for GridVector {
    fn clone_zero(&self) -> Self {
        Self::zeros(self.values.len())
    }

    fn clone_rand(&self, rng: &mut dyn RngCore) -> Self {
        Self::new((0..self.values.len()).map(|_| rng.gen::<f64>()).collect())
    }

    fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    fn packed_len(&self) -> usize {
        self.values.len()
    }

    fn pack(&self) -> Vec<f64> {
        self.values.clone()
    }

    fn unpack(&self, buffer: &[f64]) -> Result<Self> {
        if buffer.len() != self.values.len() {
            return Err(MgritError::Structure {
                expected: self.values.len(),
                actual: buffer.len(),
            });
        }
        Ok(Self::new(buffer.to_vec()))
    }

    fn norm(&self) -> f64 {
        euclidean_norm(&self.values)
    }

    fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Wire encoding of a packed buffer: little-endian IEEE-754 doubles, no header.
pub fn encode_le(buffer: &[f64]) -> Vec<u8> {
    buffer.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(MgritError::Structure {
            expected: bytes.len().div_ceil(8) * 8,
            actual: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Contract checks any [`StateVector`] implementation should pass: zero norm,
/// pack/unpack round trip, add/sub inverse and clone independence.
///
/// `sample` should be a non-zero vector; returns the first violated property.
pub fn check_vector_contract<V: StateVector>(
    sample: &V,
    rng: &mut dyn RngCore,
) -> std::result::Result<(), String> {
    if sample.clone_zero().norm() != 0.0 {
        return Err("norm(clone_zero(x)) != 0".into());
    }
    let packed = sample.pack();
    if packed.len() != sample.packed_len() {
        return Err(format!(
            "pack produced {} values, packed_len says {}",
            packed.len(),
            sample.packed_len()
        ));
    }
    let restored = sample.unpack(&packed).map_err(|e| e.to_string())?;
    if sample.sub(&restored).norm() != 0.0 || restored.pack() != packed {
        return Err("unpack(pack(x)) differs from x".into());
    }
    if sample.sub(sample).norm() != 0.0 {
        return Err("x - x has non-zero norm".into());
    }
    let other = sample.clone_rand(rng);
    let round = sample.add(&other).sub(&other);
    let tol = 4.0 * f64::EPSILON * (sample.norm() + other.norm());
    if round.sub(sample).norm() > tol {
        return Err("(x + y) - y differs from x beyond rounding".into());
    }
    if sample.add(&other).sub(&other.add(sample)).norm() != 0.0 {
        return Err("addition is not commutative".into());
    }
    let before = sample.norm();
    let mutated = sample.clone().add(&other);
    if sample.norm() != before || sample.pack() != packed || mutated.pack() == packed {
        return Err("mutating a clone changed the original".into());
    }
    Ok(())
}
