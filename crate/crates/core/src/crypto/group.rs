//! Ristretto255 scalars, points and one-time key pairs.
//!
//! Scalars travel as 32-byte little-endian reduced encodings, points as the
//! 32-byte canonical Ristretto compression. Both are hash preimages, so the
//! encodings must stay bit-stable.

use std::fmt;

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::CryptoError;

/// Element of the scalar field of the Ristretto group.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scalar(pub(crate) curve25519_dalek::Scalar);

impl Scalar {
    pub const ZERO: Scalar = Scalar(curve25519_dalek::Scalar::ZERO);
    pub const ONE: Scalar = Scalar(curve25519_dalek::Scalar::ONE);

    pub fn from_u64(value: u64) -> Self {
        Scalar(curve25519_dalek::Scalar::from(value))
    }

    /// Uniform scalar, possibly zero.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Scalar(curve25519_dalek::Scalar::random(rng))
    }

    /// Uniform nonzero scalar.
    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if s != Self::ZERO {
                return s;
            }
        }
    }

    pub fn from_bytes_mod_order_wide(bytes: &[u8; 64]) -> Self {
        Scalar(curve25519_dalek::Scalar::from_bytes_mod_order_wide(bytes))
    }

    /// Decodes a reduced little-endian encoding; unreduced inputs are rejected.
    pub fn from_canonical_bytes(bytes: [u8; 32]) -> Result<Self, CryptoError> {
        Option::<curve25519_dalek::Scalar>::from(curve25519_dalek::Scalar::from_canonical_bytes(
            bytes,
        ))
        .map(Scalar)
        .ok_or(CryptoError::InvalidEncoding("scalar is not reduced"))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::InvalidLength { expected: 32, actual: bytes.len() })?;
        Self::from_canonical_bytes(arr)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes = super::decode_hex(s)?;
        Self::from_slice(&bytes)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// Multiplicative inverse; zero maps to zero.
    pub fn invert(&self) -> Self {
        Scalar(self.0.invert())
    }
}

impl std::ops::Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl std::ops::Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl std::ops::Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.to_hex())
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Scalar::from_hex(&s).map_err(de::Error::custom)
    }
}

/// Non-identity element of the Ristretto255 prime-order group.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement(pub(crate) RistrettoPoint);

impl GroupElement {
    pub fn generator() -> Self {
        GroupElement(RISTRETTO_BASEPOINT_POINT)
    }

    /// `g^exponent`.
    pub fn base_mul(exponent: &Scalar) -> Self {
        GroupElement(RISTRETTO_BASEPOINT_POINT * exponent.0)
    }

    pub fn mul(&self, exponent: &Scalar) -> Self {
        GroupElement(self.0 * exponent.0)
    }

    pub fn is_identity(&self) -> bool {
        self.0 == RistrettoPoint::identity()
    }

    /// Decodes a canonical compressed point. The identity is rejected; Ristretto
    /// has no other small-order elements.
    pub fn from_bytes(bytes: [u8; 32]) -> Result<Self, CryptoError> {
        let point = CompressedRistretto(bytes)
            .decompress()
            .ok_or(CryptoError::InvalidEncoding("not a canonical ristretto point"))?;
        if point == RistrettoPoint::identity() {
            return Err(CryptoError::IdentityElement);
        }
        Ok(GroupElement(point))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::InvalidLength { expected: 32, actual: bytes.len() })?;
        Self::from_bytes(arr)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes = super::decode_hex(s)?;
        Self::from_slice(&bytes)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.compress().to_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", self.to_hex())
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        GroupElement::from_hex(&s).map_err(de::Error::custom)
    }
}

/// One-time holder key pair, `pk = g^sk`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub sk: Scalar,
    pub pk: GroupElement,
}

impl KeyPair {
    /// Builds the pair for a given secret. Zero is not a valid secret key.
    pub fn from_secret(sk: Scalar) -> Result<Self, CryptoError> {
        if sk == Scalar::ZERO {
            return Err(CryptoError::ZeroSecret);
        }
        Ok(KeyPair { sk, pk: GroupElement::base_mul(&sk) })
    }
}

/// Fresh key pair with `sk` uniform in `[1, q-1]`.
pub fn keygen<R: RngCore + CryptoRng>(rng: &mut R) -> KeyPair {
    let sk = Scalar::random_nonzero(rng);
    KeyPair { sk, pk: GroupElement::base_mul(&sk) }
}

/// Checks a revealed secret key against its registered public key.
pub fn verify_key_release(pk: &GroupElement, sk: &Scalar) -> bool {
    GroupElement::base_mul(sk) == *pk
}
