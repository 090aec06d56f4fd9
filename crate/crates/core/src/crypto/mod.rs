//! Prime-order group cryptography for threshold reveal-verifiable
//! timed-release ballot encryption over Ristretto255.

mod ballot;
mod group;
mod hashing;
mod lagrange;

use thiserror::Error;

#[cfg(any(test, feature = "test-oracle"))]
pub use ballot::encrypt_ballot_retaining_secret;
pub use ballot::{
    decrypt_ballot, derive_share, encrypt_ballot, reconstruct_secret, EncryptedBallot,
    PublicParams, Reconstruction, AEAD_SCHEME, TAG_LEN,
};
pub use group::{keygen, verify_key_release, GroupElement, KeyPair, Scalar};
pub use hashing::{
    eligibility_digests, eligibility_digests_from_bytes, h, hash_to_scalar, kdf,
    secret_commitment, BallotNonce, Digest32, EligibilityDigest, SecretIdentifier,
    HASH_ALGORITHM,
};
pub use lagrange::{interpolate, SharePoint};

/// Decodes lowercase hex only, so every value has exactly one encoding.
pub fn decode_hex(s: &str) -> Result<Vec<u8>, CryptoError> {
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(CryptoError::InvalidEncoding("hex must be lowercase"));
    }
    hex::decode(s).map_err(|_| CryptoError::InvalidEncoding("invalid hex"))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("expected {expected} bytes, got {actual}")]
    InvalidLength { expected: usize, actual: usize },
    #[error("invalid encoding: {0}")]
    InvalidEncoding(&'static str),
    #[error("identity element is not a valid group element here")]
    IdentityElement,
    #[error("secret key must be nonzero")]
    ZeroSecret,
    #[error("threshold {t} out of range for {n} holders")]
    ThresholdOutOfRange { t: u32, n: u32 },
    #[error("no secret holders to encrypt to")]
    EmptyHolderSet,
    #[error("holder index {0} is out of range")]
    InvalidIndex(u32),
    #[error("interpolation needs at least one point")]
    NoPoints,
    #[error("duplicate x coordinate")]
    DuplicateCoordinate,
    #[error("malformed public parameters: {0}")]
    MalformedParams(&'static str),
    #[error("threshold not met: {valid} valid releases, {needed} needed")]
    ThresholdNotMet { valid: usize, needed: usize },
    #[error("share of holder {index} is off the sharing polynomial")]
    InconsistentShares { index: u32 },
    #[error("ciphertext failed authentication")]
    InvalidCiphertext,
}
