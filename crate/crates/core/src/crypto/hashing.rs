//! SHA-256 based primitives: the public hash `h`, identifier digests,
//! share derivation hashing and the payload key derivation.

use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use super::group::{GroupElement, Scalar};
use super::CryptoError;

/// Hash algorithm identifier recorded in session configs.
pub const HASH_ALGORITHM: &str = "sha256";

const SHARE_TAG: &[u8] = b"collvote/v1/share";
const KDF_TAG: &[u8] = b"collvote/v1/kdf";
const COMMIT_TAG: &[u8] = b"collvote/v1/commit";

macro_rules! bytes_newtype {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
                let arr: [u8; $len] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
                    expected: $len,
                    actual: bytes.len(),
                })?;
                Ok($name(arr))
            }

            pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
                let bytes = super::decode_hex(s)?;
                Self::from_slice(&bytes)
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                $name::from_hex(&s).map_err(de::Error::custom)
            }
        }
    };
}

bytes_newtype!(
    /// 32-byte output of the session hash.
    Digest32,
    32
);

bytes_newtype!(
    /// A voter's private eligibility token `I`.
    SecretIdentifier,
    32
);

bytes_newtype!(
    /// Per-ballot nonce; doubles as the XChaCha20-Poly1305 nonce.
    BallotNonce,
    24
);

impl SecretIdentifier {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        SecretIdentifier(bytes)
    }
}

impl BallotNonce {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 24];
        rng.fill_bytes(&mut bytes);
        BallotNonce(bytes)
    }
}

/// The public hash `h`.
pub fn h(data: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(data).into())
}

/// `h(I)` and `h(h(I))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityDigest {
    pub once: Digest32,
    pub twice: Digest32,
}

pub fn eligibility_digests(identifier: &SecretIdentifier) -> EligibilityDigest {
    let once = h(identifier.as_bytes());
    EligibilityDigest { once, twice: h(once.as_bytes()) }
}

/// Byte-level variant that enforces the 32-byte identifier length.
pub fn eligibility_digests_from_bytes(bytes: &[u8]) -> Result<EligibilityDigest, CryptoError> {
    SecretIdentifier::from_slice(bytes).map(|id| eligibility_digests(&id))
}

fn put_len_prefixed(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u32).to_le_bytes());
    hasher.update(bytes);
}

/// Maps `(dh ‖ ctx ‖ nonce ‖ index)` to a scalar via two tagged SHA-256
/// blocks reduced mod q.
pub fn hash_to_scalar(
    dh: &GroupElement,
    ctx: &str,
    nonce: &BallotNonce,
    index: u32,
) -> Scalar {
    let mut wide = [0u8; 64];
    for (block, out) in wide.chunks_exact_mut(32).enumerate() {
        let mut hasher = Sha256::new();
        put_len_prefixed(&mut hasher, SHARE_TAG);
        hasher.update([block as u8]);
        hasher.update(dh.to_bytes());
        put_len_prefixed(&mut hasher, ctx.as_bytes());
        hasher.update(nonce.as_bytes());
        hasher.update(index.to_le_bytes());
        out.copy_from_slice(&hasher.finalize());
    }
    Scalar::from_bytes_mod_order_wide(&wide)
}

/// Payload key `kdf(k ‖ ctx ‖ nonce)`.
pub fn kdf(secret: &Scalar, ctx: &str, nonce: &BallotNonce) -> [u8; 32] {
    let mut hasher = Sha256::new();
    put_len_prefixed(&mut hasher, KDF_TAG);
    hasher.update(secret.to_bytes());
    put_len_prefixed(&mut hasher, ctx.as_bytes());
    hasher.update(nonce.as_bytes());
    hasher.finalize().into()
}

/// Public commitment to a reconstructed ballot secret, recorded in transcripts.
pub fn secret_commitment(secret: &Scalar) -> Digest32 {
    let mut hasher = Sha256::new();
    put_len_prefixed(&mut hasher, COMMIT_TAG);
    hasher.update(secret.to_bytes());
    Digest32(hasher.finalize().into())
}
