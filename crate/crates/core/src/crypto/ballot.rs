//! Threshold timed-release ballot encryption.
//!
//! For `n` holders and threshold `t` the encryptor picks an ephemeral `r` and
//! a ballot secret `k`. Holder `i` gets the share `s_i = H(pk_i^r, ctx, nonce, i)`.
//! The polynomial `f` of degree `n` through `(0, k), (1, s_1), .., (n, s_n)` is
//! published at the `n - t + 1` points `x = n+1 ..= 2n-t+1` ("alphas"), so any
//! `t` shares plus the alphas give the `n + 1` points needed to recover `k`.
//! The payload is sealed with XChaCha20-Poly1305 under `kdf(k, ctx, nonce)`.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{XChaCha20Poly1305, XNonce};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::group::{verify_key_release, GroupElement, Scalar};
use super::hashing::{hash_to_scalar, kdf, BallotNonce, SecretIdentifier};
use super::lagrange::{interpolate, SharePoint};
use super::CryptoError;

/// AEAD identifier recorded in session configs.
pub const AEAD_SCHEME: &str = "xchacha20poly1305";

/// Poly1305 tag length.
pub const TAG_LEN: usize = 16;

/// Public per-ballot parameters `P`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicParams {
    /// `g^r`.
    pub ephemeral: GroupElement,
    /// `f(n+1) ..= f(n + (n-t+1))`.
    pub alphas: Vec<Scalar>,
    pub n: u32,
    pub t: u32,
    pub ctx: String,
}

impl PublicParams {
    pub fn expected_alphas(n: u32, t: u32) -> usize {
        (n - t + 1) as usize
    }

    pub fn check_shape(&self) -> Result<(), CryptoError> {
        check_threshold(self.n, self.t)?;
        if self.alphas.len() != Self::expected_alphas(self.n, self.t) {
            return Err(CryptoError::MalformedParams("alpha count must equal n - t + 1"));
        }
        Ok(())
    }

    /// Canonical byte encoding, bound into the AEAD as associated data.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 32 * self.alphas.len() + self.ctx.len());
        out.extend_from_slice(&self.ephemeral.to_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(self.alphas.len() as u32).to_le_bytes());
        for alpha in &self.alphas {
            out.extend_from_slice(&alpha.to_bytes());
        }
        out.extend_from_slice(&(self.ctx.len() as u32).to_le_bytes());
        out.extend_from_slice(self.ctx.as_bytes());
        out
    }
}

/// Ciphertext plus everything needed to decrypt it once `t` keys are public.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedBallot {
    pub params: PublicParams,
    pub nonce: BallotNonce,
    #[serde(with = "hex_bytes")]
    pub ciphertext: Vec<u8>,
}

/// Result of a threshold reconstruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reconstruction {
    pub secret: Scalar,
    /// Holder indices whose shares were interpolated.
    pub shares_used: Vec<u32>,
    /// Surplus holder indices checked against the polynomial.
    pub shares_checked: Vec<u32>,
}

fn check_threshold(n: u32, t: u32) -> Result<(), CryptoError> {
    if n == 0 {
        return Err(CryptoError::EmptyHolderSet);
    }
    if t == 0 || t > n {
        return Err(CryptoError::ThresholdOutOfRange { t, n });
    }
    Ok(())
}

fn aad(params: &PublicParams, nonce: &BallotNonce) -> Vec<u8> {
    let mut out = params.canonical_bytes();
    out.extend_from_slice(nonce.as_bytes());
    out
}

fn seal_plaintext(payload: &[u8], identifier: &SecretIdentifier) -> Vec<u8> {
    let mut plaintext = Vec::with_capacity(payload.len() + SecretIdentifier::LEN);
    plaintext.extend_from_slice(payload);
    plaintext.extend_from_slice(identifier.as_bytes());
    plaintext
}

fn encrypt_inner<R: RngCore + CryptoRng>(
    payload: &[u8],
    identifier: &SecretIdentifier,
    holder_pks: &[GroupElement],
    t: u32,
    ctx: &str,
    rng: &mut R,
) -> Result<(EncryptedBallot, Scalar), CryptoError> {
    let n = u32::try_from(holder_pks.len()).map_err(|_| CryptoError::EmptyHolderSet)?;
    check_threshold(n, t)?;

    let r = Scalar::random_nonzero(rng);
    let secret = Scalar::random(rng);
    let nonce = BallotNonce::random(rng);
    let ephemeral = GroupElement::base_mul(&r);

    let mut points = Vec::with_capacity(holder_pks.len() + 1);
    points.push(SharePoint::at(0, secret));
    for (i, pk) in (1u32..).zip(holder_pks) {
        let share = hash_to_scalar(&pk.mul(&r), ctx, &nonce, i);
        points.push(SharePoint::at(u64::from(i), share));
    }
    let alphas = (1..=PublicParams::expected_alphas(n, t) as u64)
        .map(|j| interpolate(&points, &Scalar::from_u64(u64::from(n) + j)))
        .collect::<Result<Vec<_>, _>>()?;

    let params = PublicParams { ephemeral, alphas, n, t, ctx: ctx.to_owned() };
    let key = kdf(&secret, ctx, &nonce);
    let cipher = XChaCha20Poly1305::new(&key.into());
    let plaintext = seal_plaintext(payload, identifier);
    let aad = aad(&params, &nonce);
    let ciphertext = cipher
        .encrypt(XNonce::from_slice(nonce.as_bytes()), Payload { msg: &plaintext, aad: &aad })
        .map_err(|_| CryptoError::InvalidCiphertext)?;

    Ok((EncryptedBallot { params, nonce, ciphertext }, secret))
}

/// Encrypts `payload ‖ I` to the ordered holder set with threshold `t`.
/// The ephemeral exponent, the ballot secret and all shares are dropped on return.
pub fn encrypt_ballot<R: RngCore + CryptoRng>(
    payload: &[u8],
    identifier: &SecretIdentifier,
    holder_pks: &[GroupElement],
    t: u32,
    ctx: &str,
    rng: &mut R,
) -> Result<EncryptedBallot, CryptoError> {
    encrypt_inner(payload, identifier, holder_pks, t, ctx, rng).map(|(ballot, _)| ballot)
}

/// Like [`encrypt_ballot`] but also returns the ballot secret `k`.
/// Only for test oracles.
#[cfg(any(test, feature = "test-oracle"))]
pub fn encrypt_ballot_retaining_secret<R: RngCore + CryptoRng>(
    payload: &[u8],
    identifier: &SecretIdentifier,
    holder_pks: &[GroupElement],
    t: u32,
    ctx: &str,
    rng: &mut R,
) -> Result<(EncryptedBallot, Scalar), CryptoError> {
    encrypt_inner(payload, identifier, holder_pks, t, ctx, rng)
}

/// Holder-side share: `H(ephemeral^sk_i, ctx, nonce, i)`, equal to the
/// encryptor's `s_i` since `ephemeral^sk_i = pk_i^r`.
pub fn derive_share(
    ephemeral: &GroupElement,
    sk: &Scalar,
    index: u32,
    ctx: &str,
    nonce: &BallotNonce,
) -> Result<Scalar, CryptoError> {
    if ephemeral.is_identity() {
        return Err(CryptoError::IdentityElement);
    }
    if index == 0 {
        return Err(CryptoError::InvalidIndex(index));
    }
    Ok(hash_to_scalar(&ephemeral.mul(sk), ctx, nonce, index))
}

/// Recovers the ballot secret from revealed holder keys.
///
/// Releases that fail `pk = g^sk` or name an unknown index are ignored. The
/// `t` lowest-indexed valid shares plus the alphas are interpolated at zero;
/// every further valid share must lie on the same polynomial.
pub fn reconstruct_secret(
    params: &PublicParams,
    nonce: &BallotNonce,
    releases: &[(u32, Scalar)],
    holder_pks: &[GroupElement],
) -> Result<Reconstruction, CryptoError> {
    params.check_shape()?;
    if holder_pks.len() != params.n as usize {
        return Err(CryptoError::MalformedParams("holder count does not match n"));
    }

    let mut valid: Vec<(u32, Scalar)> = releases
        .iter()
        .filter(|(index, sk)| {
            (1..=params.n).contains(index)
                && verify_key_release(&holder_pks[*index as usize - 1], sk)
        })
        .copied()
        .collect();
    valid.sort_by_key(|(index, _)| *index);
    valid.dedup_by_key(|(index, _)| *index);

    if valid.len() < params.t as usize {
        return Err(CryptoError::ThresholdNotMet { valid: valid.len(), needed: params.t as usize });
    }

    let shares = valid
        .iter()
        .map(|(index, sk)| {
            derive_share(&params.ephemeral, sk, *index, &params.ctx, nonce)
                .map(|share| SharePoint::at(u64::from(*index), share))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (used, surplus) = shares.split_at(params.t as usize);

    let mut points = used.to_vec();
    points.extend(
        (1u64..)
            .zip(&params.alphas)
            .map(|(j, alpha)| SharePoint::at(u64::from(params.n) + j, *alpha)),
    );
    let secret = interpolate(&points, &Scalar::ZERO)?;

    for (extra, (index, _)) in surplus.iter().zip(&valid[params.t as usize..]) {
        if interpolate(&points, &extra.x)? != extra.y {
            return Err(CryptoError::InconsistentShares { index: *index });
        }
    }

    Ok(Reconstruction {
        secret,
        shares_used: valid[..params.t as usize].iter().map(|(i, _)| *i).collect(),
        shares_checked: valid[params.t as usize..].iter().map(|(i, _)| *i).collect(),
    })
}

/// Opens a ballot with its reconstructed secret, returning the payload and `I`.
pub fn decrypt_ballot(
    ballot: &EncryptedBallot,
    secret: &Scalar,
) -> Result<(Vec<u8>, SecretIdentifier), CryptoError> {
    let key = kdf(secret, &ballot.params.ctx, &ballot.nonce);
    let cipher = XChaCha20Poly1305::new(&key.into());
    let aad = aad(&ballot.params, &ballot.nonce);
    let mut plaintext = cipher
        .decrypt(
            XNonce::from_slice(ballot.nonce.as_bytes()),
            Payload { msg: &ballot.ciphertext, aad: &aad },
        )
        .map_err(|_| CryptoError::InvalidCiphertext)?;
    if plaintext.len() < SecretIdentifier::LEN {
        return Err(CryptoError::InvalidCiphertext);
    }
    let id_bytes = plaintext.split_off(plaintext.len() - SecretIdentifier::LEN);
    let identifier = SecretIdentifier::from_slice(&id_bytes)?;
    Ok((plaintext, identifier))
}

mod hex_bytes {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        crate::crypto::decode_hex(&s).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::group::{keygen, KeyPair};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn holders(n: usize, rng: &mut ChaCha20Rng) -> Vec<KeyPair> {
        (0..n).map(|_| keygen(rng)).collect()
    }

    fn pks(kps: &[KeyPair]) -> Vec<GroupElement> {
        kps.iter().map(|kp| kp.pk).collect()
    }

    fn releases(kps: &[KeyPair], which: &[u32]) -> Vec<(u32, Scalar)> {
        which.iter().map(|&i| (i, kps[i as usize - 1].sk)).collect()
    }

    #[test]
    fn two_of_three_any_pair_reconstructs() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let kps = holders(3, &mut rng);
        let id = SecretIdentifier([9; 32]);
        let (ballot, k) =
            encrypt_ballot_retaining_secret(b"yes", &id, &pks(&kps), 2, "s", &mut rng).unwrap();
        assert_eq!(ballot.params.alphas.len(), 2);
        for pair in [[1, 2], [1, 3], [2, 3]] {
            let rec =
                reconstruct_secret(&ballot.params, &ballot.nonce, &releases(&kps, &pair), &pks(&kps))
                    .unwrap();
            assert_eq!(rec.secret, k);
            assert_eq!(decrypt_ballot(&ballot, &rec.secret).unwrap(), (b"yes".to_vec(), id));
        }
    }

    #[test]
    fn single_holder_instance() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let kps = holders(1, &mut rng);
        let id = SecretIdentifier([1; 32]);
        let ballot = encrypt_ballot(b"x", &id, &pks(&kps), 1, "s", &mut rng).unwrap();
        assert_eq!(ballot.params.alphas.len(), 1);
        let rec =
            reconstruct_secret(&ballot.params, &ballot.nonce, &releases(&kps, &[1]), &pks(&kps))
                .unwrap();
        assert_eq!(decrypt_ballot(&ballot, &rec.secret).unwrap().0, b"x");
    }

    #[test]
    fn five_choose_three_all_subsets_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let kps = holders(5, &mut rng);
        let id = SecretIdentifier([3; 32]);
        let (ballot, k) =
            encrypt_ballot_retaining_secret(b"payload", &id, &pks(&kps), 3, "s", &mut rng)
                .unwrap();
        let mut count = 0;
        for a in 1..=5u32 {
            for b in a + 1..=5 {
                for c in b + 1..=5 {
                    let rec = reconstruct_secret(
                        &ballot.params,
                        &ballot.nonce,
                        &releases(&kps, &[a, b, c]),
                        &pks(&kps),
                    )
                    .unwrap();
                    assert_eq!(rec.secret, k);
                    assert_eq!(decrypt_ballot(&ballot, &rec.secret).unwrap().0, b"payload");
                    count += 1;
                }
            }
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn threshold_bounds_are_enforced() {
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let kps = holders(3, &mut rng);
        let id = SecretIdentifier([0; 32]);
        assert_eq!(
            encrypt_ballot(b"", &id, &pks(&kps), 0, "s", &mut rng),
            Err(CryptoError::ThresholdOutOfRange { t: 0, n: 3 })
        );
        assert_eq!(
            encrypt_ballot(b"", &id, &pks(&kps), 4, "s", &mut rng),
            Err(CryptoError::ThresholdOutOfRange { t: 4, n: 3 })
        );
        assert_eq!(encrypt_ballot(b"", &id, &[], 1, "s", &mut rng), Err(CryptoError::EmptyHolderSet));
    }

    #[test]
    fn derived_share_matches_encryptor_side() {
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        let nonce = BallotNonce::random(&mut rng);
        for i in 1..=4u32 {
            let kp = keygen(&mut rng);
            let r = Scalar::random_nonzero(&mut rng);
            let encryptor = hash_to_scalar(&kp.pk.mul(&r), "ctx", &nonce, i);
            let holder =
                derive_share(&GroupElement::base_mul(&r), &kp.sk, i, "ctx", &nonce).unwrap();
            assert_eq!(encryptor, holder);
        }
    }

    #[test]
    fn shares_differ_between_ballots() {
        let mut rng = ChaCha20Rng::seed_from_u64(26);
        let kp = keygen(&mut rng);
        let eph = GroupElement::base_mul(&Scalar::random_nonzero(&mut rng));
        let a = derive_share(&eph, &kp.sk, 1, "s", &BallotNonce([1; 24])).unwrap();
        let b = derive_share(&eph, &kp.sk, 1, "s", &BallotNonce([2; 24])).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn share_at_out_of_range_index_does_not_reconstruct() {
        let mut rng = ChaCha20Rng::seed_from_u64(27);
        let kps = holders(3, &mut rng);
        let id = SecretIdentifier([5; 32]);
        let (ballot, k) =
            encrypt_ballot_retaining_secret(b"v", &id, &pks(&kps), 2, "s", &mut rng).unwrap();
        // Holder 1's key used as if it were holder 7: the share differs from s_1.
        let wrong = derive_share(&ballot.params.ephemeral, &kps[0].sk, 7, "s", &ballot.nonce)
            .unwrap();
        let good = derive_share(&ballot.params.ephemeral, &kps[1].sk, 2, "s", &ballot.nonce)
            .unwrap();
        let mut points = vec![SharePoint::at(1, wrong), SharePoint::at(2, good)];
        points.extend(
            ballot.params.alphas.iter().enumerate().map(|(j, a)| SharePoint::at(4 + j as u64, *a)),
        );
        let bogus = interpolate(&points, &Scalar::ZERO).unwrap();
        assert_ne!(bogus, k);
        assert_eq!(decrypt_ballot(&ballot, &bogus), Err(CryptoError::InvalidCiphertext));
    }

    #[test]
    fn below_threshold_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(28);
        let kps = holders(3, &mut rng);
        let ballot =
            encrypt_ballot(b"v", &SecretIdentifier([0; 32]), &pks(&kps), 2, "s", &mut rng).unwrap();
        assert_eq!(
            reconstruct_secret(&ballot.params, &ballot.nonce, &releases(&kps, &[2]), &pks(&kps)),
            Err(CryptoError::ThresholdNotMet { valid: 1, needed: 2 })
        );
    }

    #[test]
    fn invalid_releases_never_count() {
        let mut rng = ChaCha20Rng::seed_from_u64(29);
        let kps = holders(3, &mut rng);
        let ballot =
            encrypt_ballot(b"v", &SecretIdentifier([0; 32]), &pks(&kps), 2, "s", &mut rng).unwrap();
        let rel = vec![(1, kps[0].sk), (2, kps[1].sk + Scalar::ONE), (9, kps[2].sk)];
        assert_eq!(
            reconstruct_secret(&ballot.params, &ballot.nonce, &rel, &pks(&kps)),
            Err(CryptoError::ThresholdNotMet { valid: 1, needed: 2 })
        );
    }

    #[test]
    fn tampered_alpha_is_caught_by_surplus_check() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let kps = holders(4, &mut rng);
        let mut ballot =
            encrypt_ballot(b"v", &SecretIdentifier([0; 32]), &pks(&kps), 2, "s", &mut rng).unwrap();
        ballot.params.alphas[1] = ballot.params.alphas[1] + Scalar::ONE;
        let err = reconstruct_secret(
            &ballot.params,
            &ballot.nonce,
            &releases(&kps, &[1, 2, 3, 4]),
            &pks(&kps),
        )
        .unwrap_err();
        assert_eq!(err, CryptoError::InconsistentShares { index: 3 });
    }

    #[test]
    fn wrong_key_and_truncation_fail_authentication() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let kps = holders(2, &mut rng);
        let (mut ballot, k) = encrypt_ballot_retaining_secret(
            b"hello",
            &SecretIdentifier([0; 32]),
            &pks(&kps),
            1,
            "s",
            &mut rng,
        )
        .unwrap();
        assert_eq!(decrypt_ballot(&ballot, &(k + Scalar::ONE)), Err(CryptoError::InvalidCiphertext));
        ballot.ciphertext.truncate(ballot.ciphertext.len() - 1);
        assert_eq!(decrypt_ballot(&ballot, &k), Err(CryptoError::InvalidCiphertext));
    }

    #[test]
    fn malformed_alpha_count_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let kps = holders(3, &mut rng);
        let mut ballot =
            encrypt_ballot(b"v", &SecretIdentifier([0; 32]), &pks(&kps), 2, "s", &mut rng).unwrap();
        ballot.params.alphas.pop();
        assert!(matches!(
            reconstruct_secret(&ballot.params, &ballot.nonce, &releases(&kps, &[1, 2]), &pks(&kps)),
            Err(CryptoError::MalformedParams(_))
        ));
    }
}
