//! Paillier cryptosystem over arbitrary-precision integers.
//!
//! Keys use the `g = n + 1` generator, so `g^m mod n^2 = 1 + m*n` and
//! encryption costs a single exponentiation (`r^n`). The private key holds
//! `lambda = lcm(p - 1, q - 1)` and `mu = L(g^lambda mod n^2)^-1 mod n` with
//! `L(u) = (u - 1) / n`. Freshly generated keys also keep `p` and `q` so that
//! decryption can run modulo `p^2` and `q^2` separately and recombine.
//!
//! Ciphertexts are tagged with a [`KeyId`] derived from the modulus; mixing
//! ciphertexts from different keys is an error rather than garbage.
//!
//! Key sizes of 128 and 256 bits are accepted because the benchmark grid
//! includes them. They offer no security.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hex::{from_hex, to_hex};

/// Smallest accepted modulus size in bits.
pub const MIN_KEY_BITS: u64 = 16;

/// Miller-Rabin rounds applied to every prime candidate that survives trial
/// division.
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Default bound on prime candidates examined per prime.
pub const DEFAULT_PRIME_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("key size {0} bits is below the minimum of {MIN_KEY_BITS}")]
    KeyTooSmall(u64),
    #[error("key size {0} bits is odd; the two primes must have equal length")]
    OddKeySize(u64),
    #[error("no prime found after {0} candidates")]
    PrimeSearchExhausted(usize),
    #[error("plaintext is outside [0, n)")]
    PlaintextOutOfRange,
    #[error("scalar is outside [0, n)")]
    ScalarOutOfRange,
    #[error("ciphertext was produced under a different key")]
    KeyMismatch,
    #[error("ciphertext is not a unit modulo n^2")]
    InvalidCiphertext,
    #[error("malformed key: {0}")]
    MalformedKey(String),
}

/// Opaque identity of a public key, derived from its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyId(u64);

impl KeyId {
    fn of(n: &BigUint) -> Self {
        let mut hasher = DefaultHasher::new();
        n.hash(&mut hasher);
        KeyId(hasher.finish())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    g: BigUint,
    id: KeyId,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("bits", &self.n.bits())
            .field("n", &to_hex(&self.n))
            .finish()
    }
}

impl PublicKey {
    /// Builds the public key for modulus `n` with the `n + 1` generator.
    pub fn from_modulus(n: BigUint) -> Result<Self, PaillierError> {
        if n <= BigUint::from(3u32) || n.is_even() {
            return Err(PaillierError::MalformedKey("modulus must be odd and > 3".into()));
        }
        let g = &n + 1u32;
        Self::from_parts(n, g)
    }

    /// Builds a public key from an explicit generator. Only `g = n + 1` is
    /// produced by [`keygen`]; other generators are accepted if they are
    /// units modulo `n^2` whose order is a multiple of `n`.
    pub fn from_parts(n: BigUint, g: BigUint) -> Result<Self, PaillierError> {
        if n <= BigUint::from(3u32) || n.is_even() {
            return Err(PaillierError::MalformedKey("modulus must be odd and > 3".into()));
        }
        let n_squared = &n * &n;
        if g.is_zero() || g >= n_squared || !g.gcd(&n).is_one() {
            return Err(PaillierError::MalformedKey("generator is not a unit mod n^2".into()));
        }
        let id = KeyId::of(&n);
        Ok(PublicKey { n, n_squared, g, id })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    pub fn id(&self) -> KeyId {
        self.id
    }

    /// `g^m mod n^2`, short-circuited for the `n + 1` generator.
    fn g_pow(&self, m: &BigUint) -> BigUint {
        if self.g == &self.n + 1u32 {
            (m * &self.n + 1u32) % &self.n_squared
        } else {
            self.g.modpow(m, &self.n_squared)
        }
    }

    /// Encrypts `m` with fresh randomness `r` drawn uniformly from the units
    /// modulo `n`.
    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<Ciphertext, PaillierError> {
        if m >= &self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        let r = loop {
            let candidate = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if candidate.gcd(&self.n).is_one() {
                break candidate;
            }
        };
        Ok(self.encrypt_with(m, &r))
    }

    /// Encrypts with caller-chosen randomness. `r` must be a unit mod `n`.
    pub fn encrypt_with(&self, m: &BigUint, r: &BigUint) -> Ciphertext {
        let value = (self.g_pow(m) * r.modpow(&self.n, &self.n_squared)) % &self.n_squared;
        Ciphertext { value, key_id: self.id }
    }

    /// Homomorphic addition: decrypts to `(m1 + m2) mod n`.
    pub fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, PaillierError> {
        self.check_owner(c1)?;
        self.check_owner(c2)?;
        Ok(Ciphertext { value: (&c1.value * &c2.value) % &self.n_squared, key_id: self.id })
    }

    /// Homomorphic scaling by a plaintext: decrypts to `(a * m) mod n`.
    /// Negative scalars must be encoded into `[0, n)` by the caller.
    pub fn scalar_mul(&self, c: &Ciphertext, a: &BigUint) -> Result<Ciphertext, PaillierError> {
        self.check_owner(c)?;
        if a >= &self.n {
            return Err(PaillierError::ScalarOutOfRange);
        }
        Ok(Ciphertext { value: c.value.modpow(a, &self.n_squared), key_id: self.id })
    }

    /// Wraps a raw group element (for example one read off the wire) as a
    /// ciphertext under this key, rejecting non-units.
    pub fn ciphertext_from_value(&self, value: BigUint) -> Result<Ciphertext, PaillierError> {
        if !self.is_valid_value(&value) {
            return Err(PaillierError::InvalidCiphertext);
        }
        Ok(Ciphertext { value, key_id: self.id })
    }

    /// True for units of `Z_{n^2}`, i.e. `0 < v < n^2` and `gcd(v, n) = 1`.
    pub fn is_valid_value(&self, value: &BigUint) -> bool {
        !value.is_zero() && value < &self.n_squared && value.gcd(&self.n).is_one()
    }

    fn check_owner(&self, c: &Ciphertext) -> Result<(), PaillierError> {
        if c.key_id != self.id {
            return Err(PaillierError::KeyMismatch);
        }
        Ok(())
    }
}

/// Precomputed values for decryption modulo `p^2` and `q^2`.
#[derive(Clone)]
struct CrtParams {
    p: BigUint,
    q: BigUint,
    p_squared: BigUint,
    q_squared: BigUint,
    p_minus_1: BigUint,
    q_minus_1: BigUint,
    hp: BigUint,
    hq: BigUint,
    q_inv_p: BigUint,
}

impl CrtParams {
    fn new(p: &BigUint, q: &BigUint, g: &BigUint) -> Option<Self> {
        let p_squared = p * p;
        let q_squared = q * q;
        let p_minus_1 = p - 1u32;
        let q_minus_1 = q - 1u32;
        let hp = l_function(&g.modpow(&p_minus_1, &p_squared), p).modinv(p)?;
        let hq = l_function(&g.modpow(&q_minus_1, &q_squared), q).modinv(q)?;
        let q_inv_p = q.modinv(p)?;
        Some(CrtParams {
            p: p.clone(),
            q: q.clone(),
            p_squared,
            q_squared,
            p_minus_1,
            q_minus_1,
            hp,
            hq,
            q_inv_p,
        })
    }

    fn decrypt(&self, c: &BigUint) -> BigUint {
        let mp = (l_function(&c.modpow(&self.p_minus_1, &self.p_squared), &self.p) * &self.hp)
            % &self.p;
        let mq = (l_function(&c.modpow(&self.q_minus_1, &self.q_squared), &self.q) * &self.hq)
            % &self.q;
        // m = mq + q * ((mp - mq) * q^-1 mod p)
        let diff = (&mp + &self.p - (&mq % &self.p)) % &self.p;
        let h = (diff * &self.q_inv_p) % &self.p;
        mq + h * &self.q
    }
}

#[derive(Clone)]
pub struct PrivateKey {
    lambda: BigUint,
    mu: BigUint,
    n: BigUint,
    n_squared: BigUint,
    key_id: KeyId,
    crt: Option<CrtParams>,
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrivateKey").field("bits", &self.n.bits()).finish_non_exhaustive()
    }
}

impl PrivateKey {
    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    /// The prime factors, when the key was generated locally.
    pub fn factors(&self) -> Option<(&BigUint, &BigUint)> {
        self.crt.as_ref().map(|crt| (&crt.p, &crt.q))
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint, PaillierError> {
        if c.key_id != self.key_id {
            return Err(PaillierError::KeyMismatch);
        }
        if c.value.is_zero() || c.value >= self.n_squared || !c.value.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidCiphertext);
        }
        Ok(match &self.crt {
            Some(crt) => crt.decrypt(&c.value),
            None => self.decrypt_textbook(&c.value),
        })
    }

    /// `m = L(c^lambda mod n^2) * mu mod n`, without the CRT shortcut.
    fn decrypt_textbook(&self, c: &BigUint) -> BigUint {
        let u = c.modpow(&self.lambda, &self.n_squared);
        (l_function(&u, &self.n) * &self.mu) % &self.n
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

/// `L(u) = (u - 1) / n`.
fn l_function(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u32) / n
}

/// Generates a key pair whose modulus has exactly `bits` bits.
pub fn keygen<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<KeyPair, PaillierError> {
    keygen_with_limit(bits, rng, DEFAULT_PRIME_ATTEMPTS)
}

/// [`keygen`] with an explicit bound on prime candidates per prime.
pub fn keygen_with_limit<R: RngCore + ?Sized>(
    bits: u64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<KeyPair, PaillierError> {
    if bits < MIN_KEY_BITS {
        return Err(PaillierError::KeyTooSmall(bits));
    }
    if !bits.is_multiple_of(2) {
        return Err(PaillierError::OddKeySize(bits));
    }
    let half = bits / 2;
    loop {
        let p = random_prime(half, rng, max_attempts)?;
        let q = random_prime(half, rng, max_attempts)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        let phi = (&p - 1u32) * (&q - 1u32);
        if !n.gcd(&phi).is_one() {
            continue;
        }
        if let Some(pair) = from_primes(&p, &q) {
            debug_assert_eq!(pair.public.bits(), bits);
            return Ok(pair);
        }
    }
}

/// Assembles a key pair from two distinct primes.
pub fn from_primes(p: &BigUint, q: &BigUint) -> Option<KeyPair> {
    let n = p * q;
    let public = PublicKey::from_modulus(n.clone()).ok()?;
    let p_minus_1 = p - 1u32;
    let q_minus_1 = q - 1u32;
    let lambda = p_minus_1.lcm(&q_minus_1);
    let u = public.g.modpow(&lambda, &public.n_squared);
    let mu = l_function(&u, &n).modinv(&n)?;
    let crt = CrtParams::new(p, q, &public.g);
    let private = PrivateKey {
        lambda,
        mu,
        n_squared: public.n_squared.clone(),
        key_id: public.id,
        n,
        crt,
    };
    Some(KeyPair { public, private })
}

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Random prime of exactly `bits` bits with the top two bits set, so the
/// product of two such primes has exactly `2 * bits` bits.
fn random_prime<R: RngCore + ?Sized>(
    bits: u64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<BigUint, PaillierError> {
    for _ in 0..max_attempts {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return Ok(candidate);
        }
    }
    Err(PaillierError::PrimeSearchExhausted(max_attempts))
}

/// Trial division by small primes followed by Miller-Rabin with `rounds`
/// random bases.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let upper = n - 1u32;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &upper);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A Paillier ciphertext. Equality is value equality; encryption is
/// probabilistic so equal plaintexts almost never give equal ciphertexts.
#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext {
    value: BigUint,
    key_id: KeyId,
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({})", to_hex(&self.value))
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }
}

#[derive(Serialize, Deserialize)]
struct KeyPairJson {
    bits: u64,
    n: String,
    g: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mu: Option<String>,
}

fn parse_hex_field(name: &str, text: &str) -> Result<BigUint, PaillierError> {
    from_hex(text).ok_or_else(|| PaillierError::MalformedKey(format!("{name} is not hex")))
}

impl PublicKey {
    /// `{"bits": int, "n": hex, "g": hex}`.
    pub fn to_json(&self) -> String {
        let json = KeyPairJson {
            bits: self.bits(),
            n: to_hex(&self.n),
            g: to_hex(&self.g),
            lambda: None,
            mu: None,
        };
        serde_json::to_string(&json).expect("key json")
    }

    pub fn from_json(text: &str) -> Result<Self, PaillierError> {
        let json: KeyPairJson =
            serde_json::from_str(text).map_err(|e| PaillierError::MalformedKey(e.to_string()))?;
        let key = PublicKey::from_parts(
            parse_hex_field("n", &json.n)?,
            parse_hex_field("g", &json.g)?,
        )?;
        if key.bits() != json.bits {
            return Err(PaillierError::MalformedKey("bits does not match n".into()));
        }
        Ok(key)
    }
}

impl KeyPair {
    /// `{"bits": int, "n": hex, "g": hex, "lambda": hex, "mu": hex}`.
    pub fn to_json(&self) -> String {
        let json = KeyPairJson {
            bits: self.public.bits(),
            n: to_hex(&self.public.n),
            g: to_hex(&self.public.g),
            lambda: Some(to_hex(&self.private.lambda)),
            mu: Some(to_hex(&self.private.mu)),
        };
        serde_json::to_string(&json).expect("key json")
    }

    /// Parses the full key pair. The prime factors are not part of the
    /// format, so decryption of a parsed key uses the textbook formula.
    pub fn from_json(text: &str) -> Result<Self, PaillierError> {
        let json: KeyPairJson =
            serde_json::from_str(text).map_err(|e| PaillierError::MalformedKey(e.to_string()))?;
        let public = PublicKey::from_parts(
            parse_hex_field("n", &json.n)?,
            parse_hex_field("g", &json.g)?,
        )?;
        if public.bits() != json.bits {
            return Err(PaillierError::MalformedKey("bits does not match n".into()));
        }
        let missing = || PaillierError::MalformedKey("private fields missing".into());
        let lambda = parse_hex_field("lambda", json.lambda.as_deref().ok_or_else(missing)?)?;
        let mu = parse_hex_field("mu", json.mu.as_deref().ok_or_else(missing)?)?;
        let u = public.g.modpow(&lambda, &public.n_squared);
        if !((l_function(&u, &public.n) * &mu) % &public.n).is_one() {
            return Err(PaillierError::MalformedKey("mu * L(g^lambda) != 1 mod n".into()));
        }
        let private = PrivateKey {
            lambda,
            mu,
            n: public.n.clone(),
            n_squared: public.n_squared.clone(),
            key_id: public.id,
            crt: None,
        };
        Ok(KeyPair { public, private })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn modulus_has_requested_size() {
        for bits in [16, 32, 64, 128, 256] {
            let pair = keygen(bits, &mut rng(bits)).unwrap();
            assert_eq!(pair.public.bits(), bits);
            assert_eq!(pair.public.n_squared(), &(pair.public.n() * pair.public.n()));
            assert_eq!(pair.public.g(), &(pair.public.n() + 1u32));
            let (p, q) = pair.private.factors().unwrap();
            assert_ne!(p, q);
            assert_eq!(p.bits(), bits / 2);
            assert_eq!(q.bits(), bits / 2);
        }
    }

    #[test]
    fn mu_inverts_l_of_g_lambda() {
        let pair = keygen(64, &mut rng(3)).unwrap();
        let u = pair.public.g().modpow(pair.private.lambda(), pair.public.n_squared());
        let l = l_function(&u, pair.public.n());
        assert!(((l * pair.private.mu()) % pair.public.n()).is_one());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(keygen(8, &mut rng(0)).unwrap_err(), PaillierError::KeyTooSmall(8));
        assert_eq!(keygen(33, &mut rng(0)).unwrap_err(), PaillierError::OddKeySize(33));
        assert_eq!(
            keygen_with_limit(512, &mut rng(0), 1).unwrap_err(),
            PaillierError::PrimeSearchExhausted(1)
        );
    }

    #[test]
    fn tiny_key_round_trips_zero() {
        let pair = keygen(16, &mut rng(9)).unwrap();
        let mut r = rng(10);
        let c = pair.public.encrypt(&big(0), &mut r).unwrap();
        assert_eq!(pair.private.decrypt(&c).unwrap(), big(0));
    }

    #[test]
    fn different_seeds_give_different_moduli() {
        let a = keygen(64, &mut rng(1)).unwrap();
        let b = keygen(64, &mut rng(2)).unwrap();
        assert_ne!(a.public.n(), b.public.n());
    }

    #[test]
    fn encryption_is_probabilistic() {
        let pair = keygen(64, &mut rng(4)).unwrap();
        let mut r = rng(5);
        let a = pair.public.encrypt(&big(5), &mut r).unwrap();
        let b = pair.public.encrypt(&big(5), &mut r).unwrap();
        assert_ne!(a.value(), b.value());
        assert_eq!(pair.private.decrypt(&a).unwrap(), big(5));
        assert_eq!(pair.private.decrypt(&b).unwrap(), big(5));
    }

    #[test]
    fn small_identities() {
        let pair = keygen(64, &mut rng(6)).unwrap();
        let pk = &pair.public;
        let sk = &pair.private;
        let mut r = rng(7);
        let enc = |m: u64, r: &mut ChaCha20Rng| pk.encrypt(&big(m), r).unwrap();

        assert_eq!(sk.decrypt(&enc(7, &mut r)).unwrap(), big(7));
        let sum = pk.add(&enc(3, &mut r), &enc(4, &mut r)).unwrap();
        assert_eq!(sk.decrypt(&sum).unwrap(), big(7));
        let scaled = pk.scalar_mul(&enc(5, &mut r), &big(3)).unwrap();
        assert_eq!(sk.decrypt(&scaled).unwrap(), big(15));
        let zeroed = pk.scalar_mul(&enc(12345, &mut r), &big(0)).unwrap();
        assert_eq!(sk.decrypt(&zeroed).unwrap(), big(0));
    }

    #[test]
    fn addition_wraps_modulo_n() {
        let pair = keygen(64, &mut rng(8)).unwrap();
        let pk = &pair.public;
        let mut r = rng(9);
        let top = pk.n() - 1u32;
        let c = pk.add(&pk.encrypt(&top, &mut r).unwrap(), &pk.encrypt(&big(1), &mut r).unwrap());
        // (n - 1 + 1) mod n
        let expected = (&top + 1u32) % pk.n();
        assert_eq!(pair.private.decrypt(&c.unwrap()).unwrap(), expected);
        assert!(expected.is_zero());
    }

    #[test]
    fn range_checks() {
        let pair = keygen(32, &mut rng(11)).unwrap();
        let pk = &pair.public;
        let mut r = rng(12);
        assert_eq!(
            pk.encrypt(pk.n(), &mut r).unwrap_err(),
            PaillierError::PlaintextOutOfRange
        );
        let c = pk.encrypt(&big(1), &mut r).unwrap();
        assert_eq!(pk.scalar_mul(&c, pk.n()).unwrap_err(), PaillierError::ScalarOutOfRange);
        assert!(pk.ciphertext_from_value(BigUint::zero()).is_err());
        assert!(pk.ciphertext_from_value(pk.n_squared().clone()).is_err());
        assert!(pk.ciphertext_from_value(pk.n().clone()).is_err());
    }

    #[test]
    fn cross_key_operations_fail() {
        let a = keygen(64, &mut rng(13)).unwrap();
        let b = keygen(64, &mut rng(14)).unwrap();
        let mut r = rng(15);
        let ca = a.public.encrypt(&big(1), &mut r).unwrap();
        let cb = b.public.encrypt(&big(1), &mut r).unwrap();
        assert_eq!(b.private.decrypt(&ca).unwrap_err(), PaillierError::KeyMismatch);
        assert_eq!(a.public.add(&ca, &cb).unwrap_err(), PaillierError::KeyMismatch);
        assert_eq!(b.public.scalar_mul(&ca, &big(2)).unwrap_err(), PaillierError::KeyMismatch);
    }

    #[test]
    fn crt_and_textbook_decryption_agree() {
        let pair = keygen(128, &mut rng(16)).unwrap();
        let mut r = rng(17);
        for _ in 0..50 {
            let m = r.gen_biguint_below(pair.public.n());
            let c = pair.public.encrypt(&m, &mut r).unwrap();
            assert_eq!(pair.private.decrypt_textbook(c.value()), m);
            assert_eq!(pair.private.decrypt(&c).unwrap(), m);
        }
    }

    #[test]
    fn key_json_round_trip() {
        let pair = keygen(64, &mut rng(18)).unwrap();
        let text = pair.to_json();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["bits"], 64);
        assert_eq!(value["n"], to_hex(pair.public.n()));
        let parsed = KeyPair::from_json(&text).unwrap();
        assert_eq!(parsed.public, pair.public);
        let mut r = rng(19);
        let c = pair.public.encrypt(&big(42), &mut r).unwrap();
        assert_eq!(parsed.private.decrypt(&c).unwrap(), big(42));

        let public_only = pair.public.to_json();
        let value: serde_json::Value = serde_json::from_str(&public_only).unwrap();
        assert!(value.get("lambda").is_none() && value.get("mu").is_none());
        assert_eq!(PublicKey::from_json(&public_only).unwrap(), pair.public);
        assert!(KeyPair::from_json(&public_only).is_err());
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        let mut r = rng(20);
        for n in 0u32..5000 {
            let slow = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_probable_prime(&big(n as u64), 10, &mut r), slow, "n = {n}");
        }
        // Carmichael numbers
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&big(n), MILLER_RABIN_ROUNDS, &mut r));
        }
    }
}
