"""Pluggable signature and AEAD schemes.

The architecture only needs the interfaces: 32-byte verification keys with
64-byte signatures, and an AEAD with 12-byte nonces and 16-byte tags. Real
implementations are Ed25519 and AES-GCM-128 from the `cryptography` package.
Each has a deterministic test double with the same shapes; the doubles are
NOT secure (the MAC-style signature double is verifier-forgeable by design)
and exist so the suite can run fast and byte-reproducibly.

Key generation draws from the caller-supplied seeded RNG, never from OS
entropy, so whole simulations replay exactly.
"""

import hashlib
import hmac

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import EnclaveSimError

PUBLIC_KEY_BYTES = 32
SIGNATURE_BYTES = 64
AEAD_KEY_BYTES = 16
NONCE_BYTES = 12
TAG_BYTES = 16


class TamperDetected(EnclaveSimError):
    """AEAD open failed: ciphertext, tag, nonce, or associated data does not
    match what was sealed."""


class Ed25519Scheme:
    name = "ed25519"

    def generate_keypair(self, rng):
        seed = rng.randbytes(PUBLIC_KEY_BYTES)
        private = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
        public = private.public_key().public_bytes_raw()
        return seed, public

    def sign(self, private_key, message):
        return ed25519.Ed25519PrivateKey.from_private_bytes(private_key).sign(message)

    def verify(self, public_key, message, signature):
        if len(signature) != SIGNATURE_BYTES or len(public_key) != PUBLIC_KEY_BYTES:
            return False
        try:
            ed25519.Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


class MacSignatureDouble:
    """Test double: the 'public' key equals the MAC key, sign/verify are
    HMAC-SHA512 truncated to the signature width. Deterministic and fast;
    offers zero security against a malicious verifier."""

    name = "mac-double"

    def generate_keypair(self, rng):
        key = rng.randbytes(PUBLIC_KEY_BYTES)
        return key, key

    def sign(self, private_key, message):
        return hmac.new(private_key, message, hashlib.sha512).digest()[:SIGNATURE_BYTES]

    def verify(self, public_key, message, signature):
        if len(signature) != SIGNATURE_BYTES:
            return False
        expected = self.sign(public_key, message)
        return hmac.compare_digest(expected, signature)


class AesGcmScheme:
    name = "aes-gcm"

    def generate_key(self, rng):
        return rng.randbytes(AEAD_KEY_BYTES)

    def encrypt(self, key, nonce, plaintext, aad):
        sealed = AESGCM(key).encrypt(nonce, plaintext, aad)
        return sealed[:-TAG_BYTES], sealed[-TAG_BYTES:]

    def decrypt(self, key, nonce, ciphertext, tag, aad):
        try:
            return AESGCM(key).decrypt(nonce, ciphertext + tag, aad)
        except Exception as exc:
            raise TamperDetected("sealed blob failed authentication") from exc


class StreamAeadDouble:
    """Test double: SHA-256 counter keystream plus a truncated-hash tag.
    Deterministic, tamper-evident, not constant-time, not for real use."""

    name = "stream-double"

    def generate_key(self, rng):
        return rng.randbytes(AEAD_KEY_BYTES)

    def _keystream(self, key, nonce, length):
        out = bytearray()
        counter = 0
        while len(out) < length:
            out += hashlib.sha256(key + nonce + counter.to_bytes(4, "little")).digest()
            counter += 1
        return bytes(out[:length])

    def _tag(self, key, nonce, ciphertext, aad):
        material = (b"tag" + key + nonce + len(aad).to_bytes(4, "little")
                    + aad + ciphertext)
        return hashlib.sha256(material).digest()[:TAG_BYTES]

    def encrypt(self, key, nonce, plaintext, aad):
        stream = self._keystream(key, nonce, len(plaintext))
        ciphertext = bytes(a ^ b for a, b in zip(plaintext, stream))
        return ciphertext, self._tag(key, nonce, ciphertext, aad)

    def decrypt(self, key, nonce, ciphertext, tag, aad):
        expected = self._tag(key, nonce, ciphertext, aad)
        if not hmac.compare_digest(expected, tag):
            raise TamperDetected("sealed blob failed authentication")
        stream = self._keystream(key, nonce, len(ciphertext))
        return bytes(a ^ b for a, b in zip(ciphertext, stream))


_SIGNATURE_SCHEMES = {s.name: s for s in (Ed25519Scheme(), MacSignatureDouble())}
_AEAD_SCHEMES = {s.name: s for s in (AesGcmScheme(), StreamAeadDouble())}

# the two ready-made backend pairings scenarios select by name
BACKENDS = {
    "real": (_SIGNATURE_SCHEMES["ed25519"], _AEAD_SCHEMES["aes-gcm"]),
    "double": (_SIGNATURE_SCHEMES["mac-double"], _AEAD_SCHEMES["stream-double"]),
}


def signature_scheme(name):
    return _SIGNATURE_SCHEMES[name]


def aead_scheme(name):
    return _AEAD_SCHEMES[name]


def backend(name):
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown crypto backend {name!r}; "
                         f"choose from {sorted(BACKENDS)}") from None
