// Peer identity and message signing.
//
// Peers are identified by a 32-byte public key and sign messages with a
// 64-byte detached signature. Two interchangeable schemes sit behind the
// same interface:
//   * Ed25519 (libsodium) — the real thing, deterministic by construction.
//   * NullHash — a keyed BLAKE2b MAC keyed by the public key. Not secure,
//     but byte-compatible and ~100x faster; meant for large simulation runs
//     and fast tests. The scheme is chosen when the CryptoSuite is built,
//     never through global state.

#pragma once

#include <sodium.h>

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>

namespace coopnet {

struct PeerId {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const PeerId&) const = default;

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (auto b : bytes) {
            out.push_back(digits[b >> 4]);
            out.push_back(digits[b & 0xf]);
        }
        return out;
    }
};

struct PeerIdHash {
    std::size_t operator()(const PeerId& id) const {
        std::uint64_t h;
        std::memcpy(&h, id.bytes.data(), sizeof(h));
        std::uint64_t t;
        std::memcpy(&t, id.bytes.data() + 8, sizeof(t));
        return static_cast<std::size_t>(h ^ (t * 0x9e3779b97f4a7c15ULL));
    }
};

struct Signature {
    std::array<std::uint8_t, 64> bytes{};

    auto operator<=>(const Signature&) const = default;
};

enum class CryptoMode { Ed25519, NullHash };

struct Keypair {
    PeerId peer_id;
    std::array<std::uint8_t, 64> secret{};  // Ed25519 secret key; unused extra space in NullHash mode
    CryptoMode mode = CryptoMode::Ed25519;
};

namespace detail {

inline void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("sodium_init failed");
}

inline std::array<std::uint8_t, 8> le64(std::uint64_t v) {
    std::array<std::uint8_t, 8> out{};
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
    return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> blake2b(std::span<const std::uint8_t> msg,
                                    std::span<const std::uint8_t> key) {
    static_assert(N >= crypto_generichash_BYTES_MIN && N <= crypto_generichash_BYTES_MAX);
    ensure_sodium();
    std::array<std::uint8_t, N> out{};
    crypto_generichash(out.data(), N, msg.data(), msg.size(),
                       key.empty() ? nullptr : key.data(), key.size());
    return out;
}

inline std::span<const std::uint8_t> str_key(const char* s) {
    return {reinterpret_cast<const std::uint8_t*>(s), std::strlen(s)};
}

}  // namespace detail

class CryptoSuite {
  public:
    explicit CryptoSuite(CryptoMode mode = CryptoMode::Ed25519) : mode_(mode) {
        detail::ensure_sodium();
    }

    CryptoMode mode() const { return mode_; }

    // Same seed always yields the same keypair.
    Keypair generate_keypair(std::uint64_t seed) const {
        const auto seed_bytes = detail::le64(seed);
        Keypair kp;
        kp.mode = mode_;
        if (mode_ == CryptoMode::Ed25519) {
            const auto sk_seed = detail::blake2b<32>(seed_bytes, detail::str_key("coopnet.keygen.v1"));
            crypto_sign_seed_keypair(kp.peer_id.bytes.data(), kp.secret.data(), sk_seed.data());
        } else {
            const auto pk = detail::blake2b<32>(seed_bytes, detail::str_key("coopnet.null.pk.v1"));
            kp.peer_id.bytes = pk;
            std::memcpy(kp.secret.data(), pk.data(), 32);
            std::memcpy(kp.secret.data() + 32, pk.data(), 32);
        }
        return kp;
    }

    Signature sign(const Keypair& kp, std::span<const std::uint8_t> message) const {
        if (message.empty()) throw std::invalid_argument("sign: message must be non-empty");
        if (kp.mode != mode_) throw std::invalid_argument("sign: keypair scheme mismatch");
        Signature sig;
        if (mode_ == CryptoMode::Ed25519) {
            crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(),
                                 kp.secret.data());
        } else {
            sig.bytes = detail::blake2b<64>(message, kp.peer_id.bytes);
        }
        return sig;
    }

    // Never throws: malformed input is just an invalid signature.
    bool verify(const PeerId& peer, std::span<const std::uint8_t> message,
                const Signature& sig) const {
        if (message.empty()) return false;
        if (mode_ == CryptoMode::Ed25519) {
            return crypto_sign_verify_detached(sig.bytes.data(), message.data(), message.size(),
                                               peer.bytes.data()) == 0;
        }
        const auto expected = detail::blake2b<64>(message, peer.bytes);
        return sodium_memcmp(expected.data(), sig.bytes.data(), expected.size()) == 0;
    }

  private:
    CryptoMode mode_;
};

}  // namespace coopnet
