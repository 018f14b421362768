// Contribution certificates and the subjective contribution graph.
//
// A certificate is a signed statement "peer `subject` has provided me,
// `issuer`, a cumulative utility of `weight` as of my local round `round`".
// Peers keep only the newest certificate per (issuer, subject) pair; merging
// two stores is therefore a commutative, idempotent join, which is what lets
// anti-entropy gossip converge regardless of delivery order.
//
// Wire format (big-endian), fixed 145 bytes:
//   version(1) | issuer(32) | subject(32) | weight u64(8) | round u64(8) | signature(64)
// The signature covers the 80-byte (issuer, subject, weight, round) block.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "coopnet/identity.hpp"
#include "coopnet/rng.hpp"

namespace coopnet {

// Non-negative utility as 32.32 fixed point. Integer arithmetic keeps
// certificate bytes and byte counters identical across platforms.
class Weight {
  public:
    static constexpr int kFracBits = 32;

    constexpr Weight() = default;

    static constexpr Weight from_raw(std::uint64_t raw) {
        Weight w;
        w.raw_ = raw;
        return w;
    }
    static constexpr Weight from_units(std::uint64_t units) {
        return from_raw(units << kFracBits);
    }

    constexpr std::uint64_t raw() const { return raw_; }
    constexpr bool is_zero() const { return raw_ == 0; }
    double to_double() const { return static_cast<double>(raw_) * 0x1.0p-32; }

    constexpr Weight& operator+=(Weight other) {
        raw_ += other.raw_;
        return *this;
    }
    friend constexpr Weight operator+(Weight a, Weight b) { return from_raw(a.raw_ + b.raw_); }
    friend constexpr Weight operator*(Weight a, std::uint64_t k) { return from_raw(a.raw_ * k); }
    auto operator<=>(const Weight&) const = default;

  private:
    std::uint64_t raw_ = 0;
};

struct ContributionCertificate {
    PeerId issuer;
    PeerId subject;
    Weight weight;
    std::uint64_t round = 0;
    Signature signature;

    bool operator==(const ContributionCertificate&) const = default;
};

inline constexpr std::uint8_t kCertificateVersion = 0x01;
inline constexpr std::size_t kCertificateWireSize = 1 + 32 + 32 + 8 + 8 + 64;  // 145
static_assert(kCertificateWireSize <= 220);

namespace detail {

inline void put_u64_be(std::uint8_t* out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * (7 - i)));
}

inline std::uint64_t get_u64_be(const std::uint8_t* in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in[i];
    return v;
}

}  // namespace detail

// The 80-byte block the issuer signs.
inline std::array<std::uint8_t, 80> certificate_signing_payload(const PeerId& issuer,
                                                                const PeerId& subject,
                                                                Weight weight,
                                                                std::uint64_t round) {
    std::array<std::uint8_t, 80> payload{};
    std::copy(issuer.bytes.begin(), issuer.bytes.end(), payload.begin());
    std::copy(subject.bytes.begin(), subject.bytes.end(), payload.begin() + 32);
    detail::put_u64_be(payload.data() + 64, weight.raw());
    detail::put_u64_be(payload.data() + 72, round);
    return payload;
}

inline ContributionCertificate create_certificate(const CryptoSuite& suite, const Keypair& issuer,
                                                  const PeerId& subject, Weight cumulative_weight,
                                                  std::uint64_t round) {
    if (issuer.peer_id == subject)
        throw std::invalid_argument("create_certificate: self-certificates are not allowed");
    ContributionCertificate cert;
    cert.issuer = issuer.peer_id;
    cert.subject = subject;
    cert.weight = cumulative_weight;
    cert.round = round;
    const auto payload = certificate_signing_payload(cert.issuer, cert.subject, cert.weight, cert.round);
    cert.signature = suite.sign(issuer, payload);
    return cert;
}

inline bool verify_certificate(const CryptoSuite& suite, const ContributionCertificate& cert) {
    if (cert.issuer == cert.subject) return false;
    const auto payload = certificate_signing_payload(cert.issuer, cert.subject, cert.weight, cert.round);
    return suite.verify(cert.issuer, payload, cert.signature);
}

inline std::array<std::uint8_t, kCertificateWireSize> encode_certificate(
    const ContributionCertificate& cert) {
    std::array<std::uint8_t, kCertificateWireSize> out{};
    out[0] = kCertificateVersion;
    std::copy(cert.issuer.bytes.begin(), cert.issuer.bytes.end(), out.begin() + 1);
    std::copy(cert.subject.bytes.begin(), cert.subject.bytes.end(), out.begin() + 33);
    detail::put_u64_be(out.data() + 65, cert.weight.raw());
    detail::put_u64_be(out.data() + 73, cert.round);
    std::copy(cert.signature.bytes.begin(), cert.signature.bytes.end(), out.begin() + 81);
    return out;
}

// nullopt on anything that is not an exact, well-versioned 145-byte record.
// Signature validity is checked separately by verify_certificate.
inline std::optional<ContributionCertificate> decode_certificate(std::span<const std::uint8_t> buf) {
    if (buf.size() != kCertificateWireSize) return std::nullopt;
    if (buf[0] != kCertificateVersion) return std::nullopt;
    ContributionCertificate cert;
    std::copy(buf.begin() + 1, buf.begin() + 33, cert.issuer.bytes.begin());
    std::copy(buf.begin() + 33, buf.begin() + 65, cert.subject.bytes.begin());
    cert.weight = Weight::from_raw(detail::get_u64_be(buf.data() + 65));
    cert.round = detail::get_u64_be(buf.data() + 73);
    std::copy(buf.begin() + 81, buf.begin() + 145, cert.signature.bytes.begin());
    return cert;
}

// Per-round utility bookkeeping before certificates are issued.
using UtilityAccumulator = std::map<PeerId, Weight>;

inline void record_utility(UtilityAccumulator& accumulator, const PeerId& subject, Weight delta) {
    accumulator[subject] += delta;
}

enum class IngestResult { Inserted, Replaced, StaleIgnored, Invalid };

struct ContributionGraph {
    std::set<PeerId> nodes;
    std::map<PeerId, std::map<PeerId, Weight>> out_edges;  // beneficiary -> contributor -> weight > 0

    void add_node(const PeerId& id) { nodes.insert(id); }

    void add_edge(const PeerId& from, const PeerId& to, Weight w) {
        if (w.is_zero()) throw std::invalid_argument("ContributionGraph: edge weight must be positive");
        nodes.insert(from);
        nodes.insert(to);
        out_edges[from][to] = w;
    }

    bool has_node(const PeerId& id) const { return nodes.count(id) != 0; }

    std::size_t node_count() const { return nodes.size(); }

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& [_, row] : out_edges) n += row.size();
        return n;
    }

    const std::map<PeerId, Weight>* edges_from(const PeerId& id) const {
        auto it = out_edges.find(id);
        return it == out_edges.end() ? nullptr : &it->second;
    }

    bool operator==(const ContributionGraph&) const = default;
};

// Latest-certificate store. Conflicts for one (issuer, subject) pair resolve
// by the strictly larger (round, fnv64(signature), signature) key, so any
// ingest order ends in the same state.
class CertificateStore {
  public:
    explicit CertificateStore(CryptoSuite suite) : suite_(suite) {}

    IngestResult ingest(const ContributionCertificate& cert) {
        const auto key = std::make_pair(cert.issuer, cert.subject);
        auto it = latest_.find(key);
        if (it != latest_.end() && it->second == cert) {
            // Byte-identical to a certificate that already passed
            // verification; no need to verify again.
            return IngestResult::StaleIgnored;
        }
        if (!verify_certificate(suite_, cert)) return IngestResult::Invalid;
        if (it == latest_.end()) {
            latest_.emplace(key, cert);
            ingested_bytes_ += kCertificateWireSize;
            return IngestResult::Inserted;
        }
        if (wins_over(cert, it->second)) {
            it->second = cert;
            ingested_bytes_ += kCertificateWireSize;
            return IngestResult::Replaced;
        }
        return IngestResult::StaleIgnored;
    }

    std::size_t size() const { return latest_.size(); }
    bool empty() const { return latest_.empty(); }
    std::uint64_t ingested_bytes() const { return ingested_bytes_; }
    std::uint64_t stored_bytes() const { return latest_.size() * kCertificateWireSize; }

    std::optional<ContributionCertificate> get(const PeerId& issuer, const PeerId& subject) const {
        auto it = latest_.find(std::make_pair(issuer, subject));
        if (it == latest_.end()) return std::nullopt;
        return it->second;
    }

    auto begin() const { return latest_.begin(); }
    auto end() const { return latest_.end(); }

    // Uniform sample without replacement, at most k certificates.
    std::vector<ContributionCertificate> select_gossip_batch(std::size_t k, Rng& rng) const {
        std::vector<ContributionCertificate> out;
        if (k == 0 || latest_.empty()) return out;
        const auto picks = rng.sample_indices(latest_.size(), k);
        out.reserve(picks.size());
        auto it = latest_.begin();
        std::size_t pos = 0;
        for (std::size_t want : picks) {
            std::advance(it, static_cast<std::ptrdiff_t>(want - pos));
            pos = want;
            out.push_back(it->second);
        }
        return out;
    }

    // u32 count, then fixed-size records in canonical (issuer, subject) order.
    std::vector<std::uint8_t> dump() const {
        std::vector<std::uint8_t> out;
        out.reserve(4 + latest_.size() * kCertificateWireSize);
        const auto n = static_cast<std::uint32_t>(latest_.size());
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * (3 - i))));
        for (const auto& [_, cert] : latest_) {
            const auto enc = encode_certificate(cert);
            out.insert(out.end(), enc.begin(), enc.end());
        }
        return out;
    }

    static std::optional<CertificateStore> load(std::span<const std::uint8_t> bytes,
                                                const CryptoSuite& suite) {
        if (bytes.size() < 4) return std::nullopt;
        std::uint32_t n = 0;
        for (int i = 0; i < 4; ++i) n = (n << 8) | bytes[static_cast<std::size_t>(i)];
        if (bytes.size() != 4 + static_cast<std::size_t>(n) * kCertificateWireSize) return std::nullopt;
        CertificateStore store(suite);
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto cert =
                decode_certificate(bytes.subspan(4 + static_cast<std::size_t>(i) * kCertificateWireSize,
                                                 kCertificateWireSize));
            if (!cert) return std::nullopt;
            store.ingest(*cert);
        }
        return store;
    }

  private:
    static bool wins_over(const ContributionCertificate& a, const ContributionCertificate& b) {
        if (a.round != b.round) return a.round > b.round;
        const auto ha = fnv1a64(a.signature.bytes.data(), a.signature.bytes.size());
        const auto hb = fnv1a64(b.signature.bytes.data(), b.signature.bytes.size());
        if (ha != hb) return ha > hb;
        return a.signature.bytes > b.signature.bytes;
    }

    CryptoSuite suite_;
    std::map<std::pair<PeerId, PeerId>, ContributionCertificate> latest_;
    std::uint64_t ingested_bytes_ = 0;
};

// Materialize the graph a peer can see in its store. Zero-weight
// certificates register the endpoints but no edge.
inline ContributionGraph graph_view(const CertificateStore& store,
                                    const std::set<PeerId>& local_peers = {}) {
    ContributionGraph g;
    for (const auto& id : local_peers) g.add_node(id);
    for (const auto& [key, cert] : store) {
        g.add_node(cert.issuer);
        g.add_node(cert.subject);
        if (!cert.weight.is_zero()) g.add_edge(cert.issuer, cert.subject, cert.weight);
    }
    return g;
}

}  // namespace coopnet
