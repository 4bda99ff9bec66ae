#pragma once

// Fixed-dimension vectors for n-grams. Three interchangeable backends: a
// hashed character-trigram embedder (self-contained), a TSV-backed store,
// and an HTTP client with an on-disk cache.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "features.hpp"
#include "httplib.h"
#include "json.hpp"
#include "logistic.hpp"
#include "util.hpp"

namespace hfphen {

using Embedding = std::vector<float>;

class EmbeddingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    virtual Embedding embed(const std::string& ngram) const = 0;
    /// Batch entry point; backends with per-call overhead override it.
    virtual std::vector<Embedding> embed_many(std::span<const std::string> ngrams) const {
        std::vector<Embedding> out;
        out.reserve(ngrams.size());
        for (const auto& g : ngrams) out.push_back(embed(g));
        return out;
    }
    virtual std::string kind() const = 0;
};

/// Character 3-grams of " " + text + " " hashed into signed buckets, then
/// L2-normalized. Texts shorter than a trigram use the padded string itself.
class HashedEmbedder final : public EmbeddingProvider {
public:
    HashedEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
        if (dim == 0) throw std::invalid_argument("HashedEmbedder: dim must be positive");
    }
    std::size_t dim() const override { return dim_; }
    std::uint64_t seed() const { return seed_; }
    std::string kind() const override { return "hashed"; }

    Embedding embed(const std::string& ngram) const override {
        std::vector<double> acc(dim_, 0.0);
        if (ngram.empty()) return Embedding(dim_, 0.0f);
        const std::u32string padded = U" " + utf8_decode(ngram) + U" ";
        const std::size_t n = padded.size() >= 3 ? padded.size() - 2 : 1;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string gram = utf8_encode(std::u32string_view(padded).substr(i, 3));
            const std::uint64_t h = splitmix64(fnv1a64(gram) ^ seed_);
            acc[h % dim_] += (h >> 63) ? -1.0 : 1.0;
        }
        double norm2 = 0;
        for (double v : acc) norm2 += v * v;
        Embedding out(dim_);
        if (norm2 == 0) {
            // Every contribution cancelled; fall back to one deterministic unit bucket.
            out.assign(dim_, 0.0f);
            out[splitmix64(fnv1a64(ngram) ^ seed_) % dim_] = 1.0f;
            return out;
        }
        const double norm = std::sqrt(norm2);
        for (std::size_t d = 0; d < dim_; ++d) out[d] = static_cast<float>(acc[d] / norm);
        return out;
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

namespace detail {

inline std::string format_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

inline Embedding parse_float_list(std::string_view s, const std::string& where) {
    Embedding out;
    for (const auto& part : split(s, ',')) {
        const std::string t(trim(part));
        char* end = nullptr;
        const float v = std::strtof(t.c_str(), &end);
        if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v))
            throw EmbeddingError(where + ": bad number '" + t + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

/// In-memory n-gram -> vector map loaded from a TSV store.
/// Format: first line `dim=<D>`, then `ngram<TAB>v1,v2,...` per row.
class FileEmbedder final : public EmbeddingProvider {
public:
    FileEmbedder(std::size_t dim, std::unordered_map<std::string, Embedding> table, std::filesystem::path path = {})
        : dim_(dim), table_(std::move(table)), path_(std::move(path)) {
        for (const auto& [g, v] : table_)
            if (v.size() != dim_) throw EmbeddingError("FileEmbedder: vector for '" + g + "' has wrong dimension");
    }

    static FileEmbedder parse(std::string_view text, const std::filesystem::path& origin = "store.tsv") {
        const auto lines = split(text, '\n');
        if (lines.empty() || trim(lines[0]).substr(0, 4) != "dim=")
            throw EmbeddingError(origin.string() + ":1: missing dim=<D> header");
        const std::string dim_s(trim(lines[0]).substr(4));
        std::size_t dim = 0;
        try {
            dim = std::stoul(dim_s);
        } catch (const std::exception&) {
            throw EmbeddingError(origin.string() + ":1: bad dimension '" + dim_s + "'");
        }
        if (dim == 0) throw EmbeddingError(origin.string() + ":1: dimension must be positive");
        std::unordered_map<std::string, Embedding> table;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            const std::string where = origin.string() + ":" + std::to_string(i + 1);
            const auto tab = lines[i].find('\t');
            if (tab == std::string::npos) throw EmbeddingError(where + ": missing tab");
            std::string g = lines[i].substr(0, tab);
            Embedding v = detail::parse_float_list(std::string_view(lines[i]).substr(tab + 1), where);
            if (v.size() != dim)
                throw EmbeddingError(where + ": row has " + std::to_string(v.size()) + " values, header says " +
                                     std::to_string(dim));
            if (!table.emplace(std::move(g), std::move(v)).second) throw EmbeddingError(where + ": duplicate n-gram");
        }
        return FileEmbedder(dim, std::move(table), origin);
    }

    static FileEmbedder load(const std::filesystem::path& path) { return parse(read_file(path), path); }

    std::size_t dim() const override { return dim_; }
    std::string kind() const override { return "file"; }
    std::size_t size() const { return table_.size(); }
    bool contains(const std::string& g) const { return table_.count(g) > 0; }

    Embedding embed(const std::string& ngram) const override {
        auto it = table_.find(ngram);
        if (it == table_.end()) throw EmbeddingError("FileEmbedder: unknown n-gram '" + ngram + "'");
        return it->second;
    }

private:
    std::size_t dim_;
    std::unordered_map<std::string, Embedding> table_;
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

/// Sends one request body, returns the response body; throws on failure.
class EmbedTransport {
public:
    virtual ~EmbedTransport() = default;
    virtual std::string post(const std::string& body) = 0;
};

/// Plain-HTTP transport via cpp-httplib. `url` is http://host[:port][/path].
class HttpTransport final : public EmbedTransport {
public:
    HttpTransport(const std::string& url, double timeout_seconds);
    std::string post(const std::string& body) override;

private:
    std::string host_port_;
    std::string path_;
    double timeout_;
};

struct RemoteOptions {
    std::string url;
    double timeout_seconds = 30;
    std::filesystem::path cache_dir;
    std::size_t batch_size = 64;
    int max_attempts = 3;
};

/// Batches uncached n-grams into POST requests of a JSON string array and
/// expects a JSON array of float arrays back. Every fetched vector is cached
/// as one file per n-gram; cache writes are atomic and only happen after the
/// whole response validated.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    RemoteEmbedder(std::size_t dim, RemoteOptions opt, std::shared_ptr<EmbedTransport> transport = nullptr)
        : dim_(dim), opt_(std::move(opt)), transport_(std::move(transport)) {
        if (dim_ == 0) throw std::invalid_argument("RemoteEmbedder: dim must be positive");
        if (opt_.batch_size == 0) throw std::invalid_argument("RemoteEmbedder: batch size must be positive");
        if (opt_.max_attempts < 1) throw std::invalid_argument("RemoteEmbedder: max_attempts must be >= 1");
        if (!transport_) transport_ = std::make_shared<HttpTransport>(opt_.url, opt_.timeout_seconds);
        if (!opt_.cache_dir.empty()) std::filesystem::create_directories(opt_.cache_dir);
    }

    std::size_t dim() const override { return dim_; }
    std::string kind() const override { return "remote"; }

    Embedding embed(const std::string& ngram) const override {
        const std::string one[] = {ngram};
        return embed_many(one).front();
    }

    std::vector<Embedding> embed_many(std::span<const std::string> ngrams) const override {
        std::vector<Embedding> out(ngrams.size());
        std::vector<std::size_t> missing;
        for (std::size_t i = 0; i < ngrams.size(); ++i) {
            if (auto v = cached(ngrams[i])) out[i] = std::move(*v);
            else missing.push_back(i);
        }
        for (std::size_t b = 0; b < missing.size(); b += opt_.batch_size) {
            const std::size_t e = std::min(missing.size(), b + opt_.batch_size);
            std::vector<std::string> batch;
            for (std::size_t k = b; k < e; ++k) batch.push_back(ngrams[missing[k]]);
            auto vecs = fetch(batch, b / opt_.batch_size);
            for (std::size_t k = b; k < e; ++k) {
                store(ngrams[missing[k]], vecs[k - b]);
                out[missing[k]] = std::move(vecs[k - b]);
            }
        }
        return out;
    }

    std::filesystem::path cache_path(const std::string& ngram) const {
        return opt_.cache_dir / (hex64(fnv1a64(ngram)) + ".vec");
    }

private:
    std::optional<Embedding> cached(const std::string& ngram) const {
        {
            std::lock_guard lock(mu_);
            if (auto it = memory_.find(ngram); it != memory_.end()) return it->second;
        }
        if (opt_.cache_dir.empty()) return std::nullopt;
        const auto path = cache_path(ngram);
        if (!std::filesystem::exists(path)) return std::nullopt;
        const std::string text = read_file(path);
        const auto nl = text.find('\n');
        // The file carries the n-gram itself so hash collisions are detected.
        if (nl == std::string::npos || text.substr(0, nl) != ngram) return std::nullopt;
        std::string body = text.substr(nl + 1);
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
        Embedding v = detail::parse_float_list(body, path.string());
        if (v.size() != dim_) throw EmbeddingError(path.string() + ": cached vector has wrong dimension");
        std::lock_guard lock(mu_);
        memory_.emplace(ngram, v);
        return v;
    }

    void store(const std::string& ngram, const Embedding& v) const {
        {
            std::lock_guard lock(mu_);
            memory_.emplace(ngram, v);
        }
        if (opt_.cache_dir.empty()) return;
        std::string text = ngram + '\n';
        for (std::size_t d = 0; d < v.size(); ++d) {
            if (d) text += ',';
            text += detail::format_float(v[d]);
        }
        text += '\n';
        write_file_atomic(cache_path(ngram), text);
    }

    std::vector<Embedding> fetch(const std::vector<std::string>& batch, std::size_t batch_index) const {
        const std::string body = nlohmann::json(batch).dump();
        std::string last_error;
        for (int attempt = 1; attempt <= opt_.max_attempts; ++attempt) {
            try {
                const auto reply = nlohmann::json::parse(transport_->post(body));
                if (!reply.is_array() || reply.size() != batch.size())
                    throw EmbeddingError("response is not an array of " + std::to_string(batch.size()) + " vectors");
                std::vector<Embedding> vecs;
                for (const auto& row : reply) {
                    if (!row.is_array() || row.size() != dim_)
                        throw EmbeddingError("response vector does not have dimension " + std::to_string(dim_));
                    Embedding v;
                    for (const auto& x : row) {
                        if (!x.is_number()) throw EmbeddingError("response vector holds a non-number");
                        v.push_back(x.get<float>());
                    }
                    vecs.push_back(std::move(v));
                }
                return vecs;
            } catch (const std::exception& e) {
                last_error = e.what();
            }
        }
        const std::string first = batch.front(), last = batch.back();
        throw EmbeddingError("RemoteEmbedder: batch " + std::to_string(batch_index) + " ('" + first + "' .. '" + last +
                             "', " + std::to_string(batch.size()) + " n-grams) failed after " +
                             std::to_string(opt_.max_attempts) + " attempts: " + last_error);
    }

    std::size_t dim_;
    RemoteOptions opt_;
    std::shared_ptr<EmbedTransport> transport_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, Embedding> memory_;
};

// ---------------------------------------------------------------------------
// Batch embedding and stores
// ---------------------------------------------------------------------------

/// Row i = embed(ngrams[i]); each distinct string is computed once.
inline Matrix embed_batch(const EmbeddingProvider& provider, std::span<const std::string> ngrams) {
    std::unordered_map<std::string, std::size_t> first;
    std::vector<std::string> unique;
    std::vector<std::size_t> slot(ngrams.size());
    for (std::size_t i = 0; i < ngrams.size(); ++i) {
        auto [it, inserted] = first.emplace(ngrams[i], unique.size());
        if (inserted) unique.push_back(ngrams[i]);
        slot[i] = it->second;
    }
    const auto vecs = provider.embed_many(unique);
    Matrix out(static_cast<Eigen::Index>(ngrams.size()), static_cast<Eigen::Index>(provider.dim()));
    for (std::size_t i = 0; i < ngrams.size(); ++i) {
        const auto& v = vecs[slot[i]];
        if (v.size() != provider.dim()) throw EmbeddingError("embed_batch: provider returned wrong dimension");
        for (std::size_t d = 0; d < v.size(); ++d)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = static_cast<double>(v[d]);
    }
    return out;
}

inline std::string store_text(const EmbeddingProvider& provider, std::span<const std::string> ngrams) {
    std::string text = "dim=" + std::to_string(provider.dim()) + '\n';
    const auto vecs = provider.embed_many(ngrams);
    for (std::size_t i = 0; i < ngrams.size(); ++i) {
        if (ngrams[i].find_first_of("\t\n") != std::string::npos)
            throw EmbeddingError("export_store: n-gram contains a tab or newline");
        text += ngrams[i];
        text += '\t';
        for (std::size_t d = 0; d < vecs[i].size(); ++d) {
            if (d) text += ',';
            text += detail::format_float(vecs[i][d]);
        }
        text += '\n';
    }
    return text;
}

/// Writes every vocabulary n-gram's vector in id order.
inline void export_store(const EmbeddingProvider& provider, const Vocabulary& vocab, const std::filesystem::path& path) {
    if (vocab.empty()) throw std::invalid_argument("export_store: empty vocabulary");
    write_file_atomic(path, store_text(provider, vocab.ngrams()));
}

/// Loads a store; when `expected_dim` is non-zero a different header is an error.
inline FileEmbedder import_store(const std::filesystem::path& path, std::size_t expected_dim = 0) {
    auto fe = FileEmbedder::load(path);
    if (expected_dim && fe.dim() != expected_dim)
        throw EmbeddingError("import_store: " + path.string() + " has dim " + std::to_string(fe.dim()) + ", expected " +
                             std::to_string(expected_dim));
    return fe;
}

inline HttpTransport::HttpTransport(const std::string& url, double timeout_seconds) : timeout_(timeout_seconds) {
    if (url.rfind("http://", 0) != 0) throw EmbeddingError("RemoteEmbedder: only http:// URLs are supported: '" + url + "'");
    const auto slash = url.find('/', 7);
    host_port_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

inline std::string HttpTransport::post(const std::string& body) {
    httplib::Client client(host_port_);
    const auto secs = static_cast<time_t>(timeout_);
    const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(path_, body, "application/json");
    if (!res) throw EmbeddingError("HTTP request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw EmbeddingError("HTTP status " + std::to_string(res->status));
    return res->body;
}

}  // namespace hfphen
