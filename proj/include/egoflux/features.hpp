#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "egoflux/csv.hpp"
#include "egoflux/error.hpp"
#include "egoflux/random.hpp"
#include "egoflux/textpipe.hpp"

namespace egoflux {

/// Smoothed TF-IDF: idf_j = ln((1 + doc_count) / (1 + df_j)) + 1.
struct TfidfModel {
    std::map<std::string, std::size_t> vocabulary;  // token -> column, columns in token order
    std::vector<double> idf;
    std::size_t doc_count = 0;
    std::size_t min_df = 2;

    std::size_t dim() const { return idf.size(); }

    std::vector<std::string> tokens_by_column() const {
        std::vector<std::string> out(vocabulary.size());
        for (const auto& [tok, col] : vocabulary) out[col] = tok;
        return out;
    }

    friend bool operator==(const TfidfModel&, const TfidfModel&) = default;
};

struct SparseVec {
    std::vector<std::size_t> indices;  // strictly increasing
    std::vector<double> values;
    std::size_t dim = 0;

    bool empty() const { return indices.empty(); }

    double norm() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }
};

inline double smoothed_idf(std::size_t doc_count, std::size_t df) {
    return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + static_cast<double>(df))) + 1.0;
}

inline TfidfModel fit_tfidf(const std::vector<TokenDoc>& docs, std::size_t min_df = 2) {
    if (std::all_of(docs.begin(), docs.end(), [](const TokenDoc& d) { return d.empty(); })) {
        throw InvalidArgument("fit_tfidf: no nonempty documents");
    }
    std::map<std::string, std::size_t> df;
    for (const auto& doc : docs) {
        std::vector<std::string> uniq = doc.tokens;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (const auto& t : uniq) ++df[t];
    }
    TfidfModel model;
    model.doc_count = docs.size();
    model.min_df = min_df;
    for (const auto& [tok, count] : df) {
        if (count < min_df) continue;
        model.vocabulary.emplace(tok, model.idf.size());
        model.idf.push_back(smoothed_idf(model.doc_count, count));
    }
    if (model.vocabulary.empty()) throw InvalidArgument("fit_tfidf: vocabulary is empty after min_df filtering");
    return model;
}

/// Raw counts times idf, L2-normalized. Out-of-vocabulary tokens are ignored;
/// a document with no in-vocabulary tokens maps to the zero vector.
inline SparseVec transform_tfidf(const TfidfModel& model, const TokenDoc& doc) {
    std::map<std::size_t, double> acc;
    for (const auto& t : doc.tokens) {
        if (auto it = model.vocabulary.find(t); it != model.vocabulary.end()) acc[it->second] += 1.0;
    }
    SparseVec v;
    v.dim = model.dim();
    for (auto& [col, count] : acc) {
        v.indices.push_back(col);
        v.values.push_back(count * model.idf[col]);
    }
    const double n = v.norm();
    if (n > 0.0) {
        for (double& x : v.values) x /= n;
    }
    return v;
}

inline constexpr int kTfidfModelVersion = 1;

inline nlohmann::json tfidf_model_to_json(const TfidfModel& m) {
    nlohmann::json j;
    j["format"] = "egoflux.tfidf_model";
    j["version"] = kTfidfModelVersion;
    j["vocabulary"] = m.vocabulary;
    j["idf"] = m.idf;
    j["doc_count"] = m.doc_count;
    j["min_df"] = m.min_df;
    return j;
}

inline TfidfModel tfidf_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "egoflux.tfidf_model") throw ParseError("not a TF-IDF model");
    if (j.value("version", 0) != kTfidfModelVersion) throw ParseError("unsupported TF-IDF model version");
    TfidfModel m;
    m.vocabulary = j.at("vocabulary").get<std::map<std::string, std::size_t>>();
    m.idf = j.at("idf").get<std::vector<double>>();
    m.doc_count = j.at("doc_count").get<std::size_t>();
    m.min_df = j.at("min_df").get<std::size_t>();
    if (m.vocabulary.size() != m.idf.size()) throw ParseError("TF-IDF vocabulary and idf sizes differ");
    return m;
}

// ---------------------------------------------------------------------------
// Dense embeddings

enum class EmbeddingSource { external_file, tfidf_fallback };

inline std::string to_string(EmbeddingSource s) {
    return s == EmbeddingSource::external_file ? "external_file" : "tfidf_fallback";
}

struct EmbeddingSet {
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;
    EmbeddingSource source = EmbeddingSource::external_file;
    std::vector<std::string> missing_ids;  // requested docs without a vector

    const std::vector<double>& at(const std::string& id) const {
        auto it = vectors.find(id);
        if (it == vectors.end()) throw InvalidArgument("no embedding for id '" + id + "'");
        return it->second;
    }
    bool contains(const std::string& id) const { return vectors.count(id) > 0; }
};

enum class EmbeddingFormat { jsonl, csv };

inline EmbeddingFormat embedding_format_for(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0 ? EmbeddingFormat::csv
                                                                              : EmbeddingFormat::jsonl;
}

/// Reads every row of an embedding file (JSONL `{"id":..,"v":[..]}` or CSV
/// `id,v0,..,v{d-1}`), enforcing one shared dimension and finite components.
inline std::map<std::string, std::vector<double>> read_embedding_rows(std::istream& in, EmbeddingFormat format) {
    std::map<std::string, std::vector<double>> rows;
    std::size_t dim = 0;
    auto add = [&](std::string id, std::vector<double> v) {
        if (v.empty()) throw ParseError("embedding for id '" + id + "' is empty");
        if (dim == 0) dim = v.size();
        if (v.size() != dim) {
            throw ParseError("embedding dimension mismatch for id '" + id + "': expected " + std::to_string(dim) +
                             ", got " + std::to_string(v.size()));
        }
        for (double x : v) {
            if (!std::isfinite(x)) throw ParseError("non-finite embedding component for id '" + id + "'");
        }
        if (!rows.emplace(id, std::move(v)).second) throw ParseError("duplicate embedding id '" + id + "'");
    };
    if (format == EmbeddingFormat::jsonl) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
                add(obj.at("id").is_string() ? obj.at("id").get<std::string>() : obj.at("id").dump(),
                    obj.at("v").get<std::vector<double>>());
            } catch (const nlohmann::json::exception& e) {
                throw ParseError("embedding line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    } else {
        csv::Reader reader(in);
        auto header = reader.next();
        if (!header) return rows;
        while (auto rec = reader.next()) {
            if (rec->size() == 1 && rec->front().empty()) continue;
            if (reader.malformed() || rec->size() < 2) throw ParseError("malformed embedding CSV row");
            std::vector<double> v;
            for (std::size_t i = 1; i < rec->size(); ++i) {
                try {
                    std::size_t used = 0;
                    v.push_back(std::stod((*rec)[i], &used));
                    if (used != (*rec)[i].size()) throw std::invalid_argument("trailing");
                } catch (const std::exception&) {
                    throw ParseError("bad embedding value for id '" + rec->front() + "'");
                }
            }
            add(rec->front(), std::move(v));
        }
    }
    return rows;
}

/// Loads externally computed embeddings for `docs`. Extra rows are ignored.
/// Missing ids throw in strict mode and are listed in `missing_ids` otherwise.
inline EmbeddingSet load_embeddings(std::istream& in, EmbeddingFormat format, const std::vector<TokenDoc>& docs,
                                    bool strict = false) {
    auto rows = read_embedding_rows(in, format);
    EmbeddingSet set;
    set.source = EmbeddingSource::external_file;
    set.dim = rows.empty() ? 0 : rows.begin()->second.size();
    for (const auto& d : docs) {
        auto it = rows.find(d.post_id);
        if (it == rows.end()) {
            set.missing_ids.push_back(d.post_id);
        } else {
            set.vectors.emplace(it->first, it->second);
        }
    }
    if (strict && !set.missing_ids.empty()) {
        throw InvalidArgument("embeddings missing for " + std::to_string(set.missing_ids.size()) +
                              " id(s), first: '" + set.missing_ids.front() + "'");
    }
    return set;
}

inline EmbeddingSet load_embeddings(const std::string& path, const std::vector<TokenDoc>& docs, bool strict = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path);
    return load_embeddings(in, embedding_format_for(path), docs, strict);
}

inline void write_embeddings_jsonl(std::ostream& out, const EmbeddingSet& set) {
    for (const auto& [id, v] : set.vectors) {
        nlohmann::json j;
        j["id"] = id;
        j["v"] = v;
        out << j.dump() << '\n';
    }
}

/// Sparse document-term matrix of TF-IDF rows, one row per doc in order.
inline Eigen::SparseMatrix<double, Eigen::RowMajor> tfidf_matrix(const TfidfModel& model,
                                                                 const std::vector<TokenDoc>& docs) {
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t r = 0; r < docs.size(); ++r) {
        const SparseVec v = transform_tfidf(model, docs[r]);
        for (std::size_t i = 0; i < v.indices.size(); ++i) {
            trips.emplace_back(static_cast<int>(r), static_cast<int>(v.indices[i]), v.values[i]);
        }
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<Eigen::Index>(docs.size()),
                                                   static_cast<Eigen::Index>(model.dim()));
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

inline constexpr std::uint64_t kDefaultFallbackSeed = 42;

/// Projection from TF-IDF space onto the top right singular vectors of the
/// fitting corpus. Reused unchanged for documents outside that corpus.
struct FallbackEncoder {
    std::size_t dim = 0;
    std::uint64_t seed = kDefaultFallbackSeed;
    int power_iterations = 4;
    Eigen::MatrixXd projection;  // vocabulary x dim
};

/// Randomized subspace iteration: Gaussian start (seeded), `power_iterations`
/// re-orthonormalized refinements, then an exact SVD of the small projected
/// matrix. Deterministic for a fixed seed.
inline FallbackEncoder fit_fallback_encoder(const TfidfModel& model, const std::vector<TokenDoc>& docs, std::size_t dim,
                                            std::uint64_t seed = kDefaultFallbackSeed, int power_iterations = 4) {
    const std::size_t vocab = model.dim();
    if (dim == 0) throw InvalidArgument("fallback_embeddings: dim must be positive");
    if (dim > vocab) {
        throw InvalidArgument("fallback_embeddings: dim " + std::to_string(dim) + " exceeds vocabulary size " +
                              std::to_string(vocab));
    }
    const auto a = tfidf_matrix(model, docs);
    const auto v = static_cast<Eigen::Index>(vocab);
    const Eigen::Index width = std::min<Eigen::Index>(v, static_cast<Eigen::Index>(dim) + 10);

    Rng rng(seed);
    Eigen::MatrixXd omega(v, width);
    for (Eigen::Index j = 0; j < width; ++j) {
        for (Eigen::Index i = 0; i < v; ++i) omega(i, j) = rng.normal();
    }
    auto orthonormal = [](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
        const Eigen::Index cols = std::min(m.rows(), m.cols());
        return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), cols);
    };

    Eigen::MatrixXd q = orthonormal(a * omega);
    for (int it = 0; it < power_iterations; ++it) {
        const Eigen::MatrixXd z = orthonormal(a.transpose() * q);
        q = orthonormal(a * z);
    }
    const Eigen::MatrixXd b = q.transpose() * a;  // width x vocab
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
    const Eigen::MatrixXd& right = svd.matrixV();
    const Eigen::Index keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(dim), right.cols());

    FallbackEncoder enc;
    enc.dim = dim;
    enc.seed = seed;
    enc.power_iterations = power_iterations;
    enc.projection = Eigen::MatrixXd::Zero(v, static_cast<Eigen::Index>(dim));
    enc.projection.leftCols(keep) = right.leftCols(keep);
    return enc;
}

/// Rows are L2-normalized; documents without in-vocabulary tokens map to zero.
inline EmbeddingSet encode_fallback(const FallbackEncoder& enc, const TfidfModel& model, const std::vector<TokenDoc>& docs) {
    if (static_cast<std::size_t>(enc.projection.rows()) != model.dim()) {
        throw InvalidArgument("fallback encoder does not match the TF-IDF vocabulary");
    }
    const auto a = tfidf_matrix(model, docs);
    const Eigen::MatrixXd proj = a * enc.projection;
    EmbeddingSet set;
    set.dim = enc.dim;
    set.source = EmbeddingSource::tfidf_fallback;
    for (Eigen::Index r = 0; r < proj.rows(); ++r) {
        Eigen::VectorXd row = proj.row(r).transpose();
        const double norm = row.norm();
        if (norm > 0.0) row /= norm;
        set.vectors[docs[static_cast<std::size_t>(r)].post_id] = std::vector<double>(row.data(), row.data() + row.size());
    }
    return set;
}

inline EmbeddingSet fallback_embeddings(const TfidfModel& model, const std::vector<TokenDoc>& docs, std::size_t dim,
                                        std::uint64_t seed = kDefaultFallbackSeed, int power_iterations = 4) {
    return encode_fallback(fit_fallback_encoder(model, docs, dim, seed, power_iterations), model, docs);
}

inline nlohmann::json fallback_encoder_to_json(const FallbackEncoder& enc) {
    nlohmann::json j;
    j["format"] = "egoflux.fallback_encoder";
    j["version"] = 1;
    j["dim"] = enc.dim;
    j["seed"] = enc.seed;
    j["power_iterations"] = enc.power_iterations;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < enc.projection.rows(); ++r) {
        rows.push_back(std::vector<double>(enc.projection.cols()));
        for (Eigen::Index c = 0; c < enc.projection.cols(); ++c) rows.back()[static_cast<std::size_t>(c)] = enc.projection(r, c);
    }
    j["projection"] = std::move(rows);
    return j;
}

inline FallbackEncoder fallback_encoder_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "egoflux.fallback_encoder") throw ParseError("not a fallback encoder");
    FallbackEncoder enc;
    enc.dim = j.at("dim").get<std::size_t>();
    enc.seed = j.at("seed").get<std::uint64_t>();
    enc.power_iterations = j.at("power_iterations").get<int>();
    const auto rows = j.at("projection").get<std::vector<std::vector<double>>>();
    enc.projection = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(enc.dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != enc.dim) throw ParseError("fallback encoder row has the wrong width");
        for (std::size_t c = 0; c < enc.dim; ++c) enc.projection(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return enc;
}

}  // namespace egoflux
