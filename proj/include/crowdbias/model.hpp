#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdbias/corpus.hpp"
#include "crowdbias/embedding.hpp"
#include "crowdbias/error.hpp"
#include "crowdbias/linalg.hpp"
#include "crowdbias/random.hpp"

namespace crowdbias {

/// normalized: a = softmax(e . x_j). raw: a_j = e . x_j used as-is.
enum class AttentionMode { normalized, raw };

/// Attention vector e (D), weights W (L x D) and bias b (L) of the base
/// classifier whose softmax output is the latent truth.
struct BaseParams {
    Vector attention;
    Matrix weights;
    Vector bias;
    AttentionMode mode = AttentionMode::normalized;

    std::size_t dim() const { return attention.size(); }
    std::size_t num_classes() const { return bias.size(); }

    friend bool operator==(const BaseParams&, const BaseParams&) = default;
};

/// Base network plus one L x L transition matrix per annotator.
/// biases[c] belongs to annotators[c].
struct LTNetModel {
    BaseParams base;
    std::vector<std::string> annotators;
    std::vector<Matrix> biases;

    std::size_t num_classes() const { return base.num_classes(); }

    friend bool operator==(const LTNetModel&, const LTNetModel&) = default;
};

struct AttentionOutput {
    Vector weights;  // a, length S
    Vector context;  // z, length D
};

struct Prediction {
    Vector p;          // latent truth or annotator head distribution
    Vector attention;  // a
    Vector context;    // z
};

inline AttentionOutput attention_forward(const Matrix& seq, std::span<const double> e,
                                         AttentionMode mode = AttentionMode::normalized) {
    if (seq.rows() == 0) throw InvalidArgument("attention over an empty sequence");
    if (seq.cols() != e.size()) throw InvalidArgument("attention vector dimension mismatch");
    AttentionOutput out;
    Vector scores(seq.rows());
    for (std::size_t j = 0; j < seq.rows(); ++j) scores[j] = dot(e, seq.row(j));
    out.weights = mode == AttentionMode::normalized ? softmax(scores) : scores;
    out.context.assign(seq.cols(), 0.0);
    for (std::size_t j = 0; j < seq.rows(); ++j) {
        const auto row = seq.row(j);
        for (std::size_t d = 0; d < row.size(); ++d) out.context[d] += out.weights[j] * row[d];
    }
    return out;
}

inline Vector logits(std::span<const double> z, const BaseParams& base) {
    if (z.size() != base.weights.cols()) throw InvalidArgument("context dimension mismatch");
    Vector u(base.bias);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += dot(base.weights.row(i), z);
    return u;
}

inline Prediction latent_truth_forward(std::span<const double> z, const BaseParams& base) {
    Prediction out;
    out.p = softmax(logits(z, base));
    out.context.assign(z.begin(), z.end());
    return out;
}

/// Full base forward: attention, context, latent truth.
inline Prediction forward(const Matrix& seq, const BaseParams& base) {
    auto att = attention_forward(seq, base.attention, base.mode);
    Prediction out = latent_truth_forward(att.context, base);
    out.attention = std::move(att.weights);
    return out;
}

inline bool is_row_stochastic(const Matrix& m, double tol = 1e-9) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (double v : m.row(i)) {
            if (v < -tol) return false;
            s += v;
        }
        if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

/// p^c_j = sum_i T_ij p_i.
inline Vector annotator_forward(std::span<const double> p, const Matrix& T, bool require_stochastic = true) {
    if (T.rows() != p.size() || T.cols() != p.size()) throw InvalidArgument("bias matrix shape mismatch");
    if (require_stochastic && !is_row_stochastic(T)) throw InvalidArgument("bias matrix is not row-stochastic");
    Vector out(T.cols(), 0.0);
    for (std::size_t i = 0; i < T.rows(); ++i) {
        const double pi = p[i];
        const auto row = T.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) out[j] += pi * row[j];
    }
    return out;
}

/// Clamp negatives to zero, then scale each row to sum 1.
inline Matrix row_normalize(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        double s = 0.0;
        for (double& v : row) {
            if (v < 0.0) v = 0.0;
            s += v;
        }
        if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("degenerate bias row " + std::to_string(i));
        for (double& v : row) v /= s;
    }
    return out;
}

/// row_normalize(I + U), U_ij ~ uniform[0, noise_scale].
inline Matrix init_bias_matrix(std::size_t L, double noise_scale, std::uint64_t seed) {
    if (L < 1) throw InvalidArgument("bias matrix needs at least one class");
    if (!(noise_scale >= 0.0)) throw InvalidArgument("noise_scale must be nonnegative");
    Rng rng(seed);
    Matrix m = Matrix::identity(L);
    for (double& v : m.data()) v += noise_scale * rng.uniform();
    return row_normalize(m);
}

/// e and W uniform in [-0.1, 0.1], b = 0.
inline BaseParams init_base(std::size_t dim, std::size_t num_classes, std::uint64_t seed,
                            AttentionMode mode = AttentionMode::normalized) {
    if (dim == 0 || num_classes == 0) throw InvalidArgument("base model needs D >= 1 and L >= 1");
    Rng rng(seed);
    BaseParams b;
    b.mode = mode;
    b.attention.resize(dim);
    for (double& v : b.attention) v = rng.uniform(-0.1, 0.1);
    b.weights = Matrix(num_classes, dim);
    for (double& v : b.weights.data()) v = rng.uniform(-0.1, 0.1);
    b.bias.assign(num_classes, 0.0);
    return b;
}

inline LTNetModel make_ltnet(BaseParams base, const std::vector<std::string>& annotators, double noise_scale,
                             std::uint64_t seed) {
    LTNetModel m;
    m.base = std::move(base);
    m.annotators = annotators;
    for (std::size_t c = 0; c < annotators.size(); ++c)
        m.biases.push_back(init_bias_matrix(m.num_classes(), noise_scale, seed + c));
    return m;
}

// ---------------------------------------------------------------------------

/// A dataset after tokenization and embedding lookup; the unit that the
/// forward/backward passes consume.
struct EncodedCorpus {
    std::vector<Matrix> inputs;
    std::vector<std::size_t> annotators;
    std::vector<Label> labels;
    std::size_t num_classes = 0;
    std::size_t num_annotators = 0;

    std::size_t size() const { return inputs.size(); }
};

inline EncodedCorpus encode(const Dataset& d, const Embeddings& emb) {
    EncodedCorpus out;
    out.num_classes = d.num_classes;
    out.num_annotators = d.annotators.size();
    out.inputs.reserve(d.size());
    for (const auto& s : d.samples) {
        out.inputs.push_back(embed_sequence(tokenize(s.text), emb.vocab, emb.table));
        out.annotators.push_back(s.annotator);
        out.labels.push_back(s.label);
    }
    return out;
}

struct LatentPredictions {
    std::vector<Prediction> predictions;
    std::vector<Label> classes;  // argmax, ties to the lowest index
};

inline LatentPredictions predict_latent(const BaseParams& base, const EncodedCorpus& corpus) {
    if (corpus.num_classes != base.num_classes()) throw InvalidArgument("model and dataset disagree on L");
    LatentPredictions out;
    out.predictions.reserve(corpus.size());
    out.classes.reserve(corpus.size());
    for (const auto& x : corpus.inputs) {
        out.predictions.push_back(forward(x, base));
        out.classes.push_back(argmax(out.predictions.back().p));
    }
    return out;
}

inline LatentPredictions predict_latent(const LTNetModel& model, const Dataset& d, const Embeddings& emb) {
    return predict_latent(model.base, encode(d, emb));
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

namespace detail {
inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return rows;
}

template <class Json>
Matrix matrix_from_json(const Json& j) {
    const auto rows = j.template get<std::vector<std::vector<double>>>();
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw ParseError("ragged matrix in JSON");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}
}  // namespace detail

inline nlohmann::ordered_json checkpoint_to_json(const LTNetModel& m) {
    nlohmann::ordered_json j;
    j["format"] = "crowdbias-ltnet";
    j["version"] = kCheckpointVersion;
    j["dim"] = m.base.dim();
    j["num_classes"] = m.num_classes();
    j["attention_mode"] = m.base.mode == AttentionMode::raw ? "raw" : "normalized";
    j["attention"] = m.base.attention;
    j["weights"] = detail::matrix_to_json(m.base.weights);
    j["bias"] = m.base.bias;
    nlohmann::ordered_json biases = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < m.annotators.size(); ++c) biases[m.annotators[c]] = detail::matrix_to_json(m.biases[c]);
    j["annotator_biases"] = biases;
    return j;
}

/// Accepts json or ordered_json; with the latter the annotator order of the
/// file is kept.
template <class Json>
LTNetModel checkpoint_from_json(const Json& j) {
    try {
        if (j.at("format") != "crowdbias-ltnet") throw ParseError("not a crowdbias checkpoint");
        if (j.at("version").template get<int>() != kCheckpointVersion)
            throw ParseError("unsupported checkpoint version " + j.at("version").dump());
        LTNetModel m;
        m.base.attention = j.at("attention").template get<Vector>();
        m.base.weights = detail::matrix_from_json(j.at("weights"));
        m.base.bias = j.at("bias").template get<Vector>();
        m.base.mode = j.at("attention_mode") == "raw" ? AttentionMode::raw : AttentionMode::normalized;
        const auto D = j.at("dim").template get<std::size_t>();
        const auto L = j.at("num_classes").template get<std::size_t>();
        if (m.base.dim() != D || m.base.weights.rows() != L || m.base.weights.cols() != D || m.base.bias.size() != L)
            throw ParseError("checkpoint dimensions are inconsistent");
        for (const auto& [name, mat] : j.at("annotator_biases").items()) {
            m.annotators.push_back(name);
            m.biases.push_back(detail::matrix_from_json(mat));
            if (m.biases.back().rows() != L || m.biases.back().cols() != L)
                throw ParseError("bias matrix of '" + name + "' is not L x L");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const LTNetModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << checkpoint_to_json(m).dump(2) << '\n';
}

inline LTNetModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    return checkpoint_from_json(j);
}

/// Reorders/validates a model's bias registry against a dataset's annotators.
inline LTNetModel align_to(const LTNetModel& m, const std::vector<std::string>& annotators) {
    LTNetModel out;
    out.base = m.base;
    out.annotators = annotators;
    for (const auto& a : annotators) {
        std::size_t c = 0;
        while (c < m.annotators.size() && m.annotators[c] != a) ++c;
        if (c == m.annotators.size()) throw InvalidArgument("model has no bias matrix for annotator '" + a + "'");
        out.biases.push_back(m.biases[c]);
    }
    return out;
}

}  // namespace crowdbias
