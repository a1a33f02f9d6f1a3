#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "crowdbias/error.hpp"
#include "crowdbias/linalg.hpp"
#include "crowdbias/random.hpp"

namespace crowdbias {

using Label = std::size_t;

/// One annotated text. `annotator` indexes the owning Dataset's registry.
struct Sample {
    std::string id;
    std::string text;
    std::size_t annotator = 0;
    Label label = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Singly-labeled crowdsourced corpus: each sample carries exactly one
/// annotation. Splits and noisy copies keep the parent's annotator registry
/// so annotator indices stay aligned with a model's bias matrices.
struct Dataset {
    std::vector<Sample> samples;
    std::size_t num_classes = 0;
    std::vector<std::string> annotators;
    std::vector<std::string> class_names;

    std::size_t size() const { return samples.size(); }

    std::optional<std::size_t> annotator_index(std::string_view name) const {
        for (std::size_t i = 0; i < annotators.size(); ++i)
            if (annotators[i] == name) return i;
        return std::nullopt;
    }

    std::vector<Label> labels() const {
        std::vector<Label> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.label);
        return out;
    }

    /// Throws if a sample references a class or annotator outside the registry.
    void validate() const {
        if (num_classes == 0) throw InvalidArgument("dataset has zero classes");
        if (!class_names.empty() && class_names.size() != num_classes)
            throw InvalidArgument("class_names size does not match num_classes");
        for (const auto& s : samples) {
            if (s.label >= num_classes)
                throw InvalidArgument("sample '" + s.id + "' has label " + std::to_string(s.label) +
                                      " outside [0, " + std::to_string(num_classes) + ")");
            if (s.annotator >= annotators.size())
                throw InvalidArgument("sample '" + s.id + "' references an unregistered annotator");
        }
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class DataFormat { jsonl, csv };

inline DataFormat format_from_path(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return DataFormat::csv;
    return DataFormat::jsonl;
}

namespace detail {

struct RawRecord {
    std::size_t line = 0;
    std::string id, text, annotator;
    long long label = 0;
};

struct RawFile {
    std::optional<std::size_t> declared_classes;
    std::vector<std::string> class_names;
    std::vector<RawRecord> records;
};

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    if (quoted) throw ParseError("line " + std::to_string(lineno) + ": unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && !s.empty() && s.front() != '#') return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline long long parse_label(const std::string& s, std::size_t lineno) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(lineno) + ": label '" + s + "' is not an integer");
    }
}

inline RawFile read_jsonl(std::istream& in) {
    RawFile raw;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object()) throw ParseError("line " + std::to_string(lineno) + ": record is not an object");
        if (first && j.contains("num_classes") && !j.contains("id")) {
            first = false;
            try {
                raw.declared_classes = j.at("num_classes").get<std::size_t>();
                if (j.contains("class_names")) raw.class_names = j.at("class_names").get<std::vector<std::string>>();
            } catch (const nlohmann::json::exception& e) {
                throw ParseError("line " + std::to_string(lineno) + ": bad header: " + e.what());
            }
            continue;
        }
        first = false;
        RawRecord r;
        r.line = lineno;
        try {
            r.id = j.at("id").get<std::string>();
            r.text = j.at("text").get<std::string>();
            r.annotator = j.at("annotator").is_string() ? j.at("annotator").get<std::string>()
                                                        : j.at("annotator").dump();
            r.label = j.at("label").get<long long>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        raw.records.push_back(std::move(r));
    }
    return raw;
}

inline RawFile read_csv(std::istream& in) {
    RawFile raw;
    std::string line;
    std::size_t lineno = 0;
    std::optional<std::array<std::size_t, 4>> cols;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!cols && line.front() == '#') {
            // "# num_classes: 3" and "# class_names: a,b,c" directives
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            std::string key = line.substr(1, colon - 1);
            std::string value = line.substr(colon + 1);
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t");
                const auto e = s.find_last_not_of(" \t");
                return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
            };
            key = trim(key);
            value = trim(value);
            if (key == "num_classes") raw.declared_classes = static_cast<std::size_t>(parse_label(value, lineno));
            else if (key == "class_names") raw.class_names = split_csv_line(value, lineno);
            continue;
        }
        auto fields = split_csv_line(line, lineno);
        if (!cols) {
            std::array<std::size_t, 4> idx{};
            const char* names[4] = {"id", "text", "annotator", "label"};
            for (std::size_t k = 0; k < 4; ++k) {
                auto it = std::find(fields.begin(), fields.end(), names[k]);
                if (it == fields.end())
                    throw ParseError("line " + std::to_string(lineno) + ": CSV header lacks column '" + names[k] + "'");
                idx[k] = static_cast<std::size_t>(it - fields.begin());
            }
            cols = idx;
            continue;
        }
        const auto& c = *cols;
        const std::size_t need = *std::max_element(c.begin(), c.end()) + 1;
        if (fields.size() < need)
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(need) + " fields");
        RawRecord r;
        r.line = lineno;
        r.id = fields[c[0]];
        r.text = fields[c[1]];
        r.annotator = fields[c[2]];
        r.label = parse_label(fields[c[3]], lineno);
        raw.records.push_back(std::move(r));
    }
    return raw;
}

inline RawFile read_raw(const std::string& path, DataFormat format) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return format == DataFormat::csv ? read_csv(in) : read_jsonl(in);
}

inline std::size_t resolve_classes(const RawFile& raw) {
    long long max_label = -1;
    for (const auto& r : raw.records) {
        if (r.label < 0) throw ParseError("line " + std::to_string(r.line) + ": record '" + r.id + "' has negative label");
        if (raw.declared_classes && static_cast<std::size_t>(r.label) >= *raw.declared_classes)
            throw ParseError("line " + std::to_string(r.line) + ": record '" + r.id + "' has label " +
                             std::to_string(r.label) + " but num_classes is " + std::to_string(*raw.declared_classes));
        max_label = std::max(max_label, r.label);
    }
    const std::size_t L = raw.declared_classes ? *raw.declared_classes : static_cast<std::size_t>(max_label + 1);
    if (!raw.class_names.empty() && raw.class_names.size() != L)
        throw ParseError("class_names has " + std::to_string(raw.class_names.size()) + " entries for " +
                         std::to_string(L) + " classes");
    return L;
}

}  // namespace detail

/// Loads a singly-labeled dataset. Sample ids must be unique; annotators are
/// registered in order of first appearance.
inline Dataset load_dataset(const std::string& path, DataFormat format) {
    auto raw = detail::read_raw(path, format);
    if (raw.records.empty()) throw ParseError("empty dataset: '" + path + "'");
    Dataset d;
    d.num_classes = detail::resolve_classes(raw);
    d.class_names = raw.class_names;
    std::unordered_map<std::string, std::size_t> reg;
    std::unordered_set<std::string> seen;
    d.samples.reserve(raw.records.size());
    for (auto& r : raw.records) {
        if (!seen.insert(r.id).second)
            throw ParseError("line " + std::to_string(r.line) + ": duplicate sample id '" + r.id + "'");
        auto [it, inserted] = reg.emplace(r.annotator, d.annotators.size());
        if (inserted) d.annotators.push_back(r.annotator);
        d.samples.push_back({std::move(r.id), std::move(r.text), it->second, static_cast<Label>(r.label)});
    }
    return d;
}

inline Dataset load_dataset(const std::string& path) { return load_dataset(path, format_from_path(path)); }

inline void write_dataset(const Dataset& d, const std::string& path, DataFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    if (format == DataFormat::jsonl) {
        nlohmann::json header = {{"num_classes", d.num_classes}};
        if (!d.class_names.empty()) header["class_names"] = d.class_names;
        out << header.dump() << '\n';
        for (const auto& s : d.samples) {
            nlohmann::ordered_json rec = {
                {"id", s.id}, {"text", s.text}, {"annotator", d.annotators.at(s.annotator)}, {"label", s.label}};
            out << rec.dump() << '\n';
        }
    } else {
        out << "# num_classes: " << d.num_classes << '\n';
        if (!d.class_names.empty()) {
            out << "# class_names: ";
            for (std::size_t i = 0; i < d.class_names.size(); ++i)
                out << (i ? "," : "") << detail::csv_escape(d.class_names[i]);
            out << '\n';
        }
        out << "id,text,annotator,label\n";
        for (const auto& s : d.samples)
            out << detail::csv_escape(s.id) << ',' << detail::csv_escape(s.text) << ','
                << detail::csv_escape(d.annotators.at(s.annotator)) << ',' << s.label << '\n';
    }
    if (!out) throw Error("failed writing '" + path + "'");
}

inline void write_dataset(const Dataset& d, const std::string& path) { write_dataset(d, path, format_from_path(path)); }

// ---------------------------------------------------------------------------
// Multi-labeled annotations

/// Sparse (item, annotator) -> class table used for truth inference.
struct AnnotationMatrix {
    struct Entry {
        std::size_t annotator;
        Label label;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    std::size_t num_classes = 0;
    std::vector<std::string> items;       // item ids in first-seen order
    std::vector<std::string> texts;       // text of each item's first record
    std::vector<std::string> annotators;  // registry
    std::vector<std::vector<Entry>> entries;  // per item

    std::size_t num_items() const { return items.size(); }

    /// Groups samples by id; a singly-labeled dataset yields one entry per item.
    static AnnotationMatrix from_dataset(const Dataset& d) {
        AnnotationMatrix am;
        am.num_classes = d.num_classes;
        am.annotators = d.annotators;
        std::unordered_map<std::string, std::size_t> pos;
        for (const auto& s : d.samples) {
            auto [it, inserted] = pos.emplace(s.id, am.items.size());
            if (inserted) {
                am.items.push_back(s.id);
                am.texts.push_back(s.text);
                am.entries.emplace_back();
            }
            am.entries[it->second].push_back({s.annotator, s.label});
        }
        return am;
    }

    void validate() const {
        if (num_classes == 0) throw InvalidArgument("annotation matrix has zero classes");
        if (entries.size() != items.size()) throw InvalidArgument("annotation matrix items/entries size mismatch");
        for (std::size_t n = 0; n < items.size(); ++n) {
            if (entries[n].empty()) throw InvalidArgument("item '" + items[n] + "' has zero annotations");
            for (const auto& e : entries[n]) {
                if (e.label >= num_classes) throw InvalidArgument("item '" + items[n] + "' has out-of-range label");
                if (e.annotator >= annotators.size())
                    throw InvalidArgument("item '" + items[n] + "' references an unregistered annotator");
            }
        }
    }
};

/// Loads a multi-labeled file: same record schema as datasets, but an id may
/// repeat across distinct annotators. A repeated (id, annotator) pair is an error.
inline AnnotationMatrix load_annotations(const std::string& path, DataFormat format) {
    auto raw = detail::read_raw(path, format);
    if (raw.records.empty()) throw ParseError("empty dataset: '" + path + "'");
    AnnotationMatrix am;
    am.num_classes = detail::resolve_classes(raw);
    std::unordered_map<std::string, std::size_t> reg, pos;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : raw.records) {
        if (!seen.emplace(r.id, r.annotator).second)
            throw ParseError("line " + std::to_string(r.line) + ": duplicate annotation of '" + r.id + "' by '" +
                             r.annotator + "'");
        auto [ait, anew] = reg.emplace(r.annotator, am.annotators.size());
        if (anew) am.annotators.push_back(r.annotator);
        auto [pit, pnew] = pos.emplace(r.id, am.items.size());
        if (pnew) {
            am.items.push_back(r.id);
            am.texts.push_back(r.text);
            am.entries.emplace_back();
        }
        am.entries[pit->second].push_back({ait->second, static_cast<Label>(r.label)});
    }
    return am;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
    double train = 0.7;
    double validation = 0.2;
    double test = 0.1;

    void validate() const {
        for (double r : {train, validation, test})
            if (!(r > 0.0 && r < 1.0)) throw InvalidArgument("split ratios must lie in (0, 1)");
        if (std::abs(train + validation + test - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");
    }
};

struct DatasetSplit {
    Dataset train, validation, test;
};

namespace detail {
inline std::size_t floor_count(double ratio, std::size_t n) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.num_classes = d.num_classes;
    out.annotators = d.annotators;
    out.class_names = d.class_names;
    out.samples.reserve(idx.size());
    for (std::size_t i : idx) out.samples.push_back(d.samples[i]);
    return out;
}
}  // namespace detail

/// Stratified by (annotator, label): each group is shuffled and its members
/// spread evenly over a global ordering, which is then cut into test,
/// validation and train. Validation and test sizes are floor(r * N); the
/// remainder goes to train. Output preserves the input order within a split.
inline DatasetSplit split(const Dataset& d, const SplitRatios& r, std::uint64_t seed) {
    r.validate();
    const std::size_t n = d.size();
    if (n < 3) throw InvalidArgument("split needs at least 3 samples");

    std::map<std::pair<std::size_t, Label>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[{d.samples[i].annotator, d.samples[i].label}].push_back(i);

    Rng rng(seed);
    struct Keyed {
        double key;
        std::uint64_t tiebreak;
        std::size_t index;
    };
    std::vector<Keyed> order;
    order.reserve(n);
    for (auto& [_, members] : groups) {
        rng.shuffle(members);
        const double offset = rng.uniform();
        const double g = static_cast<double>(members.size());
        for (std::size_t k = 0; k < members.size(); ++k)
            order.push_back({(static_cast<double>(k) + offset) / g, rng.next(), members[k]});
    }
    std::sort(order.begin(), order.end(), [](const Keyed& a, const Keyed& b) {
        return std::tie(a.key, a.tiebreak) < std::tie(b.key, b.tiebreak);
    });

    const std::size_t n_test = detail::floor_count(r.test, n);
    const std::size_t n_val = detail::floor_count(r.validation, n);
    std::vector<std::size_t> tr, va, te;
    for (std::size_t k = 0; k < n; ++k) {
        if (k < n_test) te.push_back(order[k].index);
        else if (k < n_test + n_val) va.push_back(order[k].index);
        else tr.push_back(order[k].index);
    }
    std::sort(tr.begin(), tr.end());
    std::sort(va.begin(), va.end());
    std::sort(te.begin(), te.end());
    return {detail::subset(d, tr), detail::subset(d, va), detail::subset(d, te)};
}

// ---------------------------------------------------------------------------
// Label noise

/// Picks exactly floor(rho * N_target) samples of the target annotators
/// uniformly and redraws their labels uniformly over all classes (a redraw
/// may land on the original class). Returns a modified copy.
inline Dataset inject_random_labels(const Dataset& d, const std::vector<std::string>& targets, double rho,
                                    std::uint64_t seed) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("noise fraction must lie in [0, 1]");
    if (targets.empty()) throw InvalidArgument("no noise target given");
    std::vector<bool> is_target(d.annotators.size(), false);
    for (const auto& t : targets) {
        auto idx = d.annotator_index(t);
        if (!idx) throw InvalidArgument("unknown annotator '" + t + "'");
        is_target[*idx] = true;
    }
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (is_target[d.samples[i].annotator]) pool.push_back(i);

    Dataset out = d;
    const std::size_t k = detail::floor_count(rho, pool.size());
    Rng rng(seed);
    // partial Fisher-Yates: the first k slots become a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        out.samples[pool[i]].label = rng.below(d.num_classes);
    }
    return out;
}

inline Dataset inject_random_labels(const Dataset& d, const std::string& target, double rho, std::uint64_t seed) {
    return inject_random_labels(d, std::vector<std::string>{target}, rho, seed);
}

// ---------------------------------------------------------------------------
// Synthetic corpora with known latent truth

struct SyntheticSpec {
    std::size_t num_classes = 2;
    std::size_t num_annotators = 2;
    std::size_t samples_per_annotator = 1000;
    std::vector<Matrix> true_confusions;  // one row-stochastic L x L per annotator
    Vector class_priors;                  // simplex, length L
    std::size_t tokens_per_class = 20;    // also the size of the neutral vocabulary
    std::size_t min_length = 8;
    std::size_t max_length = 16;
    double class_signal_rate = 0.6;

    void validate() const {
        const std::size_t L = num_classes;
        if (L < 1) throw InvalidArgument("synthetic spec needs at least one class");
        if (num_annotators < 1) throw InvalidArgument("synthetic spec needs at least one annotator");
        if (true_confusions.size() != num_annotators)
            throw InvalidArgument("expected one confusion matrix per annotator");
        for (std::size_t c = 0; c < true_confusions.size(); ++c) {
            const auto& m = true_confusions[c];
            if (m.rows() != L || m.cols() != L) throw InvalidArgument("confusion matrix must be L x L");
            for (std::size_t i = 0; i < L; ++i) {
                double s = 0.0;
                for (double v : m.row(i)) {
                    if (v < 0.0) throw InvalidArgument("confusion matrix has a negative entry");
                    s += v;
                }
                if (std::abs(s - 1.0) > 1e-9)
                    throw InvalidArgument("confusion matrix of annotator " + std::to_string(c) + " row " +
                                          std::to_string(i) + " sums to " + std::to_string(s));
            }
        }
        if (class_priors.size() != L) throw InvalidArgument("class_priors must have length L");
        double s = 0.0;
        for (double p : class_priors) {
            if (p < 0.0) throw InvalidArgument("class prior is negative");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("class_priors must sum to 1");
        if (tokens_per_class < 1) throw InvalidArgument("tokens_per_class must be positive");
        if (min_length < 1 || max_length < min_length) throw InvalidArgument("invalid sentence length range");
        if (!(class_signal_rate >= 0.0 && class_signal_rate <= 1.0))
            throw InvalidArgument("class_signal_rate must lie in [0, 1]");
    }

    /// Convenience: every annotator gets diag = accuracy, off-diagonal mass spread evenly.
    static Matrix symmetric_confusion(std::size_t L, double accuracy) {
        Matrix m(L, L, L > 1 ? (1.0 - accuracy) / static_cast<double>(L - 1) : 0.0);
        for (std::size_t i = 0; i < L; ++i) m(i, i) = L > 1 ? accuracy : 1.0;
        return m;
    }
};

/// {"num_classes", "num_annotators", "samples_per_annotator",
///  "true_confusions": [[[..]..]..], "class_priors", "tokens_per_class",
///  "sentence_length": [min, max], "class_signal_rate"}; absent keys keep
/// the defaults (two annotators at 0.9 / 0.75 accuracy, uniform priors).
inline SyntheticSpec default_synthetic_spec() {
    SyntheticSpec s;
    s.samples_per_annotator = 5000;
    s.true_confusions = {SyntheticSpec::symmetric_confusion(2, 0.9), SyntheticSpec::symmetric_confusion(2, 0.75)};
    s.class_priors = {0.5, 0.5};
    return s;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    SyntheticSpec s = default_synthetic_spec();
    try {
        s.num_classes = j.value("num_classes", s.num_classes);
        s.num_annotators = j.value("num_annotators", s.num_annotators);
        s.samples_per_annotator = j.value("samples_per_annotator", s.samples_per_annotator);
        s.tokens_per_class = j.value("tokens_per_class", s.tokens_per_class);
        s.class_signal_rate = j.value("class_signal_rate", s.class_signal_rate);
        if (j.contains("sentence_length")) {
            const auto len = j.at("sentence_length").get<std::vector<std::size_t>>();
            if (len.size() != 2) throw InvalidArgument("sentence_length must be [min, max]");
            s.min_length = len[0];
            s.max_length = len[1];
        }
        if (j.contains("class_priors")) {
            s.class_priors = j.at("class_priors").get<std::vector<double>>();
        } else if (s.class_priors.size() != s.num_classes) {
            s.class_priors.assign(s.num_classes, 1.0 / static_cast<double>(s.num_classes));
        }
        if (j.contains("true_confusions")) {
            s.true_confusions.clear();
            for (const auto& m : j.at("true_confusions")) {
                const auto rows = m.get<std::vector<std::vector<double>>>();
                Matrix t(rows.size(), rows.empty() ? 0 : rows.front().size());
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (rows[r].size() != t.cols()) throw InvalidArgument("ragged confusion matrix");
                    std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
                }
                s.true_confusions.push_back(std::move(t));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

inline nlohmann::ordered_json to_json(const SyntheticSpec& s) {
    nlohmann::ordered_json conf = nlohmann::ordered_json::array();
    for (const auto& m : s.true_confusions) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
        conf.push_back(rows);
    }
    return {{"num_classes", s.num_classes},
            {"num_annotators", s.num_annotators},
            {"samples_per_annotator", s.samples_per_annotator},
            {"true_confusions", conf},
            {"class_priors", s.class_priors},
            {"tokens_per_class", s.tokens_per_class},
            {"sentence_length", {s.min_length, s.max_length}},
            {"class_signal_rate", s.class_signal_rate}};
}

struct SyntheticCorpus {
    Dataset dataset;
    std::vector<Label> latent;            // aligned with dataset.samples
    std::vector<Matrix> true_confusions;
};

inline std::string synthetic_class_token(std::size_t k, std::size_t i) {
    return "c" + std::to_string(k) + "w" + std::to_string(i);
}
inline std::string synthetic_neutral_token(std::size_t i) { return "nw" + std::to_string(i); }

/// Every surface token a SyntheticSpec can emit.
inline std::vector<std::string> synthetic_vocabulary(const SyntheticSpec& spec) {
    std::vector<std::string> v;
    for (std::size_t k = 0; k < spec.num_classes; ++k)
        for (std::size_t i = 0; i < spec.tokens_per_class; ++i) v.push_back(synthetic_class_token(k, i));
    for (std::size_t i = 0; i < spec.tokens_per_class; ++i) v.push_back(synthetic_neutral_token(i));
    return v;
}

/// Annotators are named a0..a{C-1}; samples s{c}_{i}. For each sample:
/// latent ~ priors, label ~ row(latent) of the annotator's confusion, and
/// each token comes from the latent class vocabulary with probability
/// class_signal_rate, otherwise from the neutral vocabulary.
inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    SyntheticCorpus out;
    auto& d = out.dataset;
    d.num_classes = spec.num_classes;
    for (std::size_t c = 0; c < spec.num_annotators; ++c) d.annotators.push_back("a" + std::to_string(c));
    d.samples.reserve(spec.num_annotators * spec.samples_per_annotator);
    out.latent.reserve(d.samples.capacity());
    for (std::size_t c = 0; c < spec.num_annotators; ++c) {
        for (std::size_t i = 0; i < spec.samples_per_annotator; ++i) {
            const Label k = rng.categorical(spec.class_priors);
            const Label j = rng.categorical(spec.true_confusions[c].row(k));
            const std::size_t len = spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
            std::string text;
            for (std::size_t t = 0; t < len; ++t) {
                if (t) text.push_back(' ');
                const std::size_t w = rng.below(spec.tokens_per_class);
                text += rng.uniform() < spec.class_signal_rate ? synthetic_class_token(k, w) : synthetic_neutral_token(w);
            }
            d.samples.push_back({"s" + std::to_string(c) + "_" + std::to_string(i), std::move(text), c, j});
            out.latent.push_back(k);
        }
    }
    out.true_confusions = spec.true_confusions;
    return out;
}

// ---------------------------------------------------------------------------

struct AnnotatorStats {
    std::string annotator;
    std::size_t count = 0;
    std::vector<std::size_t> histogram;  // length L

    friend bool operator==(const AnnotatorStats&, const AnnotatorStats&) = default;
};

/// Per-annotator sample count and label histogram, registry order, skipping
/// annotators with no samples.
inline std::vector<AnnotatorStats> annotator_stats(const Dataset& d) {
    std::vector<AnnotatorStats> all(d.annotators.size());
    for (std::size_t c = 0; c < all.size(); ++c) {
        all[c].annotator = d.annotators[c];
        all[c].histogram.assign(d.num_classes, 0);
    }
    for (const auto& s : d.samples) {
        ++all[s.annotator].count;
        ++all[s.annotator].histogram[s.label];
    }
    std::vector<AnnotatorStats> out;
    for (auto& a : all)
        if (a.count > 0) out.push_back(std::move(a));
    return out;
}

}  // namespace crowdbias
