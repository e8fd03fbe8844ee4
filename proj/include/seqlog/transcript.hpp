#pragma once

#include <cctype>
#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seqlog/loss.hpp"

namespace seqlog {

// Shortest round-trip decimal form; identical inputs always print identically.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    std::string s(text);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t start = 0;
    while (start < s.size() && std::isspace(static_cast<unsigned char>(s[start]))) ++start;
    s = s.substr(start);
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return kNegInf;
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

inline std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

struct HindsightRecord {
    std::vector<double> params;
    double loss = 0.0;
};

// One online run.
struct Transcript {
    Features features;
    std::vector<double> predictions;
    Labels labels;
    std::vector<double> step_losses;
    double cumulative_loss = 0.0;
    std::optional<HindsightRecord> best;

    std::size_t size() const { return labels.size(); }

    void record(Feature x, double yhat, Label y) {
        double loss = detail::log_loss(yhat, y.value());
        features.push_back(std::move(x));
        predictions.push_back(yhat);
        labels.push_back(y);
        step_losses.push_back(loss);
        cumulative_loss += loss;
    }

    bool consistent(double tol = 1e-9) const {
        auto n = labels.size();
        if (features.size() != n || predictions.size() != n || step_losses.size() != n) return false;
        double sum = 0.0;
        for (double l : step_losses) sum += l;
        if (std::isinf(sum) || std::isinf(cumulative_loss)) return sum == cumulative_loss;
        return std::abs(sum - cumulative_loss) <= tol * std::max(1.0, std::abs(sum));
    }
};

inline double pointwise_regret(double learner_loss, double best_loss) { return learner_loss - best_loss; }

inline double pointwise_regret(const Transcript& learner, LossValue best_loss) {
    return pointwise_regret(learner.cumulative_loss, best_loss.value());
}

inline constexpr std::string_view kSchemaLine = "# schema=1";

// Columns: t, x (semicolon-joined), y, yhat, step_loss, cum_loss.
inline void write_transcript_csv(std::ostream& out, const Transcript& tr) {
    out << kSchemaLine << '\n' << "t,x,y,yhat,step_loss,cum_loss\n";
    double cum = 0.0;
    for (std::size_t t = 0; t < tr.size(); ++t) {
        cum += tr.step_losses[t];
        out << (t + 1) << ',';
        for (std::size_t j = 0; j < tr.features[t].size(); ++j) {
            if (j) out << ';';
            out << format_double(tr.features[t][j]);
        }
        out << ',' << tr.labels[t].value() << ',' << format_double(tr.predictions[t]) << ','
            << format_double(tr.step_losses[t]) << ',' << format_double(cum) << '\n';
    }
}

inline Transcript read_transcript_csv(std::istream& in) {
    Transcript tr;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("t,x,y,yhat", 0) != 0) throw std::runtime_error("transcript CSV: unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        auto cols = split(line, ',');
        if (cols.size() != 6) throw std::runtime_error("transcript CSV: expected 6 columns in '" + line + "'");
        Feature x;
        if (!cols[1].empty())
            for (auto& c : split(cols[1], ';')) x.push_back(parse_double(c));
        tr.record(std::move(x), parse_double(cols[3]), Label(static_cast<int>(parse_double(cols[2]))));
    }
    return tr;
}

}  // namespace seqlog
