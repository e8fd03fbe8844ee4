#pragma once

// Numeric backbone: probabilities, binary labels, log losses (nats) and
// log-domain weights, plus the handful of primitives every other header
// builds on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqlog {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Probability that the label equals one.
class ProbValue {
public:
    ProbValue() = default;
    explicit ProbValue(double p) : value_(p) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("ProbValue outside [0,1]: " + std::to_string(p));
    }
    double value() const { return value_; }
    friend bool operator==(ProbValue, ProbValue) = default;

private:
    double value_ = 0.5;
};

class Label {
public:
    Label() = default;
    explicit Label(int v) : value_(static_cast<std::uint8_t>(v)) {
        if (v != 0 && v != 1)
            throw std::invalid_argument("Label must be 0 or 1, got " + std::to_string(v));
    }
    static Label zero() { return Label(0); }
    static Label one() { return Label(1); }
    int value() const { return value_; }
    friend bool operator==(Label, Label) = default;

private:
    std::uint8_t value_ = 0;
};

using Labels = std::vector<Label>;

// A point of the feature space; finite domains use a one-coordinate index.
using Feature = std::vector<double>;
using Features = std::vector<Feature>;

// Nonnegative loss in nats. +infinity is a legitimate value.
class LossValue {
public:
    LossValue() = default;
    explicit LossValue(double v) : value_(v) {
        if (!(v >= 0.0))
            throw std::invalid_argument("LossValue must be >= 0, got " + std::to_string(v));
    }
    double value() const { return value_; }
    bool is_infinite() const { return std::isinf(value_); }
    LossValue& operator+=(LossValue other) {
        value_ += other.value_;
        return *this;
    }
    friend LossValue operator+(LossValue a, LossValue b) { return a += b; }
    friend auto operator<=>(LossValue, LossValue) = default;

private:
    double value_ = 0.0;
};

// Log of an unnormalised weight; -infinity encodes weight zero.
class LogWeight {
public:
    LogWeight() = default;
    explicit LogWeight(double v) : value_(v) {
        if (std::isnan(v) || v == kInf)
            throw std::invalid_argument("LogWeight must be finite or -inf");
    }
    static LogWeight zero_weight() { return LogWeight(kNegInf); }
    double value() const { return value_; }
    friend auto operator<=>(LogWeight, LogWeight) = default;

private:
    double value_ = 0.0;
};

namespace detail {

// Hot-path form of the log loss on raw doubles.
inline double log_loss(double p, int y) {
    if (y == 1) return p <= 0.0 ? kInf : -std::log(p);
    return p >= 1.0 ? kInf : -std::log1p(-p);
}

// ln of p^y (1-p)^(1-y), i.e. the negated log loss.
inline double log_likelihood(double p, int y) { return -log_loss(p, y); }

inline double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("log_sum_exp of an empty sequence");
    double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    if (m == kInf) return kInf;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// x ln x with the 0 ln 0 = 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline double log_binomial(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

inline LossValue log_loss(ProbValue pred, Label label) {
    return LossValue(detail::log_loss(pred.value(), label.value()));
}

inline LossValue cumulative_loss(std::span<const ProbValue> preds, std::span<const Label> labels) {
    if (preds.size() != labels.size())
        throw std::invalid_argument("cumulative_loss: prediction and label sequences differ in length");
    double total = 0.0;
    for (std::size_t t = 0; t < preds.size(); ++t) {
        total += detail::log_loss(preds[t].value(), labels[t].value());
        if (std::isinf(total)) break;
    }
    return LossValue(total);
}

inline LogWeight log_sum_exp(std::span<const LogWeight> values) {
    if (values.empty()) throw std::invalid_argument("log_sum_exp of an empty sequence");
    std::vector<double> raw;
    raw.reserve(values.size());
    for (auto v : values) raw.push_back(v.value());
    return LogWeight(detail::log_sum_exp(raw));
}

inline Labels labels_from_bits(std::uint64_t bits, std::size_t length) {
    Labels out(length);
    for (std::size_t t = 0; t < length; ++t) out[t] = Label(static_cast<int>((bits >> t) & 1U));
    return out;
}

inline Labels labels_from_ints(std::span<const int> values) {
    Labels out;
    out.reserve(values.size());
    for (int v : values) out.emplace_back(v);
    return out;
}

}  // namespace seqlog
