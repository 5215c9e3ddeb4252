#pragma once

#include "iobs/errors.hpp"
#include "iobs/linalg.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

namespace iobs {

// =====================================================================
// Sum-of-sinusoids signal expressions
//
//   expr := term (('+'|'-') term)*
//   term := number | number '*' trig | trig
//   trig := ('sin'|'cos') '(' number '*t' (('+'|'-') number)? ')'
//
// A leading sign on the first term is accepted (signed literals).
// =====================================================================

enum class Waveform { Constant, Sin, Cos };

struct SignalTerm {
    Waveform kind = Waveform::Constant;
    double amplitude = 0.0;
    double frequency = 0.0; // unused for constants
    double phase = 0.0;     // unused for constants

    bool operator==(const SignalTerm&) const = default;
};

struct SignalExpr {
    std::vector<SignalTerm> terms; // non-empty after parse

    bool operator==(const SignalExpr&) const = default;
};

// One expression per vector component.
using VectorSignal = std::vector<SignalExpr>;

namespace detail {

class SignalParser {
public:
    explicit SignalParser(const std::string& text) : text_(text) {}

    SignalExpr parse() {
        SignalExpr expr;
        skip_ws();
        double sign = 1.0;
        if (peek() == '+' || peek() == '-') sign = (take() == '-') ? -1.0 : 1.0;
        expr.terms.push_back(parse_term(sign));
        skip_ws();
        while (pos_ < text_.size()) {
            const char op = peek();
            if (op != '+' && op != '-') fail("expected '+' or '-'");
            take();
            expr.terms.push_back(parse_term(op == '-' ? -1.0 : 1.0));
            skip_ws();
        }
        return expr;
    }

private:
    SignalTerm parse_term(double sign) {
        skip_ws();
        SignalTerm term;
        if (at_trig()) {
            term = parse_trig();
            term.amplitude = sign;
            return term;
        }
        const double value = parse_number();
        skip_ws();
        if (peek() == '*') {
            take();
            term = parse_trig();
            term.amplitude = sign * value;
            return term;
        }
        term.kind = Waveform::Constant;
        term.amplitude = sign * value;
        return term;
    }

    SignalTerm parse_trig() {
        skip_ws();
        SignalTerm term;
        if (consume_word("sin"))
            term.kind = Waveform::Sin;
        else if (consume_word("cos"))
            term.kind = Waveform::Cos;
        else
            fail("expected 'sin' or 'cos'");
        skip_ws();
        expect('(');
        term.frequency = parse_number();
        skip_ws();
        expect('*');
        skip_ws();
        expect('t');
        skip_ws();
        if (peek() == '+' || peek() == '-') {
            const double sign = (take() == '-') ? -1.0 : 1.0;
            term.phase = sign * parse_number();
            skip_ws();
        }
        expect(')');
        return term;
    }

    double parse_number() {
        skip_ws();
        if (pos_ >= text_.size() || !(std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.'))
            fail("expected a number");
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double value = std::strtod(begin, &end);
        if (end == begin) fail("expected a number");
        pos_ += static_cast<std::size_t>(end - begin);
        return value;
    }

    bool at_trig() const {
        return text_.compare(pos_, 3, "sin") == 0 || text_.compare(pos_, 3, "cos") == 0;
    }

    bool consume_word(const char* word) {
        const std::size_t len = std::char_traits<char>::length(word);
        if (text_.compare(pos_, len, word) == 0) {
            pos_ += len;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (pos_ >= text_.size() || text_[pos_] != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    char take() { return text_[pos_++]; }
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw SyntaxError(what + " in \"" + text_ + "\"", pos_);
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline SignalExpr parse_signal(const std::string& text) { return detail::SignalParser(text).parse(); }

inline VectorSignal parse_signals(const std::vector<std::string>& texts) {
    VectorSignal out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(parse_signal(t));
    return out;
}

inline double eval_signal(const SignalExpr& expr, double t) {
    double acc = 0.0;
    for (const auto& term : expr.terms) {
        switch (term.kind) {
        case Waveform::Constant: acc += term.amplitude; break;
        case Waveform::Sin: acc += term.amplitude * std::sin(term.frequency * t + term.phase); break;
        case Waveform::Cos: acc += term.amplitude * std::cos(term.frequency * t + term.phase); break;
        }
    }
    return acc;
}

inline Vector eval_signal(const VectorSignal& sig, double t) {
    Vector out(static_cast<Index>(sig.size()));
    for (std::size_t i = 0; i < sig.size(); ++i) out(static_cast<Index>(i)) = eval_signal(sig[i], t);
    return out;
}

// Canonical text form; parse(print(e)) == e exactly (17 digit literals).
inline std::string print_signal(const SignalExpr& expr) {
    std::string out;
    bool first = true;
    for (const auto& term : expr.terms) {
        const double amp = term.amplitude;
        if (first) {
            if (amp < 0.0) out += "-";
        } else {
            out += (amp < 0.0) ? " - " : " + ";
        }
        first = false;
        const double mag = std::abs(amp);
        if (term.kind == Waveform::Constant) {
            out += detail::format_double(mag);
            continue;
        }
        out += detail::format_double(mag);
        out += "*";
        out += (term.kind == Waveform::Sin) ? "sin(" : "cos(";
        out += detail::format_double(term.frequency);
        out += "*t";
        if (term.phase != 0.0) {
            out += (term.phase < 0.0) ? "-" : "+";
            out += detail::format_double(std::abs(term.phase));
        }
        out += ")";
    }
    return out;
}

// =====================================================================
// Deterministic random streams
// =====================================================================

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent substream seed for (seed, stream), used for per-trial draws.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream ^ 0xA5A5A5A55A5A5A5AULL));
}

// Explicit-state generator; the mapping to [0,1) uses the top 53 bits so
// draws are identical on any platform with the same engine.
class Rng {
public:
    static constexpr const char* algorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

// Componentwise uniform draw inside [lower, upper]; degenerate boxes return
// the shared bound.
inline Vector sample_in_box(const Vector& lower, const Vector& upper, Rng& rng) {
    if (lower.size() != upper.size())
        throw ValidationError("sample_in_box: bound sizes differ");
    Vector out(lower.size());
    for (Index i = 0; i < lower.size(); ++i) {
        if (lower(i) > upper(i))
            throw ValidationError("sample_in_box: lower exceeds upper at component " +
                                  std::to_string(i));
        out(i) = lower(i) + rng.uniform01() * (upper(i) - lower(i));
        out(i) = std::min(std::max(out(i), lower(i)), upper(i));
    }
    return out;
}

} // namespace iobs
